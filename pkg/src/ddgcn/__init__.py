"""Skeleton-based action recognition with directed-graph convolutions,
windowed spatio-temporal attention, and a minimal NumPy autodiff engine."""

from . import checks, cli, data, engine, graph, layers, train, windows
from .engine import Parameter, Tensor
from .graph import SkeletonTopology, get_topology, make_partition
from .layers import DDGCNModel, ModelConfig, bone_transform, fuse_scores
from .windows import WindowSpec

__version__ = "0.1.0"

__all__ = [
    "checks", "cli", "data", "engine", "graph", "layers", "train", "windows",
    "Parameter", "Tensor", "SkeletonTopology", "get_topology", "make_partition",
    "DDGCNModel", "ModelConfig", "bone_transform", "fuse_scores", "WindowSpec",
    "__version__",
]
