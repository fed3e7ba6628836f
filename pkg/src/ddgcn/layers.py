"""Model building blocks.

CAGC: graph convolution over the directed skeleton with per-subset kernels
and a learned channel-wise correlation term. STSE: windowed multi-head
self-attention with a relative-position bias, followed by grouped temporal
convolution, shortcut and layer normalization. Ten stacked layers plus
global pooling and a softmax head form the classifier; joint and bone
streams can be fused by score averaging.

All layers accept a single sequence (T, V, C) or a batch (B, T, V, C).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine as eg
from .engine import Parameter, Tensor
from .errors import ConfigError, ShapeError
from .graph import (
    SkeletonTopology,
    PartitionLabeling,
    build_adjacency,
    make_partition,
    masked_normalized_adjacency,
    partition_adjacency,
)
from .windows import WindowSpec, relative_position_index, split_windows


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def correlation_width(out_channels: int) -> int:
    """Bottleneck width of the correlation branch: C_out / 4, at least 4."""
    return max(out_channels // 4, 4)


def _as_batch(x) -> tuple[Tensor, bool]:
    t = x if isinstance(x, Tensor) else Tensor(x)
    if t.ndim == 3:
        return eg.reshape(t, (1,) + t.shape), True
    if t.ndim == 4:
        return t, False
    raise ShapeError(f"expected (T, V, C) or (B, T, V, C), got {t.shape}")


class CAGC:
    """Channel-wise adaptive graph convolution.

    Each partition subset k masks A + I, is symmetrically degree-normalized
    and mixes channels with its own kernel. The correlation term alpha * A'
    (one V x V map per output channel, from pairwise differences of
    temporally pooled joint features) is added, unnormalized and unmasked,
    to the first subset's branch; alpha starts at 0 so the initial layer is
    the plain normalized-adjacency convolution.
    """

    def __init__(self, in_channels: int, out_channels: int, topology: SkeletonTopology,
                 labeling: PartitionLabeling, rng: np.random.Generator, name: str = "cagc"):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.num_joints = topology.num_joints
        self.masks = [Tensor(m) for m in masked_normalized_adjacency(topology, labeling)]
        width = correlation_width(out_channels)
        self.weights = [
            Parameter(_uniform(rng, (in_channels, out_channels), in_channels), f"{name}.w{k}")
            for k in range(labeling.num_subsets)
        ]
        self.alpha = Parameter(0.0, f"{name}.alpha")
        self.theta = Parameter(_uniform(rng, (in_channels, width), in_channels), f"{name}.theta")
        self.phi = Parameter(_uniform(rng, (in_channels, width), in_channels), f"{name}.phi")
        self.xi = Parameter(_uniform(rng, (width, out_channels), width), f"{name}.xi")

    def parameters(self) -> list[Parameter]:
        return [*self.weights, self.alpha, self.theta, self.phi, self.xi]

    def correlation(self, x) -> Tensor:
        """Pairwise channel correlations A'.

        (T, V, C_in) -> (C_out, V, V); batched input adds a leading B.
        Entry [c, i, j] is xi(tanh(theta(xbar_i) - phi(xbar_j)))[c] with
        xbar the temporal mean per joint.
        """
        xb, squeeze = _as_batch(x)
        b, _, v, _ = xb.shape
        width = self.theta.shape[1]
        xbar = eg.mean_pool(xb, axis=1)
        left = eg.reshape(xbar @ self.theta, (b, v, 1, width))
        right = eg.reshape(xbar @ self.phi, (b, 1, v, width))
        corr = eg.tanh(left - right) @ self.xi
        corr = eg.transpose(corr, (0, 3, 1, 2))
        return eg.reshape(corr, corr.shape[1:]) if squeeze else corr

    def forward(self, x, activate: bool = True) -> Tensor:
        """(T, V, C_in) -> (T, V, C_out); ReLU unless ``activate`` is False."""
        xb, squeeze = _as_batch(x)
        if xb.shape[2] != self.num_joints or xb.shape[3] != self.in_channels:
            raise ShapeError(
                f"cagc: expected {self.num_joints} joints x {self.in_channels} channels, got {xb.shape}")
        total = None
        first_mixed = None
        for k, mask in enumerate(self.masks):
            mixed = xb @ self.weights[k]
            if k == 0:
                first_mixed = mixed
            branch = mask @ mixed
            total = branch if total is None else total + branch
        corr = self.correlation(xb)
        per_channel = eg.transpose(first_mixed, (0, 3, 2, 1))
        adaptive = eg.transpose(corr @ per_channel, (0, 3, 2, 1))
        total = total + self.alpha * adaptive
        out = eg.relu(total) if activate else total
        return eg.reshape(out, out.shape[1:]) if squeeze else out


def sgc_reference(x: np.ndarray, topology: SkeletonTopology, labeling: PartitionLabeling,
                  weights: list[np.ndarray], normalization: str = "symmetric") -> np.ndarray:
    """Per-vertex spatial graph convolution, written as explicit loops.

    This is the oracle path for the vectorized CAGC: each root gathers its
    neighbors under A + I, weighting either by the inverse cardinality of
    the neighbor's subset ("cardinality") or by symmetric degree
    normalization of the masked adjacency ("symmetric"). No nonlinearity.
    """
    if normalization not in ("cardinality", "symmetric"):
        raise ValueError(f"unknown normalization {normalization!r}")
    v = topology.num_joints
    t, vx, _ = x.shape
    if vx != v:
        raise ShapeError(f"input has {vx} joints, topology has {v}")
    adj = build_adjacency(topology)
    full = adj + np.eye(v)
    out = np.zeros((t, v, weights[0].shape[1]), dtype=np.float64)

    inv_sqrt = []
    for k in range(labeling.num_subsets):
        masked = partition_adjacency(adj, labeling, k)
        deg = masked.sum(axis=1)
        inv_sqrt.append(np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0))

    for i in range(v):
        neighborhood = [j for j in range(v) if full[i, j] != 0.0]
        counts = {}
        for j in neighborhood:
            k = labeling.label_of(i, j)
            counts[k] = counts.get(k, 0) + 1
        for j in neighborhood:
            k = labeling.label_of(i, j)
            if normalization == "cardinality":
                coeff = 1.0 / counts[k]
            else:
                coeff = inv_sqrt[k][i] * full[i, j] * inv_sqrt[k][j]
            out[:, i, :] += coeff * (x[:, j, :] @ weights[k])
    return out


class STSE:
    """Spatio-temporal synchronous encoder.

    The sequence is tiled into non-overlapping windows whose tokens are
    mixed by multi-head attention with a relative-position bias, merged
    back, passed through a grouped temporal convolution, and stabilized by
    a shortcut plus layer normalization. A temporal stride > 1 shrinks T to
    ceil(T / stride) inside the convolution (the shortcut is subsampled to
    match).
    """

    def __init__(self, channels: int, spec: WindowSpec, heads: int, kernel: int,
                 groups: int, stride: int, rng: np.random.Generator, name: str = "stse"):
        if channels % heads != 0:
            raise ConfigError(f"heads={heads} must divide channels={channels}")
        if channels % groups != 0:
            raise ConfigError(f"groups={groups} must divide channels={channels}")
        self.channels = channels
        self.spec = spec
        self.heads = heads
        self.groups = groups
        self.stride = stride
        self.rel_index = relative_position_index(spec)
        c = channels
        self.wq = Parameter(_uniform(rng, (c, c), c), f"{name}.wq")
        self.wk = Parameter(_uniform(rng, (c, c), c), f"{name}.wk")
        self.wv = Parameter(_uniform(rng, (c, c), c), f"{name}.wv")
        self.wo = Parameter(_uniform(rng, (c, c), c), f"{name}.wo")
        # no key bias: it shifts every score in a row equally, which softmax
        # cancels, leaving a parameter that can never receive gradient
        self.bq = Parameter(np.zeros(c), f"{name}.bq")
        self.bv = Parameter(np.zeros(c), f"{name}.bv")
        self.bo = Parameter(np.zeros(c), f"{name}.bo")
        self.bias_tables = Parameter(np.zeros((heads, spec.bias_table_size)), f"{name}.bias")
        self.gtc_weight = Parameter(
            _uniform(rng, (c, c // groups, kernel), (c // groups) * kernel), f"{name}.gtc")
        self.ln_gamma = Parameter(np.ones(c), f"{name}.ln_gamma")
        self.ln_beta = Parameter(np.zeros(c), f"{name}.ln_beta")
        self.last_attention: np.ndarray | None = None

    def parameters(self) -> list[Parameter]:
        return [self.wq, self.wk, self.wv, self.wo, self.bq, self.bv, self.bo,
                self.bias_tables, self.gtc_weight, self.ln_gamma, self.ln_beta]

    def attend(self, tokens: Tensor) -> Tensor:
        """Multi-head attention inside each window; (B, n, L, C) -> same."""
        b, n, length, c = tokens.shape
        h = self.heads
        head_dim = c // h

        def heads_of(proj, bias=None, transposed=False):
            mapped = tokens @ proj if bias is None else tokens @ proj + bias
            p = eg.reshape(mapped, (b, n, length, h, head_dim))
            axes = (0, 1, 3, 4, 2) if transposed else (0, 1, 3, 2, 4)
            return eg.transpose(p, axes)

        q = heads_of(self.wq, self.bq)
        k_t = heads_of(self.wk, transposed=True)
        v = heads_of(self.wv, self.bv)
        scores = eg.scalar_mul(q @ k_t, 1.0 / np.sqrt(head_dim))
        scores = scores + eg.gather(self.bias_tables, self.rel_index)
        attn = eg.softmax(scores)
        self.last_attention = attn.data
        ctx = attn @ v
        merged = eg.reshape(eg.transpose(ctx, (0, 1, 3, 2, 4)), (b, n, length, c))
        return merged @ self.wo + self.bo

    def msa_window(self, tokens) -> Tensor:
        """Single-window surface: (M*N, C) tokens in, (M*N, C) out."""
        t = tokens if isinstance(tokens, Tensor) else Tensor(tokens)
        if t.ndim != 2:
            raise ShapeError(f"msa_window expects (tokens, channels), got {t.shape}")
        out = self.attend(eg.reshape(t, (1, 1) + t.shape))
        return eg.reshape(out, t.shape)

    def forward(self, x) -> Tensor:
        xb, squeeze = _as_batch(x)
        b, t, v, c = xb.shape
        if c != self.channels:
            raise ShapeError(f"stse: expected {self.channels} channels, got {c}")
        layout = split_windows(t, v, self.spec)
        h = xb
        if layout.padded_frames > t:
            h = eg.take(h, layout.pad_frames, axis=1)
        flat = eg.reshape(h, (b, layout.padded_frames * v, c))
        tokens = eg.reshape(eg.take(flat, layout.gather, axis=1),
                            (b, layout.num_windows, self.spec.tokens, c))
        mixed = self.attend(tokens)
        seq = eg.reshape(mixed, (b, layout.padded_frames * v, c))
        seq = eg.reshape(eg.take(seq, layout.scatter, axis=1), (b, layout.padded_frames, v, c))
        if layout.padded_frames > t:
            seq = eg.take(seq, np.arange(t), axis=1)
        y = eg.temporal_conv(seq, self.gtc_weight, self.groups, self.stride)
        shortcut = xb if self.stride == 1 else eg.take(xb, np.arange(0, t, self.stride), axis=1)
        out = eg.layer_norm(y + shortcut, self.ln_gamma, self.ln_beta)
        return eg.reshape(out, out.shape[1:]) if squeeze else out


class STGCLayer:
    """One stacked unit: CAGC into STSE, with an identity shortcut across
    the pair when channels and temporal length are preserved."""

    def __init__(self, in_channels: int, out_channels: int, stride: int,
                 topology: SkeletonTopology, labeling: PartitionLabeling, spec: WindowSpec,
                 heads: int, kernel: int, groups: int, rng: np.random.Generator, name: str):
        self.cagc = CAGC(in_channels, out_channels, topology, labeling, rng, f"{name}.cagc")
        self.stse = STSE(out_channels, spec, heads, kernel, groups, stride, rng, f"{name}.stse")
        self.residual = in_channels == out_channels and stride == 1

    def parameters(self) -> list[Parameter]:
        return self.cagc.parameters() + self.stse.parameters()

    def forward(self, x) -> Tensor:
        xb, squeeze = _as_batch(x)
        out = self.stse.forward(self.cagc.forward(xb))
        if self.residual:
            out = out + xb
        return eg.reshape(out, out.shape[1:]) if squeeze else out


DEFAULT_CHANNELS = (64, 64, 64, 64, 128, 128, 128, 256, 256, 256)
DEFAULT_STRIDES = (1, 1, 1, 1, 2, 1, 1, 2, 1, 1)


@dataclass(frozen=True)
class ModelConfig:
    """Static description of the stacked classifier."""

    topology: SkeletonTopology
    num_classes: int
    strategy: str = "activity"
    channels: tuple[int, ...] = DEFAULT_CHANNELS
    strides: tuple[int, ...] = DEFAULT_STRIDES
    window: WindowSpec = WindowSpec(4, 25)
    heads: int = 4
    kernel: int = 5
    groups: int = 4
    in_channels: int = 3

    def __post_init__(self):
        if self.num_classes < 2:
            raise ConfigError("need at least two classes")
        if len(self.channels) != len(self.strides):
            raise ConfigError("channels and strides must have the same length")
        if not self.channels:
            raise ConfigError("at least one layer is required")
        for c in self.channels:
            if c % self.heads != 0:
                raise ConfigError(f"heads={self.heads} must divide every layer width, got {c}")
            if c % self.groups != 0:
                raise ConfigError(f"groups={self.groups} must divide every layer width, got {c}")
        if self.topology.num_joints % self.window.joints != 0:
            raise ConfigError(
                f"window width {self.window.joints} must divide joint count {self.topology.num_joints}")
        for s in self.strides:
            if s < 1:
                raise ConfigError("strides must be >= 1")


class DDGCNModel:
    """Stacked CAGC + STSE layers with global pooling and a softmax head."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        labeling = make_partition(config.topology, config.strategy)
        self.labeling = labeling
        c0 = config.channels[0]
        self.embed_w = Parameter(_uniform(rng, (config.in_channels, c0), config.in_channels), "embed.weight")
        self.embed_b = Parameter(np.zeros(c0), "embed.bias")
        self.layers = []
        prev = c0
        for i, (width, stride) in enumerate(zip(config.channels, config.strides)):
            self.layers.append(STGCLayer(
                prev, width, stride, config.topology, labeling, config.window,
                config.heads, config.kernel, config.groups, rng, f"layers.{i}"))
            prev = width
        # Zero head: the untrained model scores every class equally, so the
        # initial loss is exactly ln(num_classes).
        self.head_w = Parameter(np.zeros((prev, config.num_classes)), "head.weight")
        self.head_b = Parameter(np.zeros(config.num_classes), "head.bias")

    def parameters(self) -> list[Parameter]:
        params = [self.embed_w, self.embed_b]
        for layer in self.layers:
            params.extend(layer.parameters())
        params.extend([self.head_w, self.head_b])
        return params

    def logits(self, x) -> Tensor:
        """Class scores before softmax: (T, V, C) -> (K,), batched -> (B, K)."""
        xb, squeeze = _as_batch(x)
        v, c = self.config.topology.num_joints, self.config.in_channels
        if xb.shape[2] != v or xb.shape[3] != c:
            raise ShapeError(f"model expects {v} joints x {c} channels, got {xb.shape}")
        h = xb @ self.embed_w + self.embed_b
        for layer in self.layers:
            h = layer.forward(h)
        feat = eg.mean_pool(h, axis=(1, 2))
        out = feat @ self.head_w + self.head_b
        return eg.reshape(out, out.shape[1:]) if squeeze else out

    def forward(self, x) -> Tensor:
        """Class probabilities; rows sum to one."""
        return eg.softmax(self.logits(x))

    def predict_proba(self, x) -> np.ndarray:
        return self.forward(x).data

    def save(self, path) -> None:
        eg.save_checkpoint(self.parameters(), path)

    def load(self, path) -> None:
        eg.assign_checkpoint(self.parameters(), eg.load_checkpoint(path))


def bone_transform(frames: np.ndarray, topology: SkeletonTopology) -> np.ndarray:
    """Joint coordinates -> bone vectors (child minus parent; zero at the root).

    Works on (T, V, C) or any leading batch shape; invariant to global
    translation of the skeleton.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[-2] != topology.num_joints:
        raise ShapeError(f"expected {topology.num_joints} joints, got {frames.shape[-2]}")
    parents = topology.parent_of()
    bones = np.zeros_like(frames)
    for j in range(topology.num_joints):
        if parents[j] >= 0:
            bones[..., j, :] = frames[..., j, :] - frames[..., parents[j], :]
    return bones


def fuse_scores(p_first: np.ndarray, p_second: np.ndarray) -> np.ndarray:
    """Elementwise mean of two score vectors; argmax gives the fused label."""
    a = np.asarray(p_first, dtype=np.float64)
    b = np.asarray(p_second, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"score shapes differ: {a.shape} vs {b.shape}")
    return 0.5 * (a + b)
