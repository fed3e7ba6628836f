"""Training loop, Adam optimizer, step-decay schedule and evaluation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import engine as eg
from .data import SkeletonSample
from .errors import ConfigError, ShapeError
from .layers import DDGCNModel, bone_transform, fuse_scores


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 80
    batch_size: int = 64
    base_lr: float = 0.1
    lr_decay: float = 0.1
    decay_every: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.decay_every < 1:
            raise ConfigError("epochs, batch_size and decay_every must be positive")
        if self.base_lr <= 0 or not 0 < self.lr_decay <= 1:
            raise ConfigError("base_lr must be positive and lr_decay in (0, 1]")


def lr_at(epoch: int, config: TrainConfig) -> float:
    """Step decay: base_lr * decay^(epoch // decay_every)."""
    if epoch < 0:
        raise ConfigError("epoch must be non-negative")
    return config.base_lr * config.lr_decay ** (epoch // config.decay_every)


class Adam:
    """Standard Adam with bias correction; one slot pair per parameter."""

    def __init__(self, params: list[eg.Parameter], config: TrainConfig):
        self.params = params
        self.beta1 = config.beta1
        self.beta2 = config.beta2
        self.eps = config.eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def step(self, lr: float) -> None:
        self.step_count += 1
        t = self.step_count
        for i, p in enumerate(self.params):
            g = p.grad
            if g.shape != p.data.shape:
                raise ShapeError(f"gradient shape mismatch for {p.name}")
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / (1.0 - self.beta1 ** t)
            v_hat = self.v[i] / (1.0 - self.beta2 ** t)
            p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adam_step(optimizer: Adam, lr: float) -> None:
    """One update from the gradients currently held by the parameters."""
    optimizer.step(lr)


@dataclass(frozen=True)
class HistoryRow:
    epoch: int
    lr: float
    loss: float
    accuracy: float


def _stack_batch(samples: list[SkeletonSample]) -> tuple[np.ndarray, np.ndarray]:
    frames = np.stack([s.frames for s in samples])
    labels = np.asarray([s.label for s in samples], dtype=np.int64)
    return frames, labels


def train(model: DDGCNModel, dataset: list[SkeletonSample], config: TrainConfig,
          log=None) -> list[HistoryRow]:
    """Mini-batch cross-entropy training; deterministic for a fixed seed.

    Samples are reshuffled every epoch from one seeded stream. The history
    holds one row per epoch with the mean batch loss and the training
    accuracy measured on the same forward passes.
    """
    if not dataset:
        raise ConfigError("training requires a non-empty dataset")
    lengths = {s.frames.shape[0] for s in dataset}
    if len(lengths) != 1:
        raise ConfigError(f"all samples must share one temporal length, got {sorted(lengths)}")
    params = model.parameters()
    optimizer = Adam(params, config)
    rng = np.random.default_rng(config.seed)
    history = []
    for epoch in range(config.epochs):
        lr = lr_at(epoch, config)
        order = rng.permutation(len(dataset))
        total_loss = 0.0
        correct = 0
        for start in range(0, len(dataset), config.batch_size):
            batch = [dataset[i] for i in order[start:start + config.batch_size]]
            frames, labels = _stack_batch(batch)
            eg.zero_grads(params)
            logits = model.logits(frames)
            loss = eg.cross_entropy(logits, labels)
            loss.backward()
            optimizer.step(lr)
            total_loss += loss.item() * len(batch)
            correct += int((logits.data.argmax(axis=1) == labels).sum())
        row = HistoryRow(epoch=epoch, lr=lr, loss=total_loss / len(dataset),
                         accuracy=correct / len(dataset))
        history.append(row)
        if log is not None:
            log(row)
    return history


def evaluate(model: DDGCNModel, dataset: list[SkeletonSample]) -> float:
    """Top-1 accuracy; argmax ties break to the lowest class index."""
    if not dataset:
        raise ConfigError("evaluation requires a non-empty dataset")
    correct = 0
    for sample in dataset:
        probs = model.predict_proba(sample.frames)
        correct += int(int(np.argmax(probs)) == sample.label)
    return correct / len(dataset)


def evaluate_fused(model_joint: DDGCNModel, model_bone: DDGCNModel,
                   dataset: list[SkeletonSample], derive_bones: bool = True) -> float:
    """Top-1 accuracy of the score-averaged two-stream ensemble.

    ``dataset`` holds joint coordinates; with ``derive_bones`` the second
    model sees the bone stream derived with its topology, otherwise both
    models score the same frames.
    """
    if not dataset:
        raise ConfigError("evaluation requires a non-empty dataset")
    topology = model_bone.config.topology
    correct = 0
    for sample in dataset:
        second = bone_transform(sample.frames, topology) if derive_bones else sample.frames
        fused = fuse_scores(model_joint.predict_proba(sample.frames),
                            model_bone.predict_proba(second))
        correct += int(int(np.argmax(fused)) == sample.label)
    return correct / len(dataset)


HISTORY_FIELDS = ("epoch", "lr", "loss", "accuracy")


def write_history_csv(history: list[HistoryRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(HISTORY_FIELDS)
        for row in history:
            writer.writerow([row.epoch, repr(row.lr), repr(row.loss), repr(row.accuracy)])


def read_history_csv(path: str | Path) -> list[HistoryRow]:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or tuple(reader.fieldnames) != HISTORY_FIELDS:
            raise ValueError(f"{path}: expected header {','.join(HISTORY_FIELDS)}")
        for rec in reader:
            rows.append(HistoryRow(epoch=int(rec["epoch"]), lr=float(rec["lr"]),
                                   loss=float(rec["loss"]), accuracy=float(rec["accuracy"])))
    return rows
