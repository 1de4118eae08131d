"""SGD training loops for supervised learning and teacher-student distillation.

One mini-batch step: forward the batch, build the per-sample objective,
average the sample losses in a fixed order, replay the tape backward and
apply one SGD update.  Everything downstream of the seeds is deterministic,
so identical specs produce bit-identical parameter trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import tensor as tt
from .data import Dataset, iter_batches
from .losses import DistillConfig, LossBreakdown, cross_entropy, ldrld_objective
from .models import Mlp, MlpSpec
from .tensor import Tape, Tensor

__all__ = [
    "TrainSpec",
    "TrainRecord",
    "Sgd",
    "lr_at_epoch",
    "evaluate",
    "train_supervised",
    "distill",
]


@dataclass(frozen=True)
class TrainSpec:
    """Optimization schedule: SGD with momentum, linear warmup, step drops."""

    epochs: int
    batch_size: int = 64
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 5e-4
    warmup_epochs: int = 0
    lr_drop_epochs: tuple[int, ...] = ()
    lr_drop_factor: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "lr_drop_epochs", tuple(int(e) for e in self.lr_drop_epochs))
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.lr > 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.warmup_epochs < 0 or self.warmup_epochs > self.epochs:
            raise ValueError(f"warmup_epochs must be in [0, epochs], got {self.warmup_epochs}")
        if any(b <= a for a, b in zip(self.lr_drop_epochs, self.lr_drop_epochs[1:])):
            raise ValueError(f"lr_drop_epochs must be strictly increasing: {self.lr_drop_epochs}")
        if not 0 < self.lr_drop_factor <= 1:
            raise ValueError(f"lr_drop_factor must be in (0, 1], got {self.lr_drop_factor}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")


def lr_at_epoch(tspec: TrainSpec, epoch: int) -> float:
    """Linear warmup to the base rate, then a step drop per passed drop epoch."""
    if not 0 <= epoch < tspec.epochs:
        raise ValueError(f"epoch {epoch} out of range for {tspec.epochs} epochs")
    if epoch < tspec.warmup_epochs:
        return tspec.lr * (epoch + 1) / tspec.warmup_epochs
    passed = sum(1 for e in tspec.lr_drop_epochs if epoch >= e)
    return tspec.lr * tspec.lr_drop_factor**passed


@dataclass
class TrainRecord:
    """Per-epoch curves plus the final parameters of one training run."""

    seed: int
    train_loss: list[LossBreakdown] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    eval_accuracy: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    final_params: list[np.ndarray] = field(default_factory=list)


class Sgd:
    """SGD with classic momentum and decoupled-by-addition weight decay.

    With momentum and weight decay both 0 a step is exactly
    ``param -= lr * grad``.
    """

    def __init__(self, params: list[Tensor], momentum: float, weight_decay: float) -> None:
        self.params = params
        self.momentum = momentum
        self.weight_decay = weight_decay
        self._buffers: list[np.ndarray | None] = [None] * len(params)

    def step(self, lr: float) -> None:
        for k, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            if self.momentum:
                buf = self._buffers[k]
                buf = g if buf is None else self.momentum * buf + g
                self._buffers[k] = buf
                g = buf
            p.data = p.data - lr * g

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def evaluate(model: Mlp, dataset: Dataset, batch_size: int = 512) -> float:
    """Top-1 accuracy with deterministic argmax tie-breaking (lower index)."""
    correct = 0
    for start in range(0, len(dataset), batch_size):
        rows = dataset.features[start : start + batch_size]
        pred = model.predict(rows)
        correct += int((pred == dataset.labels[start : start + batch_size]).sum())
    return correct / len(dataset)


BatchHook = Callable[[int, int, list[LossBreakdown]], None]


def _run_epochs(
    model: Mlp,
    tspec: TrainSpec,
    data: Dataset,
    eval_data: Dataset,
    sample_loss: Callable[[Tensor, np.ndarray, int], tuple[Tensor, LossBreakdown]],
    on_batch: BatchHook | None = None,
) -> TrainRecord:
    n = len(data)
    opt = Sgd(model.params, tspec.momentum, tspec.weight_decay)
    record = TrainRecord(seed=tspec.seed)
    for epoch in range(tspec.epochs):
        lr = lr_at_epoch(tspec, epoch)
        sums = np.zeros(5)  # task, weighted_pairs, llki, rntk, total
        correct = 0
        for batch_index, idx in enumerate(iter_batches(n, tspec.batch_size, tspec.seed, epoch)):
            xb = data.features[idx]
            with Tape():
                logits = model.forward(xb)
                total: Tensor | None = None
                breakdowns: list[LossBreakdown] = []
                for k in range(idx.size):
                    z_row = tt.take_row(logits, k)
                    sample_total, bd = sample_loss(z_row, idx, k)
                    breakdowns.append(bd)
                    total = sample_total if total is None else total + sample_total
                batch_loss = total * (1.0 / idx.size)
            batch_loss.backward()
            opt.step(lr)
            opt.zero_grad()
            correct += int((np.argmax(logits.data, axis=1) == data.labels[idx]).sum())
            for bd in breakdowns:
                sums += (bd.task, bd.weighted_pairs, bd.llki, bd.rntk, bd.total)
            if on_batch is not None:
                on_batch(epoch, batch_index, breakdowns)
        record.train_loss.append(LossBreakdown(*(float(v) for v in sums / n)))
        record.train_accuracy.append(correct / n)
        record.eval_accuracy.append(evaluate(model, eval_data))
        record.lr.append(lr)
    record.final_params = [p.data for p in model.params]
    return record


def train_supervised(
    spec: MlpSpec,
    tspec: TrainSpec,
    data: Dataset,
    eval_data: Dataset,
    on_batch: BatchHook | None = None,
) -> tuple[Mlp, TrainRecord]:
    """Train a fresh model on cross-entropy alone."""
    if spec.num_classes != data.num_classes or spec.input_dim != data.features.shape[1]:
        raise ValueError(
            f"model spec ({spec.input_dim} -> {spec.num_classes}) does not match dataset "
            f"({data.features.shape[1]} -> {data.num_classes})"
        )
    model = Mlp(spec)

    def sample_loss(z_row: Tensor, idx: np.ndarray, k: int):
        task = cross_entropy(z_row, int(data.labels[idx[k]]))
        t = task.item()
        return task, LossBreakdown(task=t, weighted_pairs=0.0, llki=0.0, rntk=0.0, total=t)

    record = _run_epochs(model, tspec, data, eval_data, sample_loss, on_batch)
    return model, record


def distill(
    teacher: Mlp,
    spec: MlpSpec,
    tspec: TrainSpec,
    cfg: DistillConfig,
    data: Dataset,
    eval_data: Dataset,
    on_batch: BatchHook | None = None,
) -> tuple[Mlp, TrainRecord]:
    """Train a fresh student against a frozen teacher with the full objective.

    Teacher logits for the whole training set are computed once up front
    (the teacher never changes) and enter the loss as constants.
    """
    if teacher.spec.num_classes != data.num_classes:
        raise ValueError(
            f"teacher has {teacher.spec.num_classes} classes, dataset has {data.num_classes}"
        )
    if teacher.spec.input_dim != data.features.shape[1]:
        raise ValueError(
            f"teacher input_dim {teacher.spec.input_dim} does not match "
            f"feature dim {data.features.shape[1]}"
        )
    if spec.num_classes != data.num_classes or spec.input_dim != data.features.shape[1]:
        raise ValueError(
            f"student spec ({spec.input_dim} -> {spec.num_classes}) does not match dataset "
            f"({data.features.shape[1]} -> {data.num_classes})"
        )
    if cfg.d > data.num_classes:
        raise ValueError(f"pairing depth d={cfg.d} exceeds {data.num_classes} classes")

    for p in teacher.params:
        p.requires_grad = False
    teacher_logits = teacher.forward(data.features).data

    model = Mlp(spec)

    def sample_loss(z_row: Tensor, idx: np.ndarray, k: int):
        gi = int(idx[k])
        return ldrld_objective(teacher_logits[gi], z_row, int(data.labels[gi]), cfg)

    record = _run_epochs(model, tspec, data, eval_data, sample_loss, on_batch)
    return model, record
