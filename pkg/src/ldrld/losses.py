"""Distillation objective: pairwise relational KL plus global KL terms.

The total objective on one sample is

    total = task + alpha * (weighted_pairs + llki) + beta * rntk

where ``task`` is plain cross-entropy on the raw student logits,
``weighted_pairs`` sums a two-element temperature-softmax KL over every
rank pair of the top-d entries (each pair scaled by its adaptive decay
weight), ``llki`` is a d-way softmax KL over the same top-d entries and
``rntk`` is a softmax KL over the remaining C-d entries.  Teacher logits
enter every term as constants; the student's rank order is a frozen index
map, so gradients flow through the selected student values only.

Teacher-side probabilities are computed with the same stabilized formulas
the tensor primitives use, which makes every distillation term vanish
exactly (not merely approximately) when teacher and student logits agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as tt
from .pairs import AdwParams, build_pair_set
from .ranking import RankOrder, rank_by_student, split_top_d
from .tensor import Tensor, as_tensor, logsumexp_np, softplus_np

__all__ = [
    "DistillConfig",
    "LossBreakdown",
    "kl_two_point",
    "cross_entropy",
    "pair_loss",
    "llki_loss",
    "rntk_loss",
    "vanilla_kd_loss",
    "ldrld_objective",
    "ldrld_total",
]


@dataclass(frozen=True)
class DistillConfig:
    """Every scalar the objective needs.

    ``gamma`` is the weight of the plain full-softmax KL used by the vanilla
    distillation baseline; the relational objective itself does not consume
    it.  ``tau_square_scaling`` multiplies each temperature-softened KL term
    by tau**2 (the classic gradient-scale correction); it is off by default
    because the reference formulation omits it.
    """

    d: int = 7
    tau: float = 4.0
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 0.0
    adw: AdwParams = AdwParams()
    adw_enabled: bool = True
    tau_square_scaling: bool = False

    def __post_init__(self) -> None:
        if not isinstance(self.d, int) or self.d < 2:
            raise ValueError(f"pairing depth d must be an integer >= 2, got {self.d!r}")
        if not self.tau > 0:
            raise ValueError(f"temperature must be > 0, got {self.tau}")
        for name in ("alpha", "beta", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class LossBreakdown:
    """Scalar values of each objective term, for reporting and tests."""

    task: float
    weighted_pairs: float
    llki: float
    rntk: float
    total: float

    @staticmethod
    def mean(items: "list[LossBreakdown]") -> "LossBreakdown":
        n = len(items)
        if n == 0:
            raise ValueError("cannot average an empty list of breakdowns")
        return LossBreakdown(
            task=sum(b.task for b in items) / n,
            weighted_pairs=sum(b.weighted_pairs for b in items) / n,
            llki=sum(b.llki for b in items) / n,
            rntk=sum(b.rntk for b in items) / n,
            total=sum(b.total for b in items) / n,
        )


def _log_softmax_np(z: np.ndarray, tau: float) -> np.ndarray:
    # mirrors the tensor-side composition step for step (scale, logsumexp,
    # subtract) so constant and differentiated paths agree bitwise
    scaled = np.asarray(z, dtype=np.float64) * (1.0 / tau)
    return scaled - logsumexp_np(scaled)


def _softmax_kl(z_t_vals: np.ndarray, z_s, tau: float) -> Tensor:
    """KL(teacher softmax || student softmax) at temperature tau, student differentiable."""
    logp_t = _log_softmax_np(z_t_vals, tau)
    p_t = np.exp(logp_t)
    scaled = as_tensor(z_s) * (1.0 / tau)
    logp_s = scaled - tt.logsumexp(scaled)
    return ((logp_t - logp_s) * p_t).sum()


def kl_two_point(p_t, p_s) -> float:
    """KL divergence between two explicit two-point distributions."""
    pt = np.asarray(p_t, dtype=np.float64)
    ps = np.asarray(p_s, dtype=np.float64)
    if pt.shape != (2,) or ps.shape != (2,):
        raise ValueError(f"expected two-point distributions, got shapes {pt.shape}, {ps.shape}")
    for name, p in (("p_t", pt), ("p_s", ps)):
        if (p < 0).any():
            raise ValueError(f"{name} has a negative probability: {p}")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} does not sum to 1: {p}")
    out = 0.0
    for t, s in zip(pt, ps):
        if t == 0.0:
            continue  # 0 * log(0/q) == 0 by convention
        if s == 0.0:
            raise ValueError("KL is undefined: student assigns probability 0 where teacher does not")
        out += t * math.log(t / s)
    return out


def cross_entropy(z_s, label: int) -> Tensor:
    """Cross-entropy of the raw (temperature 1) student softmax against ``label``."""
    t = as_tensor(z_s)
    c = t.data.size
    if t.data.ndim != 1 or c == 0:
        raise ValueError(f"expected a non-empty logit vector, got shape {t.shape}")
    if not 0 <= label < c:
        raise ValueError(f"label {label} out of range for {c} classes")
    z_y = tt.gather(t, [label]).sum()
    return tt.logsumexp(t) - z_y


def pair_loss(top_t, top_s, cfg: DistillConfig) -> Tensor:
    """Weighted sum of two-element softmax KLs over every rank pair.

    ``top_t`` and ``top_s`` are the aligned teacher/student top-d values in
    rank order (student side may be a Tensor).  Each pair (i, j) contributes
    its adaptive decay weight (1.0 when ``cfg.adw_enabled`` is false) times
    the KL between the teacher and student two-element softmaxes of the
    values at ranks i and j.
    """
    ts = as_tensor(top_s)
    t_vals = np.asarray(top_t, dtype=np.float64)
    if t_vals.shape != ts.data.shape or t_vals.ndim != 1:
        raise ValueError(f"top value shapes differ: {t_vals.shape} vs {ts.data.shape}")
    if t_vals.size != cfg.d:
        raise ValueError(f"expected {cfg.d} top values, got {t_vals.size}")
    pair_set = build_pair_set(cfg.d, cfg.adw, cfg.adw_enabled)
    ii = np.array([i - 1 for i, _ in pair_set.pairs], dtype=np.int64)
    jj = np.array([j - 1 for _, j in pair_set.pairs], dtype=np.int64)

    inv_tau = 1.0 / cfg.tau
    x = (tt.gather(ts, ii) - tt.gather(ts, jj)) * inv_tau
    logps_i = -tt.softplus(-x)
    logps_j = -tt.softplus(x)

    xt = (t_vals[ii] - t_vals[jj]) * inv_tau
    logpt_i = -softplus_np(-xt)
    logpt_j = -softplus_np(xt)
    pt_i = np.exp(logpt_i)
    pt_j = np.exp(logpt_j)

    per_pair = (logpt_i - logps_i) * pt_i + (logpt_j - logps_j) * pt_j
    out = (per_pair * pair_set.weights).sum()
    if cfg.tau_square_scaling:
        out = out * (cfg.tau * cfg.tau)
    return out


def llki_loss(top_t, top_s, tau: float) -> Tensor:
    """Softmax KL over the selected top entries only (d-way renormalization)."""
    t_vals = np.asarray(top_t, dtype=np.float64)
    ts = as_tensor(top_s)
    if t_vals.shape != ts.data.shape or t_vals.ndim != 1 or t_vals.size == 0:
        raise ValueError(f"bad top value shapes: {t_vals.shape} vs {ts.data.shape}")
    if t_vals.size == 1:
        return as_tensor(0.0)  # one-point distributions always agree
    return _softmax_kl(t_vals, ts, tau)


def rntk_loss(rest_t, rest_s, tau: float) -> Tensor:
    """Softmax KL over the non-selected entries; 0 when fewer than two remain."""
    t_vals = np.asarray(rest_t, dtype=np.float64)
    ts = as_tensor(rest_s)
    if t_vals.shape != ts.data.shape:
        raise ValueError(f"rest value shapes differ: {t_vals.shape} vs {ts.data.shape}")
    if t_vals.size < 2:
        return as_tensor(0.0)
    return _softmax_kl(t_vals, ts, tau)


def vanilla_kd_loss(z_t, z_s, tau: float) -> Tensor:
    """Plain full-softmax KL between teacher and student at temperature tau."""
    t_vals = np.asarray(z_t, dtype=np.float64)
    ts = as_tensor(z_s)
    if t_vals.shape != ts.data.shape or t_vals.ndim != 1 or t_vals.size < 2:
        raise ValueError(f"bad logit shapes: {t_vals.shape} vs {ts.data.shape}")
    if not tau > 0:
        raise ValueError(f"temperature must be > 0, got {tau}")
    return _softmax_kl(t_vals, ts, tau)


def ldrld_objective(
    z_t,
    z_s,
    label: int,
    cfg: DistillConfig,
    order: RankOrder | None = None,
) -> tuple[Tensor, LossBreakdown]:
    """Differentiable total objective for one sample plus its term values.

    ``z_t`` is constant; ``z_s`` may be a Tensor on an active tape.  ``order``
    defaults to the student ranking of the current ``z_s`` values; pass a
    precomputed order to keep the selection frozen while values vary.  Terms
    whose multiplier is zero are skipped and reported as 0.0.
    """
    zt = np.asarray(z_t, dtype=np.float64)
    ts = as_tensor(z_s)
    if zt.shape != ts.data.shape or zt.ndim != 1:
        raise ValueError(f"teacher/student logit shapes differ: {zt.shape} vs {ts.data.shape}")
    c = zt.size
    if cfg.d > c:
        raise ValueError(f"pairing depth d={cfg.d} exceeds {c} classes")

    task = cross_entropy(ts, label)
    if cfg.alpha == 0.0 and cfg.beta == 0.0:
        t = task.item()
        return task, LossBreakdown(task=t, weighted_pairs=0.0, llki=0.0, rntk=0.0, total=t)

    if order is None:
        order = rank_by_student(ts.data)
    split = split_top_d(zt, ts.data, cfg.d, order)
    tau_sq = cfg.tau * cfg.tau

    wp_val = 0.0
    lk_val = 0.0
    rn_val = 0.0
    total = task
    if cfg.alpha != 0.0:
        top_s = tt.gather(ts, order.perm[: cfg.d])
        wp = pair_loss(split.top_t, top_s, cfg)
        lk = llki_loss(split.top_t, top_s, cfg.tau)
        if cfg.tau_square_scaling:
            lk = lk * tau_sq
        wp_val, lk_val = wp.item(), lk.item()
        total = total + (wp + lk) * cfg.alpha
    if cfg.beta != 0.0 and split.rest_t.size >= 2:
        rest_s = tt.gather(ts, order.perm[cfg.d :])
        rn = rntk_loss(split.rest_t, rest_s, cfg.tau)
        if cfg.tau_square_scaling:
            rn = rn * tau_sq
        rn_val = rn.item()
        total = total + rn * cfg.beta

    return total, LossBreakdown(
        task=task.item(),
        weighted_pairs=wp_val,
        llki=lk_val,
        rntk=rn_val,
        total=total.item(),
    )


def ldrld_total(
    z_t,
    z_s,
    label: int,
    cfg: DistillConfig,
    order: RankOrder | None = None,
) -> LossBreakdown:
    """Array-level evaluation of the full objective on one sample."""
    _, breakdown = ldrld_objective(z_t, z_s, label, cfg, order)
    return breakdown
