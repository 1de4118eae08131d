"""Brute-force reference implementations for differential testing.

Everything here is written for legibility, in plain Python loops and
``math`` calls, and deliberately shares no computation code with the
production modules: ranking is a literal extract-the-maximum loop, the
pair term is a double loop over explicit two-element softmaxes and the
weights are recomputed inline from their defining formulas.  These
functions exist to check the fast implementations, not to train models.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .losses import DistillConfig

__all__ = [
    "OracleSplit",
    "oracle_rank",
    "oracle_topd_recursive",
    "oracle_matmul",
    "oracle_softmax",
    "oracle_softmax_kl",
    "oracle_cross_entropy",
    "oracle_pair_weight",
    "oracle_pair_loss",
    "oracle_ldrld",
    "fd_gradient",
]


class OracleSplit(NamedTuple):
    top_t: list[float]
    top_s: list[float]
    rest_t: list[float]
    rest_s: list[float]


def oracle_rank(values: Sequence[float]) -> list[int]:
    """Selection-sort ranking: repeatedly take the largest remaining value.

    The scan keeps the first (lowest-index) occurrence on ties.
    """
    vals = [float(v) for v in values]
    remaining = list(range(len(vals)))
    out: list[int] = []
    while remaining:
        best = remaining[0]
        for k in remaining[1:]:
            if vals[k] > vals[best]:
                best = k
        out.append(best)
        remaining.remove(best)
    return out


def oracle_topd_recursive(z_t: Sequence[float], z_s: Sequence[float], d: int) -> OracleSplit:
    """Literal extract-max-then-exclude selection, applied index-for-index to both vectors."""
    zt = [float(v) for v in z_t]
    zs = [float(v) for v in z_s]
    if len(zt) != len(zs):
        raise ValueError(f"lengths differ: {len(zt)} vs {len(zs)}")
    if not 1 <= d <= len(zs):
        raise ValueError(f"d={d} out of range for {len(zs)} entries")
    excluded: set[int] = set()

    def extract() -> int:
        best = -1
        for k in range(len(zs)):
            if k in excluded:
                continue
            if best < 0 or zs[k] > zs[best]:
                best = k
        excluded.add(best)
        return best

    top = [extract() for _ in range(d)]
    rest = [extract() for _ in range(len(zs) - d)]
    return OracleSplit(
        top_t=[zt[k] for k in top],
        top_s=[zs[k] for k in top],
        rest_t=[zt[k] for k in rest],
        rest_s=[zs[k] for k in rest],
    )


def oracle_matmul(a, b) -> np.ndarray:
    """Triple-loop matrix product."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m, k = a.shape
    k2, n = b.shape
    if k != k2:
        raise ValueError(f"shape mismatch: {a.shape} @ {b.shape}")
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for t in range(k):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc
    return out


def oracle_softmax(z: Sequence[float], tau: float) -> list[float]:
    """Direct temperature softmax (max subtracted before exponentiation)."""
    vals = [float(v) for v in z]
    m = max(vals)
    e = [math.exp((v - m) / tau) for v in vals]
    s = sum(e)
    return [v / s for v in e]


def oracle_softmax_kl(z_t: Sequence[float], z_s: Sequence[float], tau: float) -> float:
    """KL(softmax(z_t / tau) || softmax(z_s / tau)) by the defining sum."""
    pt = oracle_softmax(z_t, tau)
    ps = oracle_softmax(z_s, tau)
    out = 0.0
    for t, s in zip(pt, ps):
        if t > 0.0:
            out += t * math.log(t / s)
    return out


def oracle_cross_entropy(z: Sequence[float], label: int) -> float:
    vals = [float(v) for v in z]
    m = max(vals)
    lse = m + math.log(sum(math.exp(v - m) for v in vals))
    return lse - vals[label]


def oracle_pair_weight(i: int, j: int, cfg: DistillConfig) -> float:
    """Adaptive decay weight recomputed from its defining formulas."""
    if not cfg.adw_enabled:
        return 1.0
    inverse_rank = 1.0 / (abs(i - j) + cfg.adw.epsilon)
    rank_decay = cfg.adw.delta * math.exp(-cfg.adw.lambda_ * (i + j))
    return inverse_rank * rank_decay


def _two_point_softmax(a: float, b: float, tau: float) -> tuple[float, float]:
    ea = math.exp(a / tau)
    eb = math.exp(b / tau)
    return ea / (ea + eb), eb / (ea + eb)


def oracle_pair_loss(top_t: Sequence[float], top_s: Sequence[float], cfg: DistillConfig) -> float:
    """Double loop over rank pairs of explicit two-element softmax KLs."""
    tt_vals = [float(v) for v in top_t]
    ts_vals = [float(v) for v in top_s]
    d = len(tt_vals)
    if d != len(ts_vals) or d != cfg.d:
        raise ValueError(f"expected {cfg.d} aligned top values, got {d} and {len(ts_vals)}")
    out = 0.0
    for j in range(2, d + 1):
        for i in range(1, j):
            pt_i, pt_j = _two_point_softmax(tt_vals[i - 1], tt_vals[j - 1], cfg.tau)
            ps_i, ps_j = _two_point_softmax(ts_vals[i - 1], ts_vals[j - 1], cfg.tau)
            kl = pt_i * math.log(pt_i / ps_i) + pt_j * math.log(pt_j / ps_j)
            out += oracle_pair_weight(i, j, cfg) * kl
    if cfg.tau_square_scaling:
        out *= cfg.tau * cfg.tau
    return out


def oracle_ldrld(z_t: Sequence[float], z_s: Sequence[float], label: int, cfg: DistillConfig) -> float:
    """Monolithic evaluation of the full per-sample objective."""
    zt = [float(v) for v in z_t]
    zs = [float(v) for v in z_s]
    if len(zt) != len(zs):
        raise ValueError(f"lengths differ: {len(zt)} vs {len(zs)}")
    if cfg.d > len(zs):
        raise ValueError(f"d={cfg.d} exceeds {len(zs)} classes")
    split = oracle_topd_recursive(zt, zs, cfg.d)

    task = oracle_cross_entropy(zs, label)
    weighted_pairs = oracle_pair_loss(split.top_t, split.top_s, cfg)
    llki = oracle_softmax_kl(split.top_t, split.top_s, cfg.tau)
    if len(split.rest_t) >= 2:
        rntk = oracle_softmax_kl(split.rest_t, split.rest_s, cfg.tau)
    else:
        rntk = 0.0
    if cfg.tau_square_scaling:
        llki *= cfg.tau * cfg.tau
        rntk *= cfg.tau * cfg.tau
    return task + cfg.alpha * (weighted_pairs + llki) + cfg.beta * rntk


def fd_gradient(f: Callable[[np.ndarray], float], x, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a scalar function of a vector."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    for k in range(x.size):
        hi = x.copy()
        lo = x.copy()
        hi[k] += h
        lo[k] -= h
        f_hi = float(f(hi))
        f_lo = float(f(lo))
        if not (math.isfinite(f_hi) and math.isfinite(f_lo)):
            raise FloatingPointError(f"non-finite evaluation at coordinate {k}")
        out[k] = (f_hi - f_lo) / (2.0 * h)
    return out
