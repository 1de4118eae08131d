"""Rank-pair enumeration and adaptive decay weights.

For a depth-d selection the d(d-1)/2 unordered rank pairs are enumerated in
the order the recursive pairing produces them: (1,2); (1,3),(2,3);
(1,4),(2,4),(3,4); ...  Each pair (i,j) carries a weight that is the product
of two factors computed from the 1-based rank numbers alone:

* inverse rank weighting, 1/(|i-j| + epsilon), which emphasizes pairs of
  adjacent ranks;
* exponential rank decay, delta * exp(-lambda * (i+j)), which emphasizes
  pairs near the top of the ranking.

Weights are plain constants: no gradient flows through them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = ["AdwParams", "PairSet", "irw", "erd", "adw", "generate_pairs", "build_pair_set"]


@dataclass(frozen=True)
class AdwParams:
    """Constants of the adaptive decay weight; defaults follow the reference recipe."""

    epsilon: float = 1.50
    delta: float = 2.0
    lambda_: float = 0.05

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not self.delta > 0:
            raise ValueError(f"delta must be > 0, got {self.delta}")
        if self.lambda_ < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lambda_}")


def _check_ranks(r1: int, r2: int) -> None:
    if r1 < 1 or r2 < 1:
        raise ValueError(f"ranks must be >= 1, got ({r1}, {r2})")


def irw(r1: int, r2: int, params: AdwParams = AdwParams()) -> float:
    """Inverse rank weighting 1/(|r1-r2| + epsilon) for two distinct ranks."""
    _check_ranks(r1, r2)
    if r1 == r2:
        raise ValueError(f"inverse rank weighting is undefined for equal ranks ({r1})")
    return 1.0 / (abs(r1 - r2) + params.epsilon)


def erd(r1: int, r2: int, params: AdwParams = AdwParams()) -> float:
    """Exponential rank decay delta * exp(-lambda * (r1 + r2))."""
    _check_ranks(r1, r2)
    return params.delta * math.exp(-params.lambda_ * (r1 + r2))


def adw(r1: int, r2: int, params: AdwParams = AdwParams()) -> float:
    """Adaptive decay weight: the product irw * erd, always finite and > 0."""
    return irw(r1, r2, params) * erd(r1, r2, params)


def generate_pairs(d: int) -> list[tuple[int, int]]:
    """All 1-based rank pairs (i, j) with i < j <= d, j ascending then i."""
    if d < 2:
        raise ValueError(f"pair generation needs depth >= 2, got d={d}")
    return [(i, j) for j in range(2, d + 1) for i in range(1, j)]


@dataclass(frozen=True)
class PairSet:
    """Enumerated rank pairs with their aligned weights."""

    pairs: tuple[tuple[int, int], ...]
    weights: np.ndarray

    def __post_init__(self) -> None:
        if len(self.pairs) != self.weights.size:
            raise ValueError("pairs and weights must align")
        if not np.all(self.weights > 0):
            raise ValueError("all pair weights must be strictly positive")


@lru_cache(maxsize=None)
def build_pair_set(d: int, params: AdwParams = AdwParams(), adw_enabled: bool = True) -> PairSet:
    """Pairs for depth d plus weights (all 1.0 when weighting is disabled)."""
    pairs = tuple(generate_pairs(d))
    if adw_enabled:
        weights = np.array([adw(i, j, params) for i, j in pairs], dtype=np.float64)
    else:
        weights = np.ones(len(pairs), dtype=np.float64)
    weights.setflags(write=False)
    return PairSet(pairs=pairs, weights=weights)
