"""Student-determined rank order and top-d/remainder splitting.

The student's logits decide the ordering; the same index sequence is then
applied to the teacher's logits so both vectors stay aligned position by
position.  Ties go to the lower class index.  Rank order is an index map,
not a differentiable quantity: gradients flow through the selected values,
never through the selection itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RankOrder", "TopSplit", "rank_by_student", "split_top_d"]


@dataclass(frozen=True)
class RankOrder:
    """Permutation of class indices, best rank first, derived from the student."""

    perm: np.ndarray
    source: str = "student"

    def __post_init__(self) -> None:
        perm = np.ascontiguousarray(self.perm, dtype=np.int64)
        object.__setattr__(self, "perm", perm)
        if self.source != "student":
            raise ValueError(f"rank order source must be 'student', got {self.source!r}")
        if perm.ndim != 1 or not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise ValueError("perm must be a permutation of 0..C-1")


@dataclass(frozen=True)
class TopSplit:
    """Teacher and student logits split into aligned top-d and remainder parts.

    All four arrays follow the student's rank order: ``top_*[r]`` is the
    value of the class holding rank r+1, ``rest_*`` continues with ranks
    d+1..C.
    """

    top_t: np.ndarray
    top_s: np.ndarray
    rest_t: np.ndarray
    rest_s: np.ndarray
    d: int


def rank_by_student(z_s) -> RankOrder:
    """Order class indices by descending student logit, ties to lower index."""
    z = np.asarray(z_s, dtype=np.float64)
    if z.ndim != 1 or z.size == 0:
        raise ValueError(f"expected a non-empty logit vector, got shape {z.shape}")
    # stable sort on the negated values keeps the lower index first on ties
    perm = np.argsort(-z, kind="stable")
    return RankOrder(perm=perm)


def split_top_d(z_t, z_s, d: int, order: RankOrder | None = None) -> TopSplit:
    """Split aligned teacher/student logits into top-d and remainder.

    ``order`` defaults to the student ranking of ``z_s``; pass a precomputed
    order to keep the selection frozen while the values vary.
    """
    zt = np.asarray(z_t, dtype=np.float64)
    zs = np.asarray(z_s, dtype=np.float64)
    if zt.shape != zs.shape or zt.ndim != 1:
        raise ValueError(f"teacher/student logit shapes differ: {zt.shape} vs {zs.shape}")
    c = zt.size
    if not 1 <= d <= c:
        raise ValueError(f"depth d={d} out of range for {c} classes")
    if order is None:
        order = rank_by_student(zs)
    if order.perm.size != c:
        raise ValueError(f"rank order covers {order.perm.size} classes, logits have {c}")
    top = order.perm[:d]
    rest = order.perm[d:]
    return TopSplit(
        top_t=zt[top],
        top_s=zs[top],
        rest_t=zt[rest],
        rest_s=zs[rest],
        d=d,
    )
