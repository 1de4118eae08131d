"""Self-contained invariant suite behind the ``losscheck`` command.

Each check reruns part of the implementation against an independent
reference (brute-force oracle, finite differences, or the defining
formulas) on seeded random inputs and reports pass/fail with a short
detail string.  ``adw_params`` is injectable so a deliberately perturbed
constant demonstrably fails the golden-value check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .losses import DistillConfig, ldrld_objective, ldrld_total, pair_loss
from .oracle import fd_gradient, oracle_ldrld, oracle_pair_loss
from .pairs import AdwParams, adw, erd, generate_pairs, irw
from .ranking import rank_by_student
from .tensor import Tape, Tensor, softmax_masked

__all__ = ["CheckResult", "run_losscheck", "GOLDEN_ADW_WEIGHT"]

# 1/(|1-2|+1.5) * 2*exp(-0.05*(1+2)), straight from the defining formulas
GOLDEN_ADW_WEIGHT = (1.0 / 2.5) * 2.0 * math.exp(-0.15)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_cfg(rng: np.random.Generator, c: int, adw_params: AdwParams) -> DistillConfig:
    return DistillConfig(
        d=int(rng.integers(2, c + 1)),
        tau=float(rng.uniform(1.0, 8.0)),
        alpha=float(rng.uniform(0.0, 10.0)),
        beta=float(rng.uniform(0.0, 10.0)),
        adw=adw_params,
        adw_enabled=bool(rng.integers(0, 2)),
        tau_square_scaling=bool(rng.integers(0, 2)),
    )


def _check_pair_counts() -> CheckResult:
    for d in range(2, 31):
        pairs = generate_pairs(d)
        if len(pairs) != d * (d - 1) // 2:
            return CheckResult(
                "pair_counts", False, f"d={d}: {len(pairs)} pairs, expected {d * (d - 1) // 2}"
            )
        if len(set(pairs)) != len(pairs):
            return CheckResult("pair_counts", False, f"d={d}: duplicate pairs")
    brute = {(i, j) for i in range(1, 8) for j in range(1, 8) if i < j}
    if set(generate_pairs(7)) != brute:
        return CheckResult("pair_counts", False, "d=7 pair set differs from brute force")
    return CheckResult("pair_counts", True, "d=2..30 counts and d=7 set match brute force")


def _check_adw_golden(params: AdwParams) -> CheckResult:
    got_irw = irw(1, 2, params)
    got_erd = erd(1, 2, params)
    got_adw = adw(1, 2, params)
    want_irw = 1.0 / 2.5
    want_erd = 2.0 * math.exp(-0.15)
    ok = (
        abs(got_irw - want_irw) < 1e-12
        and abs(got_erd - want_erd) < 1e-12
        and abs(got_adw - GOLDEN_ADW_WEIGHT) < 1e-6
    )
    return CheckResult(
        "adw_golden",
        ok,
        f"weight(1,2) = {got_adw:.6f} (expected {GOLDEN_ADW_WEIGHT:.6f}), "
        f"irw = {got_irw:.6f}, erd = {got_erd:.6f}",
    )


def _check_adw_monotonicity(params: AdwParams) -> CheckResult:
    # deeper pairs at a fixed gap must weigh less
    for gap in range(1, 10):
        values = [adw(i, i + gap, params) for i in range(1, 21 - gap)]
        if any(b >= a for a, b in zip(values, values[1:])):
            return CheckResult("adw_monotonicity", False, f"not decreasing in depth at gap {gap}")
    # wider gaps at a fixed rank sum must weigh less
    for total in range(5, 41):
        at_sum = [(i, total - i) for i in range(1, total) if i < total - i <= 20]
        at_sum.sort(key=lambda p: p[1] - p[0])  # ascending gap
        values = [adw(i, j, params) for i, j in at_sum]
        if any(b >= a for a, b in zip(values, values[1:])):
            return CheckResult(
                "adw_monotonicity", False, f"not decreasing in gap at rank sum {total}"
            )
    return CheckResult("adw_monotonicity", True, "decays in both depth and gap for ranks <= 20")


def _check_oracle_equivalence(adw_params: AdwParams, samples: int = 200) -> CheckResult:
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(samples):
        c = int(rng.integers(5, 31))
        cfg = _random_cfg(rng, c, adw_params)
        z_t = rng.uniform(-5.0, 5.0, size=c)
        z_s = rng.uniform(-5.0, 5.0, size=c)
        label = int(rng.integers(0, c))
        got = ldrld_total(z_t, z_s, label, cfg).total
        want = oracle_ldrld(z_t, z_s, label, cfg)
        worst = max(worst, abs(got - want))
    ok = worst < 1e-9
    return CheckResult(
        "oracle_equivalence", ok, f"max |fast - oracle| = {worst:.3e} over {samples} samples"
    )


def _check_gradients(adw_params: AdwParams, samples: int = 25) -> CheckResult:
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(samples):
        c = int(rng.integers(5, 21))
        cfg = _random_cfg(rng, c, adw_params)
        z_t = rng.uniform(-5.0, 5.0, size=c)
        z_s = rng.uniform(-5.0, 5.0, size=c)
        label = int(rng.integers(0, c))
        order = rank_by_student(z_s)

        student = Tensor(z_s, requires_grad=True)
        with Tape():
            total, _ = ldrld_objective(z_t, student, label, cfg, order=order)
        total.backward()
        got = student.grad

        want = fd_gradient(
            lambda z: ldrld_total(z_t, z, label, cfg, order=order).total, z_s
        )
        err = np.abs(got - want) / np.maximum(np.maximum(np.abs(got), np.abs(want)), 1e-7)
        worst = max(worst, float(err.max()))
    ok = worst < 1e-4
    return CheckResult(
        "gradient_check", ok, f"max relative gradient error = {worst:.3e} over {samples} samples"
    )


def _check_loss_identities(adw_params: AdwParams, samples: int = 100) -> CheckResult:
    rng = np.random.default_rng(13)
    for _ in range(samples):
        c = int(rng.integers(5, 21))
        cfg = _random_cfg(rng, c, adw_params)
        cfg = replace(cfg, alpha=max(cfg.alpha, 0.5), beta=max(cfg.beta, 0.5))
        z_t = rng.uniform(-5.0, 5.0, size=c)
        z_s = rng.uniform(-5.0, 5.0, size=c)
        label = int(rng.integers(0, c))

        bd = ldrld_total(z_t, z_s, label, cfg)
        if min(bd.task, bd.weighted_pairs, bd.llki, bd.rntk) < 0:
            return CheckResult("loss_identities", False, f"negative term in {bd}")
        ident = bd.task + cfg.alpha * (bd.weighted_pairs + bd.llki) + cfg.beta * bd.rntk
        if abs(bd.total - ident) > 1e-12:
            return CheckResult(
                "loss_identities", False, f"total {bd.total} != assembled {ident}"
            )

        agree = ldrld_total(z_s, z_s, label, cfg)
        if not (agree.weighted_pairs == 0.0 and agree.llki == 0.0 and agree.rntk == 0.0):
            return CheckResult(
                "loss_identities", False, f"terms do not vanish at agreement: {agree}"
            )

        shift = float(rng.uniform(-10.0, 10.0))
        shifted = ldrld_total(z_t + shift, z_s + shift, label, cfg)
        for name in ("weighted_pairs", "llki", "rntk"):
            if abs(getattr(shifted, name) - getattr(bd, name)) > 1e-10:
                return CheckResult(
                    "loss_identities", False, f"{name} not shift-invariant (shift {shift:+.3f})"
                )
    return CheckResult(
        "loss_identities",
        True,
        f"non-negativity, agreement zeros and shift invariance hold on {samples} samples",
    )


def _check_unweighted_reduction(adw_params: AdwParams) -> CheckResult:
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(50):
        d = int(rng.integers(2, 11))
        cfg = DistillConfig(d=d, tau=float(rng.uniform(1.0, 8.0)), adw=adw_params, adw_enabled=False)
        top_t = rng.uniform(-5.0, 5.0, size=d)
        top_s = rng.uniform(-5.0, 5.0, size=d)
        got = pair_loss(top_t, top_s, cfg).item()
        want = oracle_pair_loss(top_t, top_s, cfg)
        worst = max(worst, abs(got - want))
    ok = worst < 1e-10
    return CheckResult(
        "unweighted_reduction",
        ok,
        f"adw disabled matches the unweighted pair oracle, max |delta| = {worst:.3e}",
    )


def _check_softmax_masked() -> CheckResult:
    rng = np.random.default_rng(19)
    for _ in range(100):
        n = int(rng.integers(2, 40))
        z = rng.uniform(-50.0, 50.0, size=n)
        mask = rng.integers(0, 2, size=n).astype(bool)
        if not mask.any():
            mask[int(rng.integers(0, n))] = True
        p = softmax_masked(z, mask, float(rng.uniform(0.5, 8.0))).data
        if abs(p.sum() - 1.0) > 1e-12:
            return CheckResult("softmax_masked", False, f"probabilities sum to {p.sum()!r}")
        if np.any(p[~mask] != 0.0):
            return CheckResult("softmax_masked", False, "excluded entry got nonzero probability")
        if np.any(p[mask] <= 0.0):
            return CheckResult("softmax_masked", False, "selected entry got zero probability")
    return CheckResult("softmax_masked", True, "normalizes to 1 with exact zeros off-mask")


def run_losscheck(adw_params: AdwParams | None = None) -> list[CheckResult]:
    """Run the full invariant suite; all checks run even after a failure."""
    params = adw_params if adw_params is not None else AdwParams()
    return [
        _check_pair_counts(),
        _check_adw_golden(params),
        _check_adw_monotonicity(params),
        _check_softmax_masked(),
        _check_oracle_equivalence(params),
        _check_gradients(params),
        _check_loss_identities(params),
        _check_unweighted_reduction(params),
    ]
