"""Rank-pair enumeration and the adaptive decay weighting factors."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ldrld import AdwParams, adw, build_pair_set, erd, generate_pairs, irw

ranks = st.integers(min_value=1, max_value=200)


def test_pair_count_formula():
    for d in range(2, 31):
        assert len(generate_pairs(d)) == d * (d - 1) // 2


def test_depth_seven_matches_brute_force_set():
    got = set(generate_pairs(7))
    expected = {(i, j) for i in range(1, 8) for j in range(1, 8) if i < j}
    assert got == expected
    assert len(got) == 21


def test_pair_enumeration_order_is_recursive_rounds():
    # each new depth j appends its pairs (1,j)..(j-1,j) after the previous round
    assert generate_pairs(4) == [(1, 2), (1, 3), (2, 3), (1, 4), (2, 4), (3, 4)]
    assert generate_pairs(5)[:6] == generate_pairs(4)


def test_generate_pairs_rejects_shallow_depth():
    with pytest.raises(ValueError):
        generate_pairs(1)


def test_adw_params_defaults():
    p = AdwParams()
    assert p.epsilon == 1.50
    assert p.delta == 2.0
    assert p.lambda_ == 0.05


def test_adw_params_validation():
    with pytest.raises(ValueError):
        AdwParams(epsilon=0.0)
    with pytest.raises(ValueError):
        AdwParams(delta=-1.0)
    with pytest.raises(ValueError):
        AdwParams(lambda_=-0.1)


def test_golden_factor_values():
    p = AdwParams()
    assert irw(1, 2, p) == pytest.approx(0.4, abs=1e-12)
    assert erd(1, 2, p) == pytest.approx(2.0 * math.exp(-0.15), abs=1e-12)
    assert adw(1, 2, p) == pytest.approx((1.0 / 2.5) * 2.0 * math.exp(-0.15), abs=1e-15)


def test_irw_rejects_equal_ranks():
    with pytest.raises(ValueError):
        irw(3, 3, AdwParams())


@given(ranks, ranks)
def test_adw_is_product_of_factors(i, j):
    if i == j:
        return
    p = AdwParams()
    assert adw(i, j, p) == pytest.approx(irw(i, j, p) * erd(i, j, p), rel=1e-15)


@given(ranks, ranks, ranks)
def test_irw_decreases_with_rank_gap(i, j1, j2):
    # same anchor rank, larger gap, strictly smaller weight
    if j1 == j2 or i in (j1, j2):
        return
    p = AdwParams()
    near, far = sorted((j1, j2), key=lambda j: abs(i - j))
    if abs(i - near) == abs(i - far):
        return
    assert irw(i, near, p) > irw(i, far, p)


@given(ranks, ranks, ranks, ranks)
def test_erd_decreases_with_rank_depth(i1, j1, i2, j2):
    # deeper pairs (larger rank sum) always decay harder
    if i1 + j1 == i2 + j2:
        return
    p = AdwParams()
    shallow, deep = sorted(((i1, j1), (i2, j2)), key=lambda q: q[0] + q[1])
    assert erd(*shallow, p) > erd(*deep, p)


def test_build_pair_set_weights_align_with_pairs():
    ps = build_pair_set(5, AdwParams(), adw_enabled=True)
    assert ps.pairs == tuple(generate_pairs(5))
    for (i, j), w in zip(ps.pairs, ps.weights):
        assert w == pytest.approx(adw(i, j, AdwParams()), rel=1e-15)
    assert np.all(ps.weights > 0)


def test_build_pair_set_disabled_weights_are_unit():
    ps = build_pair_set(6, AdwParams(), adw_enabled=False)
    assert np.all(ps.weights == 1.0)


def test_build_pair_set_caches_and_freezes():
    a = build_pair_set(7, AdwParams(), adw_enabled=True)
    b = build_pair_set(7, AdwParams(), adw_enabled=True)
    assert a is b
    with pytest.raises(ValueError):
        a.weights[0] = 99.0
