import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pl_lab.errors import DomainError
from pl_lab.losses import (
    BOUNDED_KINDS,
    LossKind,
    LossSpec,
    bounds,
    class_sum,
    loss_gradient,
    loss_value,
)

from conftest import random_simplex

ALL_KINDS = list(LossKind)


@pytest.mark.parametrize(
    "spec,f,y,expected",
    [
        (LossSpec("MAE"), [1, 0, 0], 1, 0.0),
        (LossSpec("MAE"), [1, 0, 0], 2, 2.0),
        (LossSpec("GCE", q=0.5), [0.25, 0.5, 0.25], 2, (1 - math.sqrt(0.5)) / 0.5),
        (LossSpec("PCE", tau=3.0), [0.2, 0.5, 0.3], 1, -3 * 0.2 + math.log(3) + 1),
        (LossSpec("CCE"), [0.5, 0.25, 0.25], 2, -math.log(0.25)),
        (LossSpec("MSE"), [0.5, 0.5, 0.0], 1, 0.5),
        (LossSpec("RCE"), [0.5, 0.5, 0.0], 1, 2.0),
        (LossSpec("FL", tau=2.0), [0.5, 0.25, 0.25], 1, 0.25 * math.log(2)),
    ],
)
def test_loss_value_examples(spec, f, y, expected):
    assert loss_value(spec, f, y) == pytest.approx(expected, abs=1e-12)


def test_gce_example_numeric():
    assert loss_value(LossSpec("GCE", q=0.5), [0.25, 0.5, 0.25], 2) == pytest.approx(0.58579, abs=1e-5)


def test_pce_example_numeric():
    assert loss_value(LossSpec("PCE", tau=3.0), [0.2, 0.5, 0.3], 1) == pytest.approx(1.49861, abs=1e-5)


def test_pce_log_branch():
    assert loss_value(LossSpec("PCE", tau=3.0), [0.6, 0.2, 0.2], 1) == pytest.approx(-math.log(0.6))


def test_cce_at_zero_uses_eps():
    assert loss_value(LossSpec("CCE"), [1, 0, 0], 2) == pytest.approx(-math.log(1e-12))


def test_mae_gradient_signs():
    g = loss_gradient(LossSpec("MAE"), [0.2, 0.3, 0.5], 2)
    assert np.array_equal(g, [1.0, -1.0, 1.0])


def test_cce_gradient_example():
    g = loss_gradient(LossSpec("CCE"), [0.5, 0.25, 0.25], 1)
    assert np.allclose(g, [-2, 0, 0])


def _fd(spec, f, y, h=1e-6):
    # finite differences of the unconstrained extension
    from pl_lab.losses import class_losses

    g = np.zeros_like(f)
    for j in range(f.size):
        e = np.zeros_like(f)
        e[j] = h
        g[j] = (class_losses(spec, f + e)[y - 1] - class_losses(spec, f - e)[y - 1]) / (2 * h)
    return g


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_gradient_matches_finite_difference(kind, rng):
    spec = LossSpec(kind)
    for _ in range(20):
        k = int(rng.integers(2, 7))
        f = random_simplex(rng, k)
        # keep away from the PCE kink and MAE's kinks at 0/1
        if kind is LossKind.PCE and np.any(np.abs(f - 1 / spec.tau) < 1e-3):
            continue
        y = int(rng.integers(1, k + 1))
        g = loss_gradient(spec, f, y)
        fd = _fd(spec, f, y)
        assert np.linalg.norm(g - fd) <= 1e-4 * max(1.0, np.linalg.norm(fd))


@pytest.mark.parametrize("kind", [LossKind.CCE, LossKind.FL, LossKind.GCE])
def test_gradient_needs_interior(kind):
    with pytest.raises(DomainError):
        loss_gradient(LossSpec(kind), [1.0, 0.0, 0.0], 1)


@pytest.mark.parametrize("f", [[0.5, 0.6, 0.0], [1.2, -0.2, 0.0], [np.nan, 0.5, 0.5]])
def test_off_simplex_rejected(f):
    with pytest.raises(DomainError):
        loss_value(LossSpec("MAE"), f, 1)


def test_label_out_of_range():
    with pytest.raises(DomainError):
        loss_value(LossSpec("MAE"), [0.5, 0.5], 3)


@pytest.mark.parametrize(
    "kw",
    [dict(kind="GCE", q=0.0), dict(kind="GCE", q=1.5), dict(kind="PCE", tau=1.0), dict(kind="FL", tau=0.0),
     dict(kind="RCE", a_rce=1.0), dict(kind="CCE", eps=0.1)],
)
def test_bad_params(kw):
    with pytest.raises(DomainError):
        LossSpec(**kw)


def test_default_taus():
    assert LossSpec("PCE").tau == pytest.approx(math.e)
    assert LossSpec("FL").tau == 2.0


def test_spec_dict_round_trip():
    spec = LossSpec("GCE", q=0.3)
    assert LossSpec.from_dict(spec.to_dict()) == spec
    assert LossSpec.parse("gce", q=0.3) == spec


@pytest.mark.parametrize("k,expected", [(4, 6.0), (10, 18.0)])
def test_mae_class_sum(k, expected, rng):
    for f in random_simplex(rng, k, 50, interior=False):
        assert class_sum(LossSpec("MAE"), f) == pytest.approx(expected, abs=1e-12)


def test_rce_class_sum_k3(rng):
    for f in random_simplex(rng, 3, 50, interior=False):
        assert class_sum(LossSpec("RCE", a_rce=-4.0), f) == pytest.approx(8.0, abs=1e-12)


def test_mse_class_sum_uniform():
    assert class_sum(LossSpec("MSE"), [1 / 3, 1 / 3, 1 / 3]) == pytest.approx(2.0)


def test_bounds_mae_k10():
    b = bounds(LossSpec("MAE"), 10)
    assert (b.U, b.C1, b.C2, b.symmetric, b.bounded) == (2.0, 18.0, 18.0, True, True)


def test_bounds_gce_k10():
    b = bounds(LossSpec("GCE", q=0.7), 10)
    assert b.U == pytest.approx(1 / 0.7)
    assert b.C1 == pytest.approx((10 - 10**0.3) / 0.7)
    assert b.C2 == pytest.approx(9 / 0.7)
    assert not b.symmetric


def test_bounds_pce_k_above_tau():
    b = bounds(LossSpec("PCE", tau=3.0), 10)
    assert b.C1 == pytest.approx(10 - 3 + 10 * math.log(3))
    assert b.C2 == pytest.approx(9 * (math.log(3) + 1))


def test_bounds_pce_k_below_tau():
    b = bounds(LossSpec("PCE", tau=5.0), 3)
    assert b.C1 == pytest.approx(3 * math.log(3))


def test_bounds_mse_lower_is_tight():
    b = bounds(LossSpec("MSE"), 5)
    assert b.C1 == 4.0
    assert class_sum(LossSpec("MSE"), np.full(5, 0.2)) == pytest.approx(b.C1)


@pytest.mark.parametrize("kind", [LossKind.CCE, LossKind.FL])
def test_unbounded_kinds(kind):
    b = bounds(LossSpec(kind), 5)
    assert not b.bounded and math.isinf(b.C2) and math.isinf(b.U)
    assert b.to_dict()["C2"] is None


@pytest.mark.parametrize("kind", BOUNDED_KINDS)
def test_symmetric_means_u_times_k_minus_1(kind):
    for k in range(2, 8):
        b = bounds(LossSpec(kind), k)
        assert 0 <= b.C1 <= b.C2
        if b.symmetric:
            assert b.U == pytest.approx(b.C1 / (k - 1))


@given(st.integers(2, 10), st.sampled_from(list(BOUNDED_KINDS)), st.integers(0, 2**32 - 1))
def test_class_sum_within_bounds(k, kind, seed):
    rng = np.random.default_rng(seed)
    spec = LossSpec(kind)
    b = bounds(spec, k)
    f = rng.dirichlet(np.full(k, 0.3))
    assert b.C1 - 1e-9 <= class_sum(spec, f) <= b.C2 + 1e-9
    for y in range(1, k + 1):
        assert -1e-12 <= loss_value(spec, f, y) <= b.U + 1e-9


@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_rce_is_scaled_mae_on_simplex(k, seed):
    f = np.random.default_rng(seed).dirichlet(np.ones(k))
    for y in range(1, k + 1):
        assert loss_value(LossSpec("RCE"), f, y) == pytest.approx(2.0 * loss_value(LossSpec("MAE"), f, y), abs=1e-9)
