import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pl_lab.errors import DomainError
from pl_lab.labelsets import LabelSet, enumerate_pl_space
from pl_lab.losses import BOUNDED_KINDS, LossKind, LossSpec, bounds, class_losses, loss_gradient, loss_value
from pl_lab.pl_losses import (
    PLExample,
    average_pl_gradient,
    average_pl_loss,
    empirical_pl_risk,
    soft_target_form,
    soft_target_pl_gradient,
    soft_target_pl_loss,
)

from conftest import random_simplex


def S(*labels, k=3):
    return LabelSet.from_labels(labels, k)


@pytest.mark.parametrize(
    "kind,f,s,expected",
    [
        ("MAE", [1, 0, 0], (1, 2), 1.0),
        ("CCE", [0.5, 0.25, 0.25], (2,), -math.log(0.25)),
        ("MAE", [0.5, 0.5, 0.0], (1, 2), 1.0),
    ],
)
def test_average_examples(kind, f, s, expected):
    assert average_pl_loss(LossSpec(kind), f, S(*s)) == pytest.approx(expected, abs=1e-12)


def test_cce_singleton_numeric():
    assert average_pl_loss(LossSpec("CCE"), [0.5, 0.25, 0.25], S(2)) == pytest.approx(1.38629, abs=1e-5)


@pytest.mark.parametrize("kind", list(LossKind))
def test_singleton_equals_supervised(kind, rng):
    spec = LossSpec(kind)
    for _ in range(20):
        f = random_simplex(rng, 4)
        y = int(rng.integers(1, 5))
        s = LabelSet.from_labels([y], 4)
        assert abs(average_pl_loss(spec, f, s) - loss_value(spec, f, y)) <= 1e-12
        assert np.allclose(average_pl_gradient(spec, f, s), loss_gradient(spec, f, y), atol=1e-12)


def test_mae_gradient_on_complement_of_one_label():
    k = 5
    f = np.array([0.1, 0.15, 0.2, 0.25, 0.3])
    for j in range(1, k + 1):
        s = LabelSet.from_labels([i for i in range(1, k + 1) if i != j], k)
        g = average_pl_gradient(LossSpec("MAE"), f, s)
        inside = np.delete(g, j - 1)
        # every candidate coordinate gets the same value (k-3)/(k-1)
        assert np.allclose(inside, (k - 3) / (k - 1), atol=1e-12)
        assert g[j - 1] == pytest.approx(1.0)


@pytest.mark.parametrize("kind", list(LossKind))
@pytest.mark.parametrize("which", ["average", "soft"])
def test_pl_gradient_finite_difference(kind, which, rng):
    spec = LossSpec(kind)
    value = average_pl_loss if which == "average" else soft_target_pl_loss
    grad = average_pl_gradient if which == "average" else soft_target_pl_gradient
    from pl_lab.pl_losses import pl_loss_batch, target_weights

    form = "average" if which == "average" else "soft_target"
    for _ in range(20):
        k = int(rng.integers(2, 6))
        f = random_simplex(rng, k)
        s = enumerate_pl_space(k)[int(rng.integers(0, 2**k - 2))]
        t = target_weights(s.indicator()[None])
        if kind is LossKind.PCE and np.any(np.abs(f - 1 / spec.tau) < 1e-3):
            continue
        if kind is LossKind.MAE and which == "soft" and np.any(np.abs(f - t[0]) < 1e-3):
            continue
        g = grad(spec, f, s)
        fd = np.zeros(k)
        for j in range(k):
            e = np.zeros(k)
            e[j] = 1e-6
            fd[j] = (pl_loss_batch(spec, (f + e)[None], t, form)[0] - pl_loss_batch(spec, (f - e)[None], t, form)[0]) / 2e-6
        assert np.linalg.norm(g - fd) <= 1e-4 * max(1.0, np.linalg.norm(fd))
        assert value(spec, f, s) == pytest.approx(pl_loss_batch(spec, f[None], t, form)[0])


def test_soft_target_forms():
    assert soft_target_form(LossSpec("MAE")) == "vector"
    assert soft_target_form(LossSpec("MSE")) == "vector"
    for kind in ("CCE", "GCE", "PCE", "FL", "RCE"):
        assert soft_target_form(LossSpec(kind)) == "expectation"


def test_soft_target_cce_coincides(rng):
    spec = LossSpec("CCE")
    for s in enumerate_pl_space(4):
        f = random_simplex(rng, 4)
        assert soft_target_pl_loss(spec, f, s) == pytest.approx(average_pl_loss(spec, f, s), abs=1e-12)


def test_soft_target_mae_differs():
    f, s = [0.5, 0.5, 0.0], S(1, 2)
    assert soft_target_pl_loss(LossSpec("MAE"), f, s) == 0.0
    assert average_pl_loss(LossSpec("MAE"), f, s) == 1.0


def test_soft_target_mse_singleton(rng):
    f = random_simplex(rng, 3)
    assert soft_target_pl_loss(LossSpec("MSE"), f, S(2)) == pytest.approx(loss_value(LossSpec("MSE"), f, 2))


def test_dim_mismatch():
    with pytest.raises(DomainError):
        average_pl_loss(LossSpec("MAE"), [0.5, 0.5], S(1))


def _ex(f, s, y=None):
    return PLExample(np.asarray(f, dtype=float), s, y)


def test_empirical_risk_single_and_duplicate():
    spec = LossSpec("GCE")
    f = np.array([0.2, 0.5, 0.3])
    ex = _ex(f, S(1, 3))
    predict = lambda x: x
    one = empirical_pl_risk(spec, [ex], predict)
    assert one == average_pl_loss(spec, f, S(1, 3))
    assert empirical_pl_risk(spec, [ex, ex], predict) == one


def test_empirical_risk_matches_loop(rng):
    spec = LossSpec("PCE")
    exs = []
    space = enumerate_pl_space(4)
    for _ in range(100):
        exs.append(_ex(random_simplex(rng, 4), space[int(rng.integers(0, 14))]))
    total = 0.0
    for ex in exs:
        vals = [loss_value(spec, ex.features, i) for i in ex.candidates]
        total += sum(vals) / len(vals)
    assert empirical_pl_risk(spec, exs, lambda x: x) == pytest.approx(total / 100, abs=1e-12)


def test_empirical_risk_empty():
    with pytest.raises(DomainError):
        empirical_pl_risk(LossSpec("MAE"), [], lambda x: x)


def test_example_label_range():
    with pytest.raises(DomainError):
        _ex([0.5, 0.5, 0.0], S(1), y=4)


@given(st.integers(3, 6), st.sampled_from(list(LossKind)), st.integers(0, 2**32 - 1))
def test_permutation_equivariance(k, kind, seed):
    rng = np.random.default_rng(seed)
    spec = LossSpec(kind)
    f = rng.dirichlet(np.ones(k))
    s = enumerate_pl_space(k)[int(rng.integers(0, 2**k - 2))]
    pi = rng.permutation(k)  # new position of class i is pi[i]
    f2 = np.empty(k)
    f2[pi] = f
    s2 = LabelSet.from_labels([int(pi[i - 1]) + 1 for i in s], k)
    assert average_pl_loss(spec, f2, s2) == pytest.approx(average_pl_loss(spec, f, s), abs=1e-12)


@given(st.integers(2, 6), st.sampled_from(list(BOUNDED_KINDS)), st.integers(0, 2**32 - 1))
def test_bounded_average_within_u(k, kind, seed):
    rng = np.random.default_rng(seed)
    spec = LossSpec(kind)
    f = rng.dirichlet(np.full(k, 0.5))
    s = enumerate_pl_space(k)[int(rng.integers(0, 2**k - 2))]
    assert -1e-12 <= average_pl_loss(spec, f, s) <= bounds(spec, k).U + 1e-9
