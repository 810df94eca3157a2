import numpy as np
import pytest
from hypothesis import given, strategies as st

from pl_lab.data_io import synth_gaussian_mixture
from pl_lab.errors import ConfigError, DomainError, NumericalError, ParseError
from pl_lab.generation import case_preset, sample_label_sets
from pl_lab.labelsets import masks_to_indicator
from pl_lab.losses import LossKind, LossSpec
from pl_lab.pl_losses import AVERAGE, SOFT_TARGET, pl_grad_batch, pl_loss_batch, target_weights
from pl_lab.training import (
    ModelSpec,
    OptimizerConfig,
    PLArrays,
    TrainReport,
    backward,
    evaluate,
    flatten,
    forward,
    init_params,
    params_from_bytes,
    params_to_bytes,
    train,
    unflatten,
)


def small_model(arch, d=4, k=3, seed=0):
    return ModelSpec(arch, d, k, (5, 4), seed)


def test_zero_linear_is_uniform():
    m = ModelSpec("linear", 3, 4)
    params = [np.zeros((3, 4)), np.zeros(4)]
    assert np.array_equal(forward(m, params, np.ones(3)), np.full(4, 0.25))


@pytest.mark.parametrize("arch", ["linear", "mlp"])
def test_outputs_on_simplex(arch, rng):
    m = small_model(arch)
    P = forward(m, init_params(m), rng.normal(size=(20, 4)) * 10)
    assert np.all(P > 0)
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-12)


def test_tiny_mlp_near_uniform(rng):
    m = small_model("mlp")
    params = [p * 1e-4 for p in init_params(m)]
    P = forward(m, params, rng.normal(size=(5, 4)))
    assert np.abs(P - 1 / 3).max() < 1e-3


def test_dim_mismatch():
    m = small_model("linear")
    with pytest.raises(DomainError):
        forward(m, init_params(m), np.ones(5))


def _scalar_loss(spec, form, m, theta, X, T):
    P = forward(m, unflatten(m, theta), X)
    return float(np.mean(pl_loss_batch(spec, P, T, form)))


@pytest.mark.parametrize("kind", list(LossKind))
@pytest.mark.parametrize("form", [AVERAGE, SOFT_TARGET])
@pytest.mark.parametrize("arch", ["linear", "mlp"])
def test_end_to_end_gradient(kind, form, arch, rng):
    spec = LossSpec(kind)
    m = small_model(arch, seed=int(rng.integers(1000)))
    theta0 = flatten(init_params(m))
    for _ in range(20):
        X = rng.normal(size=(3, 4))
        T = target_weights(masks_to_indicator(rng.integers(1, 7, size=3), 3))
        theta = theta0 + 0.3 * rng.normal(size=theta0.size)
        params = unflatten(m, theta)
        P = forward(m, params, X)
        G = pl_grad_batch(spec, P, T, form)
        g = flatten(backward(m, params, X, G))
        fd = np.zeros_like(theta)
        h = 1e-6
        for j in range(theta.size):
            e = np.zeros_like(theta)
            e[j] = h
            fd[j] = (_scalar_loss(spec, form, m, theta + e, X, T) - _scalar_loss(spec, form, m, theta - e, X, T)) / (2 * h)
        assert np.linalg.norm(g - fd) <= 1e-4 * max(1.0, np.linalg.norm(fd))


def test_zero_gradient_in_zero_out(rng):
    m = small_model("mlp")
    grads = backward(m, init_params(m), rng.normal(size=(6, 4)), np.zeros((6, 3)))
    assert all(np.all(g == 0) for g in grads)


def test_batch_gradient_is_mean(rng):
    m = small_model("mlp")
    params = init_params(m)
    X = rng.normal(size=(5, 4))
    G = rng.normal(size=(5, 3))
    batch = flatten(backward(m, params, X, G))
    each = np.mean([flatten(backward(m, params, X[i : i + 1], G[i : i + 1])) for i in range(5)], axis=0)
    assert np.allclose(batch, each, atol=1e-12)


def test_param_blob_round_trip(rng):
    m = small_model("mlp", seed=3)
    params = init_params(m)
    m2, p2 = params_from_bytes(params_to_bytes(m, params))
    assert m2 == m
    assert all(np.array_equal(a, b) for a, b in zip(params, p2))
    with pytest.raises(ParseError):
        params_from_bytes(b"garbage!" + bytes(8))


@pytest.mark.parametrize(
    "kw", [dict(lr=0), dict(momentum=1.0), dict(weight_decay=-1), dict(batch_size=0), dict(epochs=0),
           dict(lr_decay=(0, 0.5))]
)
def test_optimizer_validation(kw):
    with pytest.raises(ConfigError):
        OptimizerConfig(**kw)


def test_model_validation():
    with pytest.raises(ConfigError):
        ModelSpec("cnn", 3, 2)
    with pytest.raises(ConfigError):
        ModelSpec("mlp", 3, 2, (0,))


def test_lr_schedule():
    opt = OptimizerConfig(lr=1.0, lr_decay=(10, 0.5))
    assert opt.lr_at(0) == 1.0 and opt.lr_at(10) == 0.5 and opt.lr_at(25) == 0.25


def test_evaluate_perfect_and_complement():
    m = ModelSpec("linear", 2, 2)
    params = [np.array([[10.0, -10.0], [-10.0, 10.0]]), np.zeros(2)]
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert evaluate(m, params, X, [1, 2]) == (0.0, 1.0)


def test_uniform_predictor_accuracy(rng):
    k, n = 4, 4000
    m = ModelSpec("linear", 3, k)
    params = [np.zeros((3, k)), np.zeros(k)]
    y = np.tile(np.arange(1, k + 1), n // k)
    err, acc = evaluate(m, params, rng.normal(size=(n, 3)), y)
    # ties go to label 1, which is a quarter of the balanced labels
    assert abs(acc - 1 / k) <= 3 * np.sqrt(0.25 * 0.75 / n)


@given(st.integers(1, 500), st.integers(0, 500))
def test_error_plus_accuracy_is_one(n, correct):
    correct = min(correct, n)
    m = ModelSpec("linear", 1, 2)
    params = [np.array([[0.0, 0.0]]), np.array([1.0, 0.0])]  # always predicts 1
    y = np.array([1] * correct + [2] * (n - correct))
    err, acc = evaluate(m, params, np.zeros((n, 1)), y)
    assert err + acc == 1.0


def _separable(rng, n=200):
    X = rng.normal(size=(n, 2))
    y = np.where(X[:, 0] + 0.5 * X[:, 1] > 0, 1, 2)
    X[:, 0] += np.where(y == 1, 0.5, -0.5)
    return X, y


def test_supervised_sanity(rng):
    X, y = _separable(rng)
    Xt, yt = _separable(rng)
    data = PLArrays(X, masks_to_indicator(1 << (y - 1), 2), y)
    rep = train(ModelSpec("linear", 2, 2), OptimizerConfig(lr=0.1, batch_size=32, epochs=50), LossSpec("CCE"),
                AVERAGE, data, (Xt, yt), seed=0)
    assert 1 - rep.test_error[-1] >= 0.99
    assert len(rep.pl_risk) == len(rep.test_error) == len(rep.transductive_acc) == 50


def test_same_seed_same_report(rng):
    X, y = _separable(rng, 100)
    data = PLArrays(X, masks_to_indicator(1 << (y - 1), 2), y)
    args = (ModelSpec("mlp", 2, 2, (8,)), OptimizerConfig(lr=0.05, batch_size=16, epochs=5), LossSpec("GCE"),
            AVERAGE, data, (X, y))
    a, b = train(*args, seed=3), train(*args, seed=3)
    assert a.to_csv() == b.to_csv() and a.digest == b.digest
    assert train(*args, seed=4).digest != a.digest


def test_linear_mse_risk_monotone(rng):
    X, y = _separable(rng, 300)
    masks = sample_label_sets(case_preset(1, 2 + 1), np.minimum(y, 3), rng)
    data = PLArrays(X, masks_to_indicator(masks, 3), y)
    rep = train(ModelSpec("linear", 2, 3), OptimizerConfig(lr=0.05, momentum=0.0, batch_size=300, epochs=30),
                LossSpec("MSE"), AVERAGE, data, (X, y), seed=0)
    assert all(b <= a + 0.02 for a, b in zip(rep.pl_risk, rep.pl_risk[1:]))


def test_nan_abort_names_epoch(rng):
    X, y = _separable(rng, 20)
    X[3, 0] = np.nan
    data = PLArrays(X, masks_to_indicator(1 << (y - 1), 2), y)
    with pytest.raises(NumericalError, match="epoch 1.*CCE"):
        train(ModelSpec("linear", 2, 2), OptimizerConfig(lr=0.1, batch_size=20, epochs=2), LossSpec("CCE"),
              AVERAGE, data, (X, y))


def test_report_csv_round_trip():
    rep = TrainReport([0.5, 0.25], [0.1, 0.2], [0.9, float("nan")])
    back = TrainReport.from_csv(rep.to_csv())
    assert back.pl_risk == rep.pl_risk and back.test_error == rep.test_error
    assert np.isnan(back.transductive_acc[1])
    assert rep.to_csv().splitlines()[0] == "epoch,pl_risk,test_error,transductive_acc"


@pytest.mark.slow
def test_case1_mae_close_to_supervised():
    tr = synth_gaussian_mixture(5, 200, 10, 8.0, 1, "deterministic")
    te = synth_gaussian_mixture(5, 100, 10, 8.0, 2, "deterministic")
    masks = sample_label_sets(case_preset(1, 5), tr.labels, np.random.default_rng(0))
    pl = PLArrays(tr.features, masks_to_indicator(masks, 5), tr.labels)
    sup = PLArrays(tr.features, masks_to_indicator(1 << (tr.labels - 1), 5), tr.labels)
    model = ModelSpec("mlp", 10, 5, (32, 32))
    opt = OptimizerConfig(lr=0.05, batch_size=32, epochs=40)
    a = train(model, opt, LossSpec("MAE"), AVERAGE, pl, te, seed=0)
    b = train(model, opt, LossSpec("MAE"), AVERAGE, sup, te, seed=0)
    assert abs(a.test_error[-1] - b.test_error[-1]) <= 0.02
