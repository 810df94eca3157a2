"""Softmax models written directly in numpy, trained with momentum SGD under a PL loss."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import struct
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DomainError, NumericalError, ParseError
from .losses import LossSpec
from .pl_losses import AVERAGE, PL_FORMS, PLExample, pl_grad_batch, pl_loss_batch, target_weights

ARCHITECTURES = ("linear", "mlp")
PARAM_MAGIC = b"PLPARAM1"
EVAL_CHUNK = 4096


@dataclass(frozen=True)
class ModelSpec:
    arch: str
    input_dim: int
    k: int
    hidden: tuple = (64, 64)
    init_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.arch not in ARCHITECTURES:
            raise ConfigError(f"architecture must be one of {ARCHITECTURES}, got {self.arch!r}")
        if self.input_dim < 1 or self.k < 2:
            raise ConfigError("need input_dim >= 1 and k >= 2")
        if self.arch == "mlp" and (not self.hidden or min(self.hidden) < 1):
            raise ConfigError(f"hidden widths must be >= 1, got {self.hidden}")

    @property
    def widths(self) -> list[int]:
        mid = list(self.hidden) if self.arch == "mlp" else []
        return [self.input_dim, *mid, self.k]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(**d)


@dataclass(frozen=True)
class OptimizerConfig:
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 0.0
    batch_size: int = 256
    epochs: int = 250
    lr_decay: tuple | None = None  # (every n epochs, factor)

    def __post_init__(self):
        if self.lr_decay is not None:
            object.__setattr__(self, "lr_decay", (int(self.lr_decay[0]), float(self.lr_decay[1])))
        if not self.lr > 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight decay must be >= 0, got {self.weight_decay}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch size and epochs must be >= 1")
        if self.lr_decay is not None and (self.lr_decay[0] < 1 or not 0 < self.lr_decay[1] <= 1):
            raise ConfigError(f"lr_decay must be (epochs >= 1, factor in (0, 1]), got {self.lr_decay}")

    def lr_at(self, epoch: int) -> float:
        """Learning rate used during ``epoch`` (0-based)."""
        if self.lr_decay is None:
            return self.lr
        every, factor = self.lr_decay
        return self.lr * factor ** (epoch // every)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lr_decay"] = None if self.lr_decay is None else list(self.lr_decay)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerConfig":
        return cls(**d)


# -- model ----------------------------------------------------------------------


def init_params(model: ModelSpec) -> list[np.ndarray]:
    """``[W1, b1, W2, b2, ...]`` with entries uniform in +-1/sqrt(fan_in)."""
    rng = np.random.default_rng(model.init_seed)
    params = []
    w = model.widths
    for fan_in, fan_out in zip(w[:-1], w[1:]):
        r = 1.0 / math.sqrt(fan_in)
        params.append(rng.uniform(-r, r, size=(fan_in, fan_out)))
        params.append(rng.uniform(-r, r, size=fan_out))
    return params


def softmax(Z: np.ndarray) -> np.ndarray:
    Z = Z - Z.max(axis=-1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=-1, keepdims=True)


def _check_dims(model: ModelSpec, params, X):
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.input_dim:
        raise DomainError(f"features have dim {X.shape[1]}, model expects {model.input_dim}")
    if len(params) != 2 * (len(model.widths) - 1):
        raise DomainError("parameter list does not match the architecture")
    return X, single


def _forward(params, X):
    acts = [X]
    h = X
    n_layers = len(params) // 2
    for j in range(n_layers):
        z = h @ params[2 * j] + params[2 * j + 1]
        if j < n_layers - 1:
            h = np.maximum(z, 0.0)
            acts.append(h)
        else:
            return softmax(z), acts


def forward(model: ModelSpec, params, X) -> np.ndarray:
    X, single = _check_dims(model, params, X)
    P, _ = _forward(params, X)
    return P[0] if single else P


def backward(model: ModelSpec, params, X, G) -> list[np.ndarray]:
    """Parameter gradient of ``mean_n phi_n(f(x_n))`` given ``G[n] = d phi_n / d f``."""
    X, _ = _check_dims(model, params, X)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    P, acts = _forward(params, X)
    if G.shape != P.shape:
        raise DomainError(f"probability gradient has shape {G.shape}, expected {P.shape}")
    n = X.shape[0]
    dz = P * (G - (G * P).sum(axis=1, keepdims=True)) / n
    grads = [None] * len(params)
    for j in range(len(params) // 2 - 1, -1, -1):
        h = acts[j]
        grads[2 * j] = h.T @ dz
        grads[2 * j + 1] = dz.sum(axis=0)
        if j > 0:
            dz = (dz @ params[2 * j].T) * (h > 0)
    return grads


def flatten(params) -> np.ndarray:
    return np.concatenate([p.ravel() for p in params])


def unflatten(model: ModelSpec, theta: np.ndarray) -> list[np.ndarray]:
    out, i = [], 0
    w = model.widths
    for fan_in, fan_out in zip(w[:-1], w[1:]):
        for shape in ((fan_in, fan_out), (fan_out,)):
            size = int(np.prod(shape))
            out.append(theta[i : i + size].reshape(shape).copy())
            i += size
    if i != theta.size:
        raise DomainError(f"flat vector has {theta.size} entries, model needs {i}")
    return out


# -- parameter persistence ---------------------------------------------------------


def params_to_bytes(model: ModelSpec, params) -> bytes:
    header = json.dumps({"arch": model.arch, "widths": model.widths, "seed": model.init_seed,
                         "hidden": list(model.hidden)}, sort_keys=True).encode()
    body = flatten(params).astype("<f8").tobytes()
    return PARAM_MAGIC + struct.pack("<I", len(header)) + header + body


def params_from_bytes(blob: bytes) -> tuple[ModelSpec, list[np.ndarray]]:
    if blob[:8] != PARAM_MAGIC:
        raise ParseError("not a parameter blob (bad magic at offset 0)")
    (hlen,) = struct.unpack("<I", blob[8:12])
    head = json.loads(blob[12 : 12 + hlen])
    w = head["widths"]
    model = ModelSpec(head["arch"], w[0], w[-1], tuple(head["hidden"]), head["seed"])
    theta = np.frombuffer(blob[12 + hlen :], dtype="<f8").astype(float)
    return model, unflatten(model, theta)


def params_digest(model: ModelSpec, params) -> str:
    return hashlib.sha256(params_to_bytes(model, params)).hexdigest()


# -- data ----------------------------------------------------------------------------


@dataclass(eq=False)
class PLArrays:
    """Array view of a PL training set: features, candidate indicators, optional true labels."""

    X: np.ndarray
    cand: np.ndarray
    y: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.cand = np.asarray(self.cand, dtype=bool)
        if self.X.ndim != 2 or self.X.shape[0] == 0:
            raise DomainError("training features must be a nonempty n x d matrix")
        if self.cand.shape[0] != self.X.shape[0]:
            raise DomainError("candidate rows do not match feature rows")
        if self.y is not None:
            self.y = np.asarray(self.y, dtype=np.int64)

    @classmethod
    def from_examples(cls, examples: Sequence[PLExample]) -> "PLArrays":
        if len(examples) == 0:
            raise DomainError("empty training set")
        X = np.stack([ex.features for ex in examples])
        if len({ex.candidates.k for ex in examples}) != 1:
            raise DomainError("examples disagree on k")
        cand = np.stack([ex.candidates.indicator() for ex in examples])
        ys = [ex.true_label for ex in examples]
        y = None if any(v is None for v in ys) else np.array(ys)
        return cls(X, cand, y)


@dataclass
class TrainReport:
    pl_risk: list = field(default_factory=list)
    test_error: list = field(default_factory=list)
    transductive_acc: list = field(default_factory=list)
    digest: str = ""
    params: list | None = field(default=None, repr=False)

    METRICS = ("pl_risk", "test_error", "transductive_acc")

    def rows(self):
        for e in range(len(self.pl_risk)):
            yield e + 1, self.pl_risk[e], self.test_error[e], self.transductive_acc[e]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("epoch",) + self.METRICS)
        for e, a, b, c in self.rows():
            w.writerow((e, repr(a), repr(b), repr(c)))
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "TrainReport":
        rep = cls()
        for row in csv.DictReader(io.StringIO(text)):
            for m in cls.METRICS:
                getattr(rep, m).append(float(row[m]))
        return rep


def evaluate(model: ModelSpec, params, X, y) -> tuple[float, float]:
    """Zero-one error and accuracy of the argmax prediction (ties to the lowest label)."""
    y = np.asarray(y)
    if y.size == 0:
        raise DomainError("cannot evaluate on an empty set")
    correct = 0
    for i in range(0, len(y), EVAL_CHUNK):
        P = forward(model, params, np.atleast_2d(X[i : i + EVAL_CHUNK]))
        correct += int(np.sum(np.argmax(P, axis=1) + 1 == y[i : i + EVAL_CHUNK]))
    acc = correct / y.size
    return 1.0 - acc, acc


def _clamped(P, loss: LossSpec):
    return np.maximum(P, loss.eps)


def empirical_risk(model, params, loss: LossSpec, data: PLArrays, form: str = AVERAGE) -> float:
    T = target_weights(data.cand)
    vals = np.empty(data.X.shape[0])
    for i in range(0, len(vals), EVAL_CHUNK):
        P = forward(model, params, data.X[i : i + EVAL_CHUNK])
        vals[i : i + EVAL_CHUNK] = pl_loss_batch(loss, P, T[i : i + EVAL_CHUNK], form)
    return float(np.sum(vals) / vals.size)


def train(
    model: ModelSpec,
    opt: OptimizerConfig,
    loss: LossSpec,
    form: str,
    data,
    test=None,
    seed: int = 0,
    params=None,
) -> TrainReport:
    """Mini-batch SGD with momentum on the empirical PL risk.

    ``data`` is a list of :class:`PLExample` or a :class:`PLArrays`; ``test``
    is an ``(X, y)`` pair or anything with ``features`` and ``labels``.
    """
    if form not in PL_FORMS:
        raise ConfigError(f"PL loss form must be one of {PL_FORMS}, got {form!r}")
    if not isinstance(data, PLArrays):
        data = PLArrays.from_examples(data)
    if data.cand.shape[1] != model.k:
        raise DomainError(f"candidate sets have k={data.cand.shape[1]}, model has k={model.k}")
    if test is not None and not isinstance(test, tuple):
        test = (test.features, test.labels)

    params = init_params(model) if params is None else [p.copy() for p in params]
    vel = [np.zeros_like(p) for p in params]
    T = target_weights(data.cand)
    n = data.X.shape[0]
    rng = np.random.default_rng([seed, 1])
    rep = TrainReport()
    for epoch in range(opt.epochs):
        lr = opt.lr_at(epoch)
        perm = rng.permutation(n)
        for b, start in enumerate(range(0, n, opt.batch_size)):
            idx = perm[start : start + opt.batch_size]
            Xb = data.X[idx]
            P = forward(model, params, Xb)
            G = pl_grad_batch(loss, _clamped(P, loss), T[idx], form)
            if not np.all(np.isfinite(G)):
                raise NumericalError(
                    f"non-finite loss gradient at epoch {epoch + 1}, batch {b + 1}, loss {loss.kind.value}"
                )
            grads = backward(model, params, Xb, G)
            if not all(np.all(np.isfinite(g)) for g in grads):
                raise NumericalError(
                    f"non-finite parameter gradient at epoch {epoch + 1}, batch {b + 1}, loss {loss.kind.value}"
                )
            for p, v, g in zip(params, vel, grads):
                v *= opt.momentum
                v += g
                p -= lr * (v + opt.weight_decay * p)
        risk = empirical_risk(model, params, loss, data, form)
        if not math.isfinite(risk):
            raise NumericalError(f"non-finite PL risk after epoch {epoch + 1}, loss {loss.kind.value}")
        rep.pl_risk.append(risk)
        rep.test_error.append(evaluate(model, params, *test)[0] if test is not None else math.nan)
        rep.transductive_acc.append(
            evaluate(model, params, data.X, data.y)[1] if data.y is not None else math.nan
        )
    rep.params = params
    rep.digest = params_digest(model, params)
    return rep
