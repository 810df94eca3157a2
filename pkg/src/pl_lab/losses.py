"""Multi-class losses on the probability simplex and their class-sum bounds.

Every loss is a function ``l(f, i)`` of a probability vector ``f`` and a
label ``i``. The vectorised helpers below work on stacks of vectors with
shape ``(..., k)`` and are what the training loop and the oracle use; the
scalar functions validate their input and are the public entry points.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .errors import DomainError

SIMPLEX_TOL = 1e-9


class LossKind(str, Enum):
    MAE = "MAE"
    MSE = "MSE"
    RCE = "RCE"
    GCE = "GCE"
    PCE = "PCE"
    CCE = "CCE"
    FL = "FL"


BOUNDED_KINDS = (LossKind.MAE, LossKind.MSE, LossKind.RCE, LossKind.GCE, LossKind.PCE)
UNBOUNDED_KINDS = (LossKind.CCE, LossKind.FL)
_LOG_KINDS = (LossKind.CCE, LossKind.FL)


@dataclass(frozen=True)
class LossSpec:
    """A loss kind plus its parameters.

    ``tau`` is the PCE threshold (> 1) or the focal exponent (> 0); when left
    as ``None`` it resolves to e for PCE and 2 for FL.
    """

    kind: LossKind
    q: float = 0.7
    tau: float | None = None
    a_rce: float = -4.0
    eps: float = 1e-12

    def __post_init__(self):
        kind = LossKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.tau is None:
            default = {LossKind.PCE: math.e, LossKind.FL: 2.0}.get(kind)
            object.__setattr__(self, "tau", default)
        if not 0 < self.q <= 1:
            raise DomainError(f"GCE exponent q must lie in (0, 1], got {self.q}")
        if kind is LossKind.PCE and not self.tau > 1:
            raise DomainError(f"PCE threshold tau must exceed 1, got {self.tau}")
        if kind is LossKind.FL and not self.tau > 0:
            raise DomainError(f"focal exponent must be positive, got {self.tau}")
        if not self.a_rce < 0:
            raise DomainError(f"RCE log-zero constant must be negative, got {self.a_rce}")
        if not 0 < self.eps <= 1e-6:
            raise DomainError(f"eps must lie in (0, 1e-6], got {self.eps}")

    @property
    def bounded(self) -> bool:
        return self.kind in BOUNDED_KINDS

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LossSpec":
        return cls(**d)

    @classmethod
    def parse(cls, name: str, **params) -> "LossSpec":
        params = {k: v for k, v in params.items() if v is not None}
        return cls(LossKind(name.upper()), **params)


@dataclass(frozen=True)
class LossBounds:
    U: float
    C1: float
    C2: float
    symmetric: bool
    bounded: bool

    def to_dict(self) -> dict:
        return {k: (None if math.isinf(v) else v) if isinstance(v, float) else v
                for k, v in asdict(self).items()}


# -- vectorised kernels -------------------------------------------------------


def _sgn(x):
    # subgradient of |x| taken from the simplex-interior side at the kinks
    return np.where(x >= 0, 1.0, -1.0)


def class_losses(spec: LossSpec, F: np.ndarray) -> np.ndarray:
    """``L[..., i] = l(F[..., :], i + 1)`` with no simplex validation."""
    F = np.asarray(F, dtype=float)
    kind = spec.kind
    if kind is LossKind.MAE:
        absf = np.abs(F)
        return np.abs(1.0 - F) + absf.sum(axis=-1, keepdims=True) - absf
    if kind is LossKind.MSE:
        return (F * F).sum(axis=-1, keepdims=True) - 2.0 * F + 1.0
    if kind is LossKind.RCE:
        return -spec.a_rce * (F.sum(axis=-1, keepdims=True) - F)
    if kind is LossKind.GCE:
        return (1.0 - np.maximum(F, 0.0) ** spec.q) / spec.q
    if kind is LossKind.PCE:
        tau = spec.tau
        lin = -tau * F + math.log(tau) + 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            lg = -np.log(np.maximum(F, spec.eps))
        return np.where(F <= 1.0 / tau, lin, lg)
    if kind is LossKind.CCE:
        return -np.log(np.maximum(F, spec.eps))
    if kind is LossKind.FL:
        return -((1.0 - np.clip(F, None, 1.0)) ** spec.tau) * np.log(np.maximum(F, spec.eps))
    raise DomainError(f"unknown loss kind {kind}")


def weighted_class_gradient(spec: LossSpec, F: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Gradient in ``f`` of ``sum_i W[..., i] * l(f, i)``.

    ``W`` holds nonnegative per-class weights (a one-hot row gives the plain
    loss gradient, ``mask / |s|`` gives the average PL gradient).
    """
    F = np.asarray(F, dtype=float)
    W = np.asarray(W, dtype=float)
    kind = spec.kind
    wsum = W.sum(axis=-1, keepdims=True)
    if kind is LossKind.MAE:
        return -W * _sgn(1.0 - F) + (wsum - W) * _sgn(F)
    if kind is LossKind.MSE:
        return 2.0 * F * wsum - 2.0 * W
    if kind is LossKind.RCE:
        return -spec.a_rce * (wsum - W)
    if kind is LossKind.GCE:
        with np.errstate(divide="ignore"):
            d = -np.maximum(F, 0.0) ** (spec.q - 1.0)
        return W * d
    if kind is LossKind.PCE:
        with np.errstate(divide="ignore"):
            d = np.where(F <= 1.0 / spec.tau, -spec.tau, -1.0 / F)
        return W * d
    if kind is LossKind.CCE:
        return -W / F
    if kind is LossKind.FL:
        t = spec.tau
        one_m = 1.0 - F
        d = t * one_m ** (t - 1.0) * np.log(F) - one_m**t / F
        return W * d
    raise DomainError(f"unknown loss kind {kind}")


# -- validated scalar API ------------------------------------------------------


def check_simplex(f, tol: float = SIMPLEX_TOL) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.ndim != 1 or f.size < 2:
        raise DomainError(f"expected a probability vector, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise DomainError("probability vector has non-finite entries")
    if f.min() < -tol or abs(f.sum() - 1.0) > tol:
        raise DomainError(f"vector is off the simplex (min {f.min():.3g}, sum {f.sum():.12g})")
    return f


def _check_label(y: int, k: int) -> None:
    if not 1 <= y <= k:
        raise DomainError(f"label {y} outside 1..{k}")


def loss_value(spec: LossSpec, f, y: int) -> float:
    f = check_simplex(f)
    _check_label(y, f.size)
    return float(max(class_losses(spec, f)[y - 1], 0.0))


def _needs_interior(spec: LossSpec) -> bool:
    return spec.kind in _LOG_KINDS or (spec.kind is LossKind.GCE and spec.q < 1)


def loss_gradient(spec: LossSpec, f, y: int) -> np.ndarray:
    f = check_simplex(f)
    _check_label(y, f.size)
    if _needs_interior(spec) and f.min() < spec.eps:
        raise DomainError(f"{spec.kind.value} gradient needs every component >= eps")
    w = np.zeros_like(f)
    w[y - 1] = 1.0
    return weighted_class_gradient(spec, f, w)


def class_sum(spec: LossSpec, f) -> float:
    f = check_simplex(f)
    return float(np.maximum(class_losses(spec, f), 0.0).sum())


def bounds(spec: LossSpec, k: int) -> LossBounds:
    if k < 2:
        raise DomainError(f"k must be >= 2, got {k}")
    kind = spec.kind
    inf = math.inf
    if kind is LossKind.MAE:
        U, C1, C2 = 2.0, 2.0 * k - 2, 2.0 * k - 2
    elif kind is LossKind.MSE:
        # ||f||^2 >= 1/k forces the tight lower bound k - 1
        U, C1, C2 = 2.0, k - 1.0, 2.0 * k - 2
    elif kind is LossKind.RCE:
        a = spec.a_rce
        U, C1, C2 = -a, a - a * k, a - a * k
    elif kind is LossKind.GCE:
        q = spec.q
        U, C1, C2 = 1.0 / q, (k - k ** (1.0 - q)) / q, (k - 1.0) / q
    elif kind is LossKind.PCE:
        tau = spec.tau
        U = math.log(tau) + 1.0
        C1 = k * math.log(k) if k <= tau else k - tau + k * math.log(tau)
        C2 = (k - 1.0) * (math.log(tau) + 1.0)
    else:
        return LossBounds(inf, 0.0, inf, symmetric=False, bounded=False)
    symmetric = math.isclose(C1, C2, rel_tol=1e-12, abs_tol=1e-12)
    return LossBounds(float(U), float(C1), float(C2), symmetric=symmetric, bounded=True)
