"""Partial-label losses built from the multi-class losses in :mod:`losses`."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .labelsets import LabelSet
from .losses import (
    LossKind,
    LossSpec,
    _needs_interior,
    check_simplex,
    class_losses,
    weighted_class_gradient,
)

AVERAGE = "average"
SOFT_TARGET = "soft_target"
PL_FORMS = (AVERAGE, SOFT_TARGET)

# kinds for which the soft target is compared as a vector, not via expectation
_VECTOR_TARGET_KINDS = (LossKind.MAE, LossKind.MSE)


@dataclass
class PLExample:
    features: np.ndarray
    candidates: LabelSet
    true_label: int | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.true_label is not None and not 1 <= self.true_label <= self.candidates.k:
            raise DomainError(f"true label {self.true_label} outside 1..{self.candidates.k}")


def soft_target_form(spec: LossSpec) -> str:
    """Which reading of the soft-target loss applies to ``spec``: 'vector' or 'expectation'."""
    return "vector" if spec.kind in _VECTOR_TARGET_KINDS else "expectation"


def _weights(s: LabelSet) -> np.ndarray:
    ind = s.indicator().astype(float)
    return ind / ind.sum()


def _check(spec: LossSpec, f, s: LabelSet) -> np.ndarray:
    f = check_simplex(f)
    if f.size != s.k:
        raise DomainError(f"probability vector has {f.size} classes, label set has k={s.k}")
    return f


def average_pl_loss(spec: LossSpec, f, s: LabelSet) -> float:
    f = _check(spec, f, s)
    L = np.maximum(class_losses(spec, f), 0.0)
    return float(L[s.indicator()].mean())


def average_pl_gradient(spec: LossSpec, f, s: LabelSet) -> np.ndarray:
    f = _check(spec, f, s)
    if _needs_interior(spec) and f.min() < spec.eps:
        raise DomainError(f"{spec.kind.value} gradient needs every component >= eps")
    return weighted_class_gradient(spec, f, _weights(s))


def soft_target_pl_loss(spec: LossSpec, f, s: LabelSet) -> float:
    f = _check(spec, f, s)
    t = _weights(s)
    return float(soft_target_batch(spec, f[None], t[None])[0])


def soft_target_pl_gradient(spec: LossSpec, f, s: LabelSet) -> np.ndarray:
    f = _check(spec, f, s)
    if _needs_interior(spec) and f.min() < spec.eps:
        raise DomainError(f"{spec.kind.value} gradient needs every component >= eps")
    t = _weights(s)
    return soft_target_grad_batch(spec, f[None], t[None])[0]


def empirical_pl_risk(
    spec: LossSpec,
    examples: Sequence[PLExample],
    predict: Callable[[np.ndarray], np.ndarray],
) -> float:
    if len(examples) == 0:
        raise DomainError("empirical risk of an empty sample")
    vals = np.array([average_pl_loss(spec, predict(ex.features), ex.candidates) for ex in examples])
    # np.sum reduces contiguous float64 with a fixed pairwise tree
    return float(np.sum(vals) / vals.size)


# -- batched forms used by the trainer ----------------------------------------


def target_weights(masks: np.ndarray) -> np.ndarray:
    """Row-normalise a boolean ``(n, k)`` candidate matrix to ``mask / |s|``."""
    m = np.asarray(masks, dtype=float)
    return m / m.sum(axis=1, keepdims=True)


def average_batch(spec: LossSpec, P: np.ndarray, T: np.ndarray) -> np.ndarray:
    return (T * np.maximum(class_losses(spec, P), 0.0)).sum(axis=1)


def average_grad_batch(spec: LossSpec, P: np.ndarray, T: np.ndarray) -> np.ndarray:
    return weighted_class_gradient(spec, P, T)


def soft_target_batch(spec: LossSpec, P: np.ndarray, T: np.ndarray) -> np.ndarray:
    if spec.kind is LossKind.MAE:
        return np.abs(T - P).sum(axis=1)
    if spec.kind is LossKind.MSE:
        return ((T - P) ** 2).sum(axis=1)
    return average_batch(spec, P, T)


def soft_target_grad_batch(spec: LossSpec, P: np.ndarray, T: np.ndarray) -> np.ndarray:
    if spec.kind is LossKind.MAE:
        return np.sign(P - T)
    if spec.kind is LossKind.MSE:
        return 2.0 * (P - T)
    return average_grad_batch(spec, P, T)


def pl_loss_batch(spec: LossSpec, P, T, form: str = AVERAGE) -> np.ndarray:
    if form == AVERAGE:
        return average_batch(spec, P, T)
    if form == SOFT_TARGET:
        return soft_target_batch(spec, P, T)
    raise DomainError(f"unknown PL loss form {form!r}")


def pl_grad_batch(spec: LossSpec, P, T, form: str = AVERAGE) -> np.ndarray:
    if form == AVERAGE:
        return average_grad_batch(spec, P, T)
    if form == SOFT_TARGET:
        return soft_target_grad_batch(spec, P, T)
    raise DomainError(f"unknown PL loss form {form!r}")
