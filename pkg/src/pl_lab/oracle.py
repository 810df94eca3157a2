"""Exact risks on finite problems and numerical certification of the robustness theorems.

A :class:`DiscreteProblem` has finitely many instances, each with a weight
p(x) and a class posterior p(y|x). Because s is independent of x given y, the
Bayes classifier and the optimal PL classifier decouple into one
minimisation over the simplex per instance:

    supervised:  min_f  sum_y p(y|x) l(f, y)
    PL:          min_f  sum_i c_i l(f, i),   c = W^T p(y|x)

where ``W[y, i] = sum_s p(s|y) [i in s] / |s|`` is the weighted inclusion
matrix. Its diagonal is the constant A of every theorem, its off-diagonal
entries are the h(i) / d(i) terms.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from math import comb
from typing import Callable

import numpy as np

from .errors import ConfigError, DomainError, NumericalError
from .generation import (
    COMPOSITE_PROCESSES,
    GenerationConfig,
    Process,
    flipping_normalizer,
    pl_transition_matrix,
    sample_label_sets,
)
from .labelsets import masks_to_indicator, membership_matrix
from .losses import LossKind, LossSpec, bounds, class_losses, weighted_class_gradient

ORACLE_MAX_K = 12
CERT_TOL = 1e-4
_GRAD_FLOOR = 1e-12


# -- problem types ------------------------------------------------------------------


@dataclass(eq=False)
class DiscreteProblem:
    k: int
    weights: np.ndarray
    posteriors: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.posteriors = np.asarray(self.posteriors, dtype=float)
        w, P = self.weights, self.posteriors
        if P.ndim != 2 or P.shape != (w.size, self.k):
            raise DomainError(f"posteriors must be {w.size}x{self.k}, got {P.shape}")
        if w.min() <= 0 or abs(w.sum() - 1.0) > 1e-12:
            raise DomainError("instance weights must be positive and sum to 1")
        if P.min() < -1e-12 or np.abs(P.sum(axis=1) - 1.0).max() > 1e-12:
            raise DomainError("every posterior must lie on the simplex")

    @property
    def m(self) -> int:
        return self.weights.size

    def is_deterministic(self) -> bool:
        return bool(np.all((self.posteriors == 0) | (self.posteriors == 1)))

    def to_dict(self) -> dict:
        return {"k": self.k, "weights": self.weights.tolist(), "posteriors": self.posteriors.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DiscreteProblem":
        return cls(d["k"], d["weights"], d["posteriors"])


def random_problem(k: int, m: int, rng, deterministic: bool = True) -> DiscreteProblem:
    w = rng.dirichlet(np.ones(m))
    w = np.maximum(w, 1e-6)
    w = w / w.sum()
    if deterministic:
        P = np.eye(k)[rng.integers(0, k, size=m)]
    else:
        P = rng.dirichlet(np.ones(k), size=m)
        P = P / P.sum(axis=1, keepdims=True)
    return DiscreteProblem(k, w, P)


@dataclass(eq=False)
class ClassifierTable:
    rows: np.ndarray

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float)
        if self.rows.ndim != 2 or np.abs(self.rows.sum(axis=1) - 1).max() > 1e-9 or self.rows.min() < -1e-9:
            raise DomainError("classifier rows must lie on the simplex")

    def predictions(self) -> np.ndarray:
        """1-based argmax per instance; ties go to the lowest index."""
        return np.argmax(self.rows, axis=1) + 1


# -- simplex optimisation --------------------------------------------------------------


def project_simplex(V: np.ndarray) -> np.ndarray:
    """Euclidean projection of every row of ``V`` onto the probability simplex."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    n, k = V.shape
    U = -np.sort(-V, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    ind = np.arange(1, k + 1)
    cond = U - css / ind > 0
    rho = k - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(n), rho] / (rho + 1)
    return np.maximum(V - theta[:, None], 0.0)


def _starts(k: int, restarts: int, rng) -> np.ndarray:
    S = [np.eye(k), np.full((1, k), 1.0 / k)]
    if restarts:
        S.append(rng.dirichlet(np.ones(k), size=restarts))
    return np.vstack(S)


def _pgd(value, grad, X0, owner, iters, min_step=1e-12):
    """Projected gradient descent on many rows at once.

    ``value(X, rows)`` / ``grad(X, rows)`` evaluate the objective of problem
    ``owner[rows]``. Each row keeps its own step: grown after an accepted
    step, halved (without moving) after a non-decrease.
    """
    X = X0.copy()
    fx = value(X, np.arange(len(X)))
    if np.any(np.isnan(fx)):
        raise NumericalError("objective returned NaN at a starting point")
    step = np.ones(len(X))
    active = np.arange(len(X))
    for _ in range(iters):
        if active.size == 0:
            break
        G = grad(X[active], active)
        Y = project_simplex(X[active] - step[active, None] * G)
        fy = value(Y, active)
        if np.any(np.isnan(fy)):
            raise NumericalError("objective returned NaN during descent")
        gain = fx[active] - fy
        ok = gain > 1e-15 * np.maximum(1.0, np.abs(fx[active]))
        acc = active[ok]
        X[acc] = Y[ok]
        fx[acc] = fy[ok]
        step[acc] = np.minimum(step[acc] * 1.5, 1e6)
        step[active[~ok]] *= 0.5
        active = active[step[active] >= min_step]
    return X, fx


def _pick_best(X, fx, owner, n):
    """Best row per owner.

    Among near-ties the row with the lowest argmax wins, then the one with
    the largest top coordinate; this sends ties to the lowest label and
    prefers clean vertices over equal-valued mixtures.
    """
    best = np.full(n, np.inf)
    np.minimum.at(best, owner, fx)
    out = np.empty((n, X.shape[1]))
    vals = np.empty(n)
    keys = [None] * n
    for r in range(len(X)):
        o = owner[r]
        if fx[r] > best[o] + 1e-12 * max(1.0, abs(best[o])):
            continue
        key = (int(np.argmax(X[r])), -float(X[r].max()))
        if keys[o] is None or key < keys[o]:
            out[o], vals[o], keys[o] = X[r], fx[r], key
    return out, vals


def simplex_minimize(
    objective: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    k: int,
    restarts: int = 20,
    iters: int = 2000,
    seed: int = 0,
) -> np.ndarray:
    """Minimise ``objective`` over the probability simplex.

    Starts from the k vertices, the centroid and ``restarts`` Dirichlet
    points; returns the best iterate found.
    """
    X0 = _starts(k, restarts, np.random.default_rng(seed))
    owner = np.zeros(len(X0), dtype=int)

    def value(X, rows):
        return np.array([float(objective(x)) for x in X])

    def grad(X, rows):
        return np.array([gradient(np.maximum(x, _GRAD_FLOOR)) for x in X], dtype=float)

    X, fx = _pgd(value, grad, X0, owner, iters)
    x, _ = _pick_best(X, fx, owner, 1)
    return x[0]


_CACHE: dict = {}


def _closed_form(spec: LossSpec, C: np.ndarray):
    """Stationary points of the weighted objective where they have a closed form.

    Used as extra starts: GCE's derivative blows up at the boundary, which
    stalls projected steps next to small coordinates.
    """
    tot = C.sum(axis=1, keepdims=True)
    if np.any(tot <= 0):
        return None
    if spec.kind in (LossKind.CCE, LossKind.MSE):
        return C / tot
    if spec.kind is LossKind.GCE and spec.q < 1:
        Z = (C / C.max(axis=1, keepdims=True)) ** (1.0 / (1.0 - spec.q))
        return Z / Z.sum(axis=1, keepdims=True)
    return None


def minimize_weighted_losses(spec: LossSpec, C: np.ndarray, restarts: int = 20, iters: int = 2000, seed: int = 0):
    """Row-wise minimiser of ``f -> sum_i C[r, i] * l(f, i)`` over the simplex.

    Identical weight rows are solved once; results are memoised per
    (loss, weight row) since the search is deterministic.
    """
    C = np.asarray(C, dtype=float)
    n, k = C.shape
    keys = [(spec, restarts, iters, seed, row.tobytes()) for row in C]
    todo = sorted({i for i, key in enumerate(keys) if key not in _CACHE}, key=lambda i: keys[i])
    uniq, seen = [], set()
    for i in todo:
        if keys[i] not in seen:
            seen.add(keys[i])
            uniq.append(i)
    if uniq:
        Cu = C[uniq]
        S = _starts(k, restarts, np.random.default_rng(seed))
        X0 = np.tile(S, (len(uniq), 1))
        owner = np.repeat(np.arange(len(uniq)), len(S))
        warm = _closed_form(spec, Cu)
        if warm is not None:
            X0 = np.vstack([X0, warm])
            owner = np.concatenate([owner, np.arange(len(uniq))])

        def value(X, rows):
            return (Cu[owner[rows]] * np.maximum(class_losses(spec, X), 0.0)).sum(axis=1)

        def grad(X, rows):
            return weighted_class_gradient(spec, np.maximum(X, _GRAD_FLOOR), Cu[owner[rows]])

        X, fx = _pgd(value, grad, X0, owner, iters)
        best, _ = _pick_best(X, fx, owner, len(uniq))
        for j, i in enumerate(uniq):
            _CACHE[keys[i]] = best[j]
    return np.array([_CACHE[key] for key in keys])


def clear_cache() -> None:
    _CACHE.clear()


def simplex_grid(k: int, resolution: float = 0.01) -> np.ndarray:
    """All simplex points whose coordinates are multiples of ``resolution``."""
    n = int(round(1.0 / resolution))

    def rec(parts, left):
        if parts == 1:
            return [[left]]
        return [[a] + rest for a in range(left + 1) for rest in rec(parts - 1, left - a)]

    return np.array(rec(k, n), dtype=float) / n


def grid_minimize_weighted(spec: LossSpec, c, resolution: float = 0.01):
    """Brute-force counterpart of :func:`minimize_weighted_losses` (k <= 4)."""
    c = np.asarray(c, dtype=float)
    G = simplex_grid(c.size, resolution)
    vals = (np.maximum(class_losses(spec, G), 0.0) * c).sum(axis=1)
    j = int(np.argmin(vals))
    return G[j], float(vals[j])


# -- classifiers and exact risks -------------------------------------------------------------


def inclusion_weights(config: GenerationConfig) -> np.ndarray:
    """``W[y-1, i-1] = sum_s p(s|y) [i in s] / |s|``."""
    if config.k > ORACLE_MAX_K:
        raise DomainError(f"oracle computations need k <= {ORACLE_MAX_K}")
    member = membership_matrix(config.k).astype(float)
    Q = pl_transition_matrix(config).entries
    return Q @ (member / member.sum(axis=1, keepdims=True))


def bayes_classifier(problem: DiscreteProblem, spec: LossSpec) -> ClassifierTable:
    return ClassifierTable(minimize_weighted_losses(spec, problem.posteriors))


def optimal_pl_classifier(problem: DiscreteProblem, config: GenerationConfig, spec: LossSpec) -> ClassifierTable:
    if config.k != problem.k:
        raise DomainError("problem and generation config disagree on k")
    W = inclusion_weights(config)
    return ClassifierTable(minimize_weighted_losses(spec, problem.posteriors @ W))


def _rows(problem: DiscreteProblem, table) -> np.ndarray:
    rows = table.rows if isinstance(table, ClassifierTable) else np.asarray(table, dtype=float)
    if rows.shape != (problem.m, problem.k):
        raise DomainError(f"classifier table is {rows.shape}, problem needs {(problem.m, problem.k)}")
    return rows


def exact_supervised_risk(problem: DiscreteProblem, spec: LossSpec, table) -> float:
    L = np.maximum(class_losses(spec, _rows(problem, table)), 0.0)
    per_instance = (problem.posteriors * L).sum(axis=1)
    return float(np.sum(problem.weights * per_instance))


def exact_pl_risk(problem: DiscreteProblem, config: GenerationConfig, spec: LossSpec, table) -> float:
    """Sum over instances and every set of the PL space; no inclusion-weight shortcut."""
    if config.k > ORACLE_MAX_K:
        raise DomainError(f"oracle computations need k <= {ORACLE_MAX_K}")
    L = np.maximum(class_losses(spec, _rows(problem, table)), 0.0)
    member = membership_matrix(config.k).astype(float)
    set_loss = (L @ member.T) / member.sum(axis=1)  # m x n_sets
    Q = pl_transition_matrix(config).entries
    q = problem.posteriors @ Q  # m x n_sets, p(s|x)
    return float(np.sum(problem.weights * (q * set_loss).sum(axis=1)))


def monte_carlo_risks(problem, config, spec, table, n: int, rng):
    """Sampling estimates ``(R, se_R, R_PL, se_R_PL)`` from ``n`` draws of (x, y, s)."""
    rows = _rows(problem, table)
    L = np.maximum(class_losses(spec, rows), 0.0)
    xi = rng.choice(problem.m, size=n, p=problem.weights)
    cum = np.cumsum(problem.posteriors[xi], axis=1)
    y = np.minimum((cum <= rng.random(n)[:, None] * cum[:, -1:]).sum(axis=1), problem.k - 1) + 1
    sup = L[xi, y - 1]
    masks = sample_label_sets(config, y, rng)
    ind = masks_to_indicator(masks, problem.k)
    pl = (L[xi] * ind).sum(axis=1) / ind.sum(axis=1)
    se = lambda v: float(v.std(ddof=1) / math.sqrt(n))
    return float(sup.mean()), se(sup), float(pl.mean()), se(pl)


# -- theorem constants -------------------------------------------------------------------------

THEOREMS = ("thm1", "cor1", "thm2", "cor2", "thm3", "cor3", "thm4", "thm5", "thm6", "thm7", "thm8")
COROLLARIES = ("cor1", "cor2", "cor3")


def _theorem_process_ok(config: GenerationConfig, theorem: str) -> bool:
    p, b = config.process, config.base
    return {
        "thm1": p is Process.SAMPLING,
        "cor1": p is Process.SAMPLING and config.eta_sets is None,
        "thm2": p is Process.FLIPPING,
        "cor2": p is Process.FLIPPING and config.eta_flip is None,
        "thm3": p is Process.ARBITRARY_SAMPLING,
        "cor3": p is Process.ARBITRARY_SAMPLING and config.eta_sets is None,
        "thm4": p in COMPOSITE_PROCESSES,
        "thm5": p is Process.AMBIGUOUS_NOISE and b is Process.SAMPLING,
        "thm6": p is Process.AMBIGUOUS_NOISE and b is Process.FLIPPING,
        "thm7": p is Process.NOISY_AMBIGUITY and b is Process.SAMPLING,
        "thm8": p is Process.NOISY_AMBIGUITY and b is Process.FLIPPING,
    }[theorem]


@dataclass(eq=False)
class BoundConstants:
    """Constants of one theorem.

    ``A`` is per true label and follows the theorem's own normalisation
    (flipping-based statements leave the normaliser M out of A). ``h[y, i]``
    and ``d[y, i]`` are the normalised weighted inclusion of label i given y.
    ``bound_value`` bounds R_PL(f*) - R*_PL, ``classifier_bound`` bounds
    R(f*_PL) - R* and exists only when all incorrect labels share one weight.
    """

    theorem: str
    A: np.ndarray
    h: np.ndarray
    d: np.ndarray
    M: np.ndarray | None
    A_prime: float | None
    bound_value: float
    classifier_bound: float | None
    d_terms: dict | None = None

    def to_dict(self) -> dict:
        fix = lambda v: None if v is None or (isinstance(v, float) and math.isinf(v)) else v
        out = {
            "theorem": self.theorem,
            "A": self.A.tolist(),
            "h": self.h.tolist(),
            "d": self.d.tolist(),
            "M": None if self.M is None else self.M.tolist(),
            "A_prime": self.A_prime,
            "bound_value": fix(self.bound_value),
            "classifier_bound": fix(self.classifier_bound),
        }
        return out


def uniform_sampling_constants(k: int) -> tuple[float, float]:
    N = 2 ** (k - 1) - 1
    A = sum(comb(k - 1, j - 1) / j for j in range(1, k)) / N
    Ap = sum(comb(k - 2, j - 2) / j for j in range(2, k)) / N
    return A, Ap


def uniform_flipping_constants(k: int, eta: float) -> tuple[float, float, float]:
    """(A, A', M) with A and A' unnormalised, as in the flipping corollary."""
    A = sum(comb(k - 1, j - 1) / j * eta ** (j - 1) * (1 - eta) ** (k - j) for j in range(1, k))
    Ap = sum(comb(k - 2, j - 2) / j * eta ** (j - 1) * (1 - eta) ** (k - j) for j in range(2, k))
    M = 1.0 / (1.0 - eta ** (k - 1))
    return A, Ap, M


def uniform_arbitrary_constants(k: int, gamma_pl: float) -> tuple[float, float]:
    N = 2 ** (k - 1) - 1
    A = (1 - gamma_pl) / N * sum(comb(k - 1, j - 1) / j for j in range(1, k))
    Ap = (1 - gamma_pl) / N * sum(comb(k - 2, j - 2) / j for j in range(2, k)) + gamma_pl / N * sum(
        comb(k - 2, j - 1) / j for j in range(1, k)
    )
    return A, Ap


def _flip_normalizers(config: GenerationConfig) -> np.ndarray | None:
    if config.clean_process is not Process.FLIPPING:
        return None
    E = config.flip_matrix()
    return np.array([flipping_normalizer(E[y - 1], y) for y in range(1, config.k + 1)])


def _clean_config(config: GenerationConfig) -> GenerationConfig:
    return GenerationConfig(
        config.base,
        config.k,
        eta_sets=config.eta_sets,
        eta_flip=config.eta_flip,
        uniform_eta=config.uniform_eta,
    )


def noise_d_terms(config: GenerationConfig) -> dict:
    """d(y), d(i), d(y, j), d(i, j) of the ambiguous-noise statements, indexed by the true label.

    ``a[yb]`` is the weighted inclusion of the corrupted label in its own clean
    set and ``b[yb, j]`` that of label j, both under the clean base process.
    """
    k = config.k
    T = config.transition_matrix()
    Wc = inclusion_weights(_clean_config(config))
    a = np.diag(Wc).copy()
    b = Wc.copy()
    np.fill_diagonal(b, 0.0)
    d_y = np.diag(T) * a
    d_i = T * a[None, :]
    np.fill_diagonal(d_i, 0.0)
    d_yj = np.diag(T)[:, None] * b
    d_ij = T[:, :, None] * b[None, :, :]  # [y, i, j]
    for y in range(k):
        d_ij[y, y] = 0.0
    return {"d_y": d_y, "d_i": d_i, "d_yj": d_yj, "d_ij": d_ij}


def _uniform_structure(W: np.ndarray, tol: float = 1e-12):
    diag = np.diag(W)
    off = W[~np.eye(W.shape[0], dtype=bool)]
    if np.ptp(diag) <= tol and np.ptp(off) <= tol:
        return float(diag.mean()), float(off.mean())
    return None


def bound_constants(config: GenerationConfig, spec: LossSpec, theorem: str) -> BoundConstants:
    if theorem not in THEOREMS:
        raise DomainError(f"unknown theorem {theorem!r}; expected one of {THEOREMS}")
    if not _theorem_process_ok(config, theorem):
        raise DomainError(f"{theorem} does not apply to a {config.process.value} config")
    k = config.k
    lb = bounds(spec, k)
    width = lb.C2 - lb.C1
    W = inclusion_weights(config)
    A_norm = np.diag(W).copy()
    h = W.copy()
    np.fill_diagonal(h, 0.0)
    M = _flip_normalizers(config)
    A = A_norm / M if M is not None else A_norm
    bound_value = float(A_norm.max() * width) if lb.bounded else math.inf

    A_prime = None
    classifier_bound = None
    uni = _uniform_structure(W)
    if uni is not None and uni[0] > uni[1]:
        A_prime = uni[1]
        classifier_bound = A_prime * width / (uni[0] - uni[1]) if lb.bounded else math.inf

    # corollaries: the stated closed forms
    if theorem == "cor1":
        Ac, Apc = uniform_sampling_constants(k)
        A, A_prime = np.full(k, Ac), Apc
        bound_value = Apc * width if lb.bounded else math.inf
        classifier_bound = Apc * width / (Ac - Apc) if lb.bounded else math.inf
    elif theorem == "cor2":
        Ac, Apc, Mc = uniform_flipping_constants(k, config.uniform_eta or 0.0)
        A, A_prime, M = np.full(k, Ac), Apc, np.full(k, Mc)
        bound_value = Mc * Apc * width if lb.bounded else math.inf
        classifier_bound = Apc * width / (Ac - Apc) if lb.bounded else math.inf
    elif theorem == "cor3":
        Ac, Apc = uniform_arbitrary_constants(k, config.gamma_pl or 0.0)
        A, A_prime = np.full(k, Ac), Apc
        bound_value = Apc * width if lb.bounded else math.inf
        if Ac > Apc:
            classifier_bound = Apc * width / (Ac - Apc) if lb.bounded else math.inf
        else:
            classifier_bound = None

    d_terms = None
    if config.process is Process.AMBIGUOUS_NOISE:
        d_terms = noise_d_terms(config)
    return BoundConstants(theorem, A, h, W.copy(), M, A_prime, bound_value, classifier_bound, d_terms)


# -- domination conditions --------------------------------------------------------------------------


def domination_check(config: GenerationConfig) -> dict[str, bool]:
    """Sufficient conditions for robustness, each evaluated by enumeration.

    ``weighted_inclusion`` is the general A > h(i) condition; the remaining
    keys are the process-specific forms and their uniform reductions.
    """
    k = config.k
    W = inclusion_weights(config)
    diag = np.diag(W)
    off = W.copy()
    np.fill_diagonal(off, -np.inf)
    out = {"weighted_inclusion": bool(np.all(diag[:, None] > off.max(axis=1, keepdims=True) + 1e-15))}
    p = config.process
    if p is Process.SAMPLING:
        member = membership_matrix(k)
        Q = pl_transition_matrix(config).entries
        incl = Q @ member.astype(float)  # p(i in s | y)
        np.fill_diagonal(incl, 0.0)
        out["incorrect_inclusion_lt_1"] = bool(np.all(incl < 1.0 - 1e-15))
    elif p is Process.FLIPPING:
        E = config.flip_matrix()
        out["flip_prob_lt_1"] = bool(np.all(E[~np.eye(k, dtype=bool)] < 1.0))
    elif p is Process.ARBITRARY_SAMPLING:
        if config.eta_sets is None:
            out["gamma_pl_lt_half"] = (config.gamma_pl or 0.0) < 0.5
    elif p is Process.AMBIGUOUS_NOISE:
        T = config.transition_matrix()
        off_T = T.copy()
        np.fill_diagonal(off_T, -np.inf)
        out["noise_row_dominance"] = bool(np.all(off_T.max(axis=1) < np.diag(T)))
        if config.noise_T is None:
            out["symmetric_gamma_lt_(k-1)/k"] = (config.uniform_gamma or 0.0) < (k - 1) / k
    elif p is Process.NOISY_AMBIGUITY:
        g = config.set_flip_rates()
        out["gamma_s_lt_1/k"] = bool(np.all(g < 1.0 / k))
        if config.gamma_sets is None:
            out["gamma_pl_lt_half"] = (config.uniform_gamma or 0.0) < 0.5
    return out


def required_conditions(config: GenerationConfig, theorem: str) -> dict[str, bool]:
    dom = domination_check(config)
    if theorem == "thm1":
        keys = ["incorrect_inclusion_lt_1"]
    elif theorem in ("cor1", "thm2", "cor2"):
        keys = []
    elif theorem == "cor3":
        keys = ["gamma_pl_lt_half"]
    elif theorem == "thm4":
        # the general statement leaves A unspecified; use the reductions of the two composite processes
        extra = "noise_row_dominance" if config.process is Process.AMBIGUOUS_NOISE else "gamma_s_lt_1/k"
        keys = ["weighted_inclusion", extra]
    else:
        keys = ["weighted_inclusion"]
    return {key: dom[key] for key in keys}


# -- certification ---------------------------------------------------------------------------------


@dataclass
class Inequality:
    name: str
    lhs: float
    rhs: float
    holds: bool

    def to_dict(self) -> dict:
        f = lambda v: None if math.isinf(v) else v
        return {"name": self.name, "lhs": f(self.lhs), "rhs": f(self.rhs), "holds": self.holds}


@dataclass
class TheoremReport:
    theorem: str
    loss: dict
    conditions: dict[str, bool]
    constants: BoundConstants
    risks: dict[str, float]
    inequalities: list[Inequality]
    argmax_equal: bool | None
    passed: bool
    tolerance: float = CERT_TOL
    problem: dict | None = field(default=None, repr=False)

    @property
    def conditions_met(self) -> bool:
        return all(self.conditions.values())

    @property
    def status(self) -> str:
        if not self.conditions_met:
            return "conditions not met"
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "loss": self.loss,
            "status": self.status,
            "passed": self.passed,
            "conditions_met": self.conditions_met,
            "conditions": self.conditions,
            "constants": self.constants.to_dict(),
            "risks": self.risks,
            "inequalities": [i.to_dict() for i in self.inequalities],
            "argmax_equal": self.argmax_equal,
            "tolerance": self.tolerance,
        }


def check_theorem(
    problem: DiscreteProblem,
    config: GenerationConfig,
    spec: LossSpec,
    theorem: str,
    tol: float = CERT_TOL,
) -> TheoremReport:
    consts = bound_constants(config, spec, theorem)
    conditions = required_conditions(config, theorem)
    if theorem not in COROLLARIES:
        conditions["bayes_risk_zero"] = problem.is_deterministic()

    f_star = bayes_classifier(problem, spec)
    f_pl = optimal_pl_classifier(problem, config, spec)
    risks = {
        "R(f*)": exact_supervised_risk(problem, spec, f_star),
        "R(f*_PL)": exact_supervised_risk(problem, spec, f_pl),
        "R_PL(f*)": exact_pl_risk(problem, config, spec, f_star),
        "R_PL(f*_PL)": exact_pl_risk(problem, config, spec, f_pl),
    }
    gap = risks["R_PL(f*)"] - risks["R_PL(f*_PL)"]
    ineqs = [Inequality("0 <= R_PL(f*) - R*_PL", 0.0, gap, gap >= -tol)]
    if spec.bounded:
        ineqs.append(Inequality("R_PL(f*) - R*_PL <= bound", gap, consts.bound_value, gap <= consts.bound_value + tol))
    if theorem in COROLLARIES and consts.classifier_bound is not None:
        rgap = risks["R(f*_PL)"] - risks["R(f*)"]
        ineqs.append(Inequality("0 <= R(f*_PL) - R*", 0.0, rgap, rgap >= -tol))
        if spec.bounded:
            ineqs.append(
                Inequality("R(f*_PL) - R* <= classifier bound", rgap, consts.classifier_bound,
                           rgap <= consts.classifier_bound + tol)
            )
    argmax_equal = None
    if bounds(spec, config.k).symmetric:
        argmax_equal = bool(np.array_equal(f_star.predictions(), f_pl.predictions()))
    passed = all(i.holds for i in ineqs) and argmax_equal is not False
    return TheoremReport(
        theorem, spec.to_dict(), conditions, consts, risks, ineqs, argmax_equal, passed, tol, problem.to_dict()
    )


# -- random configurations satisfying the conditions ----------------------------------------------


def _random_sampling_table(k, rng, clean_only=True, noise=0.0):
    member = membership_matrix(k).T  # k x n_sets
    E = np.zeros(member.shape)
    for y in range(k):
        clean = rng.dirichlet(np.ones(member[y].sum()))
        E[y, member[y]] = (1 - noise) * clean
        if not clean_only:
            E[y, ~member[y]] = noise * rng.dirichlet(np.ones((~member[y]).sum()))
    return E


def _random_flip(k, rng, high=0.9):
    E = rng.uniform(0, high, size=(k, k))
    np.fill_diagonal(E, 1.0)
    return E


def _random_T(k, rng, stay=0.6):
    T = stay * np.eye(k) + (1 - stay) * rng.dirichlet(np.ones(k), size=k)
    return T / T.sum(axis=1, keepdims=True)


def random_config(theorem: str, k: int, rng, max_tries: int = 1000) -> GenerationConfig:
    """A random configuration of the theorem's process whose conditions hold."""
    for _ in range(max_tries):
        if theorem == "thm1":
            cfg = GenerationConfig(Process.SAMPLING, k, eta_sets=_random_sampling_table(k, rng))
        elif theorem == "cor1":
            cfg = GenerationConfig(Process.SAMPLING, k)
        elif theorem == "thm2":
            cfg = GenerationConfig(Process.FLIPPING, k, eta_flip=_random_flip(k, rng))
        elif theorem == "cor2":
            cfg = GenerationConfig(Process.FLIPPING, k, uniform_eta=float(rng.uniform(0.0, 0.9)))
        elif theorem == "thm3":
            table = _random_sampling_table(k, rng, clean_only=False, noise=float(rng.uniform(0, 0.4)))
            cfg = GenerationConfig(Process.ARBITRARY_SAMPLING, k, eta_sets=table)
        elif theorem == "cor3":
            cfg = GenerationConfig(Process.ARBITRARY_SAMPLING, k, gamma_pl=float(rng.uniform(0.0, 0.49)))
        elif theorem in ("thm5", "thm6"):
            base = Process.SAMPLING if theorem == "thm5" else Process.FLIPPING
            kw = {"eta_sets": _random_sampling_table(k, rng)} if base is Process.SAMPLING else {"eta_flip": _random_flip(k, rng, 0.5)}
            cfg = GenerationConfig(Process.AMBIGUOUS_NOISE, k, base=base, noise_T=_random_T(k, rng), **kw)
        elif theorem in ("thm7", "thm8", "thm4"):
            base = Process.FLIPPING if theorem == "thm8" else Process.SAMPLING
            kw = {"eta_sets": _random_sampling_table(k, rng)} if base is Process.SAMPLING else {"eta_flip": _random_flip(k, rng, 0.5)}
            g = rng.uniform(0, 0.3, size=2**k - 2)
            cfg = GenerationConfig(Process.NOISY_AMBIGUITY, k, base=base, gamma_sets=g, **kw)
        else:
            raise DomainError(f"unknown theorem {theorem!r}")
        if all(required_conditions(cfg, theorem).values()):
            return cfg
    raise ConfigError(f"could not draw a {theorem} config satisfying its conditions")


# -- condition-sharpness fixtures ---------------------------------------------------------------------


def load_fixture_problems(name: str = "sharpness_problems.json") -> list[DiscreteProblem]:
    text = resources.files("pl_lab").joinpath("fixtures", name).read_text()
    return [DiscreteProblem.from_dict(d) for d in json.loads(text)["problems"]]


def argmax_violations(problems, config_for_k: Callable[[int], GenerationConfig], spec: LossSpec):
    """``(problem index, instance index)`` pairs where argmax f* != argmax f*_PL."""
    out = []
    for pi, prob in enumerate(problems):
        cfg = config_for_k(prob.k)
        a = bayes_classifier(prob, spec).predictions()
        b = optimal_pl_classifier(prob, cfg, spec).predictions()
        out.extend((pi, int(i)) for i in np.flatnonzero(a != b))
    return out


def sharpness_probe(gamma_pl: float, problems=None, spec: LossSpec | None = None):
    """Argmax disagreements under uniform arbitrary sampling at rate ``gamma_pl`` (MAE by default)."""
    problems = load_fixture_problems() if problems is None else problems
    spec = LossSpec(LossKind.MAE) if spec is None else spec
    return argmax_violations(problems, lambda k: GenerationConfig(Process.ARBITRARY_SAMPLING, k, gamma_pl=gamma_pl), spec)
