"""Generation of clean and noisy partial labels.

Five processes map a true label ``y`` to a candidate set ``s``:

* ``SAMPLING``            s drawn from a table of set probabilities, always containing y
* ``FLIPPING``            each other label joins s independently; the full set is re-drawn
* ``ARBITRARY_SAMPLING``  s drawn from a table over the whole PL space
* ``AMBIGUOUS_NOISE``     y is first corrupted through a transition matrix T, then a
                          clean base process generates s around the corrupted label
* ``NOISY_AMBIGUITY``     a clean base set is replaced by its complement with rate gamma_s

Exact per-label distributions over the PL space (canonical mask order, see
:mod:`labelsets`) come from :func:`set_distribution`; the samplers are
generative and never consult those distributions, so the two can be tested
against each other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ConfigError, DomainError
from .labelsets import (
    MAX_ENUM_K,
    LabelSet,
    complement_index,
    membership_matrix,
)
from .pl_losses import PLExample

ROW_TOL = 1e-9


class Process(str, Enum):
    SAMPLING = "sampling"
    FLIPPING = "flipping"
    ARBITRARY_SAMPLING = "arbitrary_sampling"
    AMBIGUOUS_NOISE = "ambiguous_noise"
    NOISY_AMBIGUITY = "noisy_ambiguity"


CLEAN_PROCESSES = (Process.SAMPLING, Process.FLIPPING)
COMPOSITE_PROCESSES = (Process.AMBIGUOUS_NOISE, Process.NOISY_AMBIGUITY)


def _arr(x):
    return None if x is None else np.asarray(x, dtype=float)


@dataclass(frozen=True, eq=False)
class GenerationConfig:
    """All rates of one generation process.

    Missing tables fall back to the uniform shortcuts: a SAMPLING process with
    no ``eta_sets`` is the uniform sampling process, FLIPPING uses
    ``uniform_eta`` for every off-diagonal flip probability, ARBITRARY_SAMPLING
    uses ``gamma_pl``. For the composite processes ``uniform_gamma`` is the
    symmetric label-noise rate (AMBIGUOUS_NOISE) or the common set flipping
    rate (NOISY_AMBIGUITY).
    """

    process: Process
    k: int
    eta_sets: np.ndarray | None = None
    eta_flip: np.ndarray | None = None
    noise_T: np.ndarray | None = None
    gamma_sets: np.ndarray | None = None
    base: Process | None = None
    uniform_eta: float | None = None
    uniform_gamma: float | None = None
    gamma_pl: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "process", Process(self.process))
        if self.base is not None:
            object.__setattr__(self, "base", Process(self.base))
        for name in ("eta_sets", "eta_flip", "noise_T", "gamma_sets"):
            object.__setattr__(self, name, _arr(getattr(self, name)))
        if self.process in COMPOSITE_PROCESSES and self.base is None:
            object.__setattr__(self, "base", Process.SAMPLING)
        self.validate()

    # -- resolution of shortcuts --------------------------------------------

    @property
    def n_sets(self) -> int:
        return 2**self.k - 2

    @property
    def clean_process(self) -> Process:
        return self.base if self.process in COMPOSITE_PROCESSES else self.process

    def is_uniform(self) -> bool:
        """True when every table is given through a scalar shortcut."""
        if self.eta_sets is not None or self.eta_flip is not None:
            return False
        if self.process is Process.AMBIGUOUS_NOISE:
            return self.noise_T is None
        if self.process is Process.NOISY_AMBIGUITY:
            return self.gamma_sets is None
        return True

    def flip_matrix(self) -> np.ndarray:
        if self.eta_flip is not None:
            return self.eta_flip
        eta = 0.0 if self.uniform_eta is None else self.uniform_eta
        E = np.full((self.k, self.k), float(eta))
        np.fill_diagonal(E, 1.0)
        return E

    def transition_matrix(self) -> np.ndarray:
        if self.noise_T is not None:
            return self.noise_T
        return symmetric_noise_matrix(self.k, self.uniform_gamma or 0.0)

    def set_flip_rates(self) -> np.ndarray:
        if self.gamma_sets is not None:
            return self.gamma_sets
        return np.full(self.n_sets, float(self.uniform_gamma or 0.0))

    def set_flip_rate_of(self, mask: int) -> float:
        if self.gamma_sets is not None:
            return float(self.gamma_sets[mask - 1])
        return float(self.uniform_gamma or 0.0)

    def sampling_table(self) -> np.ndarray:
        """``k x (2^k - 2)`` table of eta_ys for the two sampling processes."""
        if self.eta_sets is not None:
            return self.eta_sets
        member = membership_matrix(self.k).T.astype(float)  # k x n_sets
        half = 2 ** (self.k - 1) - 1
        if self.clean_process is Process.SAMPLING and self.process is not Process.ARBITRARY_SAMPLING:
            return member / half
        g = float(self.gamma_pl or 0.0)
        return np.where(member > 0, (1.0 - g) / half, g / half)

    # -- validation -----------------------------------------------------------

    def validate(self) -> None:
        k = self.k
        if k < 2:
            raise ConfigError(f"k must be >= 2, got {k}")
        p = self.process
        if p in COMPOSITE_PROCESSES and self.base not in CLEAN_PROCESSES:
            raise ConfigError(f"base process must be sampling or flipping, got {self.base}")
        needs_enum = self.eta_sets is not None or self.gamma_sets is not None
        if needs_enum and k > MAX_ENUM_K:
            raise ConfigError(f"explicit set tables need k <= {MAX_ENUM_K}")
        for name in ("uniform_eta", "uniform_gamma", "gamma_pl"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.uniform_eta is not None and self.uniform_eta >= 1.0:
            raise ConfigError("uniform_eta must be < 1 (small ambiguity degree)")
        if self.eta_sets is not None:
            self._validate_eta_sets()
        if self.eta_flip is not None:
            self._validate_eta_flip()
        if self.noise_T is not None:
            T = self.noise_T
            if T.shape != (k, k):
                raise ConfigError(f"noise_T must be {k}x{k}, got {T.shape}")
            for y in range(k):
                row = T[y]
                if row.min() < 0 or abs(row.sum() - 1.0) > ROW_TOL:
                    raise ConfigError(f"noise_T row {y + 1} is not a distribution: {row.tolist()}")
        if self.gamma_sets is not None:
            g = self.gamma_sets
            if g.shape != (self.n_sets,):
                raise ConfigError(f"gamma_sets must have length {self.n_sets}, got {g.shape}")
            bad = np.flatnonzero((g < 0) | (g > 1))
            if bad.size:
                raise ConfigError(f"gamma_sets entry for set {bad[0] + 1} outside [0, 1]")

    def _validate_eta_sets(self) -> None:
        k = self.k
        E = self.eta_sets
        if E.shape != (k, self.n_sets):
            raise ConfigError(f"eta_sets must be {k}x{self.n_sets}, got {E.shape}")
        member = membership_matrix(k)
        for y in range(k):
            row = E[y]
            if row.min() < 0 or row.max() > 1 or abs(row.sum() - 1.0) > ROW_TOL:
                raise ConfigError(f"eta_sets row {y + 1} is not a distribution (sum {row.sum():.12g})")
            if self.clean_process is Process.SAMPLING and self.process is not Process.ARBITRARY_SAMPLING:
                if np.any(row[~member[:, y]] > 0):
                    raise ConfigError(f"eta_sets row {y + 1} puts mass on sets without label {y + 1}")

    def _validate_eta_flip(self) -> None:
        k = self.k
        E = self.eta_flip
        if E.shape != (k, k):
            raise ConfigError(f"eta_flip must be {k}x{k}, got {E.shape}")
        for y in range(k):
            row = E[y]
            if row[y] != 1.0:
                raise ConfigError(f"eta_flip row {y + 1}: diagonal must be 1, got {row[y]}")
            off = np.delete(row, y)
            if off.min() < 0 or off.max() >= 1:
                raise ConfigError(f"eta_flip row {y + 1}: off-diagonal entries must lie in [0, 1)")

    # -- serialisation ----------------------------------------------------------

    def to_dict(self) -> dict:
        d = {"process": self.process.value, "k": self.k}
        if self.base is not None:
            d["base"] = self.base.value
        for name in ("eta_sets", "eta_flip", "noise_T", "gamma_sets"):
            v = getattr(self, name)
            if v is not None:
                d[name] = v.tolist()
        for name in ("uniform_eta", "uniform_gamma", "gamma_pl"):
            v = getattr(self, name)
            if v is not None:
                d[name] = v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GenerationConfig":
        return cls(**d)


# -- constructors ---------------------------------------------------------------


def symmetric_noise_matrix(k: int, gamma: float) -> np.ndarray:
    T = np.full((k, k), gamma / (k - 1))
    np.fill_diagonal(T, 1.0 - gamma)
    return T


def uniform_sampling(k: int) -> GenerationConfig:
    return GenerationConfig(Process.SAMPLING, k)


def uniform_flipping(k: int, eta: float) -> GenerationConfig:
    return GenerationConfig(Process.FLIPPING, k, uniform_eta=eta)


def uniform_arbitrary(k: int, gamma_pl: float) -> GenerationConfig:
    return GenerationConfig(Process.ARBITRARY_SAMPLING, k, gamma_pl=gamma_pl)


def sampling_noise(k: int, gamma: float) -> GenerationConfig:
    return GenerationConfig(Process.AMBIGUOUS_NOISE, k, base=Process.SAMPLING, uniform_gamma=gamma)


def flipping_noise(k: int, gamma: float, eta: float) -> GenerationConfig:
    return GenerationConfig(
        Process.AMBIGUOUS_NOISE, k, base=Process.FLIPPING, uniform_eta=eta, uniform_gamma=gamma
    )


def noisy_sampling(k: int, gamma_s: float) -> GenerationConfig:
    return GenerationConfig(Process.NOISY_AMBIGUITY, k, base=Process.SAMPLING, uniform_gamma=gamma_s)


def noisy_flipping(k: int, eta: float, gamma_s: float) -> GenerationConfig:
    return GenerationConfig(
        Process.NOISY_AMBIGUITY, k, base=Process.FLIPPING, uniform_eta=eta, uniform_gamma=gamma_s
    )


CASE_DESCRIPTIONS = {
    1: "uniform sampling",
    2: "uniform flipping, eta=0.1",
    3: "flipping noise, symmetric gamma=0.3, eta=0.1",
    4: "noisy flipping, eta=0.1, gamma_s=0.3",
}


def case_preset(case: int, k: int) -> GenerationConfig:
    if case == 1:
        return uniform_sampling(k)
    if case == 2:
        return uniform_flipping(k, 0.1)
    if case == 3:
        return flipping_noise(k, 0.3, 0.1)
    if case == 4:
        return noisy_flipping(k, 0.1, 0.3)
    raise ConfigError(f"unknown case {case}; expected 1-4")


# -- exact distributions -------------------------------------------------------------


def _check_y(config: GenerationConfig, y: int) -> None:
    if not 1 <= y <= config.k:
        raise DomainError(f"label {y} outside 1..{config.k}")


def _check_enum(config: GenerationConfig) -> None:
    if config.k > MAX_ENUM_K:
        raise DomainError(f"exact distributions need k <= {MAX_ENUM_K}, got {config.k}")


def flipping_normalizer(eta_row: np.ndarray, y: int) -> float:
    """M = 1 / (1 - prod_{i != y} eta_yi) for a 1-based label ``y``."""
    return 1.0 / (1.0 - float(np.prod(np.delete(eta_row, y - 1))))


def _flipping_row(config: GenerationConfig, y: int) -> np.ndarray:
    k = config.k
    eta = config.flip_matrix()[y - 1]
    member = membership_matrix(k)
    others = np.arange(k) != (y - 1)
    factors = np.where(member, eta[None, :], 1.0 - eta[None, :])[:, others]
    prob = np.prod(factors, axis=1) * flipping_normalizer(eta, y)
    return np.where(member[:, y - 1], prob, 0.0)


def _clean_row(config: GenerationConfig, y: int) -> np.ndarray:
    if config.clean_process is Process.FLIPPING:
        return _flipping_row(config, y)
    return np.array(config.sampling_table()[y - 1], dtype=float)


def set_distribution(config: GenerationConfig, y: int) -> np.ndarray:
    """p(s | y) over the PL space in canonical order (entry j-1 is the set with mask j)."""
    _check_enum(config)
    _check_y(config, y)
    p = config.process
    if p in (Process.SAMPLING, Process.FLIPPING, Process.ARBITRARY_SAMPLING):
        return _clean_row(config, y)
    if p is Process.AMBIGUOUS_NOISE:
        T = config.transition_matrix()
        out = np.zeros(config.n_sets)
        for yb in range(1, config.k + 1):
            if T[y - 1, yb - 1] > 0:
                out += T[y - 1, yb - 1] * _clean_row(config, yb)
        return out
    if p is Process.NOISY_AMBIGUITY:
        clean = _clean_row(config, y)
        gam = config.set_flip_rates()
        out = (1.0 - gam) * clean
        np.add.at(out, complement_index(config.k), gam * clean)
        return out
    raise ConfigError(f"unknown process {p}")


@dataclass(frozen=True, eq=False)
class PLTransitionMatrix:
    entries: np.ndarray
    form: str  # "set" (k x (2^k-2)) or "marginal" (k x k)


def pl_transition_matrix(config: GenerationConfig, form: str = "set") -> PLTransitionMatrix:
    if form == "marginal":
        if config.process is not Process.FLIPPING:
            raise DomainError("the marginal form is defined for the flipping process only")
        return PLTransitionMatrix(config.flip_matrix().copy(), "marginal")
    if form != "set":
        raise DomainError(f"unknown transition-matrix form {form!r}")
    _check_enum(config)
    Q = np.stack([set_distribution(config, y) for y in range(1, config.k + 1)])
    return PLTransitionMatrix(Q, "set")


def inclusion_marginals(config: GenerationConfig) -> np.ndarray:
    """``P[y-1, i-1] = p(i in s | y)`` computed from the exact set distributions."""
    Q = pl_transition_matrix(config).entries
    return Q @ membership_matrix(config.k).astype(float)


def pl_noise_rate(config: GenerationConfig, prior) -> float:
    prior = np.asarray(prior, dtype=float)
    if prior.shape != (config.k,) or prior.min() < -1e-12 or abs(prior.sum() - 1) > 1e-9:
        raise DomainError("prior must be a probability vector over the k labels")
    member = membership_matrix(config.k)
    rate = 0.0
    for y in range(1, config.k + 1):
        dist = set_distribution(config, y)
        rate += prior[y - 1] * dist[~member[:, y - 1]].sum()
    return float(rate)


def expected_set_size(config: GenerationConfig, prior) -> float:
    prior = np.asarray(prior, dtype=float)
    sizes = membership_matrix(config.k).sum(axis=1)
    return float(sum(prior[y - 1] * set_distribution(config, y) @ sizes for y in range(1, config.k + 1)))


# -- samplers --------------------------------------------------------------------------
#
# Masks are plain ints. Every sampler consumes its generator in a fixed order so
# a fixed seed gives a fixed sequence.


def _full(k: int) -> int:
    return (1 << k) - 1


def _bits_to_mask(bits: np.ndarray) -> int:
    return int(sum(1 << int(i) for i in np.flatnonzero(bits)))


def _draw_containing(k: int, y: int, p_include: np.ndarray, rng) -> int:
    # Bernoulli inclusion of every other label, re-drawn while the set is full
    full = _full(k)
    while True:
        bits = rng.random(k) < p_include
        bits[y - 1] = True
        mask = _bits_to_mask(bits)
        if mask != full:
            return mask


def _draw_uniform_excluding(k: int, y: int, rng) -> int:
    # uniform over nonempty subsets of [k] \ {y}
    while True:
        bits = rng.random(k) < 0.5
        bits[y - 1] = False
        if bits.any():
            return _bits_to_mask(bits)


def _draw_categorical(row: np.ndarray, rng) -> int:
    c = np.cumsum(row)
    j = int(np.searchsorted(c, rng.random() * c[-1], side="right"))
    return min(j, row.size - 1) + 1


def _draw_clean(config: GenerationConfig, y: int, rng) -> int:
    k = config.k
    if config.clean_process is Process.FLIPPING:
        return _draw_containing(k, y, config.flip_matrix()[y - 1], rng)
    if config.eta_sets is None:
        return _draw_containing(k, y, np.full(k, 0.5), rng)
    return _draw_categorical(config.eta_sets[y - 1], rng)


def corrupt_label(T, y: int, rng) -> int:
    row = np.asarray(T, dtype=float)[y - 1]
    if abs(row.sum() - 1.0) > ROW_TOL:
        raise ConfigError(f"noise_T row {y} does not sum to 1")
    return _draw_categorical(row, rng)


def draw_label_set(config: GenerationConfig, y: int, rng) -> LabelSet:
    _check_y(config, y)
    k = config.k
    p = config.process
    if p in CLEAN_PROCESSES:
        mask = _draw_clean(config, y, rng)
    elif p is Process.ARBITRARY_SAMPLING:
        if config.eta_sets is not None:
            mask = _draw_categorical(config.eta_sets[y - 1], rng)
        elif rng.random() < (config.gamma_pl or 0.0):
            mask = _draw_uniform_excluding(k, y, rng)
        else:
            mask = _draw_containing(k, y, np.full(k, 0.5), rng)
    elif p is Process.AMBIGUOUS_NOISE:
        yb = corrupt_label(config.transition_matrix(), y, rng)
        mask = _draw_clean(config, yb, rng)
    elif p is Process.NOISY_AMBIGUITY:
        mask = _draw_clean(config, y, rng)
        if rng.random() < config.set_flip_rate_of(mask):
            mask = _full(k) ^ mask
    else:  # pragma: no cover
        raise ConfigError(f"unknown process {p}")
    return LabelSet(mask, k)


def sample_label_sets(config: GenerationConfig, labels, rng) -> np.ndarray:
    """Vectorised generative sampler; returns an int64 array of masks.

    Follows the same generative recipe as :func:`draw_label_set` but draws
    whole batches at once, so the random stream differs from repeated scalar
    calls.
    """
    labels = np.asarray(labels, dtype=np.int64)
    k = config.k
    if k > 62:
        raise DomainError("vectorised sampling packs masks into int64; use draw_label_set")
    if labels.size and (labels.min() < 1 or labels.max() > k):
        raise DomainError("labels outside 1..k")
    p = config.process
    if p in CLEAN_PROCESSES:
        return _batch_clean(config, labels, rng)
    if p is Process.ARBITRARY_SAMPLING:
        if config.eta_sets is not None:
            return _batch_categorical(config.eta_sets, labels, rng)
        noisy = rng.random(labels.size) < (config.gamma_pl or 0.0)
        out = _batch_containing(k, labels, np.full((k, k), 0.5), rng)
        out[noisy] = _batch_uniform_excluding(k, labels[noisy], rng)
        return out
    if p is Process.AMBIGUOUS_NOISE:
        return _batch_clean(config, corrupt_labels(config.transition_matrix(), labels, rng), rng)
    if p is Process.NOISY_AMBIGUITY:
        masks = _batch_clean(config, labels, rng)
        if config.gamma_sets is not None:
            g = config.gamma_sets[masks - 1]
        else:
            g = np.full(masks.size, float(config.uniform_gamma or 0.0))
        flip = rng.random(masks.size) < g
        masks[flip] = _full(k) ^ masks[flip]
        return masks
    raise ConfigError(f"unknown process {p}")  # pragma: no cover


def corrupt_labels(T, labels, rng) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    c = np.cumsum(T, axis=1)[labels - 1]
    u = rng.random(labels.size) * c[:, -1]
    idx = (c <= u[:, None]).sum(axis=1)
    return np.minimum(idx, T.shape[1] - 1) + 1


def _batch_categorical(table: np.ndarray, labels, rng) -> np.ndarray:
    c = np.cumsum(table, axis=1)[labels - 1]
    u = rng.random(labels.size) * c[:, -1]
    idx = (c <= u[:, None]).sum(axis=1)
    return np.minimum(idx, table.shape[1] - 1).astype(np.int64) + 1


def _batch_clean(config: GenerationConfig, labels, rng) -> np.ndarray:
    k = config.k
    if config.clean_process is Process.FLIPPING:
        return _batch_containing(k, labels, config.flip_matrix(), rng)
    if config.eta_sets is None:
        return _batch_containing(k, labels, np.full((k, k), 0.5), rng)
    return _batch_categorical(config.eta_sets, labels, rng)


def _batch_containing(k, labels, P, rng) -> np.ndarray:
    weights = np.int64(1) << np.arange(k, dtype=np.int64)
    out = np.zeros(labels.size, dtype=np.int64)
    todo = np.arange(labels.size)
    full = _full(k)
    while todo.size:
        lab = labels[todo]
        bits = rng.random((todo.size, k)) < P[lab - 1]
        bits[np.arange(todo.size), lab - 1] = True
        masks = bits.astype(np.int64) @ weights
        ok = masks != full
        out[todo[ok]] = masks[ok]
        todo = todo[~ok]
    return out


def _batch_uniform_excluding(k, labels, rng) -> np.ndarray:
    weights = np.int64(1) << np.arange(k, dtype=np.int64)
    out = np.zeros(labels.size, dtype=np.int64)
    todo = np.arange(labels.size)
    while todo.size:
        lab = labels[todo]
        bits = rng.random((todo.size, k)) < 0.5
        bits[np.arange(todo.size), lab - 1] = False
        masks = bits.astype(np.int64) @ weights
        ok = masks != 0
        out[todo[ok]] = masks[ok]
        todo = todo[~ok]
    return out


# -- datasets -------------------------------------------------------------------------------


def example_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for example ``index`` under master ``seed``."""
    return np.random.default_rng([int(seed), int(index)])


def corrupt_dataset(
    config: GenerationConfig,
    features,
    labels: Sequence[int],
    seed: int,
) -> list[PLExample]:
    """Attach a generated candidate set to every labelled example.

    Each example uses its own stream derived from ``(seed, index)``, so the
    result does not depend on processing order.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 1 or labels.max() > config.k):
        raise DomainError(f"labels must lie in 1..{config.k}")
    out = []
    for i, (x, y) in enumerate(zip(features, labels)):
        s = draw_label_set(config, int(y), example_rng(seed, i))
        out.append(PLExample(x, s, int(y)))
    return out


def audit(config: GenerationConfig, examples: Sequence[PLExample], prior=None) -> dict:
    """Realised noise rate and set size versus their analytic values."""
    k = config.k
    labels = np.array([ex.true_label for ex in examples])
    masks = np.array([ex.candidates.mask for ex in examples], dtype=np.int64)
    n = labels.size
    contains = (masks >> (labels - 1)) & 1
    sizes = np.array([bin(int(m)).count("1") for m in masks])
    if prior is None:
        prior = np.bincount(labels, minlength=k + 1)[1:] / n
    out = {
        "n": int(n),
        "realized_gamma_pl": float(1.0 - contains.mean()),
        "mean_set_size": float(sizes.mean()),
    }
    if k <= 12:
        from scipy import stats

        rate = pl_noise_rate(config, prior)
        out["analytic_gamma_pl"] = rate
        out["gamma_pl_sigma"] = math.sqrt(max(rate * (1 - rate), 0.0) / n)
        out["analytic_mean_set_size"] = expected_set_size(config, prior)
        expected = np.zeros(config.n_sets)
        for y in range(1, k + 1):
            ny = int((labels == y).sum())
            if ny:
                expected += ny * set_distribution(config, y)
        observed = np.bincount(masks - 1, minlength=config.n_sets).astype(float)
        obs, exp = pooled_cells(observed, expected)
        if obs.size > 1:
            chi2, pval = stats.chisquare(obs, exp)
            out["chi2"] = float(chi2)
            out["chi2_pvalue"] = float(pval)
            out["chi2_cells"] = int(obs.size)
    return out


def pooled_cells(observed, expected, min_expected: float = 5.0):
    """Pool sparse cells (expected < ``min_expected``) into one cell for chi-square."""
    observed = np.asarray(observed, dtype=float)
    expected = np.asarray(expected, dtype=float)
    if np.any(observed[expected <= 0] > 0):
        raise DomainError("observed a set with zero analytic probability")
    big = expected >= min_expected
    obs = list(observed[big])
    exp = list(expected[big])
    rest_e = expected[~big].sum()
    if rest_e > 0:
        obs.append(observed[~big].sum())
        exp.append(rest_e)
    obs, exp = np.array(obs), np.array(exp)
    return obs, exp * obs.sum() / exp.sum()
