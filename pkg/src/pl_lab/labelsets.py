"""Candidate label sets and the PL space S = 2^[k] minus {empty, [k]}.

Labels are 1-based. A set is stored as an integer bitmask where bit ``i - 1``
is set iff label ``i`` is a candidate. The canonical order of the PL space is
ascending mask value, so the 1-based index of a set equals its mask.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

from .errors import DomainError

MAX_ENUM_K = 20


@dataclass(frozen=True, order=True)
class LabelSet:
    mask: int
    k: int

    def __post_init__(self):
        if self.k < 2:
            raise DomainError(f"k must be >= 2, got {self.k}")
        full = (1 << self.k) - 1
        if self.mask <= 0 or self.mask >= full:
            raise DomainError(
                f"mask {self.mask} is not a proper nonempty subset of [{self.k}]"
            )

    @classmethod
    def from_labels(cls, labels: Iterable[int], k: int) -> "LabelSet":
        mask = 0
        for y in labels:
            _check_label(y, k)
            mask |= 1 << (y - 1)
        return cls(mask, k)

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(i + 1 for i in range(self.k) if self.mask >> i & 1)

    def __contains__(self, y: int) -> bool:
        return contains(self, y)

    def __len__(self) -> int:
        return cardinality(self)

    def __iter__(self):
        return iter(self.labels)

    def complement(self) -> "LabelSet":
        return complement(self)

    def indicator(self) -> np.ndarray:
        return np.array([self.mask >> i & 1 for i in range(self.k)], dtype=bool)

    def __repr__(self):
        return "{" + ",".join(map(str, self.labels)) + "}"


def _check_label(y: int, k: int) -> None:
    if not 1 <= y <= k:
        raise DomainError(f"label {y} outside 1..{k}")


def _check_enum_k(k: int) -> None:
    if k < 2 or k > MAX_ENUM_K:
        raise DomainError(f"PL-space enumeration needs 2 <= k <= {MAX_ENUM_K}, got {k}")


def contains(s: LabelSet, y: int) -> bool:
    _check_label(y, s.k)
    return bool(s.mask >> (y - 1) & 1)


def cardinality(s: LabelSet) -> int:
    return bin(s.mask).count("1")


def complement(s: LabelSet) -> LabelSet:
    return LabelSet(((1 << s.k) - 1) ^ s.mask, s.k)


def pl_space_size(k: int) -> int:
    return 2**k - 2


def enumerate_pl_space(k: int) -> list[LabelSet]:
    _check_enum_k(k)
    return [LabelSet(m, k) for m in range(1, 2**k - 1)]


def index_of(s: LabelSet) -> int:
    """1-based position of ``s`` in the canonical order."""
    return s.mask


def set_of(j: int, k: int) -> LabelSet:
    _check_enum_k(k)
    if not 1 <= j <= 2**k - 2:
        raise DomainError(f"index {j} outside 1..{2**k - 2}")
    return LabelSet(j, k)


@lru_cache(maxsize=None)
def _membership(k: int) -> np.ndarray:
    masks = np.arange(1, 2**k - 1, dtype=np.int64)
    member = (masks[:, None] >> np.arange(k)) & 1
    member = member.astype(bool)
    member.setflags(write=False)
    return member


def membership_matrix(k: int) -> np.ndarray:
    """Boolean ``(2^k - 2, k)`` matrix; row j-1 is the indicator of set j."""
    _check_enum_k(k)
    return _membership(k)


def set_sizes(k: int) -> np.ndarray:
    return membership_matrix(k).sum(axis=1)


def complement_index(k: int) -> np.ndarray:
    """0-based row index of the complement for every row of the PL space."""
    _check_enum_k(k)
    masks = np.arange(1, 2**k - 1, dtype=np.int64)
    return ((2**k - 1) ^ masks) - 1


def masks_to_indicator(masks, k: int) -> np.ndarray:
    """Decode an array of bitmasks into an ``(n, k)`` boolean matrix."""
    masks = np.asarray(masks, dtype=np.int64)
    return ((masks[:, None] >> np.arange(k)) & 1).astype(bool)


def indicator_to_masks(ind) -> np.ndarray:
    ind = np.asarray(ind, dtype=np.int64)
    return (ind << np.arange(ind.shape[1])).sum(axis=1)
