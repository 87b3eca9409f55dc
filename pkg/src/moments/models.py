from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from math import comb
from typing import Iterable, Iterator

import numpy as np

from src.exceptions import DegreeTooLowError, DimensionMismatchError


class MultiIndex(tuple):
    """
    Exponent vector alpha of a monomial x^alpha. Behaves like a plain tuple (hashable, comparable, usable as dict
    key next to ordinary tuples) and validates that all exponents are nonnegative integers.
    """

    def __new__(cls, exponents: Iterable[int]):
        values = tuple(int(e) for e in exponents)
        if not values:
            raise ValueError("multi-index must have at least one coordinate")
        if any(e < 0 for e in values):
            raise ValueError(f"negative exponent in multi-index {values}")
        return super().__new__(cls, values)

    @property
    def total_degree(self) -> int:
        return sum(self)

    def shift(self, other: Iterable[int]) -> MultiIndex:
        """
        Exponent of the product x^self * x^other.
        """
        other = tuple(other)
        if len(other) != len(self):
            raise DimensionMismatchError(f"cannot add multi-indices of length {len(self)} and {len(other)}")
        return MultiIndex(a + b for a, b in zip(self, other))

    def __repr__(self) -> str:
        return f"MultiIndex{tuple(self)}"


def basis_size(n: int, d: int) -> int:
    """
    Number s(d) of monomials of degree at most d in n variables.
    """
    return comb(n + d, n)


@lru_cache(maxsize=None)
def _graded_lex(n: int, d: int) -> tuple[MultiIndex, ...]:
    indices = []
    for degree in range(d + 1):
        layer = [alpha for alpha in itertools.product(range(degree + 1), repeat=n) if sum(alpha) == degree]
        # x1 before x2 before ... inside one degree
        layer.sort(reverse=True)
        indices.extend(MultiIndex(alpha) for alpha in layer)
    return tuple(indices)


@dataclass(frozen=True)
class BasisIndexer:
    """
    Bijection between the multi-indices of degree at most ``d`` in ``n`` variables and ``0..s(d)-1`` in graded
    lexicographic order. Prefixes are stable: the first s(k) entries of the order for degree d are the order for
    degree k, so a position is valid for every indexer of the same dimension and at least that degree.
    """

    n: int
    d: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be positive, got {self.n}")
        if self.d < 0:
            raise ValueError(f"degree must be nonnegative, got {self.d}")

    @cached_property
    def indices(self) -> tuple[MultiIndex, ...]:
        return _graded_lex(self.n, self.d)

    @cached_property
    def position(self) -> dict[tuple, int]:
        return {alpha: i for i, alpha in enumerate(self.indices)}

    @property
    def size(self) -> int:
        return basis_size(self.n, self.d)

    def index(self, alpha: Iterable[int]) -> int:
        key = tuple(alpha)
        try:
            return self.position[key]
        except KeyError:
            if len(key) != self.n:
                raise DimensionMismatchError(f"multi-index {key} does not have {self.n} coordinates")
            raise DegreeTooLowError(f"multi-index {key} exceeds degree {self.d}")

    def __len__(self) -> int:
        return self.size

    def __iter__(self) -> Iterator[MultiIndex]:
        return iter(self.indices)


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class MomentSequence:
    """
    Dense truncated moment sequence (z_alpha), |alpha| <= max_degree, stored as a vector in graded lexicographic
    order. Supports the linear operations needed to form y, v = mu - y and u = gamma*lambda - y.
    """

    n: int
    max_degree: int
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        values = _frozen(self.values).reshape(-1)
        expected = basis_size(self.n, self.max_degree)
        if values.shape[0] != expected:
            raise DimensionMismatchError(
                f"moment vector has {values.shape[0]} entries, expected s({self.max_degree}) = {expected}"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def from_mapping(cls, n: int, max_degree: int, mapping: dict, label: str = "") -> MomentSequence:
        indexer = BasisIndexer(n, max_degree)
        values = np.zeros(indexer.size)
        seen = set()
        for alpha, value in mapping.items():
            i = indexer.index(alpha)
            values[i] = value
            seen.add(i)
        if len(seen) != indexer.size:
            missing = [tuple(indexer.indices[i]) for i in range(indexer.size) if i not in seen]
            raise DegreeTooLowError(f"moment sequence is not dense, missing {missing[:5]}")
        return cls(n, max_degree, values, label)

    @classmethod
    def zeros(cls, n: int, max_degree: int, label: str = "") -> MomentSequence:
        return cls(n, max_degree, np.zeros(basis_size(n, max_degree)), label)

    @cached_property
    def indexer(self) -> BasisIndexer:
        return BasisIndexer(self.n, self.max_degree)

    @property
    def mass(self) -> float:
        return float(self.values[0])

    def __getitem__(self, alpha) -> float:
        return float(self.values[self.indexer.index(alpha)])

    def items(self) -> Iterator[tuple[MultiIndex, float]]:
        return zip(self.indexer.indices, (float(v) for v in self.values))

    def truncate(self, degree: int) -> MomentSequence:
        if degree > self.max_degree:
            raise DegreeTooLowError(f"cannot truncate degree {self.max_degree} sequence to degree {degree}")
        return MomentSequence(self.n, degree, self.values[: basis_size(self.n, degree)], self.label)

    def normalized(self) -> MomentSequence:
        """
        z / z_0, the convention of the tables (first entry 1).
        """
        return MomentSequence(self.n, self.max_degree, self.values / self.values[0], self.label)

    def relabel(self, label: str) -> MomentSequence:
        return MomentSequence(self.n, self.max_degree, self.values, label)

    def _check_compatible(self, other: MomentSequence) -> None:
        if other.n != self.n:
            raise DimensionMismatchError(f"dimension {self.n} vs {other.n}")
        if other.max_degree != self.max_degree:
            raise DegreeTooLowError(f"degree {self.max_degree} vs {other.max_degree}")

    def __add__(self, other: MomentSequence) -> MomentSequence:
        self._check_compatible(other)
        return MomentSequence(self.n, self.max_degree, self.values + other.values, self.label)

    def __sub__(self, other: MomentSequence) -> MomentSequence:
        self._check_compatible(other)
        return MomentSequence(self.n, self.max_degree, self.values - other.values, self.label)

    def __mul__(self, factor: float) -> MomentSequence:
        return MomentSequence(self.n, self.max_degree, self.values * float(factor), self.label)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class MomentMatrix:
    """
    M_d(z): symmetric matrix with entry (alpha, beta) = z_{alpha+beta}, rows and columns in graded lex order.
    """

    d: int
    indexer: BasisIndexer
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen(self.entries))

    @property
    def size(self) -> int:
        return self.indexer.size

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])
