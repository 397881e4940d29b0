"""Total-degree multi-index sets."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

_COUNT_MAX = np.iinfo(np.int64).max


def cardinality(d: int, k: int) -> int:
    """Number of multi-indices in ``d`` dimensions with total degree <= ``k``.

    Evaluates ``binom(k + d, d)`` with a running product so no factorial is
    ever formed. Raises ``OverflowError`` if the count does not fit in a
    signed 64-bit integer.
    """
    d, k = _check_dk(d, k)
    small, large = (d, k) if d <= k else (k, d)
    count = 1
    for i in range(1, small + 1):
        # exact at every step: count * (large + i) / i == binom(large + i, i)
        count = count * (large + i) // i
        if count > _COUNT_MAX:
            raise OverflowError(f"cardinality of total-degree set (d={d}, k={k}) exceeds int64")
    return count


def _check_dk(d, k):
    if isinstance(d, bool) or int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    if isinstance(k, bool) or int(k) != k or k < 0:
        raise ValueError(f"order must be a non-negative integer, got {k!r}")
    return int(d), int(k)


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    # descending in the first component, recursively
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class MultiIndexSet:
    """Ordered set ``{alpha in N^d : |alpha|_1 <= k}``.

    Indices are graded: ascending total degree, and within one degree in
    descending lexicographic order, e.g. ``(0,0), (1,0), (0,1), (2,0),
    (1,1), (0,2)`` for ``d = 2, k = 2``. Position 0 is always the zero index.
    """

    dim: int
    order: int
    array: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self):
        self.array.setflags(write=False)

    @property
    def K(self) -> int:
        return self.array.shape[0]

    def __len__(self) -> int:
        return self.K

    @property
    def indices(self) -> list[tuple[int, ...]]:
        return [tuple(int(a) for a in row) for row in self.array]

    def position(self, alpha) -> int:
        """Column position of multi-index ``alpha``."""
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.dim:
            raise ValueError(f"multi-index has {len(alpha)} components, expected {self.dim}")
        hits = np.flatnonzero((self.array == np.asarray(alpha)).all(axis=1))
        if hits.size == 0:
            raise KeyError(alpha)
        return int(hits[0])

    def total_degrees(self) -> np.ndarray:
        return self.array.sum(axis=1)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"alpha_{i + 1}" for i in range(self.dim)])
            writer.writerows(self.array.tolist())


def total_degree_set(d: int, k: int) -> MultiIndexSet:
    """Build the graded total-degree index set for dimension ``d``, order ``k``."""
    d, k = _check_dk(d, k)
    K = cardinality(d, k)
    out = np.empty((K, d), dtype=np.int64)
    row = 0
    for degree in range(k + 1):
        for alpha in _compositions(degree, d):
            out[row] = alpha
            row += 1
    assert row == K
    return MultiIndexSet(d, k, out)
