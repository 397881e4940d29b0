"""Greedy near-optimal row selection from a candidate pool.

Start from one random pool row. At every later step, score each unused
candidate by the (mu', gamma') of the matrix it would produce, rescale both
objectives to [0, 1] over the sweep and take the candidate closest to the
utopia point (min mu', min gamma'). Ties go to the lowest pool index.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .matrix import GramState, MeasurementMatrix, score_candidates

# objective ranges below this (relative to the objective's scale) carry no
# information beyond floating-point noise
DEGENERATE_RTOL = 1e-12


@dataclass(frozen=True)
class SelectionResult:
    indices: np.ndarray
    mu: np.ndarray
    gamma: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        for name in ("indices", "mu", "gamma"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def M(self) -> int:
        return int(self.indices.shape[0])

    def prefix(self, m: int) -> "SelectionResult":
        """Selection of the first ``m`` rows; identical to running with ``M = m``."""
        if not 1 <= m <= self.M:
            raise ValueError(f"prefix length must be in [1, {self.M}]")
        return SelectionResult(self.indices[:m], self.mu[:m], self.gamma[:m], self.seed)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "pool_index", "mu", "gamma"])
            for step, (j, mu, gamma) in enumerate(zip(self.indices, self.mu, self.gamma), start=1):
                writer.writerow([step, int(j), repr(float(mu)), repr(float(gamma))])


def _rescaled(values: np.ndarray) -> np.ndarray:
    lo, hi = values.min(), values.max()
    span = hi - lo
    if not span > DEGENERATE_RTOL * max(abs(hi), abs(lo), np.finfo(float).tiny):
        return np.zeros_like(values)
    return (values - lo) / span


def utopia_distance(mu: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Squared normalized distance of each (mu, gamma) pair to the utopia point."""
    return _rescaled(np.asarray(mu, dtype=float)) ** 2 + _rescaled(np.asarray(gamma, dtype=float)) ** 2


def _duplicate_groups(rows: np.ndarray) -> np.ndarray:
    # group id per row; bitwise-identical rows share an id
    _, inverse = np.unique(np.ascontiguousarray(rows).view(np.dtype((np.void, rows.dtype.itemsize * rows.shape[1]))), return_inverse=True)
    return inverse.reshape(-1)


def near_optimal_select(pool, M: int, seed=0, *, callback=None) -> SelectionResult:
    """Greedily pick ``M`` rows of ``pool`` (already weight-premultiplied).

    ``pool`` is a :class:`MeasurementMatrix` or an ``(M_p, K)`` array;
    ``seed`` (int or ``numpy.random.Generator``) draws the first row. Chosen
    rows, and any bitwise-identical copies of them, leave the candidate set.
    ``callback(step, index, mu, gamma)`` is called after every step.
    """
    rows = pool.entries if isinstance(pool, MeasurementMatrix) else np.atleast_2d(np.asarray(pool, dtype=float))
    rows = np.ascontiguousarray(rows, dtype=float)
    M_p, K = rows.shape
    if M_p == 0:
        raise ValueError("candidate pool is empty")
    if M < 1:
        raise ValueError("M must be >= 1")
    groups = _duplicate_groups(rows)
    n_distinct = int(groups.max()) + 1
    if M > n_distinct:
        raise ValueError(f"cannot select {M} rows from a pool of {n_distinct} distinct candidates")

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(int(seed))
    available = np.ones(M_p, dtype=bool)
    chosen = np.empty(M, dtype=np.int64)
    mus = np.empty(M)
    gammas = np.empty(M)

    state = GramState.empty(K)
    first = int(rng.integers(M_p))
    for step in range(M):
        if step == 0:
            j = first
            mu_j, gamma_j = score_candidates(state, rows, np.array([j]))
            mu_j, gamma_j = float(mu_j[0]), float(gamma_j[0])
        else:
            cand = np.flatnonzero(available)
            mu_c, gamma_c = score_candidates(state, rows, cand)
            best = int(np.argmin(utopia_distance(mu_c, gamma_c)))
            j = int(cand[best])
            mu_j, gamma_j = float(mu_c[best]), float(gamma_c[best])
        r = rows[j]
        state = GramState(state.gram + np.outer(r, r), state.sq_norms + r * r, state.n_rows + 1)
        available &= groups != groups[j]
        chosen[step] = j
        mus[step] = mu_j
        gammas[step] = gamma_j
        if callback is not None:
            callback(step + 1, j, mu_j, gamma_j)
    return SelectionResult(chosen, mus, gammas, None if isinstance(seed, np.random.Generator) else int(seed))
