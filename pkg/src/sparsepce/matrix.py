"""Measurement matrices and their cross-correlation metrics.

Terminology, for an ``M x K`` matrix with columns ``psi_1 .. psi_K``:

* normalized Gram entry ``g_pq = psi_p . psi_q / (|psi_p| |psi_q|)``
* mutual coherence ``mu = max_{p != q} |g_pq|``
* average cross-correlation ``gamma = sum_{p != q} g_pq^2 / (K (K - 1))``
  (a mean of squares, i.e. ``|I - G~|_F^2 / (K (K - 1))``)
* t-averaged coherence ``mu_t``: mean of ``|g_pq| >= t`` over ``p != q``

A pair involving a zero-norm column counts as fully correlated
(``|g_pq| = 1``); such a column can never be recovered.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .orthopoly import Basis
from .sampling import SampleEnsemble


@dataclass(frozen=True)
class CorrelationMetrics:
    mu: float
    gamma: float
    mu_t: Optional[float] = None
    t: Optional[float] = None
    spark_lb: float = float("inf")

    def as_dict(self) -> dict:
        return {"mu": self.mu, "gamma": self.gamma, "t": self.t, "mu_t": self.mu_t, "spark_lower_bound": self.spark_lb}


def _column_sq_norms(entries: np.ndarray) -> np.ndarray:
    # scaled two-pass sum of squares
    scale = np.abs(entries).max(axis=0) if entries.shape[0] else np.zeros(entries.shape[1])
    safe = np.where(scale > 0, scale, 1.0)
    return np.where(scale > 0, ((entries / safe) ** 2).sum(axis=0) * scale**2, 0.0)


def normalized_gram(gram: np.ndarray, sq_norms: np.ndarray) -> np.ndarray:
    """Normalized Gram matrix; entries touching a zero column are set to 1."""
    nz = sq_norms > 0
    inv = np.where(nz, 1.0 / np.sqrt(np.where(nz, sq_norms, 1.0)), 0.0)
    out = gram * inv[:, None] * inv[None, :]
    dead = ~nz
    if dead.any():
        out[dead, :] = 1.0
        out[:, dead] = 1.0
    np.fill_diagonal(out, 1.0)
    return out


def _offdiag_abs(gram, sq_norms) -> np.ndarray:
    K = gram.shape[0]
    if K < 2:
        raise ValueError("correlation metrics need at least two columns")
    g = np.abs(normalized_gram(gram, sq_norms))
    return g[~np.eye(K, dtype=bool)]


def _mu_gamma(gram, sq_norms) -> tuple[float, float]:
    off = _offdiag_abs(gram, sq_norms)
    return float(off.max()), float(np.mean(off**2))


@dataclass(frozen=True)
class GramState:
    """Unnormalized Gram matrix and column squared norms of a row stack."""

    gram: np.ndarray
    sq_norms: np.ndarray
    n_rows: int = 0

    @classmethod
    def empty(cls, K: int) -> "GramState":
        return cls(np.zeros((K, K)), np.zeros(K), 0)

    @classmethod
    def from_entries(cls, entries) -> "GramState":
        entries = np.atleast_2d(np.asarray(entries, dtype=float))
        return cls(entries.T @ entries, _column_sq_norms(entries), entries.shape[0])

    @property
    def K(self) -> int:
        return self.sq_norms.shape[0]

    def append(self, row) -> "GramState":
        row = self._check(row)
        return GramState(self.gram + np.outer(row, row), self.sq_norms + row**2, self.n_rows + 1)

    def metrics(self) -> tuple[float, float]:
        return _mu_gamma(self.gram, self.sq_norms)

    def _check(self, row) -> np.ndarray:
        row = np.asarray(row, dtype=float).reshape(-1)
        if row.shape[0] != self.K:
            raise ValueError(f"row has length {row.shape[0]}, state has {self.K} columns")
        return row


def append_row_metrics(state: GramState, row) -> tuple[float, float]:
    """(mu, gamma) of the state's rows plus ``row``; ``state`` is untouched."""
    row = state._check(row)
    return _mu_gamma(state.gram + np.outer(row, row), state.sq_norms + row**2)


@dataclass(frozen=True)
class MeasurementMatrix:
    entries: np.ndarray
    weighted: bool
    sq_norms: np.ndarray
    gram: np.ndarray

    @classmethod
    def from_array(cls, entries, weighted: bool = False) -> "MeasurementMatrix":
        entries = np.array(np.atleast_2d(entries), dtype=float)
        if not np.all(np.isfinite(entries)):
            raise ValueError("matrix entries must be finite")
        entries.setflags(write=False)
        gram = entries.T @ entries
        gram.setflags(write=False)
        sq = _column_sq_norms(entries)
        sq.setflags(write=False)
        return cls(entries, bool(weighted), sq, gram)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def state(self) -> GramState:
        return GramState(self.gram.copy(), self.sq_norms.copy(), self.entries.shape[0])

    def rows(self, indices) -> "MeasurementMatrix":
        return MeasurementMatrix.from_array(self.entries[np.asarray(indices, dtype=np.int64)], self.weighted)


def assemble(ensemble: SampleEnsemble, basis: Basis, apply_weights: bool = True) -> MeasurementMatrix:
    """Evaluate the basis at the ensemble points, optionally scaling row i by w_i."""
    if ensemble.family is not basis.family:
        raise ValueError(f"ensemble family {ensemble.family.value} does not match basis {basis.family.value}")
    if ensemble.dim != basis.dim:
        raise ValueError(f"ensemble has dimension {ensemble.dim}, basis has {basis.dim}")
    entries = basis.evaluate(ensemble.points)
    if apply_weights:
        entries = entries * ensemble.weights[:, None]
    return MeasurementMatrix.from_array(entries, weighted=apply_weights)


def _as_state(m) -> GramState:
    if isinstance(m, GramState):
        return m
    if isinstance(m, MeasurementMatrix):
        return GramState(m.gram, m.sq_norms, m.shape[0])
    return GramState.from_entries(m)


def mutual_coherence(m) -> float:
    return _mu_gamma(*_gs(m))[0]


def avg_cross_correlation(m) -> float:
    return _mu_gamma(*_gs(m))[1]


def _gs(m):
    s = _as_state(m)
    return s.gram, s.sq_norms


def t_averaged_coherence(m, t: float) -> Optional[float]:
    """Mean of the off-diagonal ``|g_pq| >= t``; ``None`` when none qualify."""
    if not 0.0 < t < 1.0:
        raise ValueError("threshold t must lie in (0, 1)")
    off = _offdiag_abs(*_gs(m))
    hits = off[off >= t]
    return float(hits.mean()) if hits.size else None


def spark_lower_bound(mu: float) -> float:
    """``1 + 1/mu``; infinite for mutually orthogonal columns (``mu == 0``)."""
    if mu < 0 or mu > 1.0 + 1e-12:
        raise ValueError("mutual coherence must lie in [0, 1]")
    return float("inf") if mu == 0 else 1.0 + 1.0 / mu


def correlation_metrics(m, t: Optional[float] = None) -> CorrelationMetrics:
    mu, gamma = _mu_gamma(*_gs(m))
    mu = 0.0 if mu < 1e-15 else mu
    mu_t = t_averaged_coherence(m, t) if t is not None else None
    return CorrelationMetrics(mu, gamma, mu_t, t, spark_lower_bound(min(mu, 1.0)))


# -- batched candidate scoring ---------------------------------------------


@numba.njit(cache=True, fastmath=False)
def _scan_mu(g_sorted, P, Q, sq_norms, R, rows, out):  # pragma: no cover - compiled
    K = sq_norms.shape[0]
    npairs = g_sorted.shape[0]
    c = np.empty(K)
    t = np.empty(K)
    for idx in range(rows.shape[0]):
        j = rows[idx]
        dead = False
        top1 = 0.0
        top2 = 0.0
        for p in range(K):
            rp = R[j, p]
            tot = sq_norms[p] + rp * rp
            if tot <= 0.0:
                dead = True
                break
            inv = 1.0 / np.sqrt(tot)
            c[p] = np.sqrt(sq_norms[p]) * inv
            t[p] = rp * inv
            t2 = t[p] * t[p]
            if t2 > top1:
                top2 = top1
                top1 = t2
            elif t2 > top2:
                top2 = t2
        if dead:
            out[idx] = 1.0
            continue
        half = 0.5 * (top1 + top2)
        m = 0.0
        for k in range(npairs):
            gk = abs(g_sorted[k])
            # |v| <= gk c_p c_q + |t_p t_q| <= gk + (1 - gk) (t_p^2 + t_q^2) / 2
            if m >= gk + (1.0 - gk) * half:
                break
            p = P[k]
            q = Q[k]
            v = abs(g_sorted[k] * c[p] * c[q] + t[p] * t[q])
            if v > m:
                m = v
        out[idx] = m


def score_candidates(state: GramState, candidates: np.ndarray, rows: Optional[np.ndarray] = None):
    """(mu', gamma') for appending each candidate row to ``state``.

    ``candidates`` is ``(M_p, K)``; only ``rows`` (default: all) are scored
    and the returned arrays align with ``rows``. Exact: gamma' comes from an
    expansion of the rank-one update into two matrix products, mu' from a
    pair scan in decreasing order of current correlation that stops once no
    remaining pair can exceed the running maximum.
    """
    R = np.ascontiguousarray(candidates, dtype=float)
    K = state.K
    if R.ndim != 2 or R.shape[1] != K:
        raise ValueError(f"candidate rows must have {K} columns")
    if K < 2:
        raise ValueError("correlation metrics need at least two columns")
    rows = np.arange(R.shape[0]) if rows is None else np.asarray(rows, dtype=np.int64)
    Rs = R[rows]
    G, n = state.gram, state.sq_norms

    # gamma': sum_{pq} (G + r r^T)_pq^2 a_p a_q with a = 1 / (n + r^2)
    tot = n[None, :] + Rs**2
    live = tot > 0
    a = np.where(live, 1.0 / np.where(live, tot, 1.0), 0.0)
    ra = Rs * a
    full = (
        ((a @ (G * G)) * a).sum(axis=1)
        + 2.0 * ((ra @ G) * ra).sum(axis=1)
        + ((Rs**2) * a).sum(axis=1) ** 2
    )
    nlive = live.sum(axis=1)
    pairs = K * (K - 1)
    gamma = (full - nlive + (pairs - nlive * (nlive - 1))) / pairs
    gamma = np.maximum(gamma, 0.0)

    nz = n > 0
    inv = np.where(nz, 1.0 / np.sqrt(np.where(nz, n, 1.0)), 0.0)
    iu, ju = np.triu_indices(K, 1)
    g = G[iu, ju] * inv[iu] * inv[ju]
    order = np.argsort(-np.abs(g), kind="stable")
    mu = np.empty(rows.shape[0])
    _scan_mu(g[order], iu[order].astype(np.int64), ju[order].astype(np.int64), n, R, rows, mu)
    return mu, gamma


# -- binary dump -----------------------------------------------------------

_HEADER = struct.Struct("<qq")


def dump_matrix(path, m) -> None:
    """Row-major float64 little-endian body after an ``(M, K)`` int64 header."""
    entries = m.entries if isinstance(m, MeasurementMatrix) else np.atleast_2d(np.asarray(m, dtype=float))
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(*entries.shape))
        fh.write(np.ascontiguousarray(entries, dtype="<f8").tobytes())


def load_matrix(path, weighted: bool = False) -> MeasurementMatrix:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        M, K = _HEADER.unpack(head)
        body = fh.read()
    if M < 0 or K < 0 or len(body) != 8 * M * K:
        raise ValueError(f"{path}: body size does not match header ({M} x {K})")
    return MeasurementMatrix.from_array(np.frombuffer(body, dtype="<f8").reshape(M, K), weighted)
