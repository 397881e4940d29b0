"""Orthonormal Legendre/Hermite polynomials and their tensor-product bases.

Univariate members are orthonormal under the family's probability measure:
uniform on ``[-1, 1]`` for Legendre, standard normal for (probabilists')
Hermite. All evaluations use the three-term recurrence of the orthonormal
polynomials directly, which stays well scaled up to high degree.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np
from numpy.polynomial import hermite_e, legendre

from .multiindex import MultiIndexSet, total_degree_set

# Projection normalisation constant; identically one for orthonormal bases.
NORMALIZATION = 1.0

# full tensor Gauss rules are only used up to this dimension
MAX_TENSOR_DIM = 6


class Family(str, Enum):
    LEGENDRE = "legendre"
    HERMITE = "hermite"

    @classmethod
    def parse(cls, value) -> "Family":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {
            "legendre": cls.LEGENDRE,
            "legendre-uniform": cls.LEGENDRE,
            "uniform": cls.LEGENDRE,
            "hermite": cls.HERMITE,
            "hermite-gaussian": cls.HERMITE,
            "gaussian": cls.HERMITE,
            "normal": cls.HERMITE,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown polynomial family {value!r}") from None


def check_support(family, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("evaluation points must be finite")
    if Family.parse(family) is Family.LEGENDRE and np.any(np.abs(x) > 1.0):
        raise ValueError("Legendre polynomials are only defined on [-1, 1]")
    return x


def univariate_table(family, n_max: int, x) -> np.ndarray:
    """Values of all orthonormal members of degree ``0..n_max``.

    Returns an array of shape ``x.shape + (n_max + 1,)``.
    """
    family = Family.parse(family)
    if n_max < 0:
        raise ValueError("degree must be non-negative")
    x = check_support(family, x)
    out = np.empty(x.shape + (n_max + 1,))
    out[..., 0] = 1.0
    if n_max == 0:
        return out
    if family is Family.LEGENDRE:
        # x psi_n = b_{n+1} psi_{n+1} + b_n psi_{n-1},  b_n = n / sqrt(4n^2 - 1)
        b = np.array([n / math.sqrt(4.0 * n * n - 1.0) if n else 0.0 for n in range(n_max + 1)])
    else:
        # x psi_n = sqrt(n+1) psi_{n+1} + sqrt(n) psi_{n-1}
        b = np.sqrt(np.arange(n_max + 1, dtype=float))
    out[..., 1] = x / b[1]
    for n in range(1, n_max):
        out[..., n + 1] = (x * out[..., n] - b[n] * out[..., n - 1]) / b[n + 1]
    return out


def eval_univariate(family, n: int, x):
    """Orthonormal polynomial of degree ``n`` at ``x`` (scalar or array)."""
    values = univariate_table(family, int(n), x)[..., int(n)]
    return float(values) if np.ndim(values) == 0 else values


def gauss_rule(family, n_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss nodes and probability weights (summing to one) for the family."""
    family = Family.parse(family)
    if n_points < 1:
        raise ValueError("need at least one quadrature point")
    if family is Family.LEGENDRE:
        x, w = legendre.leggauss(n_points)
        return x, w / 2.0
    x, w = hermite_e.hermegauss(n_points)
    return x, w / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Basis:
    """Tensor-product orthonormal basis over a total-degree index set."""

    family: Family
    index_set: MultiIndexSet

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        alpha = self.index_set.array
        # psi_alpha = psi_parent * psi_{alpha_j}(x_j), j = last nonzero component
        K, d = alpha.shape
        parent = np.zeros(K, dtype=np.int64)
        axis = np.zeros(K, dtype=np.int64)
        degree = np.zeros(K, dtype=np.int64)
        lookup = {tuple(row): i for i, row in enumerate(alpha.tolist())}
        for i in range(1, K):
            row = alpha[i].copy()
            j = int(np.flatnonzero(row)[-1])
            degree[i] = row[j]
            axis[i] = j
            row[j] = 0
            parent[i] = lookup[tuple(row.tolist())]
        object.__setattr__(self, "_plan", (parent, axis, degree))

    @classmethod
    def total_degree(cls, family, d: int, k: int) -> "Basis":
        return cls(Family.parse(family), total_degree_set(d, k))

    @property
    def dim(self) -> int:
        return self.index_set.dim

    @property
    def order(self) -> int:
        return self.index_set.order

    @property
    def K(self) -> int:
        return self.index_set.K

    def _points(self, points):
        # 0-d or 1-d input is a single point, except that a 1-d input for a
        # one-dimensional basis is read as a list of points
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 0 or (pts.ndim == 1 and self.dim > 1)
        if pts.ndim == 0:
            pts = pts.reshape(1, 1)
        elif pts.ndim == 1:
            pts = pts[None, :] if self.dim > 1 else pts[:, None]
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise ValueError(f"points must have {self.dim} coordinates, got shape {np.shape(points)}")
        check_support(self.family, pts)
        return pts, single

    def evaluate(self, points) -> np.ndarray:
        """Basis values at ``points``; shape ``(N, K)`` (or ``(K,)`` for one point)."""
        pts, single = self._points(points)
        table = univariate_table(self.family, self.order, pts)  # (N, d, k+1)
        parent, axis, degree = self._plan
        out = np.empty((pts.shape[0], self.K))
        out[:, 0] = 1.0
        for i in range(1, self.K):
            out[:, i] = out[:, parent[i]] * table[:, axis[i], degree[i]]
        return out[0] if single else out

    def envelope(self, points):
        """Pointwise maximum of ``|psi_alpha|`` over the index set (always >= 1)."""
        values = np.abs(self.evaluate(points))
        return values.max(axis=-1)

    def weight(self, points):
        """Sampling weight ``1 / envelope``."""
        return 1.0 / self.envelope(points)

    def expand(self, coefficients, points) -> np.ndarray:
        """Evaluate the expansion ``sum_j c_j psi_j`` at ``points``."""
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != (self.K,):
            raise ValueError(f"expected {self.K} coefficients, got shape {coefficients.shape}")
        return self.evaluate(points) @ coefficients


def _one_point(basis: Basis, point) -> np.ndarray:
    point = np.asarray(point, dtype=float).reshape(-1)
    if point.size != basis.dim:
        raise ValueError(f"point has {point.size} coordinates, basis has dimension {basis.dim}")
    return point[None, :]


def eval_row(basis: Basis, point) -> np.ndarray:
    """Row of the measurement matrix for a single point."""
    return basis.evaluate(_one_point(basis, point))[0]


def envelope_B(basis: Basis, point) -> float:
    return float(basis.envelope(_one_point(basis, point))[0])


def weight_w(basis: Basis, point) -> float:
    return 1.0 / envelope_B(basis, point)


def quadrature_project(basis: Basis, f: Callable[[np.ndarray], np.ndarray], level: int) -> np.ndarray:
    """Project ``f`` onto every basis member with a tensor Gauss rule.

    ``f`` receives an ``(N, d)`` array and returns ``N`` values. ``level`` is
    the number of Gauss points per dimension; the result is exact to
    round-off when ``f`` is a polynomial of degree ``deg_f`` and
    ``level >= (order + deg_f) / 2 + 1``. Choosing ``level`` is the caller's
    job. Tensor rules are limited to ``dim <= 6``; beyond that use
    :func:`quadrature_project_separable`.
    """
    if basis.dim > MAX_TENSOR_DIM:
        raise ValueError(
            f"tensor quadrature limited to dim <= {MAX_TENSOR_DIM}; "
            "use quadrature_project_separable for product-structured integrands"
        )
    x, w = gauss_rule(basis.family, level)
    nodes = np.array(list(itertools.product(x, repeat=basis.dim)))
    weights = np.prod(np.array(list(itertools.product(w, repeat=basis.dim))), axis=1)
    values = np.asarray(f(nodes), dtype=float).reshape(-1)
    return (basis.evaluate(nodes) * (weights * values)[:, None]).sum(axis=0) / NORMALIZATION


def quadrature_project_separable(
    basis: Basis,
    terms: Sequence[tuple[float, Mapping[int, Callable[[np.ndarray], np.ndarray]]]],
    level: int,
) -> np.ndarray:
    """Project a sum of separable terms, one 1-D Gauss rule per factor.

    Each term is ``(coefficient, {axis: g})`` and represents
    ``coefficient * prod_axis g(xi_axis)``; axes not listed carry the factor
    one. Cost is linear in the dimension, so it works at ``d = 20``.
    """
    x, w = gauss_rule(basis.family, level)
    table = univariate_table(basis.family, basis.order, x)  # (level, k+1)
    alpha = basis.index_set.array
    out = np.zeros(basis.K)
    for coef, factors in terms:
        prod = np.full(basis.K, float(coef))
        listed = set()
        for axis, g in factors.items():
            gx = np.asarray(g(x), dtype=float) * np.ones_like(x)
            moments = (w * gx) @ table  # int g psi_n rho, n = 0..k
            prod *= moments[alpha[:, axis]]
            listed.add(axis)
        others = [a for a in range(basis.dim) if a not in listed]
        if others:
            # int psi_n rho = delta_{n0}
            prod *= (alpha[:, others] == 0).all(axis=1)
        out += prod
    return out / NORMALIZATION
