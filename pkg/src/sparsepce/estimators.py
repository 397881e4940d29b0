"""scikit-learn style wrappers around the basis, solver and greedy design."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .greedy import near_optimal_select
from .matrix import assemble
from .orthopoly import Basis, Family
from .sampling import McmcConfig, build_pool, substream
from .solver import RecoverySpec, SolverTolerances, recover


def _basis(family, order, n_features) -> Basis:
    if int(order) < 0:
        raise ValueError("order must be non-negative")
    return Basis.total_degree(Family.parse(family), int(n_features), int(order))


class PolynomialChaosFeatures(TransformerMixin, BaseEstimator):
    """Map inputs to orthonormal polynomial features of total degree <= ``order``.

    With ``weighted=True`` each row is scaled by ``1 / B(x)``, the
    coherence-optimal sampling weight.
    """

    def __init__(self, family="legendre", order=2, weighted=False):
        self.family = family
        self.order = order
        self.weighted = weighted

    def fit(self, X, y=None):
        X = check_array(X)
        self.basis_ = _basis(self.family, self.order, X.shape[1])
        self.n_features_in_ = X.shape[1]
        self.n_output_features_ = self.basis_.K
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        psi = self.basis_.evaluate(X)
        if self.weighted:
            psi = psi / np.abs(psi).max(axis=1, keepdims=True)
        return psi

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "basis_")
        names = input_features if input_features is not None else [f"x{i}" for i in range(self.n_features_in_)]
        out = []
        for alpha in self.basis_.index_set.indices:
            parts = [f"{n}^{a}" if a > 1 else n for n, a in zip(names, alpha) if a]
            out.append(" ".join(parts) if parts else "1")
        return np.array(out, dtype=object)


class SparsePCERegressor(RegressorMixin, BaseEstimator):
    """Sparse expansion coefficients by l1 minimization.

    ``epsilon = 0`` interpolates the data (basis pursuit); ``epsilon > 0``
    bounds the weighted residual norm instead. ``sample_weight`` in ``fit``
    premultiplies rows and data; pass ``1 / B`` for coherence-optimal or
    near-optimal designs.
    """

    def __init__(self, family="legendre", order=2, epsilon=0.0, feasibility=1e-9, optimality=1e-9, max_iter=10_000):
        self.family = family
        self.order = order
        self.epsilon = epsilon
        self.feasibility = feasibility
        self.optimality = optimality
        self.max_iter = max_iter

    def fit(self, X, y, sample_weight=None):
        X, y = check_X_y(X, y, y_numeric=True)
        self.basis_ = _basis(self.family, self.order, X.shape[1])
        self.n_features_in_ = X.shape[1]
        A = self.basis_.evaluate(X)
        if sample_weight is not None:
            w = np.asarray(sample_weight, dtype=float).reshape(-1)
            if w.shape[0] != X.shape[0] or np.any(~np.isfinite(w)) or np.any(w <= 0):
                raise ValueError("sample_weight must be strictly positive with one entry per sample")
            A, y = A * w[:, None], y * w
        tol = SolverTolerances(self.feasibility, self.optimality, int(self.max_iter))
        self.result_ = recover(RecoverySpec(A, y, float(self.epsilon), tol))
        self.coef_ = self.result_.coefficients
        self.converged_ = self.result_.converged
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return self.basis_.expand(self.coef_, X)


class NearOptimalSampler(BaseEstimator):
    """Greedy near-optimal design of ``n_samples`` points in ``n_features`` dimensions.

    ``fit`` draws a coherence-optimal pool and selects from it; the design is
    then available as ``points_`` and ``weights_``.
    """

    def __init__(
        self, n_features=2, family="legendre", order=2, n_samples=10, pool_size=10_000, burn_in=1000, thinning=None,
        random_state=0,
    ):
        self.n_features = n_features
        self.family = family
        self.order = order
        self.n_samples = n_samples
        self.pool_size = pool_size
        self.burn_in = burn_in
        self.thinning = thinning
        self.random_state = random_state

    def fit(self, X=None, y=None):
        if int(self.n_samples) > int(self.pool_size):
            raise ValueError("n_samples cannot exceed pool_size")
        basis = _basis(self.family, self.order, self.n_features)
        seed = int(self.random_state or 0)
        pool = build_pool(basis, int(self.pool_size), substream(seed, "pool", 0), McmcConfig(self.burn_in, self.thinning))
        self.selection_ = near_optimal_select(assemble(pool, basis), int(self.n_samples), substream(seed, "first-row", 0))
        design = pool.subset(self.selection_.indices, "near-optimal")
        self.basis_ = basis
        self.points_ = np.array(design.points)
        self.weights_ = np.array(design.weights)
        self.mu_ = float(self.selection_.mu[-1])
        self.gamma_ = float(self.selection_.gamma[-1])
        return self

    def sample(self):
        check_is_fitted(self, "points_")
        return self.points_.copy(), self.weights_.copy()
