import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from sparsepce.estimators import NearOptimalSampler, PolynomialChaosFeatures, SparsePCERegressor
from sparsepce.orthopoly import Basis


def test_features_match_basis():
    X = np.random.default_rng(0).uniform(-1, 1, (7, 2))
    t = PolynomialChaosFeatures(order=3).fit(X)
    np.testing.assert_array_equal(t.transform(X), Basis.total_degree("legendre", 2, 3).evaluate(X))
    assert t.n_output_features_ == 10
    assert list(t.get_feature_names_out()[:4]) == ["1", "x0", "x1", "x0^2"]
    w = PolynomialChaosFeatures(order=3, weighted=True).fit_transform(X)
    assert np.allclose(np.abs(w).max(axis=1), 1.0)


def test_params_and_clone():
    r = SparsePCERegressor(order=4, epsilon=0.1)
    assert r.get_params()["order"] == 4
    c = clone(r)
    assert c.get_params() == r.get_params() and c is not r
    assert NearOptimalSampler(n_samples=3).set_params(order=1).order == 1


def test_regressor_recovers_sparse_polynomial():
    rng = np.random.default_rng(1)
    X = rng.uniform(-1, 1, (60, 4))
    y = 2 * X[:, 0] * X[:, 1] - X[:, 3] ** 2 + 0.5
    reg = SparsePCERegressor(order=3).fit(X, y)
    assert reg.converged_
    Xt = rng.uniform(-1, 1, (20, 4))
    np.testing.assert_allclose(reg.predict(Xt), 2 * Xt[:, 0] * Xt[:, 1] - Xt[:, 3] ** 2 + 0.5, atol=1e-8)
    assert reg.score(Xt, 2 * Xt[:, 0] * Xt[:, 1] - Xt[:, 3] ** 2 + 0.5) > 1 - 1e-12
    weighted = SparsePCERegressor(order=3).fit(X, y, sample_weight=rng.uniform(0.5, 1, 60))
    np.testing.assert_allclose(weighted.coef_, reg.coef_, atol=1e-8)
    with pytest.raises(ValueError):
        SparsePCERegressor(order=3).fit(X, y, sample_weight=np.zeros(60))


def test_not_fitted_and_shape_errors():
    with pytest.raises(NotFittedError):
        SparsePCERegressor().predict(np.zeros((1, 2)))
    with pytest.raises(NotFittedError):
        PolynomialChaosFeatures().transform(np.zeros((1, 2)))
    t = PolynomialChaosFeatures().fit(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        t.transform(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        PolynomialChaosFeatures(order=-1).fit(np.zeros((2, 1)))


def test_sampler():
    s = NearOptimalSampler(n_features=2, order=3, n_samples=12, pool_size=200, burn_in=50, random_state=3).fit()
    pts, w = s.sample()
    assert pts.shape == (12, 2) and w.shape == (12,)
    np.testing.assert_array_equal(w, Basis.total_degree("legendre", 2, 3).weight(pts))
    again = clone(s).fit()
    np.testing.assert_array_equal(again.points_, s.points_)
    assert 0 < s.gamma_ <= s.mu_**2
    with pytest.raises(ValueError):
        NearOptimalSampler(n_samples=20, pool_size=10).fit()
