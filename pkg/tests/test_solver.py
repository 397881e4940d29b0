import numpy as np
import pytest
from helpers import basis_pursuit_lp, micro_instance, sparsest_solutions
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.sparse.linalg import aslinearoperator

from sparsepce.matrix import assemble
from sparsepce.orthopoly import Basis, Family
from sparsepce.sampling import coherence_optimal_sample
from sparsepce.solver import (
    RecoverySpec,
    SolverTolerances,
    project_l1_ball,
    recover,
    recover_weighted,
)


def _instance(seed, M=30, K=60, s=4):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((M, K)) / np.sqrt(M)
    c = np.zeros(K)
    c[rng.choice(K, s, replace=False)] = rng.standard_normal(s)
    return A, c


def test_identity_returns_data():
    u = np.array([0.0, -2.0, 0.5, 3.0])
    res = recover(RecoverySpec(np.eye(4), u))
    assert res.converged
    np.testing.assert_allclose(res.coefficients, u, atol=1e-12)


def test_large_epsilon_gives_zero():
    A, c = _instance(0)
    b = A @ c
    res = recover(RecoverySpec(A, b, epsilon=1.01 * np.linalg.norm(b)))
    assert res.converged and not np.any(res.coefficients)


@pytest.mark.parametrize("seed", range(8))
def test_l1_norm_matches_lp_oracle(seed):
    A, c = _instance(seed, M=20, K=50, s=6)
    b = A @ c
    res = recover(RecoverySpec(A, b))
    ref = basis_pursuit_lp(A, b)
    assert res.converged
    assert np.linalg.norm(A @ res.coefficients - b) <= 1e-8 * np.linalg.norm(b)
    assert res.l1_norm == pytest.approx(np.abs(ref).sum(), rel=1e-7)
    assert res.l1_norm <= np.abs(c).sum() * (1 + 1e-9)


def test_unit_weights_change_nothing():
    A, c = _instance(3)
    b = A @ c
    a = recover(RecoverySpec(A, b))
    w = recover_weighted(A, np.ones(A.shape[0]), b)
    np.testing.assert_array_equal(a.coefficients, w.coefficients)


def test_weight_scaling_preserves_the_solution():
    A, c = _instance(4)
    b = A @ c
    w = np.random.default_rng(1).uniform(0.2, 1.0, A.shape[0])
    res = recover_weighted(A, w, b)
    np.testing.assert_allclose(res.coefficients, c, atol=1e-8)
    with pytest.raises(ValueError):
        recover_weighted(A, np.zeros(A.shape[0]), b)
    with pytest.raises(ValueError):
        recover_weighted(A, np.ones(3), b)


def test_denoising_is_feasible_and_monotone():
    A, c = _instance(5, M=40, K=80, s=5)
    rng = np.random.default_rng(2)
    b = A @ c + 1e-2 * rng.standard_normal(40)
    norms = []
    for eps in (0.02, 0.05, 0.1, 0.2):
        res = recover(RecoverySpec(A, b, eps))
        assert res.converged
        assert res.residual_norm <= eps * (1 + 1e-6)
        norms.append(res.l1_norm)
    assert all(a >= b - 1e-8 for a, b in zip(norms, norms[1:]))


def test_denoising_matches_lp_with_residual_constraint():
    # oracle: the same problem as a second-order cone program, solved by a Lagrangian scan
    A, c = _instance(6, M=25, K=40, s=3)
    b = A @ c + 0.05 * np.random.default_rng(3).standard_normal(25)
    eps = 0.1
    res = recover(RecoverySpec(A, b, eps))
    from scipy.optimize import minimize

    K = A.shape[1]
    cons = {"type": "ineq", "fun": lambda z: eps**2 - np.sum((A @ (z[:K] - z[K:]) - b) ** 2)}
    ref = minimize(lambda z: z.sum(), np.abs(np.r_[res.coefficients.clip(0), (-res.coefficients).clip(0)]) + 1e-3,
                   jac=lambda z: np.ones(2 * K), constraints=[cons], bounds=[(0, None)] * (2 * K), method="SLSQP",
                   options={"ftol": 1e-12, "maxiter": 500})
    assert res.l1_norm <= ref.fun * (1 + 1e-5)
    assert res.l1_norm == pytest.approx(ref.fun, rel=1e-4)


def test_iteration_limit_is_reported():
    A, c = _instance(7, M=20, K=60, s=8)
    spec = RecoverySpec(A, A @ c, tolerances=SolverTolerances(max_iterations=1), crossover=False)
    res = recover(spec)
    assert not res.converged and res.iterations <= 1


def test_crossover_rescues_an_iteration_limit():
    A, c = _instance(7, M=20, K=60, s=8)
    res = recover(RecoverySpec(A, A @ c, tolerances=SolverTolerances(max_iterations=3)))
    assert res.converged
    assert res.l1_norm == pytest.approx(np.abs(basis_pursuit_lp(A, A @ c)).sum(), rel=1e-7)


def test_linear_operator_input():
    A, c = _instance(8)
    res = recover(RecoverySpec(aslinearoperator(A), A @ c))
    assert res.converged
    np.testing.assert_allclose(res.coefficients, c, atol=1e-7)


def test_repeated_rows_from_a_markov_chain():
    basis = Basis.total_degree(Family.LEGENDRE, 2, 6)
    ens = coherence_optimal_sample(basis, 28, 3)
    A = assemble(ens, basis).entries
    assert np.unique(A, axis=0).shape[0] < A.shape[0]
    c = np.zeros(basis.K)
    c[[0, 4, 11]] = [1.0, -0.5, 0.25]
    res = recover(RecoverySpec(A, A @ c))
    assert res.converged
    np.testing.assert_allclose(res.coefficients, c, atol=1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_unique_sparse_solution_is_recovered(seed):
    A, b, c, mu = micro_instance(seed)
    assert mu < 1 / 3
    res = recover(RecoverySpec(A, b))
    best = sparsest_solutions(A, b, 2)
    assert len(best) == 1
    np.testing.assert_allclose(res.coefficients, best[0], atol=1e-8)


def test_spec_validation():
    with pytest.raises(ValueError):
        RecoverySpec(np.eye(3), np.ones(2))
    with pytest.raises(ValueError):
        RecoverySpec(np.eye(3), np.ones(3), epsilon=-1)
    with pytest.raises(ValueError):
        RecoverySpec(np.eye(3), [1, np.nan, 0])
    with pytest.raises(ValueError):
        RecoverySpec(np.ones(3), np.ones(3))
    with pytest.raises(ValueError):
        SolverTolerances(feasibility=0)
    with pytest.raises(ValueError):
        SolverTolerances(max_iterations=0)


vectors = arrays(np.float64, st.integers(1, 30), elements=st.floats(-100, 100, allow_nan=False, width=64))


@given(vectors, st.floats(0, 50))
def test_projection_onto_l1_ball(v, tau):
    p = project_l1_ball(v, tau)
    assert np.abs(p).sum() <= tau * (1 + 1e-12) + 1e-12
    if np.abs(v).sum() <= tau:
        np.testing.assert_array_equal(p, v)
    assert np.all(np.sign(p) * np.sign(v) >= 0)
    assert np.all(np.abs(p) <= np.abs(v) + 1e-12)


@given(vectors, st.floats(0.1, 50), st.integers(0, 2**31))
def test_projection_is_nearest_point(v, tau, seed):
    # compare to random feasible points: none is closer than the projection
    p = project_l1_ball(v, tau)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((20, v.size))
    z = z / np.abs(z).sum(axis=1, keepdims=True) * tau * rng.uniform(0, 1, (20, 1))
    assert np.all(np.linalg.norm(z - v, axis=1) >= np.linalg.norm(p - v) - 1e-9)
