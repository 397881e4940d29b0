"""Independent oracles shared by the test modules."""

import itertools

import numpy as np
from scipy.optimize import linprog, minimize


def gram_metrics_naive(A):
    """(mu, gamma) straight from the definitions, column by column."""
    A = np.asarray(A, dtype=float)
    K = A.shape[1]
    vals = []
    for p in range(K):
        for q in range(K):
            if p == q:
                continue
            npq = np.linalg.norm(A[:, p]) * np.linalg.norm(A[:, q])
            vals.append(1.0 if npq == 0 else abs(A[:, p] @ A[:, q]) / npq)
    vals = np.array(vals)
    return vals.max(), np.mean(vals**2)


def basis_pursuit_lp(A, b):
    """min |x|_1 s.t. Ax = b by HiGHS on the split variables (x+, x-)."""
    K = A.shape[1]
    res = linprog(
        np.ones(2 * K),
        A_eq=np.hstack([A, -A]),
        b_eq=b,
        bounds=(0, None),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    assert res.status == 0, res.message
    return res.x[:K] - res.x[K:]


def sparsest_solutions(A, b, max_sparsity, rtol=1e-10):
    """Brute-force l0: every support of the smallest size admitting an exact fit."""
    K = A.shape[1]
    for s in range(1, max_sparsity + 1):
        found = []
        for T in itertools.combinations(range(K), s):
            cols = list(T)
            x, *_ = np.linalg.lstsq(A[:, cols], b, rcond=None)
            if np.linalg.norm(A[:, cols] @ x - b) <= rtol * np.linalg.norm(b):
                full = np.zeros(K)
                full[cols] = x
                found.append(full)
        if found:
            return found
    return []


def _equiangular_28():
    # 28 lines in the sum-zero hyperplane of R^8 with |cos| = 1/3
    rows = []
    for i, j in itertools.combinations(range(8), 2):
        v = -np.ones(8)
        v[[i, j]] = 3.0
        rows.append(v)
    return np.array(rows).T / np.sqrt(24.0)


def low_coherence_frame(rng, M=8, K=20):
    """Unit-norm M x K frame (M = 8, K <= 28) with mutual coherence below 1/3.

    Start from K of the 28 equiangular lines (coherence exactly 1/3), rotate
    randomly, perturb, and push the largest correlations down by minimizing
    sum (g / (1/3))^p for increasing p.
    """
    assert M == 8 and K <= 28
    off = ~np.eye(K, dtype=bool)
    q, _ = np.linalg.qr(rng.standard_normal((M, M)))
    A = q @ (_equiangular_28()[:, rng.choice(28, K, replace=False)] + 1e-3 * rng.standard_normal((M, K)))

    def objective(v, p):
        X = v.reshape(M, K)
        n = np.linalg.norm(X, axis=0)
        U = X / n
        G = np.where(off, U.T @ U, 0.0) * 3.0
        dU = 2.0 * U @ (p * G ** (p - 1) * 3.0)
        return np.sum(G**p), ((dU - U * np.sum(U * dU, axis=0)) / n).ravel()

    v = A.ravel()
    for p in (32, 64, 128, 256):
        v = minimize(objective, v, args=(p,), jac=True, method="L-BFGS-B", options={"maxiter": 1000}).x
    A = v.reshape(M, K)
    return A / np.linalg.norm(A, axis=0)


def micro_instance(seed, M=8, K=20, s=2):
    """(A, b, c_true, mu) for the l0/l1 equivalence checks."""
    rng = np.random.default_rng(seed)
    A = low_coherence_frame(rng, M, K)
    support = rng.choice(K, s, replace=False)
    c = np.zeros(K)
    c[support] = rng.choice([-1.0, 1.0], s) * rng.uniform(0.5, 2.0, s)
    mu = np.abs((A.T @ A)[~np.eye(K, dtype=bool)]).max()
    return A, A @ c, c, mu


def diffusion_qoi_exact(xi, x_star=0.5):
    """u(x*) of -(a u')' = 2, u(0) = u(1) = 0, by quadrature of the flux form.

    a u' = C - 2x with C fixed by u(1) = 0.
    """
    from scipy.integrate import quad

    from sparsepce.benchmarks import diffusion_coefficient

    a = lambda t: float(diffusion_coefficient(np.array([t]), xi)[0])  # noqa: E731
    opts = {"epsabs": 1e-14, "epsrel": 1e-13, "limit": 200}
    C = quad(lambda t: 2 * t / a(t), 0, 1, **opts)[0] / quad(lambda t: 1 / a(t), 0, 1, **opts)[0]
    return quad(lambda t: (C - 2 * t) / a(t), 0, x_star, **opts)[0]
