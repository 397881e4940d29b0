"""l1 recovery: basis pursuit and basis pursuit denoising.

Solves ``min |c|_1  s.t.  |A c - u|_2 <= epsilon`` by spectral projected
gradient on the l1-ball constrained least-squares problem
``min |A c - u|_2  s.t. |c|_1 <= tau`` with root finding on ``tau`` along
the Pareto curve ``phi(tau) = epsilon``. ``tau`` only moves to dual lower
bounds of the optimal l1 norm, so it approaches the root from below.

For ``epsilon == 0`` the iterate's support is periodically "polished" by a
least-squares solve restricted to the support; a polished point is accepted
once a dual certificate proves its l1 norm optimal to the requested
tolerance, which gives exact sparse solutions to round-off rather than to
first-order accuracy. For ``epsilon > 0`` a stable support and sign pattern
is finished by the closed-form solution of the support KKT system under the
same kind of certificate. Basis pursuit runs that exhaust the iteration budget
uncertified (typically when the optimal vertex has as many nonzeros as there
are rows) are finished by solving the equivalent linear program with HiGHS.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog
from scipy.sparse.linalg import LinearOperator, aslinearoperator

logger = logging.getLogger(__name__)

STEP_MIN = 1e-16
STEP_MAX = 1e5
LINE_SEARCH_MEMORY = 3
LINE_SEARCH_DECREASE = 1e-4
MAX_LINE_SEARCH = 20
# entries below this fraction of the largest are left out of polish supports
SUPPORT_RTOL = 1e-8
POLISH_EVERY = 10


@dataclass(frozen=True)
class SolverTolerances:
    """``feasibility`` is relative to ``|u|_2``; ``optimality`` bounds the
    relative duality gap."""

    feasibility: float = 1e-9
    optimality: float = 1e-9
    max_iterations: int = 10_000

    def __post_init__(self):
        if self.feasibility <= 0 or self.optimality <= 0:
            raise ValueError("solver tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class RecoverySpec:
    matrix: object
    data: np.ndarray
    epsilon: float = 0.0
    tolerances: SolverTolerances = field(default_factory=SolverTolerances)
    # finish uncertified basis pursuit runs with an exact LP solve
    crossover: bool = True

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float).reshape(-1)
        if self.epsilon < 0 or not np.isfinite(self.epsilon):
            raise ValueError("epsilon must be a finite non-negative number")
        shape = getattr(self.matrix, "shape", None)
        if shape is None or len(shape) != 2:
            raise ValueError("matrix must be two-dimensional")
        if shape[0] != data.shape[0]:
            raise ValueError(f"matrix has {shape[0]} rows but data has {data.shape[0]} entries")
        if shape[1] < 1:
            raise ValueError("matrix needs at least one column")
        if not np.all(np.isfinite(data)):
            raise ValueError("data must be finite")
        object.__setattr__(self, "data", data)


@dataclass(frozen=True)
class RecoveryResult:
    coefficients: np.ndarray
    residual_norm: float
    l1_norm: float
    iterations: int
    converged: bool
    status: str = ""
    tau: float = 0.0


class _Operator:
    """Forward/adjoint products, with column access for support solves."""

    def __init__(self, A):
        if isinstance(A, np.ndarray) or hasattr(A, "__array__") and not isinstance(A, LinearOperator):
            self.dense = np.asarray(A, dtype=float)
            if not np.all(np.isfinite(self.dense)):
                raise ValueError("matrix entries must be finite")
            self.op = None
        else:
            self.dense = None
            self.op = aslinearoperator(A)
        self.shape = tuple(A.shape)
        self.n_apply = 0

    def __call__(self, x):
        self.n_apply += 1
        return self.dense @ x if self.dense is not None else self.op.matvec(x)

    def adjoint(self, y):
        self.n_apply += 1
        return self.dense.T @ y if self.dense is not None else self.op.rmatvec(y)

    def columns(self, idx):
        if self.dense is not None:
            return self.dense[:, idx]
        eye = np.zeros((self.shape[1], len(idx)))
        eye[idx, np.arange(len(idx))] = 1.0
        return self.op.matmat(eye)


def project_l1_ball(v: np.ndarray, tau: float) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{x : |x|_1 <= tau}``."""
    if tau <= 0:
        return np.zeros_like(v)
    a = np.abs(v)
    if a.sum() <= tau:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u) - tau
    ind = np.arange(1, u.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def _polish(A: _Operator, b, support, r_iterate, lower, feas, opt_tol):
    """Least squares on ``support``; returns (x_S, S) if certified optimal.

    ``lower`` is an already known lower bound on the optimal l1 norm.
    """
    S = np.asarray(support)
    for _ in range(3):
        AS = A.columns(S)
        xs, *_ = np.linalg.lstsq(AS, b, rcond=None)
        keep = np.abs(xs) > 1e-10 * np.abs(xs).max()
        if keep.all():
            break
        S = S[keep]
        if S.size == 0:
            return None
    else:
        return None
    res = b - AS @ xs
    if np.linalg.norm(res) > feas:
        return None
    l1 = np.abs(xs).sum()
    bounds = [lower]
    # any y with A_S^T y = sign(x_S) has b.y = |x_S|_1, so l1 / |A^T y|_inf is a
    # lower bound; start from the iterate's dual direction, which tends to the
    # dual optimum, and correct it onto that affine set
    z = np.sign(xs)
    dual_r = np.abs(A.adjoint(r_iterate)).max()
    starts = [np.zeros_like(b)]
    if dual_r > 0:
        starts.append(r_iterate / dual_r)
    for y0 in starts:
        dy, *_ = np.linalg.lstsq(AS.T, z - AS.T @ y0, rcond=None)
        y = y0 + dy
        if np.abs(AS.T @ y - z).max() > 1e-9:
            continue
        dual = np.abs(A.adjoint(y)).max()
        if dual > 0:
            bounds.append(b @ y / dual)
    if l1 - max(bounds) <= opt_tol * max(1.0, l1):
        return xs, S
    return None


def _polish_denoise(A: _Operator, b, support, signs, sigma, lower, opt_tol):
    """Exact minimizer on ``support`` with fixed ``signs`` for epsilon > 0.

    The support KKT conditions ``A_S^T r = lam z`` and ``|r|_2 = sigma`` give
    ``x_S = x_ls - lam G^-1 z`` with ``G = A_S^T A_S`` and
    ``|r|^2 = |r_ls|^2 + lam^2 |A_S G^-1 z|^2``. Accepted when the signs are
    consistent and ``y = r / lam`` certifies the l1 norm.
    """
    S = np.asarray(support)
    AS = A.columns(S)
    if np.linalg.matrix_rank(AS) < S.size:
        return None
    G = AS.T @ AS
    x_ls = np.linalg.solve(G, AS.T @ b)
    r_ls = b - AS @ x_ls
    z = np.asarray(signs, dtype=float)
    dz = np.linalg.solve(G, z)
    Adz = AS @ dz
    slack = sigma**2 - r_ls @ r_ls
    if slack <= 0 or Adz @ Adz <= 0:
        return None
    lam = np.sqrt(slack / (Adz @ Adz))
    xs = x_ls - lam * dz
    if np.any(np.sign(xs) != z):
        return None
    r = b - AS @ xs
    l1 = np.abs(xs).sum()
    dual = np.abs(A.adjoint(r)).max()
    bound = max(lower, (b @ r - sigma * np.linalg.norm(r)) / dual)
    if l1 - bound <= opt_tol * max(1.0, l1):
        return xs, S
    return None


def _spgl1(A: _Operator, b: np.ndarray, sigma: float, tol: SolverTolerances) -> RecoveryResult:
    M, K = A.shape
    bnorm = np.linalg.norm(b)
    feas = tol.feasibility * max(bnorm, np.finfo(float).tiny)
    x = np.zeros(K)
    if bnorm <= sigma:
        return RecoveryResult(x, float(bnorm), 0.0, 0, True, "zero solution feasible", 0.0)

    r = b.copy()
    g = -A.adjoint(r)
    f = 0.5 * (r @ r)
    tau = 0.0
    gnorm = np.abs(g).max()
    if gnorm == 0:
        return RecoveryResult(x, float(bnorm), 0.0, 0, False, "data orthogonal to range", 0.0)
    Ag = A(g)
    step = (g @ g) / (Ag @ Ag) if Ag @ Ag > 0 else 1.0
    step = float(np.clip(step, STEP_MIN, STEP_MAX))
    history = [f]

    last_support = None
    stable = 0
    tried = set()
    status = "iteration limit"
    converged = False
    it = 0
    for it in range(1, tol.max_iterations + 1):
        rnorm = np.sqrt(2.0 * f)
        gnorm = np.abs(g).max()
        gap = r @ (r - b) + tau * gnorm
        rgap = abs(gap) / max(1.0, f)
        aerr1 = rnorm - sigma
        rerr1 = abs(aerr1) / max(1.0, rnorm)
        rerr2 = abs(rnorm**2 - sigma**2) / max(1.0, f)

        if sigma == 0.0:
            if rnorm <= feas:
                converged, status = True, "basis pursuit solution"
                break
            xmax = np.abs(x).max()
            support = np.flatnonzero(np.abs(x) > SUPPORT_RTOL * xmax)
            key = support.tobytes()
            stable = stable + 1 if key == last_support else 0
            last_support = key
            candidates = []
            if stable >= 2 and 0 < support.size <= M:
                candidates.append(support)
            if it % POLISH_EVERY == 0 and 0 < support.size < M:
                # pad with the columns closest to dual activity; any superset
                # of the optimal support of full column rank gives the vertex
                rest = np.setdiff1d(np.argsort(-np.abs(g), kind="stable")[: 2 * M], support)
                candidates.append(np.sort(np.concatenate([support, rest[: M - support.size]])))
            for cand in candidates:
                ckey = cand.tobytes()
                if ckey in tried:
                    continue
                tried.add(ckey)
                polished = _polish(A, b, cand, r, tau, feas, tol.optimality)
                if polished is not None:
                    xs, S = polished
                    x = np.zeros(K)
                    x[S] = xs
                    r = b - A(x)
                    converged, status = True, "certified support solution"
                    break
            if converged:
                break
        elif aerr1 <= feas:
            # feasible with |x|_1 <= tau <= optimal l1 norm
            converged, status = True, "root found"
            break
        else:
            support = np.flatnonzero(np.abs(x) > SUPPORT_RTOL * np.abs(x).max()) if np.any(x) else np.array([], int)
            key = support.tobytes() + np.sign(x[support]).tobytes()
            stable = stable + 1 if key == last_support else 0
            last_support = key
            if stable >= 2 and 0 < support.size <= M and key not in tried:
                tried.add(key)
                polished = _polish_denoise(A, b, support, np.sign(x[support]), sigma, tau, tol.optimality)
                if polished is not None:
                    xs, S = polished
                    x = np.zeros(K)
                    x[S] = xs
                    r = b - A(x)
                    converged, status = True, "certified support solution"
                    break
        if gnorm == 0:
            status = "stationary residual above tolerance"
            break

        if rgap <= max(tol.optimality, rerr2) or rerr1 <= tol.optimality:
            # y = r / |A^T r|_inf is dual feasible, so (b.r - sigma |r|) / |A^T r|_inf
            # bounds the optimal l1 norm from below; it equals the Newton step
            # on the Pareto curve when the subproblem is solved exactly, and it
            # can never overshoot the root
            lower = (b @ r - sigma * rnorm) / gnorm
            if lower > tau:
                tau = lower
                history = [f]

        # projected spectral gradient step with nonmonotone backtracking
        d = project_l1_ball(x - step * g, tau) - x
        gtd = g @ d
        if gtd >= 0:
            step = STEP_MAX if step < STEP_MAX else step
            d = project_l1_ball(x - step * g, tau) - x
            gtd = g @ d
            if gtd >= 0:
                continue
        fmax = max(history)
        lam = 1.0
        Ad = A(d)
        for _ in range(MAX_LINE_SEARCH):
            rt = r - lam * Ad
            ft = 0.5 * (rt @ rt)
            if ft <= fmax + LINE_SEARCH_DECREASE * lam * gtd:
                break
            # safeguarded quadratic interpolation of f along d
            curv = Ad @ Ad
            lam_q = -gtd / curv if curv > 0 else 0.5 * lam
            lam = lam_q if 0.1 * lam <= lam_q <= 0.5 * lam else 0.5 * lam
        xt = x + lam * d
        gt = -A.adjoint(rt)
        s = xt - x
        y = gt - g
        x, r, g, f = xt, rt, gt, ft
        sty = s @ y
        step = float(np.clip((s @ s) / sty, STEP_MIN, STEP_MAX)) if sty > 0 else STEP_MAX
        history.append(f)
        if len(history) > LINE_SEARCH_MEMORY:
            history.pop(0)

    rnorm = float(np.linalg.norm(r))
    if not converged and rnorm <= sigma + feas:
        # feasible at the iteration limit; optimality not certified
        status = "feasible, optimality not certified"
    logger.debug("spgl1: %s after %d iterations, residual %.3e", status, it, rnorm)
    return RecoveryResult(x, rnorm, float(np.abs(x).sum()), it, converged, status, float(tau))


def _drop_repeated_rows(A: _Operator, b: np.ndarray):
    # repeated (row, datum) pairs are redundant equality constraints; Markov
    # chain ensembles contain them whenever a proposal is rejected
    if A.dense is None:
        return A, b
    stacked = np.ascontiguousarray(np.column_stack([A.dense, b]))
    _, first = np.unique(stacked.view(np.dtype((np.void, stacked.dtype.itemsize * stacked.shape[1]))), return_index=True)
    if first.size == b.size:
        return A, b
    keep = np.sort(first)
    return _Operator(A.dense[keep]), b[keep]


def _crossover(A: _Operator, b: np.ndarray, tol: SolverTolerances, start: RecoveryResult) -> RecoveryResult:
    """Basis pursuit as a linear program, for when the first-order phase runs
    out of iterations; the LP dual certifies the polished vertex."""
    M, K = A.shape
    dense = A.dense if A.dense is not None else A.columns(np.arange(K))
    lp = linprog(
        np.ones(2 * K),
        A_eq=np.hstack([dense, -dense]),
        b_eq=b,
        bounds=(0, None),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if lp.status != 0:
        logger.debug("crossover failed: %s", lp.message)
        return start
    x = lp.x[:K] - lp.x[K:]
    y = np.asarray(lp.eqlin.marginals, dtype=float)
    feas = tol.feasibility * np.linalg.norm(b)
    iterations = start.iterations + int(getattr(lp, "nit", 0))
    support = np.flatnonzero(np.abs(x) > SUPPORT_RTOL * np.abs(x).max()) if np.any(x) else np.array([], dtype=int)
    if 0 < support.size <= M:
        polished = _polish(A, b, support, y, start.tau, feas, tol.optimality)
        if polished is not None:
            xs, S = polished
            x = np.zeros(K)
            x[S] = xs
            rnorm = float(np.linalg.norm(b - A(x)))
            return RecoveryResult(x, rnorm, float(np.abs(xs).sum()), iterations, True, "certified vertex (crossover)", start.tau)
    rnorm = float(np.linalg.norm(b - A(x)))
    ok = rnorm <= feas
    return RecoveryResult(x, rnorm, float(np.abs(x).sum()), iterations, ok, "crossover" if ok else "crossover infeasible", start.tau)


def recover(spec: RecoverySpec) -> RecoveryResult:
    A = _Operator(spec.matrix)
    b = spec.data
    if spec.epsilon == 0.0:
        A, b = _drop_repeated_rows(A, b)
    result = _spgl1(A, b, float(spec.epsilon), spec.tolerances)
    if not result.converged and spec.epsilon == 0.0 and spec.crossover:
        result = _crossover(A, b, spec.tolerances, result)
    return result


def recover_weighted(
    matrix, weights, data, epsilon: float = 0.0, tolerances: Optional[SolverTolerances] = None, crossover: bool = True
):
    """``recover`` on ``(diag(w) A, diag(w) u)``."""
    w = np.asarray(weights, dtype=float).reshape(-1)
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("weights must be strictly positive")
    A = np.asarray(matrix, dtype=float)
    data = np.asarray(data, dtype=float).reshape(-1)
    if A.shape[0] != w.shape[0] or data.shape[0] != w.shape[0]:
        raise ValueError("weights, matrix rows and data must have equal length")
    spec = RecoverySpec(A * w[:, None], data * w, epsilon, tolerances or SolverTolerances(), crossover)
    return recover(spec)
