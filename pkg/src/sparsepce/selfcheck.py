"""Built-in invariant checks run by ``sparsepce validate``."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .benchmarks import DiffusionConfig, solve_diffusion
from .matrix import GramState, avg_cross_correlation, mutual_coherence
from .multiindex import cardinality
from .orthopoly import Basis, Family, gauss_rule
from .sampling import substream


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def tensor_rule(family, dim: int, n_points: int):
    nodes, weights = gauss_rule(family, n_points)
    pts = np.array(list(itertools.product(nodes, repeat=dim)))
    wts = np.prod(np.array(list(itertools.product(weights, repeat=dim))), axis=1)
    return pts, wts


def quadrature_gram(basis: Basis) -> np.ndarray:
    """``Psi^T W Psi`` under a tensor Gauss rule exact for degree ``2 k``."""
    pts, wts = tensor_rule(basis.family, basis.dim, basis.order + 1)
    psi = basis.evaluate(pts)
    return psi.T @ (psi * wts[:, None])


def check_cardinality() -> CheckResult:
    from math import comb

    bad = [(d, k) for d in range(1, 26) for k in range(26) if cardinality(d, k) != comb(d + k, d)]
    ok = not bad and cardinality(2, 20) == 231 and cardinality(20, 2) == 231
    return CheckResult("cardinality", ok, "K(2,20) = K(20,2) = 231, grid d,k <= 25 exact" if ok else f"mismatch at {bad[:3]}")


def check_orthonormality(tol: float = 1e-10) -> CheckResult:
    worst = 0.0
    for family in Family:
        for d, k in ((1, 20), (2, 6), (3, 4)):
            G = quadrature_gram(Basis.total_degree(family, d, k))
            worst = max(worst, float(np.abs(G - np.eye(G.shape[0])).max()))
    return CheckResult("orthonormality", worst <= tol, f"max |Gram - I| = {worst:.2e} (tol {tol:g})")


def check_incremental_gram(n: int = 100, tol: float = 1e-10) -> CheckResult:
    worst = 0.0
    for i in range(n):
        rng = substream(0, "selfcheck-gram", i)
        M, K = int(rng.integers(1, 51)), int(rng.integers(2, 51))
        rows = rng.standard_normal((M, K))
        state = GramState.empty(K)
        for r in rows:
            state = state.append(r)
        mu, gamma = state.metrics()
        worst = max(worst, abs(mu - mutual_coherence(rows)), abs(gamma - avg_cross_correlation(rows)))
    return CheckResult("incremental-gram", worst <= tol, f"max deviation {worst:.2e} over {n} matrices")


def check_diffusion() -> CheckResult:
    q0 = solve_diffusion(np.zeros(10), DiffusionConfig(512))
    ratios = []
    rng = substream(0, "selfcheck-diffusion")
    for xi in rng.uniform(-1, 1, size=(5, 10)):
        # grid-converged reference from Richardson extrapolation of two fine grids
        fine, finer = solve_diffusion(xi, DiffusionConfig(2048)), solve_diffusion(xi, DiffusionConfig(4096))
        ref = (4 * finer - fine) / 3
        e1 = abs(solve_diffusion(xi, DiffusionConfig(64)) - ref)
        e2 = abs(solve_diffusion(xi, DiffusionConfig(128)) - ref)
        ratios.append(e1 / e2)
    ok = abs(q0 - 0.25) <= 1e-6 and all(3.5 <= r <= 4.5 for r in ratios)
    return CheckResult(
        "diffusion", ok, f"u(0.5; xi=0) = {q0:.12f}, refinement ratios {', '.join(f'{r:.2f}' for r in ratios)}"
    )


CHECKS: tuple[Callable[[], CheckResult], ...] = (
    check_cardinality,
    check_orthonormality,
    check_incremental_gram,
    check_diffusion,
)


def run_all() -> list:
    out = []
    for check in CHECKS:
        try:
            out.append(check())
        except Exception as exc:  # noqa: BLE001 - a crashing check is a failed check
            out.append(CheckResult(check.__name__.removeprefix("check_"), False, f"raised {exc!r}"))
    return out
