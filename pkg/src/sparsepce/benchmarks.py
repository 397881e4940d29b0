"""Benchmark target functions and their ground truth."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

from .orthopoly import Basis, Family, quadrature_project, quadrature_project_separable
from .sampling import draw_base, substream

EXACT = "exact-coefficients"
VALIDATION = "validation-samples"

VALIDATION_SIZE = 1000
# validation points come from their own labelled stream, never a training one
VALIDATION_SEED = 20_170_101


def _points(xi, d):
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 1
    xi = np.atleast_2d(xi)
    if xi.shape[1] != d:
        raise ValueError(f"expected {d}-dimensional input, got shape {np.shape(xi)}")
    return xi, single


def eval_lowd_highk(xi):
    """``sum_{i=1..5} xi_1^(2i) xi_2^(2i)``; vectorized over rows."""
    x, single = _points(xi, 2)
    prod = (x[:, 0] * x[:, 1]) ** 2
    out = sum(prod**i for i in range(1, 6))
    return float(out[0]) if single else out


def eval_highd_lowk(xi):
    """``sum_{i=1..19} xi_i xi_{i+1}`` on ``[-1, 1]^20``."""
    x, single = _points(xi, 20)
    out = (x[:, :-1] * x[:, 1:]).sum(axis=1)
    return float(out[0]) if single else out


def eval_rosenbrock6(xi):
    """Generalized Rosenbrock function in six variables."""
    x, single = _points(xi, 6)
    a, b = x[:, :-1], x[:, 1:]
    out = (100.0 * (b - a**2) ** 2 + (1.0 - a) ** 2).sum(axis=1)
    return float(out[0]) if single else out


@dataclass(frozen=True)
class DiffusionConfig:
    n_x: int = 512
    x_star: float = 0.5

    def __post_init__(self):
        if self.n_x < 8:
            raise ValueError("need at least 8 grid cells")
        node = self.x_star * self.n_x
        if not 0 < self.x_star < 1 or abs(node - round(node)) > 1e-9:
            raise ValueError("x_star must be an interior grid node")


N_MODES = 10


def diffusion_coefficient(x, xi) -> np.ndarray:
    """``a(x, xi) = 1 + sum_k cos(2 pi k x) xi_k / (k pi)^2``."""
    x = np.asarray(x, dtype=float)
    k = np.arange(1, N_MODES + 1)
    return 1.0 + (np.cos(2.0 * np.pi * np.outer(x, k)) / (k * np.pi) ** 2) @ np.asarray(xi, dtype=float)


def solve_diffusion(xi, cfg: DiffusionConfig = DiffusionConfig()) -> float:
    """Solve ``-(a u')' = 2`` on (0, 1) with ``u(0) = u(1) = 0`` and return ``u(x_star)``.

    Conservative second-order finite differences with ``a`` sampled at
    cell interfaces, solved as a tridiagonal system.
    """
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.shape[0] != N_MODES:
        raise ValueError(f"diffusion input must have {N_MODES} components")
    n = cfg.n_x
    h = 1.0 / n
    a = diffusion_coefficient((np.arange(n) + 0.5) * h, xi)
    if np.any(a <= 0):
        raise ValueError("diffusion coefficient is not positive on the grid")
    # unknowns u_1 .. u_{n-1}
    bands = np.zeros((3, n - 1))
    bands[1] = a[:-1] + a[1:]
    bands[0, 1:] = -a[1:-1]
    bands[2, :-1] = -a[1:-1]
    u = solve_banded((1, 1), bands, np.full(n - 1, 2.0 * h * h))
    return float(u[int(round(cfg.x_star * n)) - 1])


def eval_diffusion(xi, cfg: DiffusionConfig = DiffusionConfig()):
    x, single = _points(xi, N_MODES)
    out = np.array([solve_diffusion(row, cfg) for row in x])
    return float(out[0]) if single else out


@dataclass(frozen=True)
class GroundTruth:
    mode: str
    coefficients: Optional[np.ndarray] = None
    points: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None


@dataclass(frozen=True)
class BenchmarkProblem:
    name: str
    dim: int
    order: int
    evaluator: Callable
    mode: str
    family: Family = Family.LEGENDRE
    description: str = ""
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)

    def basis(self) -> Basis:
        return Basis.total_degree(self.family, self.dim, self.order)

    def evaluate(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.mode == VALIDATION:
            return eval_diffusion(pts, self.diffusion)
        return np.asarray(self.evaluator(pts), dtype=float)


def _separable_highd_lowk():
    identity = lambda x: x  # noqa: E731
    return [(1.0, {i: identity, i + 1: identity}) for i in range(19)]


PROBLEMS = {
    "lowd_highk": BenchmarkProblem(
        "lowd_highk", 2, 20, eval_lowd_highk, EXACT, description="sparse 20th-order expansion in 2 variables"
    ),
    "highd_lowk": BenchmarkProblem(
        "highd_lowk", 20, 2, eval_highd_lowk, EXACT, description="sparse 2nd-order expansion in 20 variables"
    ),
    "rosenbrock6": BenchmarkProblem(
        "rosenbrock6", 6, 4, eval_rosenbrock6, EXACT, description="6-D generalized Rosenbrock, order-4 basis"
    ),
    "diffusion": BenchmarkProblem(
        "diffusion", 10, 3, eval_diffusion, VALIDATION, description="u(0.5) of a 1-D random diffusion problem"
    ),
}
_ALIASES = {"1": "lowd_highk", "2": "highd_lowk", "3": "rosenbrock6", "4": "diffusion", "rosenbrock": "rosenbrock6"}


def get_problem(name, n_x: Optional[int] = None) -> BenchmarkProblem:
    key = str(name).strip().lower()
    key = _ALIASES.get(key, key)
    if key not in PROBLEMS:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}")
    problem = PROBLEMS[key]
    if n_x is not None and problem.mode == VALIDATION:
        problem = BenchmarkProblem(**{**problem.__dict__, "diffusion": DiffusionConfig(n_x=int(n_x))})
    return problem


def ground_truth(problem: BenchmarkProblem, cache_dir=None, seed: int = VALIDATION_SEED) -> GroundTruth:
    """Exact coefficients (problems 1-3) or a validation set (diffusion)."""
    basis = problem.basis()
    if problem.name == "highd_lowk":
        c = quadrature_project_separable(basis, _separable_highd_lowk(), level=problem.order + 1)
        return GroundTruth(EXACT, coefficients=_clean(c))
    if problem.mode == EXACT:
        # polynomial of degree <= order: level (2 * order) / 2 + 1 points are exact
        c = quadrature_project(basis, problem.evaluator, level=problem.order + 1)
        return GroundTruth(EXACT, coefficients=_clean(c))
    return validation_set(problem, cache_dir=cache_dir, seed=seed)


def _clean(c, atol=1e-12):
    c = np.array(c, dtype=float)
    c[np.abs(c) < atol * max(1.0, np.abs(c).max())] = 0.0
    return c


def validation_set(problem: BenchmarkProblem, n: int = VALIDATION_SIZE, seed: int = VALIDATION_SEED, cache_dir=None):
    path = None
    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)
        path = os.path.join(cache_dir, f"validation_{problem.name}_seed{seed}_nx{problem.diffusion.n_x}_n{n}.csv")
        if os.path.exists(path):
            data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
            return GroundTruth(VALIDATION, points=data[:, :-1], values=data[:, -1])
    rng = substream(seed, "validation", n)
    points = draw_base(problem.family, n, problem.dim, rng)
    values = problem.evaluate(points)
    if path is not None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"xi_{i + 1}" for i in range(problem.dim)] + ["qoi"])
            for p, v in zip(points, values):
                writer.writerow([repr(float(t)) for t in p] + [repr(float(v))])
    return GroundTruth(VALIDATION, points=points, values=values)
