"""Trial ensembles: sample, assemble, recover, score.

Every (M, trial) cell draws from its own substream of the master seed, so the
records do not depend on worker count or completion order. Near-optimal runs
select once per trial up to the largest M and read smaller designs off the
selection prefix.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np

from .benchmarks import EXACT, VALIDATION, BenchmarkProblem, GroundTruth, get_problem, ground_truth
from .greedy import near_optimal_select
from .matrix import assemble, correlation_metrics
from .sampling import (
    NEAR_OPTIMAL,
    STANDARD,
    McmcConfig,
    build_pool,
    coherence_optimal_sample,
    load_pool,
    parse_strategy,
    save_pool,
    standard_sample,
    substream,
)
from .solver import RecoverySpec, SolverTolerances, recover

PER_TRIAL = "per-trial"
SHARED = "shared"
POOL_MODES = (PER_TRIAL, SHARED)

ENV_SEED = "SPARSEPCE_SEED"
ENV_WORKERS = "SPARSEPCE_WORKERS"

DEFAULT_THRESHOLD = {EXACT: 1e-7, VALIDATION: 1e-4}

CSV_COLUMNS = (
    "problem",
    "strategy",
    "M",
    "trial",
    "relative_error",
    "mu",
    "gamma",
    "iterations",
    "converged",
    "status",
    "wall_time",
)


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configuration."""


# -- error metrics ----------------------------------------------------------


def _ratio(num: np.ndarray, den: np.ndarray, what: str) -> float:
    num = np.asarray(num, dtype=float).reshape(-1)
    den = np.asarray(den, dtype=float).reshape(-1)
    if num.shape != den.shape:
        raise ValueError(f"length mismatch: {num.shape[0]} vs {den.shape[0]}")
    if den.size == 0:
        raise ValueError(f"{what} is empty")
    scale = np.linalg.norm(den)
    if scale == 0:
        raise ValueError(f"{what} has zero norm")
    return float(np.linalg.norm(num - den) / scale)


def relative_coeff_error(c, c_exact) -> float:
    return _ratio(c, c_exact, "exact coefficient vector")


def relative_validation_error(predicted, exact) -> float:
    return _ratio(predicted, exact, "exact validation vector")


def success_rate(errors: Sequence[float], threshold: float) -> float:
    """Fraction of ``errors`` strictly below ``threshold``; ``inf`` counts as failure."""
    errors = np.asarray(list(errors), dtype=float)
    if errors.size == 0:
        raise ValueError("success rate of an empty list")
    return float(np.mean(errors < threshold))


@dataclass(frozen=True)
class QuantileSummary:
    q25: float
    median: float
    q75: float
    mean: float

    def __iter__(self):
        return iter((self.q25, self.median, self.q75, self.mean))


def quantile_summary(values: Sequence[float]) -> QuantileSummary:
    """Quartiles by linear interpolation between order statistics, plus the mean."""
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        raise ValueError("quantile summary of an empty list")
    q25, q50, q75 = np.quantile(v, [0.25, 0.5, 0.75], method="linear")
    return QuantileSummary(float(q25), float(q50), float(q75), float(v.mean()))


# -- configuration ----------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    strategy: str
    m_grid: tuple
    trials: int = 100
    seed: int = 0
    pool_size: int = 10_000
    pool_mode: str = PER_TRIAL
    burn_in: int = 1000
    thinning: Optional[int] = None
    feasibility: float = 1e-9
    optimality: float = 1e-9
    max_iterations: int = 10_000
    threshold: Optional[float] = None
    n_x: Optional[int] = None
    workers: int = 1
    record_timing: bool = False
    pool_cache: Optional[str] = None

    def __post_init__(self):
        try:
            problem = get_problem(self.problem).name
            strategy = parse_strategy(self.strategy)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        grid = tuple(int(m) for m in self.m_grid)
        if not grid:
            raise ConfigError("m_grid must not be empty")
        if any(m < 1 for m in grid):
            raise ConfigError("sample sizes must be >= 1")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("m_grid must be strictly increasing")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.pool_mode not in POOL_MODES:
            raise ConfigError(f"pool_mode must be one of {POOL_MODES}")
        if strategy == NEAR_OPTIMAL and self.pool_size < grid[-1]:
            raise ConfigError("pool_size must be at least the largest M")
        if self.threshold is not None and not self.threshold > 0:
            raise ConfigError("threshold must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            McmcConfig(self.burn_in, self.thinning)
            SolverTolerances(self.feasibility, self.optimality, self.max_iterations)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        object.__setattr__(self, "problem", problem)
        object.__setattr__(self, "strategy", strategy)
        object.__setattr__(self, "m_grid", grid)

    @property
    def mcmc(self) -> McmcConfig:
        return McmcConfig(self.burn_in, self.thinning)

    @property
    def tolerances(self) -> SolverTolerances:
        return SolverTolerances(self.feasibility, self.optimality, self.max_iterations)

    def benchmark(self) -> BenchmarkProblem:
        return get_problem(self.problem, n_x=self.n_x)

    def resolved_threshold(self) -> float:
        return self.threshold if self.threshold is not None else DEFAULT_THRESHOLD[self.benchmark().mode]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["m_grid"] = list(self.m_grid)
        out["threshold"] = self.resolved_threshold()
        return out


_INT_KEYS = {"trials", "seed", "pool_size", "burn_in", "thinning", "max_iterations", "n_x", "workers"}
_FLOAT_KEYS = {"feasibility", "optimality", "threshold"}
_BOOL_KEYS = {"record_timing"}
_KEY_ALIASES = {"m": "m_grid", "m_values": "m_grid", "pool": "pool_size", "pool_rerandomization": "pool_mode"}


def _parse_value(key: str, raw: str):
    if key == "m_grid":
        return tuple(int(v) for v in raw.replace(",", " ").split())
    if raw.lower() in ("", "none", "default"):
        return None
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _BOOL_KEYS:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    return raw


def parse_config_text(text: str, env: Optional[dict] = None) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    ``SPARSEPCE_SEED`` and ``SPARSEPCE_WORKERS`` in ``env`` (default
    ``os.environ``) override the file.
    """
    env = os.environ if env is None else env
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        key = key.lower().replace("-", "_")
        key = _KEY_ALIASES.get(key, key)
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _parse_value(key, raw)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    for var, key in ((ENV_SEED, "seed"), (ENV_WORKERS, "workers")):
        if env.get(var, "").strip():
            try:
                values[key] = int(env[var])
            except ValueError:
                raise ConfigError(f"{var} must be an integer") from None
    for key in ("problem", "strategy", "m_grid"):
        if values.get(key) is None:
            raise ConfigError(f"missing required key {key!r}")
    values = {k: v for k, v in values.items() if v is not None or k in ("thinning", "threshold", "n_x", "pool_cache")}
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, env: Optional[dict] = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, env)


# -- records ----------------------------------------------------------------


@dataclass(frozen=True)
class TrialRecord:
    problem: str
    strategy: str
    M: int
    trial: int
    relative_error: float
    mu: float
    gamma: float
    iterations: int
    converged: bool
    status: str = ""
    wall_time: Optional[float] = None
    coefficients: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    selection: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.relative_error >= 0:
            raise ValueError("relative error must be non-negative")

    @property
    def failed(self) -> bool:
        return not math.isfinite(self.relative_error)

    def row(self) -> list:
        wall = "" if self.wall_time is None else repr(float(self.wall_time))
        return [
            self.problem,
            self.strategy,
            self.M,
            self.trial,
            repr(float(self.relative_error)),
            repr(float(self.mu)),
            repr(float(self.gamma)),
            self.iterations,
            int(self.converged),
            self.status,
            wall,
        ]


def records_to_csv(records: Sequence[TrialRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow(rec.row())
    return buf.getvalue()


def write_records(path, records: Sequence[TrialRecord], config: Optional[ExperimentConfig] = None) -> Optional[str]:
    """Write the CSV and, with ``config``, a ``<path>.json`` sidecar. Returns the sidecar path."""
    with open(path, "w", newline="") as fh:
        fh.write(records_to_csv(records))
    if config is None:
        return None
    sidecar = os.fspath(path) + ".json"
    with open(sidecar, "w") as fh:
        json.dump({"config": config.to_dict(), "columns": list(CSV_COLUMNS)}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sidecar


def read_records(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                TrialRecord(
                    row["problem"],
                    row["strategy"],
                    int(row["M"]),
                    int(row["trial"]),
                    float(row["relative_error"]),
                    float(row["mu"]),
                    float(row["gamma"]),
                    int(row["iterations"]),
                    bool(int(row["converged"])),
                    row["status"],
                    float(row["wall_time"]) if row["wall_time"] else None,
                )
            )
    return out


@dataclass(frozen=True)
class CellSummary:
    M: int
    trials: int
    failures: int
    error: Optional[QuantileSummary]
    success_rate: float
    mu_median: float
    gamma_median: float


def summarize(records: Sequence[TrialRecord], threshold: float) -> list:
    """Per-M statistics; failed trials are left out of the quantiles but count against success."""
    out = []
    for M in sorted({r.M for r in records}):
        cell = [r for r in records if r.M == M]
        errs = [r.relative_error for r in cell]
        finite = [e for e in errs if math.isfinite(e)]
        out.append(
            CellSummary(
                M,
                len(cell),
                len(cell) - len(finite),
                quantile_summary(finite) if finite else None,
                success_rate(errs, threshold),
                float(np.median([r.mu for r in cell])),
                float(np.median([r.gamma for r in cell])),
            )
        )
    return out


# -- trials -----------------------------------------------------------------


def _error(problem: BenchmarkProblem, basis, truth: GroundTruth, coefficients) -> float:
    if truth.mode == EXACT:
        return relative_coeff_error(coefficients, truth.coefficients)
    return relative_validation_error(basis.expand(coefficients, truth.points), truth.values)


def _solve(cfg, problem, basis, truth, ensemble, M, trial, started, selection=None) -> TrialRecord:
    weighted = ensemble.strategy != STANDARD
    matrix = assemble(ensemble, basis, apply_weights=weighted)
    metrics = correlation_metrics(matrix)
    data = problem.evaluate(ensemble.points)
    if weighted:
        data = data * ensemble.weights
    result = recover(RecoverySpec(matrix.entries, data, 0.0, cfg.tolerances))
    error = _error(problem, basis, truth, result.coefficients) if result.converged else math.inf
    wall = time.perf_counter() - started if cfg.record_timing else None
    return TrialRecord(
        problem.name,
        cfg.strategy,
        M,
        trial,
        error,
        metrics.mu,
        metrics.gamma,
        result.iterations,
        result.converged,
        result.status,
        wall,
        result.coefficients,
        selection,
    )


def _failed(cfg, M, trial, exc) -> TrialRecord:
    return TrialRecord(cfg.problem, cfg.strategy, M, trial, math.inf, math.nan, math.nan, 0, False, f"error: {exc}")


def _pool(cfg: ExperimentConfig, basis, trial: int):
    keys = (trial,) if cfg.pool_mode == PER_TRIAL else ()
    rng = substream(cfg.seed, "pool", *keys)
    if cfg.pool_cache is None:
        return build_pool(basis, cfg.pool_size, rng, cfg.mcmc)
    os.makedirs(cfg.pool_cache, exist_ok=True)
    tag = "shared" if cfg.pool_mode == SHARED else f"trial{trial}"
    mc = cfg.mcmc
    path = os.path.join(
        cfg.pool_cache,
        f"pool_{cfg.problem}_seed{cfg.seed}_{tag}_n{cfg.pool_size}_b{mc.burn_in}_t{mc.resolved_thinning(basis.dim)}.npz",
    )
    expect = {"family": basis.family, "d": basis.dim, "k": basis.order, "M": cfg.pool_size}
    if os.path.exists(path):
        return load_pool(path, expect)[0]
    pool = build_pool(basis, cfg.pool_size, rng, mc)
    save_pool(path, pool, basis.order)
    return pool


def _near_optimal_trial(cfg: ExperimentConfig, truth: GroundTruth, trial: int) -> list:
    started = time.perf_counter()
    problem = cfg.benchmark()
    basis = problem.basis()
    try:
        pool = _pool(cfg, basis, trial)
        selection = near_optimal_select(assemble(pool, basis), cfg.m_grid[-1], substream(cfg.seed, "first-row", trial))
    except Exception as exc:  # noqa: BLE001 - recorded, sweep continues
        return [_failed(cfg, M, trial, exc) for M in cfg.m_grid]
    out = []
    for M in cfg.m_grid:
        idx = selection.indices[:M]
        try:
            out.append(
                _solve(cfg, problem, basis, truth, pool.subset(idx, NEAR_OPTIMAL), M, trial, started, np.array(idx))
            )
        except Exception as exc:  # noqa: BLE001
            out.append(_failed(cfg, M, trial, exc))
    return out


def _random_trial(cfg: ExperimentConfig, truth: GroundTruth, M: int, trial: int) -> list:
    started = time.perf_counter()
    problem = cfg.benchmark()
    basis = problem.basis()
    try:
        rng = substream(cfg.seed, cfg.strategy, M, trial)
        if cfg.strategy == STANDARD:
            ensemble = standard_sample(basis, M, rng)
        else:
            ensemble = coherence_optimal_sample(basis, M, rng, cfg.mcmc)
        return [_solve(cfg, problem, basis, truth, ensemble, M, trial, started)]
    except Exception as exc:  # noqa: BLE001
        return [_failed(cfg, M, trial, exc)]


def _run_item(args):
    cfg, truth, item = args
    if cfg.strategy == NEAR_OPTIMAL:
        return _near_optimal_trial(cfg, truth, item)
    return _random_trial(cfg, truth, *item)


def run_experiment(cfg: ExperimentConfig, truth: Optional[GroundTruth] = None, cache_dir=None) -> list:
    """All TrialRecords of ``cfg``, ordered by (M, trial)."""
    if truth is None:
        truth = ground_truth(cfg.benchmark(), cache_dir=cache_dir)
    if cfg.strategy == NEAR_OPTIMAL:
        items = list(range(cfg.trials))
    else:
        items = [(M, t) for M in cfg.m_grid for t in range(cfg.trials)]
    jobs = [(cfg, truth, item) for item in items]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            batches = list(ex.map(_run_item, jobs))
    else:
        batches = [_run_item(job) for job in jobs]
    records = [rec for batch in batches for rec in batch]
    return sorted(records, key=lambda r: (r.M, r.trial))


def with_strategy(cfg: ExperimentConfig, strategy: str) -> ExperimentConfig:
    return replace(cfg, strategy=strategy)


__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "TrialRecord",
    "load_config",
    "parse_config_text",
    "quantile_summary",
    "read_records",
    "records_to_csv",
    "relative_coeff_error",
    "relative_validation_error",
    "run_experiment",
    "success_rate",
    "summarize",
    "write_records",
]
