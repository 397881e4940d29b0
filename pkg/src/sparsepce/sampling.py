"""Sample ensembles: standard (i.i.d. from the input measure) and
coherence-optimal (Markov chain targeting ``rho * B^2``), plus the candidate
pools used by the greedy selector.

Random streams
--------------
Every random draw comes from :func:`substream`, which maps a master seed, a
purpose label and integer keys (sample size, trial index, ...) to an
independent ``numpy.random.Generator``. The mapping is
``SeedSequence(entropy=master, spawn_key=(crc32(purpose), *keys))`` feeding a
PCG64 bit generator, so streams for different keys never overlap and adding
trials does not perturb existing ones.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .orthopoly import Basis, Family

STANDARD = "standard"
COHERENCE_OPTIMAL = "coherence-optimal"
NEAR_OPTIMAL = "near-optimal"
STRATEGIES = (STANDARD, COHERENCE_OPTIMAL, NEAR_OPTIMAL)

_CHUNK = 20_000


def parse_strategy(name: str) -> str:
    key = str(name).strip().lower().replace("_", "-")
    aliases = {
        "standard": STANDARD,
        "std": STANDARD,
        "random": STANDARD,
        "coherence-optimal": COHERENCE_OPTIMAL,
        "coh-opt": COHERENCE_OPTIMAL,
        "coh": COHERENCE_OPTIMAL,
        "coherence": COHERENCE_OPTIMAL,
        "near-optimal": NEAR_OPTIMAL,
        "near-opt": NEAR_OPTIMAL,
        "near": NEAR_OPTIMAL,
        "greedy": NEAR_OPTIMAL,
    }
    try:
        return aliases[key]
    except KeyError:
        raise ValueError(f"unknown sampling strategy {name!r}; expected one of {STRATEGIES}") from None


def substream(master_seed: int, purpose: str, *keys: int) -> np.random.Generator:
    """Independent generator for ``(master_seed, purpose, *keys)``."""
    tag = zlib.crc32(purpose.encode("utf-8"))
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(tag, *(int(k) for k in keys)))
    return np.random.Generator(np.random.PCG64(ss))


def _generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def _seed_tag(seed):
    return None if isinstance(seed, np.random.Generator) else int(seed)


@dataclass(frozen=True)
class McmcConfig:
    """Independence Metropolis-Hastings settings.

    ``thinning=None`` means one retained draw every ``dim`` steps.
    """

    burn_in: int = 1000
    thinning: Optional[int] = None

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.thinning is not None and self.thinning < 1:
            raise ValueError("thinning must be >= 1")

    def resolved_thinning(self, dim: int) -> int:
        return int(self.thinning) if self.thinning is not None else max(1, int(dim))


@dataclass(frozen=True)
class SampleEnsemble:
    points: np.ndarray
    weights: np.ndarray
    strategy: str
    family: Family
    seed: Optional[int] = None
    acceptance_rate: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if points.shape[0] < 1:
            raise ValueError("an ensemble needs at least one point")
        if weights.shape[0] != points.shape[0]:
            raise ValueError("one weight per point required")
        if np.any(weights <= 0) or np.any(weights > 1.0 + 1e-15):
            raise ValueError("weights must lie in (0, 1]")
        family = Family.parse(self.family)
        if family is Family.LEGENDRE and np.any(np.abs(points) > 1.0):
            raise ValueError("Legendre ensembles must lie in [-1, 1]^d")
        points.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "family", family)

    @property
    def M(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, indices, strategy: Optional[str] = None) -> "SampleEnsemble":
        idx = np.asarray(indices, dtype=np.int64)
        return SampleEnsemble(
            self.points[idx], self.weights[idx], strategy or self.strategy, self.family, self.seed
        )


def draw_base(family, n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. draws from the product input measure."""
    if Family.parse(family) is Family.LEGENDRE:
        return rng.uniform(-1.0, 1.0, size=(n, d))
    return rng.standard_normal((n, d))


def standard_sample(basis: Basis, M: int, seed) -> SampleEnsemble:
    if M < 1:
        raise ValueError("M must be >= 1")
    rng = _generator(seed)
    points = draw_base(basis.family, int(M), basis.dim, rng)
    return SampleEnsemble(points, np.ones(int(M)), STANDARD, basis.family, _seed_tag(seed))


def coherence_optimal_sample(
    basis: Basis, M: int, seed, cfg: McmcConfig = McmcConfig(), strategy: str = COHERENCE_OPTIMAL
) -> SampleEnsemble:
    """Draw from the density proportional to ``rho(xi) * B(xi)^2``.

    Independence sampler: proposals come from ``rho`` itself, so the
    acceptance probability reduces to ``min(1, B(xi')^2 / B(xi)^2)``. The
    first ``burn_in`` states are discarded, then every ``thinning``-th state
    is kept. Weights are ``1 / B``.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    rng = _generator(seed)
    M = int(M)
    thin = cfg.resolved_thinning(basis.dim)
    n_steps = cfg.burn_in + M * thin

    current = draw_base(basis.family, 1, basis.dim, rng)[0]
    current_b2 = float(basis.envelope(current[None, :])[0]) ** 2
    points = np.empty((M, basis.dim))
    env = np.empty(M)
    kept = 0
    accepted = 0
    step = 0
    while step < n_steps:
        n = min(_CHUNK, n_steps - step)
        proposals = draw_base(basis.family, n, basis.dim, rng)
        b2 = basis.envelope(proposals) ** 2
        u = rng.random(n)
        for i in range(n):
            if u[i] * current_b2 < b2[i]:
                current = proposals[i]
                current_b2 = b2[i]
                accepted += 1
            step += 1
            if step > cfg.burn_in and (step - cfg.burn_in) % thin == 0:
                points[kept] = current
                env[kept] = np.sqrt(current_b2)
                kept += 1
    assert kept == M
    return SampleEnsemble(
        points, 1.0 / env, strategy, basis.family, _seed_tag(seed), acceptance_rate=accepted / n_steps
    )


def build_pool(basis: Basis, M_p: int, seed, cfg: McmcConfig = McmcConfig()) -> SampleEnsemble:
    """Coherence-optimal candidate pool for the greedy selector."""
    return coherence_optimal_sample(basis, M_p, seed, cfg)


def draw(strategy: str, basis: Basis, M: int, seed, cfg: McmcConfig = McmcConfig()) -> SampleEnsemble:
    strategy = parse_strategy(strategy)
    if strategy == STANDARD:
        return standard_sample(basis, M, seed)
    if strategy == COHERENCE_OPTIMAL:
        return coherence_optimal_sample(basis, M, seed, cfg)
    raise ValueError("near-optimal ensembles are produced by greedy.near_optimal_select")


# -- persistence ------------------------------------------------------------


def write_ensemble_csv(path, ensemble: SampleEnsemble) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"xi_{i + 1}" for i in range(ensemble.dim)] + ["weight"])
        for point, w in zip(ensemble.points, ensemble.weights):
            writer.writerow([repr(float(v)) for v in point] + [repr(float(w))])


def read_ensemble_csv(path, family, strategy: str = "file") -> SampleEnsemble:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty ensemble file")
    header, body = rows[0], rows[1:]
    if not header or header[-1].strip() != "weight":
        raise ValueError(f"{path}: expected columns xi_1..xi_d, weight")
    data = np.array([[float(v) for v in row] for row in body if row], dtype=float)
    if data.size == 0:
        raise ValueError(f"{path}: no samples")
    return SampleEnsemble(data[:, :-1], data[:, -1], strategy, family)


def save_pool(path, ensemble: SampleEnsemble, order: int) -> None:
    """Binary pool cache (``.npz``) with a (family, d, k, M, seed) header."""
    header = np.array(
        [ensemble.dim, order, ensemble.M, -1 if ensemble.seed is None else ensemble.seed], dtype=np.int64
    )
    with open(path, "wb") as fh:
        np.savez(
            fh,
            family=np.array(ensemble.family.value),
            header=header,
            strategy=np.array(ensemble.strategy),
            points=ensemble.points,
            weights=ensemble.weights,
        )


def load_pool(path, expect: Optional[dict] = None) -> tuple[SampleEnsemble, dict]:
    """Load a pool cache; ``expect`` entries (family, d, k, M, seed) must match."""
    with np.load(path, allow_pickle=False) as data:
        d, k, M, seed = (int(v) for v in data["header"])
        meta = {"family": str(data["family"]), "d": d, "k": k, "M": M, "seed": None if seed < 0 else seed}
        ens = SampleEnsemble(data["points"], data["weights"], str(data["strategy"]), meta["family"], meta["seed"])
    for key, value in (expect or {}).items():
        want = Family.parse(value).value if key == "family" else value
        if meta[key] != want:
            raise ValueError(f"pool cache {path}: {key}={meta[key]!r}, expected {want!r}")
    return ens, meta
