"""Sparse polynomial chaos expansions from compressive samples, with greedy
near-optimal sample selection."""

__version__ = "0.1.0"

from .benchmarks import PROBLEMS, DiffusionConfig, get_problem, ground_truth, solve_diffusion
from .greedy import SelectionResult, near_optimal_select, utopia_distance
from .matrix import (
    CorrelationMetrics,
    GramState,
    MeasurementMatrix,
    assemble,
    avg_cross_correlation,
    correlation_metrics,
    mutual_coherence,
    spark_lower_bound,
    t_averaged_coherence,
)
from .multiindex import MultiIndexSet, cardinality, total_degree_set
from .orthopoly import Basis, Family, quadrature_project
from .sampling import McmcConfig, SampleEnsemble, build_pool, coherence_optimal_sample, standard_sample, substream
from .solver import RecoveryResult, RecoverySpec, SolverTolerances, recover, recover_weighted

__all__ = [
    "PROBLEMS",
    "Basis",
    "CorrelationMetrics",
    "DiffusionConfig",
    "Family",
    "GramState",
    "McmcConfig",
    "MeasurementMatrix",
    "MultiIndexSet",
    "RecoveryResult",
    "RecoverySpec",
    "SampleEnsemble",
    "SelectionResult",
    "SolverTolerances",
    "assemble",
    "avg_cross_correlation",
    "build_pool",
    "cardinality",
    "coherence_optimal_sample",
    "correlation_metrics",
    "get_problem",
    "ground_truth",
    "mutual_coherence",
    "near_optimal_select",
    "quadrature_project",
    "recover",
    "recover_weighted",
    "solve_diffusion",
    "spark_lower_bound",
    "standard_sample",
    "substream",
    "t_averaged_coherence",
    "total_degree_set",
    "utopia_distance",
]
