"""Few solutions for many objectives: set scalarizations, baselines and benchmarks."""

from .core import (
    ConfigurationError,
    Dominance,
    FunctionProblem,
    ObjectiveMatrix,
    Problem,
    Schedule,
    SmoothingConfig,
    SolutionSet,
    dominates,
    evaluate_matrix,
    uniform_preference,
)
from .estimator import FewForManyOptimizer
from .metrics import RunRecord, min_norm_convex_combination, per_objective_best, wilcoxon_rank_sum, worst_and_average
from .optimize import DivergenceError, Method, OptimizerConfig, run_method
from .problems import make_problem

__all__ = [
    "ConfigurationError",
    "DivergenceError",
    "Dominance",
    "FewForManyOptimizer",
    "FunctionProblem",
    "Method",
    "ObjectiveMatrix",
    "OptimizerConfig",
    "Problem",
    "RunRecord",
    "Schedule",
    "SmoothingConfig",
    "SolutionSet",
    "dominates",
    "evaluate_matrix",
    "make_problem",
    "min_norm_convex_combination",
    "per_objective_best",
    "run_method",
    "uniform_preference",
    "wilcoxon_rank_sum",
    "worst_and_average",
]
