"""Cost-aware allocation of a sampling budget across heterogeneous data sources."""

from .errors import (
    BudgetTooSmallError,
    BudgetwiseError,
    DimensionError,
    DomainError,
    InfeasibleError,
    InsufficientDataError,
    InvalidDistributionError,
    InvalidPlanError,
    InvalidWeightsError,
    ResourceLimitError,
)
from .model import (
    GroupDist,
    ProblemInstance,
    SamplingPlan,
    SourceSpec,
    average_cost,
    chi2_discrepancy,
    effective_sample_size,
    is_feasible,
    mixture,
    total_cost,
)
from .planner import (
    BASELINES,
    PlanResult,
    baseline_plan,
    brute_force_plan,
    solve_group_means_plan,
    solve_optimal_plan,
)

__version__ = "0.1.0"

__all__ = [
    "BASELINES", "BudgetTooSmallError", "BudgetwiseError", "DimensionError", "DomainError",
    "GroupDist", "InfeasibleError", "InsufficientDataError", "InvalidDistributionError",
    "InvalidPlanError", "InvalidWeightsError", "PlanResult", "ProblemInstance",
    "ResourceLimitError", "SamplingPlan", "SourceSpec",
    "average_cost", "baseline_plan", "brute_force_plan", "chi2_discrepancy",
    "effective_sample_size", "is_feasible", "mixture", "solve_group_means_plan",
    "solve_optimal_plan", "total_cost",
]
