"""Group distributions, problem instances and the effective sample size.

A *plan* buys ``n_m`` samples from source ``m``; the group identities of the
resulting pooled sample follow the mixture ``qbar = sum_m n_m q_m / sum_m n_m``.
How well that pool represents a target ``q`` is measured by the chi-square
discrepancy ``d(q || qbar) = sum_z q(z)^2 / qbar(z)``, and the effective
sample size is ``n_total / d``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import (
    DimensionError,
    InfeasibleError,
    InvalidDistributionError,
    InvalidPlanError,
)

PROB_TOL = 1e-9


def exact(x: float) -> Fraction:
    """Rational value of the shortest decimal repr of ``x`` (0.02 -> 1/50)."""
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class GroupDist:
    """Probability vector over K groups (0-based indices internally)."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).reshape(-1)
        if p.size == 0:
            raise InvalidDistributionError("distribution has no groups")
        if not np.all(np.isfinite(p)):
            raise InvalidDistributionError("distribution has non-finite entries")
        if np.any(p < 0):
            raise InvalidDistributionError(f"negative probability in {p.tolist()}")
        total = p.sum()
        if abs(total - 1.0) > PROB_TOL:
            raise InvalidDistributionError(f"probabilities sum to {float(total)!r}, not 1")
        p = p / total
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def k(self) -> int:
        return self.probs.size

    @classmethod
    def uniform(cls, k: int) -> "GroupDist":
        return cls(np.full(k, 1.0 / k))

    def __eq__(self, other):
        if not isinstance(other, GroupDist):
            return NotImplemented
        return self.k == other.k and bool(np.array_equal(self.probs, other.probs))

    def __hash__(self):
        return hash(self.probs.tobytes())


@dataclass(frozen=True)
class SourceSpec:
    dist: GroupDist
    cost: float

    def __post_init__(self):
        if not isinstance(self.dist, GroupDist):
            object.__setattr__(self, "dist", GroupDist(self.dist))
        cost = float(self.cost)
        if not np.isfinite(cost) or cost <= 0:
            raise InvalidDistributionError(f"source cost must be positive, got {self.cost!r}")
        object.__setattr__(self, "cost", cost)


def check_coverage(sources: Sequence[SourceSpec], target: GroupDist) -> None:
    """Raise InfeasibleError if a target group is supplied by no source."""
    supply = np.max([s.dist.probs for s in sources], axis=0)
    missing = np.flatnonzero((target.probs > 0) & (supply <= 0))
    if missing.size:
        groups = ", ".join(str(z + 1) for z in missing)
        raise InfeasibleError(f"target groups {groups} are not reachable from any source")


@dataclass(frozen=True)
class ProblemInstance:
    sources: tuple[SourceSpec, ...]
    target: GroupDist
    budget: float
    _exact_costs: tuple[Fraction, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sources = tuple(self.sources)
        if not sources:
            raise InvalidDistributionError("at least one source is required")
        target = self.target if isinstance(self.target, GroupDist) else GroupDist(self.target)
        for m, s in enumerate(sources):
            if s.dist.k != target.k:
                raise DimensionError(
                    f"source {m + 1} has {s.dist.k} groups but target has {target.k}"
                )
        budget = float(self.budget)
        if not np.isfinite(budget) or budget <= 0:
            raise InvalidDistributionError(f"budget must be positive, got {self.budget!r}")
        check_coverage(sources, target)
        object.__setattr__(self, "sources", sources)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "budget", budget)
        object.__setattr__(self, "_exact_costs", tuple(exact(s.cost) for s in sources))

    @classmethod
    def from_arrays(cls, dists, costs, target, budget) -> "ProblemInstance":
        sources = tuple(SourceSpec(GroupDist(q), c) for q, c in zip(dists, costs))
        if len(sources) != len(costs) or len(sources) != len(dists):
            raise DimensionError("dists and costs must have the same length")
        return cls(sources, GroupDist(target), budget)

    @property
    def m(self) -> int:
        return len(self.sources)

    @property
    def k(self) -> int:
        return self.target.k

    @property
    def costs(self) -> np.ndarray:
        return np.array([s.cost for s in self.sources])

    @property
    def source_matrix(self) -> np.ndarray:
        """(M, K) array whose row m is the group distribution of source m."""
        return np.vstack([s.dist.probs for s in self.sources])

    @property
    def exact_costs(self) -> tuple[Fraction, ...]:
        return self._exact_costs

    @property
    def exact_budget(self) -> Fraction:
        return exact(self.budget)

    def with_budget(self, budget: float) -> "ProblemInstance":
        return ProblemInstance(self.sources, self.target, budget)

    def with_target(self, target: GroupDist) -> "ProblemInstance":
        return ProblemInstance(self.sources, target, self.budget)


@dataclass(frozen=True)
class SamplingPlan:
    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in np.asarray(self.counts).reshape(-1))
        if any(c < 0 for c in counts):
            raise InvalidPlanError(f"negative sample count in {counts}")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return sum(self.counts)

    def as_array(self) -> np.ndarray:
        return np.array(self.counts, dtype=float)


def _check_plan(plan: SamplingPlan, problem: ProblemInstance) -> None:
    if len(plan.counts) != problem.m:
        raise DimensionError(f"plan has {len(plan.counts)} entries but there are {problem.m} sources")
    if plan.total < 1:
        raise InvalidPlanError("plan collects no samples")


def total_cost(plan: SamplingPlan, problem: ProblemInstance) -> float:
    return float(exact_total_cost(plan, problem))


def exact_total_cost(plan: SamplingPlan, problem: ProblemInstance) -> Fraction:
    return sum((c * n for c, n in zip(problem.exact_costs, plan.counts)), Fraction(0))


def is_feasible(plan: SamplingPlan, problem: ProblemInstance) -> bool:
    return exact_total_cost(plan, problem) <= problem.exact_budget


def average_cost(plan: SamplingPlan, problem: ProblemInstance) -> float:
    _check_plan(plan, problem)
    return total_cost(plan, problem) / plan.total


def mixture(plan: SamplingPlan, problem: ProblemInstance) -> GroupDist:
    """Group distribution of the pooled sample collected under ``plan``."""
    _check_plan(plan, problem)
    n = plan.as_array()
    return GroupDist(n @ problem.source_matrix / n.sum())


def _check_k(a: GroupDist, b: GroupDist) -> None:
    if a.k != b.k:
        raise DimensionError(f"distributions have {a.k} and {b.k} groups")


def chi2_discrepancy(a: GroupDist, b: GroupDist) -> float:
    """``sum_z a(z)^2 / b(z)``; groups with a(z)=0 contribute nothing.

    Returns ``inf`` when ``a`` puts mass where ``b`` has none.
    """
    _check_k(a, b)
    support = a.probs > 0
    if np.any(b.probs[support] <= 0):
        return float("inf")
    return float(np.sum(a.probs[support] ** 2 / b.probs[support]))


def effective_sample_size(plan: SamplingPlan, target: GroupDist, problem: ProblemInstance) -> float:
    d = chi2_discrepancy(target, mixture(plan, problem))
    if np.isinf(d):
        return 0.0
    return plan.total / d


def inverse_neff(counts, target: GroupDist, problem: ProblemInstance) -> float:
    """``1 / n_eff`` as a function of real-valued counts.

    Equals ``sum_z q(z)^2 / sum_m n_m q_m(z)``, which is convex in the counts.
    """
    n = np.asarray(counts, dtype=float)
    supply = n @ problem.source_matrix
    support = target.probs > 0
    if np.any(supply[support] <= 0):
        return float("inf")
    return float(np.sum(target.probs[support] ** 2 / supply[support]))


def tv_distance(a: GroupDist, b: GroupDist) -> float:
    _check_k(a, b)
    return 0.5 * float(np.abs(a.probs - b.probs).sum())
