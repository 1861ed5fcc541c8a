"""Property suites behind ``budgetwise verify``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InfeasibleError
from ..estimators import post_stratified
from ..model import GroupDist, ProblemInstance, SourceSpec, effective_sample_size
from ..planner import brute_force_plan, solve_optimal_plan
from ..simkit import MeanModel, SourcePool, get_setting, make_target, substream
from ..theory import truncnorm_integral

INTEGRAL_BOUND = 8.0
ORACLE_RATIO = 0.95
CONSISTENCY_BAND = (0.85, 1.15)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def integral_suite(points: int = 50) -> list[Check]:
    """The integral stays below 8 on a log grid and behaves like 2C near zero."""
    checks = []
    for c in np.logspace(-3, 2, points):
        value = truncnorm_integral(c)
        checks.append(Check(f"integral C={c:.4g}", value <= INTEGRAL_BOUND, f"value={value:.10g}"))
    small = truncnorm_integral(1e-3) / 1e-3
    checks.append(Check("integral slope at C=0.001", 1.9 <= small <= 2.1, f"value/C={small:.10g}"))
    return checks


def random_instance(rng: np.random.Generator, max_sources: int = 3, max_groups: int = 4,
                    max_cost: int = 3, max_budget: int = 30) -> ProblemInstance:
    """A small feasible instance; sources may have zero entries, costs are integers."""
    while True:
        m = int(rng.integers(1, max_sources + 1))
        k = int(rng.integers(2, max_groups + 1))
        dists = rng.dirichlet(np.ones(k), size=m)
        dists[rng.random((m, k)) < 0.25] = 0.0
        if np.any(dists.sum(axis=1) == 0):
            continue
        costs = rng.integers(1, max_cost + 1, size=m)
        target = rng.dirichlet(np.ones(k))
        target[rng.random(k) < 0.2] = 0.0
        if target.sum() == 0:
            continue
        budget = int(rng.integers(costs.min(), max_budget + 1))
        sources = [SourceSpec(GroupDist(q / q.sum()), float(c)) for q, c in zip(dists, costs)]
        try:
            return ProblemInstance(sources, GroupDist(target / target.sum()), float(budget))
        except InfeasibleError:
            continue


def oracle_suite(instances: int = 20, seed: int = 7) -> list[Check]:
    """Rounded convex solve against exhaustive search on small instances."""
    rng = np.random.default_rng(seed)
    checks = []
    for i in range(instances):
        problem = random_instance(rng)
        best = brute_force_plan(problem).objective
        got = solve_optimal_plan(problem).objective
        ratio = got / best if best > 0 else 1.0
        checks.append(Check(
            f"oracle instance {i + 1} (M={problem.m}, K={problem.k}, B={problem.budget:g})",
            ratio >= ORACLE_RATIO, f"n_eff={got:.6g} brute={best:.6g} ratio={ratio:.4f}",
        ))
    return checks


def consistency_ratio(replications: int = 2000, seed: int = 20240601, sigma2: float = 5.0,
                      budget: float = 500.0) -> tuple[float, float]:
    """Empirical MSE of the post-stratified mean over ``sigma2 / n_eff``, and its SE.

    Setting 1, uniform target, optimal plan.
    """
    setting = get_setting("setting1")
    problem = setting.instance(make_target("uniform", setting.k), budget)
    plan = solve_optimal_plan(problem).plan
    mu = substream(seed, 0).normal(0.0, math.sqrt(10.0), size=problem.k)
    model = MeanModel(mu, sigma2, float(np.abs(mu).max()))
    theta = float(problem.target.probs @ mu)
    errors = np.empty(replications)
    for r in range(replications):
        data = SourcePool.mean(plan.counts, problem, model, seed, (1, r)).take(plan)
        errors[r] = (post_stratified(data, problem.target) - theta) ** 2
    scale = sigma2 / effective_sample_size(plan, problem.target, problem)
    return float(errors.mean() / scale), float(errors.std(ddof=1) / math.sqrt(replications) / scale)


def consistency_suite(replications: int = 2000, seed: int = 20240601) -> list[Check]:
    ratio, se = consistency_ratio(replications, seed)
    lo, hi = CONSISTENCY_BAND
    return [Check("post-stratified MSE * n_eff / sigma2", lo <= ratio <= hi,
                  f"ratio={ratio:.4f} se={se:.4f} replications={replications}")]


SUITES = {"integral": integral_suite, "oracle": oracle_suite, "consistency": consistency_suite}
