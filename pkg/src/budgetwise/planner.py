"""Budget-feasible sampling plans.

The optimal plan maximizes the effective sample size subject to ``c @ n <= B``.
Writing ``v_m = c_m n_m / B`` (the share of budget spent on source m) turns the
relaxed problem into minimizing the convex function

    f(v) = sum_z q(z)^2 / sum_m v_m q_m(z) / c_m

over the probability simplex; ``B / f(v)`` is the relaxed effective sample
size. We solve it with projected gradient descent, round down, spend what is
left greedily and finish with a small swap search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import linprog

from .errors import BudgetTooSmallError, ResourceLimitError
from .model import (
    GroupDist,
    ProblemInstance,
    SamplingPlan,
    average_cost,
    check_coverage,
    effective_sample_size,
    total_cost,
)

BaselineKind = Literal["uniform", "inverse_cost", "nearest", "hybrid"]
BASELINES: tuple[str, ...] = ("uniform", "inverse_cost", "nearest", "hybrid")

WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True)
class PlanResult:
    plan: SamplingPlan
    objective: float
    continuous_weights: np.ndarray
    total_cost: float
    avg_cost: float
    method: str = "optimal"

    @property
    def counts(self) -> tuple[int, ...]:
        return self.plan.counts


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum(w) = 1} (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _budget_objective(v, per_cost, q2):
    s = v @ per_cost
    if np.any(s <= 0):
        return np.inf
    return float(np.sum(q2 / s))


def continuous_budget_shares(
    problem: ProblemInstance,
    target: GroupDist,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> np.ndarray:
    """Budget shares ``v`` minimizing the relaxed objective.

    Starts from equal shares, which is the same as ``n_m`` proportional to
    ``1 / c_m``.
    """
    support = target.probs > 0
    per_cost = problem.source_matrix[:, support] / problem.costs[:, None]
    q2 = target.probs[support] ** 2
    m = problem.m
    v = np.full(m, 1.0 / m)
    if m == 1:
        return v

    fv = _budget_objective(v, per_cost, q2)
    if not np.isfinite(fv):
        # Equal shares reach every group the sources cover, so this means
        # coverage failed upstream.
        raise BudgetTooSmallError("relaxed objective is infinite at the starting point")
    grad = -(per_cost @ (q2 / (v @ per_cost) ** 2))
    step = 1.0 / max(np.linalg.norm(grad), np.finfo(float).tiny)
    for _ in range(max_iter):
        while True:
            cand = project_to_simplex(v - step * grad)
            diff = cand - v
            fc = _budget_objective(cand, per_cost, q2)
            if fc <= fv + grad @ diff + (diff @ diff) / (2 * step):
                break
            step *= 0.5
            if step < 1e-300:
                return v
        rel = (fv - fc) / abs(fv)
        v, fv = cand, fc
        grad = -(per_cost @ (q2 / (v @ per_cost) ** 2))
        step *= 2.0
        if rel < tol:
            break
    return v


class _IntegerBudget:
    """Costs and budget scaled to integers, so feasibility checks are exact."""

    def __init__(self, problem: ProblemInstance):
        fracs = list(problem.exact_costs) + [problem.exact_budget]
        scale = 1
        for f in fracs:
            scale = scale * f.denominator // math.gcd(scale, f.denominator)
        self.costs = [int(c * scale) for c in problem.exact_costs]
        self.budget = int(problem.exact_budget * scale)

    def spent(self, counts) -> int:
        return sum(c * int(n) for c, n in zip(self.costs, counts))


class _Evaluator:
    """Vectorized n_eff evaluation for candidate count vectors."""

    def __init__(self, problem: ProblemInstance, target: GroupDist):
        self.support = target.probs > 0
        self.q = problem.source_matrix[:, self.support]
        self.q2 = target.probs[self.support] ** 2
        self.tmass = target.probs[self.support]

    def neff(self, supply) -> np.ndarray:
        supply = np.atleast_2d(supply)
        with np.errstate(divide="ignore"):
            inv = np.where(supply > 0, self.q2 / np.where(supply > 0, supply, 1.0), np.inf)
        total = inv.sum(axis=1)
        return np.where(np.isfinite(total), 1.0 / total, 0.0)

    def covered(self, supply) -> np.ndarray:
        supply = np.atleast_2d(supply)
        return (supply > 0) @ self.tmass

    def supply(self, counts) -> np.ndarray:
        return np.asarray(counts, dtype=float) @ self.q


def _floor_to_budget(real_counts: np.ndarray, ib: _IntegerBudget) -> list[int]:
    n = [int(math.floor(x)) for x in real_counts]
    # values like 499.9999999997 should round to 500 when it still fits
    for m, x in enumerate(real_counts):
        up = int(math.floor(x + 1e-9))
        if up > n[m]:
            trial = list(n)
            trial[m] = up
            if ib.spent(trial) <= ib.budget:
                n = trial
    while ib.spent(n) > ib.budget:
        m = max(range(len(n)), key=lambda j: (n[j] > 0, ib.costs[j]))
        n[m] -= 1
    return n


def _greedy_fill(counts: list[int], ib: _IntegerBudget, ev: _Evaluator, costs: np.ndarray) -> list[int]:
    """Buy one sample at a time where n_eff rises most per unit cost."""
    n = list(counts)
    residual = ib.budget - ib.spent(n)
    supply = ev.supply(n)
    while True:
        affordable = [m for m, c in enumerate(ib.costs) if c <= residual]
        if not affordable:
            return n
        cand_supply = supply[None, :] + ev.q[affordable]
        gains = (ev.neff(cand_supply) - ev.neff(supply)[0]) / costs[affordable]
        cover = ev.covered(cand_supply)
        best = affordable[0]
        best_key = (cover[0], gains[0])
        for i in range(1, len(affordable)):
            key = (cover[i], gains[i])
            if key > best_key:
                best, best_key = affordable[i], key
        n[best] += 1
        residual -= ib.costs[best]
        supply = supply + ev.q[best]


def _swap_search(counts: list[int], ib: _IntegerBudget, ev: _Evaluator, costs: np.ndarray,
                 max_rounds: int = 200) -> list[int]:
    """Hill-climb over single-sample moves between sources, refilling greedily."""
    n = list(counts)
    value = ev.neff(ev.supply(n))[0]
    for _ in range(max_rounds):
        best_n, best_val = None, value
        for i in range(len(n)):
            if n[i] == 0:
                continue
            for j in range(len(n)):
                if j == i:
                    continue
                cand = list(n)
                cand[i] -= 1
                cand[j] += 1
                if ib.spent(cand) > ib.budget:
                    continue
                cand = _greedy_fill(cand, ib, ev, costs)
                val = ev.neff(ev.supply(cand))[0]
                if val > best_val * (1 + 1e-12):
                    best_n, best_val = cand, val
        if best_n is None:
            break
        n, value = best_n, best_val
    return n


def _check_affordable(problem: ProblemInstance) -> None:
    if problem.exact_budget < min(problem.exact_costs):
        raise BudgetTooSmallError(
            f"budget {problem.budget} is below the cheapest per-sample cost {problem.costs.min()}"
        )


def _result(counts, problem, target, weights, method) -> PlanResult:
    plan = SamplingPlan(tuple(counts))
    if plan.total == 0:
        raise BudgetTooSmallError(f"{method} plan buys no samples at budget {problem.budget}")
    return PlanResult(
        plan=plan,
        objective=effective_sample_size(plan, target, problem),
        continuous_weights=np.asarray(weights, dtype=float),
        total_cost=total_cost(plan, problem),
        avg_cost=average_cost(plan, problem),
        method=method,
    )


def solve_optimal_plan(problem: ProblemInstance, target: GroupDist | None = None) -> PlanResult:
    """Integer plan maximizing the effective sample size for ``target``.

    ``continuous_weights`` holds the relaxed (fractional) sample counts.
    """
    target = problem.target if target is None else target
    check_coverage(problem.sources, target)
    _check_affordable(problem)

    costs = problem.costs
    shares = continuous_budget_shares(problem, target)
    shares[shares < WEIGHT_FLOOR] = 0.0
    real_counts = problem.budget * shares / costs

    ib = _IntegerBudget(problem)
    ev = _Evaluator(problem, target)
    n = _floor_to_budget(real_counts, ib)
    n = _greedy_fill(n, ib, ev, costs)
    n = _swap_search(n, ib, ev, costs)

    result = _result(n, problem, target, real_counts, "optimal")
    # The baselines are feasible plans too; never return something worse.
    for kind in BASELINES:
        try:
            alt = baseline_plan(kind, problem, target)
        except BudgetTooSmallError:
            continue
        if alt.objective > result.objective:
            # extra samples never lower n_eff, so spend what the baseline left
            filled = _greedy_fill(list(alt.counts), ib, ev, costs)
            result = _result(filled, problem, target, real_counts, "optimal")
    return result


def solve_group_means_plan(problem: ProblemInstance) -> PlanResult:
    return solve_optimal_plan(problem, GroupDist.uniform(problem.k))


def nearest_mixture_weights(problem: ProblemInstance, target: GroupDist) -> np.ndarray:
    """Source weights whose mixture is closest to ``target`` in total variation.

    Solved as the linear program min sum_z t_z s.t. |target - w @ Q| <= t.
    """
    q = problem.source_matrix
    m, k = q.shape
    cost = np.concatenate([np.zeros(m), np.ones(k)])
    # w @ Q - t <= target  and  -w @ Q - t <= -target
    a_ub = np.block([[q.T, -np.eye(k)], [-q.T, -np.eye(k)]])
    b_ub = np.concatenate([target.probs, -target.probs])
    a_eq = np.concatenate([np.ones(m), np.zeros(k)])[None, :]
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
                  bounds=[(0, None)] * (m + k), method="highs")
    if not res.success:  # pragma: no cover - the LP is always feasible and bounded
        raise RuntimeError(f"nearest-mixture LP failed: {res.message}")
    w = np.clip(res.x[:m], 0.0, None)
    w[w < WEIGHT_FLOOR] = 0.0
    return w / w.sum()


def baseline_plan(kind: str, problem: ProblemInstance, target: GroupDist | None = None) -> PlanResult:
    """Reference plans: uniform, inverse_cost, nearest, hybrid."""
    target = problem.target if target is None else target
    check_coverage(problem.sources, target)
    _check_affordable(problem)
    ib = _IntegerBudget(problem)
    costs = problem.costs
    budget = problem.exact_budget

    if kind == "uniform":
        each = math.floor(budget / sum(problem.exact_costs))
        counts = [each] * problem.m
        weights = np.full(problem.m, float(budget / sum(problem.exact_costs)))
    elif kind == "inverse_cost":
        # n_m proportional to 1/c_m with c @ n = B  ->  n_m = B / (M c_m)
        exact_n = [budget / (problem.m * c) for c in problem.exact_costs]
        counts = [math.floor(x) for x in exact_n]
        weights = np.array([float(x) for x in exact_n])
    elif kind in ("nearest", "hybrid"):
        w = nearest_mixture_weights(problem, target)
        if kind == "hybrid":
            w = w / costs
            w = w / w.sum()
        weights = problem.budget * w / (costs @ w)
        counts = _floor_to_budget(weights, ib)
    else:
        raise ValueError(f"unknown baseline kind {kind!r}")
    return _result(counts, problem, target, weights, kind)


def _lattice(ib: _IntegerBudget):
    """Feasible integer plans (including zero) in lexicographic order."""
    m_total = len(ib.costs)
    counts = [0] * m_total

    def walk(m, remaining):
        if m == m_total:
            yield tuple(counts)
            return
        for k in range(remaining // ib.costs[m] + 1):
            counts[m] = k
            yield from walk(m + 1, remaining - k * ib.costs[m])
        counts[m] = 0

    return walk(0, ib.budget)


def count_lattice(problem: ProblemInstance, limit: int) -> int:
    """Number of nonzero feasible integer plans; counting stops past ``limit``."""
    total = -1
    for _ in _lattice(_IntegerBudget(problem)):
        total += 1
        if total > limit:
            break
    return total


def brute_force_plan(problem: ProblemInstance, target: GroupDist | None = None,
                     max_states: int = 200_000) -> PlanResult:
    """Exact integer argmax by enumeration; ties go to the lexicographically smallest plan."""
    target = problem.target if target is None else target
    check_coverage(problem.sources, target)
    _check_affordable(problem)
    if count_lattice(problem, max_states) > max_states:
        raise ResourceLimitError(f"feasible lattice exceeds {max_states} plans")

    ib = _IntegerBudget(problem)
    plans = np.array([p for p in _lattice(ib) if any(p)], dtype=float)
    ev = _Evaluator(problem, target)
    values = ev.neff(plans @ ev.q)
    best_val = values.max()
    # the lattice is walked in lexicographic order, so the first near-max wins
    best = int(np.flatnonzero(values >= best_val * (1 - 1e-12))[0])
    counts = [int(x) for x in plans[best]]
    return _result(counts, problem, target, plans[best], "brute_force")


def plan_for_method(method: str, problem: ProblemInstance, target: GroupDist | None = None) -> PlanResult:
    if method == "optimal":
        return solve_optimal_plan(problem, target)
    if method == "brute_force":
        return brute_force_plan(problem, target)
    return baseline_plan(method, problem, target)
