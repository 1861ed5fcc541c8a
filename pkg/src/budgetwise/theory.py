"""Reference values from the minimax analysis.

Leading-order risk terms for the optimal plans, the excess-risk upper bound
for importance-weighted ERM, and a quadrature check of the truncated-normal
integral that drives the mean-estimation lower bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from .errors import DomainError, InsufficientDataError
from .model import (
    GroupDist,
    ProblemInstance,
    SamplingPlan,
    average_cost,
    chi2_discrepancy,
    mixture,
)
from .planner import PlanResult, solve_group_means_plan, solve_optimal_plan

_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


@dataclass(frozen=True)
class BoundReport:
    leading_term: float
    avg_cost: float
    discrepancy: float
    budget: float
    sigma2: float
    k: int
    kind: str
    plan: PlanResult | None = None

    def recombine(self) -> float:
        factor = self.k**2 if self.kind == "group_means" else 1
        return factor * self.sigma2 * self.avg_cost * self.discrepancy / self.budget

    @property
    def neff_form(self) -> float:
        """The same term written as ``sigma^2 / n_eff`` (times K^2 for group means)."""
        factor = self.k**2 if self.kind == "group_means" else 1
        return factor * self.sigma2 / self.plan.objective


def _report(problem: ProblemInstance, target: GroupDist, result: PlanResult, sigma2: float, kind: str):
    if sigma2 <= 0:
        raise DomainError("sigma2 must be positive")
    d = chi2_discrepancy(target, mixture(result.plan, problem))
    report = BoundReport(
        leading_term=0.0,
        avg_cost=result.avg_cost,
        discrepancy=d,
        budget=problem.budget,
        sigma2=sigma2,
        k=problem.k,
        kind=kind,
        plan=result,
    )
    return BoundReport(**{**report.__dict__, "leading_term": report.recombine()})


def minimax_pm_leading(problem: ProblemInstance, sigma2: float) -> BoundReport:
    """``sigma^2 cbar(n*) d(q_T || qbar) / B`` for the population mean."""
    return _report(problem, problem.target, solve_optimal_plan(problem), sigma2, "population_mean")


def minimax_gm_leading(problem: ProblemInstance, sigma2: float) -> BoundReport:
    """``K^2 sigma^2 cbar(n*_U) d(U || qbar) / B`` for the vector of group means."""
    uniform = GroupDist.uniform(problem.k)
    return _report(problem, uniform, solve_group_means_plan(problem), sigma2, "group_means")


def prediction_ub(problem: ProblemInstance, plan: SamplingPlan, pdim: int) -> float:
    """Excess-risk upper bound for IWERM under ``plan``.

    ``pdim`` is the per-group pseudo-dimension of the hypothesis class.
    """
    if pdim < 1:
        raise DomainError("pdim must be a positive integer")
    target = problem.target
    n = plan.total
    dk = pdim * problem.k
    if n < dk:
        raise InsufficientDataError(f"bound needs at least pdim*K = {dk} samples, plan has {n}")
    mix = mixture(plan, problem)
    support = target.probs > 0
    if np.any(mix.probs[support] <= 0):
        return math.inf
    rho = float(np.max(target.probs[support] / mix.probs[support]))
    d = chi2_discrepancy(target, mix)
    n_eff = n / d
    log_term = math.log(2 * math.e * n / dk)
    first = math.log(math.e * rho / math.sqrt(d)) * math.sqrt(192 * dk * log_term / n_eff)
    second = 64 * dk * average_cost(plan, problem) * rho * log_term / problem.budget
    return first + second


def prediction_lb_shape(problem: ProblemInstance, plan: SamplingPlan, vc_dim: int, constant: float = 1.0) -> float:
    """``constant * sqrt(V q_min / n_eff)``; the true constant is not known."""
    target = problem.target
    d = chi2_discrepancy(target, mixture(plan, problem))
    return constant * math.sqrt(vc_dim * float(target.probs.min()) * d / plan.total)


def _integrand(x: float, c: float) -> float:
    """(phi(x+c) - phi(x-c))^2 / (Phi(x+c) - Phi(x-c)) for x >= 0.

    Written through the upper tail at x-c so that neither the numerator nor
    the denominator is formed by cancellation, even far out in the tail.
    """
    if x <= 0.0:
        return 0.0
    a, b = x - c, x + c
    log_tail_a = float(log_ndtr(-a))
    log_tail_b = float(log_ndtr(-b))
    spread = -math.expm1(log_tail_b - log_tail_a)
    if spread <= 0.0:
        return 0.0
    shape = -math.expm1(-2.0 * x * c)
    log_phi_a = -0.5 * a * a - _LOG_SQRT_2PI
    return math.exp(2.0 * log_phi_a - log_tail_a) * shape * shape / spread


def _adaptive_simpson(f, lo: float, hi: float, tol: float, max_depth: int = 50) -> float:
    flo, fhi = f(lo), f(hi)
    mid = 0.5 * (lo + hi)
    fmid = f(mid)
    whole = (hi - lo) * (flo + 4 * fmid + fhi) / 6
    total = 0.0
    stack = [(lo, hi, flo, fmid, fhi, whole, tol, 0)]
    while stack:
        a, b, fa, fm, fb, s, eps, depth = stack.pop()
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) * (fa + 4 * flm + fm) / 6
        right = (b - m) * (fm + 4 * frm + fb) / 6
        delta = left + right - s
        if depth >= max_depth or abs(delta) <= 15 * eps:
            total += left + right + delta / 15
        else:
            stack.append((a, m, fa, flm, fm, left, eps / 2, depth + 1))
            stack.append((m, b, fm, frm, fb, right, eps / 2, depth + 1))
    return total


def truncnorm_integral(c: float, tol: float = 1e-8) -> float:
    """Integral over the real line of (phi(x+c) - phi(x-c))^2 / (Phi(x+c) - Phi(x-c)).

    The integrand is even, so we integrate [0, c + 40] and double. Below
    c - 40 it is under exp(-1600) and that part is dropped, which keeps large
    C cheap. The range is cut into unit panels so the adaptive rule cannot
    step over the bump near x = c.
    """
    c = float(c)
    if not c > 0 or not math.isfinite(c):
        raise DomainError(f"C must be positive, got {c!r}")
    lower, upper = max(0.0, c - 40.0), c + 40.0
    width = upper - lower
    edges = np.linspace(lower, upper, int(math.ceil(width)) + 1)
    half_tol = tol / 2
    f = lambda x: _integrand(x, c)  # noqa: E731
    total = sum(
        _adaptive_simpson(f, lo, hi, half_tol * (hi - lo) / width)
        for lo, hi in zip(edges[:-1], edges[1:])
    )
    return 2.0 * total


def posterior_variance_expectation(n_z: int, r: float, sigma: float) -> float:
    """Expected posterior variance of a group mean under a uniform prior on [-r, r]."""
    if n_z <= 0 or r <= 0 or sigma <= 0:
        raise DomainError("n_z, r and sigma must all be positive")
    root_n = math.sqrt(n_z)
    c = root_n * r / sigma
    return (sigma**2 / n_z) * (1.0 - sigma / (2.0 * root_n * r) * truncnorm_integral(c))
