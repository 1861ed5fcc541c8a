"""Monte-Carlo risk curves over a grid of budgets.

Plans depend only on (method, budget), so they are computed once. Each
replication then draws one pool of records per source, large enough for the
largest plan, and every (method, budget) cell reads prefixes of that pool.
Replications are independent and keyed by their index, so results do not
depend on the number of workers.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import BudgetwiseError
from ..estimators import group_means, iwerm_fit, post_stratified
from ..model import GroupDist, ProblemInstance, SamplingPlan, mixture
from ..planner import PlanResult, plan_for_method, solve_optimal_plan
from ..theory import minimax_gm_leading, minimax_pm_leading, prediction_ub
from .generate import (
    ExcessRiskEvaluator,
    MeanModel,
    ProbitModel,
    SourcePool,
    label_key,
    substream,
)

logger = logging.getLogger(__name__)

TASKS = ("population_mean", "group_means", "classification")
METHODS = ("optimal", "uniform", "inverse_cost", "nearest", "hybrid")
THEORY = "theory"
CSV_HEADER = ("setting", "task", "target", "method", "budget", "mean_risk", "se", "replications")

_TRUTH, _DATA, _EVAL = 0, 1, 2
PRIOR_VAR = 10.0


def default_budgets(lo: float = 25.0, hi: float = 500.0, count: int = 20) -> tuple[float, ...]:
    return tuple(float(b) for b in np.linspace(lo, hi, count))


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemInstance
    budgets: tuple[float, ...]
    replications: int
    seed: int
    task: str
    target_kind: str = "explicit"
    setting: str = "custom"
    sigma2: float = 5.0
    feature_dim: int = 20
    mc_samples: int = 20_000

    def __post_init__(self):
        budgets = tuple(float(b) for b in self.budgets)
        if not budgets or any(b <= 0 for b in budgets):
            raise ValueError("budgets must be positive and non-empty")
        if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
            raise ValueError("budgets must be strictly increasing")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; choose from {TASKS}")
        if self.sigma2 <= 0 or self.feature_dim < 1 or self.mc_samples < 1:
            raise ValueError("sigma2, feature_dim and mc_samples must be positive")
        object.__setattr__(self, "budgets", budgets)

    @property
    def planning_target(self) -> GroupDist:
        """Group means are judged as if the target were uniform over groups."""
        if self.task == "group_means":
            return GroupDist.uniform(self.problem.k)
        return self.problem.target


@dataclass
class RiskPoint:
    budget: float
    mean_risk: float | None
    standard_error: float | None
    replications: int


@dataclass
class RiskCurve:
    method: str
    points: list[RiskPoint] = field(default_factory=list)

    def at(self, budget: float) -> RiskPoint:
        for p in self.points:
            if p.budget == budget:
                return p
        raise KeyError(budget)


def draw_truth(config: ExperimentConfig) -> MeanModel | ProbitModel:
    """Truth parameters, drawn once per setting from N(0, 10 I) and then fixed."""
    k = config.problem.k
    setting = label_key(config.setting)
    if config.task == "classification":
        rng = substream(config.seed, setting, _TRUTH, 1)
        return ProbitModel(rng.normal(0.0, math.sqrt(PRIOR_VAR), size=(k, config.feature_dim)))
    rng = substream(config.seed, setting, _TRUTH, 0)
    mu = rng.normal(0.0, math.sqrt(PRIOR_VAR), size=k)
    return MeanModel(mu, config.sigma2, max(float(np.abs(mu).max()), 1e-12))


def _plans(config: ExperimentConfig, methods) -> dict[tuple[str, float], PlanResult | None]:
    plans = {}
    for budget in config.budgets:
        problem = config.problem.with_budget(budget)
        for method in methods:
            if method == THEORY:
                continue
            try:
                plans[method, budget] = plan_for_method(method, problem, config.planning_target)
            except BudgetwiseError as exc:
                logger.warning("no %s plan at budget %s: %s", method, budget, exc)
                plans[method, budget] = None
    return plans


def _theory_value(config: ExperimentConfig, budget: float) -> float | None:
    problem = config.problem.with_budget(budget)
    try:
        if config.task == "population_mean":
            return minimax_pm_leading(problem, config.sigma2).leading_term
        if config.task == "group_means":
            return minimax_gm_leading(problem, config.sigma2).leading_term
        plan = solve_optimal_plan(problem).plan
        return prediction_ub(problem, plan, config.feature_dim)
    except BudgetwiseError as exc:
        logger.warning("no theory value at budget %s: %s", budget, exc)
        return None


def _replicate(args) -> list[float]:
    """Risks for one replication, one entry per cell (nan marks a failed cell)."""
    config, cells, truth, rep = args
    problem = config.problem
    key = (label_key(config.setting), TASKS.index(config.task), rep, _DATA)
    sizes = np.zeros(problem.m, dtype=np.int64)
    for _, counts in cells:
        if counts is not None:
            sizes = np.maximum(sizes, counts)

    if config.task == "classification":
        pool = SourcePool.probit(sizes, problem, truth, config.seed, key)
        evaluate = ExcessRiskEvaluator(
            truth, problem.target, config.mc_samples, config.seed,
            key=(label_key(config.setting), TASKS.index(config.task), rep, _EVAL),
        )
    else:
        pool = SourcePool.mean(sizes, problem, truth, config.seed, key)
        theta_pm = float(problem.target.probs @ truth.mu)

    risks = []
    for _, counts in cells:
        if counts is None:
            risks.append(math.nan)
            continue
        plan = SamplingPlan(tuple(int(c) for c in counts))
        try:
            data = pool.take(plan)
            if config.task == "population_mean":
                risk = (post_stratified(data, problem.target) - theta_pm) ** 2
            elif config.task == "group_means":
                risk = float(np.sum((group_means(data) - truth.mu) ** 2))
            else:
                h = iwerm_fit(data, problem.target, mixture(plan, problem))
                risk = evaluate(h)
        except BudgetwiseError as exc:
            logger.debug("cell failed: %s", exc)
            risk = math.nan
        risks.append(float(risk))
    return risks


def run_experiment(config: ExperimentConfig, methods=METHODS, workers: int = 1) -> list[RiskCurve]:
    methods = list(methods)
    plans = _plans(config, methods)
    cells = [
        ((method, budget), None if plans[method, budget] is None else np.array(plans[method, budget].counts))
        for method in methods if method != THEORY
        for budget in config.budgets
    ]
    truth = draw_truth(config)
    jobs = [(config, cells, truth, rep) for rep in range(config.replications)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_replicate, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        rows = [_replicate(job) for job in jobs]
    table = np.array(rows, dtype=float).reshape(config.replications, len(cells))

    by_cell = {cell: table[:, i] for i, (cell, _) in enumerate(cells)}
    curves = []
    for method in methods:
        curve = RiskCurve(method)
        for budget in config.budgets:
            if method == THEORY:
                value = _theory_value(config, budget)
                curve.points.append(RiskPoint(budget, value, None if value is None else 0.0, 0))
                continue
            values = by_cell[method, budget]
            values = values[np.isfinite(values)]
            if values.size == 0:
                curve.points.append(RiskPoint(budget, None, None, 0))
                continue
            se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
            curve.points.append(RiskPoint(budget, float(values.mean()), se, int(values.size)))
        curves.append(curve)
    return curves


def _fmt(value) -> str:
    return "" if value is None else format(value, ".17g")


def write_csv(curves, config: ExperimentConfig, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for curve in curves:
            for p in curve.points:
                writer.writerow([
                    config.setting, config.task, config.target_kind, curve.method,
                    _fmt(p.budget), _fmt(p.mean_risk), _fmt(p.standard_error), p.replications,
                ])
