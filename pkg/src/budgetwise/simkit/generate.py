"""Generative models for simulated multi-source data.

Every (source, field) pair draws from its own counter-keyed substream, so the
first ``n`` records of a source do not depend on how many records are
requested in total. Methods that buy fewer samples from a source see a prefix
of the same data.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from ..errors import DimensionError, DomainError
from ..estimators import Dataset, Hypothesis
from ..model import GroupDist, ProblemInstance, SamplingPlan

FIELD_Z, FIELD_X, FIELD_Y = 0, 1, 2


def label_key(label: str) -> int:
    """Stable 32-bit integer for a string label (used in seed keys)."""
    return zlib.crc32(label.encode("utf-8"))


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``key`` under master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key)))


@dataclass(frozen=True)
class MeanModel:
    """Y | Z=z ~ Normal(mu[z], var)."""

    mu: np.ndarray
    var: float
    r_bound: float

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        if self.var <= 0 or self.r_bound <= 0:
            raise DomainError("var and r_bound must be positive")
        if np.any(np.abs(mu) > self.r_bound):
            raise DomainError(f"|mu| exceeds the mean bound {self.r_bound}")
        object.__setattr__(self, "mu", mu)

    @property
    def k(self) -> int:
        return self.mu.size


@dataclass(frozen=True)
class ProbitModel:
    """X ~ N(0, I_p) and Y | Z=z, X=x ~ Bernoulli(Phi(x @ betas[z]))."""

    betas: np.ndarray

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=float)
        if betas.ndim != 2:
            raise DimensionError("betas must be a (K, p) array")
        object.__setattr__(self, "betas", betas)

    @property
    def k(self) -> int:
        return self.betas.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.betas.shape[1]

    def bayes_classifier(self) -> Hypothesis:
        return Hypothesis(self.betas)


def _draw_groups(rng: np.random.Generator, probs: np.ndarray, n: int) -> np.ndarray:
    cdf = np.cumsum(probs)
    z = np.searchsorted(cdf, rng.random(n), side="right")
    # guard against cdf[-1] rounding just below 1
    return np.minimum(z, np.flatnonzero(probs > 0)[-1])


class SourcePool:
    """Per-source record arrays; ``take(plan)`` pools the requested prefixes."""

    def __init__(self, k: int, z: list, y: list, x: list | None):
        self.k = k
        self._z, self._y, self._x = z, y, x

    @classmethod
    def mean(cls, sizes, problem: ProblemInstance, model: MeanModel, seed: int, key=()) -> "SourcePool":
        if model.k != problem.k:
            raise DimensionError("model and problem disagree on the number of groups")
        zs, ys = [], []
        sd = np.sqrt(model.var)
        for m, (src, n) in enumerate(zip(problem.sources, sizes)):
            z = _draw_groups(substream(seed, *key, m, FIELD_Z), src.dist.probs, int(n))
            noise = substream(seed, *key, m, FIELD_Y).standard_normal(int(n))
            zs.append(z)
            ys.append(model.mu[z] + sd * noise)
        return cls(problem.k, zs, ys, None)

    @classmethod
    def probit(cls, sizes, problem: ProblemInstance, model: ProbitModel, seed: int, key=()) -> "SourcePool":
        if model.k != problem.k:
            raise DimensionError("model and problem disagree on the number of groups")
        zs, ys, xs = [], [], []
        p = model.feature_dim
        for m, (src, n) in enumerate(zip(problem.sources, sizes)):
            n = int(n)
            z = _draw_groups(substream(seed, *key, m, FIELD_Z), src.dist.probs, n)
            x = substream(seed, *key, m, FIELD_X).standard_normal((n, p))
            u = substream(seed, *key, m, FIELD_Y).random(n)
            prob = ndtr(np.einsum("ij,ij->i", x, model.betas[z]))
            zs.append(z)
            xs.append(x)
            ys.append((u < prob).astype(float))
        return cls(problem.k, zs, ys, xs)

    def take(self, plan: SamplingPlan) -> Dataset:
        parts = range(len(plan.counts))
        for m in parts:
            if plan.counts[m] > self._z[m].size:
                raise ValueError(f"pool holds {self._z[m].size} records for source {m + 1}, plan asks {plan.counts[m]}")
        source = np.concatenate([np.full(n, m) for m, n in enumerate(plan.counts)])
        z = np.concatenate([self._z[m][: plan.counts[m]] for m in parts])
        y = np.concatenate([self._y[m][: plan.counts[m]] for m in parts])
        x = None
        if self._x is not None:
            x = np.concatenate([self._x[m][: plan.counts[m]] for m in parts])
        return Dataset(source, z, y, self.k, plan, x)


def generate_mean_dataset(plan: SamplingPlan, problem: ProblemInstance, model: MeanModel,
                          seed: int, key=()) -> Dataset:
    if len(plan.counts) != problem.m:
        raise DimensionError("plan length does not match the number of sources")
    return SourcePool.mean(plan.counts, problem, model, seed, key).take(plan)


def generate_probit_dataset(plan: SamplingPlan, problem: ProblemInstance, model: ProbitModel,
                            seed: int, key=()) -> Dataset:
    if len(plan.counts) != problem.m:
        raise DimensionError("plan length does not match the number of sources")
    return SourcePool.probit(plan.counts, problem, model, seed, key).take(plan)


def make_target(kind: str, k: int) -> GroupDist:
    """``uniform``, ``increasing`` (q(z) proportional to z) or ``pyramid``."""
    if k < 1:
        raise DomainError("need at least one group")
    z = np.arange(1, k + 1, dtype=float)
    if kind == "uniform":
        w = np.ones(k)
    elif kind == "increasing":
        w = z
    elif kind == "pyramid":
        w = np.minimum(z, k + 1 - z)
    else:
        raise ValueError(f"unknown target kind {kind!r}")
    return GroupDist(w / w.sum())


class ExcessRiskEvaluator:
    """Monte-Carlo excess 0-1 risk against the Bayes classifier of a probit model.

    Features are drawn once; groups are integrated exactly with the target
    weights. Given x, the expected 0-1 loss gap between disagreeing
    predictions is ``|2 Phi(x @ beta_z) - 1|``, so each draw contributes that
    amount when the hypothesis and the Bayes rule disagree.
    """

    def __init__(self, truth: ProbitModel, target: GroupDist, mc_samples: int, seed: int, key=()):
        if mc_samples < 1:
            raise DomainError("mc_samples must be at least 1")
        if target.k != truth.k:
            raise DimensionError("target and model disagree on the number of groups")
        self.target = target
        self.groups = np.flatnonzero(target.probs > 0)
        self.x = substream(seed, *key).standard_normal((mc_samples, truth.feature_dim))
        true_scores = self.x @ truth.betas[self.groups].T
        self.true_pred = true_scores >= 0
        self.gap = np.abs(2.0 * ndtr(true_scores) - 1.0)

    def __call__(self, h: Hypothesis) -> float:
        pred = (self.x @ h.coefficients[self.groups].T) >= 0
        per_group = np.mean(self.gap * (pred != self.true_pred), axis=0)
        return max(0.0, float(per_group @ self.target.probs[self.groups]))


def excess_risk(h: Hypothesis, truth: ProbitModel, target: GroupDist, mc_samples: int, seed: int) -> float:
    return ExcessRiskEvaluator(truth, target, mc_samples, seed)(h)
