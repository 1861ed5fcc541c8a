"""Post-stratified estimators and importance-weighted ERM for per-group linear classifiers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InsufficientDataError, InvalidWeightsError
from .model import GroupDist, SamplingPlan


@dataclass(frozen=True)
class Dataset:
    """Pooled records from a sampling plan.

    ``z`` holds 0-based group indices, ``x`` is an ``(n, p)`` feature matrix or
    None, ``source`` the 0-based source of each record.
    """

    source: np.ndarray
    z: np.ndarray
    y: np.ndarray
    k: int
    plan: SamplingPlan | None = None
    x: np.ndarray | None = None

    def __post_init__(self):
        source = np.asarray(self.source, dtype=np.int64).reshape(-1)
        z = np.asarray(self.z, dtype=np.int64).reshape(-1)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if not (source.size == z.size == y.size):
            raise DimensionError("source, z and y must have the same length")
        if z.size and (z.min() < 0 or z.max() >= self.k):
            raise DimensionError(f"group index outside [0, {self.k})")
        if self.plan is not None and self.plan.total != z.size:
            raise DimensionError(f"plan collects {self.plan.total} records but dataset has {z.size}")
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "y", y)
        if self.x is not None:
            x = np.asarray(self.x, dtype=float)
            if x.ndim == 1:
                x = x[:, None]
            if x.shape[0] != z.size:
                raise DimensionError("feature matrix row count does not match records")
            object.__setattr__(self, "x", x)

    def __len__(self) -> int:
        return self.z.size

    @property
    def feature_dim(self) -> int | None:
        return None if self.x is None else self.x.shape[1]

    @classmethod
    def from_records(cls, records, k: int, plan: SamplingPlan | None = None) -> "Dataset":
        """Build from ``(source_id, z, x, y)`` tuples with 0-based ``z``; ``x`` may be None."""
        records = list(records)
        if not records:
            return cls(np.zeros(0), np.zeros(0), np.zeros(0), k, plan)
        source, z, x, y = zip(*records)
        has_x = [xi is not None for xi in x]
        if any(has_x) and not all(has_x):
            raise DimensionError("either every record has features or none does")
        feats = np.array([np.atleast_1d(xi) for xi in x], dtype=float) if all(has_x) else None
        return cls(np.array(source), np.array(z), np.array(y), k, plan, feats)


@dataclass(frozen=True)
class Hypothesis:
    """One linear classifier per group; row z is ``beta_z``."""

    coefficients: np.ndarray

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float)
        if coef.ndim != 2:
            raise DimensionError("coefficients must be a (K, p) array")
        object.__setattr__(self, "coefficients", coef)

    @property
    def k(self) -> int:
        return self.coefficients.shape[0]

    def scores(self, z: np.ndarray, x: np.ndarray) -> np.ndarray:
        return np.einsum("ij,ij->i", x, self.coefficients[z])

    def predict(self, z: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Labels in {0, 1}; a zero score predicts 1."""
        return (self.scores(z, x) >= 0).astype(np.int64)


def group_counts(data: Dataset) -> np.ndarray:
    return np.bincount(data.z, minlength=data.k)


def group_means(data: Dataset) -> np.ndarray:
    """Per-group sample means, 0 for groups without observations."""
    counts = group_counts(data)
    sums = np.bincount(data.z, weights=data.y, minlength=data.k)
    means = np.zeros(data.k)
    seen = counts > 0
    means[seen] = sums[seen] / counts[seen]
    return means


def post_stratified(data: Dataset, target: GroupDist) -> float:
    if target.k != data.k:
        raise DimensionError(f"target has {target.k} groups, data has {data.k}")
    return float(target.probs @ group_means(data))


@dataclass(frozen=True)
class FitConfig:
    max_iter: int = 5000
    grad_tol: float = 1e-8
    shrink: float = 0.5
    armijo: float = 1e-4


def importance_weights(target: GroupDist, mix: GroupDist) -> np.ndarray:
    """Per-group weight q_T(z) / qbar(z); inf where qbar(z) = 0 < q_T(z)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(mix.probs > 0, target.probs / np.where(mix.probs > 0, mix.probs, 1.0), np.inf)
    return np.where((target.probs == 0) & (mix.probs == 0), 0.0, w)


def _pad_groups(data: Dataset, groups: np.ndarray):
    """Stack each group's records into a zero-padded ``(G, n_max, p)`` block."""
    sizes = np.array([np.count_nonzero(data.z == z) for z in groups])
    n_max = int(sizes.max())
    p = data.x.shape[1]
    x = np.zeros((groups.size, n_max, p))
    sign = np.zeros((groups.size, n_max))
    mask = np.zeros((groups.size, n_max))
    for i, z in enumerate(groups):
        rows = data.z == z
        x[i, : sizes[i]] = data.x[rows]
        sign[i, : sizes[i]] = 2.0 * data.y[rows] - 1.0
        mask[i, : sizes[i]] = 1.0
    return x, sign, mask, sizes


def _logistic_gd(x, sign, mask, sizes, scale, config: FitConfig) -> np.ndarray:
    """Gradient descent on ``scale_g * sum_i logloss`` for G independent problems at once.

    Each problem starts at zero with step ``1 / L_g`` (L_g the Lipschitz
    constant of its gradient) and backtracks from there, so the iterates do
    not depend on ``scale_g``. A problem stops when the norm of its
    unweighted mean gradient falls below ``grad_tol``.
    """
    g_count, _, p = x.shape
    beta = np.zeros((g_count, p))
    gram_top = np.array([np.linalg.eigvalsh(xi.T @ xi)[-1] for xi in x])
    lipschitz = 0.25 * scale * gram_top
    active = lipschitz > 0
    step = np.where(active, 1.0 / np.where(active, lipschitz, 1.0), 0.0)

    def margins(b):
        return sign * np.matmul(x, b[:, :, None])[:, :, 0]

    def evaluate(m):
        # loss log(1 + exp(-m)) summed over real rows, plus sigmoid(-m) for the gradient
        e = np.exp(-np.abs(m))
        loss = scale * np.sum(mask * (np.maximum(-m, 0.0) + np.log1p(e)), axis=1)
        sig = np.where(m >= 0, e, 1.0) / (1.0 + e)
        return loss, sig

    m = margins(beta)
    f, sig = evaluate(m)
    norm_scale = np.where(active, scale, 1.0) * np.maximum(sizes, 1)
    for _ in range(config.max_iter):
        grad = -scale[:, None] * np.matmul((sign * mask * sig)[:, None, :], x)[:, 0, :]
        gg = np.einsum("gp,gp->g", grad, grad)
        active &= np.sqrt(gg) / norm_scale > config.grad_tol
        if not active.any():
            break
        while True:
            cand = beta - (step * active)[:, None] * grad
            m_cand = margins(cand)
            f_cand, sig_cand = evaluate(m_cand)
            bad = active & (f_cand > f - config.armijo * step * gg) & (step > 1e-300)
            if not bad.any():
                break
            step = np.where(bad, step * config.shrink, step)
        beta, f, sig = cand, f_cand, sig_cand
    return beta


def iwerm_fit(data: Dataset, target: GroupDist, mix: GroupDist,
              config: FitConfig | None = None, group_weights=None) -> Hypothesis:
    """Importance-weighted ERM with a logistic surrogate, one linear map per group.

    The weight q_T(z)/qbar(z) is constant within a group and the hypotheses
    do not share parameters, so the weighted objective splits into K
    independent fits. ``group_weights`` replaces the ratio with explicit
    per-group weights.
    """
    config = config or FitConfig()
    if data.x is None:
        raise InsufficientDataError("IWERM needs feature vectors")
    if len(data) == 0:
        raise InsufficientDataError("cannot fit on an empty dataset")
    if target.k != data.k or mix.k != data.k:
        raise DimensionError("target, mixture and data disagree on the number of groups")
    observed = np.unique(data.z)
    if group_weights is None:
        weights = importance_weights(target, mix)
        if np.any(~np.isfinite(weights[observed])) or np.any(mix.probs[observed] <= 0):
            raise InvalidWeightsError("mixture assigns zero probability to an observed group")
    else:
        weights = np.asarray(group_weights, dtype=float).reshape(-1)
        if weights.size != data.k:
            raise DimensionError(f"need {data.k} group weights, got {weights.size}")
        if np.any(~np.isfinite(weights)) or np.any(weights < 0):
            raise InvalidWeightsError("group weights must be finite and nonnegative")

    coef = np.zeros((data.k, data.x.shape[1]))
    x, sign, mask, sizes = _pad_groups(data, observed)
    scale = weights[observed] / len(data)
    coef[observed] = _logistic_gd(x, sign, mask, sizes, scale, config)
    return Hypothesis(coef)


def erm_fit(data: Dataset, config: FitConfig | None = None) -> Hypothesis:
    """Unweighted ERM: IWERM with target equal to the mixture."""
    mix = GroupDist(group_counts(data) / len(data)) if len(data) else None
    if mix is None:
        raise InsufficientDataError("cannot fit on an empty dataset")
    return iwerm_fit(data, mix, mix, config)


def importance_weighted_loss(h: Hypothesis, data: Dataset, target: GroupDist, mix: GroupDist) -> float:
    """``(1/n) sum_i q_T(z_i)/qbar(z_i) * 1{h(z_i, x_i) != y_i}``."""
    if len(data) == 0:
        raise InsufficientDataError("empty dataset")
    w = importance_weights(target, mix)[data.z]
    wrong = h.predict(data.z, data.x) != data.y.astype(np.int64)
    return float(np.mean(w * wrong))


def target_zero_one_risk(h: Hypothesis, eval_data: Dataset) -> float:
    if len(eval_data) == 0:
        return 0.0
    return float(np.mean(h.predict(eval_data.z, eval_data.x) != eval_data.y.astype(np.int64)))
