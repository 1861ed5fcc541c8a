import numpy as np
import pytest
from scipy.optimize import minimize

from budgetwise.errors import DimensionError, InsufficientDataError, InvalidWeightsError
from budgetwise.estimators import (
    Dataset,
    FitConfig,
    Hypothesis,
    erm_fit,
    group_counts,
    group_means,
    importance_weighted_loss,
    importance_weights,
    iwerm_fit,
    post_stratified,
    target_zero_one_risk,
)
from budgetwise.model import GroupDist, SamplingPlan
from budgetwise.simkit import SourcePool, MeanModel


def records(z, y, x=None, k=2):
    z = np.asarray(z)
    return Dataset(np.zeros(len(z)), z, y, k, x=x)


class TestDataset:
    def test_from_records(self):
        d = Dataset.from_records([(0, 1, None, 2.0), (1, 0, None, 3.0)], k=2)
        assert len(d) == 2 and d.x is None
        np.testing.assert_array_equal(d.z, [1, 0])

    def test_mixed_features_rejected(self):
        with pytest.raises(DimensionError):
            Dataset.from_records([(0, 0, [1.0], 1.0), (0, 1, None, 0.0)], k=2)

    def test_group_out_of_range(self):
        with pytest.raises(DimensionError):
            records([0, 2], [1, 1], k=2)

    def test_plan_count_mismatch(self):
        with pytest.raises(DimensionError):
            Dataset(np.zeros(2), [0, 1], [1, 1], 2, plan=SamplingPlan((3,)))


class TestGroupStatistics:
    def test_counts(self):
        assert group_counts(records([], [])).tolist() == [0, 0]
        # groups 1,1,2 in one-based labels
        assert group_counts(records([0, 0, 1], [0, 0, 0])).tolist() == [2, 1]

    def test_means(self):
        np.testing.assert_allclose(group_means(records([0, 0, 1], [2, 4, 6])), [3, 6])
        np.testing.assert_array_equal(group_means(records([0, 1], [1.5, 2.5], k=3)), [1.5, 2.5, 0.0])
        np.testing.assert_allclose(group_means(records([0], [7], k=1)), [7])

    def test_means_permutation_invariant(self, rng):
        z = rng.integers(0, 4, 50)
        y = rng.normal(size=50)
        perm = rng.permutation(50)
        np.testing.assert_allclose(group_means(records(z, y, k=4)), group_means(records(z[perm], y[perm], k=4)),
                                   rtol=1e-14)

    def test_post_stratified(self):
        d = records([0, 0, 1], [2, 4, 6])
        assert post_stratified(d, GroupDist([0.5, 0.5])) == pytest.approx(4.5)
        assert post_stratified(d, GroupDist([1.0, 0.0])) == pytest.approx(3.0)

    def test_post_stratified_dimension(self):
        with pytest.raises(DimensionError):
            post_stratified(records([0], [1.0]), GroupDist([1.0, 0, 0]))

    def test_post_stratified_hand_computed(self):
        # groups (0, 1, 1, 2, 2, 2) with target (0.2, 0.3, 0.5)
        d = records([0, 1, 1, 2, 2, 2], [1.0, 2.0, 4.0, 3.0, 6.0, 9.0], k=3)
        assert post_stratified(d, GroupDist([0.2, 0.3, 0.5])) == pytest.approx(0.2 * 1 + 0.3 * 3 + 0.5 * 6)

    def test_post_stratified_linear(self, rng):
        z = np.repeat([0, 1, 2], 5)
        y = rng.normal(size=15)
        q = GroupDist([0.2, 0.5, 0.3])
        base = post_stratified(records(z, y, k=3), q)
        assert post_stratified(records(z, 3 * y - 2, k=3), q) == pytest.approx(3 * base - 2)

    def test_empirical_weights_give_sample_mean(self, rng):
        z = rng.integers(0, 3, 40)
        y = rng.normal(size=40)
        d = records(z, y, k=3)
        freq = GroupDist(group_counts(d) / 40)
        assert post_stratified(d, freq) == pytest.approx(y.mean(), abs=1e-13)

    def test_clinic_expected_group_counts(self, clinic):
        model = MeanModel([0.0, 0.0], 1.0, 1.0)
        plan = SamplingPlan((152, 424))
        counts = [group_counts(SourcePool.mean(plan.counts, clinic, model, 99, (r,)).take(plan))[0]
                  for r in range(1000)]
        assert abs(np.mean(counts) - 227.6) <= 3


def weighted_logistic_oracle(x, y, w):
    """Minimize sum_i w log(1 + exp(-s_i x_i b)) with BFGS."""
    s = 2 * y - 1

    def f(b):
        m = s * (x @ b)
        return w * np.sum(np.logaddexp(0, -m))

    def g(b):
        m = s * (x @ b)
        return -w * (x.T @ (s / (1 + np.exp(m))))

    return minimize(f, np.zeros(x.shape[1]), jac=g, method="BFGS", options={"gtol": 1e-12}).x


def noisy_data(rng, n=200, p=3, k=2):
    z = rng.integers(0, k, n)
    x = rng.normal(size=(n, p))
    beta = rng.normal(size=(k, p))
    y = (rng.random(n) < 1 / (1 + np.exp(-np.einsum("ij,ij->i", x, beta[z])))).astype(float)
    return Dataset(np.zeros(n), z, y, k, x=x)


class TestIWERM:
    def test_identity_weights_equal_erm(self, rng):
        d = noisy_data(rng)
        q = GroupDist(group_counts(d) / len(d))
        a = iwerm_fit(d, q, q).coefficients
        b = erm_fit(d).coefficients
        assert np.array_equal(a, b)

    def test_separable_two_points(self):
        d = Dataset([0, 0], [0, 0], [1.0, 0.0], 1, x=np.array([[1.0], [-1.0]]))
        h = iwerm_fit(d, GroupDist([1.0]), GroupDist([1.0]))
        assert h.coefficients[0, 0] > 0

    def test_matches_bfgs(self, rng):
        d = noisy_data(rng, n=300)
        target, mix = GroupDist([0.7, 0.3]), GroupDist([0.4, 0.6])
        h = iwerm_fit(d, target, mix)
        w = importance_weights(target, mix)
        for zz in range(2):
            rows = d.z == zz
            ref = weighted_logistic_oracle(d.x[rows], d.y[rows], w[zz] / len(d))
            np.testing.assert_allclose(h.coefficients[zz], ref, atol=1e-5)

    def test_weight_scale_invariance(self, rng):
        d = noisy_data(rng, n=150)
        q = GroupDist([0.5, 0.5])
        base = iwerm_fit(d, q, q, group_weights=[1.0, 2.0]).coefficients
        for c in (1e-3, 7.0, 1e4):
            scaled = iwerm_fit(d, q, q, group_weights=[c, 2.0 * c]).coefficients
            np.testing.assert_allclose(scaled, base, atol=1e-6)

    def test_unobserved_group_zero(self, rng):
        d = noisy_data(rng, n=50, k=2)
        d = Dataset(d.source, d.z * 0, d.y, 3, x=d.x)
        h = iwerm_fit(d, GroupDist([0.3, 0.3, 0.4]), GroupDist([0.5, 0.5, 0.0]))
        assert np.all(h.coefficients[1:] == 0)

    def test_zero_mixture_weight(self, rng):
        d = noisy_data(rng, n=20)
        with pytest.raises(InvalidWeightsError):
            iwerm_fit(d, GroupDist([0.5, 0.5]), GroupDist([1.0, 0.0]))

    def test_empty(self):
        d = Dataset([], [], [], 2, x=np.zeros((0, 3)))
        with pytest.raises(InsufficientDataError):
            iwerm_fit(d, GroupDist([0.5, 0.5]), GroupDist([0.5, 0.5]))

    def test_no_features(self):
        with pytest.raises(InsufficientDataError):
            iwerm_fit(records([0, 1], [1, 0]), GroupDist([0.5, 0.5]), GroupDist([0.5, 0.5]))

    def test_deterministic(self, rng):
        d = noisy_data(rng)
        q = GroupDist([0.5, 0.5])
        assert np.array_equal(iwerm_fit(d, q, q).coefficients, iwerm_fit(d, q, q).coefficients)

    def test_iteration_cap(self, rng):
        d = noisy_data(rng)
        q = GroupDist([0.5, 0.5])
        h = iwerm_fit(d, q, q, FitConfig(max_iter=1))
        assert np.all(np.isfinite(h.coefficients))


class TestZeroOneRisk:
    def test_oracle_hypothesis(self, rng):
        x = rng.normal(size=(100, 2))
        beta = np.array([[1.0, -2.0]])
        y = (x @ beta[0] >= 0).astype(float)
        assert target_zero_one_risk(Hypothesis(beta), Dataset(np.zeros(100), np.zeros(100), y, 1, x=x)) == 0.0

    def test_constant_positive(self):
        x = np.ones((4, 1))
        d = Dataset(np.zeros(4), np.zeros(4), [1, 0, 1, 0], 1, x=x)
        assert target_zero_one_risk(Hypothesis([[0.0]]), d) == 0.5

    def test_hand_enumerated(self):
        # scores: 2, -1, 0, -3 -> predictions 1, 0, 1, 0 against labels 1, 1, 0, 0
        x = np.array([[2.0], [-1.0], [0.0], [-3.0]])
        d = Dataset(np.zeros(4), np.zeros(4), [1, 1, 0, 0], 1, x=x)
        assert target_zero_one_risk(Hypothesis([[1.0]]), d) == 0.5

    def test_weighted_loss(self):
        x = np.array([[1.0], [1.0], [-1.0]])
        d = Dataset(np.zeros(3), [0, 1, 1], [0, 1, 1], 2, x=x)
        # mistakes on records 0 and 2; weights 0.5/0.25 = 2 and 0.5/0.75
        got = importance_weighted_loss(Hypothesis([[1.0], [1.0]]), d, GroupDist([0.5, 0.5]), GroupDist([0.25, 0.75]))
        assert got == pytest.approx((2 + 0.5 / 0.75) / 3)
