import math

import numpy as np
import pytest
from scipy.special import ndtr

from budgetwise.estimators import Hypothesis, group_counts
from budgetwise.model import GroupDist, SamplingPlan
from budgetwise.simkit import (
    CSV_HEADER,
    ExcessRiskEvaluator,
    ExperimentConfig,
    MeanModel,
    ProbitModel,
    SourcePool,
    default_budgets,
    draw_truth,
    excess_risk,
    generate_mean_dataset,
    generate_probit_dataset,
    get_setting,
    make_target,
    run_experiment,
    setting_one,
    setting_two,
    write_csv,
)

from conftest import make_problem


def one_source(q, cost=1.0):
    return make_problem([q], (cost,), q, 1e6)


class TestMeanGenerator:
    def test_degenerate_noise(self):
        p = one_source((0.3, 0.7))
        d = generate_mean_dataset(SamplingPlan((500,)), p, MeanModel([1.5, -2.0], 1e-12, 3.0), 1)
        np.testing.assert_allclose(d.y, np.array([1.5, -2.0])[d.z], atol=1e-5)

    def test_single_group_clt(self):
        p = one_source((1.0,))
        d = generate_mean_dataset(SamplingPlan((10_000,)), p, MeanModel([2.0], 5.0, 2.0), 2)
        assert abs(d.y.mean() - 2.0) <= 4 * math.sqrt(5.0 / 10_000)

    def test_group_frequencies(self):
        q = np.array([0.1, 0.2, 0.3, 0.4])
        p = one_source(tuple(q))
        d = generate_mean_dataset(SamplingPlan((10_000,)), p, MeanModel(np.zeros(4), 1.0, 1.0), 3)
        freq = group_counts(d) / 10_000
        assert np.all(np.abs(freq - q) <= 4 * np.sqrt(q * (1 - q) / 10_000))

    def test_zero_probability_group_never_drawn(self):
        p = one_source((0.5, 0.0, 0.5))
        d = generate_mean_dataset(SamplingPlan((5000,)), p, MeanModel(np.zeros(3), 1.0, 1.0), 4)
        assert group_counts(d)[1] == 0

    def test_deterministic(self, clinic):
        model = MeanModel([0.0, 1.0], 5.0, 1.0)
        a = generate_mean_dataset(SamplingPlan((10, 20)), clinic, model, 5)
        b = generate_mean_dataset(SamplingPlan((10, 20)), clinic, model, 5)
        assert np.array_equal(a.y, b.y) and np.array_equal(a.z, b.z)

    def test_prefix_property(self, clinic):
        model = MeanModel([0.0, 1.0], 5.0, 1.0)
        small = SourcePool.mean((5, 8), clinic, model, 6, (0,)).take(SamplingPlan((5, 8)))
        big = SourcePool.mean((50, 80), clinic, model, 6, (0,)).take(SamplingPlan((5, 8)))
        assert np.array_equal(small.y, big.y) and np.array_equal(small.z, big.z)

    def test_mean_bound(self):
        with pytest.raises(ValueError):
            MeanModel([3.0], 1.0, 2.0)


class TestProbitGenerator:
    def test_zero_beta(self):
        p = one_source((1.0,))
        d = generate_probit_dataset(SamplingPlan((10_000,)), p, ProbitModel(np.zeros((1, 3))), 7)
        assert abs(d.y.mean() - 0.5) <= 0.02
        assert set(np.unique(d.y)) <= {0.0, 1.0}

    def test_saturated(self):
        p = one_source((1.0,))
        beta = 1e3 * np.array([[1.0, -0.5, 2.0]])
        d = generate_probit_dataset(SamplingPlan((10_000,)), p, ProbitModel(beta), 8)
        agree = np.mean(d.y == (d.x @ beta[0] > 0))
        assert agree >= 0.999

    def test_marginal_half(self):
        p = one_source((1.0,))
        d = generate_probit_dataset(SamplingPlan((20_000,)), p, ProbitModel([[1.0]]), 9)
        assert abs(d.y.mean() - 0.5) <= 4 * math.sqrt(0.25 / 20_000)

    def test_features_standard_normal(self):
        p = one_source((1.0,))
        d = generate_probit_dataset(SamplingPlan((20_000,)), p, ProbitModel(np.zeros((1, 4))), 10)
        assert np.all(np.abs(d.x.mean(axis=0)) < 0.04)
        np.testing.assert_allclose(np.cov(d.x.T), np.eye(4), atol=0.05)

    def test_conditional_probability(self):
        p = one_source((1.0,))
        beta = np.array([[0.8]])
        d = generate_probit_dataset(SamplingPlan((40_000,)), p, ProbitModel(beta), 11)
        # labels should be calibrated against Phi(x beta) in a few bins
        for lo, hi in [(-2, -1), (-0.5, 0.5), (1, 2)]:
            rows = (d.x[:, 0] >= lo) & (d.x[:, 0] < hi)
            assert abs(d.y[rows].mean() - ndtr(0.8 * d.x[rows, 0]).mean()) < 0.03


class TestTargets:
    def test_kinds(self):
        np.testing.assert_allclose(make_target("uniform", 4).probs, [0.25] * 4)
        np.testing.assert_allclose(make_target("increasing", 4).probs, [0.1, 0.2, 0.3, 0.4])
        np.testing.assert_allclose(make_target("pyramid", 4).probs, np.array([1, 2, 2, 1]) / 6)
        np.testing.assert_allclose(make_target("increasing", 5).probs, np.arange(1, 6) * 2 / 30)

    def test_unknown(self):
        with pytest.raises(ValueError):
            make_target("spiky", 3)


class TestSettings:
    def test_setting_one(self):
        s = setting_one()
        assert len(s.sources) == 10 and s.k == 5
        np.testing.assert_allclose(s.sources[0].dist.probs, [1, 0, 0, 0, 0])
        assert s.sources[0].cost == 0.02
        np.testing.assert_allclose(s.sources[4].dist.probs, [0.05, 0.25, 0.15, 0, 0.55])
        assert s.sources[4].cost == 0.1
        np.testing.assert_allclose(s.sources[9].dist.probs, [0, 0.5, 0, 0.5, 0])
        for src in s.sources:
            assert src.dist.probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_setting_two(self):
        s = setting_two()
        base = s.sources[0].dist.probs
        assert len(s.sources) == 20 and s.k == 20
        assert base[0] == pytest.approx(0.0057, abs=1e-12)
        for m in range(20):
            for j in range(20):
                # one-based: entry j of source m is base entry ((j + m - 2) mod 20) + 1
                assert s.sources[m].dist.probs[j] == pytest.approx(base[(j + m) % 20], abs=1e-15)
        assert s.sources[0].cost == pytest.approx(0.1)
        assert s.sources[19].cost == pytest.approx(1.0)
        np.testing.assert_allclose(np.diff([src.cost for src in s.sources]), 0.9 / 19)

    def test_base_vector_sum(self):
        from budgetwise.simkit.settings import SETTING_TWO_BASE
        assert sum(SETTING_TWO_BASE) == pytest.approx(1.0, abs=1e-12)

    def test_lookup(self):
        assert get_setting("setting1").k == 5
        with pytest.raises(ValueError):
            get_setting("setting3")


class TestExcessRisk:
    def test_truth_is_zero(self):
        truth = ProbitModel(np.random.default_rng(0).normal(size=(3, 4)))
        assert excess_risk(truth.bayes_classifier(), truth, GroupDist.uniform(3), 5000, 1) == 0.0

    def test_negated_truth(self):
        truth = ProbitModel([[1.0, 0.5], [-2.0, 1.0]])
        target = GroupDist([0.5, 0.5])
        got = excess_risk(Hypothesis(-truth.betas), truth, target, 50_000, 2)
        # independent oracle: plain Monte Carlo of E|2 Phi(x beta) - 1| per group
        x = np.random.default_rng(3).standard_normal((200_000, 2))
        expect = np.mean([np.mean(np.abs(2 * ndtr(x @ b) - 1)) for b in truth.betas])
        assert got > 0.1
        assert got == pytest.approx(expect, abs=0.01)

    def test_uninformative_truth(self):
        truth = ProbitModel(np.zeros((1, 3)))
        h = Hypothesis([[1.0, -1.0, 2.0]])
        assert excess_risk(h, truth, GroupDist([1.0]), 2000, 4) == 0.0

    def test_matches_label_simulation(self):
        # excess risk equals risk(h) - risk(Bayes) estimated from simulated labels
        truth = ProbitModel([[1.5, -0.5]])
        h = Hypothesis([[1.0, 1.0]])
        got = ExcessRiskEvaluator(truth, GroupDist([1.0]), 100_000, 5)(h)
        rng = np.random.default_rng(6)
        x = rng.standard_normal((400_000, 2))
        y = rng.random(400_000) < ndtr(x @ truth.betas[0])
        risk_h = np.mean((x @ h.coefficients[0] >= 0) != y)
        risk_b = np.mean((x @ truth.betas[0] >= 0) != y)
        assert got == pytest.approx(risk_h - risk_b, abs=0.01)


def mean_config(task="population_mean", reps=5, budgets=(50.0, 100.0), **kw):
    s = get_setting("setting1")
    problem = s.instance(make_target("uniform", s.k), budgets[-1])
    return ExperimentConfig(problem, budgets, reps, 123, task, "uniform", "setting1", **kw)


class TestRunner:
    def test_budget_grid(self):
        grid = default_budgets()
        assert len(grid) == 20 and grid[0] == 25 and grid[-1] == 500

    def test_config_validation(self, clinic):
        with pytest.raises(ValueError):
            ExperimentConfig(clinic, (10.0, 5.0), 1, 0, "population_mean")
        with pytest.raises(ValueError):
            ExperimentConfig(clinic, (10.0,), 0, 0, "population_mean")
        with pytest.raises(ValueError):
            ExperimentConfig(clinic, (10.0,), 1, 0, "regression")

    def test_single_replication_se(self):
        curves = run_experiment(mean_config(reps=1, budgets=(100.0,)), ["optimal"])
        pt = curves[0].points[0]
        assert pt.standard_error == 0 and pt.replications == 1

    def test_deterministic_and_worker_independent(self, tmp_path):
        cfg = mean_config(reps=6)
        a = run_experiment(cfg, ["optimal", "uniform", "theory"])
        b = run_experiment(cfg, ["optimal", "uniform", "theory"], workers=2)
        write_csv(a, cfg, tmp_path / "a.csv")
        write_csv(b, cfg, tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_adding_methods_keeps_draws(self):
        cfg = mean_config(reps=4)
        a = run_experiment(cfg, ["optimal"])[0]
        b = run_experiment(cfg, ["uniform", "nearest", "optimal"])[2]
        assert [p.mean_risk for p in a.points] == [p.mean_risk for p in b.points]

    def test_csv_format(self, tmp_path):
        cfg = mean_config(reps=2, budgets=(100.0,))
        curves = run_experiment(cfg, ["optimal", "theory"])
        path = tmp_path / "out.csv"
        write_csv(curves, cfg, path)
        raw = path.read_bytes()
        assert b"\r" not in raw
        lines = raw.decode().strip().split("\n")
        assert lines[0] == ",".join(CSV_HEADER)
        row = lines[1].split(",")
        assert row[:5] == ["setting1", "population_mean", "uniform", "optimal", "100"]
        assert float(row[5]) == curves[0].points[0].mean_risk
        assert lines[2].split(",")[6:] == ["0", "0"]

    def test_missing_cells(self, tmp_path):
        # at budget 0.5 every baseline buys nothing, optimal buys one cheap sample
        cfg = mean_config(reps=2, budgets=(0.5, 100.0))
        curves = run_experiment(cfg, ["uniform", "optimal"])
        assert curves[0].points[0].mean_risk is None
        assert curves[1].points[0].mean_risk is not None
        write_csv(curves, cfg, tmp_path / "m.csv")
        row = (tmp_path / "m.csv").read_text().split("\n")[1].split(",")
        assert row[5] == "" and row[6] == ""

    def test_truth_fixed_per_setting(self):
        a = draw_truth(mean_config())
        b = draw_truth(mean_config(task="group_means"))
        assert np.array_equal(a.mu, b.mu)
        c = draw_truth(mean_config(task="classification", feature_dim=3))
        assert c.betas.shape == (5, 3)

    def test_group_means_and_classification_run(self):
        gm = run_experiment(mean_config(task="group_means", reps=3), ["optimal", "theory"])
        assert all(p.mean_risk > 0 for c in gm for p in c.points)
        cl = run_experiment(mean_config(task="classification", reps=2, budgets=(100.0,), feature_dim=2,
                                        mc_samples=2000), ["optimal", "uniform"])
        assert all(0 <= c.points[0].mean_risk <= 1 for c in cl)

    def test_consistency_at_large_budget(self):
        # risk * n_eff / sigma^2 near 1 for the optimal plan in setting 1
        from budgetwise.model import effective_sample_size
        from budgetwise.planner import solve_optimal_plan
        cfg = mean_config(reps=400, budgets=(400.0, 500.0))
        curve = run_experiment(cfg, ["optimal"])[0]
        for pt in curve.points:
            problem = cfg.problem.with_budget(pt.budget)
            n_eff = effective_sample_size(solve_optimal_plan(problem).plan, problem.target, problem)
            assert 0.8 <= pt.mean_risk * n_eff / 5.0 <= 1.2

    def test_risk_falls_with_budget(self):
        for task in ("population_mean", "group_means"):
            curve = run_experiment(mean_config(task=task, reps=100, budgets=(25.0, 500.0)), ["optimal"])[0]
            assert curve.points[1].mean_risk < curve.points[0].mean_risk
