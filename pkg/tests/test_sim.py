import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize, special, stats

from gammaprime import bayes, sim
from gammaprime import effect_core as ec
from gammaprime.errors import InvalidNuisance, InvalidSpec, NoConvergence, SeparationDetected


def exact_rejection_rates(n_cases, log_or, lo=0.05, hi=0.95, alpha=0.05, nodes=64):
    """Exact rejection probabilities of both tests under the product-binomial
    sampler, averaging over q ~ U(lo, hi) by Gauss-Legendre quadrature."""
    k = np.arange(n_cases + 1)
    a = k[:, None] + 0.5
    c = k[None, :] + 0.5
    b = n_cases - a + 1.0
    d = n_cases - c + 1.0
    x = np.log(a * d / (b * c))
    se = np.sqrt(1 / a + 1 / b + 1 / c + 1 / d)
    z = x / se
    t = z * 4 / np.abs(4 - x * np.tanh(x / 4))
    crit = stats.norm.isf(alpha / 2)
    rej_z = np.abs(z) > crit
    rej_t = np.abs(t) > crit
    u, wts = np.polynomial.legendre.leggauss(nodes)
    qs = lo + (hi - lo) * (u + 1) / 2
    rz = rt = 0.0
    for q, wq in zip(qs, wts / 2):
        p = q * math.exp(log_or) / (1 + q * (math.exp(log_or) - 1))
        joint = np.outer(stats.binom.pmf(k, n_cases, p), stats.binom.pmf(k, n_cases, q))
        rz += wq * joint[rej_z].sum()
        rt += wq * joint[rej_t].sum()
    return rz, rt


class TestSampleTable:
    def test_derived_case_probability(self):
        assert sim.exposure_prob_cases(0.2, math.log(2)) == pytest.approx(1 / 3, rel=1e-14)
        q = 0.2
        p = float(sim.exposure_prob_cases(q, math.log(2)))
        assert q == pytest.approx(p / ((1 - p) * 2 + p), rel=1e-14)

    def test_margins_and_determinism(self):
        t1 = sim.sample_table(0.7, 40, 1.5, 0.3, np.random.default_rng(8))
        t2 = sim.sample_table(0.7, 40, 1.5, 0.3, np.random.default_rng(8))
        assert t1 == t2
        assert t1.n_cases == 40 and t1.n_controls == 60

    def test_null_symmetry(self):
        rng = np.random.default_rng(4)
        n11 = [sim.sample_table(0.0, 30, 1.0, 0.5, rng).n11 for _ in range(4000)]
        # sd of the mean fraction is 0.5 / sqrt(30 * 4000)
        assert np.mean(n11) / 30 == pytest.approx(0.5, abs=5e-3)

    def test_invalid_nuisance(self):
        rng = np.random.default_rng(0)
        with pytest.raises(InvalidNuisance):
            sim.sample_table(0.0, 10, 1.0, 0.0, rng)
        with pytest.raises(InvalidNuisance):
            sim.sample_table(800.0, 10, 1.0, 0.5, rng)
        with pytest.raises(InvalidNuisance):
            sim.FrequentistSimConfig(10, nuisance=(0.0, 0.5))


class TestConfigValidation:
    def test_rejects(self):
        with pytest.raises(InvalidSpec):
            sim.FrequentistSimConfig(1)
        with pytest.raises(InvalidSpec):
            sim.FrequentistSimConfig(10, n_reps=0)
        with pytest.raises(InvalidSpec):
            sim.FrequentistSimConfig(10, tau=-1)
        with pytest.raises(InvalidSpec):
            sim.SelectionSimConfig(0, 100)
        with pytest.raises(InvalidSpec):
            sim.SelectionSimConfig(10, 100, level=1.0)
        with pytest.raises(InvalidSpec):
            sim.LogisticSimConfig(s=0)
        with pytest.raises(ValueError):
            sim.FrequentistSimConfig(10, effect_mode="bogus")

    def test_logistic_intercept_formula(self):
        cfg = sim.LogisticSimConfig(mu0=-1.0, mu1=1.0, s=2.0, w=0.5)
        assert cfg.beta == 0.5 and cfg.alpha == 0.0
        cfg = sim.LogisticSimConfig(predictor="bernoulli", p=0.75, q=0.25)
        assert cfg.alpha == pytest.approx(-math.log(3)) and cfg.beta == pytest.approx(2 * math.log(3))


class TestFrequentist:
    def test_deterministic(self):
        cfg = sim.FrequentistSimConfig(30, log_or=0.5, n_reps=20_000, seed=7)
        assert sim.simulate_frequentist(cfg).to_dict() == sim.simulate_frequentist(cfg).to_dict()

    def test_workers_match_serial(self):
        cfg = sim.FrequentistSimConfig(40, effect_mode="random_log_or", n_reps=3 * sim.BLOCK_SIZE + 17, seed=2)
        assert sim.simulate_frequentist(cfg, workers=3).to_dict() == sim.simulate_frequentist(cfg).to_dict()

    @pytest.mark.parametrize("n_cases,odds_ratio", [(25, 1.0), (25, 3.0), (50, 2.0)])
    def test_against_exact_enumeration(self, n_cases, odds_ratio):
        ez, et = exact_rejection_rates(n_cases, math.log(odds_ratio))
        r = sim.simulate_frequentist(
            sim.FrequentistSimConfig(n_cases, log_or=math.log(odds_ratio), n_reps=100_000, seed=3)
        )
        assert abs(r.rate_z - ez) < 4 * r.mc_se_z
        assert abs(r.rate_t - et) < 4 * r.mc_se_t

    def test_z_over_t_matches_ratio(self):
        rng = np.random.default_rng(1)
        q = rng.uniform(0.05, 0.95, 5000)
        counts = sim.sample_counts(rng.normal(0, 1, 5000), 60, 60, q, rng)
        x, _, _, z, t = sim._corrected_stats(*counts)
        ok = (np.abs(x) > 1e-12) & (np.abs(x) < ec.LOG_OR_AT_MAX)
        np.testing.assert_allclose(z[ok] / t[ok], ec.z_t_ratio(x[ok]), rtol=1e-10)
        # past the bound T keeps the sign of log OR
        far = np.abs(x) > ec.LOG_OR_AT_MAX
        assert far.any()
        np.testing.assert_allclose(z[far] / t[far], np.abs(ec.z_t_ratio(x[far])), rtol=1e-10)

    @pytest.mark.parametrize("odds_ratio", [1.0, 1.5, 3.0])
    def test_t_at_least_z(self, odds_ratio):
        r = sim.simulate_frequentist(sim.FrequentistSimConfig(50, log_or=math.log(odds_ratio), n_reps=50_000, seed=5))
        assert r.rate_t >= r.rate_z - 2 * r.mc_se_z
        assert 0 <= r.rate_z <= 1 and 0 <= r.rate_t <= 1

    def test_large_sample_size(self):
        r = sim.simulate_frequentist(sim.FrequentistSimConfig(5000, n_reps=40_000, seed=9))
        assert abs(r.rate_z - 0.05) < 3 * r.mc_se_z
        assert abs(r.rate_t - 0.05) < 3 * r.mc_se_t

    def test_mc_se(self):
        r = sim.simulate_frequentist(sim.FrequentistSimConfig(20, n_reps=1000, seed=1))
        assert r.mc_se_z == pytest.approx(math.sqrt(r.rate_z * (1 - r.rate_z) / 1000))
        assert r.count_t == round(r.rate_t * 1000)


class TestSelection:
    def test_no_selection_no_bias(self):
        r = sim.simulate_selection(sim.SelectionSimConfig(1, 500, n_reps=600, seed=4))
        assert abs(r.mean_hat_gamma_prime - r.mean_true_gamma_prime) < 2 * r.mc_se_hat_minus_true

    def test_winners_curse(self):
        r = sim.simulate_selection(sim.SelectionSimConfig(10_000, 500, n_reps=60, seed=2))
        assert r.mean_hat_gamma_prime > r.mean_posterior_gamma_prime
        assert r.mean_hat_gamma_prime - r.mean_true_gamma_prime > 0.05

    def test_deterministic_and_parallel(self):
        cfg = sim.SelectionSimConfig(200, 300, n_reps=24, seed=6)
        a = sim.simulate_selection(cfg)
        assert a.to_dict() == sim.simulate_selection(cfg).to_dict()
        assert a.to_dict() == sim.simulate_selection(cfg, workers=2).to_dict()

    def test_custom_prior(self):
        prior = bayes.DiscretePrior([-0.5, 0.0, 0.5], [0.25, 0.5, 0.25])
        r = sim.simulate_selection(sim.SelectionSimConfig(50, 400, n_reps=40, prior=prior, seed=1))
        assert 0 <= r.coverage <= 1
        assert r.config["prior"] == "discrete[3]"


class TestFitLogistic:
    def test_binary_predictor_closed_form(self):
        rng = np.random.default_rng(0)
        x = (rng.uniform(size=3000) < 0.4).astype(float)
        y = (rng.uniform(size=3000) < special.expit(-0.5 + 1.2 * x)).astype(float)
        fit = sim.fit_logistic(x, y)
        n11 = np.sum((x == 1) & (y == 1))
        n12 = np.sum((x == 1) & (y == 0))
        n21 = np.sum((x == 0) & (y == 1))
        n22 = np.sum((x == 0) & (y == 0))
        assert fit.slopes[0] == pytest.approx(math.log(n11 * n22 / (n12 * n21)), abs=1e-9)
        assert fit.covariance[1, 1] == pytest.approx(1 / n11 + 1 / n12 + 1 / n21 + 1 / n22, rel=1e-8)
        assert fit.intercept == pytest.approx(math.log(n21 / n22), abs=1e-9)

    def test_matches_generic_optimizer(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(800, 3))
        y = (rng.uniform(size=800) < special.expit(0.3 + X @ [0.5, -1.0, 0.2])).astype(float)
        fit = sim.fit_logistic(X, y)
        D = np.column_stack([np.ones(800), X])

        def nll(b):
            eta = D @ b
            return np.sum(np.logaddexp(0, eta) - y * eta)

        ref = optimize.minimize(nll, np.zeros(4), method="BFGS", options={"gtol": 1e-10})
        np.testing.assert_allclose(fit.coef, ref.x, atol=1e-5)

    def test_null_calibration(self):
        inside = 0
        for seed in range(200):
            rng = np.random.default_rng(seed)
            x = rng.normal(size=10_000)
            y = (rng.uniform(size=10_000) < 0.3).astype(float)
            fit = sim.fit_logistic(x, y)
            inside += abs(fit.slopes[0]) < 3 * fit.se[1]
        assert inside >= 198

    def test_mixture_slope_recovered(self):
        cfg = sim.LogisticSimConfig(mu0=0.0, mu1=1.0, s=1.0, w=0.5, n=100_000)
        X, y = sim.sample_logistic_data(cfg, np.random.default_rng(3))
        fit = sim.fit_logistic(X, y)
        assert abs(fit.slopes[0] - 1.0) < 0.05

    def test_symmetric_mixture_zero_intercept(self):
        cfg = sim.LogisticSimConfig(mu0=-0.8, mu1=0.8, s=1.0, w=0.5, n=50_000)
        fit = sim.fit_logistic(*sim.sample_logistic_data(cfg, np.random.default_rng(2)))
        assert abs(fit.intercept) < 3 * fit.se[0]

    def test_separation(self):
        x = np.arange(20, dtype=float)
        y = (x > 9.5).astype(float)
        with pytest.raises(SeparationDetected):
            sim.fit_logistic(x, y)

    def test_no_convergence(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=200)
        y = (rng.uniform(size=200) < special.expit(x)).astype(float)
        with pytest.raises(NoConvergence):
            sim.fit_logistic(x, y, max_iter=1)

    def test_bad_input(self):
        with pytest.raises(ValueError):
            sim.fit_logistic(np.ones(10), np.r_[np.zeros(5), np.ones(5)])
        with pytest.raises(ValueError):
            sim.fit_logistic(np.arange(4.0), [0, 1, 2, 1])


class TestLogisticBound:
    def test_null_slopes_concentrate(self):
        cfg = sim.LogisticSimConfig(mu0=0.5, mu1=0.5, n=2000, seed=3)
        rep = sim.simulate_logistic_bound(cfg, n_datasets=50)
        assert rep.n_separated == 0
        assert rep.max_abs < 0.1

    def test_bounded_on_random_configs(self):
        rep = sim.simulate_logistic_bound(sim.random_logistic_configs(200, seed=1))
        assert rep.max_abs <= ec.LLC + 0.02
        assert rep.n_datasets == 200

    def test_near_extremal_approaches_bound(self):
        cfg = sim.LogisticSimConfig(predictor="bernoulli", n=5000, **sim.NEAR_EXTREMAL)
        rep = sim.simulate_logistic_bound(cfg, n_datasets=20)
        assert rep.max > 0.64

    def test_binary_slope_is_standardized_log_or(self):
        cfg = sim.LogisticSimConfig(predictor="bernoulli", p=0.7, q=0.4, v=0.3, n=3000)
        X, y = sim.sample_logistic_data(cfg, np.random.default_rng(5))
        fit = sim.fit_logistic(X, y)
        x = X[:, 0]
        cells = [np.sum((x == a) & (y == b)) for a in (1, 0) for b in (1, 0)]
        gamma_hat = math.log(cells[0] * cells[3] / (cells[1] * cells[2])) / ec.sigma_hat_from_counts(*cells)
        assert fit.slopes[0] / math.sqrt(fit.covariance[1, 1] * 3000) == pytest.approx(gamma_hat, rel=1e-8)


class TestConfigFile:
    def test_grid_expansion(self):
        text = "kind = frequentist\nn_cases = 25|100\nodds_ratio = 1|2\nn_reps = 100\n"
        cfgs = sim.parse_config(text, seed=11)
        assert len(cfgs) == 4
        assert {c.n_cases for c in cfgs} == {25, 100}
        assert {round(math.exp(c.log_or), 12) for c in cfgs} == {1.0, 2.0}
        assert all(c.seed == 11 for c in cfgs)

    def test_sections_and_types(self):
        text = "[run]\nkind = selection\nl_tests = 100\nn = 200\nn_reps = 3\nnuisance = 0.1 0.9\n"
        (cfg,) = sim.parse_config(text)
        assert isinstance(cfg, sim.SelectionSimConfig)
        assert cfg.nuisance == (0.1, 0.9)

    def test_logistic_kind(self):
        (cfg,) = sim.parse_config("kind = logistic\npredictor = bernoulli\np = 0.9\n")
        assert cfg.predictor is sim.Predictor.BERNOULLI

    @pytest.mark.parametrize(
        "text", ["kind = nope\n", "n_cases = 10\nbogus = 1\n", "n_cases = ten\n", "n_cases = 10\nnuisance = 0.1\n"]
    )
    def test_errors(self, text):
        with pytest.raises(InvalidSpec):
            sim.parse_config(text)


class TestReports:
    def test_csv_and_json(self):
        import csv
        import io
        import json

        cfgs = sim.parse_config("n_cases = 20|40\nn_reps = 500\n", seed=1)
        reports = [sim.run_config(c) for c in cfgs]
        rows = list(csv.DictReader(io.StringIO(sim.reports_to_csv(reports))))
        assert len(rows) == 2
        for row, rep in zip(rows, reports):
            assert float(row["rate_z"]) == rep.rate_z
            assert float(row["mc_se_t"]) == rep.mc_se_t
        back = json.loads(sim.reports_to_json(reports))
        assert back[1]["rate_t"] == reports[1].rate_t

    def test_logistic_report_row(self):
        rep = sim.run_config(sim.LogisticSimConfig(n=300), n_datasets=3)
        text = sim.reports_to_csv([rep])
        assert "max_abs" in text.splitlines()[0]

    @given(st.floats(0.0, 1.0), st.integers(1, 10**6))
    @settings(max_examples=50)
    def test_mc_se_bounds(self, rate, n):
        assert 0 <= sim._mc_se(rate, n) <= 0.5 / math.sqrt(n) + 1e-15
