import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from logsfbm.kernels import ModelParams, dtilde_profile, m_q, rtilde_profile, scaling_bias
from logsfbm.simulate import SimConfig, VolSeries, generate
from logsfbm.estimators import (
    Correlogram,
    ScalingFit,
    correlogram_M,
    correlogram_lnM,
    log_increment_moments,
    scaling_estimate_H,
    scaling_fit_from_moments,
)


def series_of(values, delta=1.0):
    return VolSeries(delta=delta, values=np.asarray(values, dtype=float))


class TestCorrelogramM:
    def test_constant_series_closed_form(self):
        c, N = 2.5, 64
        cg = correlogram_M(series_of(np.full(N, c)), max_lag=5)
        for k in range(6):
            assert cg.values[k] == pytest.approx(c * c * (N - k) / N, rel=1e-14)

    def test_hand_computed_three_points(self):
        cg = correlogram_M(series_of([1.0, 2.0, 3.0]), max_lag=1)
        assert cg.values[1] == pytest.approx(8.0 / 3.0, rel=1e-15)
        assert cg.values[0] == pytest.approx(14.0 / 3.0, rel=1e-15)

    def test_fields(self):
        cg = correlogram_M(series_of(np.arange(1.0, 11.0)), max_lag=3)
        assert isinstance(cg, Correlogram)
        assert cg.kind == "raw_M"
        assert cg.count == 10
        assert list(cg.lags) == [0, 1, 2, 3]
        assert cg.values[0] > 0.0

    def test_rejects_excessive_lag(self):
        with pytest.raises(ValueError):
            correlogram_M(series_of([1.0, 2.0, 3.0]), max_lag=2)

    @given(c=st.floats(min_value=0.1, max_value=10.0))
    @settings(max_examples=40, deadline=None)
    def test_second_degree_homogeneity(self, c):
        vals = np.linspace(0.5, 2.0, 32)
        base = correlogram_M(series_of(vals), max_lag=4).values
        scaled = correlogram_M(series_of(c * vals), max_lag=4).values
        assert np.allclose(scaled, c * c * base, rtol=1e-12)

    @pytest.mark.slow
    def test_normalized_ratios_track_model_profile(self):
        p = ModelParams(H=0.1, lambda2=0.03, T=2.0 ** 17)
        model = rtilde_profile(p.H, p.nu2, np.arange(65))
        model_ratio = model / model[0]
        cfg = SimConfig(params=p, L=2.0 ** 14, delta=1.0, subdivisions=32, seed=7000)
        cg = correlogram_M(generate(cfg).measure, max_lag=64)
        ratio = cg.values / cg.values[0]
        assert float(np.max(np.abs(ratio - model_ratio))) < 0.05


class TestCorrelogramLnM:
    def test_constant_series_vanishes(self):
        cg = correlogram_lnM(series_of(np.full(32, 4.2)), max_lag=4)
        assert np.allclose(cg.values, 0.0, atol=1e-28)

    def test_hand_computed_geometric_series(self):
        cg = correlogram_lnM(series_of([math.e, math.e ** 2, math.e ** 3]), max_lag=1)
        assert cg.values[1] == pytest.approx(0.0, abs=1e-15)
        assert cg.values[0] == pytest.approx(2.0 / 3.0, rel=1e-12)

    def test_kind_and_mean(self):
        vals = np.array([1.0, 2.0, 4.0, 8.0])
        cg = correlogram_lnM(series_of(vals), max_lag=1)
        assert cg.kind == "centered_lnM"
        assert cg.mean == pytest.approx(float(np.mean(np.log(vals))), rel=1e-14)

    def test_rejects_nonpositive_values(self):
        s = series_of([1.0, 2.0, 3.0, 4.0])
        object.__setattr__(s, "values", np.array([1.0, 0.0, 3.0, 4.0]))
        with pytest.raises(ValueError, match="positive"):
            correlogram_lnM(s, max_lag=1)
        with pytest.raises(ValueError, match="positive"):
            log_increment_moments(s, 2.0, [1])

    def test_translation_invariance_is_exact(self):
        vals = np.random.default_rng(3).lognormal(0.0, 0.5, 256)
        a = correlogram_lnM(series_of(vals), max_lag=8).values
        b = correlogram_lnM(series_of(3.7 * vals), max_lag=8).values
        assert np.allclose(a, b, atol=1e-14)

    def test_difference_profile_starts_at_zero(self):
        vals = np.random.default_rng(4).lognormal(0.0, 0.3, 64)
        cg = correlogram_lnM(series_of(vals), max_lag=4)
        d = cg.values - cg.values[0]
        assert d[0] == 0.0

    @pytest.mark.slow
    def test_difference_profile_tracks_model(self):
        p = ModelParams(H=0.1, lambda2=0.08, T=2.0 ** 17)
        model = dtilde_profile(p.H, p.nu2, np.arange(65))
        model_diff = model - model[0]
        cfg = SimConfig(params=p, L=2.0 ** 14, delta=1.0, subdivisions=32, seed=500)
        cg = correlogram_lnM(generate(cfg).measure, max_lag=64)
        emp = cg.values - cg.values[0]
        assert float(np.max(np.abs(emp - model_diff))) < 0.10


class TestLogIncrementMoments:
    def test_constant_series(self):
        taus, m_hat = log_increment_moments(series_of(np.full(32, 3.0)), 2.0, [1, 2, 4])
        assert np.array_equal(taus, [1.0, 2.0, 4.0])
        assert np.allclose(m_hat, 0.0)

    def test_iid_lognormal_variance(self):
        v = 0.25
        x = np.exp(np.random.default_rng(11).normal(0.0, math.sqrt(v), 2 ** 15))
        _, m_hat = log_increment_moments(series_of(x), 2.0, [1, 5, 20])
        assert np.allclose(m_hat, 2.0 * v, rtol=0.04)

    def test_matches_analytic_moments_on_simulated_paths(self):
        p = ModelParams(H=0.1, lambda2=0.08, T=2.0 ** 13)
        taus = [10, 50, 200, 500]
        theory = np.array([m_q(p, 2.0, float(t), 1.0) for t in taus])
        acc = np.zeros(len(taus))
        reps = 10
        for rep in range(reps):
            c = SimConfig(params=p, L=2.0 ** 13, delta=1.0, subdivisions=32, seed=800 + rep)
            _, mh = log_increment_moments(generate(c).measure, 2.0, taus)
            acc += mh
        rel = np.abs(acc / reps - theory) / theory
        # first order in lambda2 plus long-lag sampling noise
        assert float(rel.max()) < 0.15

    def test_rejects_non_multiple_lags(self):
        s = series_of(np.arange(1.0, 33.0), delta=2.0)
        with pytest.raises(ValueError):
            log_increment_moments(s, 2.0, [3.0])

    def test_rejects_out_of_range_lags(self):
        s = series_of(np.arange(1.0, 9.0))
        with pytest.raises(ValueError):
            log_increment_moments(s, 2.0, [8])
        with pytest.raises(ValueError):
            log_increment_moments(s, 2.0, [0])

    def test_rejects_nonpositive_order(self):
        with pytest.raises(ValueError):
            log_increment_moments(series_of([1.0, 2.0, 3.0]), 0.0, [1])


class TestScalingEstimateH:
    def test_exact_moments_recover_biased_slope(self):
        H = 0.1
        p = ModelParams(H=H, lambda2=0.08, T=2.0 ** 17)
        taus = np.arange(10.0, 501.0)
        moments = np.array([m_q(p, 2.0, t, 1.0) for t in taus])
        fit = scaling_fit_from_moments(2.0, taus, moments)
        B, _ = scaling_bias(H, 1.0, taus)
        assert fit.H_hat == pytest.approx(H + B / 2.0, abs=1e-6)
        assert isinstance(fit, ScalingFit)
        assert fit.r2 > 0.99

    def test_multifractal_bias_reproduced_on_sampled_log_vol(self):
        # synthesize the cell-averaged log volatility directly from its
        # analytic covariance, then watch the scaling estimator overshoot
        from conftest import stationary_gaussian
        from logsfbm.kernels import cov_lnM

        p = ModelParams(H=0.002, lambda2=0.08, T=2.0 ** 14)
        L = 2 ** 13
        cov = np.array([cov_lnM(p, 1.0, float(k)) for k in range(L)])
        taus = np.arange(10, 501)
        estimates = []
        for rep in range(20):
            r = np.random.default_rng(2200 + rep)
            x = stationary_gaussian(cov, L, r)
            fit = scaling_estimate_H(series_of(np.exp(x)), 2.0, taus)
            estimates.append(fit.H_hat)
        mean_h = float(np.mean(estimates))
        B, _ = scaling_bias(p.H, 1.0, taus.astype(float))
        assert 0.06 <= mean_h <= 0.10
        assert abs(mean_h - (p.H + B / 2.0)) <= 0.016

    @pytest.mark.parametrize("seed", [20, 21, 22])
    def test_fractional_noise_without_cell_smoothing_is_unbiased(self, seed):
        x = oracles.fbm(0.3, 2 ** 15, seed)
        fit = scaling_estimate_H(series_of(np.exp(x[1:])), 2.0, np.arange(1.0, 65.0))
        assert abs(fit.H_hat - 0.3) < 0.03

    def test_degenerate_regression_raises(self):
        with pytest.raises(ValueError):
            scaling_fit_from_moments(2.0, np.array([10.0, 20.0]), np.array([0.0, 0.0]))

    def test_needs_two_lags(self):
        s = series_of(np.random.default_rng(0).lognormal(0.0, 0.3, 64))
        with pytest.raises(ValueError):
            scaling_estimate_H(s, 2.0, [4])
