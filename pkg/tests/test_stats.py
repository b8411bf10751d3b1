"""Histogram/correlation/smoothing contracts and MLE fit recovery.

Fit oracles: samples drawn through inverse-CDF samplers with the generating
parameters as recovery targets, cross-checked against scipy's fitters.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trajcrit.errors import (
    DataError,
    DegenerateDataError,
    SpecError,
    UndefinedCorrelationError,
)
from trajcrit.stats import (
    FitResult,
    Histogram,
    HistogramSpec,
    fit_gev,
    fit_logistic,
    gev_pdf,
    histogram,
    histogram2d,
    logistic_pdf,
    pearson,
    smooth,
)


def sample_logistic(mu, sigma, n, seed):
    u = np.random.default_rng(seed).uniform(1e-12, 1 - 1e-12, n)
    return mu + sigma * np.log(u / (1 - u))


def sample_gev(mu, sigma, xi, n, seed):
    u = np.random.default_rng(seed).uniform(1e-12, 1 - 1e-12, n)
    if abs(xi) < 1e-12:
        return mu - sigma * np.log(-np.log(u))
    return mu + sigma * ((-np.log(u)) ** -xi - 1.0) / xi


class TestHistogram:
    def test_forced_example(self):
        h = histogram([1.0, 1.0, 2.0], HistogramSpec(edges=(0.0, 1.5, 3.0)))
        assert h.counts.tolist() == [2, 1]
        assert h.n == 3 and h.underflow == 0 and h.overflow == 0

    def test_empty(self):
        h = histogram([], HistogramSpec(0.0, 1.0, 4))
        assert h.counts.tolist() == [0, 0, 0, 0] and h.n == 0

    def test_left_closed_right_open(self):
        h = histogram([0.0, 1.0, 2.0], HistogramSpec(0.0, 2.0, 2))
        assert h.counts.tolist() == [1, 1]
        assert h.overflow == 1  # 2.0 falls outside the half-open top bin

    def test_drop_vs_saturate(self):
        spec_drop = HistogramSpec(0.0, 10.0, 10, clamp="drop")
        spec_sat = HistogramSpec(0.0, 10.0, 10, clamp="saturate")
        vals = [-5.0, 5.0, 15.0]
        dropped = histogram(vals, spec_drop)
        assert dropped.underflow == 1 and dropped.overflow == 1
        assert int(dropped.counts.sum()) + dropped.underflow + dropped.overflow == dropped.n
        saturated = histogram(vals, spec_sat)
        assert saturated.counts[0] == 1 and saturated.counts[5] == 1
        assert saturated.counts[-1] == 1
        assert saturated.underflow == 0 and saturated.overflow == 0

    def test_uniform_against_binomial_oracle(self):
        n, bins = 100_000, 20
        values = np.random.default_rng(11).uniform(0, 1, n)
        h = histogram(values, HistogramSpec(0.0, 1.0, bins))
        p = 1.0 / bins
        sigma = np.sqrt(n * p * (1 - p))
        assert np.all(np.abs(h.counts - n * p) < 5 * sigma)

    def test_bad_spec(self):
        with pytest.raises(SpecError):
            HistogramSpec(1.0, 1.0, 5)
        with pytest.raises(SpecError):
            HistogramSpec(edges=(1.0, 1.0))

    @settings(max_examples=50, derandomize=True)
    @given(st.lists(st.floats(-50, 50), min_size=0, max_size=200))
    def test_total_preservation(self, values):
        h = histogram(values, HistogramSpec(-10.0, 10.0, 7))
        assert int(h.counts.sum()) + h.underflow + h.overflow == h.n


class TestHistogram2d:
    def test_single_pair(self):
        h = histogram2d([0.5], [0.5], HistogramSpec(0, 1, 2), HistogramSpec(0, 1, 2))
        assert h.counts.sum() == 1 and h.counts[1, 1] == 1

    def test_marginals_match_1d(self):
        rng = np.random.default_rng(3)
        xs = rng.uniform(0, 5, 1000)
        ys = rng.uniform(-2, 2, 1000)
        sx, sy = HistogramSpec(0.0, 5.0, 8), HistogramSpec(-2.0, 2.0, 6)
        h2 = histogram2d(xs, ys, sx, sy)
        assert h2.counts.sum(axis=1).tolist() == histogram(xs, sx).counts.tolist()
        assert h2.counts.sum(axis=0).tolist() == histogram(ys, sy).counts.tolist()

    def test_two_clusters(self):
        rng = np.random.default_rng(4)
        # Cluster centers sit at bin midpoints so every sample lands in one cell.
        xs = np.concatenate([rng.normal(1.5, 0.05, 500), rng.normal(3.5, 0.05, 500)])
        ys = np.concatenate([rng.normal(-1.5, 0.05, 500), rng.normal(1.5, 0.05, 500)])
        h2 = histogram2d(xs, ys, HistogramSpec(0, 5, 5), HistogramSpec(-2, 2, 4))
        assert h2.counts[1, 0] == 500 and h2.counts[3, 3] == 500

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            histogram2d([1.0], [1.0, 2.0], HistogramSpec(0, 1, 2), HistogramSpec(0, 1, 2))


class TestPearson:
    def test_perfect(self):
        x = np.arange(10.0)
        assert pearson(x, 2 * x) == pytest.approx(1.0)
        assert pearson(x, -x) == pytest.approx(-1.0)

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(7)
        x = np.linspace(0, 10, 200)
        y = -3.0 * x + rng.normal(0, 2.0, 200)
        r = pearson(x, y)
        ref = float(np.corrcoef(x, y)[0, 1])
        assert r == pytest.approx(ref, abs=0.02)

    def test_zero_variance(self):
        with pytest.raises(UndefinedCorrelationError):
            pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    @settings(max_examples=50, derandomize=True)
    @given(
        scale=st.floats(0.1, 10),
        shift=st.floats(-100, 100),
    )
    def test_affine_invariance(self, scale, shift):
        rng = np.random.default_rng(9)
        x = rng.normal(0, 1, 50)
        y = x + rng.normal(0, 0.5, 50)
        base = pearson(x, y)
        assert pearson(scale * x + shift, y) == pytest.approx(base, abs=1e-9)
        assert pearson(-scale * x + shift, y) == pytest.approx(-base, abs=1e-9)


class TestLogisticFit:
    def test_recovery_at_reported_acceleration_parameters(self):
        samples = sample_logistic(0.122, 0.147, 50_000, seed=101)
        fit = fit_logistic(samples)
        assert fit.converged
        assert fit.location == pytest.approx(0.122, abs=0.01)
        assert fit.scale == pytest.approx(0.147, abs=0.01)

    def test_scipy_cross_check(self):
        from scipy import stats as sps

        samples = sample_logistic(-0.5, 0.8, 20_000, seed=17)
        ours = fit_logistic(samples)
        loc, scale = sps.logistic.fit(samples)
        assert ours.location == pytest.approx(loc, abs=1e-4)
        assert ours.scale == pytest.approx(scale, abs=1e-4)

    def test_symmetric_data_location_near_median(self):
        samples = sample_logistic(3.0, 1.0, 20_000, seed=23)
        fit = fit_logistic(samples)
        assert fit.location == pytest.approx(float(np.median(samples)), abs=0.05)

    def test_loglik_improves_over_start(self):
        samples = sample_logistic(1.0, 0.5, 5_000, seed=29)
        fit = fit_logistic(samples)
        mu0 = float(np.median(samples))
        sigma0 = float(np.sqrt(3.0) * np.std(samples) / np.pi)
        start = np.sum(np.log(logistic_pdf(samples, mu0, sigma0)))
        assert fit.log_likelihood >= start

    def test_constant_data_raises(self):
        with pytest.raises(DegenerateDataError):
            fit_logistic(np.ones(100))

    def test_too_few_points(self):
        with pytest.raises(DataError):
            fit_logistic(np.arange(5.0))

    def test_deterministic(self):
        samples = sample_logistic(0.0, 1.0, 2_000, seed=31)
        a, b = fit_logistic(samples), fit_logistic(samples)
        assert a == b


class TestGevFit:
    def test_recovery_ttc_parameters(self):
        samples = sample_gev(19.0, 16.0, 0.5, 50_000, seed=41)
        fit = fit_gev(samples)
        assert fit.converged
        for got, want in zip(fit.params, (19.0, 16.0, 0.5)):
            assert abs(got - want) / abs(want) < 0.05

    def test_recovery_thw_parameters(self):
        samples = sample_gev(1.1, 0.7, 0.5, 50_000, seed=43)
        fit = fit_gev(samples)
        for got, want in zip(fit.params, (1.1, 0.7, 0.5)):
            assert abs(got - want) / abs(want) < 0.05

    def test_gumbel_limit(self):
        samples = sample_gev(5.0, 2.0, 0.0, 50_000, seed=47)
        fit = fit_gev(samples)
        assert abs(fit.params[2]) < 0.05

    def test_scipy_cross_check(self):
        from scipy import stats as sps

        samples = sample_gev(10.0, 4.0, 0.3, 20_000, seed=53)
        ours = fit_gev(samples)
        c, loc, scale = sps.genextreme.fit(samples)
        # scipy's shape convention is the negative of ours.
        assert ours.location == pytest.approx(loc, rel=0.02)
        assert ours.scale == pytest.approx(scale, rel=0.02)
        assert ours.params[2] == pytest.approx(-c, abs=0.02)

    def test_support_constraint_holds(self):
        samples = sample_gev(0.0, 1.0, 0.4, 5_000, seed=59)
        fit = fit_gev(samples)
        mu, sigma, xi = fit.params
        assert np.all(1.0 + xi * (samples - mu) / sigma > 0)

    def test_loglik_improves_over_start(self):
        samples = sample_gev(2.0, 1.0, 0.2, 5_000, seed=61)
        fit = fit_gev(samples)
        std = float(np.std(samples))
        sigma0 = np.sqrt(6.0) * std / np.pi
        mu0 = float(np.mean(samples)) - 0.5772156649015329 * sigma0
        start = np.sum(np.log(gev_pdf(samples, mu0, sigma0, 0.1)))
        assert fit.log_likelihood >= start

    def test_deterministic(self):
        samples = sample_gev(1.0, 1.0, 0.2, 2_000, seed=67)
        assert fit_gev(samples) == fit_gev(samples)

    def test_too_few_points(self):
        with pytest.raises(DataError):
            fit_gev(np.arange(20.0))


class TestSmooth:
    def test_constant_unchanged(self):
        out = smooth(np.full(20, 3.5), 5)
        assert np.allclose(out, 3.5)

    def test_impulse_plateau(self):
        w = 5
        series = np.zeros(21)
        series[10] = float(w)
        out = smooth(series, w)
        assert np.allclose(out[8:13], 1.0)
        assert np.allclose(out[:8], 0.0) and np.allclose(out[13:], 0.0)

    def test_linear_ramp_interior_unchanged(self):
        series = np.arange(30.0)
        out = smooth(series, 7)
        assert np.allclose(out[3:-3], series[3:-3])

    def test_even_window_rejected(self):
        with pytest.raises(SpecError):
            smooth(np.arange(10.0), 4)

    def test_window_longer_than_series_rejected(self):
        with pytest.raises(SpecError):
            smooth(np.arange(3.0), 5)


class TestFitResultShape:
    def test_fields(self):
        fit = fit_logistic(sample_logistic(0, 1, 100, seed=71))
        assert isinstance(fit, FitResult)
        assert fit.family == "logistic" and len(fit.params) == 2
        assert fit.n == 100 and fit.iterations >= 1
