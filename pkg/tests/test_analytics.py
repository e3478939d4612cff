import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sitegauge.analytics import (
    dataset_summary,
    l1_score,
    mean_ci95,
    ols_fit,
    predict_area_from_ntl,
    site_change,
    yearly_trend,
)
from sitegauge.errors import DegenerateFitError, DegenerateTrendError


def normal_equation_oracle(points):
    """Closed-form least squares via the 2x2 normal equations."""
    x = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    A = np.array([[len(x), x.sum()], [x.sum(), (x * x).sum()]])
    rhs = np.array([y.sum(), (x * y).sum()])
    b0, m = np.linalg.solve(A, rhs)
    return m, b0


class TestOls:
    def test_collinear(self):
        fit = ols_fit([(0, 0), (1, 2), (2, 4)])
        assert fit.slope == pytest.approx(2.0)
        assert fit.intercept == pytest.approx(0.0)
        assert fit.r_squared == 1.0

    def test_constant_y_convention(self):
        fit = ols_fit([(0, 1), (1, 1), (2, 1)])
        assert fit.slope == pytest.approx(0.0)
        assert fit.intercept == pytest.approx(1.0)
        assert fit.r_squared == 1.0

    def test_identical_x_rejected(self):
        with pytest.raises(DegenerateFitError):
            ols_fit([(1, 0), (1, 5), (1, 9)])

    def test_matches_normal_equations(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(3, 200))
            x = rng.normal(0, 10, n)
            y = 3.0 * x + rng.normal(5, 2, n)
            pts = list(zip(x, y))
            fit = ols_fit(pts)
            m, b0 = normal_equation_oracle(pts)
            assert fit.slope == pytest.approx(m, rel=1e-9)
            assert fit.intercept == pytest.approx(b0, rel=1e-9, abs=1e-9)

    def test_residuals_orthogonal(self):
        rng = np.random.default_rng(1)
        x = rng.normal(0, 5, 200)
        y = rng.normal(0, 3, 200) + 0.5 * x
        fit = ols_fit(list(zip(x, y)))
        resid = y - (fit.slope * x + fit.intercept)
        scale = np.abs(y).sum()
        assert abs(resid.sum()) <= 1e-9 * scale
        assert abs((resid * x).sum()) <= 1e-9 * np.abs(x * y).sum()

    @given(st.floats(-100, 100).filter(lambda c: abs(c) > 1e-3),
           st.floats(-50, 50))
    @settings(max_examples=40, deadline=None)
    def test_equivariance(self, c, d):
        rng = np.random.default_rng(2)
        x = rng.normal(0, 5, 50)
        y = 2.0 * x + rng.normal(1, 1, 50)
        base = ols_fit(list(zip(x, y)))
        scaled = ols_fit(list(zip(x, c * y)))
        assert scaled.slope == pytest.approx(c * base.slope, rel=1e-9)
        assert scaled.intercept == pytest.approx(c * base.intercept, rel=1e-9)
        assert scaled.r_squared == pytest.approx(base.r_squared, rel=1e-9)
        shifted = ols_fit(list(zip(x + d, y)))
        assert shifted.slope == pytest.approx(base.slope, rel=1e-8, abs=1e-10)
        assert shifted.r_squared == pytest.approx(base.r_squared, rel=1e-8)

    def test_predict(self):
        from sitegauge.analytics import LinearFit

        fit = LinearFit(slope=2.0, intercept=1.0, r_squared=1.0, n=2)
        assert predict_area_from_ntl(fit, 0.0) == pytest.approx(1.0)
        assert predict_area_from_ntl(fit, 5.0) == pytest.approx(11.0)


class TestL1:
    def test_identical_is_zero(self):
        assert l1_score([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_hand_value(self):
        assert l1_score([1, 2], [2, 4]) == pytest.approx(1.5)

    def test_matches_elementwise_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            n = int(rng.integers(1, 300))
            a, b = rng.normal(0, 10, n), rng.normal(0, 10, n)
            oracle = sum(abs(ai - bi) for ai, bi in zip(a, b)) / n
            assert l1_score(a, b) == pytest.approx(oracle, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            l1_score([1.0], [1.0, 2.0])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            l1_score([], [])

    def test_triangle_bound(self):
        rng = np.random.default_rng(4)
        a, b, c = rng.normal(0, 1, (3, 50))
        assert l1_score(a, c) <= l1_score(a, b) + l1_score(b, c) + 1e-12


class TestYearlyTrend:
    def test_constant_is_flat(self):
        obs = [(y, 100.0) for y in (2018, 2019, 2020, 2021) for _ in range(3)]
        report = yearly_trend(obs)
        assert report.fit.slope == pytest.approx(0.0, abs=1e-9)
        assert report.pct_change_per_year == pytest.approx(0.0, abs=1e-9)
        assert report.pct_change_total == pytest.approx(0.0, abs=1e-9)

    def test_linear_decline_percentages(self):
        # -7.5% of the 2018 value per year over 3 year-intervals -> -22.5% total
        base = 50_000.0
        obs = [(y, base * (1 - 0.075 * (y - 2018))) for y in (2018, 2019, 2020, 2021)]
        report = yearly_trend(obs)
        assert report.pct_change_per_year == pytest.approx(-7.5, abs=1e-9)
        assert report.pct_change_total == pytest.approx(-22.5, abs=1e-9)

    def test_total_is_rate_times_span(self):
        rng = np.random.default_rng(5)
        obs = [(y, float(rng.uniform(10, 100))) for y in range(2015, 2022) for _ in range(4)]
        report = yearly_trend(obs)
        span = report.last_year - report.first_year
        assert report.pct_change_total == report.pct_change_per_year * span

    def test_recovers_injected_slope(self):
        slope, base = 1234.5, 40_000.0
        obs = [(y, base + slope * (y - 2010)) for y in range(2010, 2020)]
        report = yearly_trend(obs)
        expected = 100.0 * slope / base
        assert report.pct_change_per_year == pytest.approx(expected, rel=1e-9)

    def test_ci_brackets_mean(self):
        rng = np.random.default_rng(6)
        obs = [(y, float(rng.normal(50, 5))) for y in (2018, 2019) for _ in range(10)]
        report = yearly_trend(obs)
        for ys in report.per_year:
            assert ys.ci95_low <= ys.mean <= ys.ci95_high

    def test_single_year_rejected(self):
        with pytest.raises(DegenerateTrendError):
            yearly_trend([(2020, 1.0), (2020, 2.0)])

    def test_ci_width_scales_inverse_sqrt_n(self):
        rng = np.random.default_rng(7)
        from scipy import stats as sps

        widths = {}
        for n in (10, 40, 160):
            reps = [mean_ci95(rng.normal(0, 1, n)) for _ in range(400)]
            widths[n] = np.mean([hi - lo for _, lo, hi in reps])
        for a, b in ((10, 40), (40, 160)):
            theoretical = (sps.t.ppf(0.975, a - 1) / np.sqrt(a)) / (
                sps.t.ppf(0.975, b - 1) / np.sqrt(b))
            assert widths[a] / widths[b] == pytest.approx(theoretical, rel=0.15)


class TestSiteChange:
    def test_simple_delta(self):
        assert site_change([(dt.date(2010, 1, 1), 100.0),
                            (dt.date(2020, 1, 1), 350.0)]) == pytest.approx(250.0)

    def test_order_independent(self):
        items = [(dt.date(2020, 1, 1), 350.0), (dt.date(2010, 1, 1), 100.0),
                 (dt.date(2015, 1, 1), 999.0)]
        assert site_change(items) == pytest.approx(250.0)

    def test_identical_endpoints_zero(self):
        assert site_change([(dt.date(2010, 1, 1), 5.0),
                            (dt.date(2012, 1, 1), 5.0)]) == 0.0

    def test_too_few_observations(self):
        with pytest.raises(ValueError):
            site_change([(dt.date(2010, 1, 1), 5.0)])


class TestSummary:
    def test_single_value(self):
        assert dataset_summary([5.0]) == (5.0, 0.0, 1)

    def test_population_convention(self):
        mean, sd, n = dataset_summary([2.0, 4.0])
        assert (mean, sd, n) == (3.0, 1.0, 2)

    def test_sample_flag(self):
        _, sd, _ = dataset_summary([2.0, 4.0], sample_sd=True)
        assert sd == pytest.approx(np.sqrt(2.0))

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(8)
        v = rng.normal(100, 30, 500)
        mean, sd, n = dataset_summary(v)
        mu = sum(v) / len(v)
        var = sum((x - mu) ** 2 for x in v) / len(v)
        assert mean == pytest.approx(mu, rel=1e-10)
        assert sd == pytest.approx(np.sqrt(var), rel=1e-10)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            dataset_summary([])
