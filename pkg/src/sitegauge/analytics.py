"""Regression and trend machinery.

Covers the radiance-to-area bridge fit (least squares with R^2), L1 scoring
of external predictions, yearly means with 95% Student-t intervals, linear
percent-change trends, and per-site oldest-to-newest deltas.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as _stats

from .errors import DegenerateFitError, DegenerateTrendError


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float
    n: int


@dataclass(frozen=True)
class YearStats:
    year: int
    mean: float
    ci95_low: float
    ci95_high: float
    n: int


@dataclass(frozen=True)
class TrendReport:
    per_year: tuple  # (YearStats, ...) in increasing-year order
    fit: LinearFit
    pct_change_per_year: float
    pct_change_total: float
    first_year: int
    last_year: int


def ols_fit(points) -> LinearFit:
    """Least-squares line through (x, y) pairs.

    R^2 = 1 - SS_res/SS_tot, with the convention R^2 = 1 when SS_tot = 0
    and the residuals are 0 too (constant data fit exactly), else 0.
    """
    pts = list(points)
    if len(pts) < 2:
        raise DegenerateFitError(f"need at least 2 points, got {len(pts)}")
    x = np.asarray([p[0] for p in pts], dtype=np.float64)
    y = np.asarray([p[1] for p in pts], dtype=np.float64)
    sxx = float(np.sum((x - x.mean()) ** 2))
    if sxx == 0.0:
        raise DegenerateFitError("all x values identical; slope is unidentified")
    sxy = float(np.sum((x - x.mean()) * (y - y.mean())))
    m = sxy / sxx
    b0 = float(y.mean() - m * x.mean())
    resid = y - (m * x + b0)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res == 0.0 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return LinearFit(slope=m, intercept=b0, r_squared=r2, n=len(pts))


def predict_area_from_ntl(fit: LinearFit, ntl: float) -> float:
    """Apply the bridge line: area = slope * radiance + intercept."""
    return fit.slope * ntl + fit.intercept


def l1_score(predictions, labels) -> float:
    """Mean absolute error between two equal-length value sequences."""
    p = np.asarray(list(predictions), dtype=np.float64)
    l = np.asarray(list(labels), dtype=np.float64)
    if p.size == 0:
        raise ValueError("empty input")
    if p.shape != l.shape:
        raise ValueError(f"length mismatch: {p.size} predictions vs {l.size} labels")
    return float(np.mean(np.abs(p - l)))


def mean_ci95(values, confidence: float = 0.95) -> tuple[float, float, float]:
    """(mean, lo, hi) with a Student-t interval; degenerate at n = 1."""
    v = np.asarray(list(values), dtype=np.float64)
    mean = float(v.mean())
    if v.size < 2:
        return mean, mean, mean
    sem = float(v.std(ddof=1) / np.sqrt(v.size))
    t = float(_stats.t.ppf(0.5 + confidence / 2.0, df=v.size - 1))
    return mean, mean - t * sem, mean + t * sem


def yearly_trend(observations, confidence: float = 0.95) -> TrendReport:
    """Per-year means with CIs plus a linear percent-change trend.

    The fit runs over the raw (year, value) pairs. Percent change per year
    is the slope relative to the fitted first-year value; the total is that
    rate times the number of year-intervals (linear, not compounded).
    """
    obs = [(int(y), float(v)) for y, v in observations]
    if not obs:
        raise DegenerateTrendError("no observations")
    years = sorted({y for y, _ in obs})
    if len(years) < 2:
        raise DegenerateTrendError(f"need at least 2 distinct years, got {len(years)}")
    per_year = []
    for year in years:
        vals = [v for y, v in obs if y == year]
        mean, lo, hi = mean_ci95(vals, confidence)
        per_year.append(YearStats(year=year, mean=mean, ci95_low=lo, ci95_high=hi, n=len(vals)))
    fit = ols_fit(obs)
    first_year, last_year = years[0], years[-1]
    baseline = fit.slope * first_year + fit.intercept
    if baseline == 0.0:
        raise DegenerateTrendError("fitted first-year value is 0; percent change undefined")
    pct_per_year = 100.0 * fit.slope / baseline
    pct_total = pct_per_year * (last_year - first_year)
    return TrendReport(
        per_year=tuple(per_year),
        fit=fit,
        pct_change_per_year=pct_per_year,
        pct_change_total=pct_total,
        first_year=first_year,
        last_year=last_year,
    )


def site_change(dated_values) -> float:
    """Newest minus oldest value over one site's (date, value) observations."""
    items = sorted(dated_values, key=lambda dv: dv[0])
    if len(items) < 2:
        raise ValueError(f"need at least 2 observations, got {len(items)}")
    return float(items[-1][1]) - float(items[0][1])


def dataset_summary(values, sample_sd: bool = False) -> tuple[float, float, int]:
    """(mean, standard deviation, count); population sd unless sample_sd."""
    v = np.asarray(list(values), dtype=np.float64)
    if v.size == 0:
        raise ValueError("empty input")
    ddof = 1 if sample_sd else 0
    sd = float(v.std(ddof=ddof)) if v.size > ddof else 0.0
    return float(v.mean()), sd, int(v.size)
