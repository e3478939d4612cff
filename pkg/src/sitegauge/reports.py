"""CSV and SVG report emitters.

All writers are deterministic: rows are sorted, floats use repr, and the
SVG is assembled from formatted strings so identical inputs give identical
bytes.
"""

from __future__ import annotations

import csv
import io

from .analytics import TrendReport

TREND_COLUMNS = ["year", "mean", "ci_low", "ci_high", "n", "slope", "pct_per_year", "pct_total"]
SITE_CHANGE_COLUMNS = ["site_id", "first_date", "last_date", "first_value", "last_value", "change"]
AP_COLUMNS = ["threshold", "year", "ap", "tp", "fp", "n_images", "flagged"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, columns, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def trend_rows(report: TrendReport):
    for ys in report.per_year:
        yield (ys.year, ys.mean, ys.ci95_low, ys.ci95_high, ys.n,
               report.fit.slope, report.pct_change_per_year, report.pct_change_total)


def write_trend_csv(report: TrendReport, path) -> None:
    write_csv(path, TREND_COLUMNS, trend_rows(report))


def write_site_change_csv(rows, path) -> None:
    """rows: (site_id, first_date, last_date, first_value, last_value, change)."""
    write_csv(path, SITE_CHANGE_COLUMNS, sorted(rows))


def write_ap_csv(rows, path) -> None:
    """rows: (threshold, year_or_none, ap_or_none, tp, fp, n_images, flagged)."""
    write_csv(path, AP_COLUMNS, rows)


def _scale(values, lo, hi, out_lo, out_hi):
    span = (hi - lo) or 1.0
    return [out_lo + (v - lo) / span * (out_hi - out_lo) for v in values]


def write_trend_svg(report: TrendReport, path, title: str = "Yearly mean with 95% CI",
                    width: int = 640, height: int = 400) -> None:
    """Minimal line chart: CI band polygon, mean polyline, fitted line."""
    years = [ys.year for ys in report.per_year]
    means = [ys.mean for ys in report.per_year]
    lows = [ys.ci95_low for ys in report.per_year]
    highs = [ys.ci95_high for ys in report.per_year]
    fitted = [report.fit.slope * y + report.fit.intercept for y in years]
    y_all = lows + highs + fitted
    y_min, y_max = min(y_all), max(y_all)
    pad = 0.05 * ((y_max - y_min) or 1.0)
    y_min, y_max = y_min - pad, y_max + pad
    margin = 50
    xs = _scale(years, years[0], years[-1], margin, width - margin)
    def ys_px(vals):
        return _scale(vals, y_min, y_max, height - margin, margin)
    band = list(zip(xs, ys_px(highs))) + list(zip(reversed(xs), reversed(ys_px(lows))))
    band_pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in band)
    mean_pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys_px(means)))
    fit_pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys_px(fitted)))
    labels = []
    for year, x in zip(years, xs):
        labels.append(
            f'<text x="{x:.2f}" y="{height - margin + 20}" text-anchor="middle" '
            f'font-size="12">{year}</text>'
        )
    for frac in (0.0, 0.5, 1.0):
        v = y_min + frac * (y_max - y_min)
        y = (height - margin) - frac * (height - 2 * margin)
        labels.append(
            f'<text x="{margin - 6}" y="{y:.2f}" text-anchor="end" '
            f'font-size="11">{v:.0f}</text>'
        )
    svg = f"""<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">
<rect width="{width}" height="{height}" fill="white"/>
<text x="{width / 2:.0f}" y="24" text-anchor="middle" font-size="14">{title}</text>
<polygon points="{band_pts}" fill="#9ecae1" fill-opacity="0.5" stroke="none"/>
<polyline points="{mean_pts}" fill="none" stroke="#08519c" stroke-width="2"/>
<polyline points="{fit_pts}" fill="none" stroke="#de2d26" stroke-width="1.5" stroke-dasharray="6,4"/>
<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>
<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>
{chr(10).join(labels)}
</svg>
"""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(svg)
