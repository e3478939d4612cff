"""Batch command-line front end.

Subcommands: convert | label | eval | split | bundle | trend | synth | report.
Logs go line-oriented to stderr; data lands in --out files or directories.
Every command echoes its resolved configuration into the output directory
(no timestamps, so re-runs with the same config are byte-identical).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import datetime as _dt
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from . import analytics, dataset, masks, ntl, raster, reports, synth
from .errors import SitegaugeError, UndefinedMetricError


@dataclass
class RunConfig:
    """Defaults for every pipeline stage; any field can be overridden by flags."""

    catalog: str | None = None
    observations: str | None = None
    base_dir: str = "."
    ntl_dir: str | None = None
    out: str | None = None
    out_dir: str | None = None
    side_m: float = 800.0
    extent_m2: float = 640_000.0
    resample_h: int = 516
    resample_w: int = 426
    thresholds: tuple = (0.1, 0.3, 0.5)
    fractions: tuple = (0.75, 0.125, 0.125)
    seed: int = 0
    ci_level: float = 0.95
    min_group: int = 9
    jobs: int = 4


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        overrides = json.loads(Path(args.config).read_text(encoding="utf-8"))
        for key, value in overrides.items():
            if not hasattr(cfg, key):
                raise SystemExit(f"unknown config key: {key}")
            if key in ("thresholds", "fractions"):
                value = tuple(value)
            setattr(cfg, key, value)
    for field in dataclasses.fields(RunConfig):
        v = getattr(args, field.name, None)
        if v is not None:
            setattr(cfg, field.name, v)
    return cfg


def _echo_config(cfg: RunConfig, command: str, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    doc = {"tool": "sitegauge", "version": __version__, "command": command,
           "config": dataclasses.asdict(cfg)}
    (directory / f"{command}_config.json").write_text(
        json.dumps(doc, sort_keys=True, indent=1, default=list) + "\n", encoding="utf-8"
    )


def _parse_floats(text: str) -> tuple:
    return tuple(float(t) for t in text.split(",") if t)


def _parse_years(text: str) -> tuple:
    if "-" in text and "," not in text:
        a, b = text.split("-")
        return tuple(range(int(a), int(b) + 1))
    return tuple(int(t) for t in text.split(",") if t)


def _load_ntl_grids(ntl_dir):
    grids = {}
    for path in sorted(Path(ntl_dir).glob("*.rg")):
        grid = ntl.NtlGrid.from_raster(raster.load_raster(path))
        grids[grid.period] = grid
    return grids


# --- convert -----------------------------------------------------------------

def _convert_one(path: Path, out_dir: Path, cfg: RunConfig, rgb_groups):
    stem = path.name
    if stem.endswith((".g.rg", ".b.rg")):
        return None  # consumed alongside the .r.rg member
    if stem.endswith(".r.rg"):
        base = stem[: -len(".r.rg")]
        g_path, b_path = rgb_groups[base]
        grid = raster.rgb_to_luminance(
            raster.load_raster(path), raster.load_raster(g_path), raster.load_raster(b_path)
        )
        out_name = base + ".rg"
    else:
        grid = raster.load_raster(path)
        out_name = stem
    if cfg.resample_h and cfg.resample_w:
        grid = raster.resample_bilinear(grid, cfg.resample_h, cfg.resample_w)
    raster.save_raster(grid, out_dir / out_name)
    return out_name


def cmd_convert(args) -> int:
    cfg = _load_config(args)
    in_dir, out_dir = Path(args.in_dir), Path(cfg.out_dir or args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _echo_config(cfg, "convert", out_dir)
    paths = sorted(in_dir.glob("*.rg"))
    rgb_groups = {}
    for p in paths:
        if p.name.endswith(".r.rg"):
            base = p.name[: -len(".r.rg")]
            g, b = in_dir / f"{base}.g.rg", in_dir / f"{base}.b.rg"
            if not (g.exists() and b.exists()):
                _log(f"convert: {p.name}: missing green/blue channel files")
                return 1
            rgb_groups[base] = (g, b)
    failures = 0
    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, cfg.jobs)) as pool:
        futures = [(p, pool.submit(_convert_one, p, out_dir, cfg, rgb_groups)) for p in paths]
        for p, fut in futures:  # merged in input order, not completion order
            try:
                name = fut.result()
            except (SitegaugeError, OSError) as exc:
                failures += 1
                _log(f"convert: {p.name}: FAILED: {exc}")
            else:
                if name:
                    _log(f"convert: {p.name} -> {name}")
    return 1 if failures else 0


# --- label -------------------------------------------------------------------

def cmd_label(args) -> int:
    cfg = _load_config(args)
    sites = dataset.ingest_catalog(cfg.catalog)
    observations = dataset.load_observations(cfg.observations)
    grids = _load_ntl_grids(cfg.ntl_dir) if cfg.ntl_dir else {}
    labeled, warnings = dataset.attach_labels(
        observations, sites, cfg.base_dir, grids,
        side_m=cfg.side_m, extent_m2=cfg.extent_m2,
    )
    for w in warnings:
        _log(f"label: warning: {w}")
    out = Path(cfg.out or args.out)
    dataset.save_observations(labeled, out)
    _echo_config(cfg, "label", out.parent)
    areas = [o.area_label_m2 for o in labeled if o.area_label_m2 is not None]
    if areas:
        mean, sd, n = analytics.dataset_summary(areas)
        _log(f"label: {n} area labels, mean {mean:.0f} m2, sd {sd:.0f} m2")
    return 0


# --- eval --------------------------------------------------------------------

def cmd_eval(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(cfg.out_dir or args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _echo_config(cfg, "eval", out_dir)
    base = Path(cfg.base_dir)
    entries = []
    import csv as _csv

    with open(args.manifest, newline="", encoding="utf-8") as fh:
        for row in _csv.DictReader(fh):
            entries.append((
                masks.load_maskset(base / row["preds"]),
                masks.load_maskset(base / row["truths"]),
                int(row["year"]),
            ))
    if not entries:
        _log("eval: empty manifest")
        return 1
    rows = []
    failures = 0
    for t in cfg.thresholds:
        tp = fp = 0
        for preds, truths, _year in entries:
            if len(preds) == 0:
                failures += 1
                _log(f"eval: image with zero predictions at threshold {t}: metric undefined")
                continue
            result = masks.match_instances(preds, truths, t)
            tp += len(result.pairs)
            fp += len(result.unmatched_predictions)
        overall = tp / (tp + fp) if (tp + fp) else None
        rows.append((t, "", overall, tp, fp, len(entries), False))
        for yr in masks.ap_grouped(entries, t, min_count=cfg.min_group):
            rows.append((t, yr.year, yr.ap, yr.tp, yr.fp, yr.n_images, yr.flagged))
    reports.write_ap_csv(rows, out_dir / "ap.csv")
    _log(f"eval: wrote {out_dir / 'ap.csv'}")
    return 1 if failures else 0


# --- split -------------------------------------------------------------------

def cmd_split(args) -> int:
    cfg = _load_config(args)
    sites = dataset.ingest_catalog(cfg.catalog)
    observations = dataset.load_observations(cfg.observations)
    split = dataset.split_by_site(sites, observations, cfg.fractions, cfg.seed)
    out = Path(cfg.out or args.out)
    dataset.save_split(split, out)
    _echo_config(cfg, "split", out.parent)
    counts = {p: 0 for p in dataset.Partition}
    for o in observations:
        counts[split.assignment[o.site_id]] += 1
    _log("split: images per partition: " +
         ", ".join(f"{p.value}={counts[p]}" for p in dataset.Partition))
    return 0


# --- bundle ------------------------------------------------------------------

def cmd_bundle(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(cfg.out_dir or args.out_dir)
    if args.verify_only:
        dataset.verify_bundle(out_dir)
        _log(f"bundle: {out_dir} verified")
        return 0
    observations = dataset.load_observations(cfg.observations)
    if args.splits:
        split = dataset.load_split(args.splits)
        wanted = dataset.Partition(args.partition)
        observations = [o for o in observations if split.assignment[o.site_id] is wanted]
    manifest = dataset.export_training_bundle(
        observations, cfg.base_dir, out_dir,
        target_h=cfg.resample_h, target_w=cfg.resample_w,
    )
    _echo_config(cfg, "bundle", out_dir)
    _log(f"bundle: {manifest['n_images']} images in {manifest['n_batches']} batches")
    return 0


# --- trend / report ----------------------------------------------------------

def _value_of(o: dataset.Observation, which: str):
    return o.area_label_m2 if which == "area" else o.ntl_label


def _site_change_rows(observations, which: str):
    series: dict[str, list] = {}
    for o in observations:
        v = _value_of(o, which)
        if v is not None:
            series.setdefault(o.site_id, []).append((o.acquired, v))
    rows = []
    for sid, items in series.items():
        if len(items) < 2:
            continue
        items.sort()
        rows.append((sid, items[0][0].isoformat(), items[-1][0].isoformat(),
                     items[0][1], items[-1][1], items[-1][1] - items[0][1]))
    return rows


def cmd_trend(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(cfg.out_dir or args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _echo_config(cfg, "trend", out_dir)
    observations = dataset.load_observations(cfg.observations)
    which = args.value
    pairs = [(o.acquired.year, _value_of(o, which)) for o in observations
             if _value_of(o, which) is not None]
    report = analytics.yearly_trend(pairs, confidence=cfg.ci_level)
    reports.write_trend_csv(report, out_dir / "trend.csv")
    reports.write_trend_svg(report, out_dir / "trend.svg",
                            title=f"Yearly mean {which} with 95% CI")
    reports.write_site_change_csv(_site_change_rows(observations, which),
                                  out_dir / "site_change.csv")
    if args.bridge:
        both = [(o.ntl_label, o.area_label_m2) for o in observations
                if o.ntl_label is not None and o.area_label_m2 is not None]
        fit = analytics.ols_fit(both)
        reports.write_csv(out_dir / "bridge.csv",
                          ["slope", "intercept", "r_squared", "n"],
                          [(fit.slope, fit.intercept, fit.r_squared, fit.n)])
    if args.score_predictions:
        import csv as _csv

        preds, labels = [], []
        with open(args.score_predictions, newline="", encoding="utf-8") as fh:
            for row in _csv.DictReader(fh):
                preds.append(float(row["prediction"]))
                labels.append(float(row["label"]))
        score = analytics.l1_score(preds, labels)
        reports.write_csv(out_dir / "l1.csv", ["l1", "n"], [(score, len(preds))])
    _log(f"trend: slope {report.fit.slope:.1f}/yr, "
         f"{report.pct_change_per_year:.2f}%/yr, total {report.pct_change_total:.2f}%")
    return 0


def cmd_report(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(cfg.out_dir or args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _echo_config(cfg, "report", out_dir)
    observations = dataset.load_observations(cfg.observations)
    which = args.value
    values = [_value_of(o, which) for o in observations if _value_of(o, which) is not None]
    if not values:
        _log("report: no labeled observations")
        return 1
    mean, sd, n = analytics.dataset_summary(values)
    reports.write_csv(out_dir / "summary.csv", ["mean", "sd", "n"], [(mean, sd, n)])
    rows = _site_change_rows(observations, which)
    reports.write_site_change_csv(rows, out_dir / "site_change.csv")
    if rows:
        changes = [r[5] for r in rows]
        cmean, csd, cn = analytics.dataset_summary(changes)
        reports.write_csv(out_dir / "site_change_summary.csv",
                          ["mean_change", "sd", "n_sites"], [(cmean, csd, cn)])
    _log(f"report: {n} values, mean {mean:.1f}, sd {sd:.1f}")
    return 0


# --- synth -------------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(cfg.out_dir or args.out_dir)
    truth = synth.write_fleet(
        out_dir, n_sites=args.sites, years=_parse_years(args.years), seed=cfg.seed,
        growth_mean_m2=args.growth_mean, growth_sd_m2=args.growth_sd,
        jitter_sd_m2=args.jitter, with_ntl=args.with_ntl,
    )
    _echo_config(cfg, "synth", out_dir)
    _log(f"synth: wrote {len(truth['sites'])} sites under {out_dir}")
    return 0


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sitegauge",
        description="Measure industrial-site development from rasters, masks, and radiance composites.",
    )
    parser.add_argument("--version", action="version", version=f"sitegauge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file mirroring RunConfig")
        p.add_argument("--seed", type=int)
        return p

    p = common(sub.add_parser("convert", help="luminance-convert, crop, resample rasters"))
    p.add_argument("--in-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--resample-h", type=int)
    p.add_argument("--resample-w", type=int)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_convert)

    p = common(sub.add_parser("label", help="attach area and radiance labels"))
    p.add_argument("--catalog", required=True)
    p.add_argument("--observations", required=True)
    p.add_argument("--base-dir")
    p.add_argument("--ntl-dir")
    p.add_argument("--out", required=True)
    p.add_argument("--side-m", type=float)
    p.add_argument("--extent-m2", type=float)
    p.set_defaults(func=cmd_label)

    p = common(sub.add_parser("eval", help="AP tables from prediction/truth mask files"))
    p.add_argument("--manifest", required=True, help="CSV: preds,truths,year")
    p.add_argument("--base-dir")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--thresholds", type=_parse_floats)
    p.add_argument("--min-group", type=int)
    p.set_defaults(func=cmd_eval)

    p = common(sub.add_parser("split", help="deterministic site-atomic split"))
    p.add_argument("--catalog", required=True)
    p.add_argument("--observations", required=True)
    p.add_argument("--fractions", type=_parse_floats)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = common(sub.add_parser("bundle", help="export model-ready training bundle"))
    p.add_argument("--observations")
    p.add_argument("--base-dir")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--splits")
    p.add_argument("--partition", default="train")
    p.add_argument("--resample-h", type=int)
    p.add_argument("--resample-w", type=int)
    p.add_argument("--verify-only", action="store_true")
    p.set_defaults(func=cmd_bundle)

    p = common(sub.add_parser("trend", help="yearly trend report with CI band"))
    p.add_argument("--observations", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--value", choices=("area", "ntl"), default="area")
    p.add_argument("--ci-level", type=float)
    p.add_argument("--bridge", action="store_true",
                   help="fit area = m*ntl + b over doubly-labeled observations")
    p.add_argument("--score-predictions", help="CSV (prediction,label) to L1-score")
    p.set_defaults(func=cmd_trend)

    p = common(sub.add_parser("report", help="summary stats and per-site changes"))
    p.add_argument("--observations", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--value", choices=("area", "ntl"), default="area")
    p.set_defaults(func=cmd_report)

    p = common(sub.add_parser("synth", help="write a synthetic catalog"))
    p.add_argument("--out-dir", required=True)
    p.add_argument("--sites", type=int, default=50)
    p.add_argument("--years", default="2018-2021")
    p.add_argument("--growth-mean", type=float, default=4000.0)
    p.add_argument("--growth-sd", type=float, default=2000.0)
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--with-ntl", action="store_true")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SitegaugeError as exc:
        _log(f"{args.command}: error: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
