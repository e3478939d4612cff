"""Synthetic scenes with exactly known structural areas.

Rectangles only: their geometric area is closed-form, the pixel-center
rasterization error is provably bounded by the perimeter in pixels, and
integer-aligned placement makes the rasterized area exact. Noise is applied
to the raster alone; masks always come from the geometry.
"""

from __future__ import annotations

import datetime as _dt
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SceneGenerationError
from .geo import CrsTag, GeoTransform
from .masks import InstanceMask, MaskSet, Provenance, iou, normalize_runs, runs_from_flat
from .raster import BandKind, RasterGrid

PLACEMENT_RETRIES = 200


@dataclass(frozen=True)
class SceneSpec:
    grid_h: int = 64
    grid_w: int = 64
    pixel_size_m: float = 12.5
    n_structures: tuple = (3, 8)  # inclusive count range
    rect_size_m: tuple = (50.0, 200.0)  # side length range, meters
    background_level: float = 0.15
    structure_level: float = 0.75
    noise_sd: float = 0.02
    subpixel: bool = False  # float rectangle corners instead of pixel-aligned
    center_lon: float = 100.0
    center_lat: float = 35.0
    acquired: _dt.date = _dt.date(2020, 6, 1)
    seed: int = 0

    def __post_init__(self):
        if self.structure_level == self.background_level:
            raise ValueError("structure level must differ from background level")
        max_side = max(self.rect_size_m)
        if max_side > self.grid_h * self.pixel_size_m or max_side > self.grid_w * self.pixel_size_m:
            raise ValueError("rectangle size range exceeds the scene extent")

    def transform(self) -> GeoTransform:
        """Geotransform placing the grid centered on (center_lon, center_lat)."""
        half_w_m = self.grid_w * self.pixel_size_m / 2.0
        half_h_m = self.grid_h * self.pixel_size_m / 2.0
        anchor = GeoTransform(
            origin_lon=self.center_lon, origin_lat=self.center_lat,
            pixel_size_x_m=self.pixel_size_m, pixel_size_y_m=self.pixel_size_m,
            crs_tag=CrsTag.WGS84_APPROX,
        )
        lon, lat = anchor.local_m_to_lonlat(-half_w_m, -half_h_m)
        return GeoTransform(
            origin_lon=lon, origin_lat=lat,
            pixel_size_x_m=self.pixel_size_m, pixel_size_y_m=self.pixel_size_m,
            crs_tag=CrsTag.WGS84_APPROX, anchor_lat=self.center_lat,
        )


@dataclass(frozen=True)
class GrowthSpec:
    years: tuple
    base_area_m2: float
    growth_m2_per_year: float
    jitter_sd_m2: float = 0.0

    def __post_init__(self):
        years = tuple(int(y) for y in self.years)
        if len(years) < 2 or any(b <= a for a, b in zip(years, years[1:])):
            raise ValueError("years must be at least 2 and strictly increasing")
        object.__setattr__(self, "years", years)


def _rect_mask(grid_h, grid_w, x0, y0, w, h) -> InstanceMask | None:
    """Pixel-center rasterization of [x0, x0+w) x [y0, y0+h), pixel units."""
    col0 = math.ceil(x0 - 0.5 - 1e-12)
    col1 = math.ceil(x0 + w - 0.5 - 1e-12) - 1
    row0 = math.ceil(y0 - 0.5 - 1e-12)
    row1 = math.ceil(y0 + h - 0.5 - 1e-12) - 1
    col0, row0 = max(col0, 0), max(row0, 0)
    col1, row1 = min(col1, grid_w - 1), min(row1, grid_h - 1)
    if col1 < col0 or row1 < row0:
        return None
    runs = normalize_runs(
        (r * grid_w + col0, col1 - col0 + 1) for r in range(row0, row1 + 1)
    )
    return InstanceMask(grid_h=grid_h, grid_w=grid_w, runs=runs)


def _rects_overlap(a, b) -> bool:
    ax0, ay0, aw, ah = a
    bx0, by0, bw, bh = b
    return ax0 < bx0 + bw and bx0 < ax0 + aw and ay0 < by0 + bh and by0 < ay0 + ah


def generate_scene(spec: SceneSpec):
    """Render one scene; returns (raster, masks, exact_area_m2).

    Rectangles never overlap; the exact area is the sum of their geometric
    areas before rasterization. Deterministic for a fixed spec (the seed is
    part of the spec).
    """
    rng = np.random.default_rng(spec.seed)
    count = int(rng.integers(spec.n_structures[0], spec.n_structures[1] + 1))
    ps = spec.pixel_size_m
    rects = []  # (x0, y0, w, h) in pixel units
    attempts = 0
    while len(rects) < count:
        if attempts >= PLACEMENT_RETRIES * max(count, 1):
            raise SceneGenerationError(
                f"could not place {count} non-overlapping rectangles "
                f"in {spec.grid_h}x{spec.grid_w} after {attempts} attempts"
            )
        attempts += 1
        w_m = rng.uniform(*spec.rect_size_m)
        h_m = rng.uniform(*spec.rect_size_m)
        w_px, h_px = w_m / ps, h_m / ps
        if not spec.subpixel:
            w_px = max(1, round(w_px))
            h_px = max(1, round(h_px))
        if w_px > spec.grid_w or h_px > spec.grid_h:
            continue
        x0 = rng.uniform(0, spec.grid_w - w_px)
        y0 = rng.uniform(0, spec.grid_h - h_px)
        if not spec.subpixel:
            x0, y0 = float(math.floor(x0)), float(math.floor(y0))
        cand = (x0, y0, float(w_px), float(h_px))
        if any(_rects_overlap(cand, r) for r in rects):
            continue
        rects.append(cand)
    instances = []
    exact_area_px = 0.0
    for x0, y0, w, h in rects:
        mask = _rect_mask(spec.grid_h, spec.grid_w, x0, y0, w, h)
        if mask is None:
            raise SceneGenerationError("rectangle rasterized to zero pixels")
        instances.append(mask)
        exact_area_px += w * h
    maskset = MaskSet(grid_h=spec.grid_h, grid_w=spec.grid_w,
                      instances=tuple(instances),
                      provenance=Provenance.GROUND_TRUTH_GEOCODED)
    values = np.full((spec.grid_h, spec.grid_w), spec.background_level)
    for m in instances:
        flat = values.reshape(-1)
        for s, l in m.runs:
            flat[s : s + l] = spec.structure_level
    if spec.noise_sd > 0:
        values = values + rng.normal(0.0, spec.noise_sd, size=values.shape)
    values = np.clip(values, 0.0, 1.0)
    raster = RasterGrid(values=values, band_kind=BandKind.PANCHROMATIC,
                        acquired=spec.acquired, transform=spec.transform())
    return raster, maskset, exact_area_px * ps * ps


def perimeter_pixels(maskset: MaskSet) -> float:
    """Sum of instance bounding-rectangle perimeters in pixels.

    For the axis-aligned rectangles emitted here this is the exact geometric
    perimeter bound used by the rasterization-error check.
    """
    total = 0.0
    for m in maskset.instances:
        pix = m.to_indices()
        rows, cols = pix // m.grid_w, pix % m.grid_w
        total += 2.0 * ((cols.max() - cols.min() + 1) + (rows.max() - rows.min() + 1))
    return total


def _shift_mask(m: InstanceMask, dy: int, dx: int) -> InstanceMask | None:
    """Translate a mask, dropping pixels pushed off the grid."""
    grid = m.to_bool_grid()
    h, w = grid.shape
    out = np.zeros_like(grid)
    ys = slice(max(0, dy), min(h, h + dy))
    xs = slice(max(0, dx), min(w, w + dx))
    ys_src = slice(max(0, -dy), min(h, h - dy))
    xs_src = slice(max(0, -dx), min(w, w - dx))
    out[ys, xs] = grid[ys_src, xs_src]
    if not out.any():
        return None
    return InstanceMask(grid_h=h, grid_w=w, runs=runs_from_flat(out.ravel()))


def perturb_masks(truths: MaskSet, target_iou: float, seed: int = 0,
                  tolerance: float = 0.05):
    """Translate each truth mask until its IoU with the original hits the target.

    Returns (perturbed MaskSet, achieved IoUs per instance). The search runs
    over integer (dx, dy) translations; degenerate masks whose achievable
    IoU grid has no value within the tolerance raise SceneGenerationError.
    """
    if not 0.0 < target_iou <= 1.0:
        raise ValueError(f"target_iou must lie in (0, 1], got {target_iou}")
    out, achieved = [], []
    for m in truths.instances:
        if target_iou == 1.0:
            out.append(m)
            achieved.append(1.0)
            continue
        cols = [s % m.grid_w for s, _ in m.runs] + [s % m.grid_w + l - 1 for s, l in m.runs]
        rows = [s // m.grid_w for s, _ in m.runs]
        # Shift toward whichever side has more room, per axis.
        sx = 1 if (m.grid_w - 1 - max(cols)) >= min(cols) else -1
        sy = 1 if (m.grid_h - 1 - max(rows)) >= min(rows) else -1
        best = None  # (gap, iou, mask)
        for dy in range(0, m.grid_h):
            base = _shift_mask(m, sy * dy, 0)
            if base is None or iou(m, base) < max(0.0, target_iou - 0.3):
                if dy > 0:
                    break
            for dx in range(0, m.grid_w):
                cand = _shift_mask(m, sy * dy, sx * dx)
                if cand is None:
                    break
                v = iou(m, cand)
                gap = abs(v - target_iou)
                if best is None or gap < best[0]:
                    best = (gap, v, cand)
                if v < max(0.0, target_iou - 0.3):
                    break
        if best is None or best[0] > tolerance:
            raise SceneGenerationError(
                f"cannot reach IoU {target_iou:.2f} +/- {tolerance:.2f} by translating "
                f"a {m.pixel_count}-pixel mask (closest achieved: "
                f"{best[1]:.3f})" if best else f"cannot perturb mask to IoU {target_iou:.2f}"
            )
        out.append(best[2])
        achieved.append(best[1])
    return (
        MaskSet(grid_h=truths.grid_h, grid_w=truths.grid_w,
                instances=tuple(out), provenance=Provenance.MODEL_PREDICTION),
        tuple(achieved),
    )


@dataclass(frozen=True)
class YearScene:
    year: int
    raster: RasterGrid
    masks: MaskSet
    exact_area_m2: float


@dataclass(frozen=True)
class GrowthSeries:
    """Per-year scenes for one site plus the generator's injected truth."""

    scenes: tuple  # (YearScene, ...) year-ascending
    injected_slope_m2_per_year: float
    base_area_m2: float

    @property
    def years(self):
        return tuple(s.year for s in self.scenes)

    @property
    def exact_areas(self):
        return tuple(s.exact_area_m2 for s in self.scenes)


def growth_series(g: GrowthSpec, scene: SceneSpec) -> GrowthSeries:
    """One rectangle per year sized to track base + growth * (year - first).

    Jitter (when nonzero) perturbs each year's target area before sizing.
    The realized exact areas are recorded per year; they match the target up
    to one pixel row/column of sizing quantization.
    """
    rng = np.random.default_rng(scene.seed)
    ps = scene.pixel_size_m
    extent_m2 = scene.grid_h * scene.grid_w * ps * ps
    scenes = []
    first = g.years[0]
    for year in g.years:
        target = g.base_area_m2 + g.growth_m2_per_year * (year - first)
        if g.jitter_sd_m2 > 0:
            target += float(rng.normal(0.0, g.jitter_sd_m2))
        if not 0.0 < target <= extent_m2:
            raise SceneGenerationError(
                f"target area {target:.0f} m2 for year {year} outside (0, {extent_m2:.0f}]"
            )
        target_px = target / (ps * ps)
        w_px = max(1, round(math.sqrt(target_px)))
        w_px = min(w_px, scene.grid_w - 2)
        h_px = max(1, min(round(target_px / w_px), scene.grid_h - 2))
        mask = _rect_mask(scene.grid_h, scene.grid_w, 1.0, 1.0, float(w_px), float(h_px))
        maskset = MaskSet(grid_h=scene.grid_h, grid_w=scene.grid_w,
                          instances=(mask,),
                          provenance=Provenance.GROUND_TRUTH_GEOCODED)
        values = np.full((scene.grid_h, scene.grid_w), scene.background_level)
        flat = values.reshape(-1)
        for s, l in mask.runs:
            flat[s : s + l] = scene.structure_level
        if scene.noise_sd > 0:
            values = values + rng.normal(0.0, scene.noise_sd, size=values.shape)
        values = np.clip(values, 0.0, 1.0)
        raster = RasterGrid(values=values, band_kind=BandKind.PANCHROMATIC,
                            acquired=_dt.date(year, 6, 15), transform=scene.transform())
        scenes.append(YearScene(year=year, raster=raster, masks=maskset,
                                exact_area_m2=w_px * h_px * ps * ps))
    return GrowthSeries(scenes=tuple(scenes),
                        injected_slope_m2_per_year=g.growth_m2_per_year,
                        base_area_m2=g.base_area_m2)


def write_fleet(out_dir, n_sites: int, years, seed: int = 0,
                growth_mean_m2: float = 4000.0, growth_sd_m2: float = 2000.0,
                base_range_m2: tuple = (60_000.0, 160_000.0),
                jitter_sd_m2: float = 0.0, with_ntl: bool = False,
                scene: SceneSpec | None = None) -> dict:
    """Write a complete fake catalog: sites.csv, observations, rasters, masks.

    Sites sit on a west-east line 0.05 degrees apart. Per-site growth is
    drawn from N(growth_mean, growth_sd); the injected truth (growth, base,
    realized exact areas) lands in generator_truth.json so pipelines built
    on the catalog can be checked against it. Returns the truth dict.
    """
    import json
    from pathlib import Path

    from . import dataset as ds
    from . import raster as raster_io

    out = Path(out_dir)
    (out / "rasters").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(exist_ok=True)
    years = tuple(int(y) for y in years)
    base_scene = scene or SceneSpec()
    rng = np.random.default_rng(seed)
    classes = list(ds.SiteClass)
    sites, observations = [], []
    truth = {"seed": seed, "growth_mean_m2": growth_mean_m2,
             "growth_sd_m2": growth_sd_m2, "sites": {}}
    base_lat = base_scene.center_lat
    lons = [100.0 + 0.05 * i for i in range(n_sites)]
    for i in range(n_sites):
        sid = f"site{i:04d}"
        site = ds.Site(id=sid, name=f"Synthetic site {i}", lon=lons[i], lat=base_lat,
                       site_class=classes[i % len(classes)])
        sites.append(site)
        growth = float(rng.normal(growth_mean_m2, growth_sd_m2))
        base = float(rng.uniform(*base_range_m2))
        spec = SceneSpec(
            grid_h=base_scene.grid_h, grid_w=base_scene.grid_w,
            pixel_size_m=base_scene.pixel_size_m,
            background_level=base_scene.background_level,
            structure_level=base_scene.structure_level,
            noise_sd=base_scene.noise_sd,
            center_lon=lons[i], center_lat=base_lat,
            seed=int(rng.integers(0, 2**31)),
        )
        series = growth_series(
            GrowthSpec(years=years, base_area_m2=base,
                       growth_m2_per_year=growth, jitter_sd_m2=jitter_sd_m2),
            spec,
        )
        site_truth = {"injected_growth_m2_per_year": growth, "base_area_m2": base,
                      "exact_areas_m2": {}}
        for ysc in series.scenes:
            raster_name = f"rasters/{sid}_{ysc.year}.rg"
            mask_name = f"masks/{sid}_{ysc.year}.json"
            raster_io.save_raster(ysc.raster, out / raster_name)
            from .masks import save_maskset

            save_maskset(ysc.masks, out / mask_name)
            observations.append(ds.Observation(
                site_id=sid, acquired=ysc.raster.acquired, raster_ref=raster_name,
                resolution_m=spec.pixel_size_m, masks_ref=mask_name,
                ntl_period=f"{ysc.year}-06" if with_ntl else None,
            ))
            site_truth["exact_areas_m2"][str(ysc.year)] = ysc.exact_area_m2
        truth["sites"][sid] = site_truth
    if with_ntl:
        (out / "ntl").mkdir(exist_ok=True)
        _write_fleet_composites(out, lons, base_lat, years, rng)
    ds.save_catalog(sites, out / "sites.csv")
    ds.save_observations(observations, out / "observations.jsonl")
    (out / "generator_truth.json").write_text(
        json.dumps(truth, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    return truth


def _write_fleet_composites(out, lons, lat, years, rng):
    """One 500 m radiance composite per June covering every site footprint."""
    from .geo import GeoTransform, METERS_PER_DEGREE
    from .raster import BandKind, RasterGrid, save_raster

    cell_m = 500.0
    margin_m = 2000.0
    origin = GeoTransform(
        origin_lon=min(lons), origin_lat=lat,
        pixel_size_x_m=cell_m, pixel_size_y_m=cell_m, anchor_lat=lat,
    )
    span_x, _ = origin.lonlat_to_local_m(max(lons), lat)
    width = int(math.ceil((span_x + 2 * margin_m) / cell_m))
    height = int(math.ceil(2 * margin_m / cell_m))
    corner_lon, corner_lat = origin.local_m_to_lonlat(-margin_m, -margin_m)
    transform = GeoTransform(
        origin_lon=corner_lon, origin_lat=corner_lat,
        pixel_size_x_m=cell_m, pixel_size_y_m=cell_m, anchor_lat=lat,
    )
    for year in years:
        cells = rng.gamma(shape=2.0, scale=6.0, size=(height, width))
        grid = RasterGrid(values=cells, band_kind=BandKind.RADIANCE,
                          acquired=_dt.date(year, 6, 15), transform=transform,
                          period=f"{year}-06")
        save_raster(grid, out / "ntl" / f"{year}-06.rg")
