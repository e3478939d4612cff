"""Site catalog, observation series, labeling, splits, batching, persistence.

Flat-file storage: sites.csv, observations.jsonl (one record per line),
splits.json, and a checksummed training-bundle directory. Writers go
through a temp file + atomic rename so concurrent readers always see a
consistent snapshot.
"""

from __future__ import annotations

import csv
import datetime as _dt
import enum
import hashlib
import io
import json
import math
import os
import random
from dataclasses import dataclass, replace
from pathlib import Path

from . import masks as masks_mod
from . import ntl as ntl_mod
from . import raster as raster_mod
from .errors import BundleError, CatalogError

SCHEMA_VERSION = 1
DEFAULT_FRACTIONS = (0.75, 0.125, 0.125)


class SiteClass(str, enum.Enum):
    FACTORY = "factory"
    POWER_STATION = "power_station"
    PORT = "port"


class Partition(str, enum.Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


@dataclass(frozen=True)
class Site:
    id: str
    name: str
    lon: float
    lat: float
    site_class: SiteClass

    def __post_init__(self):
        if not self.id:
            raise CatalogError("site id must be non-empty")
        if not -180.0 <= self.lon <= 180.0:
            raise CatalogError(f"site {self.id}: lon {self.lon} out of [-180, 180]")
        if not -90.0 <= self.lat <= 90.0:
            raise CatalogError(f"site {self.id}: lat {self.lat} out of [-90, 90]")


@dataclass(frozen=True)
class Observation:
    site_id: str
    acquired: _dt.date
    raster_ref: str
    resolution_m: float
    masks_ref: str | None = None
    area_label_m2: float | None = None
    ntl_label: float | None = None
    ntl_period: str | None = None

    def __post_init__(self):
        for name in ("area_label_m2", "ntl_label"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v >= 0.0):
                raise CatalogError(f"{name} must be non-negative and finite, got {v!r}")
        if self.ntl_label is not None and not ntl_mod.eligible(self.acquired):
            raise CatalogError(
                f"observation at {self.acquired} predates the radiance instrument; "
                "it cannot carry an ntl_label"
            )


@dataclass(frozen=True)
class SiteSeries:
    """One site with its observations in ascending date order."""

    site: Site
    observations: tuple

    def __post_init__(self):
        obs = tuple(sorted(self.observations, key=lambda o: o.acquired))
        object.__setattr__(self, "observations", obs)


@dataclass(frozen=True)
class SplitAssignment:
    assignment: dict  # site_id -> Partition
    seed: int
    fractions: tuple = DEFAULT_FRACTIONS


def _atomic_write_text(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


_CLASS_ALIASES = {
    "factory": SiteClass.FACTORY,
    "power_station": SiteClass.POWER_STATION,
    "power station": SiteClass.POWER_STATION,
    "port": SiteClass.PORT,
}


def ingest_catalog(path) -> list[Site]:
    """Read sites.csv (id,name,lon,lat,class), validating every row."""
    sites: list[Site] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"id", "name", "lon", "lat", "class"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise CatalogError(f"catalog header must contain {sorted(required)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                cls = _CLASS_ALIASES[row["class"].strip().lower()]
            except KeyError:
                raise CatalogError(f"line {lineno}: unknown class {row['class']!r}") from None
            try:
                site = Site(
                    id=row["id"].strip(),
                    name=row["name"],
                    lon=float(row["lon"]),
                    lat=float(row["lat"]),
                    site_class=cls,
                )
            except (ValueError, CatalogError) as exc:
                raise CatalogError(f"line {lineno}: {exc}") from None
            if site.id in seen:
                raise CatalogError(f"line {lineno}: duplicate site id {site.id!r}")
            seen.add(site.id)
            sites.append(site)
    return sites


def save_catalog(sites, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "name", "lon", "lat", "class"])
    for s in sites:
        w.writerow([s.id, s.name, repr(s.lon), repr(s.lat), s.site_class.value])
    _atomic_write_text(path, buf.getvalue())


def _obs_to_record(o: Observation) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "site_id": o.site_id,
        "acquired": o.acquired.isoformat(),
        "raster_ref": o.raster_ref,
        "resolution_m": o.resolution_m,
        "masks_ref": o.masks_ref,
        "area_label_m2": o.area_label_m2,
        "ntl_label": o.ntl_label,
        "ntl_period": o.ntl_period,
    }


def _obs_from_record(d: dict) -> Observation:
    return Observation(
        site_id=d["site_id"],
        acquired=_dt.date.fromisoformat(d["acquired"]),
        raster_ref=d["raster_ref"],
        resolution_m=float(d["resolution_m"]),
        masks_ref=d.get("masks_ref"),
        area_label_m2=d.get("area_label_m2"),
        ntl_label=d.get("ntl_label"),
        ntl_period=d.get("ntl_period"),
    )


def save_observations(observations, path) -> None:
    text = "".join(json.dumps(_obs_to_record(o), sort_keys=True) + "\n" for o in observations)
    _atomic_write_text(path, text)


def load_observations(path) -> list[Observation]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(_obs_from_record(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise CatalogError(f"observations line {lineno}: {exc}") from None
    return out


def build_series(sites, observations) -> list[SiteSeries]:
    by_site: dict[str, list] = {s.id: [] for s in sites}
    for o in observations:
        if o.site_id not in by_site:
            raise CatalogError(f"observation references unknown site {o.site_id!r}")
        by_site[o.site_id].append(o)
    return [SiteSeries(site=s, observations=tuple(by_site[s.id])) for s in sites]


def attach_labels(observations, sites, base_dir, ntl_grids=None, side_m: float = 800.0,
                  extent_m2: float = masks_mod.DEFAULT_EXTENT_M2):
    """Compute area and radiance labels for each observation that supports them.

    Area labels come from the referenced mask file; radiance labels from the
    composite matching the observation's ntl_period, using the site footprint.
    Returns (labeled observations, warnings). Deterministic and idempotent.
    """
    base = Path(base_dir)
    sites_by_id = {s.id: s for s in sites}
    ntl_grids = ntl_grids or {}
    out, warnings = [], []
    for o in observations:
        if o.site_id not in sites_by_id:
            raise CatalogError(f"observation references unknown site {o.site_id!r}")
        site = sites_by_id[o.site_id]
        area = o.area_label_m2
        if o.masks_ref is not None:
            mpath = base / o.masks_ref
            if not mpath.exists():
                raise CatalogError(f"mask file not found: {mpath}")
            area = masks_mod.structural_area(masks_mod.load_maskset(mpath), extent_m2)
        label, period = o.ntl_label, o.ntl_period
        if period is not None and period in ntl_grids:
            if not ntl_mod.eligible(o.acquired):
                warnings.append(
                    f"{o.site_id}@{o.acquired}: predates 2012-04, radiance label skipped"
                )
                label = None
            else:
                fp = ntl_mod.Footprint(center_lon=site.lon, center_lat=site.lat, side_m=side_m)
                try:
                    label = ntl_mod.ntl_label(ntl_grids[period], fp)
                except ntl_mod.NoLabelError:
                    warnings.append(f"{o.site_id}@{o.acquired}: no qualifying radiance cell")
                    label = None
        elif period is not None:
            warnings.append(f"{o.site_id}@{o.acquired}: no composite loaded for {period}")
        out.append(replace(o, area_label_m2=area, ntl_label=label))
    return out, warnings


def split_by_site(sites, observations, fractions=DEFAULT_FRACTIONS, seed: int = 0
                  ) -> SplitAssignment:
    """Site-atomic split approximating image-count fractions.

    Sites are shuffled by a seeded PRNG, then each is assigned to the
    partition with the largest remaining image-count deficit (ties favor
    train, then validation). Every observation of a site lands in one
    partition by construction.
    """
    if len(sites) < 3:
        raise CatalogError(f"need at least 3 sites to split, got {len(sites)}")
    if any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must be positive and sum to 1, got {fractions}")
    counts = {s.id: 0 for s in sites}
    for o in observations:
        if o.site_id in counts:
            counts[o.site_id] += 1
    total = sum(counts.values())
    order = sorted(counts)
    random.Random(seed).shuffle(order)
    parts = list(Partition)
    targets = [f * total for f in fractions]
    assigned = [0.0, 0.0, 0.0]
    assignment = {}
    for sid in order:
        deficits = [targets[i] - assigned[i] for i in range(3)]
        best = max(range(3), key=lambda i: (deficits[i], -i))
        assignment[sid] = parts[best]
        assigned[best] += counts[sid]
    return SplitAssignment(assignment=assignment, seed=seed, fractions=tuple(fractions))


def save_split(split: SplitAssignment, path) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "seed": split.seed,
        "fractions": list(split.fractions),
        "assignment": {sid: p.value for sid, p in sorted(split.assignment.items())},
    }
    _atomic_write_text(path, json.dumps(doc, sort_keys=True, indent=1) + "\n")


def load_split(path) -> SplitAssignment:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return SplitAssignment(
        assignment={sid: Partition(p) for sid, p in doc["assignment"].items()},
        seed=int(doc["seed"]),
        fractions=tuple(doc["fractions"]),
    )


def batch_by_site(observations) -> list[list[Observation]]:
    """One batch per site, date-ascending inside each batch, sites by id."""
    by_site: dict[str, list] = {}
    for o in observations:
        by_site.setdefault(o.site_id, []).append(o)
    return [sorted(by_site[sid], key=lambda o: (o.acquired, o.raster_ref))
            for sid in sorted(by_site)]


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def export_training_bundle(observations, base_dir, out_dir,
                           target_h: int = 516, target_w: int = 426) -> dict:
    """Write model-ready inputs: resampled rasters, labels.csv, manifest.

    The manifest records target dims, per-site batch structure, and a
    SHA-256 checksum for every emitted file.
    """
    base, out = Path(base_dir), Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    batches = batch_by_site(observations)
    label_rows = []
    files: dict[str, str] = {}
    batch_entries = []
    for batch in batches:
        entry = {"site_id": batch[0].site_id, "images": []}
        for o in batch:
            src = base / o.raster_ref
            if not src.exists():
                raise BundleError(f"raster not found: {src}")
            grid = raster_mod.load_raster(src)
            resampled = raster_mod.resample_bilinear(grid, target_h, target_w)
            name = f"{o.site_id}_{o.acquired.isoformat()}.rg"
            raster_mod.save_raster(resampled, out / name)
            files[name] = _sha256(out / name)
            entry["images"].append(name)
            label_rows.append((o.site_id, o.acquired.isoformat(), name,
                               o.area_label_m2, o.ntl_label))
        batch_entries.append(entry)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["site_id", "acquired", "file", "area_label_m2", "ntl_label"])
    for row in label_rows:
        w.writerow(["" if v is None else v for v in row])
    _atomic_write_text(out / "labels.csv", buf.getvalue())
    files["labels.csv"] = _sha256(out / "labels.csv")
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "target_h": target_h,
        "target_w": target_w,
        "n_batches": len(batch_entries),
        "n_images": len(label_rows),
        "batches": batch_entries,
        "checksums": files,
    }
    _atomic_write_text(out / "manifest.json", json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return manifest


def verify_bundle(out_dir) -> None:
    """Re-hash every bundle file against the manifest; raise on any mismatch."""
    out = Path(out_dir)
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise BundleError(f"manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    for name, digest in manifest["checksums"].items():
        fpath = out / name
        if not fpath.exists():
            raise BundleError(f"bundle file missing: {name}")
        actual = _sha256(fpath)
        if actual != digest:
            raise BundleError(f"checksum mismatch for {name}: {actual} != {digest}")
