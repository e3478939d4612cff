"""Nighttime-light radiance labels from coarse monthly composites.

A label is the maximum radiance over composite cells that have at least
half their area inside the daytime crop footprint. Composites are only
usable from April 2012 onward (instrument launch).
"""

from __future__ import annotations

import datetime as _dt
import re
from dataclasses import dataclass

import numpy as np

from .errors import NoLabelError
from .geo import GeoTransform
from .raster import BandKind, RasterGrid

LAUNCH_DATE = _dt.date(2012, 4, 1)
MIN_OVERLAP_FRACTION = 0.5

_PERIOD_RE = re.compile(r"^(\d{4})-(\d{2})$")


@dataclass(frozen=True)
class NtlGrid:
    """Monthly radiance composite: one value per ~500 m cell."""

    cells: np.ndarray  # (H, W) radiance, nW/(cm^2 sr)
    transform: GeoTransform
    period: str  # "YYYY-MM"

    def __post_init__(self):
        arr = np.asarray(self.cells, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"cells must be 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0:
            raise ValueError("radiance must be finite and non-negative")
        m = _PERIOD_RE.match(self.period)
        if not m:
            raise ValueError(f"period must be YYYY-MM, got {self.period!r}")
        year, month = int(m.group(1)), int(m.group(2))
        if not 1 <= month <= 12:
            raise ValueError(f"period month out of range: {self.period!r}")
        if _dt.date(year, month, 1) < LAUNCH_DATE:
            raise ValueError(f"period {self.period} predates instrument launch (2012-04)")
        arr.setflags(write=False)
        object.__setattr__(self, "cells", arr)

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def cell_size_m(self) -> tuple[float, float]:
        return self.transform.pixel_size_x_m, self.transform.pixel_size_y_m

    @classmethod
    def from_raster(cls, grid: RasterGrid) -> "NtlGrid":
        if grid.band_kind is not BandKind.RADIANCE:
            raise ValueError(f"expected a radiance grid, got {grid.band_kind.value}")
        if grid.period is None:
            raise ValueError("radiance container is missing its period field")
        return cls(cells=grid.values, transform=grid.transform, period=grid.period)


@dataclass(frozen=True)
class Footprint:
    """The geographic square of a daytime image crop."""

    center_lon: float
    center_lat: float
    side_m: float = 800.0

    def __post_init__(self):
        if not self.side_m > 0:
            raise ValueError(f"side_m must be positive, got {self.side_m}")


def eligible(acquired: _dt.date) -> bool:
    """True iff an observation date can carry a radiance label (>= 2012-04-01)."""
    return acquired >= LAUNCH_DATE


def overlapping_cells(g: NtlGrid, f: Footprint,
                      min_fraction: float = MIN_OVERLAP_FRACTION):
    """Cells with at least min_fraction of their area inside the footprint.

    Returns [((row, col), fraction), ...] in row-major order; fractions come
    from exact planar rectangle intersection in the grid's local frame.
    """
    csx, csy = g.transform.pixel_size_x_m, g.transform.pixel_size_y_m
    cx, cy = g.transform.lonlat_to_local_m(f.center_lon, f.center_lat)
    half = f.side_m / 2.0
    fx_lo, fx_hi = cx - half, cx + half
    fy_lo, fy_hi = cy - half, cy + half
    # Only cells intersecting the footprint can qualify.
    col_lo = max(0, int(np.floor(fx_lo / csx)))
    col_hi = min(g.width - 1, int(np.ceil(fx_hi / csx)) - 1)
    row_lo = max(0, int(np.floor(fy_lo / csy)))
    row_hi = min(g.height - 1, int(np.ceil(fy_hi / csy)) - 1)
    out = []
    cell_area = csx * csy
    for row in range(row_lo, row_hi + 1):
        for col in range(col_lo, col_hi + 1):
            ox = min(fx_hi, (col + 1) * csx) - max(fx_lo, col * csx)
            oy = min(fy_hi, (row + 1) * csy) - max(fy_lo, row * csy)
            if ox <= 0 or oy <= 0:
                continue
            fraction = (ox * oy) / cell_area
            # Tolerance absorbs degree/meter round-trip noise at the >= boundary.
            if fraction >= min_fraction - 1e-9:
                out.append(((row, col), fraction))
    return out


def ntl_label(g: NtlGrid, f: Footprint) -> float:
    """Maximum radiance over the qualifying cells for this footprint."""
    cells = overlapping_cells(g, f)
    if not cells:
        raise NoLabelError(
            f"no composite cell has >= {MIN_OVERLAP_FRACTION:.0%} overlap with "
            f"footprint at ({f.center_lon:.5f}, {f.center_lat:.5f})"
        )
    return max(float(g.cells[rc]) for rc, _ in cells)


def ntl_label_with_argmax(g: NtlGrid, f: Footprint):
    """Label plus the (row, col) of the maximal cell, lowest index on ties."""
    cells = overlapping_cells(g, f)
    if not cells:
        raise NoLabelError("no qualifying composite cell for footprint")
    best_rc, best_v = None, -1.0
    for rc, _ in cells:  # row-major order, so first max wins ties
        v = float(g.cells[rc])
        if v > best_v:
            best_rc, best_v = rc, v
    return best_v, best_rc
