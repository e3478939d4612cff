import datetime as dt

import numpy as np
import pytest

from sitegauge.geo import GeoTransform
from sitegauge.masks import InstanceMask, MaskSet
from sitegauge.raster import BandKind, RasterGrid


@pytest.fixture
def meter_transform():
    """1 m/pixel grid anchored near the equator for easy mental math."""
    return GeoTransform(origin_lon=100.0, origin_lat=0.0,
                        pixel_size_x_m=1.0, pixel_size_y_m=1.0)


def make_grid(values, transform=None, band_kind=BandKind.PANCHROMATIC,
              acquired=dt.date(2020, 6, 1), **kwargs):
    values = np.asarray(values, dtype=np.float64)
    if transform is None:
        transform = GeoTransform(origin_lon=100.0, origin_lat=0.0,
                                 pixel_size_x_m=1.0, pixel_size_y_m=1.0)
    return RasterGrid(values=values, band_kind=band_kind, acquired=acquired,
                      transform=transform, **kwargs)


def random_maskset(rng, grid_h=64, grid_w=64, max_instances=50):
    """Random rectangles, possibly overlapping across instances."""
    n = int(rng.integers(1, max_instances + 1))
    instances = []
    for _ in range(n):
        h = int(rng.integers(1, max(2, grid_h // 4)))
        w = int(rng.integers(1, max(2, grid_w // 4)))
        r0 = int(rng.integers(0, grid_h - h + 1))
        c0 = int(rng.integers(0, grid_w - w + 1))
        runs = tuple(((r0 + r) * grid_w + c0, w) for r in range(h))
        instances.append(InstanceMask(grid_h=grid_h, grid_w=grid_w, runs=runs))
    return MaskSet(grid_h=grid_h, grid_w=grid_w, instances=tuple(instances))


def brute_force_union_count(s: MaskSet) -> int:
    grid = np.zeros((s.grid_h, s.grid_w), dtype=bool)
    for m in s.instances:
        grid |= m.to_bool_grid()
    return int(grid.sum())
