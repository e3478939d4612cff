"""Geotransform and the local equirectangular degree/meter conversion.

All planar geometry in the toolkit happens in a local frame anchored at the
grid origin: x grows east, y grows south (matching row order), both in
meters. Longitude degrees are scaled by cos(anchor latitude); at the 800 m
window scale this approximation is accurate to well under 0.1%.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

EARTH_RADIUS_M = 6_371_008.8
METERS_PER_DEGREE = EARTH_RADIUS_M * math.pi / 180.0


class CrsTag(str, enum.Enum):
    LOCAL_METERS = "local_meters"
    WGS84_APPROX = "wgs84_approx"


@dataclass(frozen=True)
class GeoTransform:
    """Anchors a row-major pixel grid to geographic coordinates.

    ``origin_lon``/``origin_lat`` locate the outer corner of pixel (0, 0);
    rows advance south, columns east. Pixel sizes are in meters per pixel.
    """

    origin_lon: float
    origin_lat: float
    pixel_size_x_m: float
    pixel_size_y_m: float
    crs_tag: CrsTag = CrsTag.WGS84_APPROX
    anchor_lat: float | None = field(default=None)

    def __post_init__(self):
        for name in ("pixel_size_x_m", "pixel_size_y_m"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be strictly positive and finite, got {v!r}")
        if self.anchor_lat is None:
            # LocalMeters grids need an anchor latitude for degree/meter
            # conversion; default to the origin latitude.
            object.__setattr__(self, "anchor_lat", self.origin_lat)

    @property
    def meters_per_degree_lat(self) -> float:
        return METERS_PER_DEGREE

    @property
    def meters_per_degree_lon(self) -> float:
        return METERS_PER_DEGREE * math.cos(math.radians(self.anchor_lat))

    def lonlat_to_local_m(self, lon: float, lat: float) -> tuple[float, float]:
        """Map (lon, lat) to (x east, y south) meters from the grid origin."""
        x = (lon - self.origin_lon) * self.meters_per_degree_lon
        y = (self.origin_lat - lat) * self.meters_per_degree_lat
        return x, y

    def local_m_to_lonlat(self, x_m: float, y_m: float) -> tuple[float, float]:
        lon = self.origin_lon + x_m / self.meters_per_degree_lon
        lat = self.origin_lat - y_m / self.meters_per_degree_lat
        return lon, lat

    def shifted(self, dx_m: float, dy_m: float) -> "GeoTransform":
        """Transform for a sub-grid whose corner sits (dx, dy) meters from this origin."""
        lon, lat = self.local_m_to_lonlat(dx_m, dy_m)
        return GeoTransform(
            origin_lon=lon,
            origin_lat=lat,
            pixel_size_x_m=self.pixel_size_x_m,
            pixel_size_y_m=self.pixel_size_y_m,
            crs_tag=self.crs_tag,
            anchor_lat=self.anchor_lat,
        )

    def rescaled(self, factor_y: float, factor_x: float) -> "GeoTransform":
        return GeoTransform(
            origin_lon=self.origin_lon,
            origin_lat=self.origin_lat,
            pixel_size_x_m=self.pixel_size_x_m * factor_x,
            pixel_size_y_m=self.pixel_size_y_m * factor_y,
            crs_tag=self.crs_tag,
            anchor_lat=self.anchor_lat,
        )

    def to_header_dict(self) -> dict:
        return {
            "origin_lon": self.origin_lon,
            "origin_lat": self.origin_lat,
            "pixel_size_x_m": self.pixel_size_x_m,
            "pixel_size_y_m": self.pixel_size_y_m,
            "crs_tag": self.crs_tag.value,
            "anchor_lat": self.anchor_lat,
        }

    @classmethod
    def from_header_dict(cls, d: dict) -> "GeoTransform":
        return cls(
            origin_lon=float(d["origin_lon"]),
            origin_lat=float(d["origin_lat"]),
            pixel_size_x_m=float(d["pixel_size_x_m"]),
            pixel_size_y_m=float(d["pixel_size_y_m"]),
            crs_tag=CrsTag(d["crs_tag"]),
            anchor_lat=float(d["anchor_lat"]) if d.get("anchor_lat") is not None else None,
        )
