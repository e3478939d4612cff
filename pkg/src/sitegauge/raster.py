"""Single-band raster grids: container I/O, luminance conversion, crop, resample.

The canonical container is a two-part file: one UTF-8 JSON header line
terminated by ``\\n``, then H*W samples as little-endian float32 in
row-major order. Imagery values are stored normalized to [0, 1] regardless
of source bit depth; radiance grids carry non-negative physical values.
"""

from __future__ import annotations

import datetime as _dt
import enum
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatchError, OutOfBoundsError, RasterFormatError
from .geo import GeoTransform

SCHEMA_VERSION = 1

# NTSC luminance weights (they sum to 1.0)
LUMA_RED = 0.299
LUMA_GREEN = 0.587
LUMA_BLUE = 0.114


class BandKind(str, enum.Enum):
    PANCHROMATIC = "panchromatic"
    RGB = "rgb"
    RADIANCE = "radiance"


@dataclass(frozen=True)
class RasterGrid:
    """Immutable single-band 2-D grid with a geotransform and acquisition date."""

    values: np.ndarray  # (H, W), float
    band_kind: BandKind
    acquired: _dt.date
    transform: GeoTransform
    bit_depth: int = 32
    period: str | None = None  # "YYYY-MM", radiance composites only

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"values must be a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("values contain non-finite samples")
        if self.band_kind in (BandKind.PANCHROMATIC, BandKind.RGB):
            if arr.min() < 0.0 or arr.max() > 1.0:
                raise ValueError("imagery values must lie in [0, 1]")
        elif arr.min() < 0.0:
            raise ValueError("radiance values must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def extent_m(self) -> tuple[float, float]:
        """(width_m, height_m) of the grid footprint."""
        t = self.transform
        return self.width * t.pixel_size_x_m, self.height * t.pixel_size_y_m


def _require(cond: bool, field_name: str, detail: str):
    if not cond:
        raise RasterFormatError(f"{field_name}: {detail}")


def load_raster(path) -> RasterGrid:
    """Load a grid from the canonical container, validating every header field."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise RasterFormatError(f"header: not a JSON line ({exc})") from exc
    _require(isinstance(header, dict), "header", "must be a JSON object")
    for key in ("height", "width", "band_kind", "bit_depth", "acquired", "transform"):
        _require(key in header, key, "missing from header")
    h, w = header["height"], header["width"]
    _require(isinstance(h, int) and h >= 1, "height", f"must be a positive integer, got {h!r}")
    _require(isinstance(w, int) and w >= 1, "width", f"must be a positive integer, got {w!r}")
    try:
        kind = BandKind(header["band_kind"])
    except ValueError as exc:
        raise RasterFormatError(f"band_kind: unknown value {header['band_kind']!r}") from exc
    try:
        acquired = _dt.date.fromisoformat(header["acquired"])
    except (TypeError, ValueError) as exc:
        raise RasterFormatError(f"acquired: not an ISO-8601 date ({header['acquired']!r})") from exc
    try:
        transform = GeoTransform.from_header_dict(header["transform"])
    except (KeyError, TypeError, ValueError) as exc:
        raise RasterFormatError(f"transform: {exc}") from exc
    expected = h * w * 4
    _require(
        len(payload) == expected,
        "payload length",
        f"header claims {h}x{w} ({expected} bytes), payload has {len(payload)}",
    )
    arr = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(h, w)
    _require(bool(np.all(np.isfinite(arr))), "samples", "non-finite values in payload")
    try:
        return RasterGrid(
            values=arr,
            band_kind=kind,
            acquired=acquired,
            transform=transform,
            bit_depth=int(header["bit_depth"]),
            period=header.get("period"),
        )
    except ValueError as exc:
        raise RasterFormatError(f"samples: {exc}") from exc


def save_raster(grid: RasterGrid, path) -> None:
    header = {
        "schema_version": SCHEMA_VERSION,
        "height": grid.height,
        "width": grid.width,
        "band_kind": grid.band_kind.value,
        "bit_depth": grid.bit_depth,
        "acquired": grid.acquired.isoformat(),
        "transform": grid.transform.to_header_dict(),
    }
    if grid.period is not None:
        header["period"] = grid.period
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(grid.values, dtype="<f4").tobytes())


def import_pgm(path, transform: GeoTransform, acquired: _dt.date,
               band_kind: BandKind = BandKind.PANCHROMATIC) -> RasterGrid:
    """Read a plain (P2) or raw (P5) PGM and normalize samples to [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    i = 0
    # Header tokens: magic, width, height, maxval; '#' starts a comment.
    while len(tokens) < 4 and i < len(data):
        if data[i : i + 1].isspace():
            i += 1
        elif data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    if len(tokens) < 4 or tokens[0] not in (b"P2", b"P5"):
        raise RasterFormatError("header: not a PGM file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if tokens[0] == b"P5":
        i += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.uint8
        arr = np.frombuffer(data[i:], dtype=dtype, count=h * w).reshape(h, w)
    else:
        arr = np.array(data[i:].split()[: h * w], dtype=np.float64).reshape(h, w)
    bit_depth = 16 if maxval > 255 else 8
    values = arr.astype(np.float64) / maxval
    return RasterGrid(values=values, band_kind=band_kind, acquired=acquired,
                      transform=transform, bit_depth=bit_depth)


def import_png(path, transform: GeoTransform, acquired: _dt.date,
               band_kind: BandKind = BandKind.PANCHROMATIC) -> RasterGrid:
    """Read an 8/16-bit grayscale PNG and normalize samples to [0, 1]."""
    from PIL import Image

    with Image.open(path) as img:
        if img.mode == "I;16":
            arr = np.asarray(img, dtype=np.float64)
            maxval = 65535.0
            bit_depth = 16
        elif img.mode in ("L", "I"):
            arr = np.asarray(img.convert("L"), dtype=np.float64)
            maxval = 255.0
            bit_depth = 8
        else:
            raise RasterFormatError(f"band_kind: PNG mode {img.mode!r} is not grayscale")
    return RasterGrid(values=arr / maxval, band_kind=band_kind, acquired=acquired,
                      transform=transform, bit_depth=bit_depth)


def rgb_to_luminance(r: RasterGrid, g: RasterGrid, b: RasterGrid) -> RasterGrid:
    """NTSC luminance: Y = 0.299 R + 0.587 G + 0.114 B, per pixel."""
    if not (r.values.shape == g.values.shape == b.values.shape):
        raise DimensionMismatchError(
            f"channel dims differ: {r.values.shape} / {g.values.shape} / {b.values.shape}"
        )
    if r.transform != g.transform or r.transform != b.transform:
        raise DimensionMismatchError("channel geotransforms differ")
    y = LUMA_RED * r.values + LUMA_GREEN * g.values + LUMA_BLUE * b.values
    # Weights sum to 1 but guard float dust at the boundaries.
    y = np.clip(y, 0.0, 1.0)
    return replace(r, values=y, band_kind=BandKind.PANCHROMATIC)


def crop_window(r: RasterGrid, center_lon: float, center_lat: float,
                side_m: float = 800.0) -> RasterGrid:
    """Cut the side_m x side_m geographic square centered at (lon, lat).

    A pixel belongs to the crop iff its center falls inside the window
    (half-open on the east/south edges so adjacent windows tile cleanly).
    """
    t = r.transform
    cx, cy = t.lonlat_to_local_m(center_lon, center_lat)
    half = side_m / 2.0
    x_lo, x_hi = cx - half, cx + half
    y_lo, y_hi = cy - half, cy + half
    eps = 1e-9
    col0 = math.ceil(x_lo / t.pixel_size_x_m - 0.5 - eps)
    col1 = math.ceil(x_hi / t.pixel_size_x_m - 0.5 - eps) - 1  # last center < x_hi
    row0 = math.ceil(y_lo / t.pixel_size_y_m - 0.5 - eps)
    row1 = math.ceil(y_hi / t.pixel_size_y_m - 0.5 - eps) - 1
    overshoot = {
        "west": max(0.0, -x_lo),
        "east": max(0.0, x_hi - r.width * t.pixel_size_x_m),
        "north": max(0.0, -y_lo),
        "south": max(0.0, y_hi - r.height * t.pixel_size_y_m),
    }
    if col0 < 0 or row0 < 0 or col1 >= r.width or row1 >= r.height:
        bad = {k: v for k, v in overshoot.items() if v > 0}
        raise OutOfBoundsError(
            f"crop window exceeds raster extent, overshoot_m={bad}", overshoot_m=overshoot
        )
    if col1 < col0 or row1 < row0:
        raise OutOfBoundsError("crop window contains no pixel centers")
    sub = r.values[row0 : row1 + 1, col0 : col1 + 1]
    new_t = t.shifted(col0 * t.pixel_size_x_m, row0 * t.pixel_size_y_m)
    return replace(r, values=sub, transform=new_t)


def resample_bilinear(r: RasterGrid, out_h: int, out_w: int) -> RasterGrid:
    """Bilinear resample with pixel-center alignment.

    Output pixel center (i, j) samples input coordinates
    ((i + 0.5) * H/out_h - 0.5, (j + 0.5) * W/out_w - 0.5), clamped to the
    grid so edge pixels replicate.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output dims must be >= 1, got {out_h}x{out_w}")
    h, w = r.height, r.width
    src_y = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    src_x = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.minimum(src_y.astype(np.intp), h - 2) if h > 1 else np.zeros(out_h, dtype=np.intp)
    x0 = np.minimum(src_x.astype(np.intp), w - 2) if w > 1 else np.zeros(out_w, dtype=np.intp)
    fy = (src_y - y0)[:, None] if h > 1 else np.zeros((out_h, 1))
    fx = (src_x - x0)[None, :] if w > 1 else np.zeros((1, out_w))
    v = r.values
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    top = v[np.ix_(y0, x0)] * (1 - fx) + v[np.ix_(y0, x1)] * fx
    bot = v[np.ix_(y1, x0)] * (1 - fx) + v[np.ix_(y1, x1)] * fx
    out = top * (1 - fy) + bot * fy
    new_t = r.transform.rescaled(h / out_h, w / out_w)
    return replace(r, values=out, transform=new_t)
