"""Exception hierarchy shared across the toolkit."""


class SitegaugeError(Exception):
    """Base class for all toolkit errors."""


class RasterFormatError(SitegaugeError):
    """Raster container malformed: bad header, payload mismatch, non-finite samples."""


class DimensionMismatchError(SitegaugeError):
    """Operands live on different pixel grids."""


class OutOfBoundsError(SitegaugeError):
    """Requested window exceeds the raster footprint.

    Carries per-edge overshoot in meters (west, east, north, south), zero
    where the edge is respected.
    """

    def __init__(self, message, overshoot_m=None):
        super().__init__(message)
        self.overshoot_m = overshoot_m or {}


class UndefinedMetricError(SitegaugeError):
    """Metric has no defined value on this input (e.g. precision with zero predictions)."""


class NoLabelError(SitegaugeError):
    """No qualifying radiance cell for the requested footprint."""


class DegenerateFitError(SitegaugeError):
    """Regression input cannot identify a line (all x identical, or n < 2)."""


class DegenerateTrendError(SitegaugeError):
    """Trend requested over fewer than two distinct years."""


class CatalogError(SitegaugeError):
    """Catalog file malformed or internally inconsistent."""


class SceneGenerationError(SitegaugeError):
    """Synthetic scene spec cannot be realized (placement retries exhausted, area out of range)."""


class BundleError(SitegaugeError):
    """Training-bundle export or verification failure (I/O, checksum mismatch)."""
