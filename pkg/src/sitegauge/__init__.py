"""sitegauge: industrial-site development measurement from satellite rasters."""

__version__ = "0.1.0"

from .analytics import (
    LinearFit,
    TrendReport,
    dataset_summary,
    l1_score,
    ols_fit,
    predict_area_from_ntl,
    site_change,
    yearly_trend,
)
from .geo import CrsTag, GeoTransform
from .masks import (
    InstanceMask,
    MaskSet,
    MatchResult,
    average_precision,
    ap_grouped,
    iou,
    match_instances,
    structural_area,
    union_pixel_count,
)
from .ntl import Footprint, NtlGrid, eligible, ntl_label, overlapping_cells
from .raster import (
    BandKind,
    RasterGrid,
    crop_window,
    load_raster,
    resample_bilinear,
    rgb_to_luminance,
    save_raster,
)
