"""Run-length-encoded instance masks and detection metrics.

Masks are stored as maximal (start, length) runs over row-major pixel
indices. Set algebra (intersection, union counts) works directly on the
sorted runs; nothing here ever materializes a boolean grid.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, RasterFormatError, UndefinedMetricError

MASK_SCHEMA_VERSION = 1
DEFAULT_EXTENT_M2 = 800.0 * 800.0  # geographic area of the standard crop
MIN_GROUP_COUNT = 9


class Provenance(str, enum.Enum):
    GROUND_TRUTH_GEOCODED = "ground_truth_geocoded"
    MODEL_PREDICTION = "model_prediction"


@dataclass(frozen=True)
class InstanceMask:
    """One instance footprint as sorted, maximal RLE runs on a fixed grid."""

    grid_h: int
    grid_w: int
    runs: tuple  # ((start, length), ...)

    def __post_init__(self):
        n = self.grid_h * self.grid_w
        if self.grid_h < 1 or self.grid_w < 1:
            raise ValueError(f"grid dims must be >= 1, got {self.grid_h}x{self.grid_w}")
        runs = tuple((int(s), int(l)) for s, l in self.runs)
        prev_end = None
        for s, l in runs:
            if l < 1 or s < 0 or s + l > n:
                raise ValueError(f"run ({s},{l}) outside grid of {n} pixels")
            if prev_end is not None and s <= prev_end:
                raise ValueError("runs must be sorted, non-overlapping, and maximal")
            prev_end = s + l
        if not runs:
            raise ValueError("instance mask must cover at least one pixel")
        object.__setattr__(self, "runs", runs)

    @property
    def pixel_count(self) -> int:
        return sum(l for _, l in self.runs)

    def to_indices(self) -> np.ndarray:
        return np.concatenate([np.arange(s, s + l) for s, l in self.runs])

    def to_bool_grid(self) -> np.ndarray:
        flat = np.zeros(self.grid_h * self.grid_w, dtype=bool)
        flat[self.to_indices()] = True
        return flat.reshape(self.grid_h, self.grid_w)

    @classmethod
    def from_bool_grid(cls, grid: np.ndarray) -> "InstanceMask":
        grid = np.asarray(grid, dtype=bool)
        h, w = grid.shape
        return cls(grid_h=h, grid_w=w, runs=runs_from_flat(grid.ravel()))


def normalize_runs(runs) -> tuple:
    """Sort runs and merge overlapping or adjacent ones into maximal runs."""
    intervals = sorted((s, s + l) for s, l in runs)
    merged = []
    for s, e in intervals:
        if merged and s <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], e)
        else:
            merged.append([s, e])
    return tuple((s, e - s) for s, e in merged)


def runs_from_flat(flat: np.ndarray) -> tuple:
    """Maximal runs of True in a flat boolean array."""
    flat = np.asarray(flat, dtype=bool)
    padded = np.concatenate(([False], flat, [False]))
    diff = np.diff(padded.astype(np.int8))
    starts = np.flatnonzero(diff == 1)
    ends = np.flatnonzero(diff == -1)
    return tuple((int(s), int(e - s)) for s, e in zip(starts, ends))


@dataclass(frozen=True)
class MaskSet:
    """Instances (ground truth or predictions) sharing one pixel grid."""

    grid_h: int
    grid_w: int
    instances: tuple
    provenance: Provenance = Provenance.MODEL_PREDICTION

    def __post_init__(self):
        inst = tuple(self.instances)
        for m in inst:
            if (m.grid_h, m.grid_w) != (self.grid_h, self.grid_w):
                raise DimensionMismatchError(
                    f"instance grid {m.grid_h}x{m.grid_w} != set grid {self.grid_h}x{self.grid_w}"
                )
        object.__setattr__(self, "instances", inst)

    def __len__(self) -> int:
        return len(self.instances)


@dataclass(frozen=True)
class MatchResult:
    """One-to-one prediction/truth pairing at a fixed IoU threshold."""

    pairs: tuple  # ((pred_idx, truth_idx, iou), ...)
    unmatched_predictions: tuple
    unmatched_truths: tuple


def _merge_runs(run_lists) -> tuple:
    """Union of several run lists as maximal runs, by sweeping sorted intervals."""
    intervals = sorted((s, s + l) for runs in run_lists for s, l in runs)
    if not intervals:
        return ()
    merged = []
    cur_s, cur_e = intervals[0]
    for s, e in intervals[1:]:
        if s <= cur_e:
            cur_e = max(cur_e, e)
        else:
            merged.append((cur_s, cur_e - cur_s))
            cur_s, cur_e = s, e
    merged.append((cur_s, cur_e - cur_s))
    return tuple(merged)


def _intersection_count(a_runs, b_runs) -> int:
    total = 0
    i = j = 0
    while i < len(a_runs) and j < len(b_runs):
        a_s, a_l = a_runs[i]
        b_s, b_l = b_runs[j]
        a_e, b_e = a_s + a_l, b_s + b_l
        lo, hi = max(a_s, b_s), min(a_e, b_e)
        if hi > lo:
            total += hi - lo
        if a_e <= b_e:
            i += 1
        else:
            j += 1
    return total


def union_pixel_count(s: MaskSet) -> int:
    """Pixels covered by at least one instance; overlaps counted once."""
    return sum(l for _, l in _merge_runs(m.runs for m in s.instances))


def structural_area(s: MaskSet, extent_m2: float = DEFAULT_EXTENT_M2) -> float:
    """Square meters of structure: extent times the covered-pixel fraction."""
    return extent_m2 * union_pixel_count(s) / (s.grid_h * s.grid_w)


def iou(a: InstanceMask, b: InstanceMask) -> float:
    """Intersection over union of two masks on the same grid."""
    if (a.grid_h, a.grid_w) != (b.grid_h, b.grid_w):
        raise DimensionMismatchError(
            f"mask grids differ: {a.grid_h}x{a.grid_w} vs {b.grid_h}x{b.grid_w}"
        )
    inter = _intersection_count(a.runs, b.runs)
    union = a.pixel_count + b.pixel_count - inter
    return inter / union


def match_instances(preds: MaskSet, truths: MaskSet, threshold: float) -> MatchResult:
    """Greedy one-to-one matching in descending-IoU order.

    Candidate pairs are all (pred, truth) with IoU >= threshold; ties break
    on lower prediction index, then lower truth index.
    """
    if (preds.grid_h, preds.grid_w) != (truths.grid_h, truths.grid_w):
        raise DimensionMismatchError("prediction and truth grids differ")
    if not (0.0 < threshold <= 1.0):
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    candidates = []
    for pi, p in enumerate(preds.instances):
        for ti, t in enumerate(truths.instances):
            v = iou(p, t)
            if v >= threshold:
                candidates.append((-v, pi, ti))
    candidates.sort()
    used_p, used_t = set(), set()
    pairs = []
    for neg_v, pi, ti in candidates:
        if pi in used_p or ti in used_t:
            continue
        used_p.add(pi)
        used_t.add(ti)
        pairs.append((pi, ti, -neg_v))
    return MatchResult(
        pairs=tuple(pairs),
        unmatched_predictions=tuple(i for i in range(len(preds)) if i not in used_p),
        unmatched_truths=tuple(i for i in range(len(truths)) if i not in used_t),
    )


def average_precision(preds: MaskSet, truths: MaskSet, threshold: float) -> float:
    """TP / (TP + FP), where a prediction is TP iff matched at IoU >= threshold."""
    if len(preds) == 0:
        raise UndefinedMetricError("precision undefined with zero predictions")
    result = match_instances(preds, truths, threshold)
    tp = len(result.pairs)
    fp = len(result.unmatched_predictions)
    return tp / (tp + fp)


@dataclass(frozen=True)
class YearApRow:
    year: int
    ap: float | None  # None when undefined (zero predictions in the group)
    tp: int
    fp: int
    n_images: int
    flagged: bool  # fewer than min_count images in the group


def ap_grouped(dataset, threshold: float, min_count: int = MIN_GROUP_COUNT):
    """Pool TP/FP within each year of (preds, truths, year) triples.

    Returns YearApRow entries sorted by year; small groups are flagged, and
    groups with zero predictions report ap=None.
    """
    groups: dict[int, list] = {}
    for preds, truths, year in dataset:
        groups.setdefault(int(year), []).append((preds, truths))
    if not groups:
        raise ValueError("dataset is empty")
    rows = []
    for year in sorted(groups):
        tp = fp = 0
        for preds, truths in groups[year]:
            result = match_instances(preds, truths, threshold)
            tp += len(result.pairs)
            fp += len(result.unmatched_predictions)
        ap = tp / (tp + fp) if (tp + fp) > 0 else None
        rows.append(YearApRow(
            year=year, ap=ap, tp=tp, fp=fp,
            n_images=len(groups[year]),
            flagged=len(groups[year]) < min_count,
        ))
    return rows


def save_maskset(s: MaskSet, path) -> None:
    doc = {
        "schema_version": MASK_SCHEMA_VERSION,
        "grid_h": s.grid_h,
        "grid_w": s.grid_w,
        "provenance": s.provenance.value,
        "instances": [[list(run) for run in m.runs] for m in s.instances],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_maskset(path) -> MaskSet:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise RasterFormatError(f"mask file: not valid JSON ({exc})") from exc
    try:
        h, w = int(doc["grid_h"]), int(doc["grid_w"])
        provenance = Provenance(doc["provenance"])
        instances = tuple(
            InstanceMask(grid_h=h, grid_w=w, runs=tuple((int(s), int(l)) for s, l in inst))
            for inst in doc["instances"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise RasterFormatError(f"mask file: {exc}") from exc
    return MaskSet(grid_h=h, grid_w=w, instances=instances, provenance=provenance)
