"""Feature-point extraction: tube tip and carina from masks and boxes.

The mask route finds the tube tip as the lowest skeleton pixel, and the
carina by a skeleton-density scan (15x15) followed by an edge-density scan
(7x7) inside a 100x150 patch of the mask boundary. Box-route points are box
centers. Fusion prefers the box result; for the carina the mask result
replaces a box result that sits more than 100 px away, and for both objects
the mask result fills in when the box is missing.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import raster
from .annotations import CARINA, CARINA_BOX, TUBE, TUBE_TIP_BOX, DetectionSet, select_max_score
from .errors import InputFormatError
from .raster import Point, WindowSpec

CENTRAL_WINDOW = WindowSpec(15, 15)
FEATURE_WINDOW = WindowSpec(7, 7)
PATCH_W = 100
PATCH_H = 150
DEFAULT_FUSION_THRESHOLD_PX = 100.0


@dataclass(frozen=True)
class CarinaMaskResult:
    """Mask-route carina point plus the intermediates that produced it."""

    point: Point
    central: Point
    patch_offset: Point
    edge_fallback: bool  # True when the patch held no edge pixels


@dataclass(frozen=True)
class ExtractionResult:
    image_id: str
    tip_point: Point | None
    carina_point: Point | None
    tip_source: str  # "box" | "mask" | "none"
    carina_source: str
    tip_mask_point: Point | None = None
    tip_box_point: Point | None = None
    carina_mask_point: Point | None = None
    carina_box_point: Point | None = None
    carina_edge_fallback: bool = False
    distance_px: float | None = None
    distance_mm: float | None = None


def tip_from_mask(tube_mask: np.ndarray) -> Point:
    """Lowest point of the tube-mask skeleton."""
    return raster.lowest_skeleton_point(raster.skeletonize(tube_mask))


def carina_from_mask(carina_mask: np.ndarray) -> CarinaMaskResult:
    """Carina feature point from the mask alone.

    Steps: skeletonize; take the 15x15 skeleton-density argmax as the central
    point; crop a 100x150 patch of the mask's edge pixels around it; return
    the 7x7 edge-density argmax in the patch, preferring the density tie
    closest to the central point (then smallest y, then x). With no edge
    pixels in the patch the central point itself is returned, flagged.
    """
    skel = raster.skeletonize(carina_mask)
    central = raster.densest_window_center(skel, skel, CENTRAL_WINDOW)
    edges = raster.edge_pixels(carina_mask)
    patch, offset = raster.crop_patch(edges, central, PATCH_W, PATCH_H)
    if not patch.any():
        return CarinaMaskResult(central, central, offset, edge_fallback=True)
    counts = raster.window_sums(patch, FEATURE_WINDOW)
    scored = np.where(patch, counts, -1)
    best = scored.max()
    ys, xs = np.nonzero(scored == best)
    d2 = (xs + offset.x - central.x) ** 2 + (ys + offset.y - central.y) ** 2
    # ties: nearest the central point, then smallest y, then smallest x
    order = np.lexsort((xs, ys, d2))[0]
    point = Point(int(xs[order]) + offset.x, int(ys[order]) + offset.y)
    return CarinaMaskResult(point, central, offset, edge_fallback=False)


def point_from_box(box) -> Point:
    """Rounded box center; the point is never clamped to the image."""
    cx, cy = box[0], box[1]
    return Point(raster.round_half_up(cx), raster.round_half_up(cy))


def fuse_tip(box_pt: Point | None, mask_pt: Point | None) -> tuple[Point | None, str]:
    """Box results are always accepted; the mask result only fills gaps."""
    if box_pt is not None:
        return box_pt, "box"
    if mask_pt is not None:
        return mask_pt, "mask"
    return None, "none"


def fuse_carina(
    box_pt: Point | None,
    mask_pt: Point | None,
    threshold_px: float = DEFAULT_FUSION_THRESHOLD_PX,
) -> tuple[Point | None, str]:
    """Box result unless the mask result is strictly more than threshold_px
    away, in which case the mask result replaces it; either one alone is
    used as-is."""
    if box_pt is not None and mask_pt is not None:
        if math.hypot(box_pt.x - mask_pt.x, box_pt.y - mask_pt.y) > threshold_px:
            return mask_pt, "mask"
        return box_pt, "box"
    if box_pt is not None:
        return box_pt, "box"
    if mask_pt is not None:
        return mask_pt, "mask"
    return None, "none"


def extract(
    dets: DetectionSet,
    pixel_spacing_mm: float,
    fusion_threshold_px: float = DEFAULT_FUSION_THRESHOLD_PX,
) -> ExtractionResult:
    """Full per-image pipeline: max-score selection, per-source extraction,
    fusion, and the tip-carina distance. Absent objects come back as None
    rather than errors; an empty detection mask counts as absent."""
    best = select_max_score(dets)

    tip_mask_pt = None
    tube = best[TUBE]
    if tube is not None and tube.mask is not None and tube.mask.any():
        tip_mask_pt = tip_from_mask(tube.mask)

    carina_mask_pt = None
    edge_fallback = False
    carina = best[CARINA]
    if carina is not None and carina.mask is not None and carina.mask.any():
        res = carina_from_mask(carina.mask)
        carina_mask_pt = res.point
        edge_fallback = res.edge_fallback

    tip_box_pt = point_from_box(best[TUBE_TIP_BOX].box) if best[TUBE_TIP_BOX] else None
    carina_box_pt = point_from_box(best[CARINA_BOX].box) if best[CARINA_BOX] else None

    tip_point, tip_source = fuse_tip(tip_box_pt, tip_mask_pt)
    carina_point, carina_source = fuse_carina(carina_box_pt, carina_mask_pt, fusion_threshold_px)

    distance_px = None
    distance_mm = None
    if tip_point is not None and carina_point is not None:
        distance_px = math.hypot(tip_point.x - carina_point.x, tip_point.y - carina_point.y)
        distance_mm = distance_px * pixel_spacing_mm

    return ExtractionResult(
        image_id=dets.image_id,
        tip_point=tip_point,
        carina_point=carina_point,
        tip_source=tip_source,
        carina_source=carina_source,
        tip_mask_point=tip_mask_pt,
        tip_box_point=tip_box_pt,
        carina_mask_point=carina_mask_pt,
        carina_box_point=carina_box_pt,
        carina_edge_fallback=edge_fallback,
        distance_px=distance_px,
        distance_mm=distance_mm,
    )


# ---------------------------------------------------------------------------
# Record file (JSON)
# ---------------------------------------------------------------------------

def _pt(p: Point | None):
    return None if p is None else [p.x, p.y]


def result_to_record(r: ExtractionResult) -> dict:
    return {
        "image_id": r.image_id,
        "tip": _pt(r.tip_point),
        "carina": _pt(r.carina_point),
        "tip_source": r.tip_source,
        "carina_source": r.carina_source,
        "tip_mask_point": _pt(r.tip_mask_point),
        "tip_box_point": _pt(r.tip_box_point),
        "carina_mask_point": _pt(r.carina_mask_point),
        "carina_box_point": _pt(r.carina_box_point),
        "carina_edge_fallback": r.carina_edge_fallback,
        "distance_px": r.distance_px,
        "distance_mm": r.distance_mm,
    }


def _opt_point(raw, path, idx, fld):
    if raw is None:
        return None
    try:
        x, y = raw
        return Point(int(x), int(y))
    except (TypeError, ValueError) as e:
        raise InputFormatError(str(e), path, idx, fld) from None


def record_to_result(rec: dict, path=None, idx=None) -> ExtractionResult:
    for fld in ("image_id", "tip", "carina", "tip_source", "carina_source"):
        if fld not in rec:
            raise InputFormatError("missing required field", path, idx, fld)
    return ExtractionResult(
        image_id=str(rec["image_id"]),
        tip_point=_opt_point(rec["tip"], path, idx, "tip"),
        carina_point=_opt_point(rec["carina"], path, idx, "carina"),
        tip_source=rec["tip_source"],
        carina_source=rec["carina_source"],
        tip_mask_point=_opt_point(rec.get("tip_mask_point"), path, idx, "tip_mask_point"),
        tip_box_point=_opt_point(rec.get("tip_box_point"), path, idx, "tip_box_point"),
        carina_mask_point=_opt_point(rec.get("carina_mask_point"), path, idx, "carina_mask_point"),
        carina_box_point=_opt_point(rec.get("carina_box_point"), path, idx, "carina_box_point"),
        carina_edge_fallback=bool(rec.get("carina_edge_fallback", False)),
        distance_px=rec.get("distance_px"),
        distance_mm=rec.get("distance_mm"),
    )


def save_results(results, path) -> None:
    """Write extraction results as a JSON list, ordered by image_id."""
    items = results.values() if isinstance(results, dict) else results
    records = [result_to_record(r) for r in sorted(items, key=lambda r: r.image_id)]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(records, f, indent=2, sort_keys=True)
        f.write("\n")


def load_results(path) -> dict[str, ExtractionResult]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            records = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise InputFormatError(str(e), path) from None
    if not isinstance(records, list):
        raise InputFormatError("top-level JSON value must be a list", path)
    out = {}
    for idx, rec in enumerate(records):
        r = record_to_result(rec, path, idx)
        out[r.image_id] = r
    return out
