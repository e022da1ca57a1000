"""Ground-truth annotations, scored detections, and their JSON file formats.

An annotation labels the tube end with four points (P1..P4) and the tracheal
bifurcation with nine points (P5..P13, P9 at the carina apex), plus the
isotropic pixel spacing needed to convert pixel distances to millimetres.
Detections are per-image scored masks (tube / carina) and scored feature
boxes (tube_tip_box / carina_box).
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import raster
from .errors import DegenerateAnnotationError, InputFormatError, MissingObjectError
from .raster import Point

TUBE = "tube"
CARINA = "carina"
TUBE_TIP_BOX = "tube_tip_box"
CARINA_BOX = "carina_box"
MASK_CLASSES = (TUBE, CARINA)
BOX_CLASSES = (TUBE_TIP_BOX, CARINA_BOX)
ALL_CLASSES = MASK_CLASSES + BOX_CLASSES

FEATURE_BOX_SIDE = 48


@dataclass(frozen=True)
class FeatureBox:
    """Axis-aligned square box labeling a feature point; side is fixed at 48."""

    center: Point
    side: int = FEATURE_BOX_SIDE

    def __post_init__(self):
        if self.side != FEATURE_BOX_SIDE:
            raise ValueError(f"feature box side must be {FEATURE_BOX_SIDE}, got {self.side}")


@dataclass(frozen=True)
class GroundTruthAnnotation:
    image_id: str
    image_width: int
    image_height: int
    pixel_spacing_mm: float
    ett_points: tuple[Point, ...] | None = None
    bifurcation_points: tuple[Point, ...] | None = None

    def __post_init__(self):
        if self.pixel_spacing_mm <= 0:
            raise ValueError(f"pixel_spacing_mm must be > 0, got {self.pixel_spacing_mm}")
        if self.ett_points is not None and len(self.ett_points) != 4:
            raise ValueError(f"ett_points needs exactly 4 points, got {len(self.ett_points)}")
        if self.bifurcation_points is not None and len(self.bifurcation_points) != 9:
            raise ValueError(
                f"bifurcation_points needs exactly 9 points, got {len(self.bifurcation_points)}"
            )
        for p in (self.ett_points or ()) + (self.bifurcation_points or ()):
            if not (0 <= p.x < self.image_width and 0 <= p.y < self.image_height):
                raise ValueError(f"point {p} outside {self.image_width}x{self.image_height} image")


@dataclass(frozen=True, eq=False)
class ScoredDetection:
    class_name: str
    score: float
    mask: np.ndarray | None = None
    box: tuple[float, float, float, float] | None = None  # cx, cy, w, h

    def __post_init__(self):
        if self.class_name not in ALL_CLASSES:
            raise ValueError(f"unknown class {self.class_name!r}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")
        if self.class_name in MASK_CLASSES and (self.mask is None or self.box is not None):
            raise ValueError(f"{self.class_name} detections carry a mask, not a box")
        if self.class_name in BOX_CLASSES and (self.box is None or self.mask is not None):
            raise ValueError(f"{self.class_name} detections carry a box, not a mask")


@dataclass(frozen=True)
class DetectionSet:
    image_id: str
    detections: tuple[ScoredDetection, ...] = field(default_factory=tuple)


def derive_mp(annotation: GroundTruthAnnotation) -> Point:
    """Tube-tip ground truth: midpoint of P2 and P3, rounded half-up."""
    if annotation.ett_points is None:
        raise MissingObjectError(f"{annotation.image_id}: no ETT annotation")
    p2, p3 = annotation.ett_points[1], annotation.ett_points[2]
    return Point((p2.x + p3.x + 1) // 2, (p2.y + p3.y + 1) // 2)


def carina_gt_point(annotation: GroundTruthAnnotation) -> Point:
    """Carina ground truth: P9, the fifth of the nine bifurcation points."""
    if annotation.bifurcation_points is None:
        raise MissingObjectError(f"{annotation.image_id}: no bifurcation annotation")
    return annotation.bifurcation_points[4]


def feature_boxes(annotation: GroundTruthAnnotation) -> tuple[FeatureBox | None, FeatureBox | None]:
    """48x48 ground-truth boxes centered on the tube tip (MP) and carina (P9)."""
    tip = FeatureBox(derive_mp(annotation)) if annotation.ett_points else None
    car = FeatureBox(carina_gt_point(annotation)) if annotation.bifurcation_points else None
    return tip, car


def _polygon_mask(points, width, height, what):
    pts = [(int(p[0]), int(p[1])) for p in points]
    a = pts[0]
    b = next((p for p in pts if p != a), None)
    # zero even-odd area iff every vertex sits on one line
    if b is None or all(
        (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) == 0 for p in pts
    ):
        raise DegenerateAnnotationError(f"{what} polygon is degenerate (collinear points)")
    return raster.fill_polygon(pts, width, height)


def gt_masks(annotation: GroundTruthAnnotation) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Rasterize the annotated polygons (even-odd fill, boundary included).

    Returns (tube-end mask, bifurcation mask); a side is None when the object
    is not annotated. Collinear points raise DegenerateAnnotationError.
    """
    w, h = annotation.image_width, annotation.image_height
    ett = None
    bif = None
    if annotation.ett_points is not None:
        ett = _polygon_mask(annotation.ett_points, w, h, "ETT")
    if annotation.bifurcation_points is not None:
        bif = _polygon_mask(annotation.bifurcation_points, w, h, "bifurcation")
    return ett, bif


def select_max_score(dets: DetectionSet) -> dict[str, ScoredDetection | None]:
    """Keep only the highest-score detection per class (first wins ties)."""
    best: dict[str, ScoredDetection | None] = {c: None for c in ALL_CLASSES}
    for d in dets.detections:
        cur = best[d.class_name]
        if cur is None or d.score > cur.score:
            best[d.class_name] = d
    return best


# ---------------------------------------------------------------------------
# File formats (JSON)
# ---------------------------------------------------------------------------

def _points(raw, path, idx, fld, count):
    if raw is None:
        return None
    try:
        pts = tuple(Point(int(x), int(y)) for x, y in raw)
    except (TypeError, ValueError) as e:
        raise InputFormatError(f"bad point list: {e}", path, idx, fld) from None
    if len(pts) != count:
        raise InputFormatError(f"expected {count} points, got {len(pts)}", path, idx, fld)
    return pts


def load_annotations(path) -> dict[str, GroundTruthAnnotation]:
    """Parse an annotation file into a dict keyed by image_id."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            records = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise InputFormatError(str(e), path) from None
    if not isinstance(records, list):
        raise InputFormatError("top-level JSON value must be a list", path)
    out: dict[str, GroundTruthAnnotation] = {}
    for idx, rec in enumerate(records):
        for fld in ("image_id", "image_width", "image_height", "pixel_spacing_mm"):
            if fld not in rec:
                raise InputFormatError("missing required field", path, idx, fld)
        try:
            ann = GroundTruthAnnotation(
                image_id=str(rec["image_id"]),
                image_width=int(rec["image_width"]),
                image_height=int(rec["image_height"]),
                pixel_spacing_mm=float(rec["pixel_spacing_mm"]),
                ett_points=_points(rec.get("ett_points"), path, idx, "ett_points", 4),
                bifurcation_points=_points(
                    rec.get("bifurcation_points"), path, idx, "bifurcation_points", 9
                ),
            )
        except ValueError as e:
            raise InputFormatError(str(e), path, idx) from None
        if ann.image_id in out:
            raise InputFormatError(f"duplicate image_id {ann.image_id!r}", path, idx, "image_id")
        out[ann.image_id] = ann
    return out


def save_annotations(annotations, path) -> None:
    records = []
    for ann in annotations.values() if isinstance(annotations, dict) else annotations:
        rec = {
            "image_id": ann.image_id,
            "image_width": ann.image_width,
            "image_height": ann.image_height,
            "pixel_spacing_mm": ann.pixel_spacing_mm,
        }
        if ann.ett_points is not None:
            rec["ett_points"] = [[p.x, p.y] for p in ann.ett_points]
        if ann.bifurcation_points is not None:
            rec["bifurcation_points"] = [[p.x, p.y] for p in ann.bifurcation_points]
        records.append(rec)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(records, f, indent=2, sort_keys=True)
        f.write("\n")


def load_detections(path, image_sizes=None) -> dict[str, DetectionSet]:
    """Parse a detection file into DetectionSets keyed by image_id.

    Masks come either as ``mask_png`` (path, relative to the detection file's
    directory) or ``mask_rle`` with explicit ``mask_width``/``mask_height``;
    boxes as ``[cx, cy, w, h]``. ``image_sizes`` maps image_id to (w, h) and
    is only used to validate RLE dimensions when provided.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            records = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise InputFormatError(str(e), path) from None
    if not isinstance(records, list):
        raise InputFormatError("top-level JSON value must be a list", path)
    base = os.path.dirname(os.path.abspath(path))
    grouped: dict[str, list[ScoredDetection]] = {}
    for idx, rec in enumerate(records):
        for fld in ("image_id", "class", "score"):
            if fld not in rec:
                raise InputFormatError("missing required field", path, idx, fld)
        image_id = str(rec["image_id"])
        cls = rec["class"]
        if cls not in ALL_CLASSES:
            raise InputFormatError(f"unknown class {cls!r}", path, idx, "class")
        mask = None
        box = None
        if cls in MASK_CLASSES:
            if "mask_png" in rec:
                png = rec["mask_png"]
                full = png if os.path.isabs(png) else os.path.join(base, png)
                try:
                    mask = raster.mask_from_png(full)
                except OSError as e:
                    raise InputFormatError(str(e), path, idx, "mask_png") from None
            elif "mask_rle" in rec:
                for fld in ("mask_width", "mask_height"):
                    if fld not in rec:
                        raise InputFormatError("missing required field", path, idx, fld)
                try:
                    mask = raster.decode_rle(
                        rec["mask_rle"], int(rec["mask_width"]), int(rec["mask_height"])
                    )
                except (TypeError, ValueError) as e:
                    raise InputFormatError(str(e), path, idx, "mask_rle") from None
                if image_sizes and image_id in image_sizes:
                    w, h = image_sizes[image_id]
                    if mask.shape != (h, w):
                        raise InputFormatError(
                            f"mask is {mask.shape[1]}x{mask.shape[0]}, image is {w}x{h}",
                            path, idx, "mask_rle",
                        )
            else:
                raise InputFormatError(
                    f"{cls} detection needs mask_png or mask_rle", path, idx, "mask_rle"
                )
        else:
            raw = rec.get("box")
            if raw is None:
                raise InputFormatError(f"{cls} detection needs a box", path, idx, "box")
            try:
                box = tuple(float(v) for v in raw)
            except (TypeError, ValueError) as e:
                raise InputFormatError(str(e), path, idx, "box") from None
            if len(box) != 4:
                raise InputFormatError("box must be [cx, cy, w, h]", path, idx, "box")
        try:
            det = ScoredDetection(class_name=cls, score=float(rec["score"]), mask=mask, box=box)
        except ValueError as e:
            raise InputFormatError(str(e), path, idx) from None
        grouped.setdefault(image_id, []).append(det)
    return {iid: DetectionSet(iid, tuple(dets)) for iid, dets in grouped.items()}


def save_detections(detection_sets, path) -> None:
    """Write detection sets with masks inlined as RLE."""
    records = []
    sets = detection_sets.values() if isinstance(detection_sets, dict) else detection_sets
    for ds in sets:
        for det in ds.detections:
            rec = {"image_id": ds.image_id, "class": det.class_name, "score": det.score}
            if det.mask is not None:
                rec["mask_rle"] = raster.encode_rle(det.mask)
                rec["mask_height"], rec["mask_width"] = det.mask.shape
            if det.box is not None:
                rec["box"] = list(det.box)
            records.append(rec)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(records, f, indent=2, sort_keys=True)
        f.write("\n")
