"""Synthetic tube/bifurcation fixtures with exactly known ground truth.

Each fixture is a vertical tube segment above an arch-shaped bifurcation
whose notch apex is the carina point. Detections are built from the same
integer geometry: masks are the ground-truth polygons translated by the
planted shift and boxes are 48x48 squares centered on the shifted feature
points. Because mask and box shift together, the fused prediction is the
box center, so every planted error is realized exactly and the manifest
alone determines the expected evaluation aggregates.

All geometry is integer; randomness only jitters detection scores.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass

from . import raster
from .annotations import (
    CARINA,
    CARINA_BOX,
    FEATURE_BOX_SIDE,
    TUBE,
    TUBE_TIP_BOX,
    DetectionSet,
    GroundTruthAnnotation,
    ScoredDetection,
)
from .errors import InvalidSpecError
from .raster import Point

# mask-route quantization: tip = skeleton end erosion, carina = edge-density
# peak sitting a few pixels down the notch edges
TIP_MASK_TOL_PX = 2.0
CARINA_MASK_TOL_PX = 6.0

DECOY_SHIFT = (200, 0)
DECOY_SCORE = 0.4


@dataclass(frozen=True)
class FixtureSpec:
    """Integer geometry plus planted perturbations for one image."""

    image_id: str
    image_width: int = 640
    image_height: int = 640
    pixel_spacing_mm: float = 0.5
    cx: int = 320
    apex_y: int = 420
    gt_distance_px: int = 100  # tube bottom to apex, straight down
    tube_length_px: int = 240
    tube_halfwidth_px: int = 1
    top_halfspan_px: int = 40
    arch_height_px: int = 60
    leg_dx_px: int = 70
    leg_dy_px: int = 100
    leg_thickness_px: int = 16
    tip_shift: tuple[int, int] = (0, 0)
    carina_shift: tuple[int, int] = (0, 0)
    # extra offset applied to the carina box only, to exercise fusion
    carina_box_extra_shift: tuple[int, int] = (0, 0)
    drop_tube_mask: bool = False
    drop_tip_box: bool = False
    drop_carina_mask: bool = False
    drop_carina_box: bool = False
    tube_score: float = 0.9
    tip_box_score: float = 0.9
    carina_score: float = 0.9
    carina_box_score: float = 0.9
    decoys: bool = False

    @property
    def tube_bottom_y(self) -> int:
        return self.apex_y - self.gt_distance_px

    @property
    def tube_top_y(self) -> int:
        return self.tube_bottom_y - self.tube_length_px

    def validate(self) -> None:
        if self.tube_halfwidth_px < 0 or self.leg_thickness_px < 1:
            raise InvalidSpecError("widths must be at least 1 px")
        if self.gt_distance_px < 1 or self.tube_length_px < 1:
            raise InvalidSpecError("tube must sit strictly above the apex")
        if self.arch_height_px < 1 or self.leg_dy_px < 1:
            raise InvalidSpecError("bifurcation extents must be positive")
        if self.pixel_spacing_mm <= 0:
            raise InvalidSpecError("pixel spacing must be positive")
        for name in ("tube_score", "tip_box_score", "carina_score", "carina_box_score"):
            s = getattr(self, name)
            if not 0.0 <= s <= 1.0:
                raise InvalidSpecError(f"{name} must be in [0, 1], got {s}")
        extra = math.hypot(*self.carina_box_extra_shift)
        if (
            not self.drop_carina_box
            and not self.drop_carina_mask
            and 100.0 - CARINA_MASK_TOL_PX < extra <= 100.0 + CARINA_MASK_TOL_PX
        ):
            raise InvalidSpecError(
                "carina box offset lands within the mask-route tolerance of the "
                "100 px fusion threshold; the expected fusion source is undecidable"
            )

        def check(points, shift, what):
            for x, y in points:
                px, py = x + shift[0], y + shift[1]
                if not (0 <= px < self.image_width and 0 <= py < self.image_height):
                    raise InvalidSpecError(
                        f"{self.image_id}: {what} point ({px}, {py}) outside "
                        f"{self.image_width}x{self.image_height} image"
                    )

        box_shift = (
            self.carina_shift[0] + self.carina_box_extra_shift[0],
            self.carina_shift[1] + self.carina_box_extra_shift[1],
        )
        check(self.ett_points(), (0, 0), "tube")
        check(self.ett_points(), self.tip_shift, "shifted tube")
        check(self.bifurcation_points(), (0, 0), "bifurcation")
        check(self.bifurcation_points(), self.carina_shift, "shifted bifurcation")
        check([self.mp], self.tip_shift, "tip box center")
        check([self.p9], box_shift, "carina box center")
        if self.decoys:
            check(self.ett_points(), DECOY_SHIFT, "decoy tube")
            check([self.p9], DECOY_SHIFT, "decoy carina box center")

    def ett_points(self) -> tuple[tuple[int, int], ...]:
        """P1..P4 around the tube end; P2 and P3 are the bottom corners."""
        hw = self.tube_halfwidth_px
        return (
            (self.cx - hw, self.tube_top_y),
            (self.cx - hw, self.tube_bottom_y),
            (self.cx + hw, self.tube_bottom_y),
            (self.cx + hw, self.tube_top_y),
        )

    def bifurcation_points(self) -> tuple[tuple[int, int], ...]:
        """P5..P13 around the bifurcation arch; P9 (index 4) is the notch."""
        ax, ay = self.cx, self.apex_y
        dx, dy, t = self.leg_dx_px, self.leg_dy_px, self.leg_thickness_px
        return (
            (ax + self.top_halfspan_px, ay - self.arch_height_px),
            (ax + dx + t, ay + dy),
            (ax + dx, ay + dy),
            (ax + dx // 2, ay + dy // 2),
            (ax, ay),
            (ax - dx // 2, ay + dy // 2),
            (ax - dx, ay + dy),
            (ax - dx - t, ay + dy),
            (ax - self.top_halfspan_px, ay - self.arch_height_px),
        )

    @property
    def mp(self) -> Point:
        return Point(self.cx, self.tube_bottom_y)

    @property
    def p9(self) -> Point:
        return Point(self.cx, self.apex_y)


@dataclass(frozen=True)
class ExpectedEnvelope:
    """Planted truth with per-point tolerance radii.

    Box-sourced points are exact (radius 0); mask-sourced points carry the
    quantization radius of that route. d2_mm is given only when both points
    are box-sourced and therefore exact.
    """

    tip_point: Point | None
    tip_tol_px: float
    tip_source: str
    carina_point: Point | None
    carina_tol_px: float
    carina_source: str
    d2_mm: float | None


@dataclass(frozen=True)
class Fixture:
    spec: FixtureSpec
    annotation: GroundTruthAnnotation
    detections: DetectionSet
    expected: ExpectedEnvelope
    manifest_row: dict


def _shift_pts(points, shift):
    sx, sy = shift
    return tuple(Point(x + sx, y + sy) for x, y in points)


def _poly_mask(spec, points, shift):
    # same fill as ground-truth rasterization, so mask and GT cannot diverge
    return raster.fill_polygon(
        [(x + shift[0], y + shift[1]) for x, y in points], spec.image_width, spec.image_height
    )


def _tube_mask(spec, shift):
    return _poly_mask(spec, spec.ett_points(), shift)


def _carina_mask(spec, shift):
    return _poly_mask(spec, spec.bifurcation_points(), shift)


def _box(center: Point, shift) -> tuple[float, float, float, float]:
    return (
        float(center.x + shift[0]),
        float(center.y + shift[1]),
        float(FEATURE_BOX_SIDE),
        float(FEATURE_BOX_SIDE),
    )


def generate(spec: FixtureSpec, rng: random.Random | None = None) -> Fixture:
    """Build the annotation, detections, and expected envelope for one spec."""
    spec.validate()
    rng = rng or random.Random(0)

    annotation = GroundTruthAnnotation(
        image_id=spec.image_id,
        image_width=spec.image_width,
        image_height=spec.image_height,
        pixel_spacing_mm=spec.pixel_spacing_mm,
        ett_points=_shift_pts(spec.ett_points(), (0, 0)),
        bifurcation_points=_shift_pts(spec.bifurcation_points(), (0, 0)),
    )

    dets: list[ScoredDetection] = []
    if not spec.drop_tube_mask:
        dets.append(ScoredDetection(TUBE, spec.tube_score, mask=_tube_mask(spec, spec.tip_shift)))
    if not spec.drop_tip_box:
        dets.append(ScoredDetection(TUBE_TIP_BOX, spec.tip_box_score, box=_box(spec.mp, spec.tip_shift)))
    if not spec.drop_carina_mask:
        dets.append(
            ScoredDetection(CARINA, spec.carina_score, mask=_carina_mask(spec, spec.carina_shift))
        )
    if not spec.drop_carina_box:
        box_shift = (
            spec.carina_shift[0] + spec.carina_box_extra_shift[0],
            spec.carina_shift[1] + spec.carina_box_extra_shift[1],
        )
        dets.append(ScoredDetection(CARINA_BOX, spec.carina_box_score, box=_box(spec.p9, box_shift)))
    if spec.decoys:
        # lower-score duplicates far off truth; max-score selection must skip them
        score = DECOY_SCORE + 0.1 * rng.random()
        dets.append(ScoredDetection(TUBE, score, mask=_tube_mask(spec, DECOY_SHIFT)))
        dets.append(ScoredDetection(CARINA_BOX, score, box=_box(spec.p9, DECOY_SHIFT)))

    expected = _expected(spec)
    d1_mm = spec.gt_distance_px * spec.pixel_spacing_mm
    row = {
        "image_id": spec.image_id,
        "mp": [spec.mp.x, spec.mp.y],
        "p9": [spec.p9.x, spec.p9.y],
        "d1_mm": d1_mm,
        "pixel_spacing_mm": spec.pixel_spacing_mm,
        "tip_shift": list(spec.tip_shift),
        "carina_shift": list(spec.carina_shift),
        "carina_box_extra_shift": list(spec.carina_box_extra_shift),
        "tip_detected": not (spec.drop_tube_mask and spec.drop_tip_box),
        "carina_detected": not (spec.drop_carina_mask and spec.drop_carina_box),
        "tip_source": expected.tip_source,
        "carina_source": expected.carina_source,
        "d2_mm": expected.d2_mm,
        "decoys": spec.decoys,
    }
    return Fixture(spec, annotation, DetectionSet(spec.image_id, tuple(dets)), expected, row)


def _expected(spec: FixtureSpec) -> ExpectedEnvelope:
    if not spec.drop_tip_box:
        tip_source = "box"
        tip_pt = Point(spec.mp.x + spec.tip_shift[0], spec.mp.y + spec.tip_shift[1])
        tip_tol = 0.0
    elif not spec.drop_tube_mask:
        tip_source = "mask"
        tip_pt = Point(spec.mp.x + spec.tip_shift[0], spec.mp.y + spec.tip_shift[1])
        tip_tol = TIP_MASK_TOL_PX
    else:
        tip_source, tip_pt, tip_tol = "none", None, 0.0

    carina_truth = Point(spec.p9.x + spec.carina_shift[0], spec.p9.y + spec.carina_shift[1])
    if not spec.drop_carina_box:
        extra = math.hypot(*spec.carina_box_extra_shift)
        # the pipeline compares box against the realized mask point, which sits
        # within CARINA_MASK_TOL_PX of truth; validate() rejects the gray zone
        if not spec.drop_carina_mask and extra > 100.0 + CARINA_MASK_TOL_PX:
            carina_source, carina_pt, carina_tol = "mask", carina_truth, CARINA_MASK_TOL_PX
        else:
            carina_source = "box"
            carina_pt = Point(
                carina_truth.x + spec.carina_box_extra_shift[0],
                carina_truth.y + spec.carina_box_extra_shift[1],
            )
            carina_tol = 0.0
    elif not spec.drop_carina_mask:
        carina_source, carina_pt, carina_tol = "mask", carina_truth, CARINA_MASK_TOL_PX
    else:
        carina_source, carina_pt, carina_tol = "none", None, 0.0

    d2 = None
    if tip_source == "box" and carina_source == "box":
        d2 = math.hypot(tip_pt.x - carina_pt.x, tip_pt.y - carina_pt.y) * spec.pixel_spacing_mm
    return ExpectedEnvelope(tip_pt, tip_tol, tip_source, carina_pt, carina_tol, carina_source, d2)


# ---------------------------------------------------------------------------
# Cohorts with planted error profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorProfile:
    """Cyclic plan of planted errors and failure scenarios.

    distance_errors_mm cycles over otherwise-unperturbed images, landing
    alternately on the tip and the carina as a vertical shift (horizontal
    on every horizontal_every-th image). The *_every fields plant
    undetections and misdetections at fixed strides (None disables).
    Errors must be integer multiples of the pixel spacing so planted shifts
    are whole pixels.
    """

    distance_errors_mm: tuple[float, ...] = (0.0, 3.0, 8.0, 13.0, 22.0)
    gt_distance_cycle_mm: tuple[float, ...] = (50.0, 50.0, 25.0, 50.0, 10.0)
    carina_undetected_every: int | None = 23
    tip_undetected_every: int | None = 31
    carina_misdetected_every: int | None = 17
    tip_misdetected_every: int | None = 29
    decoy_every: int | None = 7
    horizontal_every: int | None = 13
    misdetect_shift_px: int = 180


ALL_CLEAN = ErrorProfile(
    distance_errors_mm=(0.0,),
    gt_distance_cycle_mm=(50.0,),
    carina_undetected_every=None,
    tip_undetected_every=None,
    carina_misdetected_every=None,
    tip_misdetected_every=None,
    decoy_every=None,
    horizontal_every=None,
)


def _scenario(i: int, profile: ErrorProfile) -> str:
    if profile.carina_undetected_every and i % profile.carina_undetected_every == 3:
        return "carina_undetected"
    if profile.tip_undetected_every and i % profile.tip_undetected_every == 5:
        return "tip_undetected"
    if profile.carina_misdetected_every and i % profile.carina_misdetected_every == 7:
        return "carina_misdetected"
    if profile.tip_misdetected_every and i % profile.tip_misdetected_every == 11:
        return "tip_misdetected"
    return "planted"


def _planted_shift(k: int, e_mm: float, gap_px: int, spacing: float, horizontal: bool):
    """Whole-pixel shift realizing the planted error e_mm.

    k is the running index of planted images and alternates target and
    sign. Vertical shifts that would push the tip to or past the carina
    flip upward so the realized distance error stays exactly e_mm.
    """
    px = e_mm / spacing
    if px != int(px):
        raise InvalidSpecError(
            f"planted error {e_mm} mm is not a whole pixel count at spacing {spacing}"
        )
    px = int(px)
    target = "tip" if k % 2 == 0 else "carina"
    sign = 1 if (k // 2) % 2 == 0 else -1
    if horizontal:
        return target, (sign * px, 0)
    dy = sign * px
    # tip moving down (or carina moving up) must not cross the other point
    if target == "tip" and dy >= gap_px:
        dy = -px
    if target == "carina" and -dy >= gap_px:
        dy = px
    return target, (0, dy)


@dataclass(frozen=True)
class Cohort:
    annotations: dict[str, GroundTruthAnnotation]
    detections: dict[str, DetectionSet]
    manifest: dict


def generate_cohort(n: int, seed: int, profile: ErrorProfile = ErrorProfile()) -> Cohort:
    """n deterministic fixtures with planted errors recorded in a manifest."""
    if n < 1:
        raise InvalidSpecError(f"cohort size must be at least 1, got {n}")
    annotations = {}
    detections = {}
    rows = []
    planted_count = 0
    for i in range(n):
        rng = random.Random(seed * 1_000_003 + i)
        image_id = f"fixture_{i:04d}"
        scenario = _scenario(i, profile)
        d1 = profile.gt_distance_cycle_mm[i % len(profile.gt_distance_cycle_mm)]
        spacing = 0.5
        gap_px = int(d1 / spacing)
        if gap_px * spacing != d1:
            raise InvalidSpecError(
                f"gt distance {d1} mm is not a whole pixel count at spacing {spacing}"
            )

        # decoys on an undetection image would re-detect the dropped object
        want_decoys = bool(
            profile.decoy_every
            and i % profile.decoy_every == 1
            and scenario not in ("carina_undetected", "tip_undetected")
        )
        kwargs = dict(
            image_id=image_id,
            pixel_spacing_mm=spacing,
            gt_distance_px=gap_px,
            decoys=want_decoys,
        )
        if scenario == "carina_undetected":
            kwargs.update(drop_carina_mask=True, drop_carina_box=True)
        elif scenario == "tip_undetected":
            kwargs.update(drop_tube_mask=True, drop_tip_box=True)
        elif scenario == "carina_misdetected":
            kwargs.update(carina_shift=(profile.misdetect_shift_px, 0))
        elif scenario == "tip_misdetected":
            kwargs.update(tip_shift=(profile.misdetect_shift_px, 0))
        else:
            e = profile.distance_errors_mm[planted_count % len(profile.distance_errors_mm)]
            horizontal = bool(profile.horizontal_every and i % profile.horizontal_every == 2)
            target, shift = _planted_shift(planted_count, e, gap_px, spacing, horizontal)
            if target == "tip":
                kwargs.update(tip_shift=shift)
            else:
                kwargs.update(carina_shift=shift)
            planted_count += 1

        jitter = round(0.8 + 0.15 * rng.random(), 6)
        kwargs.update(
            tube_score=jitter,
            tip_box_score=jitter,
            carina_score=jitter,
            carina_box_score=jitter,
        )
        fixture = generate(FixtureSpec(**kwargs), rng)
        fixture.manifest_row["scenario"] = scenario
        annotations[image_id] = fixture.annotation
        detections[image_id] = fixture.detections
        rows.append(fixture.manifest_row)

    manifest = {
        "n": n,
        "seed": seed,
        "profile": asdict(profile),
        "images": rows,
    }
    return Cohort(annotations, detections, manifest)


def save_manifest(manifest: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def load_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
