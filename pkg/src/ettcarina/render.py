"""Overlay rendering: ground truth in yellow, predictions in red.

Each overlay draws the annotated polygons as yellow outlines, the
ground-truth feature points (tube tip MP, carina P9) as yellow asterisks,
and the predicted feature points as red asterisks. Without a background
radiograph the polygons are filled as a gray silhouette so the overlay is
readable on its own. A small legend notes undetected objects.
"""
from __future__ import annotations

import numpy as np
from PIL import Image, ImageDraw

from .annotations import GroundTruthAnnotation, carina_gt_point, derive_mp, gt_masks
from .errors import DegenerateAnnotationError
from .extraction import ExtractionResult

YELLOW = (255, 255, 0)
RED = (255, 0, 0)
SILHOUETTE = (80, 80, 80)
BACKGROUND = (0, 0, 0)
ASTERISK_ARM_PX = 6


def _asterisk(draw: ImageDraw.ImageDraw, x: int, y: int, color, arm: int = ASTERISK_ARM_PX):
    d = (7 * arm) // 10
    draw.line((x - arm, y, x + arm, y), fill=color)
    draw.line((x, y - arm, x, y + arm), fill=color)
    draw.line((x - d, y - d, x + d, y + d), fill=color)
    draw.line((x - d, y + d, x + d, y - d), fill=color)


def _silhouette(annotation: GroundTruthAnnotation) -> Image.Image:
    arr = np.zeros((annotation.image_height, annotation.image_width, 3), dtype=np.uint8)
    arr[:] = BACKGROUND
    try:
        for mask in gt_masks(annotation):
            if mask is not None:
                arr[mask] = SILHOUETTE
    except DegenerateAnnotationError:
        pass  # outline and glyphs still render
    return Image.fromarray(arr)


def render_overlay(
    annotation: GroundTruthAnnotation,
    result: ExtractionResult | None = None,
    background: Image.Image | None = None,
) -> Image.Image:
    """Compose one overlay image; result=None renders the yellow layers only."""
    if background is not None:
        img = background.convert("RGB")
        if img.size != (annotation.image_width, annotation.image_height):
            raise ValueError(
                f"background is {img.size[0]}x{img.size[1]}, annotation says "
                f"{annotation.image_width}x{annotation.image_height}"
            )
    else:
        img = _silhouette(annotation)
    draw = ImageDraw.Draw(img)

    for pts in (annotation.ett_points, annotation.bifurcation_points):
        if pts is not None:
            ring = [(p.x, p.y) for p in pts] + [(pts[0].x, pts[0].y)]
            draw.line(ring, fill=YELLOW, width=1)
    if annotation.ett_points is not None:
        mp = derive_mp(annotation)
        _asterisk(draw, mp.x, mp.y, YELLOW)
    if annotation.bifurcation_points is not None:
        p9 = carina_gt_point(annotation)
        _asterisk(draw, p9.x, p9.y, YELLOW)

    notes = ["yellow: ground truth", "red: prediction"]
    if result is not None:
        if result.tip_point is not None:
            _asterisk(draw, result.tip_point.x, result.tip_point.y, RED)
        else:
            notes.append("tip: undetection")
        if result.carina_point is not None:
            _asterisk(draw, result.carina_point.x, result.carina_point.y, RED)
        else:
            notes.append("carina: undetection")
    else:
        notes.append("no prediction")

    for i, line in enumerate(notes):
        draw.text((4, 2 + 11 * i), line, fill=YELLOW if i == 0 else RED)
    return img


def render_to_file(
    annotation: GroundTruthAnnotation,
    result: ExtractionResult | None,
    out_path,
    background_path=None,
) -> None:
    background = Image.open(background_path) if background_path else None
    try:
        render_overlay(annotation, result, background).save(out_path)
    finally:
        if background is not None:
            background.close()
