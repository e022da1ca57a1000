"""Binary-raster primitives: masks, thinning, boundary extraction, window scans.

Masks are plain ``numpy`` boolean arrays of shape ``(height, width)``.
Coordinates follow the raster convention: ``x`` is the column index, ``y``
the row index, origin at the top-left, so larger ``y`` means lower in the
image.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import EmptyMaskError

# 8-connectivity structuring element for component labeling.
_CONN8 = np.ones((3, 3), dtype=int)


class Point(NamedTuple):
    x: int
    y: int


class WindowSpec(NamedTuple):
    """Sliding-window size; both dimensions must be odd so a center exists."""

    width: int
    height: int


def as_mask(a) -> np.ndarray:
    """Coerce input to a 2-D boolean mask."""
    m = np.asarray(a)
    if m.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {m.shape}")
    return m.astype(bool, copy=False)


def _require_nonempty(mask: np.ndarray, what: str = "mask") -> None:
    if not mask.any():
        raise EmptyMaskError(f"{what} has no foreground pixels")


def round_half_up(v: float) -> int:
    """Round to nearest integer with halves going toward +infinity."""
    return int(np.floor(v + 0.5))


def label_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected component labeling; returns (label array, count)."""
    labels, n = ndimage.label(mask, structure=_CONN8)
    return labels, int(n)


def _neighbor_views(img: np.ndarray):
    # P2..P9 = N, NE, E, SE, S, SW, W, NW views of the core of a padded image.
    return (
        img[:-2, 1:-1],
        img[:-2, 2:],
        img[1:-1, 2:],
        img[2:, 2:],
        img[2:, 1:-1],
        img[2:, :-2],
        img[1:-1, :-2],
        img[:-2, :-2],
    )


def skeletonize(mask: np.ndarray) -> np.ndarray:
    """Thin a mask to a 1-pixel skeleton (Zhang-Suen two-subiteration thinning).

    Parallel Zhang-Suen deletes isolated 2x2 blocks outright, which would
    change the component count; a per-component guard retains one pixel
    whenever a sub-iteration would erase a whole component. The result is
    idempotent and preserves the number of 8-connected components.
    """
    mask = as_mask(mask)
    _require_nonempty(mask)

    # thinning is a 3x3-local rule and background stays background, so
    # working on the bounding box is exact and much faster on sparse masks
    ys, xs = np.nonzero(mask)
    ylo, yhi = int(ys.min()), int(ys.max()) + 1
    xlo, xhi = int(xs.min()), int(xs.max()) + 1
    sub = mask[ylo:yhi, xlo:xhi]

    img = np.pad(sub.astype(np.uint8), 1)
    labels_pad = np.pad(label_components(sub)[0], 1)
    n_labels = int(labels_pad.max())
    remaining = np.bincount(labels_pad.ravel(), minlength=n_labels + 1)

    while True:
        deleted_this_pass = 0
        for step in (0, 1):
            p2, p3, p4, p5, p6, p7, p8, p9 = _neighbor_views(img)
            core = img[1:-1, 1:-1]
            seq = (p2, p3, p4, p5, p6, p7, p8, p9, p2)
            b = p2.astype(np.uint8) + p3 + p4 + p5 + p6 + p7 + p8 + p9
            a = np.zeros(core.shape, dtype=np.uint8)
            for s0, s1 in zip(seq, seq[1:]):
                a += (s0 == 0) & (s1 == 1)
            if step == 0:
                c3 = (p2 & p4 & p6) == 0
                c4 = (p4 & p6 & p8) == 0
            else:
                c3 = (p2 & p4 & p8) == 0
                c4 = (p2 & p6 & p8) == 0
            delete = (core == 1) & (b >= 2) & (b <= 6) & (a == 1) & c3 & c4

            # Guard: never let a sub-iteration wipe out an entire component.
            del_labels = labels_pad[1:-1, 1:-1][delete]
            if del_labels.size:
                per_label = np.bincount(del_labels, minlength=n_labels + 1)
                doomed = np.nonzero((per_label > 0) & (per_label == remaining))[0]
                for lab in doomed:
                    ys, xs = np.nonzero(delete & (labels_pad[1:-1, 1:-1] == lab))
                    delete[ys[0], xs[0]] = False  # keep smallest (y, x)
                if doomed.size:
                    del_labels = labels_pad[1:-1, 1:-1][delete]
                remaining = remaining - np.bincount(del_labels, minlength=n_labels + 1)

            n_del = int(delete.sum())
            if n_del:
                core[delete] = 0
                deleted_this_pass += n_del
        if not deleted_this_pass:
            break
    out = np.zeros_like(mask)
    out[ylo:yhi, xlo:xhi] = img[1:-1, 1:-1].astype(bool)
    return out


def edge_pixels(mask: np.ndarray, low_threshold: int = 50, high_threshold: int = 150) -> np.ndarray:
    """Edge set of a binary mask: foreground pixels with a background 8-neighbor.

    Pixels outside the image count as background, so foreground touching the
    border is always edge. The thresholds are accepted for interface parity
    with gradient-based edge detectors; on binary input any valid pair gives
    the same result, so they only get validated.
    """
    mask = as_mask(mask)
    _require_nonempty(mask)
    if not 0 < low_threshold < high_threshold < 256:
        raise ValueError(
            f"thresholds must satisfy 0 < low < high < 256, got ({low_threshold}, {high_threshold})"
        )
    padded = np.pad(mask, 1)
    interior = np.ones(mask.shape, dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            interior &= padded[1 + dy : 1 + dy + mask.shape[0], 1 + dx : 1 + dx + mask.shape[1]]
    return mask & ~interior


def window_sums(weights: np.ndarray, window: WindowSpec) -> np.ndarray:
    """Per-pixel count of foreground ``weights`` inside the centered window.

    The window is clipped at image borders. Exact integer arithmetic via a
    summed-area table.
    """
    weights = as_mask(weights)
    if window.width % 2 == 0 or window.height % 2 == 0 or window.width < 1 or window.height < 1:
        raise ValueError(f"window dimensions must be odd and positive, got {window}")
    h, w = weights.shape
    sat = np.zeros((h + 1, w + 1), dtype=np.int64)
    np.cumsum(np.cumsum(weights, axis=0, dtype=np.int64), axis=1, out=sat[1:, 1:])
    hw, hh = window.width // 2, window.height // 2
    x0 = np.clip(np.arange(w) - hw, 0, None)
    x1 = np.clip(np.arange(w) + hw, None, w - 1) + 1
    y0 = np.clip(np.arange(h) - hh, 0, None)
    y1 = np.clip(np.arange(h) + hh, None, h - 1) + 1
    return sat[np.ix_(y1, x1)] - sat[np.ix_(y0, x1)] - sat[np.ix_(y1, x0)] + sat[np.ix_(y0, x0)]


def densest_window_center(candidates: np.ndarray, weights: np.ndarray, window: WindowSpec) -> Point:
    """Candidate pixel whose centered window covers the most foreground weights.

    Ties break deterministically toward smallest y, then smallest x.
    """
    candidates = as_mask(candidates)
    weights = as_mask(weights)
    if candidates.shape != weights.shape:
        raise ValueError(f"shape mismatch: {candidates.shape} vs {weights.shape}")
    _require_nonempty(candidates, "candidates")
    counts = window_sums(weights, window)
    scored = np.where(candidates, counts, -1)
    flat = int(np.argmax(scored))  # row-major first occurrence = smallest y, then x
    y, x = divmod(flat, candidates.shape[1])
    return Point(x, y)


def crop_patch(mask: np.ndarray, center: Point, patch_w: int, patch_h: int) -> tuple[np.ndarray, Point]:
    """Sub-raster of size patch_w x patch_h around ``center``, shifted to stay
    inside the image. Returns (patch, top-left offset); patch pixel (px, py)
    maps to image pixel (px + offset.x, py + offset.y). A patch larger than
    the image degrades to the whole image along that axis.
    """
    mask = as_mask(mask)
    h, w = mask.shape
    if not (0 <= center.x < w and 0 <= center.y < h):
        raise ValueError(f"center {center} outside {w}x{h} image")
    pw, ph = min(patch_w, w), min(patch_h, h)
    ox = min(max(center.x - pw // 2, 0), w - pw)
    oy = min(max(center.y - ph // 2, 0), h - ph)
    return mask[oy : oy + ph, ox : ox + pw], Point(ox, oy)


def lowest_skeleton_point(skeleton: np.ndarray) -> Point:
    """Foreground pixel with maximum y; ties break toward smallest x."""
    skeleton = as_mask(skeleton)
    _require_nonempty(skeleton, "skeleton")
    ys, xs = np.nonzero(skeleton)
    y = ys.max()
    x = xs[ys == y].min()
    return Point(int(x), int(y))


def fill_polygon(points, width: int, height: int) -> np.ndarray:
    """Rasterize a closed integer polygon with even-odd fill, boundary included.

    A pixel is foreground when its center lies strictly inside by the even-odd
    rule or exactly on a polygon edge. All tests are exact int64 arithmetic,
    so the fill commutes with integer translation of the vertices.
    """
    pts = [(int(px), int(py)) for px, py in points]
    if len(pts) < 3:
        raise ValueError("polygon needs at least 3 vertices")
    mask = np.zeros((height, width), dtype=bool)
    xs_all = [p[0] for p in pts]
    ys_all = [p[1] for p in pts]
    bx0, bx1 = max(min(xs_all), 0), min(max(xs_all), width - 1)
    by0, by1 = max(min(ys_all), 0), min(max(ys_all), height - 1)
    if bx0 > bx1 or by0 > by1:
        return mask
    gx = np.arange(bx0, bx1 + 1, dtype=np.int64)
    gy = np.arange(by0, by1 + 1, dtype=np.int64)[:, None]

    inside = np.zeros((by1 - by0 + 1, bx1 - bx0 + 1), dtype=bool)
    on_edge = np.zeros_like(inside)
    n = len(pts)
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        dy = y2 - y1
        dx = x2 - x1
        cross = (gx - x1) * dy - (gy - y1) * dx
        within = (
            (gx >= min(x1, x2)) & (gx <= max(x1, x2)) & (gy >= min(y1, y2)) & (gy <= max(y1, y2))
        )
        on_edge |= (cross == 0) & within
        if dy == 0:
            continue
        straddles = (y1 > gy) != (y2 > gy)
        # pixel center left of the edge's crossing with its horizontal ray
        lhs = (gx - x1) * dy
        rhs = (gy - y1) * dx
        left = (lhs < rhs) if dy > 0 else (lhs > rhs)
        inside ^= straddles & left
    mask[by0 : by1 + 1, bx0 : bx1 + 1] = inside | on_edge
    return mask


def mask_from_png(path) -> np.ndarray:
    """Load a mask from an 8-bit single-channel PNG; nonzero = foreground."""
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) > 0


def mask_to_png(mask: np.ndarray, path) -> None:
    """Write a mask as an 8-bit PNG with foreground at 255."""
    mask = as_mask(mask)
    Image.fromarray(mask.astype(np.uint8) * 255, mode="L").save(path, format="PNG")


def encode_rle(mask: np.ndarray) -> list[int]:
    """Row-major run-length encoding: alternating background/foreground run
    lengths, starting with background (possibly 0)."""
    mask = as_mask(mask)
    flat = mask.ravel().astype(np.int8)
    if flat.size == 0:
        return []
    boundaries = np.nonzero(np.diff(flat))[0] + 1
    runs = np.diff(np.concatenate(([0], boundaries, [flat.size])))
    counts = runs.tolist()
    if flat[0] == 1:
        counts = [0] + counts
    return [int(c) for c in counts]


def decode_rle(counts, width: int, height: int) -> np.ndarray:
    """Inverse of :func:`encode_rle`; validates total length."""
    total = sum(counts)
    if total != width * height:
        raise ValueError(f"RLE runs sum to {total}, expected {width * height}")
    flat = np.zeros(width * height, dtype=bool)
    pos = 0
    val = False
    for c in counts:
        if c < 0:
            raise ValueError("RLE runs must be non-negative")
        if val:
            flat[pos : pos + c] = True
        pos += c
        val = not val
    return flat.reshape(height, width)
