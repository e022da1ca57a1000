"""Binary-raster primitives checked against brute-force oracles.

Every vectorized routine in ``ettcarina.raster`` has a slow per-pixel
reimplementation here, written the obvious way, plus frozen outputs for
hand-checkable shapes. The two routes must agree exactly; none of the
contracts here are approximate.
"""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from ettcarina import raster
from ettcarina.errors import EmptyMaskError
from ettcarina.raster import Point, WindowSpec
from oracles import (
    boundary_oracle,
    densest_center_oracle,
    full_neighborhood_pixels,
    polygon_oracle,
    random_blob,
    window_sums_oracle,
)

blob_masks = st.builds(
    lambda seed, h, w: random_blob(np.random.default_rng(seed), h, w),
    seed=st.integers(0, 2**32 - 1),
    h=st.integers(6, 28),
    w=st.integers(6, 28),
)


# ---------------------------------------------------------------------------
# round_half_up / as_mask


@pytest.mark.parametrize(
    "v, expected",
    [(0.5, 1), (1.5, 2), (2.5, 3), (-0.5, 0), (-1.5, -1), (10.5, 11), (0.49, 0), (-0.51, -1)],
)
def test_round_half_up(v, expected):
    assert raster.round_half_up(v) == expected


def test_as_mask_rejects_non_2d():
    with pytest.raises(ValueError):
        raster.as_mask(np.zeros(5, dtype=bool))


def test_as_mask_coerces_integers():
    m = raster.as_mask(np.array([[0, 2], [1, 0]]))
    assert m.dtype == bool
    assert m.tolist() == [[False, True], [True, False]]


# ---------------------------------------------------------------------------
# skeletonize


def test_skeletonize_keeps_single_pixel():
    m = np.zeros((5, 5), dtype=bool)
    m[2, 2] = True
    assert (raster.skeletonize(m) == m).all()


def test_skeletonize_keeps_one_pixel_lines():
    m = np.zeros((20, 40), dtype=bool)
    m[5, 10:31] = True
    assert (raster.skeletonize(m) == m).all()
    m = np.zeros((40, 20), dtype=bool)
    m[4:33, 7] = True
    assert (raster.skeletonize(m) == m).all()


def test_skeletonize_vertical_bar_3_wide():
    # 3-wide bar thins to its center column; quantization eats one row at
    # the top and two at the bottom.
    m = np.zeros((60, 60), dtype=bool)
    m[5:45, 10:13] = True
    sk = raster.skeletonize(m)
    expected = np.zeros_like(m)
    expected[6:43, 11] = True
    assert (sk == expected).all()


def test_skeletonize_vertical_bar_5_wide():
    m = np.zeros((60, 60), dtype=bool)
    m[5:45, 10:15] = True
    sk = raster.skeletonize(m)
    expected = np.zeros_like(m)
    expected[7:42, 12] = True
    assert (sk == expected).all()


def test_skeletonize_small_blocks_collapse_to_one_pixel():
    # Unguarded parallel thinning deletes a 2x2 block entirely; the component
    # guard must retain exactly one pixel, the smallest (y, x).
    m = np.zeros((8, 8), dtype=bool)
    m[2:4, 3:5] = True
    sk = raster.skeletonize(m)
    assert np.argwhere(sk).tolist() == [[2, 3]]

    for side in (3, 4, 5):
        m = np.zeros((12, 12), dtype=bool)
        m[2 : 2 + side, 3 : 3 + side] = True
        sk = raster.skeletonize(m)
        assert sk.sum() == 1
        assert (sk & m).sum() == 1  # survivor lies inside the block


def test_skeletonize_empty_mask_raises():
    with pytest.raises(EmptyMaskError):
        raster.skeletonize(np.zeros((4, 4), dtype=bool))


@settings(max_examples=60, deadline=None)
@given(blob_masks)
def test_skeletonize_properties(mask):
    sk = raster.skeletonize(mask)
    # skeleton is a subset of the input
    assert not (sk & ~mask).any()
    # idempotent
    assert (raster.skeletonize(sk) == sk).all()
    # thin: no foreground pixel has a fully-foreground 3x3 neighborhood
    assert full_neighborhood_pixels(sk) == 0
    # preserves the number of 8-connected components
    n_in = ndimage.label(mask, structure=np.ones((3, 3)))[1]
    n_out = ndimage.label(sk, structure=np.ones((3, 3)))[1]
    assert n_out == n_in


# ---------------------------------------------------------------------------
# edge_pixels


def test_edge_pixels_square_ring():
    m = np.zeros((20, 20), dtype=bool)
    m[5:15, 5:15] = True
    edges = raster.edge_pixels(m)
    assert edges.sum() == 36  # 10x10 square: perimeter ring
    assert (edges == boundary_oracle(m)).all()


def test_edge_pixels_image_border_counts_as_background():
    m = np.ones((5, 7), dtype=bool)
    edges = raster.edge_pixels(m)
    assert edges.sum() == 2 * (5 + 7) - 4
    assert not edges[1:-1, 1:-1].any()


def test_edge_pixels_thin_line_is_all_edge():
    m = np.zeros((10, 10), dtype=bool)
    m[4, 2:9] = True
    assert (raster.edge_pixels(m) == m).all()


def test_edge_pixels_disjoint_squares():
    m = np.zeros((30, 30), dtype=bool)
    m[2:8, 2:8] = True
    m[15:25, 12:22] = True
    assert (raster.edge_pixels(m) == boundary_oracle(m)).all()


@pytest.mark.parametrize("low, high", [(0, 150), (50, 50), (150, 50), (50, 256), (-3, 100)])
def test_edge_pixels_threshold_validation(low, high):
    m = np.ones((3, 3), dtype=bool)
    with pytest.raises(ValueError):
        raster.edge_pixels(m, low, high)


def test_edge_pixels_thresholds_do_not_change_binary_result():
    rng = np.random.default_rng(7)
    m = random_blob(rng, 24, 24)
    assert (raster.edge_pixels(m, 1, 255) == raster.edge_pixels(m, 50, 150)).all()


def test_edge_pixels_empty_mask_raises():
    with pytest.raises(EmptyMaskError):
        raster.edge_pixels(np.zeros((4, 4), dtype=bool))


@settings(max_examples=60, deadline=None)
@given(blob_masks)
def test_edge_pixels_matches_brute_force(mask):
    assert (raster.edge_pixels(mask) == boundary_oracle(mask)).all()


# ---------------------------------------------------------------------------
# window_sums / densest_window_center


def test_window_sums_all_ones_3x3():
    m = np.ones((3, 3), dtype=bool)
    sums = raster.window_sums(m, WindowSpec(3, 3))
    assert sums.tolist() == [[4, 6, 4], [6, 9, 6], [4, 6, 4]]


@pytest.mark.parametrize("window", [WindowSpec(2, 3), WindowSpec(3, 4), WindowSpec(0, 1)])
def test_window_sums_rejects_even_or_empty_windows(window):
    with pytest.raises(ValueError):
        raster.window_sums(np.ones((5, 5), dtype=bool), window)


@settings(max_examples=40, deadline=None)
@given(
    blob_masks,
    st.sampled_from([WindowSpec(1, 1), WindowSpec(3, 3), WindowSpec(5, 3), WindowSpec(7, 9)]),
)
def test_window_sums_matches_brute_force(mask, window):
    assert (raster.window_sums(mask, window) == window_sums_oracle(mask, window)).all()


def test_densest_window_center_plus_sign():
    m = np.zeros((15, 15), dtype=bool)
    m[7, 3:12] = True
    m[3:12, 7] = True
    # a window spanning both arms makes the crossing the unique maximum
    assert raster.densest_window_center(m, m, WindowSpec(9, 9)) == Point(7, 7)
    # a smaller window ties along the arms; row-major order resolves it
    assert raster.densest_window_center(m, m, WindowSpec(5, 5)) == Point(7, 5)


def test_densest_window_center_tie_breaks_row_major():
    # two isolated candidates with identical window counts; smaller x wins
    weights = np.zeros((10, 12), dtype=bool)
    weights[3, 3] = True
    weights[3, 7] = True
    assert raster.densest_window_center(weights, weights, WindowSpec(3, 3)) == Point(3, 3)
    # identical counts at different rows; smaller y wins
    weights = np.zeros((12, 10), dtype=bool)
    weights[3, 5] = True
    weights[8, 5] = True
    assert raster.densest_window_center(weights, weights, WindowSpec(3, 3)) == Point(5, 3)


def test_densest_window_center_candidates_restrict_choice():
    weights = np.zeros((9, 9), dtype=bool)
    weights[2:7, 2:7] = True
    candidates = np.zeros_like(weights)
    candidates[0, 0] = True
    candidates[6, 6] = True
    assert raster.densest_window_center(candidates, weights, WindowSpec(3, 3)) == Point(6, 6)


def test_densest_window_center_validation():
    with pytest.raises(EmptyMaskError):
        raster.densest_window_center(
            np.zeros((4, 4), dtype=bool), np.ones((4, 4), dtype=bool), WindowSpec(3, 3)
        )
    with pytest.raises(ValueError):
        raster.densest_window_center(
            np.ones((4, 4), dtype=bool), np.ones((5, 4), dtype=bool), WindowSpec(3, 3)
        )


@settings(max_examples=40, deadline=None)
@given(
    st.integers(0, 2**32 - 1),
    st.sampled_from([WindowSpec(3, 3), WindowSpec(5, 7), WindowSpec(15, 15)]),
)
def test_densest_window_center_matches_exhaustive(seed, window):
    rng = np.random.default_rng(seed)
    weights = random_blob(rng, 20, 20)
    candidates = random_blob(rng, 20, 20)
    got = raster.densest_window_center(candidates, weights, window)
    assert got == densest_center_oracle(candidates, weights, window)


# ---------------------------------------------------------------------------
# crop_patch / lowest_skeleton_point


def test_crop_patch_centered():
    m = np.zeros((500, 500), dtype=bool)
    patch, offset = raster.crop_patch(m, Point(250, 250), 100, 150)
    assert offset == Point(200, 175)
    assert patch.shape == (150, 100)


def test_crop_patch_clamps_at_corners():
    m = np.zeros((500, 500), dtype=bool)
    assert raster.crop_patch(m, Point(10, 10), 100, 150)[1] == Point(0, 0)
    assert raster.crop_patch(m, Point(499, 499), 100, 150)[1] == Point(400, 350)


def test_crop_patch_larger_than_image_degrades_to_whole_image():
    m = np.zeros((40, 30), dtype=bool)
    patch, offset = raster.crop_patch(m, Point(15, 20), 100, 150)
    assert offset == Point(0, 0)
    assert patch.shape == (40, 30)


def test_crop_patch_center_must_be_inside():
    with pytest.raises(ValueError):
        raster.crop_patch(np.zeros((10, 10), dtype=bool), Point(10, 3), 4, 4)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(0, 2**32 - 1),
    st.integers(0, 39),
    st.integers(0, 29),
    st.sampled_from([(5, 7), (11, 3), (100, 150)]),
)
def test_crop_patch_round_trip(seed, cx, cy, size):
    mask = random_blob(np.random.default_rng(seed), 30, 40)
    pw, ph = size
    patch, offset = raster.crop_patch(mask, Point(cx, cy), pw, ph)
    assert (patch == mask[offset.y : offset.y + patch.shape[0], offset.x : offset.x + patch.shape[1]]).all()
    # offset is clamped so the patch stays in the image and contains the center
    assert 0 <= offset.x <= mask.shape[1] - patch.shape[1]
    assert 0 <= offset.y <= mask.shape[0] - patch.shape[0]
    assert offset.x <= cx < offset.x + patch.shape[1]
    assert offset.y <= cy < offset.y + patch.shape[0]


def test_lowest_skeleton_point():
    m = np.zeros((20, 20), dtype=bool)
    m[4:15, 9] = True
    assert raster.lowest_skeleton_point(m) == Point(9, 14)


def test_lowest_skeleton_point_tie_smallest_x():
    m = np.zeros((10, 10), dtype=bool)
    m[7, 2] = True
    m[7, 6] = True
    assert raster.lowest_skeleton_point(m) == Point(2, 7)


def test_lowest_skeleton_point_empty_raises():
    with pytest.raises(EmptyMaskError):
        raster.lowest_skeleton_point(np.zeros((3, 3), dtype=bool))


# ---------------------------------------------------------------------------
# fill_polygon


def test_fill_polygon_square_boundary_inclusive():
    m = raster.fill_polygon([(0, 0), (10, 0), (10, 10), (0, 10)], 20, 20)
    assert m.sum() == 121
    assert m[:11, :11].all()


def test_fill_polygon_triangle_matches_oracle():
    pts = [(2, 2), (17, 4), (9, 15)]
    assert (raster.fill_polygon(pts, 20, 20) == polygon_oracle(pts, 20, 20)).all()


def test_fill_polygon_needs_three_vertices():
    with pytest.raises(ValueError):
        raster.fill_polygon([(0, 0), (5, 5)], 10, 10)


def test_fill_polygon_outside_image_is_empty():
    m = raster.fill_polygon([(30, 30), (40, 30), (35, 40)], 20, 20)
    assert not m.any()


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.tuples(st.integers(-5, 25), st.integers(-5, 25)), min_size=3, max_size=13
    )
)
def test_fill_polygon_matches_oracle(pts):
    assert (raster.fill_polygon(pts, 20, 20) == polygon_oracle(pts, 20, 20)).all()


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.tuples(st.integers(0, 10), st.integers(0, 10)), min_size=3, max_size=8),
    st.integers(0, 8),
    st.integers(0, 8),
)
def test_fill_polygon_commutes_with_translation(pts, tx, ty):
    base = raster.fill_polygon(pts, 24, 24)
    moved = raster.fill_polygon([(x + tx, y + ty) for x, y in pts], 24, 24)
    shifted = np.zeros_like(base)
    shifted[ty:, tx:] = base[: 24 - ty, : 24 - tx]
    assert (moved == shifted).all()


# ---------------------------------------------------------------------------
# RLE / PNG codecs


def test_encode_rle_starts_with_background_run():
    m = np.zeros((3, 4), dtype=bool)
    assert raster.encode_rle(m) == [12]
    m[:] = True
    assert raster.encode_rle(m) == [0, 12]


def test_rle_round_trip_examples():
    m = np.array([[0, 1, 1, 0], [1, 1, 0, 0]], dtype=bool)
    counts = raster.encode_rle(m)
    assert sum(counts) == m.size
    assert (raster.decode_rle(counts, 4, 2) == m).all()


@settings(max_examples=60, deadline=None)
@given(blob_masks)
def test_rle_round_trip(mask):
    h, w = mask.shape
    assert (raster.decode_rle(raster.encode_rle(mask), w, h) == mask).all()


def test_decode_rle_validates_totals():
    with pytest.raises(ValueError):
        raster.decode_rle([3, 4], 4, 2)
    with pytest.raises(ValueError):
        raster.decode_rle([10, -2], 4, 2)


def test_png_round_trip(tmp_path):
    mask = random_blob(np.random.default_rng(3), 32, 48)
    path = tmp_path / "mask.png"
    raster.mask_to_png(mask, path)
    assert (raster.mask_from_png(path) == mask).all()
