"""Feature-point extraction: mask routes, box route, fusion, full pipeline."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ettcarina import extraction, raster
from ettcarina.annotations import (
    CARINA,
    CARINA_BOX,
    TUBE,
    TUBE_TIP_BOX,
    DetectionSet,
    ScoredDetection,
    select_max_score,
)
from ettcarina.errors import EmptyMaskError, InputFormatError
from ettcarina.extraction import ExtractionResult
from ettcarina.raster import Point
from oracles import carina_point_oracle


def v_notch_mask(apex=Point(200, 300), size=(400, 500)) -> np.ndarray:
    """Inverted-V polygon: arch over ``apex``, two legs running down-outward."""
    ax, ay = apex
    ring = [
        (ax + 40, ay - 60),
        (ax + 86, ay + 100),
        (ax + 70, ay + 100),
        (ax + 35, ay + 50),
        (ax, ay),
        (ax - 35, ay + 50),
        (ax - 70, ay + 100),
        (ax - 86, ay + 100),
        (ax - 40, ay - 60),
    ]
    return raster.fill_polygon(ring, *size)


# ---------------------------------------------------------------------------
# tip_from_mask


def test_tip_from_mask_three_wide_tube():
    # parallel thinning eats two rows off a flat bottom cap, so the deepest
    # skeleton pixel sits two above the mask bottom, on the center column
    m = np.zeros((640, 640), dtype=bool)
    m[100:401, 318:321] = True
    assert extraction.tip_from_mask(m) == Point(319, 398)


def test_tip_from_mask_one_pixel_line_is_exact():
    m = np.zeros((40, 40), dtype=bool)
    m[0:31, 5] = True
    assert extraction.tip_from_mask(m) == Point(5, 30)


def test_tip_from_mask_empty_raises():
    with pytest.raises(EmptyMaskError):
        extraction.tip_from_mask(np.zeros((10, 10), dtype=bool))


# ---------------------------------------------------------------------------
# carina_from_mask


def test_carina_from_mask_y_branch_central_point():
    # 1-px Y: stem down to the branch pixel, two diagonal legs below it.
    # The branch pixel has the densest skeleton neighborhood.
    m = np.zeros((500, 400), dtype=bool)
    m[240:301, 200] = True
    for i in range(60):
        m[301 + i, 199 - i] = True
        m[301 + i, 201 + i] = True
    r = extraction.carina_from_mask(m)
    assert r.central == Point(200, 300)
    assert not r.edge_fallback


def test_carina_from_mask_v_notch_lands_on_apex():
    apex = Point(200, 300)
    r = extraction.carina_from_mask(v_notch_mask(apex))
    assert not r.edge_fallback
    assert math.hypot(r.point.x - apex.x, r.point.y - apex.y) <= 7.0
    assert r.point == apex  # exact on this geometry; 7 px is the envelope


def test_carina_from_mask_matches_hand_chained_oracle():
    for apex in (Point(200, 300), Point(140, 260), Point(251, 333)):
        mask = v_notch_mask(apex)
        got = extraction.carina_from_mask(mask)
        point, central, fallback = carina_point_oracle(mask)
        assert got.point == point
        assert got.central == central
        assert got.edge_fallback == fallback


def test_carina_from_mask_thin_line_deterministic():
    m = np.zeros((120, 80), dtype=bool)
    m[10:100, 37] = True
    r1 = extraction.carina_from_mask(m)
    r2 = extraction.carina_from_mask(m)
    assert r1 == r2
    assert r1.point == Point(37, 17)
    assert not r1.edge_fallback


def test_carina_from_mask_no_edges_in_patch_falls_back():
    # a large solid disk keeps every edge pixel outside the 100x150 patch
    # around its central point, so the central point itself is returned
    yy, xx = np.mgrid[0:640, 0:640]
    disk = (xx - 320) ** 2 + (yy - 320) ** 2 <= 200**2
    r = extraction.carina_from_mask(disk)
    assert r.edge_fallback
    assert r.point == r.central


def test_carina_from_mask_empty_raises():
    with pytest.raises(EmptyMaskError):
        extraction.carina_from_mask(np.zeros((10, 10), dtype=bool))


def test_carina_from_mask_translation_equivariant():
    base = v_notch_mask(Point(170, 280))
    moved = np.zeros_like(base)
    moved[13:, 21:] = base[:-13, :-21]
    r0 = extraction.carina_from_mask(base)
    r1 = extraction.carina_from_mask(moved)
    assert r1.point == Point(r0.point.x + 21, r0.point.y + 13)


# ---------------------------------------------------------------------------
# point_from_box


def test_point_from_box_integer_center():
    assert extraction.point_from_box((100.0, 100.0, 48.0, 48.0)) == Point(100, 100)


def test_point_from_box_rounds_half_up():
    assert extraction.point_from_box((10.5, 20.5, 48.0, 48.0)) == Point(11, 21)


def test_point_from_box_never_clamps():
    assert extraction.point_from_box((-10.2, 700.8, 48.0, 48.0)) == Point(-10, 701)


# ---------------------------------------------------------------------------
# fusion


def test_fuse_tip_truth_table():
    box, mask = Point(100, 200), Point(300, 400)
    assert extraction.fuse_tip(box, mask) == (box, "box")
    assert extraction.fuse_tip(box, None) == (box, "box")
    assert extraction.fuse_tip(None, mask) == (mask, "mask")
    assert extraction.fuse_tip(None, None) == (None, "none")


def test_fuse_carina_replaces_box_beyond_100_px():
    assert extraction.fuse_carina(Point(0, 0), Point(120, 0)) == (Point(120, 0), "mask")


def test_fuse_carina_keeps_box_at_exactly_100_px():
    # 3-4-5 scaled: distance is exactly 100, and "greater than" is strict
    assert extraction.fuse_carina(Point(0, 0), Point(60, 80)) == (Point(0, 0), "box")


def test_fuse_carina_single_source_passthrough():
    assert extraction.fuse_carina(None, Point(50, 50)) == (Point(50, 50), "mask")
    assert extraction.fuse_carina(Point(50, 50), None) == (Point(50, 50), "box")
    assert extraction.fuse_carina(None, None) == (None, "none")


def test_fuse_carina_threshold_parameter():
    assert extraction.fuse_carina(Point(0, 0), Point(60, 0), threshold_px=50.0) == (
        Point(60, 0),
        "mask",
    )
    assert extraction.fuse_carina(Point(0, 0), Point(60, 0), threshold_px=60.0) == (
        Point(0, 0),
        "box",
    )


@settings(max_examples=300, deadline=None)
@given(
    st.integers(-150, 150),
    st.integers(-150, 150),
    st.integers(-150, 150),
    st.integers(-150, 150),
)
def test_fuse_carina_switching_boundary(bx, by, mx, my):
    # source is mask exactly when the pair is strictly more than 100 px apart
    point, source = extraction.fuse_carina(Point(bx, by), Point(mx, my))
    if math.hypot(mx - bx, my - by) > 100.0:
        assert (point, source) == (Point(mx, my), "mask")
    else:
        assert (point, source) == (Point(bx, by), "box")


# ---------------------------------------------------------------------------
# extract


def box_det(cls, cx, cy, score=0.9):
    return ScoredDetection(cls, score, box=(float(cx), float(cy), 48.0, 48.0))


def test_extract_distance_arithmetic():
    dets = DetectionSet(
        "i", (box_det(TUBE_TIP_BOX, 100, 100), box_det(CARINA_BOX, 100, 500))
    )
    r = extraction.extract(dets, pixel_spacing_mm=0.5)
    assert r.tip_point == Point(100, 100)
    assert r.carina_point == Point(100, 500)
    assert r.tip_source == r.carina_source == "box"
    assert r.distance_px == 400.0
    assert r.distance_mm == 200.0


def test_extract_undetected_side_leaves_distance_absent():
    r = extraction.extract(DetectionSet("i", (box_det(TUBE_TIP_BOX, 100, 100),)), 0.5)
    assert r.tip_point == Point(100, 100)
    assert r.carina_point is None
    assert r.carina_source == "none"
    assert r.distance_px is None and r.distance_mm is None


def test_extract_empty_mask_counts_as_absent():
    dets = DetectionSet("i", (ScoredDetection(TUBE, 0.9, mask=np.zeros((32, 32), dtype=bool)),))
    r = extraction.extract(dets, 0.5)
    assert r.tip_point is None
    assert r.tip_source == "none"


def test_extract_uses_max_score_detection_per_class():
    dets = DetectionSet(
        "i",
        (
            box_det(TUBE_TIP_BOX, 50, 50, score=0.3),
            box_det(TUBE_TIP_BOX, 200, 200, score=0.8),
        ),
    )
    r = extraction.extract(dets, 0.5)
    assert r.tip_point == Point(200, 200)


def test_extract_records_intermediate_points_and_sources():
    tube = np.zeros((640, 640), dtype=bool)
    tube[100:401, 318:321] = True
    dets = DetectionSet(
        "i",
        (
            ScoredDetection(TUBE, 0.9, mask=tube),
            box_det(TUBE_TIP_BOX, 320, 400),
            ScoredDetection(CARINA, 0.9, mask=v_notch_mask(Point(320, 420), (640, 640))),
            box_det(CARINA_BOX, 321, 421),
        ),
    )
    r = extraction.extract(dets, 0.5)
    assert r.tip_mask_point == Point(319, 398)
    assert r.tip_box_point == Point(320, 400)
    assert r.tip_point == Point(320, 400) and r.tip_source == "box"
    assert r.carina_mask_point == Point(320, 420)
    assert r.carina_box_point == Point(321, 421)
    # 1.4 px apart: box wins under the 100 px rule
    assert r.carina_point == Point(321, 421) and r.carina_source == "box"


def test_extract_mask_replaces_distant_carina_box():
    dets = DetectionSet(
        "i",
        (
            ScoredDetection(CARINA, 0.9, mask=v_notch_mask(Point(200, 300))),
            box_det(CARINA_BOX, 200, 450),  # 150 px below the mask point
        ),
    )
    r = extraction.extract(dets, 0.5)
    assert r.carina_point == Point(200, 300)
    assert r.carina_source == "mask"
    assert r.carina_edge_fallback is False


def test_extract_equals_hand_chained_stage_ops():
    tube = np.zeros((640, 640), dtype=bool)
    tube[80:390, 300:305] = True
    carina = v_notch_mask(Point(310, 430), (640, 640))
    dets = DetectionSet(
        "img",
        (
            ScoredDetection(TUBE, 0.95, mask=tube),
            ScoredDetection(CARINA, 0.85, mask=carina),
            box_det(TUBE_TIP_BOX, 302, 388, score=0.7),
            box_det(CARINA_BOX, 311, 431, score=0.6),
        ),
    )
    spacing = 0.5
    r = extraction.extract(dets, spacing)

    best = select_max_score(dets)
    tip_mask_pt = extraction.tip_from_mask(best[TUBE].mask)
    car = extraction.carina_from_mask(best[CARINA].mask)
    tip_box_pt = extraction.point_from_box(best[TUBE_TIP_BOX].box)
    car_box_pt = extraction.point_from_box(best[CARINA_BOX].box)
    tip_pt, tip_src = extraction.fuse_tip(tip_box_pt, tip_mask_pt)
    car_pt, car_src = extraction.fuse_carina(car_box_pt, car.point)

    assert (r.tip_point, r.tip_source) == (tip_pt, tip_src)
    assert (r.carina_point, r.carina_source) == (car_pt, car_src)
    assert r.distance_px == math.hypot(car_pt.x - tip_pt.x, car_pt.y - tip_pt.y)
    assert r.distance_mm == r.distance_px * spacing
    # and the carina mask stage agrees with the brute-force chain
    assert car.point == carina_point_oracle(carina)[0]


def test_extract_is_deterministic():
    dets = DetectionSet(
        "i",
        (
            ScoredDetection(CARINA, 0.9, mask=v_notch_mask(Point(200, 300))),
            box_det(TUBE_TIP_BOX, 210, 100),
            box_det(CARINA_BOX, 200, 290),
        ),
    )
    assert extraction.extract(dets, 0.5) == extraction.extract(dets, 0.5)


@settings(max_examples=100, deadline=None)
@given(
    st.integers(0, 600),
    st.integers(0, 600),
    st.integers(0, 600),
    st.integers(0, 600),
    st.sampled_from([0.25, 0.5, 1.0]),
)
def test_extract_distance_ratio_is_spacing_exactly(tx, ty, cx, cy, spacing):
    # spacing values with exact binary representations divide back out exactly
    dets = DetectionSet("i", (box_det(TUBE_TIP_BOX, tx, ty), box_det(CARINA_BOX, cx, cy)))
    r = extraction.extract(dets, spacing)
    assert r.distance_mm == r.distance_px * spacing
    if r.distance_px:
        assert r.distance_mm / r.distance_px == spacing


# ---------------------------------------------------------------------------
# result records


def result_fixture():
    return ExtractionResult(
        image_id="img_7",
        tip_point=Point(100, 200),
        carina_point=Point(120, 400),
        tip_source="box",
        carina_source="mask",
        tip_mask_point=Point(99, 198),
        tip_box_point=Point(100, 200),
        carina_mask_point=Point(120, 400),
        carina_box_point=Point(10, 10),
        carina_edge_fallback=False,
        distance_px=math.hypot(20, 200),
        distance_mm=math.hypot(20, 200) * 0.5,
    )


def test_result_record_round_trip():
    r = result_fixture()
    assert extraction.record_to_result(extraction.result_to_record(r)) == r


def test_result_record_round_trip_with_absences():
    r = ExtractionResult(
        image_id="img_8",
        tip_point=None,
        carina_point=Point(120, 400),
        tip_source="none",
        carina_source="mask",
        tip_mask_point=None,
        tip_box_point=None,
        carina_mask_point=Point(120, 400),
        carina_box_point=None,
        carina_edge_fallback=True,
        distance_px=None,
        distance_mm=None,
    )
    assert extraction.record_to_result(extraction.result_to_record(r)) == r


def test_results_file_round_trip(tmp_path):
    results = [result_fixture()]
    path = tmp_path / "records.json"
    extraction.save_results(results, path)
    assert extraction.load_results(path) == {"img_7": results[0]}


def test_record_missing_field_is_diagnosed():
    rec = extraction.result_to_record(result_fixture())
    del rec["carina_source"]
    with pytest.raises(InputFormatError) as err:
        extraction.record_to_result(rec, path="records.json", idx=3)
    assert err.value.field == "carina_source"
    assert err.value.record == 3
