"""Tube-tip and carina feature points from instance-segmentation output.

The pipeline turns per-image scored masks and boxes into two feature
points (tube tip, carina notch), fuses the box and mask routes, measures
the tip-carina distance, classifies placement suitability, and evaluates
everything against point-annotated ground truth.
"""
from .annotations import (
    CARINA,
    CARINA_BOX,
    FEATURE_BOX_SIDE,
    TUBE,
    TUBE_TIP_BOX,
    DetectionSet,
    FeatureBox,
    GroundTruthAnnotation,
    ScoredDetection,
    carina_gt_point,
    derive_mp,
    feature_boxes,
    gt_masks,
    load_annotations,
    load_detections,
    save_annotations,
    save_detections,
    select_max_score,
)
from .errors import (
    DegenerateAnnotationError,
    EmptyMaskError,
    EttCarinaError,
    InputFormatError,
    InvalidSpecError,
    MissingObjectError,
    TooFewPairsError,
    UndefinedMetricError,
)
from .extraction import (
    ExtractionResult,
    carina_from_mask,
    extract,
    fuse_carina,
    fuse_tip,
    load_results,
    point_from_box,
    save_results,
    tip_from_mask,
)
from .fixtures import ErrorProfile, FixtureSpec, generate, generate_cohort
from .metrics import (
    EvaluationReport,
    PearsonStats,
    bucket_distribution,
    classify_detection,
    dice,
    distance_error_mm,
    evaluate,
    object_error,
    pearson_stats,
    recall_precision,
    suitability,
)
from .raster import (
    Point,
    WindowSpec,
    crop_patch,
    densest_window_center,
    edge_pixels,
    fill_polygon,
    skeletonize,
    window_sums,
)
from .render import render_overlay
from .reports import format_tables, report_to_dict, write_csv, write_report_json, write_report_tables

__version__ = "1.0.0"

__all__ = [
    "CARINA",
    "CARINA_BOX",
    "FEATURE_BOX_SIDE",
    "TUBE",
    "TUBE_TIP_BOX",
    "DetectionSet",
    "FeatureBox",
    "GroundTruthAnnotation",
    "ScoredDetection",
    "carina_gt_point",
    "derive_mp",
    "feature_boxes",
    "gt_masks",
    "load_annotations",
    "load_detections",
    "save_annotations",
    "save_detections",
    "select_max_score",
    "DegenerateAnnotationError",
    "EmptyMaskError",
    "EttCarinaError",
    "InputFormatError",
    "InvalidSpecError",
    "MissingObjectError",
    "TooFewPairsError",
    "UndefinedMetricError",
    "ExtractionResult",
    "carina_from_mask",
    "extract",
    "fuse_carina",
    "fuse_tip",
    "load_results",
    "point_from_box",
    "save_results",
    "tip_from_mask",
    "ErrorProfile",
    "FixtureSpec",
    "generate",
    "generate_cohort",
    "EvaluationReport",
    "PearsonStats",
    "bucket_distribution",
    "classify_detection",
    "dice",
    "distance_error_mm",
    "evaluate",
    "object_error",
    "pearson_stats",
    "recall_precision",
    "suitability",
    "Point",
    "WindowSpec",
    "crop_patch",
    "densest_window_center",
    "edge_pixels",
    "fill_polygon",
    "skeletonize",
    "window_sums",
    "render_overlay",
    "format_tables",
    "report_to_dict",
    "write_csv",
    "write_report_json",
    "write_report_tables",
]
