"""Segmentation and distance metrics, detection accounting, and the
correlation summary used in the evaluation report.

Conventions. Object error is the Euclidean pixel distance between a
predicted feature point and its ground-truth point. A predicted object
counts as correct (TP) when its Dice against the ground-truth mask is at
least 0.6 or its object error is at most 100 px; a prediction with neither
is an FP, and the missed ground truth an FN. Recall is TP/(TP+FN) and
precision TP/(TP+FP). Tube placement is suitable when the tip-carina
distance lies in [20, 70] mm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import TooFewPairsError, UndefinedMetricError
from .raster import Point

DICE_THRESHOLD = 0.6
ERROR_THRESHOLD_PX = 100.0
SUITABLE_RANGE_MM = (20.0, 70.0)
BUCKET_THRESHOLDS_MM = (5.0, 10.0, 15.0, 20.0)

SUITABLE = "suitable"
UNSUITABLE = "unsuitable"
UNDETECTION = "undetection"

# z quantile for the 95% confidence interval of the Fisher transform
_Z95 = 1.96


def dice(a: np.ndarray, b: np.ndarray) -> float:
    """Dice coefficient 2|A&B| / (|A|+|B|) of two binary masks."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        raise UndefinedMetricError("dice of two empty masks")
    return 2.0 * int((a & b).sum()) / total


def object_error_px(pred: Point, gt: Point) -> float:
    """Euclidean distance in pixels between prediction and ground truth."""
    return math.hypot(pred.x - gt.x, pred.y - gt.y)


def object_error(gt_pt: Point, pred_pt: Point, spacing_mm: float) -> tuple[float, float]:
    """Feature-point error as (pixels, millimetres)."""
    if spacing_mm <= 0:
        raise ValueError(f"pixel spacing must be positive, got {spacing_mm}")
    px = object_error_px(pred_pt, gt_pt)
    return px, px * spacing_mm


def classify_detection(
    dice_value: float | None,
    error_px: float | None,
    gt_present: bool,
    pred_present: bool,
    dice_threshold: float = DICE_THRESHOLD,
    error_threshold_px: float = ERROR_THRESHOLD_PX,
) -> tuple[int, int, int]:
    """(tp, fp, fn) counts for one object on one image.

    A prediction is correct when dice >= dice_threshold or
    error_px <= error_threshold_px, both inclusive; either score may be
    None when it cannot be computed and then only the other can qualify.
    """
    if gt_present and pred_present:
        ok = (dice_value is not None and dice_value >= dice_threshold) or (
            error_px is not None and error_px <= error_threshold_px
        )
        return (1, 0, 0) if ok else (0, 1, 1)
    if pred_present:
        return (0, 1, 0)
    if gt_present:
        return (0, 0, 1)
    return (0, 0, 0)


def recall(tp: int, fn: int) -> float:
    if tp + fn == 0:
        raise UndefinedMetricError("recall with no ground-truth objects")
    return tp / (tp + fn)


def precision(tp: int, fp: int) -> float:
    if tp + fp == 0:
        raise UndefinedMetricError("precision with no predictions")
    return tp / (tp + fp)


def recall_precision(tp: int, fn: int, fp: int) -> tuple[float | None, float | None]:
    """Both ratios at once; an undefined one comes back as None without
    affecting the other."""
    r = None if tp + fn == 0 else recall(tp, fn)
    p = None if tp + fp == 0 else precision(tp, fp)
    return r, p


def distance_error_mm(d_pred: float, d_gt: float) -> float:
    """Absolute difference of predicted and ground-truth distances."""
    return abs(d_pred - d_gt)


def suitability(distance_mm: float | None, suitable_range=SUITABLE_RANGE_MM) -> str:
    """Placement label: suitable in [low, high] mm inclusive, unsuitable
    outside, undetection when the distance is unavailable."""
    if distance_mm is None:
        return UNDETECTION
    low, high = suitable_range
    return SUITABLE if low <= distance_mm <= high else UNSUITABLE


def bucket_distribution(errors_mm, thresholds=BUCKET_THRESHOLDS_MM) -> list[float]:
    """Cumulative fraction of errors at or below each threshold."""
    errors = list(errors_mm)
    if not errors:
        raise UndefinedMetricError("bucket distribution of no errors")
    n = len(errors)
    return [sum(1 for e in errors if e <= t) / n for t in thresholds]


def mean_std(values) -> tuple[float, float | None]:
    """Mean and sample standard deviation (ddof=1; None below two values)."""
    vals = [float(v) for v in values]
    if not vals:
        raise UndefinedMetricError("mean of no values")
    m = math.fsum(vals) / len(vals)
    if len(vals) < 2:
        return m, None
    var = math.fsum((v - m) ** 2 for v in vals) / (len(vals) - 1)
    return m, math.sqrt(var)


# ---------------------------------------------------------------------------
# Pearson correlation with two-tailed p and Fisher 95% CI
# ---------------------------------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz continued fraction for the incomplete beta
    tiny = 1e-30
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def _betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


@dataclass(frozen=True)
class PearsonStats:
    r: float
    p_two_tailed: float
    r_squared: float
    ci95: tuple[float, float]
    n: int


def pearson_stats(xs, ys) -> PearsonStats:
    """Pearson r with two-tailed p and Fisher-transform 95% CI.

    The p-value comes from the exact t-distribution identity
    p = I_x(df/2, 1/2) with x = df / (df + t^2), t = r sqrt(df / (1-r^2)),
    df = n - 2. Requires at least four pairs (the CI needs n > 3) and
    nonzero variance on both sides.
    """
    xs = [float(v) for v in xs]
    ys = [float(v) for v in ys]
    if len(xs) != len(ys):
        raise ValueError("input lengths differ")
    n = len(xs)
    if n < 4:
        raise TooFewPairsError(f"need at least 4 pairs, got {n}")
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    dx = [v - mx for v in xs]
    dy = [v - my for v in ys]
    sxx = math.fsum(v * v for v in dx)
    syy = math.fsum(v * v for v in dy)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedMetricError("pearson r with a zero-variance input")
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    df = n - 2
    if abs(r) == 1.0:
        p = 0.0
        ci = (r, r)
    else:
        t2 = r * r * df / (1.0 - r * r)
        p = _betainc(df / 2.0, 0.5, df / (df + t2))
        z = math.atanh(r)
        half = _Z95 / math.sqrt(n - 3)
        ci = (math.tanh(z - half), math.tanh(z + half))
    return PearsonStats(r=r, p_two_tailed=p, r_squared=r * r, ci95=ci, n=n)


def p_value_summary(p: float) -> str:
    """Significance stars: **** <0.0001, *** <0.001, ** <0.01, * <0.05,
    else ns."""
    if p < 0.0001:
        return "****"
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return "ns"


# ---------------------------------------------------------------------------
# Whole-cohort evaluation
# ---------------------------------------------------------------------------

@dataclass
class ClassStats:
    """One detected-object class across the cohort."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    errors_px: list[float] = field(default_factory=list)
    errors_mm: list[float] = field(default_factory=list)
    dices: list[float] = field(default_factory=list)

    @property
    def recall(self) -> float | None:
        return None if self.tp + self.fn == 0 else self.tp / (self.tp + self.fn)

    @property
    def precision(self) -> float | None:
        return None if self.tp + self.fp == 0 else self.tp / (self.tp + self.fp)

    def error_mean_std_mm(self):
        if not self.errors_mm:
            return None, None
        return mean_std(self.errors_mm)

    def buckets(self, thresholds=BUCKET_THRESHOLDS_MM):
        if not self.errors_mm:
            return None
        return bucket_distribution(self.errors_mm, thresholds)


@dataclass
class ImageRow:
    """Per-image evaluation detail, one row of the CSV output."""

    image_id: str
    dice_tip: float | None
    dice_carina: float | None
    err_tip_mm: float | None
    err_carina_mm: float | None
    d_pred_mm: float | None
    d_gt_mm: float | None
    distance_error_mm: float | None
    suitability_gt: str
    suitability_pred: str


@dataclass
class EvaluationReport:
    n_images: int
    tip: ClassStats
    carina: ClassStats
    distance_errors_mm: list[float]
    confusion: dict[str, dict[str, int]]
    pearson: PearsonStats | None
    pearson_note: str | None
    n_pairs: int
    rows: list[ImageRow]
    suitable_range: tuple[float, float]
    bucket_thresholds: tuple[float, ...]

    def distance_mean_std(self):
        if not self.distance_errors_mm:
            return None, None
        return mean_std(self.distance_errors_mm)

    def distance_buckets(self):
        if not self.distance_errors_mm:
            return None
        return bucket_distribution(self.distance_errors_mm, self.bucket_thresholds)


def _gt_distance_mm(ann) -> float | None:
    """Ground-truth tip-carina distance from annotated points."""
    from .annotations import carina_gt_point, derive_mp

    if ann.ett_points is None or ann.bifurcation_points is None:
        return None
    mp = derive_mp(ann)
    p9 = carina_gt_point(ann)
    return math.hypot(mp.x - p9.x, mp.y - p9.y) * ann.pixel_spacing_mm


def evaluate(
    annotations: dict,
    results: dict,
    pred_masks: dict | None = None,
    suitable_range=SUITABLE_RANGE_MM,
    bucket_thresholds=BUCKET_THRESHOLDS_MM,
    dice_threshold: float = DICE_THRESHOLD,
    error_threshold_px: float = ERROR_THRESHOLD_PX,
) -> EvaluationReport:
    """Score extraction results against ground-truth annotations.

    annotations and results map image_id to GroundTruthAnnotation and
    ExtractionResult; every result must have an annotation. pred_masks
    optionally maps image_id to a (tube_mask, carina_mask) pair (either
    entry may be None) and feeds the Dice part of the TP rule; without a
    mask only the 100 px rule can mark a prediction correct.
    """
    from .annotations import carina_gt_point, derive_mp, gt_masks

    unmatched = sorted(set(results) - set(annotations))
    if unmatched:
        raise KeyError(f"results without annotations: {', '.join(unmatched)}")

    tip = ClassStats()
    carina = ClassStats()
    distance_errors: list[float] = []
    labels = (SUITABLE, UNSUITABLE, UNDETECTION)
    confusion = {p: {g: 0 for g in labels[:2]} for p in labels}
    pairs_x: list[float] = []
    pairs_y: list[float] = []
    rows: list[ImageRow] = []

    for image_id in sorted(annotations):
        ann = annotations[image_id]
        res = results.get(image_id)
        spacing = ann.pixel_spacing_mm
        gt_tip = derive_mp(ann) if ann.ett_points is not None else None
        gt_car = carina_gt_point(ann) if ann.bifurcation_points is not None else None
        gt_tube_mask, gt_car_mask = gt_masks(ann)
        pm = (pred_masks or {}).get(image_id, (None, None))

        pred_tip = res.tip_point if res is not None else None
        pred_car = res.carina_point if res is not None else None

        def _score(gt_pt, pred_pt, gt_mask, pred_mask, stats):
            d = None
            err = None
            if gt_mask is not None and pred_mask is not None and (gt_mask.any() or pred_mask.any()):
                d = dice(gt_mask, pred_mask)
            if gt_pt is not None and pred_pt is not None:
                err = object_error_px(pred_pt, gt_pt)
            tp_, fp_, fn_ = classify_detection(
                d,
                err,
                gt_pt is not None,
                pred_pt is not None,
                dice_threshold,
                error_threshold_px,
            )
            stats.tp += tp_
            stats.fp += fp_
            stats.fn += fn_
            if d is not None:
                stats.dices.append(d)
            if err is not None:
                stats.errors_px.append(err)
                stats.errors_mm.append(err * spacing)
            return d, err

        dice_tip, err_tip = _score(gt_tip, pred_tip, gt_tube_mask, pm[0], tip)
        dice_car, err_car = _score(gt_car, pred_car, gt_car_mask, pm[1], carina)

        d_gt = _gt_distance_mm(ann)
        d_pred = res.distance_mm if res is not None else None
        dist_err = None
        if d_gt is not None and d_pred is not None:
            dist_err = distance_error_mm(d_pred, d_gt)
            distance_errors.append(dist_err)
            pairs_x.append(d_gt)
            pairs_y.append(d_pred)

        s_gt = suitability(d_gt, suitable_range)
        s_pred = suitability(d_pred, suitable_range)
        if s_gt != UNDETECTION:
            confusion[s_pred][s_gt] += 1

        rows.append(
            ImageRow(
                image_id=image_id,
                dice_tip=dice_tip,
                dice_carina=dice_car,
                err_tip_mm=None if err_tip is None else err_tip * spacing,
                err_carina_mm=None if err_car is None else err_car * spacing,
                d_pred_mm=d_pred,
                d_gt_mm=d_gt,
                distance_error_mm=dist_err,
                suitability_gt=s_gt,
                suitability_pred=s_pred,
            )
        )

    pearson = None
    note = None
    try:
        pearson = pearson_stats(pairs_x, pairs_y)
    except TooFewPairsError:
        note = f"too few distance pairs for correlation ({len(pairs_x)})"
    except UndefinedMetricError as e:
        note = str(e)

    return EvaluationReport(
        n_images=len(annotations),
        tip=tip,
        carina=carina,
        distance_errors_mm=distance_errors,
        confusion=confusion,
        pearson=pearson,
        pearson_note=note,
        n_pairs=len(pairs_x),
        rows=rows,
        suitable_range=tuple(suitable_range),
        bucket_thresholds=tuple(bucket_thresholds),
    )
