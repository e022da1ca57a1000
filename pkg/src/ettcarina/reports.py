"""Report emission: JSON summary, aligned plain-text tables, per-image CSV.

The text tables follow the layout of the usual clinical write-up: recall and
precision per object, object-error mean and standard deviation in mm,
distance-error mean and standard deviation, three cumulative error
distributions, the 3x2 suitability confusion matrix, and the correlation
block (r, 95% CI, R square, two-tailed P with a star summary, pair counts).
"""
from __future__ import annotations

import csv
import json

from .metrics import SUITABLE, UNDETECTION, UNSUITABLE, EvaluationReport, p_value_summary

SIGNIFICANCE_ALPHA = 0.05


def _fmt_pct(frac) -> str:
    return "n/a" if frac is None else f"{100.0 * frac:.2f}%"


def _fmt_mm(v) -> str:
    return "n/a" if v is None else f"{v:.4f}"


def _fmt_p(p: float) -> str:
    return "< 0.0001" if p < 0.0001 else f"{p:.4f}"


def _thr_label(t: float) -> str:
    return f"<= {int(t) if float(t).is_integer() else t} mm"


def _grid(rows: list[list[str]]) -> str:
    """Align a list of string rows into padded columns."""
    ncol = max(len(r) for r in rows)
    widths = [0] * ncol
    for r in rows:
        for i, cell in enumerate(r):
            widths[i] = max(widths[i], len(cell))
    out = []
    for r in rows:
        cells = [cell.ljust(widths[i]) if i == 0 else cell.rjust(widths[i]) for i, cell in enumerate(r)]
        out.append("  ".join(cells).rstrip())
    return "\n".join(out)


# ---------------------------------------------------------------------------
# JSON report
# ---------------------------------------------------------------------------

def _class_dict(stats, thresholds) -> dict:
    mean, std = stats.error_mean_std_mm()
    buckets = stats.buckets(thresholds)
    return {
        "tp": stats.tp,
        "fp": stats.fp,
        "fn": stats.fn,
        "recall": stats.recall,
        "precision": stats.precision,
        "object_error_mm": {"mean": mean, "std": std, "n": len(stats.errors_mm)},
        "buckets": None
        if buckets is None
        else {_thr_label(t): f for t, f in zip(thresholds, buckets)},
    }


def report_to_dict(report: EvaluationReport) -> dict:
    thresholds = report.bucket_thresholds
    mean, std = report.distance_mean_std()
    dbuckets = report.distance_buckets()
    pearson = None
    if report.pearson is not None:
        ps = report.pearson
        pearson = {
            "r": ps.r,
            "r_squared": ps.r_squared,
            "ci95": list(ps.ci95),
            "p_two_tailed": ps.p_two_tailed,
            "p_summary": p_value_summary(ps.p_two_tailed),
            "significant": ps.p_two_tailed < SIGNIFICANCE_ALPHA,
            "n_pairs": ps.n,
        }
    return {
        "n_images": report.n_images,
        "suitable_range_mm": list(report.suitable_range),
        "bucket_thresholds_mm": list(thresholds),
        "tube_tip": _class_dict(report.tip, thresholds),
        "carina": _class_dict(report.carina, thresholds),
        "distance_error_mm": {
            "mean": mean,
            "std": std,
            "n": len(report.distance_errors_mm),
            "buckets": None
            if dbuckets is None
            else {_thr_label(t): f for t, f in zip(thresholds, dbuckets)},
        },
        "confusion_matrix": report.confusion,
        "pearson": pearson,
        "pearson_note": report.pearson_note,
        "n_pairs": report.n_pairs,
    }


def write_report_json(report: EvaluationReport, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report_to_dict(report), f, indent=2, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------------------
# Plain-text tables
# ---------------------------------------------------------------------------

def _bucket_row(label, buckets) -> list[str]:
    if buckets is None:
        return [label] + ["n/a"] * 4
    return [label] + [_fmt_pct(f) for f in buckets]


def format_tables(report: EvaluationReport) -> str:
    thr = report.bucket_thresholds
    thr_heads = [_thr_label(t) for t in thr]
    blocks = []

    blocks.append(
        "Object detection performance in recall and precision\n"
        + _grid(
            [
                ["", "Tube Tip", "", "Carina", ""],
                ["", "Recall", "Precision", "Recall", "Precision"],
                [
                    "All",
                    _fmt_pct(report.tip.recall),
                    _fmt_pct(report.tip.precision),
                    _fmt_pct(report.carina.recall),
                    _fmt_pct(report.carina.precision),
                ],
            ]
        )
    )

    tip_mean, tip_std = report.tip.error_mean_std_mm()
    car_mean, car_std = report.carina.error_mean_std_mm()
    blocks.append(
        "Object detection performance in object error\n"
        + _grid(
            [
                ["", "Tube Tip (mm)", "", "Carina (mm)", ""],
                ["", "Mean", "Std.", "Mean", "Std."],
                ["All", _fmt_mm(tip_mean), _fmt_mm(tip_std), _fmt_mm(car_mean), _fmt_mm(car_std)],
            ]
        )
    )

    d_mean, d_std = report.distance_mean_std()
    blocks.append(
        "Tube-carina distance error\n"
        + _grid(
            [
                ["", "Mean (mm)", "Std. (mm)"],
                ["All", _fmt_mm(d_mean), _fmt_mm(d_std)],
            ]
        )
    )

    blocks.append(
        "Distribution of images in tube-carina distance error\n"
        + _grid([[""] + thr_heads, _bucket_row("All", report.distance_buckets())])
    )
    blocks.append(
        "Distribution of images in object error (tube tip)\n"
        + _grid([[""] + thr_heads, _bucket_row("All", report.tip.buckets(thr))])
    )
    blocks.append(
        "Distribution of images in object error (carina)\n"
        + _grid([[""] + thr_heads, _bucket_row("All", report.carina.buckets(thr))])
    )

    c = report.confusion
    blocks.append(
        "Confusion matrix of diagnosis\n"
        + _grid(
            [
                ["Predict \\ GT", "Suitable", "Unsuitable"],
                ["Suitable", str(c[SUITABLE][SUITABLE]), str(c[SUITABLE][UNSUITABLE])],
                ["Unsuitable", str(c[UNSUITABLE][SUITABLE]), str(c[UNSUITABLE][UNSUITABLE])],
                ["Undetection", str(c[UNDETECTION][SUITABLE]), str(c[UNDETECTION][UNSUITABLE])],
            ]
        )
    )

    corr_rows = [["", "All"], ["Pearson r", ""]]
    if report.pearson is not None:
        ps = report.pearson
        corr_rows += [
            ["r", f"{ps.r:.4f}"],
            ["95% confidence interval", f"{ps.ci95[0]:.4f} to {ps.ci95[1]:.4f}"],
            ["R square", f"{ps.r_squared:.4f}"],
            ["P value", ""],
            ["P (two-tailed)", _fmt_p(ps.p_two_tailed)],
            ["P value summary", p_value_summary(ps.p_two_tailed)],
            ["Significant? (alpha=0.05)", "Yes" if ps.p_two_tailed < SIGNIFICANCE_ALPHA else "No"],
            ["", ""],
            ["Number of XY Pairs", str(ps.n)],
            ["Overall number", str(report.n_images)],
        ]
    else:
        corr_rows += [
            ["r", "n/a"],
            ["note", report.pearson_note or "unavailable"],
            ["", ""],
            ["Number of XY Pairs", str(report.n_pairs)],
            ["Overall number", str(report.n_images)],
        ]
    blocks.append(
        "Correlation between ground truth and prediction (tube-carina distance)\n"
        + _grid(corr_rows)
    )

    return "\n\n".join(blocks) + "\n"


def write_report_tables(report: EvaluationReport, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_tables(report))


# ---------------------------------------------------------------------------
# Per-image CSV
# ---------------------------------------------------------------------------

CSV_FIELDS = (
    "image_id",
    "dice_tip",
    "dice_carina",
    "err_tip_mm",
    "err_carina_mm",
    "d1",
    "d2",
    "distance_error_mm",
    "suitability_gt",
    "suitability_pred",
)


def write_csv(report: EvaluationReport, path) -> None:
    """One row per image; d1 is the ground-truth distance, d2 the
    prediction, distance_error_mm their absolute difference. Unavailable
    values are left empty."""

    def cell(v):
        return "" if v is None else v

    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_FIELDS)
        for r in report.rows:
            w.writerow(
                [
                    r.image_id,
                    cell(r.dice_tip),
                    cell(r.dice_carina),
                    cell(r.err_tip_mm),
                    cell(r.err_carina_mm),
                    cell(r.d_gt_mm),
                    cell(r.d_pred_mm),
                    cell(r.distance_error_mm),
                    r.suitability_gt,
                    r.suitability_pred,
                ]
            )
