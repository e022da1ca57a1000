"""Command-line interface.

Subcommands:
  extract       detections + annotations -> per-image extraction records
  evaluate      annotations + records (+ optional detections for Dice) ->
                JSON report, text tables, per-image CSV
  gen-fixtures  deterministic synthetic cohort with a planted-truth manifest
  render        annotations + records -> overlay PNGs

Set ETTCARINA_LOG_LEVEL (DEBUG/INFO/WARNING/ERROR) to control logging.
Exit status is 0 only when all inputs parsed and all outputs were written;
input problems print a diagnostic naming the file, record, and field.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import annotations as ann_io
from . import extraction, fixtures, metrics, render, reports
from .errors import EttCarinaError

log = logging.getLogger("ettcarina")


def _positive_float(text: str) -> float:
    v = float(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _range_pair(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo,hi — got {text!r}") from None
    if not 0 < lo < hi:
        raise argparse.ArgumentTypeError(f"need 0 < lo < hi, got {text!r}")
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ettcarina",
        description="Tube-tip / carina feature extraction and evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="detections -> feature-point records")
    p.add_argument("--detections", required=True)
    p.add_argument("--annotations", required=True, help="supplies pixel spacing and image sizes")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--fusion-threshold", type=_positive_float, default=100.0, metavar="PX")
    p.add_argument("--jobs", type=int, default=0, help="worker processes (0 = all cores)")

    p = sub.add_parser("evaluate", help="records vs ground truth -> report files")
    p.add_argument("--annotations", required=True)
    p.add_argument("--records", required=True, help="extraction records from `extract`")
    p.add_argument("--detections", help="optional; enables Dice in the match rule")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--suitable-range", type=_range_pair, default=(20.0, 70.0), metavar="LO,HI")

    p = sub.add_parser("gen-fixtures", help="write a synthetic cohort")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clean", action="store_true", help="no planted errors or dropouts")

    p = sub.add_parser("render", help="overlay PNGs: yellow ground truth, red predictions")
    p.add_argument("--annotations", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--backgrounds", help="directory of <image_id>.png backgrounds")
    p.add_argument("--jobs", type=int, default=0, help="worker processes (0 = all cores)")
    return parser


def _extract_one(task):
    ds, spacing, threshold = task
    return extraction.extract(ds, spacing, threshold)


def cmd_extract(args) -> int:
    anns = ann_io.load_annotations(args.annotations)
    sizes = {i: (a.image_width, a.image_height) for i, a in anns.items()}
    dets = ann_io.load_detections(args.detections, image_sizes=sizes)
    unknown = sorted(set(dets) - set(anns))
    if unknown:
        raise EttCarinaError(
            f"{args.detections}: detections reference unknown image_id(s): {', '.join(unknown)}"
        )
    tasks = [
        (dets[i], anns[i].pixel_spacing_mm, args.fusion_threshold) for i in sorted(dets)
    ]
    jobs = args.jobs or os.cpu_count() or 1
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_extract_one, tasks, chunksize=8))
    else:
        results = [_extract_one(t) for t in tasks]
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "extraction_records.json")
    extraction.save_results(results, out_path)
    log.info("wrote %s (%d records)", out_path, len(results))
    return 0


def _pred_masks(dets):
    out = {}
    for image_id, ds in dets.items():
        best = ann_io.select_max_score(ds)
        tube = best[ann_io.TUBE].mask if best[ann_io.TUBE] else None
        carina = best[ann_io.CARINA].mask if best[ann_io.CARINA] else None
        out[image_id] = (tube, carina)
    return out


def cmd_evaluate(args) -> int:
    anns = ann_io.load_annotations(args.annotations)
    results = extraction.load_results(args.records)
    pred_masks = None
    if args.detections:
        sizes = {i: (a.image_width, a.image_height) for i, a in anns.items()}
        pred_masks = _pred_masks(ann_io.load_detections(args.detections, image_sizes=sizes))
    report = metrics.evaluate(anns, results, pred_masks, suitable_range=args.suitable_range)
    os.makedirs(args.out, exist_ok=True)
    reports.write_report_json(report, os.path.join(args.out, "report.json"))
    reports.write_report_tables(report, os.path.join(args.out, "report_tables.txt"))
    reports.write_csv(report, os.path.join(args.out, "per_image.csv"))
    log.info("wrote report files to %s", args.out)
    return 0


def cmd_gen_fixtures(args) -> int:
    if args.count < 1:
        raise EttCarinaError(f"--count must be at least 1, got {args.count}")
    profile = fixtures.ALL_CLEAN if args.clean else fixtures.ErrorProfile()
    cohort = fixtures.generate_cohort(args.count, args.seed, profile)
    os.makedirs(args.out, exist_ok=True)
    ann_io.save_annotations(cohort.annotations, os.path.join(args.out, "annotations.json"))
    ann_io.save_detections(cohort.detections, os.path.join(args.out, "detections.json"))
    fixtures.save_manifest(cohort.manifest, os.path.join(args.out, "manifest.json"))
    log.info("wrote %d fixtures to %s", args.count, args.out)
    return 0


def _render_one(task):
    ann, result, out_path, background_path = task
    render.render_to_file(ann, result, out_path, background_path)
    return out_path


def cmd_render(args) -> int:
    anns = ann_io.load_annotations(args.annotations)
    results = extraction.load_results(args.records)
    os.makedirs(args.out, exist_ok=True)
    tasks = []
    for image_id in sorted(anns):
        background = None
        if args.backgrounds:
            candidate = os.path.join(args.backgrounds, f"{image_id}.png")
            if os.path.exists(candidate):
                background = candidate
        tasks.append(
            (
                anns[image_id],
                results.get(image_id),
                os.path.join(args.out, f"{image_id}.png"),
                background,
            )
        )
    jobs = args.jobs or os.cpu_count() or 1
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(_render_one, tasks, chunksize=8))
    else:
        for t in tasks:
            _render_one(t)
    log.info("wrote %d overlays to %s", len(tasks), args.out)
    return 0


COMMANDS = {
    "extract": cmd_extract,
    "evaluate": cmd_evaluate,
    "gen-fixtures": cmd_gen_fixtures,
    "render": cmd_render,
}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("ETTCARINA_LOG_LEVEL", "WARNING").upper())
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (EttCarinaError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
