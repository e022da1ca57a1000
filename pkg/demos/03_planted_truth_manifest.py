"""
The manifest is the answer key
==============================

Each generated fixture records what was planted: the true feature points,
the shifts applied to the detections, and the distances both before and
after. Running the pipeline must land on those numbers, which is exactly
what the end-to-end tests assert.
"""

from ettcarina import extraction, fixtures

cohort = fixtures.generate_cohort(12, seed=99)

print(f"{'image':<14}{'scenario':<22}{'planted d2':>12}{'pipeline d2':>13}")
for row in cohort.manifest["images"]:
    image_id = row["image_id"]
    result = extraction.extract(cohort.detections[image_id], row["pixel_spacing_mm"])
    planted = "-" if row["d2_mm"] is None else f"{row['d2_mm']:.4f}"
    realized = "-" if result.distance_mm is None else f"{result.distance_mm:.4f}"
    print(f"{image_id:<14}{row['scenario']:<22}{planted:>12}{realized:>13}")
