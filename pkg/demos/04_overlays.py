"""
Overlay rendering
=================

Yellow is ground truth (polygon outlines and asterisks at the feature
points); red asterisks are the predictions. Undetections are noted on the
legend instead of drawn.
"""

import tempfile
from pathlib import Path

from ettcarina import extraction, fixtures, render

out_dir = Path(tempfile.mkdtemp(prefix="ettcarina_overlays_"))

specs = [
    fixtures.FixtureSpec(image_id="clean"),
    fixtures.FixtureSpec(image_id="shifted_tip", tip_shift=(6, -10)),
    fixtures.FixtureSpec(image_id="no_carina", drop_carina_mask=True, drop_carina_box=True),
]
for spec in specs:
    fx = fixtures.generate(spec)
    result = extraction.extract(fx.detections, spec.pixel_spacing_mm)
    path = out_dir / f"{spec.image_id}.png"
    render.render_to_file(fx.annotation, result, path)
    print("wrote", path)

print("\nopen the PNGs to compare the red glyphs against the yellow ones")
