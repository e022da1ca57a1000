"""
Feature points from segmentation masks
======================================

A tube mask and a bifurcation mask go in; two feature points and a
distance come out. This walks the chain one stage at a time.
"""

import numpy as np

from ettcarina import extraction, raster
from ettcarina.raster import Point

# --- a toy scene: a 3-px-wide vertical tube and a V-shaped bifurcation ----
H = W = 640
tube = np.zeros((H, W), dtype=bool)
tube[100:321, 319:322] = True  # tube runs down to y = 320

apex = Point(320, 420)
carina = raster.fill_polygon(
    [
        (apex.x + 40, apex.y - 60), (apex.x + 86, apex.y + 100),
        (apex.x + 70, apex.y + 100), (apex.x + 35, apex.y + 50),
        (apex.x, apex.y),
        (apex.x - 35, apex.y + 50), (apex.x - 70, apex.y + 100),
        (apex.x - 86, apex.y + 100), (apex.x - 40, apex.y - 60),
    ],
    W, H,
)

# --- tube tip: thin the mask, keep the lowest skeleton pixel --------------
# thinning erodes a flat end cap by a couple of rows, so the tip lands at
# y = 318 rather than 320; box-derived tips are immune to this
skeleton = raster.skeletonize(tube)
tip = extraction.tip_from_mask(tube)
print("tube skeleton pixels:", int(skeleton.sum()))
print("tip from mask:       ", tip)

# --- carina: skeleton density picks a central point, edge density refines -
result = extraction.carina_from_mask(carina)
print("carina central point:", result.central)
print("carina from mask:    ", result.point, "(edge fallback:", result.edge_fallback, ")")
print("true apex:           ", apex)

# --- fusion: a box-derived point wins unless it strays past 100 px --------
box_point = Point(321, 421)
fused, source = extraction.fuse_carina(box_point, result.point)
print("box 1.4 px away     ->", fused, "from", source)

far_box = Point(500, 421)
fused, source = extraction.fuse_carina(far_box, result.point)
print("box 180 px away     ->", fused, "from", source)

# --- the clinically interesting number ------------------------------------
spacing_mm = 0.5
distance_px = float(np.hypot(apex.x - tip.x, apex.y - tip.y))
print(f"tip-carina distance: {distance_px:.1f} px = {distance_px * spacing_mm:.1f} mm")
