"""Walk through the two builtin hyper-parameter spaces and the anchor
geometry they control.

Every optimizer in this package searches a normalized ("scaled") space;
per-dimension affine transforms map a scaled vector to the physical
quantities a detector consumes.  This script prints both builtin spaces,
shows the scaled-to-physical mapping on their default vectors, and dumps
the anchor shapes those defaults induce.
"""

import numpy as np

from anchoropt import (
    FrcnnAnchorConfig,
    anchor_wh,
    builtin_space,
    constant_box_scale,
    default_vector,
    frcnn_anchor_set,
    ssd_default_config,
    ssd_layer_boxes,
    ssd_scale_schedule,
)
from anchoropt.anchors import anchor_table_csv

# --- the two-stage detector space -----------------------------------------

space = builtin_space("faster_rcnn")
print("two-stage space (7 dimensions):")
for p in space.params:
    print(f"  {p.name:<12} range ({p.lo}, {p.hi}]   physical = {p.mul:g}*x + {p.add:g}  [{p.unit}]")

v0 = default_vector(space)
print("\ndefault scaled vector:", v0.tolist())
print("transformed:", {k: round(v, 3) for k, v in space.transform(v0).items()})

# The nine default anchors: every (scale, ratio) pair keeps area = scale^2.
print("\nanchor set at the default configuration (w x h, pixels):")
for w, h in frcnn_anchor_set(FrcnnAnchorConfig()):
    print(f"  {w:8.2f} x {h:8.2f}   (area {w * h:10.1f})")

# --- the one-stage detector space ------------------------------------------

print("\none-stage space: 7 per-layer scales, identity transform, range (0, 1.06]")

# The evenly spaced schedule vs the operational defaults: the schedule
# formula with (0.2, 0.9, 6) gives a step of 0.14; the defaults used in
# practice carry a fixed 0.1 first scale and a 0.17 step.  Both are exposed.
print("linear schedule over 6 maps:", np.round(ssd_scale_schedule(0.2, 0.9, 6), 3).tolist())
cfg = ssd_default_config()
print("operational default scales:", list(cfg.scales))

print("\nper-layer boxes (the extra square box uses the geometric mean of")
print("adjacent scales, e.g.", f"sqrt(0.2*0.37) = {constant_box_scale(0.2, 0.37):.5f}):")
for i in range(cfg.n_layers):
    boxes = ", ".join(f"({w:.3f},{h:.3f})" for w, h in ssd_layer_boxes(cfg, i))
    print(f"  {cfg.layer_names[i]:<9} {boxes}")

# A single (scale, ratio) conversion, for reference.
w, h = anchor_wh(0.2, 2.0)
print(f"\nanchor_wh(0.2, 2.0) = ({w:.4f}, {h:.4f});  w/h = {w / h:.1f}, area = {w * h:.4f}")

print("\nfull CSV table (first 5 rows):")
print("\n".join(anchor_table_csv("ssd", cfg).splitlines()[:6]))
