"""
Wedge-level Jaccard loss
========================

Each pair of neighbouring rays cuts a triangle out of the predicted chain and
another out of the ground-truth chain. The loss sums ``1 - IoU`` over these
wedges. This demo walks through the exact computation, the closed-form
backend and a raster cross-check.
"""

import math

import numpy as np

from chainseg import PolarChain, SegmentPair, classify, jm_exact, jm_loss, jm_paper, mse_loss
from chainseg.metrics import raster_area_ops

# Two chords that cross inside a right-angled wedge.
seg = SegmentPair(2.0, 1.0, 1.0, 2.0, math.pi / 2)
print("case:", classify(seg).numeral)
jm, partials = jm_exact(seg)
print("exact IoU:", jm, "partials:", np.round(partials, 4))

# The same number from sampling cell centers on a fine grid.
c, s = math.cos(seg.theta), math.sin(seg.theta)
pred = np.array([[0, 0], [seg.r_i, 0], [seg.r_next * c, seg.r_next * s]])
gt = np.array([[0, 0], [seg.a_i, 0], [seg.a_next * c, seg.a_next * s]])
ops = raster_area_ops(pred, gt, 2048)
print("raster IoU:", ops.intersection / ops.union)

# The closed forms agree with the exact value in some cases and not in
# others. Nested wedges are a clear example.
nested = SegmentPair(1.0, 1.0, 2.0, 2.0, math.pi / 8)
print("nested: closed form", jm_paper(nested).jm, "exact", jm_exact(nested)[0])

# Whole-chain losses return the total, the gradient and per-wedge terms.
n_v = 16
center = (32.0, 32.0)
k = np.arange(n_v)
gt_l = PolarChain(center, 8 + np.cos(2 * math.pi * 2 * k / n_v))
gt_m = PolarChain(center, 14 + np.sin(2 * math.pi * 3 * k / n_v))
pr_l = PolarChain(center, gt_l.radii + 0.5)
pr_m = PolarChain(center, gt_m.radii - 0.5)
for backend in ("exact", "paper"):
    rep = jm_loss(pr_l, pr_m, gt_l, gt_m, backend=backend)
    print(f"{backend:5s} loss {rep.value:.5f}  |grad| {np.linalg.norm(rep.grad):.5f}")
print("mse   loss", mse_loss(pr_l, pr_m, gt_l, gt_m).value)
