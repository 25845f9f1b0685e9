"""
Polar chains from closed contours
=================================

Resample a closed outline onto equally spaced rays, turn the chain back into
a polygon and compare areas.
"""

import math

import numpy as np

from chainseg import CartesianContour, resample, to_cartesian
from chainseg.contour import chain_area, ray_angles, shoelace_area

# A wobbly outline around (32, 32), sampled densely.
t = np.linspace(0, 2 * math.pi, 400, endpoint=False)
radius = 12 + 2 * np.cos(3 * t) + np.sin(5 * t)
outline = CartesianContour(np.column_stack([32 + radius * np.cos(t), 32 + radius * np.sin(t)]))

# Rays start on +x and go counter-clockwise. Where a ray meets the outline
# more than once the farthest hit is kept.
print("first rays (deg):", np.degrees(ray_angles(8))[:4])

for n_v in (16, 32, 64):
    chain = resample(outline, (32, 32), n_v)
    poly = to_cartesian(chain)
    print(f"n_v={n_v:2d}  chain area {chain_area(chain):8.3f}  "
          f"polygon area {shoelace_area(poly):8.3f}  outline area {shoelace_area(outline):8.3f}")

# Chains serialize to plain JSON.
chain = resample(outline, (32, 32), 16)
print(chain.to_json()["radii"][:4])
