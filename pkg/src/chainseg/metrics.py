"""Region metrics: raster areas, global Jaccard, Hausdorff distances.

The raster estimator samples cell centers on a ``resolution x resolution``
grid laid over the joint bounding box of the shapes. It shares no code with
the closed-form wedge geometry and serves as its oracle.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .contour import CartesianContour
from .errors import EmptySet, ZeroUnion

# relative padding that keeps the shapes strictly inside the sampled box
BOUNDS_MARGIN = 1e-9


def _points(shape):
    return shape.points if isinstance(shape, CartesianContour) else np.asarray(shape, dtype=float)


@dataclass
class RasterGrid:
    """Cell-center sampling grid. ``bounds`` is (xmin, ymin, xmax, ymax)."""

    resolution: int
    bounds: tuple

    def __post_init__(self):
        if self.resolution < 64 or self.resolution & (self.resolution - 1):
            raise ValueError(f"resolution must be a power of two >= 64, got {self.resolution}")

    @classmethod
    def covering(cls, *shapes, resolution=1024):
        pts = np.vstack([_points(s) for s in shapes])
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        pad = BOUNDS_MARGIN * (hi - lo) + 1e-12
        return cls(resolution, (lo[0] - pad[0], lo[1] - pad[1], hi[0] + pad[0], hi[1] + pad[1]))

    @property
    def cell(self):
        x0, y0, x1, y1 = self.bounds
        return (x1 - x0) / self.resolution, (y1 - y0) / self.resolution

    @property
    def cell_area(self):
        hx, hy = self.cell
        return hx * hy

    def row_centers(self):
        hy = self.cell[1]
        return self.bounds[1] + (np.arange(self.resolution) + 0.5) * hy

    def first_center_at_or_after(self, x):
        """Index of the first column whose center is >= x (clipped to [0, res])."""
        hx = self.cell[0]
        k = np.ceil((x - self.bounds[0]) / hx - 0.5)
        return np.clip(k, 0, self.resolution).astype(np.int64)

    def crossings(self, shape):
        """(row, x) of every edge crossing of each row-center line (half-open in y)."""
        pts = _points(shape)
        x0, y0 = pts[:, 0], pts[:, 1]
        x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
        yc = self.row_centers()[:, None]
        hit = (y0 <= yc) != (y1 <= yc)
        rows, edges = np.nonzero(hit)
        t = (yc[rows, 0] - y0[edges]) / (y1[edges] - y0[edges])
        return rows, x0[edges] + t * (x1[edges] - x0[edges])

    def occupancy(self, shape):
        """Boolean (res, res) mask of cell centers inside ``shape`` (even-odd)."""
        res = self.resolution
        rows, xs = self.crossings(shape)
        cols = self.first_center_at_or_after(xs)
        toggles = np.bincount(rows * (res + 1) + cols, minlength=res * (res + 1))
        toggles = toggles.reshape(res, res + 1)[:, :res]
        return (np.cumsum(toggles, axis=1) & 1).astype(bool)

    def row_spans(self, shape):
        """Per-row [start, stop) column spans for a convex shape."""
        res = self.resolution
        rows, xs = self.crossings(shape)
        lo = np.full(res, np.inf)
        hi = np.full(res, -np.inf)
        np.minimum.at(lo, rows, xs)
        np.maximum.at(hi, rows, xs)
        start = np.zeros(res, dtype=np.int64)
        stop = np.zeros(res, dtype=np.int64)
        ok = np.isfinite(lo)
        start[ok] = self.first_center_at_or_after(lo[ok])
        stop[ok] = self.first_center_at_or_after(hi[ok])
        return start, stop


def is_convex(shape):
    pts = _points(shape)
    d1 = np.roll(pts, -1, axis=0) - pts
    d2 = np.roll(d1, -1, axis=0)
    cr = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    return bool(np.all(cr >= 0) or np.all(cr <= 0))


class AreaOps(NamedTuple):
    area_a: float
    area_b: float
    intersection: float
    union: float


def raster_area_ops(A, B, resolution=1024):
    """Areas of A, B, A&B and A|B by cell-center sampling.

    Convex inputs take a per-row span path; anything else is rasterized to a
    full occupancy grid. Both paths count exactly the same cell centers.
    """
    grid = RasterGrid.covering(A, B, resolution=resolution)
    if is_convex(A) and is_convex(B):
        sa, ea = grid.row_spans(A)
        sb, eb = grid.row_spans(B)
        na = np.maximum(ea - sa, 0)
        nb = np.maximum(eb - sb, 0)
        ni = np.maximum(np.minimum(ea, eb) - np.maximum(sa, sb), 0)
        ca, cb, ci = int(na.sum()), int(nb.sum()), int(ni.sum())
        cu = ca + cb - ci
    else:
        oa = grid.occupancy(A)
        ob = grid.occupancy(B)
        ca, cb = int(oa.sum()), int(ob.sum())
        ci = int(np.count_nonzero(oa & ob))
        cu = int(np.count_nonzero(oa | ob))
    w = grid.cell_area
    return AreaOps(ca * w, cb * w, ci * w, cu * w)


def global_jm(pred, gt, resolution=1024):
    """Jaccard measure |pred & gt| / |pred | gt| of two polygons."""
    ops = raster_area_ops(pred, gt, resolution)
    if ops.union <= 0:
        raise ZeroUnion("both polygons are degenerate")
    return ops.intersection / ops.union


def densify(shape, spacing=0.5):
    """Boundary points of a closed polygon with gaps no larger than ``spacing``."""
    pts = _points(shape)
    nxt = np.roll(pts, -1, axis=0)
    lengths = np.linalg.norm(nxt - pts, axis=1)
    counts = np.maximum(np.ceil(lengths / spacing).astype(int), 1)
    t = np.concatenate([np.arange(n) / n for n in counts])
    idx = np.repeat(np.arange(len(pts)), counts)
    return pts[idx] + t[:, None] * (nxt[idx] - pts[idx])


def _check_sets(X, Y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.size == 0 or Y.size == 0:
        raise EmptySet("Hausdorff distance needs two nonempty point sets")
    return X, Y


def hausdorff(X, Y):
    """Symmetric Hausdorff distance max(max_x min_y d, max_y min_x d)."""
    X, Y = _check_sets(X, Y)
    d_xy = cKDTree(Y).query(X)[0].max()
    d_yx = cKDTree(X).query(Y)[0].max()
    return float(max(d_xy, d_yx))


def hd_paper_literal(X, Y, chunk=4096):
    """Largest distance over all cross pairs (x, y)."""
    X, Y = _check_sets(X, Y)
    best = 0.0
    for i in range(0, len(X), chunk):
        best = max(best, float(cdist(X[i:i + chunk], Y).max()))
    return best


@dataclass
class MetricReport:
    id: str
    jm_lumen: float
    jm_media: float
    hd_lumen: float
    hd_media: float
    hd_paper_literal_lumen: float
    hd_paper_literal_media: float

    def to_json(self):
        return asdict(self)


def contour_metrics(pred, gt, resolution=1024, hd_scale=1.0, spacing=0.5):
    """(jm, hd, hd_paper_literal) for one predicted contour vs its ground truth."""
    jm = global_jm(pred, gt, resolution)
    P = densify(pred, spacing)
    G = densify(gt, spacing)
    return jm, hd_scale * hausdorff(P, G), hd_scale * hd_paper_literal(P, G)


def evaluate_contours(sample_id, pred_lumen, pred_media, gt_lumen, gt_media, resolution=1024, hd_scale=1.0):
    jl, hl, pl = contour_metrics(pred_lumen, gt_lumen, resolution, hd_scale)
    jmed, hm, pm = contour_metrics(pred_media, gt_media, resolution, hd_scale)
    return MetricReport(sample_id, jl, jmed, hl, hm, pl, pm)


def summarize(reports):
    keys = [k for k in MetricReport.__dataclass_fields__ if k != "id"]
    return {k: float(np.mean([getattr(r, k) for r in reports])) for k in keys}


def write_metrics_csv(reports, path):
    keys = list(MetricReport.__dataclass_fields__)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for r in reports:
            w.writerow([r.id] + [f"{getattr(r, k):.6f}" for k in keys[1:]])


def write_metrics_json(reports, path):
    payload = {"mean": summarize(reports), "images": [r.to_json() for r in reports]}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
