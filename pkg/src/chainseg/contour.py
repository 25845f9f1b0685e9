"""Polar polygonal chains and the plane geometry they rest on.

A chain stores ``n_v`` radii on rays at fixed angles ``2*pi*k/n_v`` (CCW from
the +x axis) about a center. Coordinates are image pixels with y pointing
down; nothing here depends on the handedness, so the formulas are used as-is.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CenterOutside, Degenerate, InvalidContour, NoIntersection

RADIUS_FLOOR = 1e-3
_EDGE_TOL = 1e-12


@dataclass(frozen=True)
class PolarChain:
    center: tuple
    radii: np.ndarray

    def __post_init__(self):
        radii = np.array(self.radii, dtype=float)
        if radii.ndim != 1 or radii.size < 3:
            raise InvalidContour(f"a chain needs at least 3 radii, got shape {radii.shape}")
        if not np.all(np.isfinite(radii)) or np.any(radii <= 0):
            raise InvalidContour("chain radii must be finite and strictly positive")
        radii.setflags(write=False)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def n_v(self):
        return self.radii.size

    @property
    def theta(self):
        """Wedge angle between consecutive rays."""
        return 2 * math.pi / self.n_v

    def angles(self):
        return ray_angles(self.n_v)

    def to_json(self):
        return {"center": list(self.center), "n_v": self.n_v, "radii": [float(r) for r in self.radii]}

    @classmethod
    def from_json(cls, d):
        chain = cls(tuple(d["center"]), d["radii"])
        if "n_v" in d and int(d["n_v"]) != chain.n_v:
            raise InvalidContour(f"n_v={d['n_v']} but {chain.n_v} radii given")
        return chain

    def __eq__(self, other):
        if not isinstance(other, PolarChain):
            return NotImplemented
        return self.center == other.center and np.array_equal(self.radii, other.radii)

    __hash__ = None


@dataclass(frozen=True)
class CartesianContour:
    """Closed polygon; the first point is not repeated at the end."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise InvalidContour(f"points must have shape (N, 2), got {pts.shape}")
        if len(pts) >= 2 and np.allclose(pts[0], pts[-1], rtol=0, atol=0) and len(pts) > 3:
            pts = pts[:-1]
        if len(pts) < 3:
            raise InvalidContour(f"a contour needs at least 3 points, got {len(pts)}")
        if not np.all(np.isfinite(pts)):
            raise InvalidContour("contour coordinates must be finite")
        if np.any(np.all(pts == np.roll(pts, -1, axis=0), axis=1)):
            raise InvalidContour("consecutive duplicate points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        if not isinstance(other, CartesianContour):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    __hash__ = None


@dataclass(frozen=True)
class Ray:
    origin: tuple
    angle: float

    def __post_init__(self):
        object.__setattr__(self, "angle", float(self.angle) % (2 * math.pi))

    @property
    def direction(self):
        return (math.cos(self.angle), math.sin(self.angle))


def ray_angles(n_v):
    return 2 * np.pi * np.arange(n_v) / n_v


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def point_in_polygon(points, polygon):
    """Even-odd test for one point (shape (2,)) or many (shape (M, 2))."""
    poly = polygon.points if isinstance(polygon, CartesianContour) else np.asarray(polygon, float)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    px = pts[:, 0:1]
    py = pts[:, 1:2]
    straddle = (y0 <= py) != (y1 <= py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
    inside = (np.count_nonzero(straddle & (px < xc), axis=1) % 2) == 1
    return inside if np.ndim(points) > 1 else bool(inside[0])


def ray_radius(contour, center, angles):
    """Distance from ``center`` to the farthest boundary crossing along each ray.

    Returns NaN where a ray meets no edge.
    """
    pts = contour.points
    cx, cy = float(center[0]), float(center[1])
    ang = np.atleast_1d(np.asarray(angles, dtype=float))
    ux = np.cos(ang)[:, None]
    uy = np.sin(ang)[:, None]
    px = pts[:, 0] - cx
    py = pts[:, 1] - cy
    ex = np.roll(px, -1) - px
    ey = np.roll(py, -1) - py
    denom = _cross(ux, uy, ex, ey)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = _cross(px, py, ex, ey) / denom
        s = _cross(px, py, ux, uy) / denom
    hit = (denom != 0) & (s >= -_EDGE_TOL) & (s <= 1 + _EDGE_TOL) & (t > 0)
    t = np.where(hit, t, -np.inf)
    r = t.max(axis=1)
    r[~np.isfinite(r)] = np.nan
    return r


def resample(contour, center, n_v, r_max=None):
    """Sample a closed contour on ``n_v`` equally spaced rays about ``center``.

    Where a ray crosses the boundary several times (non-star-shaped input)
    the farthest crossing is kept. Radii are clamped to ``[1e-3, r_max]``.

    Raises:
        CenterOutside: ``center`` is not inside the polygon.
        NoIntersection: some ray misses every edge.
    """
    if n_v < 3:
        raise InvalidContour(f"n_v must be >= 3, got {n_v}")
    if not point_in_polygon(np.asarray(center, float), contour):
        raise CenterOutside(f"center {tuple(center)} lies outside the contour")
    r = ray_radius(contour, center, ray_angles(n_v))
    if np.any(np.isnan(r)):
        missing = np.flatnonzero(np.isnan(r)).tolist()
        raise NoIntersection(f"rays {missing} do not meet the contour")
    r = np.clip(r, RADIUS_FLOOR, np.inf if r_max is None else r_max)
    return PolarChain(tuple(center), r)


def to_cartesian(chain):
    ang = chain.angles()
    cx, cy = chain.center
    pts = np.column_stack([cx + chain.radii * np.cos(ang), cy + chain.radii * np.sin(ang)])
    return CartesianContour(pts)


def shoelace_area(contour):
    """Signed polygon area, positive for CCW vertex order."""
    pts = contour.points if isinstance(contour, CartesianContour) else np.asarray(contour, float)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def chain_area(chain):
    """Area of a chain from its central triangles, 1/2 r_k r_{k+1} sin(theta)."""
    r = chain.radii
    return 0.5 * math.sin(chain.theta) * float(np.dot(r, np.roll(r, -1)))


def segment_intersection(p1, p2, q1, q2, tol=1e-12):
    """Crossing point of open segments p1-p2 and q1-q2, or None.

    Raises:
        Degenerate: the segments are collinear and overlap.
    """
    p1, p2, q1, q2 = (np.asarray(v, dtype=float) for v in (p1, p2, q1, q2))
    r = p2 - p1
    s = q2 - q1
    if not (np.any(r) and np.any(s)):
        raise Degenerate("zero-length segment")
    qp = q1 - p1
    rxs = _cross(r[0], r[1], s[0], s[1])
    scale = np.linalg.norm(r) * np.linalg.norm(s)
    if abs(rxs) <= tol * scale:
        if abs(_cross(qp[0], qp[1], r[0], r[1])) > tol * np.linalg.norm(r) * max(np.linalg.norm(qp), 1.0):
            return None
        rr = float(r @ r)
        t0 = float(qp @ r) / rr
        t1 = t0 + float(s @ r) / rr
        lo, hi = min(t0, t1), max(t0, t1)
        if hi > 0 and lo < 1 and min(hi, 1) - max(lo, 0) > tol:
            raise Degenerate("collinear overlapping segments")
        return None
    t = _cross(qp[0], qp[1], s[0], s[1]) / rxs
    u = _cross(qp[0], qp[1], r[0], r[1]) / rxs
    if 0 < t < 1 and 0 < u < 1:
        return (float(p1[0] + t * r[0]), float(p1[1] + t * r[1]))
    return None


def save_chain(chain, path):
    Path(path).write_text(json.dumps(chain.to_json(), indent=1))


def load_chain(path):
    return PolarChain.from_json(json.loads(Path(path).read_text()))
