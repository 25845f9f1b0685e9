import math

import numpy as np
import pytest


def clip_polygon(subject, clip):
    """Sutherland-Hodgman clip of ``subject`` by convex CCW ``clip``."""
    out = [tuple(p) for p in subject]
    m = len(clip)
    for i in range(m):
        a, b = clip[i], clip[(i + 1) % m]
        inp, out = out, []
        if not inp:
            break

        def side(p):
            return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])

        for j in range(len(inp)):
            p, q = inp[j], inp[(j + 1) % len(inp)]
            sp, sq = side(p), side(q)
            if sp >= 0:
                out.append(p)
            if (sp >= 0) != (sq >= 0):
                t = sp / (sp - sq)
                out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def poly_area(pts):
    if len(pts) < 3:
        return 0.0
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def wedge_triangles(r, rn, a, an, theta):
    c, s = math.cos(theta), math.sin(theta)
    pred = [(0.0, 0.0), (r, 0.0), (rn * c, rn * s)]
    gt = [(0.0, 0.0), (a, 0.0), (an * c, an * s)]
    return pred, gt


def clip_iou(r, rn, a, an, theta):
    pred, gt = wedge_triangles(r, rn, a, an, theta)
    inter = poly_area(clip_polygon(pred, gt))
    union = poly_area(pred) + poly_area(gt) - inter
    return inter / union, inter, union


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed after the run
CRITERIA_LINES = []


@pytest.fixture
def criterion():
    def record(label, ok, detail=""):
        CRITERIA_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip())
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA_LINES:
            terminalreporter.write_line(line)
