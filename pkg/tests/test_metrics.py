import csv
import json
import math

import numpy as np
import pytest

from chainseg.contour import CartesianContour, PolarChain, shoelace_area, to_cartesian
from chainseg.errors import EmptySet, ZeroUnion
from chainseg.metrics import (
    MetricReport, RasterGrid, densify, evaluate_contours, global_jm, hausdorff, hd_paper_literal,
    is_convex, raster_area_ops, write_metrics_csv, write_metrics_json,
)

from conftest import clip_polygon, poly_area

UNIT = CartesianContour([(0, 0), (1, 0), (1, 1), (0, 1)])


def star(rng, n_v=24, center=(0.0, 0.0), lo=0.5, hi=1.5):
    return to_cartesian(PolarChain(center, rng.uniform(lo, hi, n_v)))


def test_identical_squares():
    ops = raster_area_ops(UNIT, UNIT, 1024)
    assert ops.intersection == pytest.approx(1.0, abs=2e-3)
    assert ops.union == pytest.approx(1.0, abs=2e-3)


def test_disjoint_squares():
    other = CartesianContour(UNIT.points + [3, 0])
    ops = raster_area_ops(UNIT, other, 1024)
    assert ops.intersection == 0
    assert ops.union == pytest.approx(2.0, abs=4e-3)
    assert global_jm(UNIT, other) == 0


def test_crossing_triangles():
    pred = CartesianContour([(0, 0), (2, 0), (0, 1)])
    gt = CartesianContour([(0, 0), (1, 0), (0, 2)])
    ops = raster_area_ops(pred, gt, 1024)
    assert ops.intersection == pytest.approx(2 / 3, abs=2e-3)
    assert ops.union == pytest.approx(4 / 3, abs=2e-3)
    # shoelace of the clipped quad agrees
    assert poly_area(clip_polygon(pred.points, gt.points)) == pytest.approx(2 / 3)


def test_nested_similar_triangles():
    tri = CartesianContour([(0, 0), (4, 0), (0, 4)])
    half = CartesianContour([(0, 0), (2, 0), (0, 2)])
    assert global_jm(half, tri) == pytest.approx(0.25, abs=2e-3)
    assert global_jm(tri, tri) == 1.0


def test_zero_union():
    flat = np.array([[0, 0], [1, 0], [2, 0]], dtype=float)
    with pytest.raises(ZeroUnion):
        global_jm(flat, flat)


def test_grid_validation():
    with pytest.raises(ValueError):
        RasterGrid(100, (0, 0, 1, 1))
    with pytest.raises(ValueError):
        RasterGrid(32, (0, 0, 1, 1))
    g = RasterGrid.covering(UNIT, resolution=64)
    x0, y0, x1, y1 = g.bounds
    assert x0 < 0 and y0 < 0 and x1 > 1 and y1 > 1


def test_convex_and_general_paths_agree(rng):
    for _ in range(20):
        a = to_cartesian(PolarChain((0, 0), np.full(16, rng.uniform(0.5, 2))))
        b = to_cartesian(PolarChain((rng.uniform(-1, 1), 0), np.full(12, rng.uniform(0.5, 2))))
        assert is_convex(a) and is_convex(b)
        ops = raster_area_ops(a, b, 256)
        grid = RasterGrid.covering(a, b, resolution=256)
        oa, ob = grid.occupancy(a), grid.occupancy(b)
        w = grid.cell_area
        assert ops.area_a == pytest.approx(oa.sum() * w, rel=0, abs=0)
        assert ops.intersection == pytest.approx((oa & ob).sum() * w, rel=0, abs=0)
        assert ops.union == pytest.approx((oa | ob).sum() * w, rel=0, abs=0)


def test_raster_area_matches_shoelace(rng):
    for _ in range(20):
        p = star(rng, n_v=32)
        ops = raster_area_ops(p, p, 1024)
        assert ops.area_a == pytest.approx(shoelace_area(p), rel=5e-3)


def test_resolution_doubling_drift(rng):
    for _ in range(20):
        a, b = star(rng), star(rng, center=(0.2, 0.1))
        drift = abs(global_jm(a, b, 512) - global_jm(a, b, 1024))
        assert drift < max(2e-3, 4 / 512)


def test_deterministic():
    pred = CartesianContour([(0, 0), (2, 0), (0, 1)])
    gt = CartesianContour([(0, 0), (1, 0), (0, 2)])
    assert raster_area_ops(pred, gt, 512) == raster_area_ops(pred, gt, 512)


def test_hausdorff_examples():
    X = [(0, 0), (1, 0)]
    Y = [(0, 0), (2, 0)]
    assert hausdorff(X, Y) == pytest.approx(1.0)
    assert hd_paper_literal(X, Y) == pytest.approx(2.0)
    assert hausdorff([(0, 0)], [(3, 4)]) == 5.0
    assert hd_paper_literal([(0, 0)], [(3, 4)]) == 5.0
    assert hausdorff(X, X) == 0
    assert hd_paper_literal([(1, 2)], [(1, 2)]) == 0
    with pytest.raises(EmptySet):
        hausdorff(np.empty((0, 2)), X)
    with pytest.raises(EmptySet):
        hd_paper_literal(X, np.empty((0, 2)))


def _brute_hd(X, Y):
    d = np.linalg.norm(X[:, None] - Y[None], axis=-1)
    return max(d.min(axis=1).max(), d.min(axis=0).max())


def test_hausdorff_axioms(rng):
    for _ in range(200):
        X = rng.normal(size=(rng.integers(1, 30), 2))
        Y = rng.normal(size=(rng.integers(1, 30), 2))
        Z = rng.normal(size=(rng.integers(1, 30), 2))
        h = hausdorff(X, Y)
        assert h == pytest.approx(_brute_hd(X, Y))
        assert h == hausdorff(Y, X)
        assert hausdorff(X, X) == 0
        assert h <= hausdorff(X, Z) + hausdorff(Z, Y) + 1e-12
        assert hd_paper_literal(X, Y) >= h


def test_hd_paper_literal_chunks(rng):
    X = rng.normal(size=(50, 2))
    Y = rng.normal(size=(40, 2))
    assert hd_paper_literal(X, Y, chunk=7) == hd_paper_literal(X, Y)


def test_densify_spacing():
    pts = densify(UNIT, 0.5)
    gaps = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    assert gaps.max() <= 0.5 + 1e-12
    assert len(pts) == 8
    assert hausdorff(densify(UNIT, 0.1), densify(UNIT, 0.05)) <= 0.05 + 1e-12


def test_report_outputs(tmp_path):
    rep = evaluate_contours("s0", UNIT, UNIT, UNIT, UNIT)
    assert rep.jm_lumen == 1.0 and rep.hd_lumen == 0.0
    assert set(rep.to_json()) == {"id", "jm_lumen", "jm_media", "hd_lumen", "hd_media",
                                  "hd_paper_literal_lumen", "hd_paper_literal_media"}
    write_metrics_csv([rep, rep], tmp_path / "m.csv")
    rows = list(csv.DictReader(open(tmp_path / "m.csv")))
    assert len(rows) == 2 and rows[0]["jm_lumen"] == "1.000000"
    write_metrics_json([rep], tmp_path / "m.json")
    assert json.loads((tmp_path / "m.json").read_text())["mean"]["jm_media"] == 1.0
