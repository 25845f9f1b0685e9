import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chainseg.contour import (
    CartesianContour, PolarChain, Ray, chain_area, load_chain, point_in_polygon,
    ray_radius, resample, save_chain, segment_intersection, shoelace_area, to_cartesian,
)
from chainseg.errors import CenterOutside, Degenerate, InvalidContour, NoIntersection

SQUARE = CartesianContour([(0, 0), (4, 0), (4, 4), (0, 4)])


def ellipse(a, b, n=20000, center=(0.0, 0.0)):
    t = 2 * np.pi * np.arange(n) / n
    return CartesianContour(np.column_stack([center[0] + a * np.cos(t), center[1] + b * np.sin(t)]))


def test_resample_square_axis_rays():
    chain = resample(SQUARE, (2, 2), 4)
    np.testing.assert_allclose(chain.radii, [2, 2, 2, 2], atol=1e-12)


def test_resample_square_diagonals():
    chain = resample(SQUARE, (2, 2), 8)
    np.testing.assert_allclose(chain.radii[1::2], 2 * math.sqrt(2), atol=1e-12)


def test_resample_ellipse_matches_polar_form():
    a, b = 2.0, 1.0
    chain = resample(ellipse(a, b), (0, 0), 64)
    phi = chain.angles()
    exact = a * b / np.sqrt((b * np.cos(phi)) ** 2 + (a * np.sin(phi)) ** 2)
    # inscribed polygon with 20000 vertices: chord sag is far below 1e-6 relative
    assert np.max(np.abs(chain.radii / exact - 1)) < 1e-6


def test_resample_center_outside():
    with pytest.raises(CenterOutside):
        resample(SQUARE, (10, 10), 8)


def test_resample_takes_farthest_crossing():
    # box with a slot cut from the top: the +x ray crosses x=1, x=2 and x=3
    pts = [(-1, -1), (3, -1), (3, 1), (2, 1), (2, -0.5), (1, -0.5), (1, 1), (-1, 1)]
    chain = resample(CartesianContour(pts), (0, 0), 4)
    assert chain.radii[0] == pytest.approx(3.0)


def test_resample_clamps_to_r_max():
    chain = resample(SQUARE, (2, 2), 8, r_max=2.5)
    assert chain.radii.max() == 2.5


def test_ray_radius_no_hit_is_nan():
    # center on a vertex region outside a thin triangle in one direction
    tri = CartesianContour([(0, 0), (1, 0), (0, 1)])
    r = ray_radius(tri, (2, 2), [0.0])
    assert np.isnan(r[0])


def test_no_intersection_raised():
    # center inside but a tolerance-free miss is impossible for closed polygons;
    # exercise the check by monkeying a degenerate contour through ray_radius
    import chainseg.contour as cc

    orig = cc.ray_radius
    cc.ray_radius = lambda *a, **k: np.array([1.0, np.nan, 1.0, 1.0])
    try:
        with pytest.raises(NoIntersection):
            resample(SQUARE, (2, 2), 4)
    finally:
        cc.ray_radius = orig


@pytest.mark.parametrize("radii", [[1, 2], [1, 0, 1], [1, -1, 2], [1, np.nan, 1]])
def test_chain_validation(radii):
    with pytest.raises(InvalidContour):
        PolarChain((0, 0), radii)


def test_contour_validation():
    with pytest.raises(InvalidContour):
        CartesianContour([(0, 0), (1, 1)])
    with pytest.raises(InvalidContour):
        CartesianContour([(0, 0), (1, 0), (1, 0), (0, 1)])
    closed = CartesianContour([(0, 0), (1, 0), (0, 1), (0, 0)])
    assert len(closed) == 3


def test_chain_immutable():
    chain = PolarChain((0, 0), [1, 2, 3])
    with pytest.raises(ValueError):
        chain.radii[0] = 5


def test_ray_normalizes_angle():
    assert Ray((0, 0), -math.pi / 2).angle == pytest.approx(1.5 * math.pi)


def test_to_cartesian_and_areas():
    chain = PolarChain((1, 1), [2, 2, 2, 2])
    poly = to_cartesian(chain)
    np.testing.assert_allclose(poly.points[0], (3, 1))
    np.testing.assert_allclose(poly.points[1], (1, 3), atol=1e-12)
    assert shoelace_area(poly) == pytest.approx(8.0)
    assert chain_area(chain) == pytest.approx(8.0)


def test_shoelace_sign():
    assert shoelace_area(SQUARE) == 16
    assert shoelace_area(SQUARE.points[::-1]) == -16


def test_point_in_polygon():
    assert point_in_polygon((2, 2), SQUARE)
    assert not point_in_polygon((5, 2), SQUARE)
    got = point_in_polygon(np.array([[1, 1], [-1, 1], [3.9, 0.1]]), SQUARE)
    assert got.tolist() == [True, False, True]


def test_segment_intersection():
    X = segment_intersection((2, 0), (0, 1), (1, 0), (0, 2))
    assert X == pytest.approx((2 / 3, 2 / 3))
    assert segment_intersection((0, 0), (1, 0), (0, 1), (1, 1)) is None
    assert segment_intersection((0, 0), (1, 0), (2, 0), (3, 0)) is None
    with pytest.raises(Degenerate):
        segment_intersection((0, 0), (2, 0), (1, 0), (3, 0))
    with pytest.raises(Degenerate):
        segment_intersection((0, 0), (0, 0), (1, 0), (3, 0))


def test_chain_json_roundtrip(tmp_path):
    chain = PolarChain((32, 32), [1.5, 2.25, 3.125, 4.0])
    p = tmp_path / "c.json"
    save_chain(chain, p)
    assert load_chain(p) == chain
    d = json.loads(p.read_text())
    d["n_v"] = 7
    with pytest.raises(InvalidContour):
        PolarChain.from_json(d)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.5, 5.0), min_size=3, max_size=40))
def test_resample_inverts_to_cartesian(radii):
    """Resampling a chain's own polygon at the same n_v reproduces its radii."""
    chain = PolarChain((3.0, -1.0), radii)
    back = resample(to_cartesian(chain), chain.center, chain.n_v)
    np.testing.assert_allclose(back.radii, chain.radii, rtol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.5, 5.0), min_size=3, max_size=40))
def test_chain_area_equals_shoelace(radii):
    chain = PolarChain((0.0, 0.0), radii)
    assert chain_area(chain) == pytest.approx(shoelace_area(to_cartesian(chain)), rel=1e-12)
