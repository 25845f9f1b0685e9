import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from chainseg.contour import PolarChain
from chainseg.errors import SingularDenominator
from chainseg.gradcheck import BACKENDS, run_gradcheck, sample_wedges, wedge_gradcheck
from chainseg.segment_loss import (
    CaseKind, SegmentPair, batch_loss, case_iii_geometry, classify, classify_arrays,
    jm_exact, jm_exact_arrays, jm_loss, jm_paper, mse_loss, paper_num_den, paper_simplified,
    printed_epsilon, wedge_epsilon,
)

from conftest import clip_iou

Q = math.pi / 8
radius = st.floats(0.1, 10.0)
theta_st = st.sampled_from([2 * math.pi / n for n in (5, 8, 16, 32, 64)])


def chain(radii, center=(0.0, 0.0)):
    return PolarChain(center, radii)


# ---------------------------------------------------------------- classify

def test_classify_containment():
    assert classify(SegmentPair(1, 1, 2, 2, Q)).kind is CaseKind.CONTAINED_PRED_IN_GT
    assert classify(SegmentPair(2, 2, 1, 1, Q)).kind is CaseKind.CONTAINED_GT_IN_PRED


def test_classify_crossing_point():
    case = classify(SegmentPair(2, 1, 1, 2, math.pi / 2))
    assert case.kind.crossing
    assert case.crossing == pytest.approx((2 / 3, 2 / 3))


def test_classify_ties_are_containment():
    assert classify(SegmentPair(1, 1, 1, 1, Q)).numeral == "I"
    assert classify(SegmentPair(1, 2, 1, 1, Q)).numeral == "II"
    assert classify(SegmentPair(1, 0.5, 1, 1, Q)).numeral == "I"


@pytest.mark.parametrize("seg,numeral", [
    (SegmentPair(1.0, 1.05, 1.2, 0.9, Q), "III"),   # outside on ray i+1, chord heads back
    (SegmentPair(0.5, 2.0, 1.0, 1.0, Q), "V"),
    (SegmentPair(2.0, 0.5, 1.0, 1.0, Q), "IV"),
    (SegmentPair(1.05, 1.0, 0.9, 1.2, Q), "VI"),
])
def test_classify_crossing_variants(seg, numeral):
    assert classify(seg).numeral == numeral
    assert classify(seg.mirrored()).numeral == {"III": "VI", "VI": "III", "IV": "V", "V": "IV"}[numeral]


@settings(max_examples=200, deadline=None)
@given(radius, radius, radius, radius, theta_st)
def test_classify_total(r, rn, a, an, t):
    assert classify(SegmentPair(r, rn, a, an, t)).kind in CaseKind


# ---------------------------------------------------------------- jm_exact

def test_jm_exact_examples():
    assert jm_exact(SegmentPair(1, 1, 2, 2, Q))[0] == pytest.approx(0.25)
    jm, d = jm_exact(SegmentPair(1.3, 0.7, 1.3, 0.7, Q))
    assert jm == 1.0
    np.testing.assert_array_equal(d, 0)
    assert jm_exact(SegmentPair(2, 1, 1, 2, math.pi / 2))[0] == pytest.approx(0.5)


def test_jm_exact_matches_clipping_oracle(rng):
    n = 3000
    r, rn, a, an = rng.uniform(0.1, 1.0, size=(4, n))
    t = rng.choice([2 * math.pi / 16, 2 * math.pi / 32, 2 * math.pi / 64, math.pi / 3], size=n)
    jm, _ = jm_exact_arrays(r, rn, a, an, t)
    ref = np.array([clip_iou(*v)[0] for v in zip(r, rn, a, an, t)])
    np.testing.assert_allclose(jm, ref, atol=1e-12)
    numerals = set(classify_arrays(r, rn, a, an, t))
    assert numerals == {"I", "II", "III", "IV", "V", "VI"}


@settings(max_examples=200, deadline=None)
@given(radius, radius, radius, radius, theta_st)
def test_jm_exact_properties(r, rn, a, an, t):
    seg = SegmentPair(r, rn, a, an, t)
    jm, _ = jm_exact(seg)
    assert 0.0 <= jm <= 1.0
    assert jm_exact(seg.swapped())[0] == pytest.approx(jm, abs=1e-12)
    assert jm_exact(seg.mirrored())[0] == pytest.approx(jm, abs=1e-12)
    lam = 3.7
    assert jm_exact(SegmentPair(lam * r, lam * rn, lam * a, lam * an, t))[0] == pytest.approx(jm, abs=1e-12)
    if jm == 1.0:
        assert (r, rn) == (a, an)


def test_jm_exact_a_partials_by_finite_difference(rng):
    r, rn, a, an, t = sample_wedges(rng, 300)
    _, d = jm_exact_arrays(r, rn, a, an, t)
    h = 1e-6
    for k, (da, dan) in enumerate([(h, 0), (0, h)]):
        num = (jm_exact_arrays(r, rn, a + da, an + dan, t)[0]
               - jm_exact_arrays(r, rn, a - da, an - dan, t)[0]) / (2 * h)
        np.testing.assert_allclose(d[:, 2 + k], num, rtol=1e-5, atol=1e-8)


# ---------------------------------------------------------------- paper closed forms

def test_paper_case_examples():
    seg = SegmentPair(1, 1, 2, 2, Q)
    p = jm_paper(seg, "I")
    assert p.jm == pytest.approx(1 / 3)
    assert p.epsilon == pytest.approx(2 / 3)
    p2 = jm_paper(seg, "II")
    assert p2.jm == pytest.approx(1 / 3)
    assert printed_epsilon(seg, "II") == pytest.approx(2 / 3)
    # the printed case-I epsilon disagrees with 1 - JM
    assert printed_epsilon(seg, "I") == pytest.approx(4 / 3)
    with pytest.raises(SingularDenominator):
        jm_paper(SegmentPair(1, 2, 2, 1, Q), "V")


def _nonsingular(rng, n):
    r, rn, a, an, t = sample_wedges(rng, n)
    return [SegmentPair(*v) for v in zip(r, rn, a, an, t)]


@pytest.mark.parametrize("numeral", ["I", "IV", "V"])
def test_reduced_forms_match_printed_num_den(rng, numeral):
    for seg in _nonsingular(rng, 1000):
        num, den = paper_num_den(seg, numeral)
        assert num / den == pytest.approx(paper_simplified(seg, numeral), rel=1e-9, abs=1e-9)


def test_case_ii_printed_den_differs_by_one_term(rng):
    """The printed case-II denominator carries 1/2 on its last term; with
    coefficient 1 there, Num/Den equals the reduced form."""
    worst = 0.0
    for seg in _nonsingular(rng, 1000):
        num, den = paper_num_den(seg, "II")
        s, c = math.sin(seg.theta), math.cos(seg.theta)
        fixed = den + 0.5 * seg.r_next * (seg.a_next - seg.r_next) * c * s
        assert num / fixed == pytest.approx(paper_simplified(seg, "II"), rel=1e-9, abs=1e-9)
        worst = max(worst, abs(num / den - paper_simplified(seg, "II")))
    assert worst > 1e-3  # the literal form is not the reduced one


@pytest.mark.parametrize("seg", [SegmentPair(1.0, 1.05, 1.2, 0.9, Q), SegmentPair(1.0, 1.02, 1.3, 0.8, Q)])
def test_case_iii_is_intersection_over_symmetric_difference(seg):
    assert classify(seg).numeral == "III"
    jm, inter, union = clip_iou(seg.r_i, seg.r_next, seg.a_i, seg.a_next, seg.theta)
    geom = case_iii_geometry(seg)
    assert geom.num() == pytest.approx(inter, rel=1e-10)
    assert geom.den() == pytest.approx(union - inter, rel=1e-10)
    assert geom.a + geom.b == pytest.approx(geom.K1)
    assert geom.K2 is None and geom.K3 is None and geom.K4 is None
    assert jm_paper(seg).jm == pytest.approx(inter / (union - inter), rel=1e-10)


def test_case_iii_k1_matches_printed_definition():
    seg = SegmentPair(1.0, 1.05, 1.2, 0.9, Q)
    g = case_iii_geometry(seg)
    K1 = (seg.a_i - seg.a_next * math.cos(seg.theta)) / math.cos(g.theta_ia)
    assert g.K1 == pytest.approx(K1)


def test_paper_backend_matches_trig_form_for_crossing_cases(rng):
    r, rn, a, an, t = sample_wedges(rng, 400)
    for v in zip(r, rn, a, an, t):
        seg = SegmentPair(*v)
        numeral = classify(seg).numeral
        if numeral in ("III", "VI"):
            num, den = paper_num_den(seg, numeral)
            assert jm_paper(seg).jm == pytest.approx(num / den, rel=1e-9)


# ---------------------------------------------------------------- gradients

@pytest.mark.parametrize("backend", BACKENDS)
def test_gradcheck_backends(backend):
    summary = run_gradcheck(backend, trials=500, seed=3)
    assert summary["pass_fraction"] >= 0.99
    assert all(v > 0 for v in summary["cases"].values())


def test_gradcheck_scaled_radii():
    summary = run_gradcheck("exact", trials=200, seed=1, r_max=45.0)
    assert summary["pass_fraction"] >= 0.99


def test_wedge_gradient_accumulates_onto_shared_radii(rng):
    n_v = 8
    pred = rng.uniform(1, 2, n_v)
    gt = rng.uniform(1, 2, n_v)
    theta = 2 * math.pi / n_v
    eps, grad, _ = wedge_epsilon(pred, gt, theta)
    h = 1e-6
    for k in range(n_v):
        p = pred.copy()
        p[k] += h
        e2 = wedge_epsilon(p, gt, theta)[0]
        changed = np.flatnonzero(np.abs(e2 - eps) > 0)
        assert set(changed) <= {k, (k - 1) % n_v}
        p[k] -= 2 * h
        e1 = wedge_epsilon(p, gt, theta)[0]
        assert grad[k] == pytest.approx((e2.sum() - e1.sum()) / (2 * h), rel=1e-5, abs=1e-8)


# ---------------------------------------------------------------- chain losses

def test_jm_loss_examples():
    gl = chain([2, 2, 2, 2])
    pl = chain([1, 1, 1, 1])
    med = chain([3, 3, 3, 3])
    rep = jm_loss(pl, med, gl, med)
    assert rep.value == pytest.approx(3.0)
    assert rep.value == pytest.approx(rep.per_segment.sum(), abs=1e-9)
    assert rep.grad.shape == (8,)
    assert rep.per_segment.shape == (4, 2)
    paper = jm_loss(pl, med, gl, med, backend="paper")
    # lumen wedges are case I; equal media wedges are singular and fall back
    assert paper.value == pytest.approx(4 * 2 / 3)
    assert paper.fallbacks == 4
    with pytest.raises(SingularDenominator):
        jm_loss(pl, med, gl, med, backend="paper", fallback=False)


def test_jm_loss_zero_at_match():
    c = chain([1.0, 1.5, 2.0, 1.2, 0.9])
    m = chain([3.0, 3.5, 4.0, 3.2, 2.9])
    rep = jm_loss(c, m, c, m)
    assert rep.value == 0
    np.testing.assert_array_equal(rep.grad, 0)
    d = rep.to_json()
    assert set(d) == {"value", "grad", "per_segment", "backend", "fallbacks"}


def test_jm_loss_rejects_mismatched_chains():
    with pytest.raises(ValueError):
        jm_loss(chain([1, 1, 1]), chain([1, 1, 1]), chain([1, 1, 1, 1]), chain([1, 1, 1]))
    with pytest.raises(ValueError):
        jm_loss(chain([1, 1, 1]), chain([1, 1, 1]), chain([1, 1, 1], (1, 0)), chain([1, 1, 1]))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.2, 5.0), min_size=5, max_size=5), st.lists(st.floats(0.2, 5.0), min_size=5, max_size=5))
def test_jm_loss_nonnegative_and_zero_iff_equal(p, g):
    rep = jm_loss(chain(p), chain(g), chain(g), chain(g))
    assert rep.value >= 0
    assert (rep.value == 0) == (list(p) == list(g))


def test_mse_examples():
    rep = mse_loss([2, 2], [5, 5], [1, 1], [5, 5])
    assert rep.value == 2
    np.testing.assert_array_equal(rep.grad, [2, 2, 0, 0])
    assert mse_loss([3], [5], [1], [2]).value == 13
    c = chain([1, 2, 3])
    assert mse_loss(c, c, c, c).value == 0


def test_batch_loss_agrees_with_chain_loss(rng):
    n_v = 16
    pred = rng.uniform(1, 3, (3, 2 * n_v))
    gt = rng.uniform(1, 3, (3, 2 * n_v))
    for kind, backend in (("jm-exact", "exact"), ("jm-paper", "paper")):
        vals, grad, _ = batch_loss(pred, gt, 2 * math.pi / n_v, kind)
        for b in range(3):
            rep = jm_loss(chain(pred[b, :n_v]), chain(pred[b, n_v:]), chain(gt[b, :n_v]), chain(gt[b, n_v:]), backend)
            assert vals[b] == pytest.approx(rep.value)
            np.testing.assert_allclose(grad[b], rep.grad)
    vals, grad, _ = batch_loss(pred, gt, 2 * math.pi / n_v, "mse")
    np.testing.assert_allclose(grad, 2 * (pred - gt))
