"""Per-wedge Jaccard loss for polar chains, plus the radial MSE loss.

Every wedge ``i`` is a pair of triangles sharing the apex at the chain
center: the predicted triangle ``(0, r_i, r_{i+1})`` and the ground-truth
triangle ``(0, a_i, a_{i+1})``, both spanning the angle ``theta``. The loss is
``sum_i (1 - JM_i)`` over the lumen and media chains.

Two backends compute ``JM_i``:

``exact``
    True intersection-over-union of the two triangles, from closed-form
    clipping. Minimum 0 exactly at ``r == a``. Default for training.

``paper``
    The six closed forms published for this loss, evaluated per case. Four
    of them reduce to ``r_i r_{i+1} / (a_i a_{i+1} - r_i r_{i+1})`` and are
    singular on ``a_i a_{i+1} == r_i r_{i+1}``; the two crossing cases are
    evaluated from the crossing geometry (see :class:`CaseIIIGeometry`).
    ``epsilon`` is taken as ``1 - JM`` for every case.

Local wedge frame used throughout: apex at the origin, ray ``i`` on +x, ray
``i+1`` at angle ``theta``. Predicted vertices are R=(r_i, 0) and
S=r_{i+1}(cos, sin); ground-truth vertices are T=(a_i, 0) and
W=a_{i+1}(cos, sin).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .contour import RADIUS_FLOOR, segment_intersection
from .errors import SingularDenominator

SINGULAR_TOL = 1e-9


class CaseKind(enum.Enum):
    """Wedge configurations, tagged with the numeral used in the derivation.

    "Right" is ray ``i``, "left" is ray ``i+1`` (CCW). In the crossing cases
    ``*_OVER`` names the ray on which the predicted vertex lies outside the
    ground truth. ``*_OBTUSE`` marks a predicted chord that, leaving its inner
    vertex, heads back toward the apex, so the sub-triangle cut off at that
    vertex is obtuse.
    """

    CONTAINED_PRED_IN_GT = "I"
    CONTAINED_GT_IN_PRED = "II"
    CROSS_RIGHT_OVER_OBTUSE = "VI"
    CROSS_RIGHT_OVER = "IV"
    CROSS_LEFT_OVER = "V"
    CROSS_LEFT_OVER_OBTUSE = "III"

    @property
    def numeral(self):
        return self.value

    @property
    def crossing(self):
        return self.value not in ("I", "II")

    @classmethod
    def from_numeral(cls, numeral):
        return cls(numeral.upper())


@dataclass(frozen=True)
class SegmentPair:
    r_i: float
    r_next: float
    a_i: float
    a_next: float
    theta: float

    def __post_init__(self):
        if min(self.r_i, self.r_next, self.a_i, self.a_next) <= 0:
            raise ValueError("all four radii must be positive")
        if not 0 < self.theta < math.pi:
            raise ValueError(f"theta must lie in (0, pi), got {self.theta}")

    def arrays(self):
        return tuple(np.array([v], dtype=float) for v in
                     (self.r_i, self.r_next, self.a_i, self.a_next, self.theta))

    def vertices(self):
        """(R, S, T, W) in the local wedge frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return ((self.r_i, 0.0), (self.r_next * c, self.r_next * s),
                (self.a_i, 0.0), (self.a_next * c, self.a_next * s))

    def swapped(self):
        """Same wedge with prediction and ground truth exchanged."""
        return SegmentPair(self.a_i, self.a_next, self.r_i, self.r_next, self.theta)

    def mirrored(self):
        """Same wedge reflected so the two rays trade places."""
        return SegmentPair(self.r_next, self.r_i, self.a_next, self.a_i, self.theta)


@dataclass(frozen=True)
class SegmentCase:
    kind: CaseKind
    crossing: Optional[tuple] = None

    @property
    def numeral(self):
        return self.kind.numeral


# --------------------------------------------------------------------------
# classification


def classify_arrays(r, rn, a, an, theta):
    """Vectorized case numerals ("I".."VI") for arrays of wedges."""
    c = np.cos(theta)
    out = np.empty(np.broadcast(r, rn, a, an, theta).shape, dtype="<U3")
    pred_in = (r <= a) & (rn <= an)
    gt_in = (r >= a) & (rn >= an) & ~pred_in
    left_over = (r < a) & (rn > an)
    right_over = ~(pred_in | gt_in | left_over)
    out[pred_in] = "I"
    out[gt_in] = "II"
    lo_obtuse = rn * c < r
    ro_obtuse = r * c < rn
    out[left_over & lo_obtuse] = "III"
    out[left_over & ~lo_obtuse] = "V"
    out[right_over & ro_obtuse] = "VI"
    out[right_over & ~ro_obtuse] = "IV"
    return out


def classify(seg):
    """Case of a wedge, with the chord crossing point when the chords cross."""
    kind = CaseKind(str(classify_arrays(*seg.arrays())[0]))
    crossing = None
    if kind.crossing:
        R, S, T, W = seg.vertices()
        crossing = segment_intersection(R, S, T, W)
        if crossing is None:
            crossing = tuple(v.item() for v in _crossing_point(*seg.arrays())[0:2])
    return SegmentCase(kind, crossing)


# --------------------------------------------------------------------------
# exact IoU


def _crossing_point(r, rn, a, an, theta):
    """Crossing of chord R-S with chord T-W and its partials in (r, rn).

    The crossing sits at ``R + sigma (S - R)`` with
    ``sigma = an (a - r) / (a rn - an r)``.
    """
    c, s = np.cos(theta), np.sin(theta)
    D = a * rn - an * r
    sigma = an * (a - r) / D
    sig_r = a * an * (an - rn) / D ** 2
    sig_rn = -a * an * (a - r) / D ** 2
    dx = rn * c - r
    x = r + sigma * dx
    y = sigma * rn * s
    x_r = 1 - sigma + sig_r * dx
    x_rn = sigma * c + sig_rn * dx
    y_r = sig_r * rn * s
    y_rn = (sigma + sig_rn * rn) * s
    return x, y, x_r, x_rn, y_r, y_rn


def _exact_r(r, rn, a, an, theta):
    """IoU and its partials w.r.t. the predicted radii (r, rn)."""
    r, rn, a, an, theta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, rn, a, an, theta)))
    s = np.sin(theta)
    c = np.cos(theta)
    jm = np.empty(r.shape)
    dr = np.empty(r.shape)
    drn = np.empty(r.shape)

    pred_in = (r <= a) & (rn <= an)
    gt_in = (r >= a) & (rn >= an) & ~pred_in
    m = pred_in
    jm[m] = r[m] * rn[m] / (a[m] * an[m])
    dr[m] = jm[m] / r[m]
    drn[m] = jm[m] / rn[m]
    m = gt_in
    jm[m] = a[m] * an[m] / (r[m] * rn[m])
    dr[m] = -jm[m] / r[m]
    drn[m] = -jm[m] / rn[m]

    # exact match of both radii: pick the zero subgradient
    tie = (r == a) & (rn == an)
    dr[tie] = 0.0
    drn[tie] = 0.0

    m = ~(pred_in | gt_in)
    if np.any(m):
        R, Rn, A, An, S, C = r[m], rn[m], a[m], an[m], s[m], c[m]
        x, y, x_r, x_rn, y_r, y_rn = _crossing_point(R, Rn, A, An, theta[m])
        inner_right = R < A
        m0 = np.where(inner_right, R, A)
        m1 = np.where(inner_right, An, Rn)
        m0_r = inner_right.astype(float)
        m1_rn = (~inner_right).astype(float)
        # intersection = quad (apex, inner vertex on ray i, X, inner vertex on ray i+1)
        lever = x * S - y * C
        inter = 0.5 * (m0 * y + m1 * lever)
        i_r = 0.5 * (m0_r * y + m0 * y_r + m1 * (x_r * S - y_r * C))
        i_rn = 0.5 * (m0 * y_rn + m1_rn * lever + m1 * (x_rn * S - y_rn * C))
        pred = 0.5 * R * Rn * S
        gt = 0.5 * A * An * S
        union = pred + gt - inter
        u_r = 0.5 * Rn * S - i_r
        u_rn = 0.5 * R * S - i_rn
        jm[m] = inter / union
        dr[m] = (i_r * union - inter * u_r) / union ** 2
        drn[m] = (i_rn * union - inter * u_rn) / union ** 2
    return jm, dr, drn


def jm_exact_arrays(r, rn, a, an, theta):
    """Vectorized exact IoU with partials (d/dr_i, d/dr_next, d/da_i, d/da_next)."""
    jm, dr, drn = _exact_r(r, rn, a, an, theta)
    # IoU is symmetric in prediction <-> ground truth
    _, da, dan = _exact_r(a, an, r, rn, theta)
    return jm, np.stack([dr, drn, da, dan], axis=-1)


def jm_exact(seg):
    """Exact IoU of the two wedge triangles and its four partials."""
    jm, d = jm_exact_arrays(*seg.arrays())
    return float(jm[0]), d[0]


# --------------------------------------------------------------------------
# published closed forms


@dataclass(frozen=True)
class CaseIIIGeometry:
    """Crossing-case lengths and angles, in a frame where the prediction is
    inside on ray i and outside on ray i+1 (case VI is handled mirrored).

    a = |XW|, b = |TX|, c = |XS|, d = |RX| for the crossing point X; P is the
    projection of ``a`` on ray i. theta_ia is the angle at T between T->apex
    and T->W; theta_ic the angle at R between ray i and R->S; theta_ib the
    angle of chord R-S from the normal of ray i; theta_i0 the wedge angle.
    theta_id has no stated definition; its role in the intersection area
    requires theta_id == theta_ic. K2..K4 have none either and are left as
    None.
    """

    a: float
    b: float
    c: float
    d: float
    P: float
    theta_ia: float
    theta_ib: float
    theta_ic: float
    theta_id: float
    theta_i0: float
    K1: float
    r_i: float
    a_i: float
    a_next: float
    K2: Optional[float] = None
    K3: Optional[float] = None
    K4: Optional[float] = None

    def num(self):
        """Numerator as printed (trigonometric form)."""
        return (0.5 * self.a_next ** 2 * math.cos(self.theta_i0) * math.sin(self.theta_i0)
                + 0.5 * self.P * self.a * math.sin(self.theta_ia)
                + self.P * self.d * math.sin(self.theta_id)
                - 0.5 * self.d ** 2 * math.cos(self.theta_id) * math.sin(self.theta_id))

    def den(self, numeral="III"):
        """Denominator as printed; case VI shortens the first base by d cos(theta_ic)."""
        base = self.a_i - self.r_i
        if numeral == "VI":
            base -= self.d * math.cos(self.theta_ic)
        return (0.5 * base * self.d * math.sin(self.theta_ic)
                + 0.5 * self.c * self.a * math.sin(math.pi - (self.theta_ic + self.theta_ia)))


def _crossing_frame(seg, numeral):
    """Orient a crossing wedge so the prediction is inside on ray i."""
    if numeral in ("III", "V"):
        return seg, False
    return seg.mirrored(), True


def case_iii_geometry(seg, numeral=None):
    """Lengths/angles of the crossing construction for a crossing wedge."""
    numeral = numeral or classify(seg).numeral
    if numeral not in ("III", "IV", "V", "VI"):
        raise ValueError(f"case {numeral} has no crossing geometry")
    frame, _ = _crossing_frame(seg, numeral)
    R, S, T, W = (np.array(p) for p in frame.vertices())
    X = segment_intersection(R, S, T, W)
    if X is None:
        X = [v.item() for v in _crossing_point(*frame.arrays())[:2]]
    X = np.asarray(X, dtype=float)
    a = float(np.linalg.norm(X - W))
    b = float(np.linalg.norm(T - X))
    c = float(np.linalg.norm(S - X))
    d = float(np.linalg.norm(X - R))
    theta_ia = math.atan2(W[1], T[0] - W[0])
    theta_ic = math.atan2(S[1], S[0] - R[0])
    return CaseIIIGeometry(
        a=a, b=b, c=c, d=d, P=a * math.cos(theta_ia),
        theta_ia=theta_ia, theta_ib=math.pi / 2 - theta_ic, theta_ic=theta_ic,
        theta_id=theta_ic, theta_i0=frame.theta, K1=a + b,
        r_i=frame.r_i, a_i=frame.a_i, a_next=frame.a_next,
    )


def _crossing_num_den(r, rn, a, an, theta, numeral):
    """Printed crossing-case Num/Den written in crossing-point coordinates,
    with partials. Inputs are already in the inside-on-ray-i frame."""
    c, s = np.cos(theta), np.sin(theta)
    x, y, x_r, x_rn, y_r, y_rn = _crossing_point(r, rn, a, an, theta)
    wx, wy = an * c, an * s
    num = 0.5 * wx * wy + 0.5 * (x - wx) * (wy - y) + (x - wx) * y - 0.5 * (x - r) * y
    num_x = 0.5 * wy
    num_y = 0.5 * (r - wx)
    num_r = num_x * x_r + num_y * y_r + 0.5 * y
    num_rn = num_x * x_rn + num_y * y_rn
    outer = 0.5 * (rn - an) * (s * x - c * y)
    outer_x = 0.5 * (rn - an) * s
    outer_y = -0.5 * (rn - an) * c
    outer_rn_explicit = 0.5 * (s * x - c * y)
    if numeral == "VI":
        den = 0.5 * (a - x) * y + outer
        den_x = -0.5 * y + outer_x
        den_y = 0.5 * (a - x) + outer_y
        den_r_explicit = 0.0
    else:
        den = 0.5 * (a - r) * y + outer
        den_x = outer_x
        den_y = 0.5 * (a - r) + outer_y
        den_r_explicit = -0.5 * y
    den_r = den_x * x_r + den_y * y_r + den_r_explicit
    den_rn = den_x * x_rn + den_y * y_rn + outer_rn_explicit
    return num, den, (num_r, num_rn), (den_r, den_rn)


def _paper_arrays(r, rn, a, an, theta, numerals):
    """JM, epsilon, d eps/dr, d eps/drn and a singular mask for given cases."""
    r, rn, a, an, theta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, rn, a, an, theta)))
    numerals = np.broadcast_to(np.asarray(numerals), r.shape)
    jm = np.full(r.shape, np.nan)
    er = np.full(r.shape, np.nan)
    ern = np.full(r.shape, np.nan)
    singular = np.zeros(r.shape, dtype=bool)

    simple = np.isin(numerals, ("I", "II", "IV", "V"))
    if np.any(simple):
        R, Rn, A, An = r[simple], rn[simple], a[simple], an[simple]
        D = A * An - R * Rn
        bad = np.abs(D) < SINGULAR_TOL
        Ds = np.where(bad, 1.0, D)
        jm[simple] = np.where(bad, np.nan, R * Rn / Ds)
        er[simple] = np.where(bad, np.nan, -Rn * A * An / Ds ** 2)
        ern[simple] = np.where(bad, np.nan, -R * A * An / Ds ** 2)
        singular[simple] = bad

    for numeral in ("III", "VI"):
        m = numerals == numeral
        if not np.any(m):
            continue
        # case VI is evaluated in the mirrored frame (rays swapped)
        if numeral == "VI":
            args = (rn[m], r[m], an[m], a[m], theta[m])
        else:
            args = (r[m], rn[m], a[m], an[m], theta[m])
        num, den, (n0, n1), (d0, d1) = _crossing_num_den(*args, numeral)
        bad = np.abs(den) < SINGULAR_TOL
        dens = np.where(bad, 1.0, den)
        g0 = -(n0 * dens - num * d0) / dens ** 2
        g1 = -(n1 * dens - num * d1) / dens ** 2
        if numeral == "VI":
            g0, g1 = g1, g0
        jm[m] = np.where(bad, np.nan, num / dens)
        er[m] = np.where(bad, np.nan, g0)
        ern[m] = np.where(bad, np.nan, g1)
        singular[m] = bad
    return jm, 1.0 - jm, er, ern, singular


@dataclass(frozen=True)
class PaperJM:
    jm: float
    epsilon: float
    grad: np.ndarray  # (d eps/dr_i, d eps/dr_next)
    case: CaseKind


def jm_paper(seg, case=None):
    """Closed-form JM of the given case (classified if omitted).

    Raises:
        SingularDenominator: the case's denominator is below 1e-9 in size.
    """
    if case is None:
        kind = classify(seg).kind
    elif isinstance(case, SegmentCase):
        kind = case.kind
    elif isinstance(case, CaseKind):
        kind = case
    else:
        kind = CaseKind.from_numeral(str(case))
    jm, eps, er, ern, singular = _paper_arrays(*seg.arrays(), kind.numeral)
    if singular[0]:
        raise SingularDenominator(f"case {kind.numeral} denominator vanishes for {seg}")
    return PaperJM(float(jm[0]), float(eps[0]), np.array([er[0], ern[0]]), kind)


def paper_num_den(seg, case):
    """Numerator and denominator of a case exactly as printed.

    Cases I, II, IV and V use the printed expressions (the case-I ``r_1``
    read as ``r_{i+1}``, the case-V ``r_{i+11}`` as ``r_{i+1}``). Cases III
    and VI use :class:`CaseIIIGeometry`.
    """
    numeral = case.numeral if isinstance(case, (CaseKind, SegmentCase)) else str(case).upper()
    r, rn, a, an, t = seg.r_i, seg.r_next, seg.a_i, seg.a_next, seg.theta
    s, c = math.sin(t), math.cos(t)
    if numeral == "I":
        num = 0.5 * rn ** 2 * c * s - 0.5 * (rn * c - r) * rn * s
        den = (0.5 * an ** 2 * s * c - 0.5 * (an * c - a) * an * s
               - 0.5 * rn ** 2 * s * c + 0.5 * (rn * c - r) * rn * s)
    elif numeral == "II":
        num = 0.5 * r * rn * s
        den = (0.5 * rn * s * (rn * c - r) + 0.5 * an * s * (a - an * c)
               + 0.5 * (an - rn) ** 2 * s * c + 0.5 * rn * (an - rn) * c * s)
    elif numeral == "IV":
        num = r * rn * s
        den = an ** 2 * s * c - r * rn * s - an * s * (an * c - a)
    elif numeral == "V":
        num = 0.5 * r * rn * s
        den = 0.5 * a * an * s - 0.5 * r * rn * s
    elif numeral in ("III", "VI"):
        geom = case_iii_geometry(seg, numeral)
        return geom.num(), geom.den(numeral)
    else:
        raise ValueError(f"unknown case {numeral!r}")
    return num, den


def paper_simplified(seg, case):
    """The reduced JM printed for cases I, II, IV, V."""
    numeral = case.numeral if isinstance(case, (CaseKind, SegmentCase)) else str(case).upper()
    if numeral not in ("I", "II", "IV", "V"):
        raise ValueError(f"case {numeral} has no reduced form")
    D = seg.a_i * seg.a_next - seg.r_i * seg.r_next
    if abs(D) < SINGULAR_TOL:
        raise SingularDenominator(f"a_i a_next - r_i r_next = {D}")
    if numeral == "I":
        return seg.r_i * seg.r_next / D
    return -seg.r_i * seg.r_next / (seg.r_i * seg.r_next - seg.a_i * seg.a_next)


def printed_epsilon(seg, case):
    """The epsilon expression printed beside each case, for audit only.

    Case I's printed form is not ``1 - JM_I``; training uses ``1 - JM``.
    """
    numeral = case.numeral if isinstance(case, (CaseKind, SegmentCase)) else str(case).upper()
    r, rn, a, an = seg.r_i, seg.r_next, seg.a_i, seg.a_next
    D = r * rn - a * an
    if numeral in ("I", "II", "IV", "V") and abs(D) < SINGULAR_TOL:
        raise SingularDenominator(f"r_i r_next - a_i a_next = {D}")
    if numeral == "I":
        return -a * an / D
    if numeral in ("II", "IV", "V"):
        return (2 * r * rn - a * an) / D
    return jm_paper(seg, numeral).epsilon


# --------------------------------------------------------------------------
# chain-level losses


@dataclass
class LossReport:
    value: float
    grad: np.ndarray          # (2 * n_v,): lumen radii then media radii
    per_segment: np.ndarray   # (n_v, 2): [lumen eps_i, media eps_i]
    backend: str
    fallbacks: int = 0

    def to_json(self, include_grad=True):
        d = {"value": float(self.value), "backend": self.backend,
             "per_segment": self.per_segment.tolist(), "fallbacks": int(self.fallbacks)}
        if include_grad:
            d["grad"] = self.grad.tolist()
        return d


def wedge_epsilon(pred, gt, theta, backend="exact", fallback=True):
    """Per-wedge epsilon and per-radius gradient for stacked chains.

    Args:
        pred, gt: arrays (..., n_v) of radii.
        theta: wedge angle.
        backend: "exact" or "paper".
        fallback: for the paper backend, replace singular wedges by the exact
            value; if False a SingularDenominator is raised instead.

    Returns:
        (eps, grad, n_fallbacks) with eps of shape (..., n_v) (wedge i spans
        rays i and i+1 mod n_v) and grad of shape (..., n_v).
    """
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    r, rn = pred, np.roll(pred, -1, axis=-1)
    a, an = gt, np.roll(gt, -1, axis=-1)
    n_fallbacks = 0
    if backend == "exact":
        jm, dr, drn = _exact_r(r, rn, a, an, theta)
        eps, er, ern = 1.0 - jm, -dr, -drn
    elif backend == "paper":
        numerals = classify_arrays(r, rn, a, an, theta)
        _, eps, er, ern, singular = _paper_arrays(r, rn, a, an, theta, numerals)
        if np.any(singular):
            if not fallback:
                raise SingularDenominator(f"{int(singular.sum())} singular wedge(s)")
            n_fallbacks = int(singular.sum())
            jm, dr, drn = _exact_r(r[singular], rn[singular], a[singular], an[singular], theta)
            eps[singular] = 1.0 - jm
            er[singular] = -dr
            ern[singular] = -drn
    else:
        raise ValueError(f"unknown backend {backend!r}")
    # radius k sits in wedges k (as r_i) and k-1 (as r_next)
    grad = er + np.roll(ern, 1, axis=-1)
    return eps, grad, n_fallbacks


def _check_chains(*chains):
    n = chains[0].n_v
    center = chains[0].center
    for ch in chains[1:]:
        if ch.n_v != n:
            raise ValueError("all chains must share n_v")
        if not np.allclose(ch.center, center):
            raise ValueError("all chains must share the same center")


def jm_loss(pred_lumen, pred_media, gt_lumen, gt_media, backend="exact", fallback=True):
    """Sum of ``1 - JM_i`` over the lumen and media wedges."""
    _check_chains(pred_lumen, pred_media, gt_lumen, gt_media)
    pred = np.stack([pred_lumen.radii, pred_media.radii])
    gt = np.stack([gt_lumen.radii, gt_media.radii])
    eps, grad, nf = wedge_epsilon(pred, gt, pred_lumen.theta, backend, fallback)
    return LossReport(float(eps.sum()), grad.reshape(-1), eps.T.copy(), backend, nf)


def _radii(x):
    return x.radii if hasattr(x, "radii") else np.atleast_1d(np.asarray(x, dtype=float))


def mse_loss(pred_lumen, pred_media, gt_lumen, gt_media):
    """Sum of squared radial errors over both chains.

    Accepts chains or bare radius arrays (any length, including 1 or 2).
    """
    pl, pm, gl, gm = (_radii(x) for x in (pred_lumen, pred_media, gt_lumen, gt_media))
    if pl.shape != gl.shape or pm.shape != gm.shape or pl.shape != pm.shape:
        raise ValueError("prediction and ground truth must share n_v")
    diff = np.stack([pl - gl, pm - gm])
    return LossReport(float((diff ** 2).sum()), 2 * diff.reshape(-1), (diff ** 2).T.copy(), "mse")


def batch_loss(pred, gt, theta, kind="jm-exact"):
    """Loss per sample and d loss / d pred for training batches.

    ``pred`` and ``gt`` have shape (B, 2 * n_v). Returns (values (B,), grad
    (B, 2 * n_v), n_fallbacks). For the JM kinds, radii below the chain
    floor are scored at the floor and their gradient is passed through
    unchanged, so a collapsed radius can still be pushed back out.
    """
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if kind == "mse":
        diff = pred - gt
        return (diff ** 2).sum(axis=1), 2 * diff, 0
    backend = {"jm-exact": "exact", "jm-paper": "paper"}[kind]
    B, n2 = pred.shape
    shape = (B, 2, n2 // 2)
    pred = np.maximum(pred, RADIUS_FLOOR)
    eps, grad, nf = wedge_epsilon(pred.reshape(shape), gt.reshape(shape), 2 * math.pi / (n2 // 2), backend)
    return eps.reshape(B, -1).sum(axis=1), grad.reshape(B, n2), nf
