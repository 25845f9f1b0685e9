"""Audit of the published per-case closed forms against exact wedge IoU."""

from __future__ import annotations

import math

import numpy as np

from .gradcheck import THETAS
from .segment_loss import (
    SINGULAR_TOL, SegmentPair, _paper_arrays, classify_arrays, jm_exact_arrays, paper_num_den,
    paper_simplified, printed_epsilon,
)

CASES = ("I", "II", "III", "IV", "V", "VI")
REDUCED = ("I", "II", "IV", "V")


def _sample(rng, n, thetas=THETAS):
    r, rn, a, an = rng.uniform(0.1, 1.0, size=(4, n))
    theta = rng.choice(thetas, size=n)
    return r, rn, a, an, theta


def _stats(x):
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    if x.size == 0:
        return {"n": 0}
    return {"n": int(x.size), "mean": float(x.mean()), "max": float(x.max()),
            "median": float(np.median(x))}


def num_den_consistency(seg, numeral):
    """|Num/Den - reduced form| for one wedge (cases I, II, IV, V)."""
    num, den = paper_num_den(seg, numeral)
    return abs(num / den - paper_simplified(seg, numeral))


def errata_report(trials=10000, seed=0):
    """Per-case discrepancy tables between the published forms and the oracle.

    For each case: how often it occurs, how often its denominator is
    singular, the gap between the published JM and the exact IoU, the gap
    between the published JM and intersection over symmetric difference, and
    the printed-epsilon vs ``1 - JM`` gap. Cases I, II, IV and V also get the
    agreement between their printed Num/Den and their reduced forms.
    """
    rng = np.random.default_rng(seed)
    r, rn, a, an, theta = _sample(rng, trials)
    numerals = classify_arrays(r, rn, a, an, theta)
    exact, _ = jm_exact_arrays(r, rn, a, an, theta)
    paper, _, _, _, singular = _paper_arrays(r, rn, a, an, theta, numerals)
    sym_diff_ratio = exact / (1 - exact)
    rows = {}
    for case in CASES:
        m = numerals == case
        ok = m & ~singular
        row = {
            "count": int(m.sum()),
            "singular": int((m & singular).sum()),
            "abs_paper_minus_iou": _stats(np.abs(paper[ok] - exact[ok])),
            "abs_paper_minus_inter_over_symdiff": _stats(np.abs(paper[ok] - sym_diff_ratio[ok])),
        }
        idx = np.flatnonzero(ok)[:500]
        segs = [SegmentPair(r[i], rn[i], a[i], an[i], theta[i]) for i in idx]
        eps_gap = [abs(printed_epsilon(s, case) - (1 - p)) for s, p in zip(segs, paper[idx])]
        row["abs_printed_eps_minus_one_minus_jm"] = _stats(eps_gap)
        if case in REDUCED:
            gaps = [num_den_consistency(s, case) for s in segs]
            row["num_den_vs_reduced"] = {**_stats(gaps), "within_1e-9": bool(max(gaps, default=0) <= 1e-9)}
        rows[case] = row
    example = SegmentPair(1, 1, 2, 2, math.pi / 8)
    return {
        "trials": trials, "seed": seed, "thetas": list(THETAS), "singular_tol": SINGULAR_TOL,
        "cases": rows,
        "worked_example": {
            "r": [1, 1], "a": [2, 2], "theta": math.pi / 8,
            "case": str(classify_arrays(*example.arrays())[0]),
            "paper_jm": paper_simplified(example, "I"),
            "exact_iou": float(jm_exact_arrays(*example.arrays())[0][0]),
            "printed_epsilon_case_I": printed_epsilon(example, "I"),
        },
    }


def to_markdown(report):
    lines = [
        f"Trials: {report['trials']} (seed {report['seed']})",
        "",
        "| case | count | singular | mean abs(closed form - IoU) | max abs(closed form - IoU) "
        "| max abs(closed form - I/(U-I)) | printed eps gap | Num/Den vs reduced |",
        "|---|---|---|---|---|---|---|---|",
    ]
    for case, row in report["cases"].items():
        iou = row["abs_paper_minus_iou"]
        sd = row["abs_paper_minus_inter_over_symdiff"]
        eg = row["abs_printed_eps_minus_one_minus_jm"]
        nd = row.get("num_den_vs_reduced")
        nd_text = "n/a" if nd is None else f"{nd.get('max', 0):.3g} ({'ok' if nd['within_1e-9'] else 'MISMATCH'})"
        lines.append(
            f"| {case} | {row['count']} | {row['singular']} | {iou.get('mean', float('nan')):.4g} "
            f"| {iou.get('max', float('nan')):.4g} | {sd.get('max', float('nan')):.3g} "
            f"| {eg.get('max', float('nan')):.3g} | {nd_text} |")
    ex = report["worked_example"]
    lines += ["", f"Worked example r={ex['r']}, a={ex['a']}: case {ex['case']}, published JM "
                  f"{ex['paper_jm']:.6f}, exact IoU {ex['exact_iou']:.6f}, printed epsilon "
                  f"{ex['printed_epsilon_case_I']:.6f}"]
    return "\n".join(lines) + "\n"
