"""Finite-difference checks of the analytic loss and model gradients."""

from __future__ import annotations

import math

import numpy as np

from . import predictor
from .segment_loss import _crossing_point, _paper_arrays, classify_arrays, jm_exact_arrays, SINGULAR_TOL

THETAS = (2 * math.pi / 16, 2 * math.pi / 32, 2 * math.pi / 64)
BACKENDS = ("exact", "paper", "mse")


def rel_err(analytic, numeric, floor=1e-8):
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)


def _interior(r, rn, a, an, theta, margin):
    """Mask of wedges at least ``margin`` away from every case boundary."""
    ok = (np.abs(r - a) > margin) & (np.abs(rn - an) > margin)
    ok &= np.abs(a * an - r * rn) > margin * max(float(np.max(a)), 1.0)
    numerals = classify_arrays(r, rn, a, an, theta)
    crossing = ~np.isin(numerals, ("I", "II"))
    c = np.cos(theta)
    # obtuse/acute switch of cases III-VI
    ok &= ~crossing | ((np.abs(rn * c - r) > margin) & (np.abs(r * c - rn) > margin))
    with np.errstate(divide="ignore", invalid="ignore"):
        x, y = _crossing_point(r, rn, a, an, theta)[:2]
        dist_ray_i = np.abs(y)
        dist_ray_n = np.abs(x * np.sin(theta) - y * np.cos(theta))
    ok &= ~crossing | ((dist_ray_i > margin) & (dist_ray_n > margin))
    return ok


def sample_wedges(rng, n, r_max=1.0, lo=0.1, margin=1e-2, thetas=THETAS):
    """``n`` random wedges with radii in [lo, 1] * r_max, away from case boundaries.

    Returns arrays (r, rn, a, an, theta).
    """
    out = [[] for _ in range(5)]
    have = 0
    while have < n:
        m = 4 * (n - have) + 16
        r, rn, a, an = rng.uniform(lo * r_max, r_max, size=(4, m))
        theta = rng.choice(thetas, size=m)
        keep = _interior(r, rn, a, an, theta, margin * r_max)
        for lst, v in zip(out, (r, rn, a, an, theta)):
            lst.append(v[keep])
        have += int(keep.sum())
    return tuple(np.concatenate(v)[:n] for v in out)


def _eps_and_grad(backend, r, rn, a, an, theta):
    if backend == "exact":
        jm, d = jm_exact_arrays(r, rn, a, an, theta)
        return 1 - jm, -d[..., 0], -d[..., 1]
    if backend == "paper":
        numerals = classify_arrays(r, rn, a, an, theta)
        _, eps, er, ern, _ = _paper_arrays(r, rn, a, an, theta, numerals)
        return eps, er, ern
    if backend == "mse":
        return (r - a) ** 2 + (rn - an) ** 2, 2 * (r - a), 2 * (rn - an)
    raise ValueError(f"unknown backend {backend!r}")


def wedge_gradcheck(backend, r, rn, a, an, theta, h):
    """Relative errors of d eps/dr_i and d eps/dr_next against central differences.

    The case is frozen at the unperturbed point so both stencil sides use the
    same closed form. Returns an (n, 2) array.
    """
    if backend == "paper":
        numerals = classify_arrays(r, rn, a, an, theta)

        def f(r_, rn_):
            return _paper_arrays(r_, rn_, a, an, theta, numerals)[1]

        _, _, er, ern, _ = _paper_arrays(r, rn, a, an, theta, numerals)
    else:
        def f(r_, rn_):
            return _eps_and_grad(backend, r_, rn_, a, an, theta)[0]

        _, er, ern = _eps_and_grad(backend, r, rn, a, an, theta)
    num_r = (f(r + h, rn) - f(r - h, rn)) / (2 * h)
    num_rn = (f(r, rn + h) - f(r, rn - h)) / (2 * h)
    return np.stack([rel_err(er, num_r), rel_err(ern, num_rn)], axis=-1)


def run_gradcheck(backend="exact", trials=1000, eps=None, tol=1e-4, seed=0, r_max=1.0):
    """Summary dict of a seeded gradient check over interior wedges.

    ``eps`` is the finite-difference step; default ``1e-5 * r_max``. A trial
    passes when both of its partials are within ``tol``.
    """
    rng = np.random.default_rng(seed)
    r, rn, a, an, theta = sample_wedges(rng, trials, r_max=r_max)
    h = 1e-5 * r_max if eps is None else eps
    errs = wedge_gradcheck(backend, r, rn, a, an, theta, h)
    if backend == "paper":
        # off the singular set only
        ok = np.abs(a * an - r * rn) >= SINGULAR_TOL
        errs = errs[ok]
    worst = errs.max(axis=1)
    passed = int(np.count_nonzero(worst < tol))
    numerals = classify_arrays(r, rn, a, an, theta)
    cases = {k: int(np.count_nonzero(numerals == k)) for k in ("I", "II", "III", "IV", "V", "VI")}
    return {
        "backend": backend, "trials": int(len(worst)), "passed": passed,
        "pass_fraction": passed / len(worst), "tol": tol, "eps": h, "seed": seed,
        "max_rel_err": float(worst.max()), "median_rel_err": float(np.median(worst)),
        "cases": cases,
    }


def tiny_descriptor():
    return predictor.Descriptor(input_size=8, in_channels=1, n_v=4, channels=(2, 2),
                                kernel_sizes=(3, 3), hidden=5, r_max=1.0)


def model_gradcheck(seed=0, h=1e-3, descriptor=None, batch=2):
    """Max relative error of predictor parameter gradients vs a 5-point stencil.

    Uses a scalar objective ``sum(w * radii)`` with random weights, in f64.
    The error of each parameter tensor is ``|g - n| / max(|g|, |n|)`` in the
    Euclidean norm, so entries whose gradient is ~1e-10 (saturated outputs)
    do not turn round-off into large ratios.
    """
    desc = descriptor or tiny_descriptor()
    rng = np.random.default_rng(seed)
    state = predictor.init(desc, seed=seed, dtype=np.float64)
    for layer in state.layers:
        layer["W"][...] = rng.normal(0, 0.5, layer["W"].shape)
        layer["b"][...] = rng.normal(0, 0.3, layer["b"].shape)
    x = rng.normal(0, 1, (batch, desc.input_size, desc.input_size, desc.in_channels))
    w = rng.normal(0, 1, (batch, desc.n_out))

    def objective():
        return float((predictor.forward(state, x)[0] * w).sum())

    _, cache = predictor.forward(state, x)
    grads = predictor.backward(state, cache, w)
    worst = 0.0
    for p, g in zip(state.parameters(), grads):
        flat = p.reshape(-1)
        numeric = np.empty(flat.size)
        for k in range(flat.size):
            v = flat[k]
            vals = []
            for step in (2 * h, h, -h, -2 * h):
                flat[k] = v + step
                vals.append(objective())
            flat[k] = v
            numeric[k] = (-vals[0] + 8 * vals[1] - 8 * vals[2] + vals[3]) / (12 * h)
        g = g.reshape(-1)
        scale = max(np.linalg.norm(g), np.linalg.norm(numeric), 1e-12)
        worst = max(worst, float(np.linalg.norm(g - numeric) / scale))
    return worst
