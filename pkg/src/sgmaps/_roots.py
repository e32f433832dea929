"""Real zeros of a scalar function on an interval by sign-change bracketing."""
from __future__ import annotations

import math

import numpy as np


def bisect_brackets(g, lo, hi, xtol=1e-12, max_iter=200):
    """Vectorized bisection; ``g(lo)`` and ``g(hi)`` must differ in sign elementwise."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    if lo.size == 0:
        return lo
    glo = g(lo)
    for _ in range(max_iter):
        if np.all(hi - lo <= xtol):
            break
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        left = np.sign(gm) == np.sign(glo)
        lo = np.where(left, mid, lo)
        glo = np.where(left, gm, glo)
        hi = np.where(left, hi, mid)
        exact = gm == 0
        lo = np.where(exact, mid, lo)
        hi = np.where(exact, mid, hi)
    return 0.5 * (lo + hi)


def golden_min(g, lo, hi, iters: int = 80):
    """Vectorized golden-section minimization of ``g`` on each ``[lo, hi]``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    gc, gd = g(c), g(d)
    for _ in range(iters):
        left = gc < gd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = b - invphi * (b - a)
        d_new = a + invphi * (b - a)
        # reuse one interior evaluation per step
        c, d = np.where(left, c_new, d), np.where(left, c, d_new)
        g_new = g(np.where(left, c, d))
        gc, gd = np.where(left, g_new, gd), np.where(left, gc, g_new)
    return 0.5 * (a + b)


def bracket_zeros(g, lo: float, hi: float, n: int = 1024, xtol: float = 1e-12) -> np.ndarray:
    """Sorted zeros of a vectorized ``g`` on ``[lo, hi]``.

    Sign changes between the ``n + 1`` grid samples are bisected to ``xtol``.
    Discrete local extrema that do not change sign are refined with a
    golden-section search; if the refined extremum crosses zero, the pair of zeros on
    either side is bisected too, so narrow bumps below the grid spacing are
    still found. A touching (double) zero is reported once.
    """
    xs = np.linspace(lo, hi, n + 1)
    v = np.asarray(g(xs), dtype=float)
    found = list(xs[v == 0.0])

    s = np.sign(v)
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    a_lo, a_hi = xs[idx], xs[idx + 1]

    # interior grid extrema that point toward zero without crossing it
    i = np.arange(1, n)
    same = (s[i] != 0) & (s[i - 1] == s[i]) & (s[i + 1] == s[i])
    toward = (s[i] * (v[i] - v[i - 1]) <= 0) & (s[i] * (v[i + 1] - v[i]) >= 0)
    cand = i[same & toward]
    extra_lo, extra_hi = [], []
    if cand.size:
        sign = s[cand]
        t_star = golden_min(lambda t: sign * g(t), xs[cand - 1], xs[cand + 1])
        val = np.asarray(g(t_star), dtype=float)
        found.extend(t_star[val == 0.0].tolist())
        cross = (val != 0.0) & (np.sign(val) != sign)
        extra_lo = np.concatenate([xs[cand - 1][cross], t_star[cross]])
        extra_hi = np.concatenate([t_star[cross], xs[cand + 1][cross]])
    all_lo = np.concatenate([a_lo, np.array(extra_lo)])
    all_hi = np.concatenate([a_hi, np.array(extra_hi)])
    if all_lo.size:
        found.extend(bisect_brackets(g, all_lo, all_hi, xtol=xtol).tolist())
    zs = np.sort(np.array(found, dtype=float))
    if zs.size > 1:
        keep = np.concatenate([[True], np.diff(zs) > xtol])
        zs = zs[keep]
    return zs
