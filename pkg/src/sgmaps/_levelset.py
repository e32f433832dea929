"""Radial description of the level sets ``{y : F(y) = level}`` of a vertical polynomial."""
from __future__ import annotations

import numpy as np

from ._roots import bisect_brackets


def directions(k: int, count: int = 128, seed: int = 0) -> np.ndarray:
    """Unit directions in R^k: both signs for k=1, evenly spaced angles for k=2."""
    if k == 1:
        return np.array([[1.0], [-1.0]])
    if k == 2:
        ang = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((count, k))
    axes = np.concatenate([np.eye(k), -np.eye(k)])
    d = np.concatenate([axes, d / np.linalg.norm(d, axis=1, keepdims=True)])
    return d


def ray_radii(fvert, level, dirs: np.ndarray) -> np.ndarray:
    """Radius ``r`` along each direction with ``fvert(r*u) = level``.

    ``level`` is a scalar or one value per direction. Assumes
    ``fvert(0) <= level``; the upper bracket is found by doubling. Directions
    without a bracket get NaN, non-positive levels give radius 0.
    """
    m = dirs.shape[0]
    level = np.broadcast_to(np.asarray(level, dtype=float), (m,))
    out = np.zeros(m)
    pos = level > 0
    if not pos.any():
        return out
    d, lv = dirs[pos], level[pos]
    hi = np.ones(d.shape[0])
    for _ in range(200):
        vals = fvert(hi[:, None] * d) - lv
        if np.all(vals > 0):
            break
        hi = np.where(vals > 0, hi, hi * 2.0)
        if np.any(hi > 1e12):
            break
    ok = fvert(hi[:, None] * d) - lv > 0
    r = np.full(d.shape[0], np.nan)
    if ok.any():
        dk, lk = d[ok], lv[ok]
        g = lambda t: fvert(t[:, None] * dk) - lk  # noqa: E731
        r[ok] = bisect_brackets(g, np.zeros(ok.sum()), hi[ok], xtol=0.0, max_iter=80)
    out[pos] = r
    return out


def fiber_extent(fvert, level: float, k: int, count: int = 256) -> np.ndarray:
    """Per-axis half-widths of the level set ``fvert = level``."""
    dirs = directions(k, count)
    r = ray_radii(fvert, level, dirs)
    if np.any(np.isnan(r)):
        raise ValueError("level set is unbounded along some direction")
    return np.max(np.abs(r[:, None] * dirs), axis=0)
