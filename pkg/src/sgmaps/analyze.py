"""Numerical checks that the projection of M0 to the region behaves like a special generic map.

* M0 is non-singular (gradient of P bounded away from zero on samples).
* Projection-critical points of M0 lie over the region boundary with y = 0.
* Fibers over interior points are spheres S^{k-1}; over boundary points, single points.
* Near the boundary the fiber radius grows monotonically with depth (collar model).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ._levelset import directions, ray_radii
from ._roots import bracket_zeros
from .construct import Hypersurface
from .errors import SamplingError
from .mesh import DisjointSet, component_count, euler_char, is_closed, marching_squares, weld
from .polynomial import MultiPoly
from .region import Tag, classify_point

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50


@dataclass
class SamplePoint:
    coords: np.ndarray
    residual: float
    grad_norm: float


def _grad(polys, pts):
    return np.stack([g(pts) for g in polys], axis=-1)


def newton_project(p: MultiPoly, seeds: np.ndarray, tol: float = NEWTON_TOL,
                   max_iter: int = NEWTON_MAX_ITER, grad=None):
    """Damped Newton steps ``z -= P * grad P / |grad P|^2`` for every seed.

    The step is halved (up to 30 times) whenever ``|P|`` fails to decrease.
    Returns ``(points, residuals, converged_mask)``.
    """
    grad = p.gradient() if grad is None else grad
    z = np.array(seeds, dtype=float)
    val = p(z)
    done = np.abs(val) <= tol
    for _ in range(max_iter):
        act = ~done & np.isfinite(val)
        if not act.any():
            break
        za, va = z[act], val[act]
        g = _grad(grad, za)
        gg = np.einsum("ij,ij->i", g, g)
        ok = gg > 1e-300
        step = np.zeros_like(za)
        step[ok] = (va[ok] / gg[ok])[:, None] * g[ok]
        lam = np.ones(za.shape[0])
        best_z, best_v = za.copy(), va.copy()
        pending = ok.copy()
        for _ in range(30):
            if not pending.any():
                break
            trial = za[pending] - lam[pending, None] * step[pending]
            tv = p(trial)
            better = np.abs(tv) < np.abs(va[pending])
            idx = np.nonzero(pending)[0]
            acc = idx[better]
            best_z[acc], best_v[acc] = trial[better], tv[better]
            pending[acc] = False
            lam[idx[~better]] *= 0.5
        stalled = ~ok | pending
        z[act], val[act] = best_z, best_v
        where = np.nonzero(act)[0]
        done[where[stalled]] = True  # no progress possible
        done |= np.abs(val) <= tol
    conv = np.abs(val) <= tol
    return z, np.abs(val), conv


def sample_manifold(h: Hypersurface, count: int, seed: int = 0) -> list[SamplePoint]:
    """Newton-projected random points on M0, reproducible for a given seed."""
    if count <= 0:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    lo, hi = np.array(h.bbox_min), np.array(h.bbox_max)
    seeds = lo + (hi - lo) * rng.random((count, lo.size))
    grad = h.P.gradient()
    z, res, conv = newton_project(h.P, seeds, grad=grad)
    z, res = z[conv], res[conv]
    if z.shape[0] < count / 4:
        raise SamplingError(
            f"only {z.shape[0]} of {count} seeds converged to the zero set; "
            "M0 may be empty or nearly singular"
        )
    gn = np.linalg.norm(_grad(grad, z), axis=-1)
    return [SamplePoint(z[i], float(res[i]), float(gn[i])) for i in range(z.shape[0])]


def _coords(samples) -> np.ndarray:
    return np.array([s.coords for s in samples], dtype=float)


@dataclass
class NonsingularReport:
    passed: bool
    delta: float
    min_grad_norm: float
    max_grad_norm: float
    descent_min_grad_norm: float
    worst_point: list[float]
    sample_count: int


def _descend_grad_norm(h: Hypersurface, z: np.ndarray, iters: int = 40):
    """Minimize |grad P|^2 over M0 by projected descent restarted from every sample."""
    P = h.P
    grad = P.gradient()
    G = MultiPoly.zero(P.nvars)
    for g in grad:
        G = G + g * g
    gradG = G.gradient()
    diag = float(np.linalg.norm(np.array(h.bbox_max) - np.array(h.bbox_min)))
    step = np.full(z.shape[0], 0.05 * diag)
    gz = G(z)
    for _ in range(iters):
        n = _grad(grad, z)
        d = _grad(gradG, z)
        nn = np.einsum("ij,ij->i", n, n)
        tang = d - (np.einsum("ij,ij->i", d, n) / np.maximum(nn, 1e-300))[:, None] * n
        norm = np.linalg.norm(tang, axis=1)
        move = norm > 1e-14
        if not move.any():
            break
        direction = np.zeros_like(tang)
        direction[move] = tang[move] / norm[move, None]
        trial = z - step[:, None] * direction
        trial, _, conv = newton_project(P, trial, max_iter=10, grad=grad)
        gt = G(trial)
        accept = move & conv & (gt < gz)
        z = np.where(accept[:, None], trial, z)
        gz = np.where(accept, gt, gz)
        step = np.where(accept, np.minimum(step * 1.5, 0.05 * diag), step * 0.5)
    return z, np.sqrt(np.maximum(gz, 0.0))


def verify_nonsingular(h: Hypersurface, samples, delta: float | None = None) -> NonsingularReport:
    """Gradient-norm margin of P on M0.

    ``delta`` defaults to ``1e-4`` times the largest sampled gradient norm.
    Passes iff both the sampled minimum and the descended minimum reach it.
    """
    z = _coords(samples)
    gn = np.array([s.grad_norm for s in samples])
    delta = 1e-4 * float(gn.max()) if delta is None else float(delta)
    zd, gd = _descend_grad_norm(h, z.copy())
    i = int(np.argmin(gd))
    desc_min = float(min(gd[i], gn.min()))
    worst = zd[i] if gd[i] < gn.min() else z[int(np.argmin(gn))]
    return NonsingularReport(
        passed=bool(gn.min() >= delta and desc_min >= delta),
        delta=delta,
        min_grad_norm=float(gn.min()),
        max_grad_norm=float(gn.max()),
        descent_min_grad_norm=desc_min,
        worst_point=worst.tolist(),
        sample_count=int(z.shape[0]),
    )


def sample_boundary(h: Hypersurface, count: int = 256, seed: int = 0) -> np.ndarray:
    """Points on the zero set of the boundary product, by Newton projection of random seeds."""
    r = h.region
    rng = np.random.default_rng(seed + 1)
    lo, hi = np.array(r.bbox_min), np.array(r.bbox_max)
    seeds = lo + (hi - lo) * rng.random((count, r.dim))
    z, _, conv = newton_project(r.product, seeds, tol=1e-13 * max(1.0, abs(h.level_max)))
    z = z[conv]
    inside = np.all((z >= lo) & (z <= hi), axis=1)
    return z[inside]


@dataclass
class SingularSetReport:
    passed: bool
    candidates: list[list[float]]
    hausdorff_to_boundary: float
    max_fvert: float
    interior_violations: list[list[float]]
    boundary_samples: int
    tol: float


def _critical_system(h: Hypersurface):
    P = h.P
    grad = P.gradient()
    fy = grad[h.n:]
    rows = [P] + fy
    jac = [[q.partial_derivative(j) for j in range(P.nvars)] for q in rows]
    return rows, jac


def _gauss_newton(rows, jac, z: np.ndarray, iters: int = 60):
    for _ in range(iters):
        F = np.stack([q(z) for q in rows], axis=-1)
        if np.all(np.linalg.norm(F, axis=1) <= 1e-13):
            break
        J = np.stack([np.stack([q(z) for q in row], axis=-1) for row in jac], axis=-2)
        step = np.einsum("nij,nj->ni", np.linalg.pinv(J), F)
        z = z - step
    F = np.stack([q(z) for q in rows], axis=-1)
    return z, np.linalg.norm(F, axis=1)


def distance_to_zero_set(p: MultiPoly, x: np.ndarray, iters: int = 60) -> np.ndarray:
    """Distance from each point to the zero set of ``p`` via minimum-norm Newton steps."""
    z, _, conv = newton_project(p, x, tol=0.0, max_iter=iters)
    d = np.linalg.norm(z - x, axis=1)
    return np.where(np.abs(p(z)) <= 1e-12, d, np.inf)


def singular_set_check(h: Hypersurface, tol: float = 1e-6, samples=None,
                       boundary_count: int = 256, seed: int = 0) -> SingularSetReport:
    """Locate points of M0 where the projection drops rank and compare them with the region boundary.

    Seeds are sampled zeros of the boundary product lifted to ``y = 0``, plus
    any manifold samples whose vertical gradient is below ``tol`` relative to
    the full gradient. All seeds are refined by Gauss-Newton on
    ``{P = 0, d P / d y = 0}``.
    """
    n = h.n
    xb = sample_boundary(h, boundary_count, seed)
    rows, jac = _critical_system(h)
    seeds = [np.concatenate([xb, np.zeros((xb.shape[0], h.k))], axis=1)]
    if samples is not None and len(samples):
        z = _coords(samples)
        g = _grad(h.P.gradient(), z)
        ratio = np.linalg.norm(g[:, n:], axis=1) / np.maximum(np.linalg.norm(g, axis=1), 1e-300)
        seeds.append(z[ratio <= tol])
    seeds = np.concatenate(seeds)
    zc, fres = _gauss_newton(rows, jac, seeds)
    cand = zc[fres <= 1e-10]
    if cand.shape[0] == 0:
        return SingularSetReport(False, [], math.inf, math.inf, [], int(xb.shape[0]), tol)
    xc, yc = cand[:, :n], cand[:, n:]
    fv = np.abs(h.spec.fvert(yc))
    d_forward = distance_to_zero_set(h.region.product, xc)
    tree = cKDTree(xc)
    d_back, _ = tree.query(xb)
    haus = float(max(d_forward.max(), d_back.max() if d_back.size else 0.0))
    violations = []
    for x, d in zip(xc, d_forward):
        if d > tol and classify_point(h.region, x).tag == Tag.INTERIOR:
            violations.append(x.tolist())
    return SingularSetReport(
        passed=bool(haus <= tol and fv.max() <= tol and not violations),
        candidates=cand.tolist(),
        hausdorff_to_boundary=haus,
        max_fvert=float(fv.max()),
        interior_violations=violations,
        boundary_samples=int(xb.shape[0]),
        tol=tol,
    )


class FiberClass(str, enum.Enum):
    POINT = "point"
    TWO_POINTS = "two_points"
    CIRCLE = "circle"
    UNKNOWN = "unknown"
    NOT_COMPUTED = "not_computed"


@dataclass
class FiberReport:
    base_x: list[float]
    region_class: str
    level: float
    components: int
    euler_char: int | None
    classification: FiberClass
    expected: FiberClass
    ok: bool
    raw: dict = field(default_factory=dict)


def _expected_sphere(k: int) -> FiberClass:
    return {1: FiberClass.TWO_POINTS, 2: FiberClass.CIRCLE}.get(k, FiberClass.NOT_COMPUTED)


def _fiber_curve(fvert: MultiPoly, level: float, res: int = 65):
    """Marching-squares loop(s) of ``fvert = level`` on a box fitted to the level set."""
    dirs = directions(2, 256)
    r = ray_radii(fvert, level, dirs)
    if np.any(np.isnan(r)):
        return None
    ext = np.max(np.abs(r[:, None] * dirs), axis=0) * 1.3
    xs = np.linspace(-ext[0], ext[0], res)
    ys = np.linspace(-ext[1], ext[1], res)
    grid = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)
    vals = fvert(grid) - level
    scale = float(np.max(np.abs(vals))) or 1.0
    vals = np.where(vals == 0.0, 1e-12 * scale, vals)
    verts, segs = marching_squares(vals, xs, ys)
    diag = math.hypot(xs[1] - xs[0], ys[1] - ys[0])
    return weld(verts, segs, diag * 1e-6)


def _sampled_components(fvert: MultiPoly, level: float, k: int, count: int = 512):
    dirs = directions(k, count)
    r = ray_radii(fvert, level, dirs)
    pts = r[:, None] * dirs
    pts = pts[np.isfinite(r)]
    tree = cKDTree(pts)
    nn, _ = tree.query(pts, k=2)
    # every sample must reach its nearest neighbour; a margin of 3 links the sampled sheet
    radius = 3.0 * float(np.max(nn[:, 1]))
    ds = DisjointSet(pts.shape[0])
    for i, j in tree.query_pairs(radius):
        ds.union(i, j)
    return len(set(ds.roots())), radius


def fiber_at(h: Hypersurface, x, tol: float | None = None) -> FiberReport:
    """Topology of the fiber ``{y : fvert(y) = level(x)}`` over a region point ``x``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    pc = classify_point(h.region, x, tol)
    if pc.tag == Tag.EXTERIOR:
        raise ValueError(f"{x.tolist()} lies outside the region")
    level = float(h.level(x[None, :])[0])
    level_tol = 1e-9 * max(abs(h.level_max), 1e-300)
    expected = FiberClass.POINT if pc.tag == Tag.BOUNDARY else _expected_sphere(h.k)
    fv = h.spec.fvert

    def report(cls, comps, chi, raw=None):
        return FiberReport(x.tolist(), pc.tag.value, level, comps, chi, cls,
                           expected, cls == expected, raw or {})

    if abs(level) <= level_tol:
        return report(FiberClass.POINT, 1, 1)
    if level < 0:
        return report(FiberClass.UNKNOWN, 0, None, {"reason": "negative level: empty fiber"})
    if h.k == 1:
        lo, hi = h.bbox_y_min[0], h.bbox_y_max[0]
        roots = bracket_zeros(lambda t: fv(t[:, None]) - level, lo, hi)
        if roots.size == 2:
            return report(FiberClass.TWO_POINTS, 2, 2, {"roots": roots.tolist()})
        if roots.size == 1:
            return report(FiberClass.POINT, 1, 1, {"roots": roots.tolist()})
        return report(FiberClass.UNKNOWN, int(roots.size), int(roots.size), {"roots": roots.tolist()})
    if h.k == 2:
        curve = _fiber_curve(fv, level)
        if curve is None:
            return report(FiberClass.UNKNOWN, 0, None, {"reason": "unbounded level set"})
        comps = component_count(curve)
        chi = euler_char(curve)
        closed = is_closed(curve)
        raw = {"vertices": int(curve.vertices.shape[0]), "closed": closed}
        if comps == 1 and chi == 0 and closed:
            return report(FiberClass.CIRCLE, comps, chi, raw)
        return report(FiberClass.UNKNOWN, comps, chi, raw)
    comps, radius = _sampled_components(fv, level, h.k)
    return report(FiberClass.NOT_COMPUTED, comps, None, {"union_radius": radius})


def fiber_suite(h: Hypersurface, per_axis: int = 9, boundary_count: int = 32, seed: int = 0) -> list[FiberReport]:
    """Fibers over interior grid points and over sampled boundary points."""
    r = h.region
    axes = [np.linspace(lo, hi, per_axis + 2)[1:-1] for lo, hi in zip(r.bbox_min, r.bbox_max)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, r.dim)
    reports = []
    for x in grid:
        try:
            if classify_point(r, x).tag != Tag.INTERIOR:
                continue
        except Exception:
            continue
        reports.append(fiber_at(h, x))
    xb = sample_boundary(h, 4 * boundary_count, seed)[:boundary_count]
    for x in xb:
        reports.append(fiber_at(h, x))
    return reports


@dataclass
class CollarReport:
    passed: bool
    band: float
    rays: int
    depths: list[float]
    failures: list[dict]
    worst_small_depth_ratio: float


def collar_model_check(h: Hypersurface, band: float | None = None, rays: int = 32,
                       seed: int = 0) -> CollarReport:
    """Fiber extent along inward normals from the boundary must grow strictly and vanish at depth 0."""
    r = h.region
    if band is None:
        band = 0.02 * float(np.max(np.array(r.bbox_max) - np.array(r.bbox_min)))
    xb = sample_boundary(h, 4 * rays, seed)[:rays]
    grad = r.product.gradient()
    depths = np.unique(np.concatenate([band * np.geomspace(1e-10, 1e-1, 10),
                                       band * np.arange(1, 17) / 16]))
    dirs = directions(h.k, 64)
    failures = []
    worst_ratio = 0.0
    for x0 in xb:
        nrm = np.array([g.eval(x0) for g in grad])
        nrm /= np.linalg.norm(nrm)
        xs = x0[None, :] + depths[:, None] * nrm[None, :]
        levels = np.asarray(h.level(xs), dtype=float)
        if np.any(levels <= 0):
            failures.append({"ray_origin": x0.tolist(), "reason": "ray leaves the region within the band"})
            continue
        radii = ray_radii(h.spec.fvert, np.repeat(levels, len(dirs)), np.tile(dirs, (len(levels), 1)))
        rho = np.nanmax(radii.reshape(len(levels), len(dirs)), axis=1)
        if not np.all(np.diff(rho) > 0):
            i = int(np.argmin(np.diff(rho)))
            failures.append({"ray_origin": x0.tolist(), "reason": "fiber extent not increasing",
                             "depth": float(depths[i + 1])})
            continue
        ratio = float(rho[0] / rho[-1])
        worst_ratio = max(worst_ratio, ratio)
        if ratio > 0.1:
            failures.append({"ray_origin": x0.tolist(), "reason": "fiber extent does not vanish at the boundary",
                             "ratio": ratio})
    return CollarReport(not failures and len(xb) > 0, float(band), int(len(xb)),
                        depths.tolist(), failures, worst_ratio)
