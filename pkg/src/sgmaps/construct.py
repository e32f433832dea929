"""Defining polynomials of the hypersurfaces M0 over a certified region.

Variables are ordered ``(x_1..x_n, y_1..y_k)``: ``n`` horizontal coordinates
of the region followed by ``k`` vertical ones. The projection to the first
``n`` coordinates restricted to ``M0 = P^{-1}(0)`` is the map under study.

Basic form::

    P(x, y) = prod_j f_j(x) - sum_i y_i**2

Generalized form, for a vertical spec ``(f0, fvert, a, T)``::

    P(x, y) = f0(prod_j f_j(x) / T) - fvert(y)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ._levelset import directions, fiber_extent, ray_radii
from .errors import ConstructionError
from .polynomial import MultiPoly, UniPoly, compose_univariate, sum_of_squares
from .region import Region, certify

IDENTITY = UniPoly([0.0, 1.0])
BBOX_Y_INFLATE = 1.1
T_SAFETY = 2.0


@dataclass(frozen=True, eq=False)
class VerticalSpec:
    """Fiber-shape data. ``T=None`` means "choose automatically"."""

    f0: UniPoly
    fvert: MultiPoly
    a: float
    T: float | None = None

    @classmethod
    def basic(cls, k: int, a: float = 1.0) -> "VerticalSpec":
        return cls(IDENTITY, sum_of_squares(k), a, 1.0)


@dataclass(frozen=True, eq=False)
class Hypersurface:
    P: MultiPoly
    n: int
    k: int
    region: Region
    spec: VerticalSpec
    T: float
    bbox_y_min: tuple[float, ...]
    bbox_y_max: tuple[float, ...]
    basic: bool
    level_max: float

    @property
    def m(self) -> int:
        return self.n + self.k - 1

    @property
    def bbox_min(self) -> tuple[float, ...]:
        return self.region.bbox_min + self.bbox_y_min

    @property
    def bbox_max(self) -> tuple[float, ...]:
        return self.region.bbox_max + self.bbox_y_max

    def level(self, x) -> np.ndarray | float:
        """Fiber level ``f0(prod f(x) / T)`` at horizontal point(s) ``x``."""
        return self.spec.f0(np.asarray(self.region.product(x)) / self.T)

    def fvert(self, y):
        return self.spec.fvert(y)


def grid_max_product(r: Region, res: int | None = None) -> tuple[float, np.ndarray]:
    pts = r.grid(res)
    vals = r.product(pts)
    i = np.unravel_index(np.argmax(vals), vals.shape)
    return float(vals[i]), pts[i]


def _require_certified(r: Region):
    cert = certify(r)
    if not cert.passed:
        failed = [c.name for c in cert.checks if not c.passed]
        raise ConstructionError(f"region is not certified (failed: {', '.join(failed)})")


def build_basic(r: Region, k: int, require_certified: bool = True) -> Hypersurface:
    """``P = prod f_j(x) - |y|^2`` in ``n + k`` variables.

    ``require_certified=False`` skips the region certificate; it exists for
    negative controls where the construction is expected to fail later.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if require_certified:
        _require_certified(r)
    n = r.dim
    top = region_max_product(r)
    if top <= 0:
        raise ConstructionError("product of boundary polynomials is not positive anywhere on the grid")
    R = math.sqrt(top) * BBOX_Y_INFLATE
    P = r.product.embed(n + k, 0) - sum_of_squares(n + k, n, k)
    return Hypersurface(
        P=P, n=n, k=k, region=r, spec=VerticalSpec.basic(k), T=1.0,
        bbox_y_min=(-R,) * k, bbox_y_max=(R,) * k, basic=True, level_max=top,
    )


def _refine_max(p: MultiPoly, start: np.ndarray, lo, hi) -> tuple[float, np.ndarray]:
    """Local ascent from a grid maximum, polished with Newton on the gradient."""
    grad = p.gradient()
    hess = [[g.partial_derivative(j) for j in range(p.nvars)] for g in grad]
    res = minimize(
        lambda z: -p.eval(z),
        start,
        jac=lambda z: -np.array([g.eval(z) for g in grad]),
        method="L-BFGS-B",
        bounds=list(zip(lo, hi)),
        options={"gtol": 1e-14, "ftol": 1e-16},
    )
    z = res.x if p.eval(res.x) > p.eval(start) else np.array(start, dtype=float)
    best = p.eval(z)
    for _ in range(8):
        g = np.array([q.eval(z) for q in grad])
        H = np.array([[q.eval(z) for q in row] for row in hess])
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        cand = z - step
        if np.any(cand < lo) or np.any(cand > hi):
            break
        val = p.eval(cand)
        if val < best:
            break
        z, best = cand, val
    return best, z


def region_max_product(r: Region) -> float:
    """Grid maximum of the product, refined by local ascent (never below the grid value)."""
    top, arg = grid_max_product(r)
    if top <= 0:
        return top
    refined, _ = _refine_max(r.product, arg, np.array(r.bbox_min), np.array(r.bbox_max))
    return max(top, refined)


def choose_T(r: Region, a: float) -> float:
    """``T = 2 * max(prod f) / a`` so that ``prod f / T <= a/2 < a`` on the region."""
    if not a > 0:
        raise ValueError("a must be positive")
    top = region_max_product(r)
    if top <= 0:
        raise ConstructionError("product of boundary polynomials has non-positive maximum (empty interior)")
    return T_SAFETY * top / a


@dataclass
class ConditionCheck:
    condition: int
    name: str
    passed: bool
    detail: str = ""
    skipped: bool = False


@dataclass
class SpecValidation:
    passed: bool
    failed_condition: int | None
    checks: list[ConditionCheck] = field(default_factory=list)


def _f0_max(f0: UniPoly, hi: float, num: int = 257) -> float:
    ts = np.linspace(0.0, hi, num)
    return float(np.max(f0(ts)))


def validate_vertical_spec(spec: VerticalSpec, k: int) -> SpecValidation:
    """Check the hypotheses on ``(f0, fvert, a)``; conditions are numbered (1)-(4).

    (1) shapes: ``fvert`` has ``k`` variables, ``a > 0``, ``f0`` non-zero.
    (2) ``f0(0) = 0``, ``f0'(0) != 0``, ``t * f0(t) > 0`` on samples of ``[-a, a]``.
    (3) ``fvert`` has even exponents, no constant term, is non-negative on a
        grid and vanishes only in the grid cell at the origin.
    (4) level sets ``fvert = f0(t)`` for ``t`` on a geometric ladder in
        ``(0, a]`` are bounded and non-singular.
    """
    checks: list[ConditionCheck] = []
    f0, fv, a = spec.f0, spec.fvert, float(spec.a)

    shape_ok = fv.nvars == k and a > 0 and not f0.is_zero() and not fv.is_zero()
    checks.append(ConditionCheck(1, "shapes", shape_ok,
                                 "" if shape_ok else f"fvert has {fv.nvars} vars (k={k}), a={a}"))
    if not shape_ok:
        return SpecValidation(False, 1, checks)

    c0 = f0.coeffs[0] if f0.coeffs else 0.0
    checks.append(ConditionCheck(2, "f0(0) = 0", c0 == 0.0, f"f0(0) = {c0!r}"))
    d0 = f0.derivative()(0.0)
    checks.append(ConditionCheck(2, "f0'(0) != 0", abs(d0) > 0, f"f0'(0) = {d0!r}"))
    ts = np.concatenate([a * np.geomspace(1e-6, 1.0, 64), -a * np.geomspace(1e-6, 1.0, 64)])
    sign_ok = bool(np.all(ts * f0(ts) > 0))
    checks.append(ConditionCheck(2, "t*f0(t) > 0", sign_ok, "" if sign_ok else "f0 has the wrong sign somewhere in [-a, a]"))

    zero_const = fv.coeff((0,) * k) == 0.0
    checks.append(ConditionCheck(3, "fvert(0) = 0", zero_const, ""))
    even = all(e % 2 == 0 for exps in fv.terms for e in exps)
    checks.append(ConditionCheck(3, "even exponents", even, "" if even else "fvert is not invariant under y -> -y"))

    level_top = _f0_max(f0, a)
    try:
        ext = fiber_extent(fv, level_top, k) if level_top > 0 else np.ones(k)
        box = 1.5 * float(np.max(ext))
    except ValueError:
        box = 1.0
    res = {1: 401, 2: 101, 3: 41}.get(k, 11)
    ax = np.linspace(-box, box, res)
    grid = np.stack(np.meshgrid(*([ax] * k), indexing="ij"), axis=-1).reshape(-1, k)
    vals = fv(grid)
    scale = float(np.max(np.abs(vals))) or 1.0
    nonneg = bool(np.all(vals >= -1e-14 * scale))
    h = ax[1] - ax[0]
    away = np.max(np.abs(grid), axis=1) > h * (1 + 1e-9)
    only_origin = bool(np.all(vals[away] > 0))
    checks.append(ConditionCheck(3, "fvert >= 0", nonneg, "" if nonneg else f"min on grid {vals.min():.3g}"))
    detail = ""
    if not only_origin:
        detail = f"fvert vanishes at {grid[away][np.argmin(vals[away])].tolist()}"
    checks.append(ConditionCheck(3, "zero set is the origin", only_origin, detail))

    ok4, detail = True, ""
    if sign_ok and even and zero_const:
        dirs = directions(k, 64)
        grads = fv.gradient()
        for t in a * 2.0 ** -np.arange(13):
            level = float(f0(t))
            r = ray_radii(fv, level, dirs)
            if np.any(np.isnan(r)):
                ok4, detail = False, f"level set at t={t:.3g} is unbounded"
                break
            ys = r[:, None] * dirs
            gn = np.linalg.norm(np.stack([g(ys) for g in grads], axis=-1), axis=-1)
            # scale-free: y . grad F = deg * F for homogeneous F
            if np.any(gn * r < 1e-6 * level):
                ok4, detail = False, f"level set at t={t:.3g} has a near-singular point"
                break
        checks.append(ConditionCheck(4, "non-singular level sets", ok4, detail))
    else:
        checks.append(ConditionCheck(4, "non-singular level sets", False, "earlier conditions failed", skipped=True))

    failed = sorted({c.condition for c in checks if not c.passed and not c.skipped})
    return SpecValidation(not failed and not any(c.skipped for c in checks), failed[0] if failed else None, checks)


def build_generalized(r: Region, spec: VerticalSpec, require_certified: bool = True) -> Hypersurface:
    """``P = f0(prod f / T) - fvert(y)``; ``T`` is resolved with :func:`choose_T` when unset."""
    k = spec.fvert.nvars
    report = validate_vertical_spec(spec, k)
    if not report.passed:
        raise ConstructionError(f"vertical spec fails condition ({report.failed_condition})")
    if require_certified:
        _require_certified(r)
    T = choose_T(r, spec.a) if spec.T is None else float(spec.T)
    if not T > 0:
        raise ConstructionError("T must be positive")
    n = r.dim
    horiz = compose_univariate(spec.f0, r.product, T).embed(n + k, 0)
    P = horiz - spec.fvert.embed(n + k, n)
    top = region_max_product(r)
    level_max = _f0_max(spec.f0, top / T)
    ext = fiber_extent(spec.fvert, level_max, k) * BBOX_Y_INFLATE
    return Hypersurface(
        P=P, n=n, k=k, region=r, spec=VerticalSpec(spec.f0, spec.fvert, spec.a, T), T=T,
        bbox_y_min=tuple(-ext), bbox_y_max=tuple(ext), basic=False, level_max=level_max,
    )
