"""Compact regions cut out by boundary polynomials.

A region is ``{x : f_j(x) >= 0 for all j}`` inside an axis-aligned box. The
sign conventions that make the later constructions work are:

* the region is the intersection of the non-negativity sets,
* its interior is the intersection of the positivity sets,
* outside the region exactly one ``f_j`` is negative and the rest positive.

:func:`certify` checks these numerically on a grid.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np
from scipy import ndimage

from .errors import AmbiguousClassification, ConvergenceError, SGMapError
from .polynomial import MultiPoly, monomials, product_of

REL_TOL = 1e-9

INTERIOR, BOUNDARY, EXTERIOR, AMBIGUOUS = 0, 1, 2, -1


@dataclass(frozen=True, eq=False)
class Region:
    dim: int
    boundary_polys: tuple[MultiPoly, ...]
    bbox_min: tuple[float, ...]
    bbox_max: tuple[float, ...]
    grid_res: int = 256

    def __post_init__(self):
        polys = tuple(self.boundary_polys)
        object.__setattr__(self, "boundary_polys", polys)
        object.__setattr__(self, "bbox_min", tuple(float(v) for v in self.bbox_min))
        object.__setattr__(self, "bbox_max", tuple(float(v) for v in self.bbox_max))
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not polys:
            raise ValueError("at least one boundary polynomial is required")
        for p in polys:
            if p.nvars != self.dim:
                raise ValueError(f"boundary polynomial has {p.nvars} variables, region dim is {self.dim}")
        if len(self.bbox_min) != self.dim or len(self.bbox_max) != self.dim:
            raise ValueError("bbox corners must have length dim")
        if any(hi <= lo for lo, hi in zip(self.bbox_min, self.bbox_max)):
            raise ValueError("bbox must have positive volume")
        if self.grid_res < 2:
            raise ValueError("grid_res must be >= 2")

    @cached_property
    def product(self) -> MultiPoly:
        return product_of(self.boundary_polys)

    def values(self, points) -> np.ndarray:
        """Boundary polynomial values, shape ``(l, *points.shape[:-1])``."""
        pts = np.asarray(points, dtype=float)
        return np.stack([p(pts) for p in self.boundary_polys])

    def axes(self, res: int | None = None) -> list[np.ndarray]:
        res = self.grid_res if res is None else res
        return [np.linspace(lo, hi, res) for lo, hi in zip(self.bbox_min, self.bbox_max)]

    def grid(self, res: int | None = None) -> np.ndarray:
        """Grid points with shape ``(res,)*dim + (dim,)``."""
        mesh = np.meshgrid(*self.axes(res), indexing="ij")
        return np.stack(mesh, axis=-1)

    @cached_property
    def default_tol(self) -> float:
        vals = self.values(self.grid())
        return REL_TOL * float(np.max(np.abs(vals)))

    def with_polys(self, polys, bbox_min=None, bbox_max=None) -> "Region":
        return Region(
            self.dim,
            tuple(polys),
            self.bbox_min if bbox_min is None else bbox_min,
            self.bbox_max if bbox_max is None else bbox_max,
            self.grid_res,
        )


class Tag(str, enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary_band"
    EXTERIOR = "exterior"


@dataclass(frozen=True)
class PointClass:
    tag: Tag
    index: int | None = None


def classify_values(vals: np.ndarray, tol: float):
    """Vectorized classification of boundary values ``vals`` (shape ``(l, N)``).

    Returns ``(codes, index)``: codes are INTERIOR/BOUNDARY/EXTERIOR/AMBIGUOUS,
    index is the responsible polynomial (or -1).
    """
    near = np.abs(vals) <= tol
    neg = vals < -tol
    n_near = near.sum(axis=0)
    n_neg = neg.sum(axis=0)
    codes = np.full(vals.shape[1:], AMBIGUOUS, dtype=np.int8)
    codes[(n_near == 0) & (n_neg == 0)] = INTERIOR
    codes[(n_near == 1) & (n_neg == 0)] = BOUNDARY
    codes[(n_near == 0) & (n_neg == 1)] = EXTERIOR
    index = np.where(n_near > 0, np.argmax(near, axis=0), np.argmax(neg, axis=0))
    index = np.where((codes == BOUNDARY) | (codes == EXTERIOR), index, -1)
    return codes, index


def classify_point(r: Region, x, tol: float | None = None) -> PointClass:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != r.dim:
        raise ValueError(f"point has {x.shape[0]} coordinates, region dim is {r.dim}")
    tol = r.default_tol if tol is None else tol
    if not tol > 0:
        raise ValueError("tol must be positive")
    vals = np.array([p.eval(x) for p in r.boundary_polys])
    near = np.nonzero(np.abs(vals) <= tol)[0]
    neg = np.nonzero(vals < -tol)[0]
    if len(near) == 0 and len(neg) == 0:
        return PointClass(Tag.INTERIOR)
    if len(near) == 1 and len(neg) == 0:
        return PointClass(Tag.BOUNDARY, int(near[0]))
    if len(near) == 0 and len(neg) == 1:
        return PointClass(Tag.EXTERIOR, int(neg[0]))
    raise AmbiguousClassification(sorted(set(near.tolist()) | set(neg.tolist())), x)


@dataclass
class Check:
    name: str
    passed: bool
    witness: list[float] | None = None
    detail: str = ""


@dataclass
class RegionCertificate:
    passed: bool
    checks: list[Check]
    grid_res: int
    tol: float
    margin: float | None
    gradient_margin: float | None
    counts: dict = field(default_factory=dict)


def _sign_crossings(r: Region, vals: np.ndarray, pts: np.ndarray):
    """Linear-interpolated zero crossings of each polynomial along grid edges.

    Yields ``(j, points)`` with points of shape ``(m, dim)``.
    """
    for j in range(vals.shape[0]):
        v = vals[j]
        chunks = []
        for ax in range(r.dim):
            a = [slice(None)] * r.dim
            b = [slice(None)] * r.dim
            a[ax] = slice(None, -1)
            b[ax] = slice(1, None)
            va, vb = v[tuple(a)], v[tuple(b)]
            mask = va * vb < 0
            if not mask.any():
                continue
            t = va[mask] / (va[mask] - vb[mask])
            pa, pb = pts[tuple(a)][mask], pts[tuple(b)][mask]
            chunks.append(pa + t[:, None] * (pb - pa))
        yield j, (np.concatenate(chunks) if chunks else np.empty((0, r.dim)))


def certify(r: Region, grid_res: int | None = None, require_margin: float | None = None) -> RegionCertificate:
    """Grid certificate of the three sign conditions.

    ``margin`` is the smallest value of the *other* boundary polynomials at
    sampled zeros of each ``f_j`` (how far the boundary pieces are from
    touching). ``gradient_margin`` is the smallest gradient norm of ``f_j`` at
    those zeros; it only affects ``passed`` when ``require_margin`` is given.
    """
    res = r.grid_res if grid_res is None else grid_res
    pts = r.grid(res)
    vals = r.values(pts)
    tol = REL_TOL * float(np.max(np.abs(vals)))
    flat_vals = vals.reshape(len(r.boundary_polys), -1)
    flat_pts = pts.reshape(-1, r.dim)
    codes, _ = classify_values(flat_vals, tol)
    codes_grid = codes.reshape(pts.shape[:-1])
    checks = []

    # 1: the region is non-empty, sits inside the box, and each piece is realized
    witness, detail = None, ""
    interior = np.nonzero(codes == INTERIOR)[0]
    if interior.size == 0:
        detail = "no interior grid point"
    else:
        border = np.zeros(codes_grid.shape, dtype=bool)
        for ax in range(r.dim):
            sl = [slice(None)] * r.dim
            for end in (0, -1):
                sl[ax] = end
                border[tuple(sl)] = True
        bad = border & ((codes_grid == INTERIOR) | (codes_grid == BOUNDARY))
        if bad.any():
            i = np.argmax(bad.reshape(-1))
            witness, detail = flat_pts[i].tolist(), "region reaches the bounding box"
        else:
            for j in range(flat_vals.shape[0]):
                if not ((flat_vals[j] > tol).any() and (flat_vals[j] < -tol).any()):
                    witness, detail = None, f"polynomial {j} has constant sign on the grid"
                    break
    checks.append(Check("intersection_nonneg", not detail, witness, detail))

    # 2: every zero of f_j lies where the other polynomials are positive
    margin = math.inf
    grad_margin = math.inf
    witness, detail = None, ""
    for j, zs in _sign_crossings(r, vals, pts):
        if zs.shape[0] == 0:
            continue
        grads = np.stack([d(zs) for d in r.boundary_polys[j].gradient()], axis=-1)
        grad_margin = min(grad_margin, float(np.min(np.linalg.norm(grads, axis=-1))))
        others = [i for i in range(len(r.boundary_polys)) if i != j]
        if not others:
            continue
        ov = np.stack([r.boundary_polys[i](zs) for i in others])
        low = ov.min(axis=0)
        k = int(np.argmin(low))
        margin = min(margin, float(low[k]))
        if low[k] <= tol and not detail:
            witness = zs[k].tolist()
            detail = f"zero of polynomial {j} where polynomial {others[int(np.argmin(ov[:, k]))]} is not positive"
    checks.append(Check("interior_positivity", not detail, witness, detail))

    # 3: nowhere two polynomials are negative or simultaneously near zero
    amb = np.nonzero(codes == AMBIGUOUS)[0]
    if amb.size:
        i = int(amb[0])
        idx = np.nonzero((flat_vals[:, i] < -tol) | (np.abs(flat_vals[:, i]) <= tol))[0]
        checks.append(Check("exactly_one_negative", False, flat_pts[i].tolist(),
                            f"{amb.size} ambiguous grid points; polynomials {idx.tolist()} at witness"))
    else:
        checks.append(Check("exactly_one_negative", True))

    if require_margin is not None:
        ok = grad_margin >= require_margin
        checks.append(Check("gradient_margin", ok, None,
                            f"min boundary gradient norm {grad_margin:.6g} vs required {require_margin:.6g}"))

    counts = {
        "interior": int((codes == INTERIOR).sum()),
        "boundary_band": int((codes == BOUNDARY).sum()),
        "exterior": int((codes == EXTERIOR).sum()),
        "ambiguous": int(amb.size),
    }
    return RegionCertificate(
        passed=all(c.passed for c in checks),
        checks=checks,
        grid_res=res,
        tol=tol,
        margin=None if math.isinf(margin) else margin,
        gradient_margin=None if math.isinf(grad_margin) else grad_margin,
        counts=counts,
    )


def _cell_mask(r: Region, res: int) -> np.ndarray:
    vals = r.values(r.grid(res))
    tol = REL_TOL * float(np.max(np.abs(vals)))
    inside = np.all(vals >= -tol, axis=0)
    cells = inside
    for ax in range(r.dim):
        a = [slice(None)] * r.dim
        b = [slice(None)] * r.dim
        a[ax] = slice(None, -1)
        b[ax] = slice(1, None)
        cells = cells[tuple(a)] & cells[tuple(b)]
    return cells


def cubical_euler(cells: np.ndarray) -> int:
    """Euler characteristic of the closed union of the marked unit cubes."""
    dim = cells.ndim
    chi = 0
    for k in range(dim + 1):
        for span in combinations(range(dim), k):
            inc = cells
            for ax in range(dim):
                if ax in span:
                    continue
                pad = [(0, 0)] * dim
                pad[ax] = (1, 1)
                p = np.pad(inc, pad)
                lo = [slice(None)] * dim
                hi = [slice(None)] * dim
                lo[ax] = slice(None, -1)
                hi[ax] = slice(1, None)
                inc = p[tuple(lo)] | p[tuple(hi)]
            chi += (-1) ** k * int(inc.sum())
    return chi


def region_euler(r: Region, max_res: int = 2048) -> int:
    """Euler characteristic of the region from a cubical approximation.

    The resolution starts at ``r.grid_res`` and doubles until two successive
    values agree.
    """
    cap = max_res if r.dim <= 2 else min(max_res, 256)
    res = r.grid_res
    prev = cubical_euler(_cell_mask(r, res))
    while res * 2 <= cap:
        res *= 2
        cur = cubical_euler(_cell_mask(r, res))
        if cur == prev:
            return cur
        prev = cur
    raise ConvergenceError(f"region Euler characteristic did not stabilize up to resolution {res}")


def region_components(r: Region, res: int | None = None) -> int:
    """Connected components of the cubical approximation (face adjacency)."""
    cells = _cell_mask(r, r.grid_res if res is None else res)
    _, count = ndimage.label(cells)
    return int(count)


class FitError(SGMapError):
    pass


@dataclass
class BoundaryFit:
    poly: MultiPoly
    rms_residual: float
    min_grad_norm: float
    singular_values: list[float]


def fit_boundary(samples, degree: int) -> BoundaryFit:
    """Least-squares implicit polynomial through sample points.

    Minimizes ``sum p(s)**2`` over polynomials of total degree <= ``degree``
    with unit coefficient norm, i.e. the right singular vector of the
    monomial matrix for its smallest singular value. The sign is chosen so the
    fit is positive at the sample centroid, matching the convention that a
    region is where its boundary polynomials are non-negative.
    """
    pts = np.asarray(samples, dtype=float)
    if pts.ndim != 2:
        raise ValueError("samples must be a 2-D array of points")
    if degree < 1:
        raise ValueError("degree must be >= 1")
    dim = pts.shape[1]
    basis = monomials(dim, degree)
    if pts.shape[0] < len(basis):
        raise ValueError(f"need at least {len(basis)} samples for degree {degree}, got {pts.shape[0]}")
    cols = [np.prod(pts ** np.array(e), axis=1) for e in basis]
    a = np.stack(cols, axis=1)
    _, s, vt = np.linalg.svd(a, full_matrices=False)
    if len(s) > 1 and s[-2] <= 1e-8 * s[0]:
        raise FitError(
            f"samples lie on a degenerate family of degree-{degree} curves "
            f"(null space dimension > 1); try a lower degree"
        )
    coeffs = vt[-1]
    poly = MultiPoly(dim, {e: c for e, c in zip(basis, coeffs)})
    if poly.eval(pts.mean(axis=0)) < 0:
        coeffs = -coeffs
        poly = -poly
    rms = float(np.sqrt(np.mean((a @ coeffs) ** 2)))
    grads = np.stack([d(pts) for d in poly.gradient()], axis=-1)
    return BoundaryFit(poly, rms, float(np.min(np.linalg.norm(grads, axis=-1))), s.tolist())
