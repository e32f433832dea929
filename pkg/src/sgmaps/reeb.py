"""Poincare-Reeb graph of a planar region by a vertical sweep line.

The sweep coordinate is ``x1`` (after an optional rotation). Each slice
``{x2 : (c, x2) in region}`` is a union of closed intervals; the graph has a
vertex wherever the interval structure changes and one edge per interval track.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._roots import bracket_zeros
from .construct import Hypersurface
from .errors import AmbiguousClassification, NonGenericSweep, NotSupported, SGMapError
from .mesh import DisjointSet
from .polynomial import UniPoly
from .region import AMBIGUOUS, BOUNDARY, EXTERIOR, INTERIOR, Region, classify_values

EVENT_WIDTH = 1e-9
MIN_SWEEP_RES = 64

BIRTH, DEATH, SPLIT, MERGE = "Birth", "Death", "Split", "Merge"
_KIND_DEGREE = {BIRTH: 1, DEATH: 1, SPLIT: 3, MERGE: 3}


class SliceError(SGMapError):
    pass


@dataclass
class Slice:
    c: float
    intervals: list[tuple[float, float]]


def _restrict(f, c: float) -> UniPoly:
    """``t -> f(c, t)`` as a univariate polynomial."""
    coeffs = np.zeros(max(f.degree, 0) + 1)
    for (e1, e2), a in f.items():
        coeffs[e2] += a * c**e1
    return UniPoly(coeffs)


def _slice(r: Region, c: float, tol: float, strict: bool) -> Slice:
    lo, hi = r.bbox_min[1], r.bbox_max[1]
    zeros = [lo, hi]
    for f in r.boundary_polys:
        zeros.extend(bracket_zeros(_restrict(f, c), lo, hi).tolist())
    cuts = np.unique(np.array(zeros))
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    pts = np.stack([np.full_like(mids, c), mids], axis=-1)
    codes, _ = classify_values(r.values(pts), tol)
    if np.any(codes == AMBIGUOUS):
        i = int(np.nonzero(codes == AMBIGUOUS)[0][0])
        raise AmbiguousClassification([], pts[i])
    if strict and np.any(codes == BOUNDARY):
        i = int(np.nonzero(codes == BOUNDARY)[0][0])
        raise SliceError(
            f"slice x1={c!r} has a near-tangent segment around x2={mids[i]!r}; "
            "perturb the sweep value"
        )
    inside = codes == INTERIOR
    if inside.size and (inside[0] or inside[-1]):
        raise SliceError(f"slice x1={c!r} reaches the bbox edge; enlarge the bbox")
    intervals = []
    i = 0
    while i < inside.size:
        if not inside[i]:
            i += 1
            continue
        j = i
        while j + 1 < inside.size and inside[j + 1]:
            j += 1
        intervals.append((float(cuts[i]), float(cuts[j + 1])))
        i = j + 1
    return Slice(float(c), intervals)


def slice_region(r: Region, c: float, tol: float | None = None) -> Slice:
    """Intervals of the vertical slice at ``x1 = c``, sorted and disjoint."""
    if r.dim != 2:
        raise ValueError("slices are defined for planar regions only")
    if not r.bbox_min[0] <= c <= r.bbox_max[0]:
        raise ValueError(f"sweep value {c} outside the bbox")
    tol = r.default_tol if tol is None else tol
    return _slice(r, c, tol, strict=True)


def _overlap_components(A: list, B: list) -> list[tuple[list[int], list[int]]]:
    """Components of the bipartite overlap graph between two interval lists."""
    ds = DisjointSet(len(A) + len(B))
    for i, (a0, a1) in enumerate(A):
        for j, (b0, b1) in enumerate(B):
            if max(a0, b0) <= min(a1, b1):
                ds.union(i, len(A) + j)
    groups: dict[int, tuple[list[int], list[int]]] = {}
    for i in range(len(A)):
        groups.setdefault(ds.find(i), ([], []))[0].append(i)
    for j in range(len(B)):
        groups.setdefault(ds.find(len(A) + j), ([], []))[1].append(j)
    return sorted(groups.values(), key=lambda g: (g[0][:1] or [-1], g[1][:1] or [-1]))


def _bijective(A, B) -> bool:
    return len(A) == len(B) and all(len(a) == 1 and len(b) == 1 for a, b in _overlap_components(A, B))


def _refine(r: Region, sa: Slice, sb: Slice, out: list[Slice]) -> None:
    """Append slices strictly between ``sa`` and ``sb`` until every step is bijective or tiny."""
    if _bijective(sa.intervals, sb.intervals) or sb.c - sa.c <= EVENT_WIDTH:
        return
    mid = _slice(r, 0.5 * (sa.c + sb.c), 0.0, strict=False)
    _refine(r, sa, mid, out)
    out.append(mid)
    _refine(r, mid, sb, out)


@dataclass
class ReebVertex:
    id: int
    value: float
    kind: str
    degree: int = 0


@dataclass
class ReebEdge:
    u: int
    v: int
    track: int


@dataclass
class ReebGraph:
    vertices: list[ReebVertex]
    edges: list[ReebEdge]
    components: int
    betti1: int
    sweep_angle: float = 0.0
    note: str = ""

    def summary(self) -> dict:
        return {
            "vertices": [{"id": v.id, "value": v.value, "kind": v.kind, "degree": v.degree}
                         for v in self.vertices],
            "edges": [{"u": e.u, "v": e.v, "track": e.track} for e in self.edges],
            "components": self.components,
            "betti1": self.betti1,
        }


def _rotated(r: Region, angle_deg: float) -> Region:
    """Region in coordinates ``u`` with ``x = A u``, ``A`` the rotation by ``angle``."""
    th = math.radians(angle_deg)
    A = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    corners = np.array([[x, y] for x in (r.bbox_min[0], r.bbox_max[0]) for y in (r.bbox_min[1], r.bbox_max[1])])
    u = corners @ A  # A^T x for each corner
    return r.with_polys([p.linear_substitute(A) for p in r.boundary_polys], u.min(axis=0), u.max(axis=0))


def poincare_reeb(r: Region, sweep_res: int = 256, sweep_angle: float = 0.0) -> ReebGraph:
    """Sweep graph of a certified planar region.

    Raises :class:`NonGenericSweep` when two events share a sweep value or an
    event is not a birth, death, split or merge of a single interval.
    """
    if r.dim != 2:
        raise ValueError("the sweep graph is defined for planar regions only")
    if sweep_res < MIN_SWEEP_RES:
        raise ValueError(f"sweep_res must be >= {MIN_SWEEP_RES}")
    rr = _rotated(r, sweep_angle) if sweep_angle else r
    lo, hi = rr.bbox_min[0], rr.bbox_max[0]
    h = (hi - lo) / sweep_res
    coarse = [_slice(rr, lo + (i + 0.5) * h, 0.0, strict=False) for i in range(sweep_res)]
    if coarse[0].intervals or coarse[-1].intervals:
        raise SliceError("region reaches the first or last sweep slice; enlarge the bbox")
    slices = [coarse[0]]
    for sa, sb in zip(coarse[:-1], coarse[1:]):
        _refine(rr, sa, sb, slices)
        slices.append(sb)

    vertices: list[ReebVertex] = []
    edges: list[ReebEdge] = []
    track_start: dict[int, int] = {}
    tracks: list[int] = []  # track id for each interval of the current slice
    next_track = 0

    def open_track(v: int) -> int:
        nonlocal next_track
        track_start[next_track] = v
        next_track += 1
        return next_track - 1

    for sa, sb in zip(slices[:-1], slices[1:]):
        comps = _overlap_components(sa.intervals, sb.intervals)
        events = [g for g in comps if not (len(g[0]) == 1 and len(g[1]) == 1)]
        new_tracks = [-1] * len(sb.intervals)
        for ia, ib in comps:
            if len(ia) == 1 and len(ib) == 1:
                new_tracks[ib[0]] = tracks[ia[0]]
        if len(events) > 1:
            raise NonGenericSweep(
                f"{len(events)} events between x1={sa.c!r} and x1={sb.c!r}; "
                "rotate the sweep axis (sweep angle)"
            )
        for ia, ib in events:
            kind = {(0, 1): BIRTH, (1, 0): DEATH, (1, 2): SPLIT, (2, 1): MERGE}.get((len(ia), len(ib)))
            if kind is None:
                raise NonGenericSweep(
                    f"interval count changes {len(ia)} -> {len(ib)} near x1={0.5 * (sa.c + sb.c)!r}; "
                    "rotate the sweep axis (sweep angle)"
                )
            v = len(vertices)
            vertices.append(ReebVertex(v, 0.5 * (sa.c + sb.c), kind))
            for i in ia:
                t = tracks[i]
                edges.append(ReebEdge(track_start.pop(t), v, t))
            for j in ib:
                new_tracks[j] = open_track(v)
        tracks = new_tracks
    if track_start:
        raise SliceError("unterminated interval tracks at the end of the sweep")

    deg = [0] * len(vertices)
    ds = DisjointSet(len(vertices))
    for e in edges:
        deg[e.u] += 1
        deg[e.v] += 1
        ds.union(e.u, e.v)
    for v in vertices:
        v.degree = deg[v.id]
        if v.degree != _KIND_DEGREE[v.kind]:
            raise NonGenericSweep(f"vertex {v.kind} at {v.value!r} has degree {v.degree}")
    edges.sort(key=lambda e: e.track)
    comps = len(set(ds.roots())) if vertices else 0
    betti1 = len(edges) - len(vertices) + comps
    return ReebGraph(vertices, edges, comps, betti1, float(sweep_angle))


def reeb_of_composition(h: Hypersurface, sweep_res: int = 256, sweep_angle: float = 0.0) -> ReebGraph:
    """Reeb graph of ``x1`` on M0 for ``k >= 2``, isomorphic to the region's sweep graph."""
    if h.k == 1:
        raise NotSupported("k = 1: fibers are two points, so level sets on M0 are not in bijection "
                           "with slices of the region")
    if h.n != 2:
        raise NotSupported("the sweep graph needs a planar region")
    g = poincare_reeb(h.region, sweep_res, sweep_angle)
    g.note = (f"fibers are connected spheres S^{h.k - 1}, so each slice interval lifts to one "
              "connected level-set component of x1 on M0; the graphs are isomorphic")
    return g


def export_dot(g: ReebGraph, path) -> Path:
    """Undirected DOT text; nodes are labelled with kind and sweep value."""
    lines = ["graph reeb {"]
    for v in g.vertices:
        lines.append(f'  v{v.id} [label="{v.kind} {v.value:.9g}"];')
    for e in g.edges:
        lines.append(f'  v{e.u} -- v{e.v} [label="t{e.track}"];')
    lines.append("}")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
