"""Zero-set extraction for polynomials in two or three variables.

Curves come from marching squares, surfaces from marching cubes (Lewiner's
variant, which resolves ambiguous faces with the asymptotic decider). The
Euler characteristic and component count of the result are the global
topology oracles for the constructed hypersurfaces.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from skimage.measure import marching_cubes

from .errors import MeshError
from .polynomial import MultiPoly


class DisjointSet:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            if ri < rj:
                self.parent[rj] = ri
            else:
                self.parent[ri] = rj

    def roots(self) -> list[int]:
        return [self.find(i) for i in range(len(self.parent))]


@dataclass(frozen=True, eq=False)
class Mesh:
    """Vertices with segment (2-D) or triangle (3-D) cells."""

    vertices: np.ndarray
    cells: np.ndarray
    weld_tol: float

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def cell_size(self) -> int:
        return self.cells.shape[1]

    @cached_property
    def _edge_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique undirected edges (sorted) and how many cells use each."""
        if self.cells.shape[0] == 0:
            return np.empty((0, 2), dtype=np.int64), np.empty(0, dtype=np.int64)
        c = self.cells
        e = c if c.shape[1] == 2 else np.concatenate([c[:, [0, 1]], c[:, [1, 2]], c[:, [2, 0]]])
        e = np.sort(e, axis=1)
        nv = np.int64(self.vertices.shape[0])
        keys, counts = np.unique(e[:, 0] * nv + e[:, 1], return_counts=True)
        return np.stack([keys // nv, keys % nv], axis=1), counts

    def edges(self) -> np.ndarray:
        """Unique undirected edges, sorted."""
        return self._edge_table[0]

    def summary(self) -> dict:
        e = self.edges()
        faces = self.cells.shape[0] if self.cell_size == 3 else 0
        return {
            "vertices": int(self.vertices.shape[0]),
            "edges": int(e.shape[0]),
            "faces": int(faces),
            "euler": euler_char(self),
            "components": component_count(self),
        }


def weld(vertices: np.ndarray, cells: np.ndarray, weld_tol: float) -> Mesh:
    """Merge vertices closer than ``weld_tol``, drop degenerate cells and unused vertices."""
    vertices = np.asarray(vertices, dtype=float)
    cells = np.asarray(cells, dtype=np.int64)
    n = vertices.shape[0]
    rep = np.arange(n)
    if n:
        pairs = cKDTree(vertices).query_pairs(weld_tol, output_type="ndarray")
        if len(pairs):
            ds = DisjointSet(n)
            for i, j in pairs:
                ds.union(int(i), int(j))
            rep = np.array(ds.roots())
    cells = rep[cells] if cells.size else cells.reshape(0, cells.shape[1] if cells.ndim == 2 else 3)
    if cells.size:
        ok = np.ones(cells.shape[0], dtype=bool)
        for a in range(cells.shape[1]):
            for b in range(a + 1, cells.shape[1]):
                ok &= cells[:, a] != cells[:, b]
        cells = cells[ok]
    used = np.unique(cells)
    remap = np.full(n, -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    # each kept vertex sits at its cluster mean
    sums = np.zeros((used.size, vertices.shape[1]))
    cnt = np.zeros(used.size)
    members = remap[rep]
    valid = members >= 0
    np.add.at(sums, members[valid], vertices[valid])
    np.add.at(cnt, members[valid], 1)
    verts = sums / np.maximum(cnt, 1)[:, None]
    return Mesh(verts, remap[cells] if cells.size else cells, weld_tol)


# marching squares: corners 0=(i,j) 1=(i+1,j) 2=(i+1,j+1) 3=(i,j+1)
# edges 0:(0,1) 1:(1,2) 2:(3,2) 3:(0,3)
_EDGE_CORNERS = ((0, 1), (1, 2), (3, 2), (0, 3))
_SQUARE_SEGMENTS = {
    1: [(0, 3)], 2: [(0, 1)], 3: [(1, 3)], 4: [(1, 2)], 6: [(0, 2)], 7: [(2, 3)],
    8: [(2, 3)], 9: [(0, 2)], 11: [(1, 2)], 12: [(1, 3)], 13: [(0, 1)], 14: [(0, 3)],
}


def marching_squares(values: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Segments of the zero contour of grid ``values`` (shape ``(len(xs), len(ys))``).

    Returns ``(vertices, segments)``; vertices on shared grid edges are shared.
    Saddle cells are split by the sign of the bilinear interpolant at its
    saddle point (asymptotic decider).
    """
    v = values
    pos = v > 0
    case = (pos[:-1, :-1].astype(np.int8) | (pos[1:, :-1] << 1)
            | (pos[1:, 1:] << 2) | (pos[:-1, 1:] << 3))
    verts: list[tuple[float, float]] = []
    index: dict[tuple[int, int, int], int] = {}
    segs: list[tuple[int, int]] = []

    def corner(i, j, c):
        return (i + (c in (1, 2)), j + (c in (2, 3)))

    def vertex(i, j, e):
        (ca, cb) = _EDGE_CORNERS[e]
        pa, pb = corner(i, j, ca), corner(i, j, cb)
        key = (pa[0], pa[1], 0 if pa[1] == pb[1] else 1)
        if key not in index:
            va, vb = v[pa], v[pb]
            t = va / (va - vb)
            x = xs[pa[0]] + t * (xs[pb[0]] - xs[pa[0]])
            y = ys[pa[1]] + t * (ys[pb[1]] - ys[pa[1]])
            index[key] = len(verts)
            verts.append((x, y))
        return index[key]

    for i, j in zip(*np.nonzero((case != 0) & (case != 15))):
        c = int(case[i, j])
        if c in (5, 10):
            a, b, cc, d = v[i, j], v[i + 1, j], v[i + 1, j + 1], v[i, j + 1]
            den = a + cc - b - d
            saddle = (a * cc - b * d) / den if den != 0 else 0.25 * (a + b + cc + d)
            if (c == 5) == (saddle > 0):
                pairs = [(0, 1), (2, 3)]
            else:
                pairs = [(0, 3), (1, 2)]
        else:
            pairs = _SQUARE_SEGMENTS[c]
        for ea, eb in pairs:
            segs.append((vertex(i, j, ea), vertex(i, j, eb)))
    return np.array(verts, dtype=float).reshape(-1, 2), np.array(segs, dtype=np.int64).reshape(-1, 2)


def _grid_values(p: MultiPoly, lo, hi, res: int):
    axes = [np.linspace(a, b, res) for a, b in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    vals = np.asarray(p(pts), dtype=float)
    scale = float(np.max(np.abs(vals))) or 1.0
    vals = np.where(vals == 0.0, 1e-12 * scale, vals)
    return axes, vals


def _boundary_signs(vals: np.ndarray) -> np.ndarray:
    faces = []
    for ax in range(vals.ndim):
        faces.append(np.take(vals, 0, axis=ax).ravel())
        faces.append(np.take(vals, -1, axis=ax).ravel())
    return np.sign(np.concatenate(faces))


def extract_isosurface(p: MultiPoly, bbox_min, bbox_max, res: int) -> Mesh:
    """Zero set of ``p`` on a ``res``-per-axis grid over the box."""
    if p.nvars not in (2, 3):
        raise ValueError("isosurface extraction needs 2 or 3 variables")
    if res < 16:
        raise ValueError("res must be >= 16")
    lo = np.asarray(bbox_min, dtype=float)
    hi = np.asarray(bbox_max, dtype=float)
    axes, vals = _grid_values(p, lo, hi, res)
    signs = _boundary_signs(vals)
    if np.any(signs != signs[0]):
        raise MeshError("zero set touches the bounding box faces; enlarge the box")
    spacing = (hi - lo) / (res - 1)
    weld_tol = float(np.linalg.norm(spacing)) * 1e-6
    if p.nvars == 2:
        verts, cells = marching_squares(vals, axes[0], axes[1])
    else:
        if np.all(vals > 0) or np.all(vals < 0):
            verts, cells = np.empty((0, 3)), np.empty((0, 3), dtype=np.int64)
        else:
            verts, cells, _, _ = marching_cubes(vals, 0.0, spacing=tuple(spacing), method="lewiner")
            verts = verts + lo
    return weld(verts, cells, weld_tol)


def euler_char(m: Mesh) -> int:
    """``V - E + F`` with edges counted once; rejects non-manifold edges/vertices."""
    nv = m.vertices.shape[0]
    if m.cells.shape[0] == 0:
        return nv
    if m.cell_size == 2:
        deg = np.bincount(m.cells.ravel(), minlength=nv)
        if np.any(deg > 2):
            raise MeshError(f"non-manifold vertex {int(np.argmax(deg))} with degree {int(deg.max())}")
        return nv - m.edges().shape[0]
    c = m.cells
    ue, counts = m._edge_table
    if np.any(counts > 2):
        bad = ue[np.argmax(counts)]
        raise MeshError(f"non-manifold edge {bad.tolist()} with {int(counts.max())} incident triangles")
    return nv - ue.shape[0] + c.shape[0]


def is_closed(m: Mesh) -> bool:
    if m.cells.shape[0] == 0:
        return True
    if m.cell_size == 2:
        deg = np.bincount(m.cells.ravel(), minlength=m.vertices.shape[0])
        return bool(np.all(deg == 2))
    return bool(np.all(m._edge_table[1] == 2))


def _vertex_labels(m: Mesh) -> tuple[int, np.ndarray]:
    nv = m.vertices.shape[0]
    if nv == 0:
        return 0, np.empty(0, dtype=np.int64)
    e = m.edges()
    adj = coo_matrix((np.ones(e.shape[0]), (e[:, 0], e[:, 1])), shape=(nv, nv))
    return connected_components(adj, directed=False)


def component_count(m: Mesh) -> int:
    return int(_vertex_labels(m)[0])


def split_components(m: Mesh) -> list[Mesh]:
    """One mesh per connected component, ordered by lowest vertex index."""
    count, labels = _vertex_labels(m)
    out = []
    cell_label = labels[m.cells[:, 0]] if m.cells.size else np.empty(0, dtype=np.int64)
    for lab in range(count):
        cells = m.cells[cell_label == lab]
        used = np.unique(cells)
        remap = np.full(m.vertices.shape[0], -1, dtype=np.int64)
        remap[used] = np.arange(used.size)
        out.append(Mesh(m.vertices[used], remap[cells], m.weld_tol))
    return out


def export_obj(m: Mesh, path) -> Path:
    if m.dim != 3 or m.cell_size != 3:
        raise MeshError("OBJ export needs a triangle mesh in 3-D")
    if m.cells.shape[0] == 0:
        raise MeshError("mesh is empty")
    path = Path(path)
    lines = ["# sgmaps zero-set mesh"]
    lines += [f"v {x!r} {y!r} {z!r}" for x, y, z in m.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in m.cells.tolist()]
    path.write_text("\n".join(lines) + "\n")
    return path


def stable_topology(p: MultiPoly, bbox_min, bbox_max, res: int) -> tuple[dict, dict]:
    """Mesh summaries at ``res`` and ``2 * res``; topology claims need them to agree."""
    a = extract_isosurface(p, bbox_min, bbox_max, res).summary()
    b = extract_isosurface(p, bbox_min, bbox_max, 2 * res).summary()
    return a, b
