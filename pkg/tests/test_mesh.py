import numpy as np
import pytest

from sgmaps.construct import build_basic
from sgmaps.errors import MeshError
from sgmaps.mesh import (
    Mesh, component_count, euler_char, export_obj, extract_isosurface, is_closed, marching_squares,
    split_components, stable_topology, weld,
)
from sgmaps.polynomial import MultiPoly

import shapes


def read_obj(path):
    """Minimal OBJ reader written independently of the exporter."""
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                verts.append([float(v) for v in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(v.split("/")[0]) - 1 for v in parts[1:]])
    return np.array(verts), np.array(faces)


def chi_from_faces(nv, faces):
    edges = set()
    for a, b, c in faces:
        for u, v in ((a, b), (b, c), (c, a)):
            edges.add((min(u, v), max(u, v)))
    return nv - len(edges) + len(faces)


@pytest.fixture(scope="module")
def sphere_mesh():
    x1, x2, y = [MultiPoly.variable(i, 3) for i in range(3)]
    return extract_isosurface(1 - x1 * x1 - x2 * x2 - y * y, (-1.2,) * 3, (1.2,) * 3, 64)


@pytest.fixture(scope="module")
def torus_mesh():
    h = build_basic(shapes.annulus(), 1)
    return extract_isosurface(h.P, h.bbox_min, h.bbox_max, 96)


def test_sphere_mesh(sphere_mesh):
    assert is_closed(sphere_mesh)
    assert euler_char(sphere_mesh) == 2
    assert component_count(sphere_mesh) == 1


def test_torus_mesh(torus_mesh):
    assert is_closed(torus_mesh)
    assert euler_char(torus_mesh) == 0
    assert component_count(torus_mesh) == 1


def test_two_holed_double():
    h = build_basic(shapes.two_holed_disk(), 1)
    m = extract_isosurface(h.P, h.bbox_min, h.bbox_max, 96)
    assert euler_char(m) == -2


def test_circle_polyline():
    x1, x2 = shapes.xs(2)
    m = extract_isosurface(1 - x1 * x1 - x2 * x2, (-1.2, -1.2), (1.2, 1.2), 64)
    assert m.cell_size == 2
    assert is_closed(m)
    assert euler_char(m) == 0
    assert component_count(m) == 1
    s = m.summary()
    assert s["faces"] == 0 and s["edges"] == s["vertices"]


def test_two_interval_construction_components():
    h = build_basic(shapes.two_intervals(), 1)
    m = extract_isosurface(h.P, h.bbox_min, h.bbox_max, 128)
    assert component_count(m) == 2
    assert [euler_char(c) for c in split_components(m)] == [0, 0]


def test_mesh_invariants(sphere_mesh):
    m = sphere_mesh
    c = m.cells
    assert np.all(c[:, 0] != c[:, 1]) and np.all(c[:, 1] != c[:, 2]) and np.all(c[:, 0] != c[:, 2])
    assert np.array_equal(np.unique(c), np.arange(m.vertices.shape[0]))
    from scipy.spatial import cKDTree
    assert not cKDTree(m.vertices).query_pairs(m.weld_tol / 2)


def test_interpolation_residual_bound():
    h = build_basic(shapes.annulus(), 1)
    res = 64
    m = extract_isosurface(h.P, h.bbox_min, h.bbox_max, res)
    lo, hi = np.array(h.bbox_min), np.array(h.bbox_max)
    diag = float(np.linalg.norm((hi - lo) / (res - 1)))
    # Lipschitz bound of P on the box from the gradient on a fine sample
    rng = np.random.default_rng(0)
    pts = lo + (hi - lo) * rng.random((20000, 3))
    lip = max(np.linalg.norm(np.stack([g(pts) for g in h.P.gradient()], axis=-1), axis=1))
    assert np.max(np.abs(h.P(m.vertices))) <= 2 * lip * diag


def test_reflection_invariance():
    h = build_basic(shapes.two_holed_disk(), 1)
    flipped = h.P.linear_substitute(np.diag([1.0, 1.0, -1.0]))
    a = extract_isosurface(h.P, h.bbox_min, h.bbox_max, 64).summary()
    b = extract_isosurface(flipped, h.bbox_min, h.bbox_max, 64).summary()
    assert (a["euler"], a["components"]) == (b["euler"], b["components"])


def test_topology_stable_under_doubling():
    for make in (shapes.disk, shapes.annulus, shapes.two_holed_disk):
        h = build_basic(make(), 1)
        a, b = stable_topology(h.P, h.bbox_min, h.bbox_max, 64)
        assert (a["euler"], a["components"]) == (b["euler"], b["components"])


def test_surface_touching_box_rejected():
    x1, x2, y = [MultiPoly.variable(i, 3) for i in range(3)]
    with pytest.raises(MeshError):
        extract_isosurface(1 - x1 * x1 - x2 * x2 - y * y, (-0.9,) * 3, (0.9,) * 3, 32)


def test_extract_preconditions():
    with pytest.raises(ValueError):
        extract_isosurface(MultiPoly.variable(0, 4), (-1,) * 4, (1,) * 4, 16)
    x1, x2 = shapes.xs(2)
    with pytest.raises(ValueError):
        extract_isosurface(1 - x1 * x1 - x2 * x2, (-2, -2), (2, 2), 8)


def test_exact_zero_grid_values_perturbed():
    # the grid hits the zero set exactly at (+-1, 0) and (0, +-1)
    x1, x2 = shapes.xs(2)
    m = extract_isosurface(1 - x1 * x1 - x2 * x2, (-1.5, -1.5), (1.5, 1.5), 61)
    assert is_closed(m) and euler_char(m) == 0 and component_count(m) == 1


def test_marching_squares_saddle_decider():
    xs = ys = np.array([0.0, 1.0])
    # positive corners (0,0) and (1,1); the bilinear saddle value decides which pair is joined
    def cut_corners(vals):
        verts, segs = marching_squares(np.array(vals), xs, ys)
        assert segs.shape[0] == 2
        # each segment cuts off the corner nearest to its midpoint
        mids = verts[segs].mean(axis=1)
        return sorted(tuple(np.round(m).astype(int)) for m in mids)

    # saddle value (2*1 - 1*1)/(2+1+1+1) > 0: positives connect, negatives are cut off
    assert cut_corners([[2.0, -1.0], [-1.0, 1.0]]) == [(0, 1), (1, 0)]
    # saddle value (1*1 - 2*2)/(1+1+2+2) < 0: positives are cut off
    assert cut_corners([[1.0, -2.0], [-2.0, 1.0]]) == [(0, 0), (1, 1)]


def test_non_manifold_edge_detected():
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0, -1, 0]], dtype=float)
    cells = np.array([[0, 1, 2], [0, 1, 3], [0, 1, 4]])
    with pytest.raises(MeshError, match="non-manifold edge"):
        euler_char(Mesh(verts, cells, 1e-9))


def test_weld_merges_duplicates_and_drops_degenerate():
    verts = np.array([[0, 0], [1, 0], [1, 1e-12], [2, 0]], dtype=float)
    cells = np.array([[0, 1], [2, 3], [1, 2]])
    m = weld(verts, cells, 1e-9)
    assert m.vertices.shape[0] == 3
    assert m.cells.shape[0] == 2


def test_component_count_empty():
    m = Mesh(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64), 1e-9)
    assert component_count(m) == 0


def test_obj_vertex_count(sphere_mesh, tmp_path):
    path = export_obj(sphere_mesh, tmp_path / "sphere.obj")
    v, f = read_obj(path)
    assert v.shape[0] == sphere_mesh.vertices.shape[0]
    assert f.shape[0] == sphere_mesh.cells.shape[0]


def test_obj_round_trip_euler(torus_mesh, tmp_path):
    path = export_obj(torus_mesh, tmp_path / "torus.obj")
    v, f = read_obj(path)
    assert chi_from_faces(v.shape[0], f) == euler_char(torus_mesh) == 0
    assert np.array_equal(v, torus_mesh.vertices)


def test_obj_deterministic(sphere_mesh, tmp_path):
    a = export_obj(sphere_mesh, tmp_path / "a.obj").read_bytes()
    b = export_obj(sphere_mesh, tmp_path / "b.obj").read_bytes()
    assert a == b


def test_obj_empty_mesh_rejected(tmp_path):
    m = Mesh(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64), 1e-9)
    with pytest.raises(MeshError):
        export_obj(m, tmp_path / "empty.obj")


def test_obj_io_failure(sphere_mesh, tmp_path):
    with pytest.raises(OSError):
        export_obj(sphere_mesh, tmp_path / "missing" / "x.obj")
