import dataclasses

import numpy as np
import pytest

from sgmaps import analyze
from sgmaps.analyze import FiberClass
from sgmaps.construct import VerticalSpec, build_basic, build_generalized
from sgmaps.errors import SamplingError
from sgmaps.polynomial import MultiPoly, UniPoly, sum_of_squares

import shapes

T_ID = UniPoly([0.0, 1.0])


def ys(k):
    return [MultiPoly.variable(i, k) for i in range(k)]


@pytest.fixture(scope="module")
def sphere():
    return build_basic(shapes.disk(), 1)


@pytest.fixture(scope="module")
def torus():
    return build_basic(shapes.annulus(), 1)


def quartic_disk():
    (y,) = ys(1)
    return build_generalized(shapes.disk(), VerticalSpec(T_ID, y**4, 2.0, 1.0))


def mixed_disk():
    y1, y2 = ys(2)
    return build_generalized(shapes.disk(), VerticalSpec(T_ID, 2 * y1 * y1 + y2**4, 1.0, 1.0))


# -- sampling -------------------------------------------------------------

def test_sphere_samples_on_unit_sphere(sphere):
    s = analyze.sample_manifold(sphere, 1000, seed=0)
    assert len(s) >= 250
    for p in s:
        assert abs(np.linalg.norm(p.coords) - 1) <= 1e-8
        assert p.residual <= 1e-10


def test_empty_zero_set_raises(sphere):
    x1, x2, y = [MultiPoly.variable(i, 3) for i in range(3)]
    empty = dataclasses.replace(sphere, P=-1 - x1 * x1 - x2 * x2 - y * y)
    with pytest.raises(SamplingError):
        analyze.sample_manifold(empty, 200, seed=0)


def test_sampling_reproducible(torus):
    a = analyze.sample_manifold(torus, 300, seed=7)
    b = analyze.sample_manifold(torus, 300, seed=7)
    assert np.array_equal(np.array([p.coords for p in a]), np.array([p.coords for p in b]))
    c = analyze.sample_manifold(torus, 300, seed=8)
    assert not np.array_equal(np.array([p.coords for p in a[:10]]), np.array([p.coords for p in c[:10]]))


def test_torus_collar_identity(torus):
    s = analyze.sample_manifold(torus, 1000, seed=0)
    z = np.array([p.coords for p in s])
    prod = torus.region.product(z[:, :2])
    assert np.max(np.abs(z[:, 2] ** 2 - prod)) <= 1e-8


def test_generalized_collar_identity():
    h = mixed_disk()
    s = analyze.sample_manifold(h, 1000, seed=0)
    z = np.array([p.coords for p in s])
    assert np.max(np.abs(h.level(z[:, :2]) - h.fvert(z[:, 2:]))) <= 1e-8


def test_reflection_closure(torus):
    s = analyze.sample_manifold(torus, 300, seed=1)
    z = np.array([p.coords for p in s])
    z[:, 2:] *= -1
    _, res, conv = analyze.newton_project(torus.P, z)
    assert conv.all() and res.max() <= 1e-10


def test_count_must_be_positive(sphere):
    with pytest.raises(ValueError):
        analyze.sample_manifold(sphere, 0)


# -- non-singularity ------------------------------------------------------

def test_sphere_gradient_norm_two(sphere):
    s = analyze.sample_manifold(sphere, 500, seed=0)
    rep = analyze.verify_nonsingular(sphere, s, delta=1.0)
    assert rep.passed
    assert rep.min_grad_norm == pytest.approx(2.0, abs=1e-8)
    assert rep.descent_min_grad_norm == pytest.approx(2.0, abs=1e-8)


def test_duplicated_polynomial_is_singular():
    h = build_basic(shapes.duplicated_disk(), 1, require_certified=False)
    s = analyze.sample_manifold(h, 500, seed=0)
    rep = analyze.verify_nonsingular(h, s)
    assert not rep.passed
    assert rep.descent_min_grad_norm < rep.delta


def test_torus_margin(torus):
    s = analyze.sample_manifold(torus, 1000, seed=0)
    rep = analyze.verify_nonsingular(torus, s)
    assert rep.passed and rep.min_grad_norm > 0.1


# -- singular set ---------------------------------------------------------

def test_singular_set_disk(sphere):
    rep = analyze.singular_set_check(sphere, 1e-6)
    assert rep.passed
    c = np.array(rep.candidates)
    assert np.allclose(np.linalg.norm(c[:, :2], axis=1), 1.0, atol=1e-9)
    assert np.allclose(c[:, 2], 0.0, atol=1e-9)
    assert rep.hausdorff_to_boundary < 1e-6


def test_singular_set_interval_k2():
    h = build_basic(shapes.interval(), 2)
    rep = analyze.singular_set_check(h, 1e-6)
    assert rep.passed
    pts = np.unique(np.round(np.array(rep.candidates), 9), axis=0)
    assert pts.tolist() == [[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]


def test_singular_set_quartic_fiber():
    h = quartic_disk()
    rep = analyze.singular_set_check(h, 1e-6)
    assert rep.passed
    c = np.array(rep.candidates)
    assert np.allclose(np.linalg.norm(c[:, :2], axis=1), 1.0, atol=1e-9)


def test_singular_set_includes_interior_sweep(torus):
    s = analyze.sample_manifold(torus, 1000, seed=0)
    rep = analyze.singular_set_check(torus, 1e-6, samples=s)
    assert rep.passed and not rep.interior_violations


# -- fibers ---------------------------------------------------------------

def test_fiber_center_of_sphere(sphere):
    rep = analyze.fiber_at(sphere, (0.0, 0.0))
    assert rep.classification == FiberClass.TWO_POINTS
    assert rep.level == pytest.approx(1.0)
    assert sorted(rep.raw["roots"]) == pytest.approx([-1.0, 1.0], abs=1e-10)
    assert rep.ok


def test_fiber_on_boundary_is_point(sphere):
    rep = analyze.fiber_at(sphere, (1.0, 0.0))
    assert rep.classification == FiberClass.POINT and rep.ok
    assert rep.region_class == "boundary_band"


def test_fiber_mixed_quartic_is_circle():
    rep = analyze.fiber_at(mixed_disk(), (0.0, 0.0))
    assert rep.classification == FiberClass.CIRCLE
    assert rep.components == 1 and rep.euler_char == 0


def test_fiber_outside_region_rejected(sphere):
    with pytest.raises(ValueError):
        analyze.fiber_at(sphere, (1.05, 0.0))


def test_fiber_k3_not_computed():
    h = build_basic(shapes.disk(), 3)
    rep = analyze.fiber_at(h, (0.2, 0.1))
    assert rep.classification == FiberClass.NOT_COMPUTED
    assert rep.euler_char is None
    assert rep.components == 1
    assert rep.raw["union_radius"] > 0


@pytest.mark.parametrize("make,k", [
    (shapes.disk, 1), (shapes.disk, 2), (shapes.interval, 1), (shapes.interval, 2),
    (shapes.annulus, 1), (shapes.annulus, 2), (shapes.two_holed_disk, 1), (shapes.two_holed_disk, 2),
])
def test_fiber_suite_certified_examples(make, k):
    h = build_basic(make(), k)
    reps = analyze.fiber_suite(h)
    assert reps
    assert all(r.ok for r in reps)
    assert not any(r.classification == FiberClass.UNKNOWN for r in reps)
    kinds = {r.region_class for r in reps}
    assert kinds == {"interior", "boundary_band"}


# -- collar model ---------------------------------------------------------

def test_collar_disk(sphere):
    rep = analyze.collar_model_check(sphere)
    assert rep.passed and rep.rays > 0


def test_collar_interval_k2():
    assert analyze.collar_model_check(build_basic(shapes.interval(), 2)).passed


def test_collar_quartic():
    assert analyze.collar_model_check(quartic_disk()).passed


def test_collar_detects_non_monotone_profile():
    # f0 rises then falls on [0, top/T]: the fiber shrinks again deeper inside
    h = build_generalized(shapes.disk(), VerticalSpec(UniPoly([0.0, 1.0, -0.9]), sum_of_squares(1), 1.0, 1.0))
    rep = analyze.collar_model_check(h, band=0.9)
    assert not rep.passed
    assert rep.failures[0]["reason"] == "fiber extent not increasing"
