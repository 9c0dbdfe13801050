import math

import numpy as np
import pytest

from flagcones.flags import (
    Flag,
    ProjectiveCovector,
    ProjectivePoint,
    act_on_flag,
    random_flag,
    random_group_elem,
)
from flagcones.plane import (
    BoundaryPoint,
    PlanePoint,
    ReduciblePlaneFrame,
    boundary_fiber_contains,
    conic_eval,
    criticality_residual,
    dual_conic_eval,
    fiber_over_interior,
    plane_geodesic_point,
    project,
)


def std_flag(x, y):
    return Flag(ProjectivePoint(x), ProjectiveCovector(y))


def random_plane_point(rng, spread=1.2):
    w = rng.normal() * spread
    v = rng.normal() * spread
    a = math.exp(w)
    c = v * math.exp(w)
    return PlanePoint(a, (1 + c * c) / a, c)


def test_fiber_over_identity_examples():
    f0 = fiber_over_interior(PlanePoint.identity(), 0.0)
    assert f0.same_as(std_flag([1, 1, 0], [-1, 1, 0]), tol=1e-14)
    f1 = fiber_over_interior(PlanePoint.identity(), math.pi / 2)
    assert f1.same_as(std_flag([0, 1, 1], [0, 1, -1]), tol=1e-14)


def test_conic_eval_examples():
    assert conic_eval(ProjectivePoint([1, 1, 0])) == pytest.approx(0.0, abs=1e-15)
    assert conic_eval(ProjectivePoint([1, 0, 0])) == pytest.approx(1.0)
    assert conic_eval(ProjectivePoint([0, 1, 0])) == pytest.approx(-1.0)


def test_fiber_lines_on_conic_planes_tangent():
    rng = np.random.default_rng(0)
    for _ in range(10):
        x = random_plane_point(rng, spread=0.0)  # identity
        for theta in np.linspace(0, 2 * math.pi, 64, endpoint=False):
            f = fiber_over_interior(x, theta)
            assert abs(conic_eval(f.line)) <= 1e-14
            assert abs(dual_conic_eval(f.plane)) <= 1e-14


def test_criticality_residual_examples():
    for theta in np.linspace(0, 2 * math.pi, 16, endpoint=False):
        f = fiber_over_interior(PlanePoint.identity(), theta)
        assert criticality_residual(f, PlanePoint.identity()) <= 1e-15
    f = std_flag([1, 0, -1], [1, 0, 1])
    assert criticality_residual(f, PlanePoint.identity()) == pytest.approx(2.0, abs=1e-14)


def test_criticality_residual_scale_invariant():
    rng = np.random.default_rng(1)
    for _ in range(20):
        f = random_flag(rng)
        x = random_plane_point(rng)
        r1 = criticality_residual(f, x)
        f2 = std_flag(5.1 * f.line.coords, -0.3 * f.plane.coords)
        assert criticality_residual(f2, x) == pytest.approx(r1, abs=1e-12)


def test_boundary_point_flags():
    a0 = BoundaryPoint(0.0)
    assert a0.flag.same_as(std_flag([1, 0, 0], [0, 0, 1]), tol=1e-14)
    a = BoundaryPoint(math.pi / 2)
    assert a.flag.same_as(std_flag([0, 0, 1], [1, 0, 0]), tol=1e-14)
    # same flag for phi and phi + pi, distinct otherwise
    assert BoundaryPoint(0.3).flag.same_as(BoundaryPoint(0.3 + math.pi).flag)
    assert not BoundaryPoint(0.3).flag.same_as(BoundaryPoint(1.1).flag)


def test_boundary_fiber_contains_examples():
    a = BoundaryPoint(0.0)
    assert boundary_fiber_contains(a, std_flag([1, 0, 0], [0, 1, 0]))
    assert boundary_fiber_contains(a, a.flag)
    b = BoundaryPoint(math.pi / 2)
    assert not boundary_fiber_contains(a, b.flag)
    # distinct boundary points have disjoint fibers (transverse flags)
    rng = np.random.default_rng(2)
    for _ in range(200):
        phi1, phi2 = rng.uniform(0, math.pi, size=2)
        if abs(phi1 - phi2) < 1e-3 or abs(abs(phi1 - phi2) - math.pi) < 1e-3:
            continue
        y = rng.normal(size=3)
        f1 = BoundaryPoint(phi1)
        y -= np.dot(y, f1.flag.line.coords) * f1.flag.line.coords
        if np.linalg.norm(y) < 1e-6:
            continue
        probe = Flag(f1.flag.line, ProjectiveCovector(y))
        assert not boundary_fiber_contains(BoundaryPoint(phi2), probe)


def test_project_interior_example():
    pr = project(std_flag([1, 1, 0], [-1, 1, 0]))
    assert pr.is_interior
    assert pr.point.same_as(PlanePoint.identity(), tol=1e-9)


def test_project_boundary_example():
    pr = project(std_flag([1, 0, 0], [0, 1, 0]))
    assert not pr.is_interior
    assert pr.boundary.same_as(BoundaryPoint(0.0), tol=1e-12)


def test_project_fiber_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = random_plane_point(rng)
        for theta in np.linspace(0, 2 * math.pi, 32, endpoint=False):
            f = fiber_over_interior(x, theta)
            pr = project(f)
            assert pr.is_interior
            assert np.abs(pr.point.mat - x.mat).max() <= 1e-6


def test_project_continuity():
    rng = np.random.default_rng(4)
    for _ in range(20):
        x = random_plane_point(rng, spread=0.8)
        f = fiber_over_interior(x, rng.uniform(0, 2 * math.pi))
        pr0 = project(f)
        eps = 1e-6
        line = f.line.coords + eps * rng.normal(size=3)
        plane = f.plane.coords.copy()
        plane -= np.dot(plane, line) / np.dot(line, line) * line
        pr1 = project(std_flag(line, plane))
        assert pr1.is_interior
        assert np.abs(pr1.point.mat - pr0.point.mat).max() <= 1e-3


def test_project_equivariance():
    rng = np.random.default_rng(5)
    for _ in range(25):
        g = random_group_elem(rng)
        frame = ReduciblePlaneFrame(g)
        x = random_plane_point(rng, spread=0.7)
        f = fiber_over_interior(x, rng.uniform(0, 2 * math.pi))
        pr_model = project(f)
        pr_moved = project(act_on_flag(g, f), frame=frame)
        assert pr_moved.is_interior
        assert np.abs(pr_moved.point.mat - pr_model.point.mat).max() <= 1e-6


def test_strict_convexity_of_exp_along_plane_geodesics():
    # e^(b) has positive second differences along plane geodesics (lambda = 1)
    rng = np.random.default_rng(6)
    from flagcones.flags import busemann, SpdPoint

    origin = SpdPoint.identity()
    count = 0
    while count < 100:
        f = random_flag(rng)
        p = random_plane_point(rng, spread=0.6)
        q = random_plane_point(rng, spread=0.6)
        if np.abs(p.mat - q.mat).max() < 1e-3:
            continue
        count += 1
        vals = []
        for s in (0.0, 0.5, 1.0):
            pt = plane_geodesic_point(p, q, s)
            vals.append(math.exp(busemann(f, origin, pt.spd())))
        assert vals[0] + vals[2] - 2 * vals[1] > 0


def test_projection_rejects_degenerate_near_boundary():
    # a flag sharing its line with a boundary flag detects as boundary even
    # when the plane component is generic
    f = std_flag([math.cos(0.7), 0.0, math.sin(0.7)], [-math.sin(0.7), 2.0, math.cos(0.7)])
    pr = project(f)
    assert not pr.is_interior
    assert pr.boundary.same_as(BoundaryPoint(0.7), tol=1e-12)
