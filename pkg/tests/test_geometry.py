import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from perfospec import geometry as G
from perfospec.errors import NonSimpleCurve


def fine_area(shape, n=1_000_000):
    th = 2 * np.pi * np.arange(n) / n
    p = shape.point(th)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


class TestAngularFunction:
    def test_periodic_and_derivative(self):
        f = G.AngularFunction(1.5, (0.3, -0.2), (0.1, 0.0, 0.4))
        th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        np.testing.assert_allclose(f(th), f(th + 2 * np.pi), atol=1e-13)
        h = 1e-6
        fd = (f(th + h) - f(th - h)) / (2 * h)
        np.testing.assert_allclose(f.derivative()(th), fd, rtol=1e-6, atol=1e-8)

    def test_round_trip(self):
        f = G.AngularFunction(2.0, (1.0,), (0.5, 0.25))
        assert G.AngularFunction.from_dict(f.to_dict()) == f


class TestBoundary:
    def test_circle_points(self):
        np.testing.assert_allclose(G.boundary_point(G.StarShape.circle(), 0.0), (1.0, 0.0), atol=1e-15)
        np.testing.assert_allclose(G.boundary_point(G.StarShape.circle(2.0), np.pi / 2), (0.0, 2.0), atol=1e-15)

    def test_curvilinear_example_at_zero(self):
        shape = G.StarShape.curvilinear_example(radial_scale=1.7)
        np.testing.assert_allclose(G.boundary_point(shape, 0.0), (3 * 1.7, 0.0), atol=1e-14)

    def test_omega_rewrite_matches_quotient_form(self):
        shape = G.StarShape.curvilinear_example()
        th = np.linspace(0.1, 3.0, 50)
        direct = 2 + np.sin(3 * th) / (6 * np.sin(th)) + np.sin(5 * th) / (10 * np.sin(th))
        np.testing.assert_allclose(shape.omega(th), direct, rtol=1e-13)

    def test_scaled_boundary_four_points(self):
        hole = G.HoleInstance(G.StarShape.circle(), 0.1, (0.0, 0.0))
        pts = G.scaled_boundary(hole, 4)
        np.testing.assert_allclose(pts, [(0.1, 0), (0, 0.1), (-0.1, 0), (0, -0.1)], atol=1e-15)
        shifted = G.scaled_boundary(G.HoleInstance(G.StarShape.circle(), 0.1, (0.5, 0.5)), 4)
        np.testing.assert_allclose(shifted, pts + 0.5, atol=1e-15)
        assert G.polygon_area(pts) > 0  # counter-clockwise

    def test_scaled_curvilinear_within_extremes(self):
        shape = G.StarShape.curvilinear_example()
        lo, hi = G.radial_extremes(shape)
        hole = G.HoleInstance(shape, 0.05, (0.2, -0.1))
        r = np.linalg.norm(G.scaled_boundary(hole, 512) - np.array(hole.center), axis=1)
        assert np.all(r >= lo * 0.05 - 1e-14) and np.all(r <= hi * 0.05 + 1e-14)


class TestArea:
    def test_circle_and_ellipse(self):
        assert G.area(G.StarShape.circle()) == pytest.approx(math.pi, abs=1e-10)
        assert G.area(G.StarShape.ellipse(2.0, 0.5)) == pytest.approx(math.pi, abs=1e-10)
        assert G.area(G.StarShape.ellipse(1.5, 0.7)) == pytest.approx(math.pi * 1.05, abs=1e-10)

    def test_curvilinear_area_against_fine_polygon(self):
        shape = G.StarShape.curvilinear_example()
        assert G.area(shape) == pytest.approx(fine_area(shape), rel=1e-10)
        # regression value pinned after the fine-quadrature comparison: 4.5 pi
        assert G.area(shape) == pytest.approx(14.137166941154069, rel=1e-13)

    def test_effective_radius(self):
        assert G.effective_radius(G.StarShape.circle()) == pytest.approx(1.0)
        assert G.effective_radius(G.StarShape.ellipse(2.0, 0.5)) == pytest.approx(1.0)
        shape = G.StarShape.curvilinear_example()
        assert G.effective_radius(shape) == pytest.approx(math.sqrt(G.area(shape) / math.pi))

    def test_extremes(self):
        assert G.radial_extremes(G.StarShape.circle()) == pytest.approx((1.0, 1.0))
        assert G.radial_extremes(G.StarShape.ellipse(2.0, 0.5)) == pytest.approx((0.5, 2.0))
        shape = G.StarShape.curvilinear_example()
        th = 2 * np.pi * np.arange(1_000_000) / 1_000_000
        r = np.linalg.norm(shape.point(th), axis=1)
        lo, hi = G.radial_extremes(shape)
        assert lo == pytest.approx(r.min(), rel=1e-5) and hi == pytest.approx(r.max(), rel=1e-12)

    def test_non_simple_curve_raises(self):
        # beta changes sign, so the curve winds the wrong way over part of the period
        bad = G.StarShape(G.AngularFunction(0.2, (0.0, 1.0)), G.AngularFunction(0.2, (0.0, 1.0)))
        with pytest.raises(NonSimpleCurve):
            G.area(bad)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.2, 3.0), st.floats(0.2, 3.0), st.floats(0.1, 5.0))
    def test_quadratic_scaling_and_radius_bounds(self, a, b, s):
        base = G.StarShape.ellipse(a, b)
        scaled = G.StarShape(base.beta, base.omega, s)
        assert G.area(scaled) == pytest.approx(s * s * G.area(base), rel=1e-12)
        lo, hi = G.radial_extremes(scaled)
        M = G.effective_radius(scaled)
        assert lo - 1e-12 <= M <= hi + 1e-12


class TestAssumptions:
    def test_circle_passes(self):
        rep = G.check_assumptions(G.StarShape.circle(3.0))
        assert rep.orthogonality_residual <= 1e-12
        assert rep.passes and rep.winding_number == 1

    def test_ellipse_fails_condition_three(self):
        rep = G.check_assumptions(G.StarShape.ellipse(2.0, 1.0))
        assert rep.orthogonality_residual == pytest.approx(1.5, rel=1e-6)
        assert not rep.orthogonal and not rep.passes
        assert rep.star_shaped and rep.beta_positive and rep.omega_positive

    def test_curvilinear_example_measured(self):
        # The claimed example fails condition (iii) and is not star-shaped; residual pinned.
        rep = G.check_assumptions(G.StarShape.curvilinear_example())
        assert rep.orthogonality_residual == pytest.approx(7.8777, rel=1e-4)
        assert not rep.star_shaped
        assert not rep.passes
        assert rep.periodicity_residual <= 1e-12

    def test_report_serializes(self):
        d = G.check_assumptions(G.StarShape.circle()).to_dict()
        assert json.loads(json.dumps(d))["passes"] is True


class TestHoleInstance:
    def test_projection_onto_curve(self):
        hole = G.HoleInstance(G.StarShape.ellipse(2.0, 0.5), 0.1, (0.3, 0.2))
        rng = np.random.default_rng(1)
        pts = np.array(hole.center) + 0.3 * rng.standard_normal((50, 2))
        proj = hole.project(pts)
        assert np.max(hole.distance_to_boundary(proj)) < 1e-12
        # projection is a local minimizer of the distance: residual normal to the tangent
        th = hole.shape.closest_theta((pts - np.array(hole.center)) / 0.1)
        t = hole.shape.tangent(th)
        dots = np.sum((proj - pts) * t, axis=1) / (np.linalg.norm(t, axis=1) * np.linalg.norm(proj - pts, axis=1))
        assert np.max(np.abs(dots)) < 1e-8

    def test_area_scales(self):
        hole = G.HoleInstance(G.StarShape.circle(), 0.05)
        assert hole.area == pytest.approx(math.pi * 0.0025)

    def test_rejects_nonpositive_eps(self):
        with pytest.raises(ValueError):
            G.HoleInstance(G.StarShape.circle(), 0.0)


def test_shape_file_round_trip(tmp_path):
    shape = G.StarShape.curvilinear_example(radial_scale=0.5)
    path = tmp_path / "s.json"
    shape.dump(path)
    assert G.StarShape.load(path) == shape
