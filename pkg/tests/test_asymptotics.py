import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perfospec import asymptotics as A
from perfospec import geometry as G
from perfospec import mesh as M
from perfospec.errors import DegenerateMode

J01 = 2.404825557695772768621631879326454643124  # first zero of J0 (mpmath, 40 digits)
# 1 / (sqrt(pi) |J1(j01)|), from mpmath at 30 digits
PHI0_DISK = 1.08676163613120


def data(mu, phi, grad, gap=1.0):
    return A.UnperturbedData(mu, phi, grad, gap)


def test_coefficient_sign_cases():
    assert A.coefficient(data(7.0, 1.5, (0.0, 0.0)), 2.0) == pytest.approx(-7.0 * 2.25 * 2.0)
    assert A.coefficient(data(7.0, 0.0, (3.0, 4.0)), 2.0) == pytest.approx(2 * 25.0 * 2.0)


def test_coefficient_needs_simple_eigenvalue():
    with pytest.raises(DegenerateMode):
        A.coefficient(data(5.0, 1.0, (0.0, 0.0), gap=0.0), math.pi)


@given(
    mu=st.floats(0.1, 100),
    phi=st.floats(-3, 3),
    gx=st.floats(-10, 10),
    gy=st.floats(-10, 10),
    eps=st.floats(1e-3, 0.2),
)
@settings(max_examples=50, deadline=None)
def test_sign_flip_and_quadratic_law(mu, phi, gx, gy, eps):
    d, dm = data(mu, phi, (gx, gy)), data(mu, -phi, (-gx, -gy))
    assert A.coefficient(d, math.pi) == A.coefficient(dm, math.pi)
    assert A.predict(d, math.pi, eps) == A.predict(dm, math.pi, eps)
    s1 = A.predict(d, math.pi, eps) - mu
    s2 = A.predict(d, math.pi, 2 * eps) - mu
    assert s2 == pytest.approx(4 * s1, rel=1e-9, abs=1e-12)


def test_predict_second_difference():
    d = A.rectangle_mode(1.3, 0.9, 1, 1, (0.55, 0.40))
    c = A.coefficient(d, math.pi)
    h = 0.01
    for e in (0.02, 0.05, 0.1):
        second = (A.predict(d, math.pi, e + h) - 2 * A.predict(d, math.pi, e) + A.predict(d, math.pi, e - h)) / h**2
        assert second == pytest.approx(-2 * c, abs=1e-12 * abs(c) / h**2 * 10)
    assert A.predict(d, math.pi, 0.0) == d.mu


def test_flagship_coefficient_pinned():
    d = A.rectangle_mode(1.3, 0.9, 1, 1, (0.55, 0.40))
    # evaluated independently from the sine-product eigenfunction
    amp = 2 / math.sqrt(1.3 * 0.9)
    kx, ky = math.pi / 1.3, math.pi / 0.9
    phi = amp * math.sin(kx * 0.55) * math.sin(ky * 0.40)
    gsq = (amp * kx * math.cos(kx * 0.55) * math.sin(ky * 0.40)) ** 2 + (
        amp * ky * math.sin(kx * 0.55) * math.cos(ky * 0.40)
    ) ** 2
    mu = math.pi**2 * (1 / 1.69 + 1 / 0.81)
    expected = (2 * gsq - mu * phi**2) * math.pi
    assert A.coefficient(d, math.pi) == pytest.approx(expected, rel=1e-14)
    assert A.coefficient(d, math.pi) == pytest.approx(-162.59484638907765, rel=1e-14)


def test_rectangle_examples():
    d = A.rectangle_mode(1.0, 1.0, 1, 1, (0.5, 0.5))
    assert d.mu == pytest.approx(2 * math.pi**2, rel=1e-15)
    assert d.phi_at_center == pytest.approx(2.0, rel=1e-15)
    np.testing.assert_allclose(d.grad_at_center, (0.0, 0.0), atol=1e-14)
    d = A.rectangle_mode(1.0, 1.0, 1, 1, (0.25, 0.5))
    assert d.phi_at_center == pytest.approx(math.sqrt(2), rel=1e-14)
    np.testing.assert_allclose(d.grad_at_center, (math.sqrt(2) * math.pi, 0.0), atol=1e-13)
    assert d.gap == pytest.approx(3 * math.pi**2, rel=1e-14)
    with pytest.raises(DegenerateMode):
        A.rectangle_mode(1.0, 1.0, 1, 2, (0.3, 0.3))
    with pytest.raises(ValueError):
        A.rectangle_mode(1.0, 1.0, 1, 1, (1.0, 0.5))


def test_rectangle_modes_sorted():
    assert A.rectangle_modes_sorted(1.3, 0.9, 3) == [(1, 1), (2, 1), (1, 2)]


def test_disk_radial_mode():
    d = A.disk_radial_mode(1.0, 1)
    assert d.mu == pytest.approx(J01**2, rel=1e-14)
    assert d.phi_at_center == pytest.approx(PHI0_DISK, rel=1e-12)
    assert d.grad_at_center == (0.0, 0.0)
    # nearest other mode is the first angular one, j11 = 3.8317...
    assert d.gap == pytest.approx(3.831705970207512**2 - J01**2, rel=1e-12)
    d2 = A.disk_radial_mode(2.0, 1)
    assert d2.mu == pytest.approx(J01**2 / 4, rel=1e-14)
    assert d2.phi_at_center == pytest.approx(PHI0_DISK / 2, rel=1e-12)


def test_annulus_limit_and_direction():
    mu0 = J01**2
    assert A.annulus_neumann_inner_eigenvalue(1.0, 1e-4) == pytest.approx(mu0, rel=1e-3)
    assert A.annulus_neumann_inner_eigenvalue(1.0, 0.05) > mu0
    eps = np.linspace(0.01, 0.2, 12)
    vals = [A.annulus_neumann_inner_eigenvalue(1.0, e) for e in eps]
    assert np.all(np.diff(vals) > 0)


def test_annulus_second_root_above_first():
    m1 = A.annulus_neumann_inner_eigenvalue(1.0, 0.05, 1)
    m2 = A.annulus_neumann_inner_eigenvalue(1.0, 0.05, 2)
    assert m2 > m1
    j02 = 5.520078110286311
    assert m2 == pytest.approx(j02**2, rel=0.05)


def test_annulus_remainder_is_higher_order():
    d = A.disk_radial_mode(1.0, 1)
    eps = np.array([0.02, 0.03, 0.045, 0.07, 0.1])
    rem = [abs(A.annulus_neumann_inner_eigenvalue(1.0, e) - A.predict(d, math.pi, e)) for e in eps]
    slope = np.polyfit(np.log(eps), np.log(rem), 1)[0]
    assert slope >= 2.7


def test_numeric_unperturbed_square():
    mesh = M.structured_rectangle(1.0, 1.0, 64, 64, pattern="right")
    num = A.numeric_unperturbed(mesh, 1, (0.5, 0.5))
    ref = A.rectangle_mode(1.0, 1.0, 1, 1, (0.5, 0.5))
    assert num.source == "numeric"
    assert num.mu == pytest.approx(ref.mu, rel=5e-3)
    assert num.phi_at_center == pytest.approx(ref.phi_at_center, rel=1e-2)
    assert math.sqrt(num.grad_sq) <= 0.05 * math.pi
    assert num.phi_at_center >= 0


def test_numeric_unperturbed_off_center_gradient():
    mesh = M.structured_rectangle(1.0, 1.0, 64, 64, pattern="right")
    num = A.numeric_unperturbed(mesh, 1, (0.25, 0.5))
    np.testing.assert_allclose(num.grad_at_center, (math.sqrt(2) * math.pi, 0.0), atol=0.03 * math.pi)


def test_numeric_unperturbed_disk():
    mesh = M.generate(M.Disk(1.0), h_far=0.05)
    num = A.numeric_unperturbed(mesh, 1, (0.0, 0.0))
    assert num.mu == pytest.approx(J01**2, rel=1e-2)


def test_numeric_unperturbed_rejects_degenerate_pair():
    mesh = M.structured_rectangle(1.0, 1.0, 12, 12, pattern="crisscross")
    with pytest.raises(DegenerateMode):
        A.numeric_unperturbed(mesh, 2, (0.3, 0.3))


def test_numeric_unperturbed_rejects_hole_mesh():
    hole = G.HoleInstance(G.StarShape.circle(), 0.1, (0.5, 0.5))
    mesh = M.generate(M.Rectangle(1.0, 1.0), hole, h_far=0.1, h_near=0.02)
    with pytest.raises(ValueError):
        A.numeric_unperturbed(mesh, 1, (0.2, 0.2))


def test_reciprocal_terms_cancel_exactly():
    # 1/(1/mu - D delta) = mu + mu^2 D delta + O(delta^2); compare the delta-coefficient
    # with the direct coefficient, where delta stands for pi (M eps)^2
    for mu, phi2, g2 in [(Fraction(7, 2), Fraction(3, 5), Fraction(11, 3)), (Fraction(20), Fraction(4), Fraction(0))]:
        D = phi2 / mu - 2 * g2 / mu**2
        assert mu**2 * D == -(2 * g2 - mu * phi2)


def test_reciprocal_components_rectangle():
    d = A.rectangle_mode(1.3, 0.9, 1, 1, (0.55, 0.40))
    l1, l2 = A.reciprocal_components(d)
    assert l1 == pytest.approx(d.phi_at_center**2 / d.mu**2, rel=1e-15)
    assert l2 == pytest.approx(d.grad_sq / d.mu**2, rel=1e-15)
    assert A.reciprocal_expansion(d, 1.0, 0.0) == 1.0 / d.mu


@pytest.mark.parametrize(
    "fixture",
    [
        lambda: A.rectangle_mode(1.3, 0.9, 1, 1, (0.55, 0.40)),
        lambda: A.rectangle_mode(1.3, 0.9, 2, 1, (0.65, 0.45)),
        lambda: A.disk_radial_mode(1.0, 1),
    ],
)
def test_reciprocal_residual_is_fourth_order(fixture):
    d = fixture()
    Mr = 1.0
    eps = np.geomspace(1e-3, 1e-1, 9)
    scaled = [abs(1 / A.reciprocal_expansion(d, Mr, e) - A.predict(d, math.pi * Mr**2, e)) / e**4 for e in eps]
    # next term of 1/(1/mu - x) is mu^3 x^2, i.e. c^2/mu times eps^4
    lead = A.coefficient(d, math.pi * Mr**2) ** 2 / d.mu
    np.testing.assert_allclose(scaled, lead, rtol=0.15)


def test_area_only_dependence():
    d = A.rectangle_mode(1.3, 0.9, 1, 1, (0.55, 0.40))
    ac = G.area(G.StarShape.circle())
    ae = G.area(G.StarShape.ellipse(2.0, 0.5))
    assert ac == pytest.approx(ae, rel=1e-12)
    # the prediction sees the hole only through its area
    same = round(ac, 10)
    assert A.coefficient(d, same) == A.coefficient(data(d.mu, d.phi_at_center, d.grad_at_center, d.gap), same)
    assert A.predict(d, ac, 0.03) == pytest.approx(A.predict(d, ae, 0.03), rel=1e-14)
