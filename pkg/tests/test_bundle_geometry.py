import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holonomy_lab.bundle_geometry import (BaseLoop, CurveSupportedForm, FlatTorus, GaugedForm,
                                          GaugeTransformation, RoundSphere, SphereAmbientForm,
                                          TorusFourierField, TorusFourierForm, ZeroForm, check_homothety,
                                          check_linearity, class_function_invariance, factorization_residual,
                                          gauge_relations, hol_c, hol_direct, horizontal_lift,
                                          horizontality_residual, mu_c, pure_gauge)
from holonomy_lab.errors import ConstantSpeedError, DomainError
from holonomy_lab.lie_core import get_group
from holonomy_lab.loop_space import AlgebraLoop

seeds = st.integers(0, 2 ** 32 - 1)
TORUS = FlatTorus(1.0, 1.3)
SPHERE = RoundSphere(2.0)


def random_gauge(gid, base, rng, amplitude=0.4, based_at=None):
    return GaugeTransformation(TorusFourierField.random(gid, base, rng, 1, amplitude), based_at)


def test_constant_connection_along_closed_geodesic(rng):
    # derived oracle: mu_c(A) = L1 a1 is constant, so the holonomy is exp(L1 a1)
    g = get_group("su2")
    a1, a2 = g.random_algebra(rng), g.random_algebra(rng)
    A = TorusFourierForm.constant("su2", TORUS, a1, a2)
    c = BaseLoop.torus_line(TORUS, (0.2, 0.7), 1, 0)
    zero = ZeroForm("su2", TORUS)
    expected = g.exp(TORUS.L1 * a1)
    assert np.max(np.abs(hol_c(A, c, zero, N=256) - expected)) < 1e-12
    assert np.max(np.abs(hol_direct(A, c, zero, N=256) - expected)) < 1e-12


@pytest.mark.parametrize("gid", ["su2", "so3", "su3"])
def test_factorization_on_torus(gid, rng):
    A = TorusFourierForm.random(gid, TORUS, rng, max_mode=1, amplitude=0.3)
    c = BaseLoop.torus_circle(TORUS, (0.3, 0.4), 0.2)
    omega0 = pure_gauge(random_gauge(gid, TORUS, rng), TORUS)
    assert factorization_residual(A, c, omega0, N=1024) < 1e-8


def test_factorization_on_sphere(rng):
    A = SphereAmbientForm.random("su2", SPHERE, rng, degree=2, amplitude=0.3)
    c = BaseLoop.sphere_latitude(SPHERE, 0.4)
    assert factorization_residual(A, c, ZeroForm("su2", SPHERE), N=1024) < 1e-8


def test_sphere_charts_agree(rng):
    A = SphereAmbientForm.random("so3", SPHERE, rng)
    B = A.in_chart("south")
    x = rng.uniform(-1.5, 1.5, (10, 2))
    v = rng.standard_normal((10, 2))
    y = SPHERE.transition(x)
    Jv = np.einsum("tij,tj->ti", SPHERE.transition_jacobian(x), v)
    assert np.allclose(A.value(x, v), B.value(y, Jv), atol=1e-12)
    pn, _ = SPHERE.embed(x, "north")
    ps, _ = SPHERE.embed(y, "south")
    assert np.allclose(pn, ps, atol=1e-12)
    assert np.allclose(np.linalg.norm(pn, axis=1), SPHERE.R)


def test_forms_are_linear(rng):
    assert check_linearity(TorusFourierForm.random("su3", TORUS, rng), rng) < 1e-13
    assert check_linearity(SphereAmbientForm.random("su2", SPHERE, rng), rng) < 1e-13
    gf = GaugedForm(random_gauge("su2", TORUS, rng), TorusFourierForm.random("su2", TORUS, rng))
    assert check_linearity(gf, rng) < 1e-13


def test_gauge_differential_matches_finite_difference(rng):
    gamma = random_gauge("su3", TORUS, rng, 0.8)
    x = rng.uniform(0, 1, (4, 2))
    v = rng.standard_normal((4, 2))
    eps = 1e-5
    fd = (gamma.value(x + eps * v) - gamma.value(x - eps * v)) / (2 * eps)
    assert np.max(np.abs(gamma.differential(x, v) - fd)) < 1e-8


def test_based_gauge_is_identity_at_base_point(rng):
    x0 = np.array([0.3, 0.9])
    gamma = random_gauge("so3", TORUS, rng, based_at=x0)
    assert np.allclose(gamma.value(x0)[0], np.eye(3), atol=1e-14)


def test_non_constant_speed_is_rejected():
    with pytest.raises(ConstantSpeedError):
        BaseLoop(TORUS, (0, 0), cos_coeffs=[[0.2, 0.0]], sin_coeffs=[[0.0, 0.1]])
    with pytest.raises(DomainError):
        BaseLoop(TORUS, (0, 0), winding=(0.5, 0.0))
    with pytest.raises(DomainError):
        BaseLoop(SPHERE, (0, 0), winding=(1.0, 0.0))


def test_loop_speeds():
    assert BaseLoop.torus_circle(TORUS, (0, 0), 0.1, 2).speed == pytest.approx(0.4 * np.pi)
    assert BaseLoop.torus_line(TORUS, (0, 0), 1, 1).speed == pytest.approx(np.hypot(1.0, 1.3))
    lat = BaseLoop.sphere_latitude(SPHERE, 0.5)
    assert lat.speed == pytest.approx(2 * np.pi * 2.0 * np.cos(0.5))


@pytest.mark.parametrize("gid", ["su2", "su3"])
def test_closed_form_lift_matches_ode(gid, rng):
    omega0 = pure_gauge(random_gauge(gid, TORUS, rng, 0.6), TORUS)
    c = BaseLoop.torus_circle(TORUS, (0.1, 0.2), 0.25)
    gaps = []
    for N in (128, 256):
        exact = horizontal_lift(c, omega0, N)
        ode = horizontal_lift(c, omega0, N, method="ode")
        assert exact.periodic and not ode.periodic
        gaps.append(np.max(np.abs(exact.samples - ode.samples)))
    # the ODE lift is fourth-order accurate
    assert gaps[1] < 1e-8 and 12.0 < gaps[0] / gaps[1] < 20.0
    assert horizontality_residual(c, omega0, exact) < 1e-10
    with pytest.raises(DomainError):
        horizontal_lift(c, ZeroForm(gid, TORUS), 64, method="exact")


def test_forms_vanishing_on_the_loop_do_not_change_mu(rng):
    g = get_group("su2")
    y0 = 0.35
    c = BaseLoop.torus_line(TORUS, (0.1, y0), 1, 0)
    # b(x) = C sin(2 pi (x2 - y0) / L2) dx1 vanishes along c; the dx2 part is never seen
    C = rng.standard_normal(g.dim)
    ph = 2 * np.pi * y0 / TORUS.L2
    f1 = TorusFourierField("su2", TORUS, [(0, 1)], -np.sin(ph) * C, np.cos(ph) * C)
    f2 = TorusFourierField.random("su2", TORUS, rng)
    B = TorusFourierForm("su2", TORUS, (f1, f2))
    A = TorusFourierForm.random("su2", TORUS, rng)
    omega0 = pure_gauge(random_gauge("su2", TORUS, rng), TORUS)
    sigma = horizontal_lift(c, omega0, 256)
    base = mu_c(A, c, sigma, omega0)
    moved = mu_c(A + B, c, sigma, omega0)
    assert np.max(np.abs(moved.samples - base.samples)) < 1e-13


def test_holonomy_is_grid_converged(rng):
    A = TorusFourierForm.random("su2", TORUS, rng, max_mode=1, amplitude=0.3)
    c = BaseLoop.torus_circle(TORUS, (0.3, 0.4), 0.2)
    omega0 = pure_gauge(random_gauge("su2", TORUS, rng), TORUS)
    assert np.linalg.norm(hol_c(A, c, omega0, 1024) - hol_c(A, c, omega0, 2048)) < 1e-9


@settings(max_examples=8)
@given(seed=seeds)
def test_gauge_relations(seed):
    r = np.random.default_rng(seed)
    A = TorusFourierForm.random("su2", TORUS, r, max_mode=1, amplitude=0.3)
    c = BaseLoop.torus_circle(TORUS, r.uniform(0, 1, 2), 0.15)
    omega0 = pure_gauge(random_gauge("su2", TORUS, r), TORUS)
    gamma = random_gauge("su2", TORUS, r)
    rep = gauge_relations(A, c, omega0, gamma, N=1024)
    assert rep.pullback_equivariance < 1e-8
    assert rep.general_conjugation < 1e-7 and rep.conjugation < 1e-7
    assert rep.reference_holonomy < 1e-12
    assert class_function_invariance(A, c, gamma, omega0, N=1024) < 1e-7


def test_class_function_separates_different_connections(rng):
    A = TorusFourierForm.random("su2", TORUS, rng, max_mode=1, amplitude=0.5)
    B = TorusFourierForm.random("su2", TORUS, rng, max_mode=1, amplitude=0.5)
    c = BaseLoop.torus_circle(TORUS, (0.3, 0.4), 0.2)
    zero = ZeroForm("su2", TORUS)
    assert class_function_invariance(A, c, None, zero, N=256, other=B) > 1e-3


def test_unit_constant_profile_has_covector_norm_inverse_speed_squared(rng):
    g = get_group("su3")
    v = g.random_algebra(rng)
    xi = AlgebraLoop.constant(v / g.norm(v), 256, "su3")
    c = BaseLoop.torus_circle(TORUS, (0.5, 0.5), 0.3)
    sigma = horizontal_lift(c, ZeroForm("su3", TORUS), 256)
    eta = CurveSupportedForm(xi, c, sigma)
    assert np.max(np.abs(eta.pointwise_norm_sq() - 1.0 / c.speed ** 2)) < 1e-12


def test_zero_profile_gives_trivial_homothety():
    c = BaseLoop.torus_circle(TORUS, (0.5, 0.5), 0.3)
    rep = check_homothety(c, AlgebraLoop.zero("su2", 128), ZeroForm("su2", TORUS))
    assert rep.form_norm_sq == 0.0 and rep.image_norm_sq == 0.0 and rep.ratio_error == 0.0


@pytest.mark.parametrize("base,loop", [
    (TORUS, BaseLoop.torus_circle(TORUS, (0.5, 0.5), 0.3)),
    (TORUS, BaseLoop.torus_line(TORUS, (0.2, 0.1), 1, 1)),
    (SPHERE, BaseLoop.sphere_latitude(SPHERE, -0.3)),
])
def test_homothety_ratio_is_speed_squared(base, loop, rng):
    xi = AlgebraLoop.random("so3", rng, N=256, K=3)
    gamma = GaugeTransformation(TorusFourierField.random("so3", TORUS, rng, 1, 0.4)) if base is TORUS else None
    omega0 = pure_gauge(gamma, base) if gamma else ZeroForm("so3", base)
    rep = check_homothety(loop, xi, omega0)
    assert rep.ratio_error < 1e-10 * loop.speed ** 2
    assert rep.image_residual < 1e-12 and rep.pointwise_residual < 1e-12


def test_curve_supported_pairing_reproduces_norm(rng):
    # pairing the form with itself through a smooth extension equals its norm
    xi = AlgebraLoop.constant(get_group("su2").basis[0], 128, "su2")
    c = BaseLoop.torus_line(TORUS, (0.0, 0.3), 1, 0)
    sigma = horizontal_lift(c, ZeroForm("su2", TORUS), 128)
    eta = CurveSupportedForm(xi, c, sigma)
    A = TorusFourierForm.constant("su2", TORUS, get_group("su2").basis[0], np.zeros((2, 2)))
    assert eta.pair(A) == pytest.approx(eta.norm_sq() * c.speed, rel=1e-12)
    with pytest.raises(DomainError):
        eta.along(BaseLoop.torus_line(TORUS, (0.0, 0.3), 1, 0), sigma)
