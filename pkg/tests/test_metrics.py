"""Tests for the metric families.

Every family publishes analytic first and second derivatives; the oracle
throughout is fourth-order finite differencing of g itself, so agreement is
expected at the 1e-8 level, not machine epsilon.
"""

import math

import numpy as np
import pytest

from singcurv.metrics import (
    BlockConeMetric,
    CallableMetric,
    ConformalMetric,
    GluedDiskMetric,
    RadialConformalMetric,
    TrigMetric,
    capped_cone_metric,
    cone_metric,
    fd4_gradient,
    stereographic_sphere_metric,
)


def fd_dg(metric, x, h=1e-3):
    """Finite-difference oracle for dg, indexed dg[rho, mu, nu]."""
    return fd4_gradient(metric.g, np.asarray(x, dtype=float), h)


def fd_d2g(metric, x, h=1e-3):
    """Finite-difference oracle for d2g, indexed d2g[rho, tau, mu, nu]."""
    x = np.asarray(x, dtype=float)
    return fd4_gradient(lambda y: fd4_gradient(metric.g, y, h), x, h)


def assert_derivatives_match(metric, x, tol=1e-7):
    x = np.asarray(x, dtype=float)
    assert np.allclose(metric.dg(x), fd_dg(metric, x), atol=tol)
    assert np.allclose(metric.d2g(x), fd_d2g(metric, x), atol=100 * tol)


# ---------------------------------------------------------------------------
# Conformal families
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n,c", [(2, 0.25), (2, 0.75), (3, 0.5), (4, 0.3)])
def test_cone_metric_derivatives(n, c):
    m = cone_metric(n, c)
    x = np.full(n, 0.6 / math.sqrt(n))
    assert_derivatives_match(m, x)


@pytest.mark.parametrize("n,c", [(2, 0.5), (3, 0.5), (4, 0.25)])
def test_cone_metric_closed_form_curvature(n, c):
    """R = (n-1)(n-2) c (2-c) r^(2c-2); identically zero when n = 2."""
    m = cone_metric(n, c)
    for r in (0.3, 0.8, 1.7):
        x = np.zeros(n)
        x[0] = r
        want = (n - 1) * (n - 2) * c * (2.0 - c) * r ** (2 * c - 2)
        got = m.scalar_curvature_exact(x)
        assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_cone_metric_rejects_bad_exponent():
    with pytest.raises(ValueError):
        cone_metric(2, 1.0)
    with pytest.raises(ValueError):
        cone_metric(3, -0.1)


def test_sphere_metric_constant_curvature():
    m = stereographic_sphere_metric(2)
    rng = np.random.default_rng(3)
    for _ in range(5):
        x = rng.uniform(-1.5, 1.5, size=2)
        assert m.scalar_curvature_exact(x) == pytest.approx(2.0, rel=1e-12)
    assert_derivatives_match(m, [0.4, -0.7])


def test_sphere_total_area():
    """Numerically integrate sqrt(det g) over a big disk: area of a spherical cap."""
    m = stereographic_sphere_metric(2)
    R = 60.0
    r = np.linspace(1e-6, R, 20000)
    dens = np.array([m.sqrt_det(np.array([ri, 0.0])) for ri in r])
    area = 2.0 * math.pi * np.trapezoid(dens * r, r)
    # the disk of chart radius R covers all of the sphere but a polar cap
    want = 4.0 * math.pi * R ** 2 / (1.0 + R ** 2)
    assert area == pytest.approx(want, rel=1e-5)


def test_conformal_det_shortcut_matches_generic():
    m = stereographic_sphere_metric(2)
    x = np.array([0.3, 0.9])
    assert m.sqrt_det(x) == pytest.approx(math.sqrt(np.linalg.det(m.g(x))), rel=1e-14)


# ---------------------------------------------------------------------------
# Capped cone
# ---------------------------------------------------------------------------


def test_capped_cone_matches_cone_inside():
    c = 0.5
    m = capped_cone_metric(c)
    cone = cone_metric(2, c)
    for r in (0.2, 0.7, 0.999):
        x = np.array([r, 0.0])
        assert np.allclose(m.g(x), cone.g(x), rtol=1e-13)
        assert np.allclose(m.dg(x), cone.dg(x), rtol=1e-12, atol=1e-13)


def test_capped_cone_inversion_flat_outside():
    """Beyond the transition annulus the profile is -2 ln r + const: flat."""
    m = capped_cone_metric(0.3)
    for r in (2.0, 3.5, 8.0):
        x = np.array([0.0, r])
        assert m.scalar_curvature_exact(x) == pytest.approx(0.0, abs=1e-12)
    # and the curvature is genuinely nonzero inside the annulus
    assert abs(m.scalar_curvature_exact(np.array([1.4, 0.0]))) > 0.1


def test_capped_cone_derivatives_in_annulus():
    m = capped_cone_metric(0.6)
    assert_derivatives_match(m, [1.3, 0.4])


# ---------------------------------------------------------------------------
# Random smooth metrics
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n", [2, 3])
def test_trig_metric_spd_and_derivatives(n):
    m = TrigMetric(n, seed=11)
    rng = np.random.default_rng(5)
    for _ in range(4):
        x = rng.uniform(-2, 2, size=n)
        g = m.g(x)
        assert np.allclose(g, g.T)
        assert np.linalg.eigvalsh(g).min() > 0.3
        assert_derivatives_match(m, x)


def test_trig_metric_second_derivative_symmetry():
    m = TrigMetric(3, seed=2)
    d2 = m.d2g(np.array([0.4, -1.1, 0.7]))
    assert np.allclose(d2, d2.transpose(1, 0, 2, 3))
    assert np.allclose(d2, d2.transpose(0, 1, 3, 2))


def test_trig_metric_reproducible_and_seed_dependent():
    x = np.array([0.5, 0.5, 0.5])
    assert np.allclose(TrigMetric(3, seed=4).g(x), TrigMetric(3, seed=4).g(x))
    assert not np.allclose(TrigMetric(3, seed=4).g(x), TrigMetric(3, seed=5).g(x))


# ---------------------------------------------------------------------------
# Product / glued families
# ---------------------------------------------------------------------------


def test_block_cone_structure():
    m = BlockConeMetric(1, 2, 0.4)
    x = np.array([5.0, 0.3, 0.4])  # base coordinate, then fiber
    r = math.hypot(0.3, 0.4)
    g = m.g(x)
    assert g[0, 0] == pytest.approx(1.0)
    assert np.allclose(g[1:, 1:], r ** (-0.8) * np.eye(2), rtol=1e-14)
    assert m.dist_to_singular(x) == pytest.approx(r)
    assert_derivatives_match(m, x)


def test_block_cone_higher_fiber_derivatives():
    m = BlockConeMetric(1, 3, 0.5)
    assert_derivatives_match(m, [0.0, 0.4, -0.2, 0.5])


def test_glued_disk_metric():
    m = GluedDiskMetric()
    for t in (0.35, -0.6):
        x = np.array([t, 1.0])
        assert np.allclose(m.g(x), np.diag([1.0, (1.0 - abs(t)) ** 2]))
        assert_derivatives_match(m, x)
    assert m.dist_to_singular(np.array([0.1, 0.0])) == pytest.approx(0.1)
    assert m.dist_to_singular(np.array([0.9, 0.0])) == pytest.approx(0.1)


# ---------------------------------------------------------------------------
# Generic plumbing
# ---------------------------------------------------------------------------


def test_callable_metric_finite_difference_fallback():
    ref = stereographic_sphere_metric(2)
    m = CallableMetric(2, ref.g)
    x = np.array([0.25, -0.4])
    assert np.allclose(m.dg(x), ref.dg(x), atol=1e-8)
    assert np.allclose(m.d2g(x), ref.d2g(x), atol=1e-5)


def test_fd_step_shrinks_near_singularity():
    m = cone_metric(2, 0.5)
    far = m.fd_step(np.array([2.0, 0.0]))
    near = m.fd_step(np.array([1e-3, 0.0]))
    assert near < far
    assert near <= 0.25 * 1e-3 + 1e-15
    smooth = TrigMetric(2, seed=0)
    # no singular points: the step only scales with the coordinate size
    assert smooth.fd_step(np.array([1e-3, 0.0])) > near


def test_fd4_gradient_matches_analytic():
    f = lambda x: math.sin(x[0]) * math.exp(x[1])
    x = np.array([0.3, -0.2])
    want = np.array([math.cos(0.3) * math.exp(-0.2), math.sin(0.3) * math.exp(-0.2)])
    assert np.allclose(fd4_gradient(f, x, 1e-3), want, atol=1e-10)


def test_radial_conformal_gradient_and_hessian_shape():
    m = cone_metric(3, 0.5)
    x = np.array([0.3, -0.1, 0.2])
    # grad sigma is radial: cross-check against fd of sigma through g
    sig = lambda y: 0.5 * math.log(m.g(y)[0, 0])
    want = fd4_gradient(sig, x, 1e-4)
    got = m.grad_sigma(x)
    assert np.allclose(got, want, atol=1e-9)
