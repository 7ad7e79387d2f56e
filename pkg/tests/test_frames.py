"""Tests for the orthonormal-frame calculus.

The central oracle is redundancy: the same scalar curvature is computed
through the frame/connection route and through Christoffel symbols, two
codepaths sharing nothing but the metric itself.  The torsion identity is
checked from analytic derivatives alone, so it isolates the algebra of the
connection coefficients from finite differencing.
"""

import math

import numpy as np
import pytest

from singcurv import frames
from singcurv.metrics import (
    BlockConeMetric,
    GluedDiskMetric,
    TrigMetric,
    capped_cone_metric,
    cone_metric,
    stereographic_sphere_metric,
)

FAMILIES = [
    ("sphere", stereographic_sphere_metric(2), np.array([0.4, -0.3])),
    ("cone2", cone_metric(2, 0.5), np.array([0.7, 0.2])),
    ("cone3", cone_metric(3, 0.5), np.array([0.4, -0.2, 0.5])),
    ("capped", capped_cone_metric(0.5), np.array([1.3, 0.6])),
    ("trig2", TrigMetric(2, seed=1), np.array([0.9, -1.4])),
    ("trig3", TrigMetric(3, seed=1), np.array([0.2, 0.8, -0.5])),
    ("block", BlockConeMetric(1, 2, 0.4), np.array([2.0, 0.5, -0.3])),
    ("glued", GluedDiskMetric(), np.array([0.4, 1.1])),
]


# ---------------------------------------------------------------------------
# Frame construction
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("name,metric,x", FAMILIES, ids=[f[0] for f in FAMILIES])
def test_frame_reconstructs_metric(name, metric, x):
    fr = frames.frame_at(metric, x)
    assert np.allclose(fr.L @ fr.L.T, metric.g(x), rtol=1e-13, atol=1e-14)
    assert np.allclose(fr.L_inv @ fr.L, np.eye(metric.n), atol=1e-13)
    assert fr.sqrt_det == pytest.approx(metric.sqrt_det(x), rel=1e-12)


@pytest.mark.parametrize("name,metric,x", FAMILIES, ids=[f[0] for f in FAMILIES])
def test_connection_is_torsion_free(name, metric, x):
    """Structure constants + connection close the first Cartan equation."""
    assert frames.torsion_residual(metric, x) < 1e-12


@pytest.mark.parametrize("name,metric,x", FAMILIES, ids=[f[0] for f in FAMILIES])
def test_connection_is_antisymmetric(name, metric, x):
    om = frames.frame_at(metric, x).omega_frame
    assert np.allclose(om, -om.transpose(1, 0, 2), atol=1e-13)


def test_christoffel_symmetry_and_contraction():
    m = TrigMetric(3, seed=9)
    x = np.array([0.3, -0.6, 1.1])
    gam = frames.christoffel(m, x)
    assert np.allclose(gam, gam.transpose(0, 2, 1), atol=1e-13)
    # Gamma^a_{a mu} = d_mu log sqrt(det g)
    fr = frames.frame_at(m, x)
    assert np.allclose(np.einsum("aam->m", gam.transpose(1, 0, 2)),
                       0.5 * fr.dlogdet, atol=1e-12)


# ---------------------------------------------------------------------------
# Scalar curvature, three independent routes
# ---------------------------------------------------------------------------


def test_sphere_curvature_both_routes():
    m = stereographic_sphere_metric(2)
    for x in ([0.0, 0.0], [0.8, -0.4], [2.0, 1.0]):
        x = np.array(x)
        assert frames.scalar_curvature_frame(m, x) == pytest.approx(2.0, rel=1e-8)
        assert frames.scalar_curvature_christoffel(m, x) == pytest.approx(2.0, rel=1e-8)


@pytest.mark.parametrize("n", [2, 3])
def test_frame_route_matches_christoffel_route(n):
    m = TrigMetric(n, seed=6)
    rng = np.random.default_rng(0)
    for _ in range(3):
        x = rng.uniform(-1.5, 1.5, size=n)
        a = frames.scalar_curvature_frame(m, x)
        b = frames.scalar_curvature_christoffel(m, x)
        assert a == pytest.approx(b, rel=1e-6, abs=1e-8)


@pytest.mark.parametrize("n,c", [(3, 0.5), (3, 0.25), (4, 0.5)])
def test_cone_curvature_matches_closed_form(n, c):
    m = cone_metric(n, c)
    x = np.zeros(n)
    x[-1] = 0.6
    want = (n - 1) * (n - 2) * c * (2.0 - c) * 0.6 ** (2 * c - 2)
    assert frames.scalar_curvature_frame(m, x) == pytest.approx(want, rel=1e-7)
    assert m.scalar_curvature_exact(x) == pytest.approx(want, rel=1e-12)


def test_flat_families_have_zero_curvature():
    # the 2D cone is flat off the tip; both glued-disk sides are flat
    assert frames.scalar_curvature_frame(
        cone_metric(2, 0.7), np.array([0.5, 0.1])) == pytest.approx(0.0, abs=1e-9)
    assert frames.scalar_curvature_frame(
        GluedDiskMetric(), np.array([0.5, 0.3])) == pytest.approx(0.0, abs=1e-9)


# ---------------------------------------------------------------------------
# The pairing vector and scalar
# ---------------------------------------------------------------------------


def test_q_scalar_vanishes_in_two_dimensions():
    """With a single independent connection component the quadratic cancels."""
    for m, x in [
        (stereographic_sphere_metric(2), np.array([0.7, 0.1])),
        (TrigMetric(2, seed=8), np.array([-0.9, 0.4])),
        (cone_metric(2, 0.3), np.array([0.2, 0.6])),
    ]:
        fr = frames.frame_at(m, x)
        assert abs(frames.q_scalar(fr)) < 1e-13


def test_q_scalar_nonzero_in_three_dimensions():
    fr = frames.frame_at(cone_metric(3, 0.5), np.array([0.5, 0.0, 0.0]))
    assert abs(frames.q_scalar(fr)) > 0.1


@pytest.mark.parametrize("n,c", [(2, 0.5), (3, 0.5), (4, 0.3)])
def test_pairing_vector_conformal_closed_form(n, c):
    """V = 2(1-n) e^((n-2) sigma) grad sigma for a conformal metric."""
    m = cone_metric(n, c)
    x = np.full(n, 0.5)
    r = np.linalg.norm(x)
    fr = frames.frame_at(m, x)
    V = frames.pairing_vector(fr)
    want = 2.0 * (1 - n) * r ** (-c * (n - 2)) * (-c / r ** 2) * x
    assert np.allclose(V, want, rtol=1e-11)


def test_pairing_vector_glued_disk():
    m = GluedDiskMetric()
    assert np.allclose(frames.pairing_vector(frames.frame_at(m, np.array([0.3, 0.2]))),
                       [2.0, 0.0], atol=1e-12)
    assert np.allclose(frames.pairing_vector(frames.frame_at(m, np.array([-0.3, 0.2]))),
                       [-2.0, 0.0], atol=1e-12)


# ---------------------------------------------------------------------------
# Divergence identity: d_mu V^mu = (R + Q) sqrt(g)
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("name,metric,x", FAMILIES, ids=[f[0] for f in FAMILIES])
def test_divergence_identity(name, metric, x):
    assert frames.divergence_identity_residual(metric, x) < 1e-6
