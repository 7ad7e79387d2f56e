"""Tests for the discrete Dirac operators.

Flat-torus oracles are exact: the chiral block is a Fourier multiplier, so
its singular values are the moduli of the symbol over the (twisted) mode
lattice, and the conjugated kernel is e^{sigma/2} times the flat one.  The
conical conformal factor is checked against its defining log profile after
subtracting the analytically known uniform counter-term.
"""

import json
import math

import numpy as np
import pytest

from singcurv import dirac as dr

CENTRE = (math.pi, math.pi)


# ---------------------------------------------------------------------------
# Grids and symbols
# ---------------------------------------------------------------------------


def test_grid_validation():
    with pytest.raises(ValueError):
        dr.TorusGrid(13)
    with pytest.raises(ValueError):
        dr.TorusGrid(2)
    with pytest.raises(ValueError):
        dr.TorusGrid(16, lengths=(0.0, 1.0))


def test_wavenumbers_twist_shift():
    grid = dr.TorusGrid(16, lengths=(2 * math.pi, 4 * math.pi))
    k1, k2 = grid.wavenumbers((0.0, 0.0))
    t1, t2 = grid.wavenumbers((0.5, 0.5))
    assert np.allclose(t1 - k1, 0.5)
    assert np.allclose(t2 - k2, 0.25)
    assert 0.0 in k1 and 0.0 not in t1


def test_dirac_flat_single_mode():
    grid = dr.TorusGrid(16)
    xx, yy = grid.mesh()
    phi = np.exp(1j * (2 * xx + 3 * yy))
    psi = np.stack([phi, np.zeros_like(phi)])
    out = dr.dirac_flat_apply(psi, grid)
    # D0 maps positive chirality through d_plus, symbol k1 + i k2
    assert np.allclose(out[0], 0.0, atol=1e-12)
    assert np.allclose(out[1], (2 + 3j) * phi, atol=1e-12)


def test_spectral_gradient_matches_analytic():
    grid = dr.TorusGrid(32)
    xx, yy = grid.mesh()
    u = np.sin(2 * xx) * np.cos(yy)
    d1, d2 = dr.spectral_gradient(u, grid)
    assert np.allclose(d1, 2 * np.cos(2 * xx) * np.cos(yy), atol=1e-12)
    assert np.allclose(d2, -np.sin(2 * xx) * np.sin(yy), atol=1e-12)


# ---------------------------------------------------------------------------
# Flat conjugated blocks: exact spectra
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("twist", dr.TWISTS)
def test_flat_singular_values_match_mode_lattice(twist):
    grid = dr.TorusGrid(12)
    block = dr.conjugated_chiral_matrix(grid, np.zeros((12, 12)), twist)
    got = np.sort(np.linalg.svd(block, compute_uv=False))
    want = np.sort(np.abs(dr.chiral_symbol(grid, twist)).reshape(-1))
    assert np.allclose(got, want, atol=1e-10)


def test_flat_antiperiodic_bottom_value():
    grid = dr.TorusGrid(16)
    block = dr.conjugated_chiral_matrix(grid, np.zeros((16, 16)), (0.5, 0.5))
    s = np.linalg.svd(block, compute_uv=False)
    assert s[-1] == pytest.approx(math.sqrt(0.5), rel=1e-12)


def test_adjoint_block_is_conjugate_transpose():
    grid = dr.TorusGrid(16)
    sigma = dr.cone_conformal_factor(grid, [CENTRE], [0.5])
    plus = dr.conjugated_chiral_matrix(grid, sigma, (0.5, 0.0), sign=1)
    minus = dr.conjugated_chiral_matrix(grid, sigma, (0.5, 0.0), sign=-1)
    assert np.abs(plus.conj().T - minus).max() < 1e-12


def test_sigma_shape_must_match_grid():
    grid = dr.TorusGrid(16)
    with pytest.raises(ValueError):
        dr.conjugated_chiral_matrix(grid, np.zeros((8, 8)))


# ---------------------------------------------------------------------------
# Kernels of the conjugated blocks
# ---------------------------------------------------------------------------


def test_kernel_dim_one_iff_fully_periodic():
    grid = dr.TorusGrid(16)
    sigma = dr.cone_conformal_factor(grid, [CENTRE], [0.5])
    for twist in dr.TWISTS:
        block = dr.conjugated_chiral_matrix(grid, sigma, twist)
        rep = dr.kernel_spectrum(block)
        assert rep.kernel_dim == (1 if twist == (0.0, 0.0) else 0)
        assert rep.gap_ratio >= 10.0


def test_conjugation_maps_flat_kernel_exactly():
    grid = dr.TorusGrid(16)
    sigma = dr.cone_conformal_factor(grid, [CENTRE], [0.5])
    block = dr.conjugated_chiral_matrix(grid, sigma)
    vec = np.exp(0.5 * sigma).reshape(-1)
    vec /= np.linalg.norm(vec)
    assert np.linalg.norm(block @ vec) < 1e-12


def test_kernel_stable_under_refinement():
    for n in (12, 24):
        grid = dr.TorusGrid(n)
        sigma = dr.cone_conformal_factor(grid, [CENTRE], [0.25])
        for twist in ((0.0, 0.0), (0.5, 0.5)):
            rep = dr.kernel_spectrum(
                dr.conjugated_chiral_matrix(grid, sigma, twist))
            assert rep.kernel_dim == (1 if twist == (0.0, 0.0) else 0)
            assert rep.gap_ratio >= 10.0


def test_kernel_dim_invariant_under_constant_shift():
    grid = dr.TorusGrid(12)
    sigma = dr.cone_conformal_factor(grid, [CENTRE], [0.5])
    a = dr.kernel_spectrum(dr.conjugated_chiral_matrix(grid, sigma))
    b = dr.kernel_spectrum(dr.conjugated_chiral_matrix(grid, sigma + 1.0))
    assert a.kernel_dim == b.kernel_dim == 1


def test_kernel_report_roundtrip_and_validation():
    rep = dr.kernel_spectrum(np.diag([1e-9, 0.5, 2.0]).astype(complex))
    assert rep.kernel_dim == 1
    assert rep.gap_ratio == pytest.approx(500.0)
    json.dumps(rep.as_dict())
    with pytest.raises(ValueError):
        dr.kernel_spectrum(np.eye(3), gap_tol=0.0)


# ---------------------------------------------------------------------------
# Conical conformal factors
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("c", [0.25, 0.5])
def test_conformal_factor_log_slope(c):
    grid = dr.TorusGrid(256)
    sigma = dr.cone_conformal_factor(grid, [CENTRE], [c])
    h = grid.spacings[0]
    i0 = grid.n // 2
    rads, vals = [], []
    for k in range(1, grid.n // 10):
        r = k * h
        if r > 10.0 * h:  # clear of the mollifier (width 4h)
            rads.append(r)
            # subtract the uniform counter-source term pi c r^2 / (2 Area)
            vals.append(sigma[i0 + k, i0] - math.pi * c * r * r / (2 * grid.area))
    slope = np.polyfit(np.log(rads), vals, 1)[0]
    assert slope == pytest.approx(-c, abs=0.005)


def test_conformal_factor_zero_mean():
    grid = dr.TorusGrid(64)
    sigma = dr.cone_conformal_factor(grid, [CENTRE], [0.5])
    assert abs(np.mean(sigma)) < 1e-13


def test_conformal_factor_superposition():
    grid = dr.TorusGrid(64)
    a = dr.cone_conformal_factor(grid, [(2.0, 2.0)], [0.3])
    b = dr.cone_conformal_factor(grid, [(4.0, 4.5)], [0.2])
    both = dr.cone_conformal_factor(grid, [(2.0, 2.0), (4.0, 4.5)], [0.3, 0.2])
    assert np.abs(both - a - b).max() < 1e-12


def test_conformal_factor_validation():
    grid = dr.TorusGrid(16)
    with pytest.raises(ValueError):
        dr.cone_conformal_factor(grid, [CENTRE], [0.5, 0.2])
    with pytest.raises(ValueError):
        dr.cone_conformal_factor(grid, [CENTRE], [0.5], width=0.0)


# ---------------------------------------------------------------------------
# Half-density cancellation
# ---------------------------------------------------------------------------


def test_quarter_density_zero_sigma_is_exact():
    grid = dr.TorusGrid(16)
    assert dr.quarter_density_residual(grid, np.zeros((16, 16))) == 0.0


def test_quarter_density_smooth_sigma():
    grid = dr.TorusGrid(32)
    xx, yy = grid.mesh()
    sigma = 0.3 * np.sin(xx) * np.cos(yy)
    assert dr.quarter_density_residual(grid, sigma) < 1e-10


def test_quarter_density_cone_sigma():
    grid = dr.TorusGrid(32)
    sigma = dr.cone_conformal_factor(grid, [CENTRE], [0.5])
    assert dr.quarter_density_residual(grid, sigma) < 1e-8


def test_quarter_density_holds_for_twisted_spinors():
    grid = dr.TorusGrid(32)
    sigma = dr.cone_conformal_factor(grid, [CENTRE], [0.5])
    assert dr.quarter_density_residual(grid, sigma, twist=(0.5, 0.5)) < 1e-8


def test_conformal_apply_reduces_to_flat():
    grid = dr.TorusGrid(16)
    psi = dr._band_limited_spinors(grid, 1, seed=1)[0]
    zero = np.zeros((16, 16))
    flat = dr.dirac_flat_apply(psi, grid)
    curved = dr.dirac_conformal_apply(psi, grid, zero)
    assert np.allclose(flat, curved, atol=1e-14)


# ---------------------------------------------------------------------------
# Spin-structure sweep report
# ---------------------------------------------------------------------------


def test_sweep_structure_and_serialization():
    out = dr.spin_structure_sweep(charges=(0.0, 0.5), sizes=(12,))
    assert len(out["rows"]) == 2 * len(dr.TWISTS)
    assert out["all_kernels_match"]
    assert out["all_indices_zero"]
    assert out["min_gap_ratio"] >= 10.0
    assert any("index" in note for note in out["notes"])
    json.dumps(out)


# ---------------------------------------------------------------------------
# Sphere lower bound
# ---------------------------------------------------------------------------


def test_sphere_gap_plateau():
    a = dr.sphere_chiral_gap(n=24)
    b = dr.sphere_chiral_gap(n=32)
    assert 0.7 < a.value_squared < 0.9
    assert b.value_squared == pytest.approx(a.value_squared, abs=0.05)
    json.dumps(a.as_dict())


def test_sphere_gap_validation():
    with pytest.raises(ValueError):
        dr.sphere_chiral_gap(n=4)
    with pytest.raises(ValueError):
        dr.sphere_chiral_gap(half_width=-1.0)
