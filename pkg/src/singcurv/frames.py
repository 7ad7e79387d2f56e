"""Orthonormal frames, the metric connection, and scalar curvature.

Everything here is pointwise.  The frame is fixed by the Cholesky gauge:
g = L L^T with L lower triangular, so the coframe components are
e_mu^a = L[mu, a] and the frame components e_a^mu = (L^{-1})[a, mu].  That
gauge is smooth in g wherever g is SPD, and its derivative has the closed
form dL = L Phi(L^{-1} dg L^{-T}) with Phi the "lower half" map (strict
lower triangle plus half the diagonal), which keeps the whole connection
computation analytic whenever dg is.

The connection coefficients are produced in two layouts:

* ``omega_frame[a, b, c]``  = <nabla_{e_c} e_b, e_a>   (all frame indices,
  antisymmetric in a, b),
* ``omega_coord[a, b, mu]`` = omega_frame[a, b, c] e_mu^c   (the connection
  one-form omega^a_b pulled back to the chart).

Scalar curvature comes via two independent routes: the frame route
(differentiating omega_coord) and the coordinate Christoffel route
(differentiating the Christoffel symbols); they share no code beyond g
itself, so their agreement is a meaningful cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .metrics import MetricField, _FD4_OFFSETS, _FD4_WEIGHTS


@dataclass
class FrameData:
    """Frame, connection and first-derivative data of a metric at one point."""

    x: np.ndarray
    g: np.ndarray            # g_{mu nu}
    g_inv: np.ndarray
    dg: np.ndarray           # dg[rho, mu, nu]
    L: np.ndarray            # coframe: e_mu^a = L[mu, a]
    L_inv: np.ndarray        # frame:   e_a^mu = L_inv[a, mu]
    dL: np.ndarray           # dL[rho] = partial_rho L
    sqrt_det: float
    c_frame: np.ndarray      # c[a, b, c] = <[e_a, e_b], e_c>
    omega_frame: np.ndarray  # omega[a, b, c]
    omega_coord: np.ndarray  # omega[a, b, mu]
    dlogdet: np.ndarray      # partial_mu log det g


def _phi_lower(m: np.ndarray) -> np.ndarray:
    """Strict lower triangle plus half the diagonal (Cholesky derivative map)."""
    return np.tril(m, -1) + 0.5 * np.diag(np.diag(m))


def frame_at(metric: MetricField, x) -> FrameData:
    """Compute frame, connection and log-det derivative of ``metric`` at ``x``."""
    x = np.asarray(x, dtype=float)
    n = metric.n
    g = metric.g(x)
    dg = metric.dg(x)

    L = np.linalg.cholesky(g)
    L_inv = np.linalg.inv(L)

    # dL[rho] = L Phi(L^{-1} dg[rho] L^{-T})
    dL = np.empty((n, n, n))
    for rho in range(n):
        m = L_inv @ dg[rho] @ L_inv.T
        dL[rho] = L @ _phi_lower(m)

    # partial_rho e_a^nu = -(L^{-1} dL[rho] L^{-1})[a, nu]
    de_up = np.empty((n, n, n))
    for rho in range(n):
        de_up[rho] = -(L_inv @ dL[rho] @ L_inv)

    # [e_a, e_b]^nu = e_a^mu partial_mu e_b^nu - (a <-> b)
    half = np.einsum("am,mbn->abn", L_inv, de_up)
    bracket = half - half.transpose(1, 0, 2)
    # lower the vector index with the coframe (frame metric is Euclidean)
    c_frame = np.einsum("abn,nc->abc", bracket, L)

    # Levi-Civita in the orthonormal frame (Koszul, constant frame metric):
    # omega_{abc} = (c_{abc} + c_{acb} - c_{bca}) / 2
    omega_frame = 0.5 * (
        c_frame + c_frame.transpose(0, 2, 1) - c_frame.transpose(2, 0, 1)
    )
    omega_coord = np.einsum("abc,mc->abm", omega_frame, L)

    g_inv = L_inv.T @ L_inv
    dlogdet = np.einsum("rs,mrs->m", g_inv, dg)
    det = float(np.prod(np.diag(L))) ** 2

    return FrameData(
        x=x, g=g, g_inv=g_inv, dg=dg, L=L, L_inv=L_inv, dL=dL,
        sqrt_det=math.sqrt(det), c_frame=c_frame, omega_frame=omega_frame,
        omega_coord=omega_coord, dlogdet=dlogdet,
    )


def torsion_residual(metric: MetricField, x) -> float:
    """Max-norm residual of the zero-torsion relation (analytic, no FD).

    partial_rho e_sigma^a - partial_sigma e_rho^a
        + omega^a_{b rho} e_sigma^b - omega^a_{b sigma} e_rho^b  = 0
    """
    fr = frame_at(metric, x)
    # partial_rho e_sigma^a = dL[rho][sigma, a]
    de_dn = fr.dL  # [rho, sigma, a]
    t = de_dn - de_dn.transpose(1, 0, 2)
    t = t + np.einsum("abr,sb->rsa", fr.omega_coord, fr.L)
    t = t - np.einsum("abs,rb->rsa", fr.omega_coord, fr.L)
    scale = 1.0 + float(np.max(np.abs(fr.dL)))
    return float(np.max(np.abs(t))) / scale


def pairing_vector(fr: FrameData) -> np.ndarray:
    """V^mu = sqrt|g| (e_a^mu e_b^nu - e_a^nu e_b^mu) omega^{ab}_nu.

    This is the vector density whose (distributional) divergence carries the
    total-derivative part of the scalar curvature; by the antisymmetry of
    omega in (a, b) the two terms coincide, hence the factor 2.
    """
    v = 2.0 * np.einsum("am,bn,abn->m", fr.L_inv, fr.L_inv, fr.omega_coord)
    return fr.sqrt_det * v


def q_scalar(fr: FrameData) -> float:
    """Q = e_a^mu e_b^nu (omega^a_{c mu} omega^{cb}_nu - omega^a_{c nu} omega^{cb}_mu).

    The part of the curvature quadratic in the connection; identically zero
    in two dimensions.
    """
    w = fr.omega_coord
    quad = np.einsum("acm,cbn->abmn", w, w)
    quad = quad - quad.transpose(0, 1, 3, 2)
    return float(np.einsum("am,bn,abmn->", fr.L_inv, fr.L_inv, quad))


def scalar_curvature_frame(metric: MetricField, x, h: float | None = None) -> float:
    """Scalar curvature from the frame route.

    R = e_a^mu e_b^nu ( partial_mu omega^{ab}_nu - partial_nu omega^{ab}_mu
                        + omega^a_{c mu} omega^{cb}_nu
                        - omega^a_{c nu} omega^{cb}_mu )

    The derivative of the connection is a 4th-order central difference of
    the analytic omega map (the only finite difference in this route).
    """
    x = np.asarray(x, dtype=float)
    n = metric.n
    if h is None:
        h = metric.fd_step(x)

    fr = frame_at(metric, x)

    domega = np.zeros((n, n, n, n))  # [rho, a, b, nu]
    for rho in range(n):
        for off, wt in zip(_FD4_OFFSETS, _FD4_WEIGHTS):
            xp = np.array(x)
            xp[rho] += off * h
            domega[rho] += wt * frame_at(metric, xp).omega_coord
        domega[rho] /= h

    curl = np.einsum("am,bn,mabn->", fr.L_inv, fr.L_inv, domega)
    curl -= np.einsum("am,bn,nabm->", fr.L_inv, fr.L_inv, domega)
    return float(curl) + q_scalar(fr)


def christoffel(metric: MetricField, x) -> np.ndarray:
    """Christoffel symbols Gamma^alpha_{beta gamma} at ``x``."""
    g_inv = metric.g_inv(x)
    dg = metric.dg(x)
    # term[delta, beta, gamma] = dg[beta,delta,gamma]+dg[gamma,delta,beta]-dg[delta,beta,gamma]
    term = (
        np.einsum("bdg->dbg", dg)
        + np.einsum("gdb->dbg", dg)
        - dg
    )
    return 0.5 * np.einsum("ad,dbg->abg", g_inv, term)


def scalar_curvature_christoffel(metric: MetricField, x) -> float:
    """Scalar curvature from the coordinate route (needs second derivatives).

    Ricci_{beta nu} = partial_alpha Gamma^alpha_{beta nu}
                      - partial_nu Gamma^alpha_{beta alpha}
                      + Gamma^alpha_{alpha lam} Gamma^lam_{beta nu}
                      - Gamma^alpha_{nu lam} Gamma^lam_{beta alpha}
    """
    x = np.asarray(x, dtype=float)
    g_inv = metric.g_inv(x)
    dg = metric.dg(x)
    d2g = metric.d2g(x)

    dg_inv = -np.einsum("ab,rbc,cd->rad", g_inv, dg, g_inv)
    term = np.einsum("bdg->dbg", dg) + np.einsum("gdb->dbg", dg) - dg
    gam = 0.5 * np.einsum("ad,dbg->abg", g_inv, term)

    # dterm[rho, delta, beta, gamma]
    dterm = (
        np.einsum("rbdg->rdbg", d2g)
        + np.einsum("rgdb->rdbg", d2g)
        - np.einsum("rdbg->rdbg", d2g)
    )
    dgam = 0.5 * (
        np.einsum("rad,dbg->rabg", dg_inv, term)
        + np.einsum("ad,rdbg->rabg", g_inv, dterm)
    )

    ricci = (
        np.einsum("aabn->bn", dgam)
        - np.einsum("naba->bn", dgam)
        + np.einsum("aal,lbn->bn", gam, gam)
        - np.einsum("anl,lba->bn", gam, gam)
    )
    return float(np.einsum("bn,bn->", g_inv, ricci))


def divergence_identity_residual(metric: MetricField, x, h: float | None = None) -> float:
    """Relative residual of  partial_mu V^mu = (R + Q) sqrt|g|  at ``x``.

    The divergence of the pairing vector is taken by finite differences of
    the analytic V map; R comes from the frame route.  For smooth metrics
    this ties the distributional pairing to the pointwise curvature.
    """
    x = np.asarray(x, dtype=float)
    n = metric.n
    if h is None:
        h = metric.fd_step(x)

    div = 0.0
    for mu in range(n):
        for off, wt in zip(_FD4_OFFSETS, _FD4_WEIGHTS):
            xp = np.array(x)
            xp[mu] += off * h
            div += wt * pairing_vector(frame_at(metric, xp))[mu]
    div /= h

    fr = frame_at(metric, x)
    rhs = (scalar_curvature_frame(metric, x, h=h) + q_scalar(fr)) * fr.sqrt_det
    scale = max(abs(rhs), abs(div), 1.0)
    return abs(div - rhs) / scale
