"""Metric families on coordinate charts, with first/second derivative supply.

A :class:`MetricField` answers pointwise queries ``g(x)``, ``dg(x)``,
``d2g(x)`` for a Riemannian metric in a single chart.  The built-in families
(conformally flat, cones, capped cones, trigonometric perturbations of the
identity, block cone bundles, glued disks) carry analytic derivatives; the
generic :class:`CallableMetric` falls back to 4th-order central finite
differences with a step that adapts to the distance from the singular set,
so stencils never straddle a singular point.

Index conventions used throughout the package:

* ``g(x)[mu, nu]``            metric components ``g_{mu nu}``
* ``dg(x)[rho, mu, nu]``      ``d g_{mu nu} / d x^rho``
* ``d2g(x)[rho, tau, mu, nu]``  ``d^2 g_{mu nu} / d x^rho d x^tau``
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

import numpy as np

# 4th-order central first-derivative stencil.
_FD4_OFFSETS = (-2.0, -1.0, 1.0, 2.0)
_FD4_WEIGHTS = (1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0)


def fd4_partial(func: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                mu: int, h: float) -> np.ndarray:
    """4th-order central difference of ``func`` along coordinate ``mu``."""
    acc = None
    for off, wt in zip(_FD4_OFFSETS, _FD4_WEIGHTS):
        xp = np.array(x, dtype=float)
        xp[mu] += off * h
        val = wt * np.asarray(func(xp), dtype=float)
        acc = val if acc is None else acc + val
    return acc / h


def fd4_gradient(func: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                 h: float) -> np.ndarray:
    """Stack of :func:`fd4_partial` over all coordinates; leading axis = rho."""
    return np.stack([fd4_partial(func, x, mu, h) for mu in range(len(x))])


class MetricField:
    """Base class: a metric on an n-dimensional coordinate chart.

    Subclasses must implement :meth:`g`; they should override :meth:`dg` /
    :meth:`d2g` when analytic derivatives are available.  ``singular_points``
    lists isolated chart points where the metric degenerates or blows up;
    subclasses with non-point singular sets override :meth:`dist_to_singular`
    instead.
    """

    def __init__(self, n: int, singular_points: Sequence[np.ndarray] = ()):
        self.n = int(n)
        self.singular_points = [np.asarray(p, dtype=float) for p in singular_points]

    # -- components ---------------------------------------------------------

    def g(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dg(self, x: np.ndarray) -> np.ndarray:
        h = self.fd_step(x)
        return fd4_gradient(self.g, np.asarray(x, dtype=float), h)

    def d2g(self, x: np.ndarray) -> np.ndarray:
        # Nested 4th-order differences of the dg map.  dg itself may be
        # analytic (cheap) or a finite difference (then this is a nested
        # stencil; accuracy is still ample for oracle use).
        h = self.fd_step(x)
        return fd4_gradient(self.dg, np.asarray(x, dtype=float), h)

    # -- convenience --------------------------------------------------------

    def g_inv(self, x: np.ndarray) -> np.ndarray:
        return np.linalg.inv(self.g(x))

    def det_g(self, x: np.ndarray) -> float:
        return float(np.linalg.det(self.g(x)))

    def sqrt_det(self, x: np.ndarray) -> float:
        return math.sqrt(self.det_g(x))

    # -- finite-difference step control --------------------------------------

    def dist_to_singular(self, x: np.ndarray) -> float:
        if not self.singular_points:
            return math.inf
        x = np.asarray(x, dtype=float)
        return min(float(np.linalg.norm(x - p)) for p in self.singular_points)

    def fd_step(self, x: np.ndarray, rel: float = 2e-3) -> float:
        """Step small enough that a 2-wide stencil never crosses the singular set."""
        x = np.asarray(x, dtype=float)
        scale = 1.0 + float(np.linalg.norm(x))
        d = self.dist_to_singular(x)
        if math.isfinite(d):
            scale = min(scale, 0.25 * d)
        return rel * scale


class CallableMetric(MetricField):
    """Metric from a user callable, derivatives by finite differences.

    ``g_func(x) -> (n, n) array``.  Optional ``dg_func``/``d2g_func``
    short-circuit the finite differences.
    """

    def __init__(self, n, g_func, dg_func=None, d2g_func=None,
                 singular_points=()):
        super().__init__(n, singular_points)
        self._g = g_func
        self._dg = dg_func
        self._d2g = d2g_func

    def g(self, x):
        return np.asarray(self._g(np.asarray(x, dtype=float)), dtype=float)

    def dg(self, x):
        if self._dg is not None:
            return np.asarray(self._dg(np.asarray(x, dtype=float)), dtype=float)
        return super().dg(x)

    def d2g(self, x):
        if self._d2g is not None:
            return np.asarray(self._d2g(np.asarray(x, dtype=float)), dtype=float)
        return super().d2g(x)


# ---------------------------------------------------------------------------
# Conformally flat metrics  g = exp(2 sigma) delta
# ---------------------------------------------------------------------------


class ConformalMetric(MetricField):
    """g_{mu nu} = exp(2 sigma(x)) delta_{mu nu} with analytic sigma derivatives.

    ``sigma``, ``grad_sigma``, ``hess_sigma`` are callables returning the
    potential, its gradient (n,), and its Hessian (n, n).  All metric
    derivatives follow by the product rule, so the family is exact.
    """

    def __init__(self, n, sigma, grad_sigma, hess_sigma, singular_points=()):
        super().__init__(n, singular_points)
        self.sigma = sigma
        self.grad_sigma = grad_sigma
        self.hess_sigma = hess_sigma

    def g(self, x):
        x = np.asarray(x, dtype=float)
        return math.exp(2.0 * self.sigma(x)) * np.eye(self.n)

    def dg(self, x):
        x = np.asarray(x, dtype=float)
        e2s = math.exp(2.0 * self.sigma(x))
        ds = np.asarray(self.grad_sigma(x), dtype=float)
        return 2.0 * e2s * ds[:, None, None] * np.eye(self.n)[None, :, :]

    def d2g(self, x):
        x = np.asarray(x, dtype=float)
        e2s = math.exp(2.0 * self.sigma(x))
        ds = np.asarray(self.grad_sigma(x), dtype=float)
        hs = np.asarray(self.hess_sigma(x), dtype=float)
        coeff = 2.0 * hs + 4.0 * np.outer(ds, ds)
        return e2s * coeff[:, :, None, None] * np.eye(self.n)[None, None, :, :]

    # Closed-form scalar curvature of a conformally flat metric; used as an
    # independent oracle against the frame and Christoffel routes.
    def scalar_curvature_exact(self, x) -> float:
        x = np.asarray(x, dtype=float)
        n = self.n
        ds = np.asarray(self.grad_sigma(x), dtype=float)
        lap = float(np.trace(np.asarray(self.hess_sigma(x), dtype=float)))
        grad2 = float(ds @ ds)
        return math.exp(-2.0 * self.sigma(x)) * (
            -2.0 * (n - 1) * lap - (n - 1) * (n - 2) * grad2
        )

    def sqrt_det(self, x):
        return math.exp(self.n * self.sigma(np.asarray(x, dtype=float)))

    def det_g(self, x):
        return math.exp(2.0 * self.n * self.sigma(np.asarray(x, dtype=float)))


class RadialConformalMetric(ConformalMetric):
    """Conformal metric whose potential depends only on r = |x - center|.

    ``profile`` supplies (sigma(r), sigma'(r), sigma''(r)); gradient and
    Hessian follow from the chain rule:

        grad sigma = s' rhat
        hess sigma = s'' rhat rhat^T + (s'/r) (I - rhat rhat^T)
    """

    def __init__(self, n, profile, center=None, singular=True):
        center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        self.center = center
        self.profile = profile
        sing = [center] if singular else []

        def sigma(x):
            return profile(np.linalg.norm(x - center))[0]

        def grad_sigma(x):
            d = x - center
            r = np.linalg.norm(d)
            _, s1, _ = profile(r)
            return s1 * d / r

        def hess_sigma(x):
            d = x - center
            r = np.linalg.norm(d)
            _, s1, s2 = profile(r)
            rhat = d / r
            proj = np.outer(rhat, rhat)
            return s2 * proj + (s1 / r) * (np.eye(n) - proj)

        super().__init__(n, sigma, grad_sigma, hess_sigma, singular_points=sing)


def cone_metric(n: int, c: float, center=None) -> RadialConformalMetric:
    """Cone metric g = |x - x0|^{-2c} delta (potential sigma = -c log r).

    Flat away from the tip when n = 2; curved like s^{-2} in geodesic radius
    when n > 2.  Requires c < 1 so the tip is at finite distance.
    """
    if not 0.0 <= c < 1.0:
        raise ValueError("cone exponent must satisfy 0 <= c < 1")

    def profile(r):
        return (-c * math.log(r), -c / r, c / r ** 2)

    return RadialConformalMetric(n, profile, center=center, singular=(c > 0))


def stereographic_sphere_metric(n: int = 2) -> ConformalMetric:
    """Round unit sphere in a single stereographic chart; R = n(n-1) ... = 2 for n=2.

    sigma = log 2 - log(1 + r^2).  Smooth everywhere, no singular points.
    """

    def sigma(x):
        return math.log(2.0) - math.log1p(float(x @ x))

    def grad_sigma(x):
        return -2.0 * x / (1.0 + float(x @ x))

    def hess_sigma(x):
        r2 = float(x @ x)
        return (-2.0 * np.eye(n) + 4.0 * np.outer(x, x) / (1.0 + r2)) / (1.0 + r2)

    return ConformalMetric(n, sigma, grad_sigma, hess_sigma)


def _smoothstep5(u: float):
    """C^2 quintic step w on [0,1] with w(0)=0, w(1)=1, w'=w''=0 at both ends.

    Returns (w, w', W) with W(u) = integral_0^u w;  W(1) = 1/2.
    """
    if u <= 0.0:
        return 0.0, 0.0, 0.0
    if u >= 1.0:
        return 1.0, 0.0, 0.5 + (u - 1.0)
    w = u ** 3 * (10.0 - 15.0 * u + 6.0 * u * u)
    dw = 30.0 * u * u * (1.0 - u) ** 2
    W = u ** 4 * (2.5 - 3.0 * u + u * u)
    return w, dw, W


def capped_cone_metric(c: float) -> RadialConformalMetric:
    """2D cone of angle parameter c, capped off into a closed surface.

    The radial potential interpolates (C^2, via a quintic step in log2 r)
    between the cone potential -c log r for r <= 1 and -2 log r + const for
    r >= 2.  The outer region is the pullback of a flat plane under the
    inversion x -> x/|x|^2, so the chart compactifies to a topological
    sphere whose curvature is a point mass 4 pi c at the tip plus a smooth
    part concentrated on the transition annulus 1 < r < 2 of total mass
    4 pi (2 - c); together 8 pi, as the closed-surface count requires.
    """
    if not 0.0 <= c < 1.0:
        raise ValueError("cone exponent must satisfy 0 <= c < 1")
    ln2 = math.log(2.0)

    def profile(r):
        u = math.log(r) / ln2  # log2 r
        w, dw, W = _smoothstep5(u)
        s0 = -c * math.log(r) + (c - 2.0) * ln2 * W
        s1 = (-c + (c - 2.0) * w) / r
        s2 = (c - (c - 2.0) * w) / r ** 2 + (c - 2.0) * dw / (r ** 2 * ln2)
        return s0, s1, s2

    return RadialConformalMetric(2, profile, singular=(c > 0))


# ---------------------------------------------------------------------------
# Generic smooth metrics: trigonometric perturbations of the identity
# ---------------------------------------------------------------------------


class TrigMetric(MetricField):
    """Random smooth non-diagonal SPD metric with analytic derivatives.

    g(x) = I + sum_k A_k sin(k . x + phi_k), with symmetric amplitude
    matrices A_k drawn small enough that g stays uniformly positive.
    Useful as a "generic smooth metric" with no special structure.
    """

    def __init__(self, n: int, seed: int = 0, amplitude: float = 0.3,
                 n_modes: int = 4, max_freq: int = 2):
        super().__init__(n)
        rng = np.random.default_rng(seed)
        self.waves = []
        total = amplitude / n_modes
        for _ in range(n_modes):
            k = rng.integers(-max_freq, max_freq + 1, size=n)
            while not np.any(k):
                k = rng.integers(-max_freq, max_freq + 1, size=n)
            a = rng.standard_normal((n, n))
            a = 0.5 * (a + a.T)
            a *= total / max(1e-12, float(np.linalg.norm(a, 2)))
            self.waves.append((k.astype(float), float(rng.uniform(0, 2 * math.pi)), a))

    def g(self, x):
        x = np.asarray(x, dtype=float)
        out = np.eye(self.n)
        for k, phi, a in self.waves:
            out = out + a * math.sin(float(k @ x) + phi)
        return out

    def dg(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros((self.n, self.n, self.n))
        for k, phi, a in self.waves:
            cosv = math.cos(float(k @ x) + phi)
            out += k[:, None, None] * (cosv * a)[None, :, :]
        return out

    def d2g(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros((self.n, self.n, self.n, self.n))
        for k, phi, a in self.waves:
            sinv = math.sin(float(k @ x) + phi)
            out -= np.einsum("r,t,mn->rtmn", k, k, sinv * a)
        return out


# ---------------------------------------------------------------------------
# Product / block metrics
# ---------------------------------------------------------------------------


class BlockConeMetric(MetricField):
    """Flat base times a cone fiber:  g = diag(I_b, |x_f|^{-2c} I_f).

    Coordinates are (y, x) with y the ``base_dim`` flat coordinates and x the
    ``fiber_dim`` cone coordinates; the singular set is the base slice
    {x = 0}.  The base is typically a circle (periodic y), which only the
    quadrature cares about.
    """

    def __init__(self, base_dim: int, fiber_dim: int, c: float):
        if not 0.0 <= c < 1.0:
            raise ValueError("cone exponent must satisfy 0 <= c < 1")
        super().__init__(base_dim + fiber_dim)
        self.base_dim = base_dim
        self.fiber_dim = fiber_dim
        self.c = c

    def _split(self, x):
        x = np.asarray(x, dtype=float)
        return x[: self.base_dim], x[self.base_dim:]

    def dist_to_singular(self, x):
        _, xf = self._split(x)
        return float(np.linalg.norm(xf))

    def g(self, x):
        _, xf = self._split(x)
        r = float(np.linalg.norm(xf))
        out = np.eye(self.n)
        out[self.base_dim:, self.base_dim:] *= r ** (-2.0 * self.c)
        return out

    def dg(self, x):
        _, xf = self._split(x)
        r = float(np.linalg.norm(xf))
        out = np.zeros((self.n, self.n, self.n))
        # d/dx^rho r^{-2c} = -2c r^{-2c-2} x_rho, fiber directions only.
        pref = -2.0 * self.c * r ** (-2.0 * self.c - 2.0)
        for rho in range(self.fiber_dim):
            blk = pref * xf[rho] * np.eye(self.fiber_dim)
            out[self.base_dim + rho, self.base_dim:, self.base_dim:] = blk
        return out

    def d2g(self, x):
        _, xf = self._split(x)
        r = float(np.linalg.norm(xf))
        c = self.c
        nf = self.fiber_dim
        out = np.zeros((self.n, self.n, self.n, self.n))
        # d^2/dx^rho dx^tau r^{-2c}
        #   = -2c r^{-2c-2} [delta_{rho tau} - (2c+2) xhat_rho xhat_tau]
        pref = -2.0 * c * r ** (-2.0 * c - 2.0)
        xhat = xf / r
        coeff = pref * (np.eye(nf) - (2.0 * c + 2.0) * np.outer(xhat, xhat))
        for rho in range(nf):
            for tau in range(nf):
                out[self.base_dim + rho, self.base_dim + tau,
                    self.base_dim:, self.base_dim:] = coeff[rho, tau] * np.eye(nf)
        return out


class GluedDiskMetric(MetricField):
    """Two flat unit disks glued along their boundary circles.

    Chart: a cylinder (t, theta) in (-1, 1) x [0, 2 pi) with
    g = diag(1, (1 - |t|)^2); t is the signed distance to the gluing circle
    t = 0 and |t| -> 1 approaches the two disk centers.  The metric is
    Lipschitz across the interface: dg_{theta theta}/dt jumps by +4 -> the
    curvature measure concentrates a density 2(H1 + H2) = 4 on the circle.
    """

    def __init__(self):
        super().__init__(2)

    def dist_to_singular(self, x):
        t = float(np.asarray(x, dtype=float)[0])
        # Keep stencils off both the interface (t=0) and the coordinate
        # degeneracies at the disk centers (|t|=1).
        return min(abs(t), 1.0 - abs(t))

    def g(self, x):
        t = float(np.asarray(x, dtype=float)[0])
        return np.diag([1.0, (1.0 - abs(t)) ** 2])

    def dg(self, x):
        t = float(np.asarray(x, dtype=float)[0])
        out = np.zeros((2, 2, 2))
        out[0, 1, 1] = -2.0 * (1.0 - abs(t)) * math.copysign(1.0, t)
        return out

    def d2g(self, x):
        out = np.zeros((2, 2, 2, 2))
        out[0, 0, 1, 1] = 2.0
        return out


# ---------------------------------------------------------------------------
# Cones in harmonic coordinates
# ---------------------------------------------------------------------------


def harmonic_cone_alpha(n: int, c: float) -> float:
    """Radial exponent of the harmonic-coordinate cone chart.

    alpha solves the radial harmonic-map equation for the cone profile;
    c = 0 gives alpha = 1 and the flat metric.
    """
    if n < 2:
        raise ValueError("need chart dimension >= 2")
    if not 0.0 <= c < 1.0:
        raise ValueError("cone exponent must satisfy 0 <= c < 1")
    return 0.5 * (math.sqrt((n - 2) ** 2 + 4.0 * (n - 1) / (1.0 - c) ** 2)
                  - (n - 2))


class HarmonicConeMetric(MetricField):
    """Cone of exponent c written in a harmonic Cartesian chart.

    With rho = |x|, alpha = harmonic_cone_alpha(n, c) and
    A = alpha^2 (1-c)^2:

        g_{mu nu} = rho^{2/alpha - 2} (A delta_{mu nu} + (1 - A) xhat_mu xhat_nu)

    i.e. rho^{2/alpha-2} (drho^2 + A rho^2 h) in polar form.  These
    coordinates satisfy g^{mu nu} Gamma^alpha_{mu nu} = 0 away from the
    tip, and the radial substitution r = (alpha(1-c))^{1/(1-c)}
    rho^{1/(alpha(1-c))} is an isometry onto the conformal cone
    r^{-2c} delta, which gives the closed-form curvature below.
    """

    def __init__(self, n: int, c: float):
        super().__init__(n, singular_points=[np.zeros(n)])
        self.c = float(c)
        self.alpha = harmonic_cone_alpha(n, c)
        self._A = (self.alpha * (1.0 - self.c)) ** 2
        self._p = 2.0 / self.alpha - 2.0

    def _rho(self, x):
        x = np.asarray(x, dtype=float)
        return x, float(np.linalg.norm(x))

    def g(self, x):
        x, rho = self._rho(x)
        A, p = self._A, self._p
        return rho**p * A * np.eye(self.n) + (1.0 - A) * rho ** (p - 2.0) * np.outer(x, x)

    def g_inv(self, x):
        x, rho = self._rho(x)
        A, p = self._A, self._p
        proj = np.outer(x, x) / rho**2
        return rho**-p * (np.eye(self.n) / A + (1.0 - 1.0 / A) * proj)

    def det_g(self, x):
        _, rho = self._rho(x)
        return rho ** (self.n * self._p) * self._A ** (self.n - 1)

    def dg(self, x):
        x, rho = self._rho(x)
        A, B, p, n = self._A, 1.0 - self._A, self._p, self.n
        eye = np.eye(n)
        out = np.empty((n, n, n))
        # A rho^p delta term
        out[:] = (A * p * rho ** (p - 2.0)) * x[:, None, None] * eye[None, :, :]
        # B rho^{p-2} x x term
        out += (B * (p - 2.0) * rho ** (p - 4.0)) * np.einsum(
            "l,m,n->lmn", x, x, x)
        out += (B * rho ** (p - 2.0)) * (
            np.einsum("lm,n->lmn", eye, x) + np.einsum("ln,m->lmn", eye, x))
        return out

    def d2g(self, x):
        x, rho = self._rho(x)
        A, B, p, n = self._A, 1.0 - self._A, self._p, self.n
        eye = np.eye(n)
        xx = np.einsum("k,l->kl", x, x)
        out = np.zeros((n, n, n, n))
        # A p (rho^{p-2} delta_{kl} + (p-2) rho^{p-4} x_k x_l) delta_{mn}
        out += A * p * np.einsum(
            "kl,mn->klmn",
            rho ** (p - 2.0) * eye + (p - 2.0) * rho ** (p - 4.0) * xx, eye)
        # B (p-2)(p-4) rho^{p-6} x_k x_l x_m x_n
        out += B * (p - 2.0) * (p - 4.0) * rho ** (p - 6.0) * np.einsum(
            "k,l,m,n->klmn", x, x, x, x)
        # B (p-2) rho^{p-4} (delta_{kl} x_m x_n + delta_{km} x_l x_n
        #   + delta_{kn} x_l x_m + delta_{lm} x_k x_n + delta_{ln} x_k x_m)
        out += B * (p - 2.0) * rho ** (p - 4.0) * (
            np.einsum("kl,mn->klmn", eye, xx)
            + np.einsum("km,ln->klmn", eye, xx)
            + np.einsum("kn,lm->klmn", eye, xx)
            + np.einsum("lm,kn->klmn", eye, xx)
            + np.einsum("ln,km->klmn", eye, xx))
        # B rho^{p-2} (delta_{lm} delta_{kn} + delta_{ln} delta_{km})
        out += B * rho ** (p - 2.0) * (
            np.einsum("lm,kn->klmn", eye, eye)
            + np.einsum("ln,km->klmn", eye, eye))
        return out

    def conformal_radius(self, rho: float) -> float:
        """Radius in the conformal-cone chart matching harmonic radius rho."""
        a1c = self.alpha * (1.0 - self.c)
        return a1c ** (1.0 / (1.0 - self.c)) * rho ** (1.0 / a1c)

    def scalar_curvature_exact(self, x) -> float:
        _, rho = self._rho(x)
        n, c = self.n, self.c
        return ((n - 1) * (n - 2) * c * (2.0 - c)
                / (self.alpha * (1.0 - c)) ** 2 * rho ** (-2.0 / self.alpha))


def harmonic_cone_metric(n: int, c: float) -> HarmonicConeMetric:
    """Cone of exponent c in harmonic Cartesian coordinates."""
    return HarmonicConeMetric(n, c)
