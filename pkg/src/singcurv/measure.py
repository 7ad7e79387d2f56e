"""Distributional scalar-curvature pairings and their measure decomposition.

The central object is the pairing

    pair(f) = - int  d_mu f . V^mu  dx  -  int  f Q sqrt|g|  dx

with V the frame-built vector density and Q the connection-quadratic scalar
(see :mod:`singcurv.frames`).  For smooth metrics this equals the classical
int f R dvol; for singular metrics it is the defining formula of the
curvature distribution, and the quadrature excludes a shrinking dyadic
neighborhood of the singular set, extrapolating the partial pairings.

Quadratures are plain tensor products: panelized Gauss-Legendre in radial /
interval directions (panel edges snapped to test-function knots and metric
transition radii, so integrands are smooth inside every panel) and periodic
trapezoid in angles.  Node weights are Lebesgue (dx) weights; all metric
factors live in the integrand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import frames
from .metrics import (
    BlockConeMetric,
    ConformalMetric,
    GluedDiskMetric,
    MetricField,
)


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------


def _quintic(u: float) -> Tuple[float, float, float]:
    """Quintic smoothstep w(u) on [0,1] and its first two derivatives."""
    if u <= 0.0:
        return 0.0, 0.0, 0.0
    if u >= 1.0:
        return 1.0, 0.0, 0.0
    w = u ** 3 * (10.0 - 15.0 * u + 6.0 * u * u)
    dw = 30.0 * u * u * (1.0 - u) ** 2
    d2w = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)
    return w, dw, d2w


@dataclass
class TestFunction:
    """Compactly supported C^2 test function with analytic derivatives.

    ``r_plateau`` is the radius out to which f == value_at_center exactly
    (zero for pure bumps), ``r_support`` the support radius.  ``knots`` are
    the radii where the radial profile's third derivative jumps; quadrature
    builders snap panel edges there.
    """

    center: np.ndarray
    r_plateau: float
    r_support: float
    profile: str
    value_at_center: float
    _radial: Callable[[float], Tuple[float, float, float]] = field(repr=False)

    @property
    def knots(self) -> Tuple[float, ...]:
        if self.r_plateau > 0.0:
            return (self.r_plateau, self.r_support)
        return (self.r_support,)

    def __call__(self, x) -> float:
        r = float(np.linalg.norm(np.asarray(x, dtype=float) - self.center))
        return self._radial(r)[0]

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = x - self.center
        r = float(np.linalg.norm(d))
        if r == 0.0:
            return np.zeros_like(d)
        return self._radial(r)[1] * d / r

    def hess(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = x - self.center
        r = float(np.linalg.norm(d))
        n = len(d)
        if r == 0.0:
            # radial profiles used here are flat (plateau) or quadratic at 0
            _, _, f2 = self._radial(max(r, 1e-300))
            return f2 * np.eye(n)
        _, f1, f2 = self._radial(r)
        rhat = d / r
        proj = np.outer(rhat, rhat)
        return f2 * proj + (f1 / r) * (np.eye(n) - proj)


def radial_plateau(center, r_plateau: float, r_support: float,
                   value: float = 1.0) -> TestFunction:
    """f = value on r <= r_plateau, quintic C^2 falloff to 0 at r_support."""
    center = np.asarray(center, dtype=float)
    if not 0.0 < r_plateau < r_support:
        raise ValueError("need 0 < r_plateau < r_support")
    width = r_support - r_plateau

    def radial(r: float):
        if r <= r_plateau:
            return value, 0.0, 0.0
        if r >= r_support:
            return 0.0, 0.0, 0.0
        w, dw, d2w = _quintic((r - r_plateau) / width)
        return value * (1.0 - w), -value * dw / width, -value * d2w / width ** 2

    return TestFunction(center, r_plateau, r_support, "plateau", value, radial)


def poly_bump(center, r_support: float, value: float = 1.0) -> TestFunction:
    """f = value (1 - (r/r_support)^2)^3: C^2 across the support edge."""
    center = np.asarray(center, dtype=float)

    def radial(r: float):
        s = (r / r_support) ** 2
        if s >= 1.0:
            return 0.0, 0.0, 0.0
        t = 1.0 - s
        f = value * t ** 3
        f1 = -6.0 * value * t * t * r / r_support ** 2
        f2 = -6.0 * value * t * t / r_support ** 2 \
            + 24.0 * value * t * r * r / r_support ** 4
        return f, f1, f2

    return TestFunction(center, 0.0, r_support, "poly_bump", value, radial)


# ---------------------------------------------------------------------------
# Quadratures
# ---------------------------------------------------------------------------


@dataclass
class Quadrature:
    """Nodes, Lebesgue weights, and (optionally) a dyadic shell index per node.

    ``truncated_inner`` marks grids that stop short of a singular point, so
    the pairing knows to extrapolate the excluded tail; complete grids are
    summed as they stand.
    """

    nodes: np.ndarray         # (N, dim)
    weights: np.ndarray       # (N,)
    shell_index: Optional[np.ndarray] = None  # (N,) int; larger = closer in
    truncated_inner: bool = False

    @property
    def size(self) -> int:
        return len(self.weights)


def gauss_panels(edges: Sequence[float], n_nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on consecutive panels [e0,e1],[e1,e2],..."""
    base_x, base_w = np.polynomial.legendre.leggauss(n_nodes)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        xs.append(mid + half * base_x)
        ws.append(half * base_w)
    return np.concatenate(xs), np.concatenate(ws)


def trapezoid_circle(n: int, period: float = 2.0 * math.pi) -> Tuple[np.ndarray, np.ndarray]:
    """Periodic trapezoid rule on [0, period): spectrally accurate on circles."""
    t = np.arange(n) * (period / n)
    w = np.full(n, period / n)
    return t, w


def radial_edges(r_in: float, r_out: float, knots: Iterable[float] = (),
                 max_ratio: float = 2.0) -> List[float]:
    """Panel edges from r_in to r_out: geometric (ratio <= max_ratio) plus knots.

    ``r_in == 0`` is allowed (smooth metrics): the innermost stretch, where a
    geometric ladder cannot start, becomes two equal linear panels.
    """
    pts = {r_in, r_out}
    for k in knots:
        if r_in < k < r_out:
            pts.add(float(k))
    edges = sorted(pts)
    out: List[float] = [edges[0]]
    for a, b in zip(edges[:-1], edges[1:]):
        if a == 0.0:
            out.extend([0.5 * b, b])
            continue
        # subdivide any panel whose ratio exceeds max_ratio (log-uniform)
        m = max(1, int(math.ceil(math.log(b / a) / math.log(max_ratio) - 1e-12)))
        for j in range(1, m + 1):
            out.append(a * (b / a) ** (j / m))
    return out


def polar_quadrature(center, r_edges: Sequence[float], dim: int,
                     n_r: int = 8, n_ang: int = 32,
                     truncated_inner: bool = False) -> Quadrature:
    """Polar product quadrature around ``center`` for dim 2 or 3.

    Radial panels follow ``r_edges``; shell_index counts panels from the
    outside in, giving the dyadic partial sums used for extrapolation and
    integrability scans.
    """
    center = np.asarray(center, dtype=float)
    r, wr = gauss_panels(r_edges, n_r)
    # shell index per radial node: 0 = outermost panel, increasing inward
    n_panels = len(r_edges) - 1
    panel_of = np.repeat(np.arange(n_panels), n_r)
    shell = (n_panels - 1) - panel_of

    if dim == 2:
        th, wt = trapezoid_circle(n_ang)
        R, TH = np.meshgrid(r, th, indexing="ij")
        WR, WT = np.meshgrid(wr, wt, indexing="ij")
        nodes = np.stack(
            [R * np.cos(TH), R * np.sin(TH)], axis=-1
        ).reshape(-1, 2) + center
        weights = (WR * WT * R).reshape(-1)
        sh = np.repeat(shell, n_ang)
    elif dim == 3:
        ct, wct = np.polynomial.legendre.leggauss(max(8, n_ang // 2))
        ph, wph = trapezoid_circle(n_ang)
        R, CT, PH = np.meshgrid(r, ct, ph, indexing="ij")
        WR, WCT, WPH = np.meshgrid(wr, wct, wph, indexing="ij")
        st = np.sqrt(1.0 - CT ** 2)
        nodes = np.stack(
            [R * st * np.cos(PH), R * st * np.sin(PH), R * CT], axis=-1
        ).reshape(-1, 3) + center
        weights = (WR * WCT * WPH * R ** 2).reshape(-1)
        sh = np.repeat(shell, len(ct) * n_ang)
    else:
        raise ValueError("polar quadrature implemented for dim 2 and 3")
    return Quadrature(nodes, weights, sh, truncated_inner=truncated_inner)


def shell_quadrature_for(tf: TestFunction, metric: MetricField,
                         r_in: Optional[float] = None, n_r: int = 8,
                         n_ang: int = 32,
                         extra_knots: Iterable[float] = ()) -> Quadrature:
    """Polar quadrature covering supp f around its center, knots snapped.

    In two dimensions Q vanishes identically, so for a plateau probe around
    the (single) singular point the integrand is exactly zero inside the
    plateau and the inner radius can stop at the plateau edge.  In higher
    dimensions the f.Q-term carries mass all the way in, and the grid keeps
    dyadic shells down to a tiny cutoff for the tail extrapolation.
    """
    singular_here = any(
        np.linalg.norm(p - tf.center) < 1e-12 for p in metric.singular_points
    )
    truncated = singular_here and r_in is not None and r_in > 0.0
    if r_in is None:
        if tf.r_plateau > 0.0 and singular_here and metric.n == 2:
            # gradient is 0 and the 2D Q-term vanishes: the excluded disk
            # carries no integrand, so the grid counts as complete
            r_in = tf.r_plateau
        elif singular_here:
            r_in = tf.r_support * 2.0 ** -20
            truncated = True
        else:
            r_in = 0.0  # nothing singular: integrate the full ball
    edges = radial_edges(r_in, tf.r_support, knots=(*tf.knots, *extra_knots))
    return polar_quadrature(tf.center, edges, metric.n, n_r=n_r, n_ang=n_ang,
                            truncated_inner=truncated)


def product_quadrature(base_nodes, base_weights, fiber: Quadrature) -> Quadrature:
    """Interval-times-fiber product; base coordinate is prepended."""
    base_nodes = np.asarray(base_nodes, dtype=float)
    nb, nf = len(base_nodes), fiber.size
    nodes = np.empty((nb * nf, 1 + fiber.nodes.shape[1]))
    nodes[:, 0] = np.repeat(base_nodes, nf)
    nodes[:, 1:] = np.tile(fiber.nodes, (nb, 1))
    weights = np.repeat(np.asarray(base_weights, dtype=float), nf) * np.tile(
        fiber.weights, nb
    )
    shell = None if fiber.shell_index is None else np.tile(fiber.shell_index, nb)
    return Quadrature(nodes, weights, shell, truncated_inner=fiber.truncated_inner)


# ---------------------------------------------------------------------------
# The pairing engine
# ---------------------------------------------------------------------------


@dataclass
class PairingResult:
    value: float
    shell_sums: Optional[List[float]] = None   # outermost first
    partial_sums: Optional[List[float]] = None
    converged: bool = True
    tail_estimate: float = 0.0

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "shell_sums": self.shell_sums,
            "partial_sums": self.partial_sums,
            "converged": self.converged,
            "tail_estimate": self.tail_estimate,
        }


class PairingEngine:
    """Caches frame data on a quadrature grid; pairs many test functions.

    The expensive per-node quantities (V, Q sqrt|g|, and lazily the scalar
    curvature for the smooth route) depend only on the metric, so one grid
    serves a whole probe family.  Summation order is fixed (grid order), so
    results are reproducible.
    """

    def __init__(self, metric: MetricField, quad: Quadrature):
        self.metric = metric
        self.quad = quad
        n_nodes = quad.size
        self.V = np.empty((n_nodes, metric.n))
        self.Qdens = np.empty(n_nodes)
        self.sqrtg = np.empty(n_nodes)
        for i, x in enumerate(quad.nodes):
            fr = frames.frame_at(metric, x)
            self.V[i] = frames.pairing_vector(fr)
            self.sqrtg[i] = fr.sqrt_det
            self.Qdens[i] = frames.q_scalar(fr) * fr.sqrt_det
        self._R: Optional[np.ndarray] = None

    # -- distributional route -------------------------------------------------

    def pair(self, tf: TestFunction, rtol: float = 1e-8) -> PairingResult:
        grads = np.array([tf.grad(x) for x in self.quad.nodes])
        fvals = np.array([tf(x) for x in self.quad.nodes])
        contrib = -np.einsum("im,im->i", grads, self.V) - fvals * self.Qdens
        contrib = contrib * self.quad.weights

        if self.quad.shell_index is None:
            return PairingResult(float(np.sum(contrib)))

        n_shells = int(self.quad.shell_index.max()) + 1
        sums = np.zeros(n_shells)
        np.add.at(sums, self.quad.shell_index, contrib)
        partials = np.cumsum(sums)
        if not self.quad.truncated_inner:
            # Complete grid: the plain sum is already the integral.
            return PairingResult(float(np.sum(contrib)), [float(s) for s in sums],
                                 [float(p) for p in partials], True, 0.0)
        value, tail, ok = _extrapolate_partials(partials, rtol)
        return PairingResult(value, [float(s) for s in sums],
                             [float(p) for p in partials], ok, tail)

    # -- smooth route ----------------------------------------------------------

    def curvature_at_nodes(self) -> np.ndarray:
        if self._R is None:
            self._R = np.array(
                [frames.scalar_curvature_frame(self.metric, x)
                 for x in self.quad.nodes]
            )
        return self._R

    def smooth_integral(self, tf: TestFunction) -> float:
        """int f R dvol_g over the grid, R from the frame route."""
        R = self.curvature_at_nodes()
        fvals = np.array([tf(x) for x in self.quad.nodes])
        return float(np.sum(fvals * R * self.sqrtg * self.quad.weights))


def _extrapolate_partials(partials: np.ndarray, rtol: float):
    """Geometric-tail extrapolation of dyadic partial sums.

    The shell sums of a power-law integrand decay geometrically inward, so
    consecutive partial-sum increments have a stable ratio rho and the tail
    is inc * rho / (1 - rho).  Convergence is declared when the last three
    extrapolants agree to rtol (relative to the result's scale).
    """
    S = np.asarray(partials, dtype=float)
    if len(S) < 4:
        return float(S[-1]), 0.0, True
    extr = []
    for k in range(2, len(S)):
        inc1, inc0 = S[k] - S[k - 1], S[k - 1] - S[k - 2]
        scale = max(abs(S[k]), 1e-300)
        if abs(inc1) <= 1e-14 * scale:
            extr.append(S[k])
            continue
        rho = inc1 / inc0 if abs(inc0) > 0 else 0.0
        if abs(rho) < 0.95:
            extr.append(S[k] + inc1 * rho / (1.0 - rho))
        else:
            extr.append(math.nan)  # non-geometric / divergent tail
    last = [e for e in extr[-3:]]
    if any(math.isnan(e) for e in last):
        return float(S[-1]), float(S[-1] - S[-2]), False
    scale = max(1.0, abs(last[-1]))
    ok = all(abs(a - b) <= rtol * scale for a, b in zip(last[:-1], last[1:]))
    return float(last[-1]), float(last[-1] - S[-1]), ok


# -- module-level convenience ops -------------------------------------------


def smooth_R_density(metric: MetricField, x) -> float:
    """Scalar curvature R(x) off the singular set (frame route)."""
    return frames.scalar_curvature_frame(metric, x)


def pair_dR(metric: MetricField, tf: TestFunction,
            quad: Optional[Quadrature] = None, **quad_kw) -> PairingResult:
    """One-shot distributional pairing of ``tf`` against dR of ``metric``."""
    if quad is None:
        quad = shell_quadrature_for(tf, metric, **quad_kw)
    return PairingEngine(metric, quad).pair(tf)


# ---------------------------------------------------------------------------
# Measure decomposition
# ---------------------------------------------------------------------------


@dataclass
class MeasureDecomposition:
    atoms: List[dict]
    strata: List[dict]
    ac_samples: List[dict]
    reconstruction_residual: Optional[float] = None

    def as_dict(self) -> dict:
        return {
            "atoms": self.atoms,
            "strata": self.strata,
            "ac_samples": self.ac_samples,
            "reconstruction_residual": self.reconstruction_residual,
        }


def atom_weight(metric: MetricField, point, radii: Sequence[float] = None,
                n_r: int = 8, n_ang: int = 32) -> Tuple[float, bool, List[float]]:
    """Point-mass weight at ``point``: limit of shrinking plateau pairings.

    Each probe is a plateau f == 1 on r <= r_j/2 with support r_j; the
    pairing includes the atom plus the absolutely continuous mass inside
    supp f, which vanishes as r_j -> 0 whenever the ac density is locally
    integrable.  The sequence is extrapolated geometrically.
    """
    if radii is None:
        radii = [0.5 * 2.0 ** -j for j in range(6)]
    vals = []
    for rj in radii:
        tf = radial_plateau(point, 0.5 * rj, rj)
        quad = shell_quadrature_for(tf, metric, n_r=n_r, n_ang=n_ang)
        vals.append(PairingEngine(metric, quad).pair(tf).value)
    vals_arr = np.array(vals)
    value, _, ok = _extrapolate_partials(vals_arr, rtol=1e-6)
    return value, ok, vals


def decompose(metric: MetricField, probe_radii: Sequence[float] = None,
              ac_points: Sequence = (), holdout: Sequence[TestFunction] = (),
              n_r: int = 8, n_ang: int = 32) -> MeasureDecomposition:
    """Split dR of a declared family into atoms / strata / ac part.

    Families with point singularities get atom fits at each singular point;
    the glued-disk and 2D-fiber block-cone families get their interface
    stratum probed with shrinking collars.  The ac density is sampled by
    smooth_R_density at ``ac_points``.  If ``holdout`` probes are given, the
    decomposition is checked against their direct pairings.
    """
    atoms: List[dict] = []
    strata: List[dict] = []

    if isinstance(metric, GluedDiskMetric):
        dens, length = _glued_interface_density(metric, n_ang=n_ang)
        strata.append({"description": "interface circle t=0",
                       "density": dens, "length": length})
    elif isinstance(metric, BlockConeMetric) and metric.fiber_dim == 2 and metric.c > 0:
        dens = _block_cone_line_density(metric, n_r=n_r, n_ang=n_ang)
        strata.append({"description": "base line {fiber=0}",
                       "density": dens, "length": None})
    else:
        for p in metric.singular_points:
            w, ok, seq = atom_weight(metric, p, probe_radii, n_r=n_r, n_ang=n_ang)
            atoms.append({"location": [float(v) for v in p], "weight": w,
                          "converged": ok, "probe_values": seq})

    ac = [{"x": [float(v) for v in np.atleast_1d(x)],
           "density": smooth_R_density(metric, x)} for x in ac_points]

    resid = None
    if holdout:
        errs = []
        for tf in holdout:
            direct = pair_dR(metric, tf, n_r=n_r, n_ang=n_ang).value
            recon = sum(a["weight"] * tf(np.array(a["location"])) for a in atoms)
            # strata/ac reconstruction only for atom-type families; holdout
            # probes for stratum families are compared in their own builders.
            quad = shell_quadrature_for(tf, metric, n_r=n_r, n_ang=n_ang)
            eng = PairingEngine(metric, quad)
            recon += eng.smooth_integral(tf)
            errs.append(abs(direct - recon) / max(1.0, abs(direct)))
        resid = float(max(errs))

    return MeasureDecomposition(atoms, strata, ac, resid)


def _glued_interface_density(metric: GluedDiskMetric, n_ang: int = 32,
                             widths: Sequence[float] = (0.4, 0.2, 0.1, 0.05)) -> Tuple[float, float]:
    """Interface density of the glued-disk chart by shrinking collar probes.

    Probes are plateaus in t (== 1 at the interface), constant in theta; the
    pairing divided by the interface length converges to the density as the
    collar shrinks.  Flat sides mean the limit is exact up to quadrature.
    """
    th, wth = trapezoid_circle(n_ang)
    dens_seq = []
    for wdt in widths:
        # f(t) = plateau: 1 for |t| <= wdt/2, falls to 0 at wdt
        def fprof(t):
            w, dw, _ = _quintic((abs(t) - 0.5 * wdt) / (0.5 * wdt))
            return 1.0 - w, -math.copysign(dw / (0.5 * wdt), t)

        t_edges = [-wdt, -0.5 * wdt, 0.0, 0.5 * wdt, wdt]
        t, wt = gauss_panels(t_edges, 8)
        total = 0.0
        for ti, wi in zip(t, wt):
            fv, dfv = fprof(ti)
            for tj, wj in zip(th, wth):
                x = np.array([ti, tj])
                fr = frames.frame_at(metric, x)
                V = frames.pairing_vector(fr)
                total += wi * wj * (-dfv * V[0]
                                    - fv * frames.q_scalar(fr) * fr.sqrt_det)
        # interface length: circumference of t=0 circle
        length = 2.0 * math.pi * math.sqrt(metric.g(np.array([0.0, 0.0]))[1, 1])
        dens_seq.append(total / length)
    return float(dens_seq[-1]), 2.0 * math.pi


def _block_cone_line_density(metric: BlockConeMetric, n_r: int = 8,
                             n_ang: int = 32, base_len: float = 1.0) -> float:
    """Stratum density per unit base length for a 2D-fiber cone bundle.

    Pairs f = (plateau in fiber radius) x (1 on the periodic base) and
    divides by the base length; the fiber plateau keeps the integrand off
    the singular line entirely.
    """
    tf_fib = radial_plateau(np.zeros(2), 0.25, 0.5)
    yb, wyb = trapezoid_circle(16, period=base_len)
    fib = polar_quadrature(np.zeros(2), radial_edges(0.25, 0.5, tf_fib.knots),
                           2, n_r=n_r, n_ang=n_ang)
    quad = product_quadrature(yb, wyb, fib)
    eng = PairingEngine(metric, quad)

    total = 0.0
    for i, x in enumerate(quad.nodes):
        gf = tf_fib.grad(x[1:])
        fv = tf_fib(x[1:])
        total += quad.weights[i] * (
            -float(gf @ eng.V[i][1:]) - fv * eng.Qdens[i]
        )
    return total / base_len


# ---------------------------------------------------------------------------
# Gluing along a hypersurface (collar coordinates)
# ---------------------------------------------------------------------------


@dataclass
class CollarSide:
    """One glued piece in inward collar coordinates (u, y).

    The metric is du^2 + h_{ij}(u) dy^i dy^j with u >= 0 the distance to the
    interface; ``h`` and ``dh_du`` return the (k x k) boundary-metric block.
    Rotationally invariant sides (all the worked examples) need no
    y-dependence.  ``u_max`` bounds the chart; ``y_period`` the boundary
    coordinate period (circle).
    """

    name: str
    h: Callable[[float], np.ndarray]
    dh_du: Callable[[float], np.ndarray]
    u_max: float
    y_period: float = 2.0 * math.pi

    def mean_curvature(self) -> float:
        """H = -1/2 h^{ij} dh_{ij}/du at u = 0 (inward normal)."""
        h0 = np.atleast_2d(self.h(0.0))
        dh0 = np.atleast_2d(self.dh_du(0.0))
        return -0.5 * float(np.trace(np.linalg.solve(h0, dh0)))

    def boundary_sqrt_h(self) -> float:
        return math.sqrt(float(np.linalg.det(np.atleast_2d(self.h(0.0)))))

    def as_metric(self) -> MetricField:
        side = self

        class _CollarMetric(MetricField):
            def __init__(self):
                super().__init__(1 + np.atleast_2d(side.h(0.0)).shape[0])

            def dist_to_singular(self, x):
                u = float(np.asarray(x, dtype=float)[0])
                return min(u, side.u_max - u) if side.u_max < math.inf else u

            def g(self, x):
                u = float(np.asarray(x, dtype=float)[0])
                out = np.eye(self.n)
                out[1:, 1:] = np.atleast_2d(side.h(u))
                return out

            def dg(self, x):
                u = float(np.asarray(x, dtype=float)[0])
                out = np.zeros((self.n, self.n, self.n))
                out[0, 1:, 1:] = np.atleast_2d(side.dh_du(u))
                return out

        return _CollarMetric()


def flat_disk_side(name: str = "flat unit disk") -> CollarSide:
    """Unit flat disk in collar coordinates: h(u) = (1-u)^2 dtheta^2, H = 1."""
    return CollarSide(
        name,
        h=lambda u: np.array([[(1.0 - u) ** 2]]),
        dh_du=lambda u: np.array([[-2.0 * (1.0 - u)]]),
        u_max=1.0,
    )


def hemisphere_side(name: str = "unit hemisphere") -> CollarSide:
    """Unit hemisphere from its equator: h(u) = cos^2(u) dtheta^2, H = 0."""
    return CollarSide(
        name,
        h=lambda u: np.array([[math.cos(u) ** 2]]),
        dh_du=lambda u: np.array([[-2.0 * math.sin(u) * math.cos(u)]]),
        u_max=0.5 * math.pi,
    )


def half_plane_side(name: str = "flat half-plane", width: float = 2.0 * math.pi) -> CollarSide:
    """Flat half-plane strip: h = 1, H = 0; y-period set by ``width``."""
    return CollarSide(
        name,
        h=lambda u: np.array([[1.0]]),
        dh_du=lambda u: np.array([[0.0]]),
        u_max=math.inf,
        y_period=width,
    )


def gluing_dR(side1: CollarSide, side2: CollarSide,
              f_profile: Callable[[float], float], u_support: float,
              n_u: int = 10, n_y: int = 32, iso_tol: float = 1e-10) -> dict:
    """Total curvature pairing of a glued pair against f(u) (collar profile).

    f is a function of the collar distance only, equal on both sides, with
    f' supported in [0, u_support]; the interface value f(0) weights the
    surface term.  Returns the assembled pairing

        sum_i int f R dvol_i  +  2 int_X f (H1 + H2) dvol_X

    with the interior integrals mapped through each side's collar chart.
    Raises ValueError when the boundary metrics are not isometric.
    """
    h1, h2 = np.atleast_2d(side1.h(0.0)), np.atleast_2d(side2.h(0.0))
    if side1.y_period != side2.y_period or np.max(np.abs(h1 - h2)) > iso_tol:
        raise ValueError("boundary metrics of the two sides are not isometric")

    interior = []
    for side in (side1, side2):
        m = side.as_metric()
        u_hi = min(u_support, side.u_max * (1.0 - 1e-9))
        edges = radial_edges(0.0, u_hi)  # collar is smooth up to the boundary
        u, wu = gauss_panels(edges, n_u)
        y, wy = trapezoid_circle(n_y, period=side.y_period)
        tot = 0.0
        for ui, wui in zip(u, wu):
            Ru = frames.scalar_curvature_frame(m, np.array([ui, 0.5]))
            sg = m.sqrt_det(np.array([ui, 0.5]))
            tot += wui * f_profile(ui) * Ru * sg * side.y_period
        interior.append(tot)

    H1, H2 = side1.mean_curvature(), side2.mean_curvature()
    boundary_len = side1.y_period * side1.boundary_sqrt_h()
    surface = 2.0 * f_profile(0.0) * (H1 + H2) * boundary_len

    return {
        "interior": interior,
        "surface": surface,
        "H": [H1, H2],
        "total": float(sum(interior) + surface),
        "boundary_length": boundary_len,
    }


# ---------------------------------------------------------------------------
# Cone bundles over a flat base (trivial flat bundle)
# ---------------------------------------------------------------------------


def cone_family_dR(base_len: float, n_fiber: int, c: float,
                   fiber_tf: TestFunction, n_r: int = 12) -> dict:
    """Pairing for  (flat circle of length base_len) x (cone fiber of exponent c).

    The test function is (1 on the base) x fiber_tf.  Returns the
    distributionally measured pairing, the interior (absolutely continuous)
    part from the smooth curvature, the extracted singular part, and the
    two-dimensional-fiber prediction 4 pi c f(0) per unit base length.

    The metric and the probe are both invariant under rotations of the fiber
    and translations of the base, so the integrals collapse to a single
    radial line: one frame evaluation per radial node times the exact
    measure  base_len * omega_{k-1} * rho^{k-1} drho.
    """
    if n_fiber < 2:
        raise ValueError("fiber dimension must be at least 2")
    metric = BlockConeMetric(1, n_fiber, c)

    # A 2D fiber is flat off the tip, so a plateau probe has zero integrand
    # inside the plateau; higher-dimensional fibers carry curvature all the
    # way in and need dyadic shells down to a small cutoff.
    if n_fiber == 2 and fiber_tf.r_plateau > 0:
        r_in = fiber_tf.r_plateau
    else:
        r_in = fiber_tf.r_support * 2.0 ** -30
    edges = radial_edges(r_in, fiber_tf.r_support, knots=fiber_tf.knots)
    rr, wr = gauss_panels(edges, n_r)
    sphere_area = 2.0 * math.pi ** (n_fiber / 2.0) / math.gamma(n_fiber / 2.0)

    pairing = 0.0
    interior = 0.0
    fiber_pt = np.zeros(n_fiber)
    for rho, w in zip(rr, wr):
        x = np.zeros(1 + n_fiber)
        x[1] = rho  # along the first fiber axis; base point is irrelevant
        fiber_pt[:] = 0.0
        fiber_pt[0] = rho
        fr = frames.frame_at(metric, x)
        V1 = frames.pairing_vector(fr)[1]  # radial fiber component
        Qd = frames.q_scalar(fr) * fr.sqrt_det
        fv = fiber_tf(fiber_pt)
        dfr = fiber_tf.grad(fiber_pt)[0]
        meas = w * rho ** (n_fiber - 1) * sphere_area * base_len
        pairing += meas * (-dfr * V1 - fv * Qd)
        if n_fiber > 2:
            R = frames.scalar_curvature_frame(metric, x)
            interior += meas * fv * R * fr.sqrt_det

    singular = pairing - interior
    predicted = (4.0 * math.pi * c * fiber_tf.value_at_center * base_len
                 if n_fiber == 2 else 0.0)
    return {
        "pairing": float(pairing),
        "interior": float(interior),
        "singular_extracted": float(singular),
        "singular_predicted": float(predicted),
        "base_length": base_len,
        "fiber_dim": n_fiber,
        "c": c,
    }


# ---------------------------------------------------------------------------
# Lichnerowicz quadratic-form route on 2D conformal charts
# ---------------------------------------------------------------------------


def lichnerowicz_form(metric: ConformalMetric, u: TestFunction,
                      quad: Optional[Quadrature] = None, **quad_kw) -> float:
    """4 x (Dirac quadratic-form difference) for a 2D conformal metric.

    Over a flat background the form difference reduces to
    (1/2) int <grad sigma, grad u> dx, so four times it is
    2 int grad sigma . grad u dx -- computable from sigma alone, with no
    frame machinery.  This must reproduce pair_dR(u).
    """
    if metric.n != 2:
        raise ValueError("the quadratic-form route is for 2D conformal charts")
    if quad is None:
        quad = shell_quadrature_for(u, metric, **quad_kw)
    total = 0.0
    for x, w in zip(quad.nodes, quad.weights):
        total += w * float(np.asarray(metric.grad_sigma(x)) @ u.grad(x))
    return 2.0 * total
