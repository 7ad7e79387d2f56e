"""Top-level acceptance gate: one test per headline capability, each
printing a single PASS/FAIL line (visible under ``pytest -s`` or in the
captured output of a failing run).

Everything here is checked against independent oracles — closed-form cone
weights, Gauss–Bonnet totals, exact Fourier kernels, analytic scaling
exponents — at the tolerances the package promises, with wall-clock
budgets where a capability is only useful if it is also fast.
"""

import math
import time

import numpy as np
import pytest

from singcurv import clifford, dirac, frames, harmonic, integrability as ig
from singcurv import measure as ms
from singcurv import metrics


def _gate(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f"  ({detail})" if detail else ""
    print(f"ACCEPTANCE {name}: {status}{suffix}")


# ---------------------------------------------------------------------------
# 1. Exact gamma-matrix identity suite
# ---------------------------------------------------------------------------


def test_gamma_identity_suite_exact_and_fast():
    t0 = time.monotonic()
    suite = clifford.run_identity_suite((2, 3, 4, 6), n_omega=20, seed=0)
    elapsed = time.monotonic() - t0

    identities_exact = all(e["max_residual"] == 0.0
                           for e in suite["identities"])
    large_n_sampled = any(e["sampled"] for e in suite["identities"]
                          if e["n"] == 6)
    contraction_ok = all(c["max_relative_residual"] <= 1e-12
                         for c in suite["contraction"])
    ok = (suite["passed"] and identities_exact and large_n_sampled
          and contraction_ok and elapsed < 60.0)
    _gate("gamma identity suite exact, contraction <= 1e-12", ok,
          f"{elapsed:.1f}s")
    assert identities_exact
    assert large_n_sampled
    assert contraction_ok
    assert suite["passed"]
    assert elapsed < 60.0


# ---------------------------------------------------------------------------
# 2. Distributional pairing == direct curvature integral on smooth metrics
# ---------------------------------------------------------------------------


def test_smooth_metric_pairing_matches_direct_integral():
    t0 = time.monotonic()
    rng = np.random.default_rng(42)
    cases = []

    sphere = metrics.stereographic_sphere_metric(2)
    for _ in range(5):
        centre = rng.uniform(-0.6, 0.6, size=2)
        r_pl = rng.uniform(0.15, 0.3)
        cases.append((sphere, ms.radial_plateau(centre, r_pl,
                                                r_pl + rng.uniform(0.2, 0.4))))

    bumpy = metrics.TrigMetric(3, seed=7)
    for _ in range(5):
        centre = rng.uniform(-0.5, 0.5, size=3)
        r_pl = rng.uniform(0.15, 0.25)
        cases.append((bumpy, ms.radial_plateau(centre, r_pl,
                                               r_pl + rng.uniform(0.2, 0.35))))

    worst = 0.0
    for metric, tf in cases:
        # lighter angular grids in 3D: accuracy headroom is ~5 orders
        kw = {"n_r": 6, "n_ang": 16} if metric.n == 3 else {}
        engine = ms.PairingEngine(metric,
                                  ms.shell_quadrature_for(tf, metric, **kw))
        paired = engine.pair(tf).value
        direct = engine.smooth_integral(tf)
        worst = max(worst, abs(paired - direct) / max(abs(direct), 1e-12))
    elapsed = time.monotonic() - t0

    ok = worst <= 1e-5 and elapsed < 120.0
    _gate("smooth pairing vs direct integral <= 1e-5 rel", ok,
          f"worst {worst:.2e}, {elapsed:.1f}s")
    assert worst <= 1e-5
    assert elapsed < 120.0


# ---------------------------------------------------------------------------
# 3. 2D cone point masses
# ---------------------------------------------------------------------------


def test_two_dimensional_cone_atom_weights():
    worst = 0.0
    slowest = 0.0
    for c in (0.25, 0.5, 0.75):
        t0 = time.monotonic()
        weight, converged, _ = ms.atom_weight(metrics.cone_metric(2, c),
                                              np.zeros(2))
        slowest = max(slowest, time.monotonic() - t0)
        assert converged
        worst = max(worst, abs(weight - 4.0 * math.pi * c) / (4.0 * math.pi * c))
    ok = worst <= 0.01 and slowest < 60.0
    _gate("2D cone atoms within 1% of closed form", ok,
          f"worst {worst:.2e}, slowest {slowest:.1f}s")
    assert worst <= 0.01
    assert slowest < 60.0


# ---------------------------------------------------------------------------
# 4. Gluing: doubled flat disk
# ---------------------------------------------------------------------------


def test_doubled_disk_total_and_interface_density():
    glued = ms.gluing_dR(ms.flat_disk_side(), ms.flat_disk_side(),
                         lambda u: 1.0, u_support=1.0)
    total_err = abs(glued["total"] - 8.0 * math.pi) / (8.0 * math.pi)

    dec = ms.decompose(metrics.GluedDiskMetric())
    density = dec.strata[0]["density"]
    dens_err = abs(density - 4.0) / 4.0

    ok = total_err <= 1e-3 and dens_err <= 5e-3
    _gate("doubled disk total 8*pi (0.1%), interface density 4 (0.5%)", ok,
          f"total err {total_err:.2e}, density err {dens_err:.2e}")
    assert total_err <= 1e-3
    assert dens_err <= 5e-3


# ---------------------------------------------------------------------------
# 5. Cone bundles over a line: stratum weight / pure ac falloff
# ---------------------------------------------------------------------------


def test_cone_family_line_stratum_and_ac_falloff():
    tf2 = ms.radial_plateau(np.zeros(2), 0.3, 0.8)
    out2 = ms.cone_family_dR(1.0, 2, 0.3, tf2)
    line_err = (abs(out2["singular_extracted"] - 4.0 * math.pi * 0.3)
                / (4.0 * math.pi * 0.3))

    tf3 = ms.radial_plateau(np.zeros(3), 0.3, 0.8)
    out3 = ms.cone_family_dR(1.0, 3, 0.3, tf3)
    stratum_free = abs(out3["singular_extracted"]) <= 1e-3 * abs(out3["pairing"])

    # off the singular line the curvature is absolutely continuous with a
    # universal inverse-square falloff in geodesic distance
    m3 = metrics.BlockConeMetric(1, 3, 0.3)
    radii = np.logspace(-3, -0.7, 9)
    geo_dist = radii ** 0.7 / 0.7
    dens = [frames.scalar_curvature_frame(m3, np.array([0.0, r, 0.0, 0.0]))
            for r in radii]
    slope = np.polyfit(np.log(geo_dist), np.log(np.abs(dens)), 1)[0]

    ok = line_err <= 0.01 and stratum_free and abs(slope + 2.0) <= 0.05
    _gate("cone family: 2D-fiber line mass 1%, 3D-fiber ac exponent -2", ok,
          f"line err {line_err:.2e}, ac slope {slope:.3f}")
    assert line_err <= 0.01
    assert stratum_free
    assert slope == pytest.approx(-2.0, abs=0.05)


# ---------------------------------------------------------------------------
# 6. Integrability verdicts, thresholds, exponent fits
# ---------------------------------------------------------------------------


def test_integrability_verdicts_thresholds_and_exponents():
    m3 = metrics.cone_metric(3, 0.5)
    m2 = metrics.cone_metric(2, 0.5)
    conn3 = ig.annulus_scan(m3, lambda x: frames.frame_at(m3, x).omega_frame,
                            p=2.0)
    conn2 = ig.annulus_scan(m2, lambda x: frames.frame_at(m2, x).omega_frame,
                            p=2.0)
    l2_ok = conn3.verdict == "integrable" and conn2.verdict == "divergent"

    br3 = ig.lp_threshold_scan(3, 0.5)["threshold_bracket"]
    br2 = ig.lp_threshold_scan(2, 0.5)["threshold_bracket"]
    bracket_ok = (br3 == (2.75, 3.0)) and (br2 == (1.75, 2.0))

    audits_ok = True
    for metric in (m2, m3):
        reps = (ig.distribution_existence_audit(metric)
                + ig.form_pairing_audit(metric))
        audits_ok = audits_ok and ig.overall_verdict(reps) == "integrable"

    oracle = {"dR.1": 2.5, "dR.2a": 1.5, "dR.2b": 1.5, "dR.3": 0.5}
    fits = {r.condition_id: r.exponent_estimate
            for r in ig.distribution_existence_audit(m3)}
    fit_err = max(abs(fits[k] - v) for k, v in oracle.items())

    ok = l2_ok and bracket_ok and audits_ok and fit_err <= 0.05
    _gate("connection L2 flip, threshold brackets, audits, exponent fits",
          ok, f"brackets {br2}/{br3}, fit err {fit_err:.3f}")
    assert l2_ok
    assert bracket_ok
    assert audits_ok
    assert fit_err <= 0.05


# ---------------------------------------------------------------------------
# 7. Spin-structure kernel sweep
# ---------------------------------------------------------------------------


def test_spin_structure_kernel_sweep():
    t0 = time.monotonic()
    sweep = dirac.spin_structure_sweep(charges=(0.0, 0.25, 0.5),
                                       sizes=(16, 32))
    elapsed = time.monotonic() - t0

    rows = sweep["rows"]
    assert len(rows) == 24
    indices_zero = all(r["index"] == 0 for r in rows)
    kernels_ok = sweep["all_kernels_match"]
    trivial_only = all(
        (r["kernel_dim"] == 1) == (tuple(r["twist"]) == (0.0, 0.0))
        for r in rows)
    by_case = {}
    for r in rows:
        by_case.setdefault((tuple(r["twist"]), r["cone_strength"]), []).append(
            r["kernel_dim"])
    doubling_stable = all(len(set(v)) == 1 for v in by_case.values())
    gap_ok = sweep["min_gap_ratio"] >= 10.0

    ok = (indices_zero and kernels_ok and trivial_only and doubling_stable
          and gap_ok and elapsed < 600.0)
    _gate("spin sweep: zero index, trivial-spin kernel only, gap >= 10",
          ok, f"min gap {sweep['min_gap_ratio']:.0f}, {elapsed:.0f}s")
    assert indices_zero
    assert kernels_ok
    assert trivial_only
    assert doubling_stable
    assert gap_ok
    assert elapsed < 600.0


# ---------------------------------------------------------------------------
# 8. Quarter-density conjugation identity
# ---------------------------------------------------------------------------


def test_quarter_density_conjugation_residuals():
    grid = dirac.TorusGrid(32)
    xx, yy = grid.mesh()
    smooth = 0.3 * np.sin(xx) * np.cos(yy)
    res_smooth = dirac.quarter_density_residual(grid, smooth, (0.0, 0.0))

    cone = dirac.cone_conformal_factor(grid, [(np.pi, np.pi)], [0.5])
    res_cone = dirac.quarter_density_residual(grid, cone, (0.5, 0.5))

    ok = res_smooth <= 1e-10 and res_cone <= 1e-8
    _gate("conjugation identity: 1e-10 smooth / 1e-8 cone", ok,
          f"smooth {res_smooth:.2e}, cone {res_cone:.2e}")
    assert res_smooth <= 1e-10
    assert res_cone <= 1e-8


# ---------------------------------------------------------------------------
# 9. Round-sphere first singular value (curvature lower bound)
# ---------------------------------------------------------------------------


def test_sphere_chiral_gap_meets_curvature_bound():
    rep = dirac.sphere_chiral_gap(n=48)
    ok = rep.value_squared >= 0.475
    _gate("sphere smallest singular value squared >= 0.475", ok,
          f"value^2 {rep.value_squared:.3f}")
    assert rep.value_squared >= 0.475


# ---------------------------------------------------------------------------
# 10. Harmonic charts: residuals, tip scaling, route agreement
# ---------------------------------------------------------------------------


def test_harmonic_chart_residuals_scaling_and_routes():
    worst_residual = 0.0
    for n in (2, 3, 4):
        for c in (0.1, 0.3, 0.5, 0.7, 0.9):
            chart = harmonic.harmonic_chart(
                metrics.harmonic_cone_metric(n, c))
            worst_residual = max(worst_residual, chart.residual)
    residual_ok = worst_residual <= 1e-6

    met3 = harmonic.neighborhood_scaling(metrics.harmonic_cone_metric(3, 0.5))
    met2 = harmonic.neighborhood_scaling(metrics.harmonic_cone_metric(2, 0.5))
    scaling_ok = met3.verdict == "met" and met2.verdict == "not met"

    worst_route = 0.0
    for n in (3, 4):
        metric = metrics.harmonic_cone_metric(n, 0.5)
        pts = harmonic.radial_shell_samples(n, count=50, seed=1)
        for x in pts:
            dens = harmonic.harmonic_scalar_curvature(metric, x)
            frame = frames.scalar_curvature_frame(metric, x)
            worst_route = max(worst_route,
                              abs(dens - frame) / max(abs(frame), 1e-12))
    route_ok = worst_route <= 1e-6

    ok = residual_ok and scaling_ok and route_ok
    _gate("harmonic charts: residual 1e-6, tip scaling verdicts, routes",
          ok, f"residual {worst_residual:.2e}, route {worst_route:.2e}")
    assert residual_ok
    assert scaling_ok
    assert route_ok
