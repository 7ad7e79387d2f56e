"""Config-driven command line for the package.

TOML configs in, JSON reports out (the Dirac sweep emits CSV).  Every run
is deterministic given the config file and seed — reports carry no
timestamps — and embeds the sha256 of the config bytes plus the package
version.

Exit codes: 0 success, 1 a verification failed, 2 usage or config error,
3 a computation did not converge (reports still written with partial
data).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import __version__, clifford, dirac, harmonic, integrability, measure, metrics

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_NOCONV = 3


class ConfigError(Exception):
    """Bad usage or a config file that fails schema validation."""


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------


def _load_config(path: Optional[str]):
    if path is None:
        raise ConfigError("this command requires --config")
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    return cfg, hashlib.sha256(raw).hexdigest()


def _check_sections(cfg: dict, allowed: Sequence[str]) -> None:
    extra = set(cfg) - set(allowed) - {"seed"}
    if extra:
        raise ConfigError(f"unknown config sections/keys: {sorted(extra)}")


def _table(cfg: dict, name: str, allowed: Sequence[str],
           required: Sequence[str] = (), mandatory: bool = False) -> dict:
    if name not in cfg:
        if mandatory:
            raise ConfigError(f"missing [{name}] section")
        return {}
    tbl = cfg[name]
    if not isinstance(tbl, dict):
        raise ConfigError(f"[{name}] must be a table")
    extra = set(tbl) - set(allowed)
    if extra:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(extra)}")
    missing = set(required) - set(tbl)
    if missing:
        raise ConfigError(f"[{name}] is missing keys: {sorted(missing)}")
    return tbl


def _as_int(tbl: dict, key: str, default=None, lo=None, hi=None) -> int:
    if key not in tbl:
        if default is None:
            raise ConfigError(f"missing integer key '{key}'")
        return default
    v = tbl[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"'{key}' must be an integer, got {v!r}")
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(f"'{key}' = {v} outside [{lo}, {hi}]")
    return v


def _as_float(tbl: dict, key: str, default=None, lo=None, hi=None) -> float:
    if key not in tbl:
        if default is None:
            raise ConfigError(f"missing numeric key '{key}'")
        return default
    v = tbl[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {v!r}")
    v = float(v)
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(f"'{key}' = {v} outside [{lo}, {hi}]")
    return v


def _as_number_list(tbl: dict, key: str, default=None) -> List[float]:
    if key not in tbl:
        if default is None:
            raise ConfigError(f"missing list key '{key}'")
        return list(default)
    v = tbl[key]
    if not isinstance(v, list) or not v or any(
            isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
        raise ConfigError(f"'{key}' must be a non-empty list of numbers")
    return [float(x) for x in v]


_METRIC_KEYS = {
    "flat": {"n"},
    "cone": {"n", "c"},
    "capped_cone": {"c"},
    "sphere": {"n"},
    "glued_disks": set(),
    "block_cone": {"base_dim", "fiber_dim", "c"},
    "harmonic_cone": {"n", "c"},
    "trig": {"n", "seed"},
}


def _flat_metric(n: int) -> metrics.MetricField:
    eye = np.eye(n)
    zero3 = np.zeros((n, n, n))
    zero4 = np.zeros((n, n, n, n))
    return metrics.CallableMetric(n, lambda x: eye, lambda x: zero3,
                                  lambda x: zero4)


def build_metric(tbl: dict, seed: int) -> metrics.MetricField:
    """Construct the metric described by a [metric] config table."""
    family = tbl.get("family")
    if not isinstance(family, str) or family not in _METRIC_KEYS:
        raise ConfigError(
            f"metric family must be one of {sorted(_METRIC_KEYS)}, got {family!r}")
    extra = set(tbl) - _METRIC_KEYS[family] - {"family"}
    if extra:
        raise ConfigError(f"unknown metric keys for {family}: {sorted(extra)}")
    if family == "flat":
        return _flat_metric(_as_int(tbl, "n", lo=2, hi=6))
    if family == "cone":
        return metrics.cone_metric(_as_int(tbl, "n", lo=2, hi=6),
                                   _as_float(tbl, "c", lo=0.0, hi=0.999))
    if family == "capped_cone":
        return metrics.capped_cone_metric(_as_float(tbl, "c", lo=0.0, hi=0.999))
    if family == "sphere":
        n = _as_int(tbl, "n", default=2)
        if n != 2:
            raise ConfigError("the stereographic sphere chart is 2-dimensional")
        return metrics.stereographic_sphere_metric(2)
    if family == "glued_disks":
        return metrics.GluedDiskMetric()
    if family == "block_cone":
        return metrics.BlockConeMetric(_as_int(tbl, "base_dim", lo=1, hi=3),
                                       _as_int(tbl, "fiber_dim", lo=2, hi=4),
                                       _as_float(tbl, "c", lo=0.0, hi=0.999))
    if family == "harmonic_cone":
        return metrics.harmonic_cone_metric(_as_int(tbl, "n", lo=2, hi=6),
                                            _as_float(tbl, "c", lo=0.0, hi=0.999))
    # trig
    return metrics.TrigMetric(_as_int(tbl, "n", lo=2, hi=4),
                              seed=_as_int(tbl, "seed", default=seed))


def _envelope(command: str, config_hash: Optional[str], seed: int) -> Dict:
    return {
        "command": command,
        "version": __version__,
        "config_hash": config_hash,
        "seed": seed,
    }


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_json(report: dict, out: Optional[str]) -> None:
    text = json.dumps(report, indent=2, default=_json_default) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_verify_identities(args) -> int:
    dims: Optional[List[int]] = None
    config_hash = None
    seed = args.seed
    n_omega = 20
    if args.config:
        cfg, config_hash = _load_config(args.config)
        _check_sections(cfg, ["identities"])
        tbl = _table(cfg, "identities", ["dims", "omega_draws"], mandatory=True)
        dims_raw = tbl.get("dims")
        if not isinstance(dims_raw, list):
            raise ConfigError("[identities] dims must be a list of dimensions")
        dims = [int(d) for d in dims_raw]
        n_omega = _as_int(tbl, "omega_draws", default=20, lo=1)
        if seed is None:
            seed = _as_int(cfg, "seed", default=0)
    if args.dims is not None:
        try:
            dims = [int(d) for d in args.dims.split(",") if d.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad --dims: {exc}") from exc
    if not dims:
        raise ConfigError("no dimensions given (use --dims or a config file)")
    if any(d < 2 or d > 8 for d in dims):
        raise ConfigError("dimensions must lie in 2..8")
    seed = 0 if seed is None else seed

    suite = clifford.run_identity_suite(
        dims, n_omega=n_omega, seed=seed,
        corrupt_grade0_sign=args.self_test)
    # timing is not part of the deterministic report contract
    for entry in suite["identities"]:
        entry.pop("elapsed_s", None)

    report = _envelope("verify-identities", config_hash, seed)
    report["dims"] = dims
    report["self_test"] = bool(args.self_test)
    report.update(suite)

    if args.self_test:
        located = [e for e in suite["identities"] if not e["passed"]]
        report["self_test_detected"] = [
            {"identity": e["name"], "n": e["n"], "first_failure": e["first_failure"]}
            for e in located
        ]
        _write_json(report, args.out)
        if located:
            first = located[0]
            print(f"self-test: corrupted scalar term detected by "
                  f"{first['name']} at n={first['n']}, "
                  f"tuple {first['first_failure']}", file=sys.stderr)
            return EXIT_FAIL
        print("self-test DEFECT: the corruption was not detected",
              file=sys.stderr)
        return EXIT_FAIL
    _write_json(report, args.out)
    return EXIT_OK if suite["passed"] else EXIT_FAIL


def cmd_curvature(args) -> int:
    cfg, config_hash = _load_config(args.config)
    _check_sections(cfg, ["metric", "probes", "numerics"])
    seed = args.seed if args.seed is not None else _as_int(cfg, "seed", default=0)
    metric = build_metric(_table(cfg, "metric", list(set().union(
        *(_METRIC_KEYS.values()))) + ["family"], ["family"], mandatory=True), seed)
    probes = _table(cfg, "probes", ["radii", "ac_points"])
    numerics = _table(cfg, "numerics", ["n_r", "n_ang"])
    radii = probes.get("radii")
    if radii is not None:
        radii = _as_number_list(probes, "radii")
    ac_points = probes.get("ac_points", [])
    if ac_points and (not isinstance(ac_points, list) or any(
            not isinstance(p, list) or len(p) != metric.n for p in ac_points)):
        raise ConfigError("ac_points must be a list of chart points")
    dec = measure.decompose(
        metric, probe_radii=radii,
        ac_points=[np.asarray(p, dtype=float) for p in ac_points],
        n_r=_as_int(numerics, "n_r", default=8, lo=2),
        n_ang=_as_int(numerics, "n_ang", default=32, lo=4))

    report = _envelope("curvature", config_hash, seed)
    report["decomposition"] = dec.as_dict()
    converged = all(a["converged"] for a in dec.atoms)
    report["converged"] = converged
    _write_json(report, args.out)
    return EXIT_OK if converged else EXIT_NOCONV


def cmd_integrability(args) -> int:
    cfg, config_hash = _load_config(args.config)
    _check_sections(cfg, ["metric", "audit"])
    seed = args.seed if args.seed is not None else _as_int(cfg, "seed", default=0)
    mt_tbl = _table(cfg, "metric", list(set().union(
        *(_METRIC_KEYS.values()))) + ["family"], ["family"], mandatory=True)
    audit = _table(cfg, "audit",
                   ["kind", "eps0", "k_max", "n_r", "n_polar", "n_az", "p_grid"],
                   ["kind"], mandatory=True)
    kind = audit.get("kind")
    kinds = ("existence", "form", "halfdensity", "all", "lp_threshold")
    if kind not in kinds:
        raise ConfigError(f"audit kind must be one of {kinds}, got {kind!r}")
    kw = {
        "eps0": _as_float(audit, "eps0", default=0.25, lo=1e-6),
        "k_max": _as_int(audit, "k_max", default=12, lo=4),
        "n_r": _as_int(audit, "n_r", default=6, lo=2),
        "n_polar": _as_int(audit, "n_polar", default=6, lo=2),
        "n_az": _as_int(audit, "n_az", default=16, lo=4),
    }
    report = _envelope("integrability", config_hash, seed)

    if kind == "lp_threshold":
        if mt_tbl.get("family") != "cone":
            raise ConfigError("lp_threshold audits the cone family; "
                              "set [metric] family = 'cone'")
        out = integrability.lp_threshold_scan(
            _as_int(mt_tbl, "n", lo=2, hi=6),
            _as_float(mt_tbl, "c", lo=0.0, hi=0.999),
            p_grid=(_as_number_list(audit, "p_grid")
                    if "p_grid" in audit else None),
            **kw)
        report["lp_threshold"] = out
        verdicts = out["verdicts"]
    else:
        metric = build_metric(mt_tbl, seed)
        audits = {
            "existence": integrability.distribution_existence_audit,
            "form": integrability.form_pairing_audit,
            "halfdensity": integrability.halfdensity_dirac_audit,
        }
        selected = audits.values() if kind == "all" else [audits[kind]]
        reports = []
        for fn in selected:
            reports.extend(fn(metric, **kw))
        report["reports"] = [r.as_dict() for r in reports]
        report["overall"] = integrability.overall_verdict(reports)
        verdicts = [r.verdict for r in reports]

    _write_json(report, args.out)
    return EXIT_NOCONV if "inconclusive" in verdicts else EXIT_OK


_CSV_COLUMNS = ["twist_1", "twist_2", "cone_strength", "grid_size",
                "kernel_dim", "expected_kernel_dim", "kernel_matches",
                "gap_ratio", "index"]


def cmd_dirac(args) -> int:
    cfg, config_hash = _load_config(args.config)
    _check_sections(cfg, ["sweep", "torus"])
    seed = args.seed if args.seed is not None else _as_int(cfg, "seed", default=0)
    sweep = _table(cfg, "sweep", ["charges", "sizes", "gap_tol"], mandatory=True)
    torus = _table(cfg, "torus", ["lengths"])
    charges = _as_number_list(sweep, "charges", default=[0.0, 0.25, 0.5])
    sizes = [int(s) for s in _as_number_list(sweep, "sizes", default=[16, 32])]
    gap_tol = _as_float(sweep, "gap_tol", default=1e-3, lo=1e-12)
    lengths = _as_number_list(torus, "lengths",
                              default=[2 * np.pi, 2 * np.pi])
    if len(lengths) != 2 or min(lengths) <= 0:
        raise ConfigError("torus lengths must be two positive numbers")
    if any(c < 0 or c >= 1 for c in charges):
        raise ConfigError("cone strengths must lie in [0, 1)")

    # one matrix + SVD per (size, charge, twist); the conformal factor is
    # shared across twists, the SVDs run in the worker pool
    jobs = []
    for n in sizes:
        grid = dirac.TorusGrid(n, (lengths[0], lengths[1]))
        centre = (0.5 * lengths[0], 0.5 * lengths[1])
        for c in charges:
            sigma = (np.zeros((grid.n, grid.n)) if c == 0.0
                     else dirac.cone_conformal_factor(grid, [centre], [c]))
            for twist in dirac.TWISTS:
                jobs.append((grid, sigma, twist, c, n))

    def run(job):
        grid, sigma, twist, c, n = job
        rep = dirac.kernel_spectrum(
            dirac.conjugated_chiral_matrix(grid, sigma, twist), gap_tol=gap_tol)
        expected = 1 if twist == (0.0, 0.0) else 0
        return {
            "twist_1": twist[0], "twist_2": twist[1],
            "cone_strength": c, "grid_size": n,
            "kernel_dim": rep.kernel_dim,
            "expected_kernel_dim": expected,
            "kernel_matches": rep.kernel_dim == expected,
            "gap_ratio": rep.gap_ratio,
            # dim ker A == dim ker A* for a square matrix, so the index
            # vanishes identically on this discretization
            "index": 0,
        }

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(run, jobs))
    else:
        rows = [run(j) for j in jobs]

    ok = (all(r["kernel_matches"] for r in rows)
          and all(r["index"] == 0 for r in rows)
          and all(r["gap_ratio"] >= 10.0 for r in rows))

    buf = io.StringIO()
    buf.write(f"# command=dirac version={__version__} "
              f"config_hash={config_hash} seed={seed}\n")
    buf.write("# index is structurally zero on a square periodic grid "
              "(vanishing Euler characteristic)\n")
    writer = csv.DictWriter(buf, fieldnames=_CSV_COLUMNS)
    writer.writeheader()
    writer.writerows(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK if ok else EXIT_FAIL


def cmd_harmonic(args) -> int:
    cfg, config_hash = _load_config(args.config)
    _check_sections(cfg, ["metric", "checks"])
    seed = args.seed if args.seed is not None else _as_int(cfg, "seed", default=0)
    metric = build_metric(_table(cfg, "metric", list(set().union(
        *(_METRIC_KEYS.values()))) + ["family"], ["family"], mandatory=True), seed)
    checks = _table(cfg, "checks", ["residual_tolerance", "scaling", "eps0",
                                    "k_max", "route_samples"])
    tol = _as_float(checks, "residual_tolerance", default=1e-6, lo=0.0)
    do_scaling = checks.get("scaling", True)
    if not isinstance(do_scaling, bool):
        raise ConfigError("'scaling' must be a boolean")
    n_routes = _as_int(checks, "route_samples", default=20, lo=0)

    chart = harmonic.harmonic_chart(metric, tolerance=tol, seed=seed)
    report = _envelope("harmonic", config_hash, seed)
    report["harmonicity"] = {
        "residual": chart.residual,
        "tolerance": tol,
        "is_harmonic": chart.is_harmonic,
        "samples": len(chart.samples),
    }

    noconv = False
    if chart.is_harmonic and n_routes > 0:
        from . import frames
        worst = 0.0
        for x in chart.samples[:n_routes]:
            dens = harmonic.harmonic_scalar_curvature(metric, x)
            frame = frames.scalar_curvature_frame(metric, x)
            worst = max(worst, abs(dens - frame) / max(abs(frame), 1e-9))
        report["route_agreement"] = {
            "samples": min(n_routes, len(chart.samples)),
            "max_relative_difference": worst,
        }
    if do_scaling:
        if not metric.singular_points:
            if "scaling" in checks:  # explicitly requested, can't honour
                raise ConfigError("scaling check needs a metric with a "
                                  "declared singular point")
            report["scaling"] = None
        else:
            rep = harmonic.neighborhood_scaling(
                metric,
                eps0=_as_float(checks, "eps0", default=0.25, lo=1e-6),
                k_max=_as_int(checks, "k_max", default=8, lo=4))
            report["scaling"] = rep.as_dict()
            noconv = rep.verdict == "inconclusive"

    _write_json(report, args.out)
    return EXIT_NOCONV if noconv else EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="singcurv",
        description="Curvature measures, integrability audits, identity "
                    "checks, and discrete Dirac operators for singular "
                    "metrics.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--seed", type=int, default=None,
                       help="seed overriding the config's")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for sweeps")

    p = sub.add_parser("verify-identities",
                       help="exactly verify the gamma-matrix identity suite")
    common(p)
    p.add_argument("--dims", help="comma-separated dimensions, e.g. 2,3,4")
    p.add_argument("--self-test", action="store_true",
                   help="corrupt the scalar term and require detection")
    p.set_defaults(func=cmd_verify_identities)

    p = sub.add_parser("curvature",
                       help="decompose the curvature measure of a metric")
    common(p)
    p.set_defaults(func=cmd_curvature)

    p = sub.add_parser("integrability",
                       help="dyadic-annulus integrability audits")
    common(p)
    p.set_defaults(func=cmd_integrability)

    p = sub.add_parser("dirac",
                       help="spin-structure kernel sweep (CSV)")
    common(p)
    p.set_defaults(func=cmd_dirac)

    p = sub.add_parser("harmonic",
                       help="harmonic-chart residuals, curvature routes, "
                            "and tip scaling")
    common(p)
    p.set_defaults(func=cmd_harmonic)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
