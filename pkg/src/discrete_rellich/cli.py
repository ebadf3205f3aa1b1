"""Command-line front door: ``discrete-rellich <subcommand> [options]``.

Every subcommand writes ``report.json`` (sorted keys, machine verdicts)
and one or more CSV files into ``--out``. Wall-clock timings go to a
separate ``timings.json`` so that the reports themselves are identical
across runs with the same configuration and seed.

Exit status: 0 on success, 2 when a checked property fails, 1 on a
usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from ._random import stream
from .acceptance import CRITERIA, EXPECTED_CONE, random_potential, run_criterion
from .fermi_surface import H_identity_residual, sample_fermi
from .lattice_core import PRESETS, Box, preset_domain, satisfies_cone_condition
from .lattice_operators import LatticeField, apply_schrodinger
from .spectral_lab import essential_spectrum_probe, embedded_scan, integrated_density_of_states
from .torus_harmonic import decay_condition_verdict, geometric_schedule, limiting_absorption_solve, norms, power_law, vanish_on_fermi
from .unique_continuation import build_counterexample, nullspace_certificate, sweep_trace

log = logging.getLogger("discrete_rellich")

CONFIG_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_ASSERT = 0, 1, 2


class UsageError(Exception):
    """Bad flags or configuration; the message names the offending field."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# parameter defaults per subcommand; a config may override any of them
DEFAULTS: dict[str, dict[str, Any]] = {
    "ucp": {"dimension": 2, "potential_radius": 2, "potential_scale": 2.0, "box_radius": 4, "trials": 50, "lambda_range": [0.1, 1.9]},
    "cone": {"presets": sorted(PRESETS)},
    "counterexample": {"tread": 3, "column": 4, "half": 8, "step_row": -4, "margin": 4},
    "spectrum": {
        "dimension": 2,
        "potential": "random",
        "potential_radius": 2,
        "potential_scale": 1.0,
        "probe_boxes": [10, 20, 40],
        "scan_boxes": [20, 40, 80],
        "lambda_window": [0.5, 1.5],
        "probe_radius": 6.0,
    },
    "fermi": {"d": 2, "lambda": 1.0, "resolution": 64, "min_points": None, "identity_points": 1000},
    "rellich": {"lambdas": [0.7, 1.0, 1.3], "trials": 20, "N": 64, "max_radius": 4, "fermi_points": 10000},
    "norms": {"family": "power", "exponent": -1.5, "dimension": 2, "R_min": 64.0, "R_max": 4096.0, "per_octave": 4},
    "acceptance": {"criterion": "all"},
}

# flag name -> (parameter, type)
FLAGS: dict[str, dict[str, tuple[str, Callable]]] = {
    "ucp": {"--trials": ("trials", int), "--box-radius": ("box_radius", int)},
    "cone": {"--preset": ("presets", str)},
    "counterexample": {},
    "spectrum": {"--potential": ("potential", str), "--probe-radius": ("probe_radius", float)},
    "fermi": {"--d": ("d", int), "--lambda": ("lambda", float), "--resolution": ("resolution", int), "--min-points": ("min_points", int)},
    "rellich": {"--trials": ("trials", int), "--N": ("N", int)},
    "norms": {"--family": ("family", str), "--exponent": ("exponent", float), "--R-max": ("R_max", float)},
    "acceptance": {"--criterion": ("criterion", str)},
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config with a version field")
    common.add_argument("--out", type=Path, help="output directory (default: ./reports/<subcommand>)")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    common.add_argument("--threads", type=int, help="BLAS/LAPACK thread limit")
    parser = _Parser(prog="discrete-rellich", description="Lattice Rellich and unique-continuation experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser, required=True)
    for name, flags in FLAGS.items():
        p = sub.add_parser(name, parents=[common])
        for flag, (dest, typ) in flags.items():
            p.add_argument(flag, dest=f"param_{dest}", type=typ)
    return parser


def load_config(path: Path | None, subcommand: str) -> tuple[dict, int | None]:
    """Return (parameter block, seed) from a config file, rejecting unknown fields."""
    if path is None:
        return {}, None
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"config: cannot read {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise UsageError("config: top level must be an object")
    unknown = set(raw) - {"version", "seed", "params"}
    if unknown:
        raise UsageError(f"config: unknown field {sorted(unknown)[0]!r}")
    if raw.get("version") != CONFIG_VERSION:
        raise UsageError(f"config: field 'version' must be {CONFIG_VERSION}")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise UsageError("config: field 'params' must be an object")
    bad = set(params) - set(DEFAULTS[subcommand])
    if bad:
        raise UsageError(f"config: unknown field 'params.{sorted(bad)[0]}' for {subcommand}")
    seed = raw.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise UsageError("config: field 'seed' must be an integer")
    return params, seed


def _check_seed(seed: int) -> int:
    if not 0 <= seed < 2 ** 64:
        raise UsageError("--seed must be an unsigned 64-bit integer")
    return seed


# ----------------------------------------------------------------------
# subcommands; each returns (report, {csv name: rows}, status ok)


def _need(cond: bool, field_: str, message: str):
    if not cond:
        raise UsageError(f"{field_}: {message}")


def run_ucp(p, seed):
    _need(p["dimension"] >= 1, "dimension", "must be positive")
    _need(p["box_radius"] >= p["potential_radius"], "box_radius", "must contain the potential")
    lo, hi = p["lambda_range"]
    _need(0 < lo < hi < p["dimension"], "lambda_range", "must lie inside (0, d)")
    rng = stream(seed, "ucp")
    box = Box.cube(p["box_radius"], p["dimension"])
    rows = [["trial", "lambda", "min_singular_value", "scale", "trivial", "sweep_max_nnz"]]
    worst = math.inf
    for t in range(p["trials"]):
        V = random_potential(rng, p["potential_radius"], p["dimension"], p["potential_scale"])
        lam = float(rng.uniform(lo, hi))
        cert = nullspace_certificate(V, lam, box)
        trace = sweep_trace(V, lam, box) if p["dimension"] > 1 else [(0, 0)]
        rows.append([t, repr(lam), repr(cert.min_singular_value), repr(cert.scale), int(cert.trivial), max(n for _, n in trace)])
        worst = min(worst, cert.min_singular_value / cert.scale)
    ok = all(r[4] == 1 for r in rows[1:])
    report = {"all_trivial": ok, "min_sigma_ratio": worst, "threshold": 1e-8, "trials": p["trials"]}
    return report, {"ucp.csv": rows}, ok


def run_cone(p, seed):
    presets = p["presets"] if isinstance(p["presets"], list) else [p["presets"]]
    rows = [["preset", "holds", "violations", "expected"]]
    verdicts = {}
    ok = True
    for name in presets:
        _need(name in PRESETS, "presets", f"unknown preset {name!r}")
        v = satisfies_cone_condition(preset_domain(name))
        want = EXPECTED_CONE.get(name)
        ok &= want is None or v.holds == want
        verdicts[name] = v.holds
        rows.append([name, int(v.holds), len(v.violations), "" if want is None else int(want)])
    return {"verdicts": verdicts, "matches_expected": ok}, {"cone.csv": rows}, ok


def run_counterexample(p, seed):
    try:
        ce = build_counterexample(p["tread"], p["column"], p["half"], p["step_row"], p["margin"])
    except ValueError as exc:
        raise UsageError(f"counterexample: {exc}") from exc
    res = apply_schrodinger(LatticeField(2, {}), ce.lam, ce.field)
    interior = max((abs(res[n]) for n in ce.domain.interior), default=Fraction(0))
    bmax = max(abs(ce.field[n]) for n in ce.domain.boundary)
    cone = satisfies_cone_condition(ce.domain)
    rows = [["x_1", "x_2", "value", "site_kind"]]
    for n in sorted(ce.field.support):
        rows.append([n[0], n[1], str(ce.field[n]), "boundary" if n in ce.domain.boundary else "interior"])
    report = {
        "interior_residual": str(interior),
        "boundary_max": str(bmax),
        "cone_condition": cone.holds,
        "cone_violations": [list(v) for v in cone.violations],
        "lambda": str(ce.lam),
        "nullity": ce.nullity,
        "support": [list(n) for n in sorted(ce.field.support)],
    }
    ok = interior == 0 and bmax == 1 and not cone.holds
    return report, {"counterexample.csv": rows}, ok


def _spectrum_potential(p, rng) -> LatticeField:
    d = p["dimension"]
    kind = p["potential"]
    if kind == "random":
        return random_potential(rng, p["potential_radius"], d, p["potential_scale"])
    if kind == "zero":
        return LatticeField(d, {})
    if kind == "delta":
        return LatticeField(d, {(0,) * d: float(p["potential_scale"])})
    raise UsageError(f"potential: expected random, zero or delta, got {kind!r}")


def run_spectrum(p, seed):
    d = p["dimension"]
    lo, hi = p["lambda_window"]
    _need(0 < lo < hi < d, "lambda_window", "must lie inside (0, d)")
    V = _spectrum_potential(p, stream(seed, "spectrum"))
    probe = essential_spectrum_probe(None, V, "whole_space_box", p["probe_boxes"])
    edges = np.linspace(0, d, 65)
    ids = [integrated_density_of_states(E, d) for E in edges]
    bins = [["box", "bin_lo", "bin_hi", "count", "ids_mass"]]
    for row in probe:
        for k, c in enumerate(row.counts):
            bins.append([row.box_size, repr(float(edges[k])), repr(float(edges[k + 1])), c, repr(ids[k + 1] - ids[k])])
    scan = embedded_scan(V, (lo, hi), p["probe_radius"], p["scan_boxes"])
    srows = [["box", "in_window", "clusters", "max_localization", "argmax_energy"]]
    for r in scan.rows:
        srows.append([r.box_size, r.in_window, r.clusters, repr(r.max_localization), repr(r.argmax_energy)])
    report = {
        "probe": [{"box": r.box_size, "discrepancy": r.discrepancy, "outliers": r.outliers} for r in probe],
        "localization": scan.localizations,
        "non_increasing": scan.non_increasing,
        "final_below_threshold": scan.final_below,
        "decaying_localization": scan.decaying,
        "probe_radius": scan.probe_radius,
        "window": list(scan.window),
    }
    return report, {"spectrum_bins.csv": bins, "embedded_scan.csv": srows}, scan.decaying


def run_fermi(p, seed):
    d, lam = p["d"], p["lambda"]
    _need(1 <= d <= 4, "d", "must lie in 1..4")
    _need(0 < lam < d, "lambda", f"must lie inside (0, {d})")
    sample = sample_fermi(lam, d, p["resolution"], min_points=p["min_points"])
    rng = stream(seed, "fermi")
    z = rng.uniform(-np.pi, np.pi, (p["identity_points"], d)) + 1j * rng.uniform(-1, 1, (p["identity_points"], d))
    hres = float(H_identity_residual(z, lam).max())
    res = float(sample.residuals().max()) if len(sample.all_points()) else 0.0
    ok = res <= 1e-10 and hres <= 1e-12
    report = {
        "d": d,
        "lambda": lam,
        "points": len(sample),
        "singular_points": [list(pt.coords) for pt in sample.singular_points],
        "max_h_residual": res,
        "max_identity_residual": hres,
    }
    return report, {"fermi.csv": sample.csv_rows()}, ok


def run_rellich(p, seed):
    rng = stream(seed, "rellich")
    zero = LatticeField(2, {})
    rows = [["lambda", "trial", "support_radius", "fermi_max", "recovery_error"]]
    worst_f = worst_r = 0.0
    for lam in p["lambdas"]:
        _need(0 < lam < 2, "lambdas", "must lie inside (0, 2)")
        sample = sample_fermi(lam, 2, min_points=p["fermi_points"])
        for t in range(p["trials"]):
            r = int(rng.integers(1, p["max_radius"] + 1))
            sites = Box.cube(r, 2).sites()
            vals = rng.normal(size=len(sites)) + 1j * rng.normal(size=len(sites))
            g = LatticeField(2, dict(zip(sites, vals)))
            f = apply_schrodinger(zero, lam, g)
            fv = vanish_on_fermi(f, lam, sample)
            sol = limiting_absorption_solve(f, lam, p["N"])
            err = max(abs(sol.coefficients[n] - g[n]) for n in set(sol.coefficients.support) | set(g.support))
            worst_f, worst_r = max(worst_f, fv), max(worst_r, err)
            rows.append([repr(lam), t, r, repr(fv), repr(float(err))])
    ok = worst_f <= 1e-10 and worst_r <= 1e-6
    report = {"max_fermi_value": worst_f, "max_recovery_error": float(worst_r), "N": p["N"], "forward_ok": worst_f <= 1e-10, "backward_ok": worst_r <= 1e-6}
    return report, {"rellich.csv": rows}, ok


def run_norms(p, seed):
    if p["family"] == "power":
        u = power_law(p["exponent"], p["dimension"])
    elif p["family"] == "random":
        rng = stream(seed, "norms")
        sites = Box.cube(8, p["dimension"]).sites()
        u = LatticeField(p["dimension"], dict(zip(sites, rng.normal(size=len(sites)))))
    else:
        raise UsageError(f"family: expected power or random, got {p['family']!r}")
    radii = geometric_schedule(p["R_min"], p["R_max"], p["per_octave"])
    verdict = decay_condition_verdict(u, radii)
    rep = norms(u, R_max=p["R_max"], per_octave=p["per_octave"])
    rows = [["R", "decay_functional"]] + [[repr(r), repr(c)] for r, c in zip(verdict.radii, verdict.curve)]
    report = {
        "verdict": verdict.verdict,
        "slope": verdict.slope,
        "drop": verdict.drop,
        "variation": verdict.variation,
        "hs_norms": {repr(k): v for k, v in rep.hs_norms.items()},
        "bstar_sup": rep.bstar_sup,
        "bstar_dyadic": rep.bstar_dyadic,
        "b_sum": rep.b_sum,
        "R_max": rep.R_max,
    }
    return report, {"decay_curve.csv": rows}, True


def run_acceptance(p, seed):
    which = p["criterion"]
    if which == "all":
        numbers = sorted(CRITERIA)
    else:
        try:
            numbers = [int(which)]
        except ValueError as exc:
            raise UsageError(f"criterion: expected 1..{len(CRITERIA)} or all, got {which!r}") from exc
        _need(numbers[0] in CRITERIA, "criterion", f"expected 1..{len(CRITERIA)}")
    results = [run_criterion(k, seed) for k in numbers]
    rows = [["criterion", "title", "checks_passed", "runtime_limit_s"]]
    for r in results:
        print(r.summary())
        rows.append([r.number, r.title, int(all(r.checks.values())), r.limit])
    report = {str(r.number): {k: v for k, v in r.to_json().items() if k not in ("runtime_s", "passed")} for r in results}
    timings = {str(r.number): {"runtime_s": r.runtime, "within_budget": r.within_budget} for r in results}
    return report, {"acceptance.csv": rows}, all(r.passed for r in results), timings


RUNNERS = {
    "ucp": run_ucp,
    "cone": run_cone,
    "counterexample": run_counterexample,
    "spectrum": run_spectrum,
    "fermi": run_fermi,
    "rellich": run_rellich,
    "norms": run_norms,
    "acceptance": run_acceptance,
}


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_outputs(out: Path, report: Mapping, tables: Mapping[str, list], extra: Mapping[str, Mapping] = ()) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=2, default=_json_default)
        fh.write("\n")
    for name, rows in tables.items():
        with open(out / name, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
    for name, payload in dict(extra).items():
        with open(out / name, "w") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2, default=_json_default)
            fh.write("\n")


def run(subcommand: str, params: Mapping[str, Any], seed: int, out: Path) -> int:
    """Run one subcommand with resolved parameters and write its reports."""
    p = {**DEFAULTS[subcommand], **params}
    t0 = time.perf_counter()
    try:
        result = RUNNERS[subcommand](p, seed)
    except (TypeError, ValueError) as exc:
        # bad parameter types or ranges surface from the modules as these
        raise UsageError(f"{subcommand}: {exc}") from exc
    report, tables, ok = result[:3]
    timings = {"subcommand": {"runtime_s": time.perf_counter() - t0}}
    if len(result) > 3:
        timings.update(result[3])
    full = {"subcommand": subcommand, "seed": seed, "params": p, "passed": bool(ok), "result": report}
    write_outputs(out, full, tables, {"timings.json": timings})
    log.info("%s: %s, reports in %s", subcommand, "ok" if ok else "assertion failure", out)
    return EXIT_OK if ok else EXIT_ASSERT


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
        params, cfg_seed = load_config(args.config, args.subcommand)
        for key, value in vars(args).items():
            if key.startswith("param_") and value is not None:
                params[key[len("param_"):]] = value
        seed = _check_seed(args.seed if args.seed is not None else (cfg_seed if cfg_seed is not None else 0))
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads must be positive")
        out = args.out if args.out is not None else Path("reports") / args.subcommand
        if args.threads is not None:
            with threadpool_limits(limits=args.threads):
                return run(args.subcommand, params, seed, out)
        return run(args.subcommand, params, seed, out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
