"""Command-line interface.

Commands: resonance sample, invariant check, invariant fit, degeneracy,
dissipation, qw eval, q3 eval. Flags can also arrive through a JSON config
file (--config); explicit flags win over config values, unknown config
keys are rejected. Reports are pretty-printed key-sorted JSON with the
resolved configuration embedded; sample dumps are CRLF CSV with repr'd
floats. Both are written atomically and are byte-identical across reruns
with the same seed.

Exit codes: 0 pass, 1 verified-fail, 2 config error, 3 numerical failure,
4 inconclusive.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import exprlang, invariants, kinetics
from .dispersion import LawError, SamplingDomain, parse_law
from .resonance import (
    ChartError,
    HypothesisError,
    sample_quadruples,
    sample_triples,
)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INCONCLUSIVE = 4

_CONFIG_KEYS = (
    "law", "d", "g", "f", "W", "mode", "n", "seed",
    "rmin", "rmax", "out", "tol_zero", "v",
)


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------- arg parsing


def _build_parser():
    p = argparse.ArgumentParser(
        prog="reslab",
        description="Resonant manifolds, collisional invariants and entropy "
        "dissipation for dispersion laws.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, n_default):
        sp.add_argument("--law", help="law spec, e.g. quadratic or "
                        "power:C=1,alpha=0.5 or expr:<expression>")
        sp.add_argument("--d", type=int, help="dimension (2 or 3, default 2)")
        sp.add_argument("--mode", choices=["four-wave", "three-wave"],
                        help="interaction type (default four-wave)")
        sp.add_argument("--n", type=int,
                        help=f"sample count (default {n_default})")
        sp.add_argument("--seed", type=int, help="RNG seed (default 0)")
        sp.add_argument("--rmin", type=float, help="annulus inner radius")
        sp.add_argument("--rmax", type=float, help="annulus outer radius")
        sp.add_argument("--out", help="output file path")
        sp.add_argument("--config", help="JSON config file; flags override it")
        sp.set_defaults(n_default=n_default)

    res = sub.add_parser("resonance", help="manifold sampling")
    res_sub = res.add_subparsers(dest="subcommand", required=True)
    rs_sample = res_sub.add_parser("sample", help="dump sampled tuples to CSV")
    common(rs_sample, 1000)
    rs_sample.set_defaults(command="resonance sample")

    inv = sub.add_parser("invariant", help="invariant verification")
    inv_sub = inv.add_subparsers(dest="subcommand", required=True)
    for name, helptext in (("check", "residuals and recovery for a candidate"),
                           ("fit", "least-squares fit by a + b.v + c omega")):
        sp = inv_sub.add_parser(name, help=helptext)
        common(sp, 2000)
        sp.add_argument("--g", help="candidate invariant expression")
        sp.set_defaults(command=f"invariant {name}")

    deg = sub.add_parser("degeneracy", help="classify a dispersion law")
    common(deg, 2000)
    deg.set_defaults(command="degeneracy")

    dis = sub.add_parser("dissipation", help="entropy dissipation estimate")
    common(dis, 4096)
    dis.add_argument("--f", help="density expression (must be positive)")
    dis.add_argument("--W", help="kernel expression (default 1)")
    dis.add_argument("--tol-zero", dest="tol_zero", type=float,
                     help="absolute zero threshold override")
    dis.set_defaults(command="dissipation")

    for cmd, helptext in (("qw", "four-wave collision operator at a point"),
                          ("q3", "three-wave collision operator at a point")):
        op = sub.add_parser(cmd, help=helptext)
        op_sub = op.add_subparsers(dest="subcommand", required=True)
        sp = op_sub.add_parser("eval", help=helptext)
        common(sp, 4096)
        sp.add_argument("--f", help="density expression (must be positive)")
        sp.add_argument("--W", help="kernel expression (default 1)")
        sp.add_argument("--v", help="evaluation point, comma-separated")
        sp.set_defaults(command=f"{cmd} eval")

    return p


def _merge_config(args):
    """Layer config-file values under explicit flags and fill defaults."""
    merged = {
        "law": None, "d": 2, "g": None, "f": None, "W": None,
        "mode": "four-wave", "n": args.n_default, "seed": 0,
        "rmin": None, "rmax": None, "out": None, "tol_zero": None, "v": None,
    }
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from e
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(loaded) - set(_CONFIG_KEYS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        merged.update(loaded)
    for key in _CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    merged["command"] = args.command
    return merged


def _resolve(cfg):
    """Validate the merged config and construct law/expressions."""
    if cfg["law"] is None:
        raise ConfigError("--law is required")
    d = cfg["d"]
    if d not in (2, 3):
        raise ConfigError(f"--d must be 2 or 3, got {d}")
    if cfg["n"] is None or int(cfg["n"]) < 1:
        raise ConfigError(f"--n must be >= 1, got {cfg['n']}")
    cfg["n"] = int(cfg["n"])
    cfg["seed"] = int(cfg["seed"])

    rmin = cfg["rmin"] if cfg["rmin"] is not None else 0.5
    rmax = cfg["rmax"] if cfg["rmax"] is not None else 2.0
    try:
        domain = SamplingDomain(float(rmin), float(rmax))
    except ValueError as e:
        raise ConfigError(str(e)) from e
    cfg["rmin"], cfg["rmax"] = domain.r_min, domain.r_max

    try:
        law = parse_law(cfg["law"], d)
    except (LawError, exprlang.ExprParseError) as e:
        raise ConfigError(f"bad law spec: {e}") from e

    exprs = {}
    for key in ("g", "f", "W"):
        if cfg[key] is not None:
            try:
                exprs[key] = exprlang.parse(cfg[key], d)
            except exprlang.ExprParseError as e:
                raise ConfigError(f"bad --{key} expression: {e}") from e

    point = None
    if cfg["v"] is not None:
        raw = cfg["v"]
        try:
            parts = (
                [float(x) for x in raw.split(",")]
                if isinstance(raw, str)
                else [float(x) for x in raw]
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad --v value {raw!r}: {e}") from e
        if len(parts) != d:
            raise ConfigError(f"--v needs {d} components, got {len(parts)}")
        point = np.array(parts)
        cfg["v"] = parts

    return law, domain, exprs, point


# ------------------------------------------------------------ file output


def _atomic_write(path, data):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _json_dump(report):
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _fmt(x):
    return repr(float(x))


def _csv_quadruples(qs):
    d = qs.d
    header = (
        [f"v{k}" for k in range(1, d + 1)]
        + [f"vstar{k}" for k in range(1, d + 1)]
        + [f"vp{k}" for k in range(1, d + 1)]
        + [f"vpstar{k}" for k in range(1, d + 1)]
        + ["weight", "energy_residual"]
    )
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for k in range(len(qs)):
        row = (
            [_fmt(x) for x in qs.v[k]]
            + [_fmt(x) for x in qs.vstar[k]]
            + [_fmt(x) for x in qs.vp[k]]
            + [_fmt(x) for x in qs.vpstar[k]]
            + [_fmt(qs.weight[k]), _fmt(qs.energy_residual[k])]
        )
        w.writerow(row)
    return buf.getvalue()


def _csv_triples(ts):
    d = ts.d
    header = (
        [f"vp{k}" for k in range(1, d + 1)]
        + [f"vpp{k}" for k in range(1, d + 1)]
        + [f"vsum{k}" for k in range(1, d + 1)]
        + ["weight", "energy_residual"]
    )
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for k in range(len(ts)):
        row = (
            [_fmt(x) for x in ts.vp[k]]
            + [_fmt(x) for x in ts.vpp[k]]
            + [_fmt(x) for x in ts.vsum[k]]
            + [_fmt(ts.weight[k]), _fmt(ts.energy_residual[k])]
        )
        w.writerow(row)
    return buf.getvalue()


def _config_block(cfg):
    keys = ("command", "law", "d", "g", "f", "W", "mode", "n", "seed",
            "rmin", "rmax", "out", "tol_zero", "v")
    return {k: cfg.get(k) for k in keys}


def _verdict_exit(verdict):
    if verdict in ("pass", "zero", "positive", "nondegenerate"):
        return EXIT_PASS
    if verdict == "inconclusive":
        return EXIT_INCONCLUSIVE
    return EXIT_FAIL


# ---------------------------------------------------------------- commands


def _cmd_resonance_sample(cfg, law, domain, exprs, point):
    if cfg["out"] is None:
        raise ConfigError("resonance sample requires --out for the CSV dump")
    if cfg["mode"] == "three-wave":
        ts = sample_triples(law, domain, n=cfg["n"], seed=cfg["seed"])
        _atomic_write(cfg["out"], _csv_triples(ts))
        diag = ts.diagnostics
    else:
        qs = sample_quadruples(law, domain, n=cfg["n"], seed=cfg["seed"])
        _atomic_write(cfg["out"], _csv_quadruples(qs))
        diag = qs.diagnostics
    report = {
        "config": _config_block(cfg),
        "diagnostics": diag.to_dict(),
    }
    return report, EXIT_PASS


def _cmd_invariant_check(cfg, law, domain, exprs, point):
    if "g" not in exprs:
        raise ConfigError("invariant check requires --g")
    g = exprs["g"]
    report = {"config": _config_block(cfg)}
    if cfg["mode"] == "three-wave":
        ts = sample_triples(law, domain, n=cfg["n"], seed=cfg["seed"])
        res = invariants.three_wave_residual(g, ts)
        report["sampling"] = ts.diagnostics.to_dict()
    else:
        qs = sample_quadruples(law, domain, n=cfg["n"], seed=cfg["seed"])
        res = invariants.four_wave_residual(g, qs)
        report["sampling"] = qs.diagnostics.to_dict()
    report["residual"] = res.to_dict()

    try:
        fit = invariants.fit_equilibrium(g, law, domain, n=cfg["n"],
                                         seed=cfg["seed"])
        report["fit"] = fit.to_dict()
    except (invariants.DegeneracyError, exprlang.EvaluationError) as e:
        report["fit"] = {"error": str(e)}

    if cfg["mode"] == "four-wave":
        try:
            cr = invariants.cramer_coefficients(law, g, domain)
            report["cramer"] = cr.to_dict()
        except (invariants.DegeneracyError, exprlang.EvaluationError) as e:
            report["cramer"] = {"error": str(e)}

    report["verdict"] = res.verdict
    return report, _verdict_exit(res.verdict)


def _cmd_invariant_fit(cfg, law, domain, exprs, point):
    if "g" not in exprs:
        raise ConfigError("invariant fit requires --g")
    fit = invariants.fit_equilibrium(exprs["g"], law, domain, n=cfg["n"],
                                     seed=cfg["seed"])
    rms = max(fit.value_residual_rms, fit.grad_residual_rms)
    if rms <= invariants.PASS_RMS:
        verdict = "pass"
    elif rms >= invariants.FAIL_RMS:
        verdict = "fail"
    else:
        verdict = "inconclusive"
    report = {
        "config": _config_block(cfg),
        "fit": fit.to_dict(),
        "verdict": verdict,
    }
    return report, _verdict_exit(verdict)


def _cmd_degeneracy(cfg, law, domain, exprs, point):
    rep = invariants.degeneracy_report(law, domain, n=cfg["n"],
                                       seed=cfg["seed"])
    report = {"config": _config_block(cfg)}
    report.update(rep.to_dict())
    return report, EXIT_PASS


def _cmd_dissipation(cfg, law, domain, exprs, point):
    if "f" not in exprs:
        raise ConfigError("dissipation requires --f")
    fn = (kinetics.entropy_dissipation_three
          if cfg["mode"] == "three-wave"
          else kinetics.entropy_dissipation_four)
    est = fn(exprs["f"], law, W=exprs.get("W"), domain=domain, n=cfg["n"],
             seed=cfg["seed"], tol_zero=cfg["tol_zero"])
    report = {"config": _config_block(cfg)}
    report.update(est.to_dict())
    return report, _verdict_exit(est.verdict)


def _cmd_qw_eval(cfg, law, domain, exprs, point):
    if "f" not in exprs or point is None:
        raise ConfigError("qw eval requires --f and --v")
    res = kinetics.qw_apply(exprs["f"], law, point, W=exprs.get("W"),
                            domain=domain, n=cfg["n"], seed=cfg["seed"])
    report = {"config": _config_block(cfg)}
    report.update(res.to_dict())
    return report, EXIT_PASS


def _cmd_q3_eval(cfg, law, domain, exprs, point):
    if "f" not in exprs or point is None:
        raise ConfigError("q3 eval requires --f and --v")
    res = kinetics.q3_apply(exprs["f"], law, point, W=exprs.get("W"),
                            domain=domain, n=cfg["n"], seed=cfg["seed"])
    report = {"config": _config_block(cfg)}
    report.update(res.to_dict())
    return report, EXIT_PASS


_COMMANDS = {
    "resonance sample": _cmd_resonance_sample,
    "invariant check": _cmd_invariant_check,
    "invariant fit": _cmd_invariant_fit,
    "degeneracy": _cmd_degeneracy,
    "dissipation": _cmd_dissipation,
    "qw eval": _cmd_qw_eval,
    "q3 eval": _cmd_q3_eval,
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        law, domain, exprs, point = _resolve(cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        report, code = _COMMANDS[cfg["command"]](cfg, law, domain, exprs, point)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (
        ChartError,
        HypothesisError,
        kinetics.NonpositiveDensityError,
        invariants.DegeneracyError,
        exprlang.EvaluationError,
    ) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL

    out = _json_dump(report)
    sys.stdout.write(out)
    if cfg["out"] is not None and cfg["command"] != "resonance sample":
        _atomic_write(cfg["out"], out)
    return code


if __name__ == "__main__":
    sys.exit(main())
