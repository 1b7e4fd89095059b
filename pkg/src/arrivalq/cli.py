"""Command-line front end: read a JSON run configuration, dispatch the
solvers, and write machine-readable results (JSON document plus a CSV
density table)."""

import argparse
import json
import math
import os
import sys
from dataclasses import asdict

from . import __version__
from .equilibrium import EquilibriumSolution, solve
from .errors import ConfigInvalid, SolverError
from .fluid import FluidSolution, fluid_equilibrium, fluid_social_optimum, price_of_anarchy
from .params import ModelParams, SolverConfig
from .verify import audit_grid, best_response_audit, fluid_stochastic_diagnostic

SCHEMA_VERSION = 1

COMMANDS = ("solve", "social-opt", "poa", "verify", "diagnostic")
MODELS = ("stochastic", "fluid", "both")
_FLUID_ONLY = {"social-opt": ("fluid", "both"), "poa": ("fluid", "both"),
               "diagnostic": ("both",)}


def _parse_bound(value, name):
    if value in (None, "inf", "Infinity", math.inf):
        return math.inf
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigInvalid(f"{name} must be a number or 'inf', got {value!r}")
    return v


def load_config(doc):
    """Validate a config document into (model, command, params, solver cfg,
    output options)."""
    if not isinstance(doc, dict):
        raise ConfigInvalid("config must be a JSON object")
    model = doc.get("model", "stochastic")
    command = doc.get("command", "solve")
    if model not in MODELS:
        raise ConfigInvalid(f"model must be one of {MODELS}, got {model!r}")
    if command not in COMMANDS:
        raise ConfigInvalid(f"command must be one of {COMMANDS}, got {command!r}")
    allowed = _FLUID_ONLY.get(command)
    if allowed and model not in allowed:
        raise ConfigInvalid(f"command {command!r} requires model in {allowed}")
    raw = doc.get("params")
    if not isinstance(raw, dict):
        raise ConfigInvalid("config is missing the params object")
    kind = "fluid" if model == "fluid" else "stochastic"
    try:
        params = ModelParams(
            kind=kind,
            lam=float(raw.get("lam", raw.get("lambda", 0.0))),
            mu=float(raw.get("mu", 0.0)),
            alpha=float(raw.get("alpha", 0.0)),
            beta1=float(raw.get("beta1", 0.0)),
            beta2=float(raw.get("beta2", 0.0)),
            t1=_parse_bound(raw.get("t1"), "t1"),
            t2=_parse_bound(raw.get("t2"), "t2"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad params: {exc}")
    s = doc.get("solver", {})
    if not isinstance(s, dict):
        raise ConfigInvalid("solver section must be an object")
    cfg = SolverConfig(
        epsilon=float(s.get("epsilon", 1e-2)),
        dt=(None if s.get("dt") in (None, "auto") else float(s["dt"])),
        nmax_tail_prob=float(s.get("nmax_tail_prob", 1e-2)),
        mc_reps=int(s.get("mc_reps", 10_000)),
        seed=int(s.get("seed", 0)),
    )
    out = doc.get("output", {})
    return model, command, params, cfg, out


def _num(v):
    """JSON-safe number: infinities become the 'inf' sentinel string."""
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return v


def _params_doc(params):
    return {
        "kind": params.kind, "lam": params.lam, "mu": params.mu,
        "alpha": params.alpha, "beta1": params.beta1, "beta2": params.beta2,
        "t1": _num(params.t1), "t2": _num(params.t2),
    }


def _equilibrium_doc(sol: EquilibriumSolution):
    diag = {k: v for k, v in sol.diagnostics.items()
            if isinstance(v, (int, float, str, bool))}
    return {
        "case": sol.case_label,
        "te1": sol.te1,
        "te2": sol.te2,
        "atom_mass": sol.atom_mass,
        "gap_end": sol.gap_end,
        "equilibrium_cost": sol.equilibrium_cost,
        "strategy_mass": sol.strategy.total_mass(),
        "diagnostics": diag,
    }


def _fluid_doc(sol: FluidSolution):
    return {
        "case": sol.case_label,
        "segments": [[s, e, f] for s, e, f in sol.segments],
        "atoms": [[t, m] for t, m in sol.atoms],
        "social_cost": sol.social_cost,
        "drop_cost": sol.drop_cost,
        "thresholds": {k: _num(v) if v is not None else None
                       for k, v in sol.thresholds.items()},
        "breakpoints": sol.breakpoints,
        "atom_sizes": sol.atom_sizes,
    }


def _fmt(x):
    return repr(float(x))


def density_csv_rows(strategy):
    """Rows (t, f, cumulative, atom_mass) at solver resolution, with a
    left-value row prepended at each marked discontinuity."""
    rows = []
    if isinstance(strategy, FluidSolution):
        cum = 0.0
        events = sorted(
            [(s, "seg", (s, e, f)) for s, e, f in strategy.segments]
            + [(t, "atom", m) for t, m in strategy.atoms])
        prev_f = 0.0
        for t, kind, payload in events:
            if kind == "atom":
                cum += payload
                rows.append((t, prev_f, cum, payload))
            else:
                s, e, f = payload
                rows.append((s, f, cum, 0.0))
                cum += f * (e - s)
                rows.append((e, f, cum, 0.0))
                prev_f = f
        return rows
    curve = strategy
    disc = {t: (fl, fr) for t, fl, fr in curve.discontinuities}
    cum = 0.0
    for t, m in sorted(curve.atoms):
        cum += m
        rows.append((t, 0.0, cum, m))
    grid, values = curve.grid, curve.values
    for i, (t, f) in enumerate(zip(grid, values)):
        if i > 0:
            cum += 0.5 * (values[i - 1] + f) * (t - grid[i - 1])
        if t in disc:
            rows.append((t, disc[t][0], cum, 0.0))
        rows.append((t, f, cum, 0.0))
    return rows


def _write_atomic(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_csv(path, rows):
    lines = ["t,f,cumulative,atom_mass"]
    for t, f, c, m in rows:
        lines.append(",".join(_fmt(v) for v in (t, f, c, m)))
    _write_atomic(path, "\n".join(lines) + "\n")


def _check_finite(doc, path="result"):
    if isinstance(doc, dict):
        for k, v in doc.items():
            _check_finite(v, f"{path}.{k}")
    elif isinstance(doc, (list, tuple)):
        for i, v in enumerate(doc):
            _check_finite(v, f"{path}[{i}]")
    elif isinstance(doc, float) and not math.isfinite(doc):
        raise SolverError(f"non-finite value at {path}")


def run(model, command, params, cfg):
    """Execute one run; returns (result document, csv rows or None)."""
    result = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "model": model,
        "command": command,
        "params": _params_doc(params),
        "solver": {"epsilon": cfg.epsilon, "dt": cfg.dt,
                   "nmax_tail_prob": cfg.nmax_tail_prob,
                   "mc_reps": cfg.mc_reps, "seed": cfg.seed},
    }
    csv_rows = None
    if command == "solve":
        if model in ("stochastic", "both"):
            sol = solve(params.as_stochastic(), cfg)
            result["stochastic"] = _equilibrium_doc(sol)
            csv_rows = density_csv_rows(sol.strategy)
        if model in ("fluid", "both"):
            fl = fluid_equilibrium(params.as_fluid())
            result["fluid"] = _fluid_doc(fl)
            if csv_rows is None:
                csv_rows = density_csv_rows(fl)
    elif command == "social-opt":
        opt = fluid_social_optimum(params.as_fluid())
        result["fluid_optimum"] = _fluid_doc(opt)
        csv_rows = density_csv_rows(opt)
    elif command == "poa":
        eq = fluid_equilibrium(params.as_fluid())
        opt = fluid_social_optimum(params.as_fluid())
        result["fluid"] = _fluid_doc(eq)
        result["fluid_optimum"] = _fluid_doc(opt)
        result["poa"] = price_of_anarchy(params.as_fluid())
        csv_rows = density_csv_rows(eq)
    elif command == "verify":
        if model == "fluid":
            target = fluid_equilibrium(params.as_fluid())
            result["fluid"] = _fluid_doc(target)
        else:
            target = solve(params.as_stochastic(), cfg)
            result["stochastic"] = _equilibrium_doc(target)
            csv_rows = density_csv_rows(target.strategy)
        grid = audit_grid(target, params)
        report = best_response_audit(target, params.as_stochastic(), cfg, grid)
        result["audit"] = {
            "equilibrium_cost_estimate": report.equilibrium_cost_estimate,
            "equilibrium_cost_se": report.equilibrium_cost_se,
            "min_deviation_cost": report.min_deviation_cost,
            "epsilon_violation": report.epsilon_violation,
            "reps": report.reps,
            "seed": report.seed,
            "grid": [[t, m, s] for t, m, s in report.grid_costs],
        }
    elif command == "diagnostic":
        rec = fluid_stochastic_diagnostic(params.as_stochastic(), cfg)
        result["diagnostic"] = asdict(rec)
    _check_finite(result)
    return result, csv_rows


def _execute(doc, out_dir, fmt, seed_override):
    model, command, params, cfg, out = load_config(doc)
    if seed_override is not None:
        cfg = SolverConfig(cfg.epsilon, cfg.dt, cfg.nmax_tail_prob,
                           cfg.mc_reps, seed_override, cfg.max_bisect)
    out_dir = out_dir or out.get("path", ".")
    fmt = fmt or out.get("format", "both")
    if fmt not in ("json", "csv", "both"):
        raise ConfigInvalid(f"format must be json, csv or both, got {fmt!r}")
    result, csv_rows = run(model, command, params, cfg)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if fmt in ("json", "both"):
        path = os.path.join(out_dir, "result.json")
        _write_atomic(path, json.dumps(result, indent=2, sort_keys=True) + "\n")
        written.append(path)
    if fmt in ("csv", "both") and csv_rows is not None:
        path = os.path.join(out_dir, "density.csv")
        _write_csv(path, csv_rows)
        written.append(path)
    return result, written


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="arrivalq",
        description="Equilibrium arrival-time solver for a single-server "
                    "queue with earliness, tardiness and waiting costs.")
    ap.add_argument("--config", help="JSON run configuration")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--format", choices=("json", "csv", "both"))
    ap.add_argument("--seed", type=int, help="override the solver seed")
    ap.add_argument("--sweep", help="JSON array of run configurations")
    args = ap.parse_args(argv)
    if bool(args.config) == bool(args.sweep):
        ap.error("exactly one of --config or --sweep is required")
    try:
        if args.config:
            with open(args.config) as fh:
                doc = json.load(fh)
            _, written = _execute(doc, args.out, args.format, args.seed)
            for path in written:
                print(path)
            return 0
        with open(args.sweep) as fh:
            docs = json.load(fh)
        if not isinstance(docs, list):
            raise ConfigInvalid("sweep file must hold a JSON array of configs")
        base = args.out or "."
        for i, doc in enumerate(docs):
            _, written = _execute(doc, os.path.join(base, f"run_{i:03d}"),
                                  args.format, args.seed)
            for path in written:
                print(path)
        return 0
    except SolverError as exc:
        err = {"error": exc.code, "message": str(exc)}
        print(json.dumps(err), file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": "CONFIG_INVALID", "message": str(exc)}),
              file=sys.stderr)
        return ConfigInvalid.exit_code


if __name__ == "__main__":
    sys.exit(main())
