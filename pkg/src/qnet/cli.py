"""Command-line interface: ``qnet run | sweep | validate | oracle``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_json, merge_overrides, build_config
from .diagnostics import Trajectory
from .engines import RunResult, run
from .sweep import default_threads, plan_from_dict, run_sweep

log = logging.getLogger("qnet")

EXIT_CONFIG = 2
EXIT_RUNTIME = 1


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="JSON config file")
    p.add_argument("--engine", help="harmonic | semiclassical-jc | semiclassical-bh | quantum | lindblad")
    p.add_argument("--model", help="unit model for quantum/lindblad: harmonic | jc | bh")
    p.add_argument("--seed", type=int)
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--threads", type=int, help="worker cap (falls back to $QNET_THREADS, then 1)")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--N", type=int)
    p.add_argument("--Np", type=int)
    p.add_argument("--J", type=float)
    p.add_argument("--g", type=float)
    p.add_argument("--U", type=float)
    p.add_argument("--omega-c", dest="omega_c", type=float)
    p.add_argument("--omega-q", dest="omega_q", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--gamma-phi", dest="gamma_phi", type=float)
    conn = p.add_mutually_exclusive_group()
    conn.add_argument("--D", type=int, help="finite-range coupling to D neighbours per side")
    conn.add_argument("--all-to-all", dest="all_to_all", action="store_true", default=None)
    p.add_argument("--delta-omega", dest="delta_omega", type=float)
    p.add_argument("--delta-J", dest="delta_J", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--method", help="rk4 (fixed step) or rk45 (adaptive)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qnet", description="Localization dynamics in coupled cavity networks.")
    parser.add_argument("--version", action="version", version=f"qnet {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one trajectory")
    _add_run_flags(p)

    p = sub.add_parser("sweep", help="run a parameter grid from a sweep plan")
    _add_run_flags(p)
    p.add_argument("--ensemble", type=int, help="disorder realizations per point")

    p = sub.add_parser("validate", help="check a config (or sweep plan) and print it resolved")
    _add_run_flags(p)

    p = sub.add_parser("oracle", help="run the cross-check suites")
    p.add_argument("--suite", action="append", help="analytic-vs-matrix | sector-equivalence | linear-limit")
    p.add_argument("--out", metavar="DIR")
    return parser


def _overrides(args) -> dict:
    keys = ("engine", "model", "seed", "t_max", "samples", "threads", "out", "N", "Np", "J", "g",
            "U", "omega_c", "omega_q", "kappa", "gamma", "gamma_phi", "D", "all_to_all",
            "delta_omega", "delta_J", "dt", "method")
    return {k: getattr(args, k, None) for k in keys}


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_csv(traj: Trajectory, cfg: RunConfig) -> str:
    """CSV text: two comment lines (version, resolved config), header, rows."""
    cols = [traj.times, traj.P]
    names = ["t", "P"]
    if traj.Z is not None:
        cols.append(traj.Z)
        names.append("Z")
    cols.extend(traj.n)
    names.extend(f"n_{i}" for i in range(traj.N))
    if traj.sz is not None:
        cols.extend(traj.sz)
        names.extend(f"sz_{i}" for i in range(traj.N))
    data = np.column_stack(cols)
    lines = [
        f"# qnet {__version__}",
        "# config: " + json.dumps(cfg.to_dict(), sort_keys=True),
        ",".join(names),
    ]
    lines.extend(",".join(_fmt(v) for v in row) for row in data)
    return "\n".join(lines) + "\n"


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def summary_dict(res: RunResult) -> dict:
    s = res.summary
    meta = _jsonable(res.trajectory.meta)
    drift = {k: v for k, v in meta.items()
             if "drift" in k or k in ("hermiticity", "min_eigenvalue", "bloch_excess", "closed_form_max_dev")}
    return {
        "version": __version__,
        "engine": res.config.engine,
        "seed": res.config.seed,
        "eta": s.eta,
        "P_min": s.P_min,
        "t_at_min": s.t_at_min,
        "t_max": s.t_max,
        "Np": s.Np,
        "drift": drift,
        # eta is a grid minimum of P over this window
        "window": {"t_start": 0.0, "t_end": float(res.trajectory.times[-1]),
                   "samples": int(len(res.trajectory.times)), "P_min": "grid minimum"},
        "meta": meta,
        "wall_time": res.wall_time,
        "config": res.config.to_dict(),
    }


def _error(kind: str, message: str, field: str | None = None, code: int = EXIT_RUNTIME) -> int:
    err = {"error": {"type": kind, "message": message}}
    if field is not None:
        err["error"]["field"] = field
    print(json.dumps(err), file=sys.stderr)
    return code


def cmd_run(args) -> int:
    cfg = build_config(merge_overrides(load_json(args.config) if args.config else {}, _overrides(args)))
    res = run(cfg)
    summary = summary_dict(res)
    out = Path(cfg.out or "qnet-out")
    out.mkdir(parents=True, exist_ok=True)
    (out / "trajectory.csv").write_text(trajectory_csv(res.trajectory, cfg))
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps({"eta": summary["eta"], "P_min": summary["P_min"], "out": str(out)}))
    return 0


def _sweep_overrides(args) -> dict:
    raw = merge_overrides({}, _overrides(args))
    raw.pop("out", None)
    raw.pop("threads", None)
    return raw


def cmd_sweep(args) -> int:
    if not args.config:
        raise ConfigError("config", "sweep needs a plan file (--config)")
    raw = load_json(args.config)
    if args.ensemble is not None:
        raw["ensemble"] = args.ensemble
    plan = plan_from_dict(raw, _sweep_overrides(args))
    threads = args.threads or plan.base.threads or default_threads()
    t0 = time.perf_counter()
    result = run_sweep(plan, threads)
    out = Path(args.out or plan.base.out or "qnet-sweep")
    csv_path, json_path = result.write(out)
    print(json.dumps({
        "points": int(np.prod(plan.shape)),
        "failures": len(result.failures),
        "wall_time": time.perf_counter() - t0,
        "csv": str(csv_path),
        "json": str(json_path),
    }))
    return 0


def cmd_validate(args) -> int:
    raw = load_json(args.config) if args.config else {}
    if "base" in raw:
        plan = plan_from_dict(raw, _sweep_overrides(args))
        resolved = {"base": plan.base.to_dict(), "axes": [{"name": a.name, "values": list(a.values)} for a in plan.axes],
                    "ensemble": plan.ensemble, "seed": plan.seed}
    else:
        resolved = build_config(merge_overrides(raw, _overrides(args))).to_dict()
    print(json.dumps({"valid": True, "config": resolved}, indent=2))
    return 0


def cmd_oracle(args) -> int:
    from .checks import run_suites

    try:
        results = run_suites(args.suite)
    except ValueError as e:
        raise ConfigError("suite", str(e)) from None
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'}  {r.suite:20s} {r.name:28s} err={r.error:.3e} tol={r.tol:.0e}")
    ok = all(r.ok for r in results)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "oracle.json").write_text(json.dumps({"version": __version__, "passed": ok,
                                                     "checks": [r.to_dict() for r in results]}, indent=2) + "\n")
    return 0 if ok else EXIT_RUNTIME


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "validate": cmd_validate, "oracle": cmd_oracle}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        return _error("ConfigError", str(e), e.field, EXIT_CONFIG)
    except FileNotFoundError as e:
        return _error("FileNotFoundError", str(e), "config", EXIT_CONFIG)
    except Exception as e:  # engine failures: report with context, nonzero exit
        log.debug("run failed", exc_info=True)
        return _error(type(e).__name__, str(e))


if __name__ == "__main__":
    sys.exit(main())
