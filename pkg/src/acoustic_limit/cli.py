"""Command-line entry point.

Every subcommand reads at most one YAML config file, prints a JSON summary on
stdout and exits with status 0 only when its assertions hold.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from . import harness
from .collision import KernelSpec, audit_assumptions, normalize_kernel
from .velocity_space import build_grid


def _load(path) -> dict:
    if path is None:
        return {}
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a mapping")
    return data


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True, default=float)
    sys.stdout.write("\n")


def cmd_audit_kernel(args) -> int:
    cfg = _load(args.config)
    family = args.kernel or cfg.get("kernel", "hard-sphere")
    beta = args.beta if args.beta is not None else cfg.get("beta")
    grid = build_grid(int(cfg.get("D", 2)), float(cfg.get("v_max", 6.0)), int(cfg.get("n_per_axis", 24)),
                      cfg.get("weight_rule", "halfrange"))
    n_omega = int(cfg.get("n_omega", 16))
    spec = normalize_kernel(KernelSpec(family, beta, float(cfg.get("C_kernel", 1.0))), grid, n_omega)
    report = audit_assumptions(spec, grid, s=float(cfg.get("s", 2.0)), n_omega=n_omega,
                               seed=int(cfg.get("seed", 0)))
    out = report.to_dict()
    if args.output:
        Path(args.output).write_text(json.dumps(out, indent=2, sort_keys=True, default=float) + "\n")
    _emit({"kernel": out["kernel"], "passed": out["passed"], "gain_norm": out["gain"]["norm"],
           "beta_a": out["a_lower"]["beta_a"], "beta_oracle": out["a_lower"]["beta_oracle"]})
    return 0 if report.passed else 1


def cmd_run_kinetic(args) -> int:
    cfg = harness.RunConfig.from_dict(_load(args.config))
    try:
        res = harness.run_kinetic(cfg, args.root)
    except harness.PositivityError as exc:
        _emit({"status": "failed", "error": str(exc), "dump": exc.dump})
        return 1
    s = dict(res.summary, path=str(res.path))
    s["passed"] = bool(s["min_slack"] >= -harness.SLACK_TOL and s["max_abs_rho_total"] <= harness.MASS_TOL)
    _emit(s)
    return 0 if s["passed"] else 1


def cmd_run_acoustic(args) -> int:
    cfg = harness.AcousticRunConfig.from_dict(_load(args.config))
    s = harness.run_acoustic(cfg, args.root)
    _emit(s)
    return 0 if s["passed"] else 1


def cmd_sweep(args) -> int:
    cfg = harness.SweepConfig.from_dict(_load(args.config))
    if args.workers is not None:
        cfg = harness.SweepConfig(cfg.eps_list, cfg.base, args.workers)
    out = harness.run_sweep(cfg, args.root)
    _emit({k: out.get(k) for k in ("status", "failure", "checks", "slopes", "passed", "path")})
    return 0 if out.get("passed") else 1


def cmd_fit(args) -> int:
    data = json.loads(Path(args.sweep).read_text())
    per = data["per_eps"]
    key, _, index = args.quantity.partition(":")
    values = [p[key][int(index)] if index else p[key] for p in per]
    slope = harness.fit_slope(zip([p["eps"] for p in per], values))
    _emit({"quantity": args.quantity, "slope": slope})
    return 0


def cmd_diagnose(args) -> int:
    res = harness.diagnose(args.run)
    _emit({"path": res["path"], "identical": res["identical"], "n_records": res["n_records"]})
    return 0 if res["identical"] else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="acoustic-limit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("audit-kernel", help="check the collision-kernel assumptions on a grid")
    a.add_argument("--config")
    a.add_argument("--kernel", choices=("hard-sphere", "maxwell", "vhs"))
    a.add_argument("--beta", type=float)
    a.add_argument("--output", help="write the full audit report here")
    a.set_defaults(func=cmd_audit_kernel)

    for name, func, helptext in (("run-kinetic", cmd_run_kinetic, "one kinetic run"),
                                 ("run-acoustic", cmd_run_acoustic, "one acoustic run")):
        r = sub.add_parser(name, help=helptext)
        r.add_argument("--config")
        r.add_argument("--root", default="runs")
        r.set_defaults(func=func)

    s = sub.add_parser("sweep", help="epsilon sweep with trend checks")
    s.add_argument("--config")
    s.add_argument("--root", default="runs")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_sweep)

    f = sub.add_parser("fit", help="log-log slope of a sweep quantity")
    f.add_argument("sweep", help="path to a sweep.json")
    f.add_argument("--quantity", default="moment_error",
                   help="summary key, with ':index' for list-valued keys such as defect_l1:0")
    f.set_defaults(func=cmd_fit)

    d = sub.add_parser("diagnose", help="recompute the records of a stored run")
    d.add_argument("run", help="run directory")
    d.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
