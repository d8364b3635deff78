"""Experiment orchestration: single kinetic runs, epsilon sweeps and persistence.

Each run is stored under ``<root>/<hash>/`` where ``hash`` is taken over the
canonical JSON form of its configuration.  The directory holds
``config.json``, ``series.csv`` (one row per output time), ``summary.json``
and ``snapshots.npz`` with the kinetic state at every output time, so that
every diagnostic can be recomputed later.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from . import _backend
from .acoustic import AcousticState, energy, mode_amplitude, project_initial, solve_fv, solve_modal
from .boundary import SlabDomain
from .collision import KernelSpec
from .diagnostics import EntropyRecord, entropy_slack, record_state
from .kinetic import KineticState, PositivityError, init_state, integrate, make_operator
from .velocity_space import build_grid, infinitesimal_maxwellian_field

SLACK_TOL = 1e-8
MASS_TOL = 1e-8
ZERO_TOL = 1e-12
FULL_Q_MIN_EPS = 1e-2


@dataclass(frozen=True)
class RunConfig:
    D: int = 2
    n_per_axis: int = 24
    v_max: float = 6.0
    weight_rule: str = "halfrange"
    kernel: str = "hard-sphere"
    beta: float | None = None
    C_kernel: float = 1.0
    n_omega: int = 16
    operator: str = "bgk"
    alpha: float = 1.0
    eps: float = 0.1
    delta: float | None = None
    c_delta: float = 1.0
    delta_exponent: float = 0.5
    L: float = 1.0
    N_x: int = 64
    cfl: float = 0.4
    c_coll: float = 0.5
    horizon: float = 1.0
    cadence: float = 0.01
    profile: str = "cosine"
    rho_amp: float = 1.0
    u_amp: float = 0.0
    theta_amp: float = 0.0
    mode: int = 2
    G_min: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.operator not in ("bgk", "full-q"):
            raise ValueError(f"unknown operator {self.operator!r}")
        if self.operator == "full-q" and self.eps < FULL_Q_MIN_EPS:
            raise ValueError(f"full-q runs need eps >= {FULL_Q_MIN_EPS} (explicit stiffness bound)")
        if self.profile not in ("cosine", "zero"):
            raise ValueError(f"unknown initial profile {self.profile!r}")

    @property
    def delta_value(self) -> float:
        if self.delta is not None:
            return float(self.delta)
        return self.c_delta * self.eps**self.delta_exponent

    def canonical(self) -> dict:
        d = asdict(self)
        d["delta"] = self.delta_value
        return d

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown run-config keys: {sorted(unknown)}")
        return cls(**d)

    def kernel_spec(self) -> KernelSpec:
        return KernelSpec(self.kernel, self.beta, self.C_kernel)


def initial_triple(cfg: RunConfig, x):
    if cfg.profile == "zero":
        z = np.zeros_like(x)
        return z, z, z
    k = cfg.mode * np.pi / cfg.L
    return cfg.rho_amp * np.cos(k * x), cfg.u_amp * np.sin(k * x), cfg.theta_amp * np.cos(k * x)


def acoustic_reference(cfg: RunConfig, grid, domain) -> AcousticState:
    """Acoustic initial state from the grid moments of the epsilon-independent fluctuation."""
    rho, u, theta = initial_triple(cfg, domain.x)
    g_in = infinitesimal_maxwellian_field(rho, np.outer(u, np.eye(grid.D)[0]), theta, grid)
    return project_initial(g_in, grid, domain.L)


def moment_error(arrays: dict, ref: AcousticState, dx: float) -> float:
    u = arrays["u"]
    diff = (arrays["rho"] - ref.rho) ** 2 + (u[:, 0] - ref.u) ** 2 + np.sum(u[:, 1:] ** 2, axis=1) \
        + (arrays["theta"] - ref.theta) ** 2
    return float(math.sqrt(dx * np.sum(diff)))


# --- persistence ---------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def series_csv(records) -> str:
    rows = [r.row() for r in records]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = list(rows[0])
    writer.writerow(cols)
    for r in rows:
        writer.writerow([_fmt(r[c]) for c in cols])
    return buf.getvalue()


_SNAP_KEYS = ("G", "rho", "u", "theta", "m", "vm", "wall_m_left", "wall_m_right",
              "trace_left", "trace_right", "defect")


@dataclass
class RunResult:
    config: RunConfig
    path: Path | None
    records: list
    arrays: dict
    summary: dict


def _build(cfg: RunConfig, backend=None):
    grid = build_grid(cfg.D, cfg.v_max, cfg.n_per_axis, cfg.weight_rule)
    domain = SlabDomain(cfg.L, cfg.N_x, cfg.alpha)
    op = make_operator(cfg.operator, grid, cfg.kernel_spec(), cfg.n_omega, backend)
    return grid, domain, op


def _finish(cfg, records, arrays, ref_states, domain, meta):
    for rec, a, ref in zip(records, arrays, ref_states):
        rec.moment_error = moment_error(a, ref, domain.dx)
    H_in = records[0].H
    slack = entropy_slack(records, H_in, cfg.eps, cfg.alpha)
    for rec, s in zip(records, slack):
        rec.slack = float(s)
    times = np.array([r.t for r in records])
    l1 = np.array([r.defect_l1 for r in records])
    renorm = np.array([r.renorm_flux_left + r.renorm_flux_right for r in records])
    j = float(trapezoid(renorm, times)) if times.size > 1 else 0.0
    summary = {
        "eps": cfg.eps,
        "delta": cfg.delta_value,
        "operator": cfg.operator,
        "H_in": H_in,
        "C_in": H_in / cfg.delta_value**2,
        "moment_error": max(r.moment_error for r in records),
        "defect_l1": [float(trapezoid(l1[:, z], times)) if times.size > 1 else 0.0 for z in range(l1.shape[1])],
        "j_eps": j,
        "abs_j_eps": abs(j),
        "wall_flux_time_l1": float(trapezoid(np.abs([r.renorm_flux_left for r in records]), times)
                                   + trapezoid(np.abs([r.renorm_flux_right for r in records]), times))
        if times.size > 1 else 0.0,
        "min_slack": float(np.min(slack)),
        "max_abs_rho_total": float(np.max(np.abs([r.rho_total for r in records]))),
        "final_rho_total": records[-1].rho_total,
        "max_mass_drift": float(np.max(np.abs([r.mass - records[0].mass for r in records]))),
        "n_records": len(records),
    }
    summary.update(meta)
    return summary


def run_kinetic(cfg: RunConfig, root=None, backend=None, keep_arrays: bool = True) -> RunResult:
    """Run one configuration to its horizon and persist it under ``root``."""
    t_start = time.perf_counter()
    grid, domain, op = _build(cfg, backend)
    state = init_state(lambda x: initial_triple(cfg, x), cfg.eps, cfg.delta_value, grid, domain, cfg.G_min)
    ref0 = acoustic_reference(cfg, grid, domain)
    records, arrays, refs = [], [], []

    def callback(s: KineticState, index: int):
        rec, a = record_state(s, op)
        records.append(rec)
        arrays.append(a)
        refs.append(solve_modal(ref0, s.t))

    state, _ = integrate(state, cfg.horizon, op, cadence=cfg.cadence, callback=callback,
                         cfl=cfg.cfl, c_coll=cfg.c_coll)
    meta = {"dt": state.meta["dt"], "n_steps": state.meta["n_steps"], "backend": backend or _backend.BACKEND,
            "status": "ok", "grid_report": {k: v for k, v in grid.report.items() if k != "warnings"}}
    summary = _finish(cfg, records, arrays, refs, domain, meta)
    summary["runtime_s"] = time.perf_counter() - t_start
    stacked = {k: np.stack([a[k] for a in arrays]) for k in _SNAP_KEYS}
    stacked["times"] = np.array([r.t for r in records])
    stacked["x"] = domain.x
    path = persist(cfg, records, stacked, summary, root) if root is not None else None
    return RunResult(cfg, path, records, stacked if keep_arrays else {}, summary)


def persist(cfg: RunConfig, records, stacked: dict, summary: dict, root) -> Path:
    path = Path(root) / cfg.digest()
    path.mkdir(parents=True, exist_ok=True)
    (path / "config.json").write_text(json.dumps(cfg.canonical(), indent=2, sort_keys=True) + "\n")
    (path / "series.csv").write_text(series_csv(records))
    (path / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=float) + "\n")
    np.savez(path / "snapshots.npz", **stacked)
    return path


def load_config(path) -> RunConfig:
    d = json.loads((Path(path) / "config.json").read_text())
    return RunConfig.from_dict(d)


def diagnose(path, backend=None) -> dict:
    """Recompute every record of a stored run from its snapshots and compare."""
    path = Path(path)
    cfg = load_config(path)
    grid, domain, op = _build(cfg, backend)
    snaps = np.load(path / "snapshots.npz")
    ref0 = acoustic_reference(cfg, grid, domain)
    records, arrays, refs = [], [], []
    for t, G in zip(snaps["times"], snaps["G"]):
        s = KineticState(G=G, t=float(t), eps=cfg.eps, delta=cfg.delta_value, grid=grid, domain=domain)
        rec, a = record_state(s, op)
        records.append(rec)
        arrays.append(a)
        refs.append(solve_modal(ref0, float(t)))
    _finish(cfg, records, arrays, refs, domain, {})
    text = series_csv(records)
    stored = (path / "series.csv").read_text()
    return {"path": str(path), "identical": text == stored, "n_records": len(records), "records": records}


# --- sweeps --------------------------------------------------------------------

def fit_slope(pairs) -> float:
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ValueError("need at least three (eps, value) pairs")
    e = np.array([p[0] for p in pairs], dtype=float)
    v = np.array([p[1] for p in pairs], dtype=float)
    if np.any(e <= 0) or np.any(v <= 0):
        raise ValueError("fit_slope needs positive eps and values")
    return float(np.polyfit(np.log(e), np.log(v), 1)[0])


@dataclass(frozen=True)
class SweepConfig:
    eps_list: tuple = (0.1, 0.05, 0.025, 0.0125)
    base: RunConfig = field(default_factory=RunConfig)
    workers: int = 1

    def __post_init__(self):
        eps = list(self.eps_list)
        if len(eps) < 1 or any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps list must be strictly decreasing")

    def runs(self):
        return [replace(self.base, eps=float(e), delta=None) for e in self.eps_list]

    def to_dict(self) -> dict:
        return {"eps_list": list(self.eps_list), "base": self.base.canonical(), "workers": self.workers}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        d = dict(d)
        base = dict(d.pop("base", {}))
        base.pop("eps", None)
        base.pop("delta", None)
        eps = tuple(float(e) for e in d.pop("eps_list", cls.eps_list))
        workers = int(d.pop("workers", 1))
        if d:
            raise ValueError(f"unknown sweep keys: {sorted(d)}")
        return cls(eps, RunConfig.from_dict(base), workers)


def _strictly_decreasing(values) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def _run_one(args):
    cfg, root, backend = args
    return run_kinetic(cfg, root, backend, keep_arrays=False)


def run_sweep(cfg: SweepConfig, root, backend=None) -> dict:
    """Run every epsilon, persist each run, and assemble the sweep result."""
    root = Path(root)
    runs = cfg.runs()
    results, failure = [], None
    jobs = [(r, root, backend) for r in runs]
    try:
        if cfg.workers > 1:
            with ProcessPoolExecutor(cfg.workers) as ex:
                results = list(ex.map(_run_one, jobs))
        else:
            for job in jobs:
                results.append(_run_one(job))
    except (PositivityError, ValueError) as exc:
        failure = f"{type(exc).__name__}: {exc}"
    per_eps = [dict(r.summary, run=str(r.path)) for r in results]
    out = {"config": cfg.to_dict(), "per_eps": per_eps, "status": "failed" if failure else "ok",
           "failure": failure}
    if not failure and len(results) == len(runs):
        out.update(assess_sweep(per_eps))
    sweep_dir = root / ("sweep-" + hashlib.sha256(json.dumps(cfg.to_dict(), sort_keys=True).encode()).hexdigest()[:16])
    sweep_dir.mkdir(parents=True, exist_ok=True)
    (sweep_dir / "sweep.json").write_text(json.dumps(out, indent=2, sort_keys=True, default=float) + "\n")
    out["path"] = str(sweep_dir)
    return out


def _decay_check(values) -> dict:
    """Strict decrease, or identically zero (to roundoff) along the whole ladder."""
    values = [float(v) for v in values]
    if max(abs(v) for v in values) <= ZERO_TOL:
        return {"vanishes": True, "pass": True}
    return {"vanishes": False, "pass": _strictly_decreasing(values)}


def assess_sweep(per_eps) -> dict:
    eps = [p["eps"] for p in per_eps]
    err = [p["moment_error"] for p in per_eps]
    defects = np.array([p["defect_l1"] for p in per_eps])
    jj = [p["abs_j_eps"] for p in per_eps]
    checks = {
        "moment_error": _decay_check(err),
        "defect_l1": [_decay_check(defects[:, z]) for z in range(defects.shape[1])],
        "abs_j_eps": _decay_check(jj),
        "slack": {"min": min(p["min_slack"] for p in per_eps),
                  "pass": all(p["min_slack"] >= -SLACK_TOL for p in per_eps)},
        "mass": {"max": max(p["max_abs_rho_total"] for p in per_eps),
                 "pass": all(p["max_abs_rho_total"] <= MASS_TOL for p in per_eps)},
    }

    def slope(values):
        if len(values) < 3 or min(values) <= ZERO_TOL:
            return None
        return fit_slope(zip(eps, values))

    slopes = {"moment_error": slope(err), "defect_l1": [slope(list(defects[:, z])) for z in range(defects.shape[1])],
              "abs_j_eps": slope(jj)}
    passed = (checks["moment_error"]["pass"] and all(c["pass"] for c in checks["defect_l1"])
              and checks["abs_j_eps"]["pass"] and checks["slack"]["pass"] and checks["mass"]["pass"])
    return {"checks": checks, "slopes": slopes, "passed": bool(passed)}


def verify_initial_hypotheses(cfg: SweepConfig) -> dict:
    """Entropy bound, moment targets and mass normalization of the initial data."""
    per, ok = [], True
    for run in cfg.runs():
        grid = build_grid(run.D, run.v_max, run.n_per_axis, run.weight_rule)
        domain = SlabDomain(run.L, run.N_x, run.alpha)
        rho, u, theta = initial_triple(run, domain.x)
        g_target = infinitesimal_maxwellian_field(rho, np.outer(u, np.eye(grid.D)[0]), theta, grid)
        half_square = 0.5 * domain.dx * float(np.sum((g_target**2) @ grid.weights))
        entry = {"eps": run.eps, "delta": run.delta_value, "half_square": half_square}
        try:
            st = init_state(lambda x: initial_triple(run, x), run.eps, run.delta_value, grid, domain, run.G_min)
        except PositivityError as exc:
            entry.update(ok=False, error=str(exc), min_G=exc.dump.get("min"))
            ok = False
            per.append(entry)
            continue
        g = (st.G - 1.0) / run.delta_value
        ref = project_initial(g_target, grid, domain.L)
        got = project_initial(g, grid, domain.L)
        mom = max(float(np.max(np.abs(a - b))) for a, b in
                  ((got.rho, ref.rho), (got.u, ref.u), (got.theta, ref.theta)))
        entry.update(ok=True, C_in=st.meta["C_in"], H_in=st.meta["H_in"], moment_mismatch=mom,
                     mass_defect=abs(st.mass() - domain.L),
                     C_in_over_half_square=st.meta["C_in"] / half_square if half_square > 0 else float("nan"))
        per.append(entry)
    C = [p["C_in"] for p in per if p.get("ok")]
    return {"per_eps": per, "C_in": max(C) if C else float("nan"), "ok": ok}


# --- acoustic-only runs --------------------------------------------------------

@dataclass(frozen=True)
class AcousticRunConfig:
    D: int = 3
    N_x: int = 128
    L: float = 1.0
    horizon: float = 1.0
    cadence: float = 0.01
    method: str = "fv"
    profile: str = "cosine"
    rho_amp: float = 1.0
    u_amp: float = 0.0
    theta_amp: float = 0.0
    mode: int = 1

    def __post_init__(self):
        if self.method not in ("fv", "modal"):
            raise ValueError(f"unknown acoustic method {self.method!r}")

    def canonical(self) -> dict:
        return dict(asdict(self), kind="acoustic")

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "AcousticRunConfig":
        d = {k: v for k, v in d.items() if k != "kind"}
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown acoustic-config keys: {sorted(unknown)}")
        return cls(**d)


def run_acoustic(cfg: AcousticRunConfig, root=None, tol: float = 1e-6) -> dict:
    """Acoustic evolution with energy and stationary-mode conservation checks."""
    x = (np.arange(cfg.N_x) + 0.5) * cfg.L / cfg.N_x
    rho, u, theta = initial_triple(cfg, x)
    init = AcousticState(rho, u, theta, cfg.D, cfg.L)
    n_out = max(1, int(round(cfg.horizon / cfg.cadence)))
    times = np.linspace(0.0, cfg.horizon, n_out + 1)
    if cfg.method == "modal":
        states = [solve_modal(init, float(t)) for t in times]
    else:
        _, states = solve_fv(init, cfg.horizon, cadence=cfg.cadence)
    E0, s0 = energy(init), init.stationary()
    rows = [{"t": s.t, "energy": energy(s), "energy_drift": energy(s) - E0,
             "stationary_drift": float(np.max(np.abs(s.stationary() - s0))),
             "mode_amplitude": mode_amplitude(s, cfg.mode)} for s in states]
    summary = {"max_energy_drift": max(abs(r["energy_drift"]) for r in rows),
               "max_stationary_drift": max(r["stationary_drift"] for r in rows)}
    summary["passed"] = bool(summary["max_energy_drift"] <= tol and summary["max_stationary_drift"] <= tol)
    if root is not None:
        path = Path(root) / cfg.digest()
        path.mkdir(parents=True, exist_ok=True)
        (path / "config.json").write_text(json.dumps(cfg.canonical(), indent=2, sort_keys=True) + "\n")
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(rows[0]))
        for r in rows:
            writer.writerow([_fmt(v) for v in r.values()])
        (path / "series.csv").write_text(buf.getvalue())
        (path / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        summary["path"] = str(path)
    return summary

