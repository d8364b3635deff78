"""Acceptance criteria 1-8 at their stated tolerances.

Each test appends one PASS/FAIL line (printed immediately and again in the
terminal summary).  The limit experiment runs the default BGK ladder and a
full-quadrature confirmation at eps = 0.1 and 0.05, so this module takes
several minutes.
"""
import json
import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from acoustic_limit import acoustic as ac
from acoustic_limit import boundary as bd
from acoustic_limit import collision as coll
from acoustic_limit import diagnostics as dg
from acoustic_limit import harness
from acoustic_limit.velocity_space import average, build_grid

from conftest import ACCEPTANCE_LINES


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def test_criterion_1_quadrature(grid):
    one = abs(average(np.ones(grid.K), grid) - 1)
    odd = [float(average(grid.nodes[:, j], grid)) for j in range(grid.D)]
    second = abs(average(grid.speed2, grid) - grid.D)
    ok = one <= 1e-6 and all(v == 0.0 for v in odd) and second <= 1e-5
    report(1, ok, f"|<1>-1|={one:.2e} <v>={odd} |<|v|^2>-D|={second:.2e}")
    assert ok


def test_criterion_2_collision_conservation(grid, hs_tables):
    r = np.random.default_rng(2024)
    G = r.uniform(0.2, 3.0, (100, grid.K))
    Q = coll.collide(G, hs_tables)
    cons = float(np.max(np.abs((Q * grid.weights) @ grid.invariants().T)))
    R = coll.entropy_dissipation(G, hs_tables)
    Q1 = coll.collide(np.ones(grid.K), hs_tables)
    ok = cons <= 1e-12 and bool(np.all(R >= 0)) and bool(np.all(Q1 == 0.0))
    report(2, ok, f"max|<zeta Q>|={cons:.2e} min R={R.min():.3e} Q(1,1)=0:{bool(np.all(Q1 == 0))}")
    assert ok


def test_criterion_3_kernel_audit(grid):
    parts, ok = [], True
    for family in ("hard-sphere", "maxwell"):
        rep = coll.audit_assumptions(coll.normalize_kernel(coll.KernelSpec(family), grid), grid)
        ba, bo = rep.a_lower["beta_a"], rep.a_lower["beta_oracle"]
        this = (rep.gain["norm"] <= 1 + 1e-8 and abs(ba - bo) <= 0.1 and rep.saturation["pass"]
                and all(np.isfinite(rep.saturation["C_delta"])))
        ok &= bool(this)
        parts.append(f"{family}: |K+|={rep.gain['norm']:.10f} beta_a={ba:.3f} oracle={bo:.3f} "
                     f"sat={max(rep.saturation['C_delta']):.3g}")
    report(3, ok, "; ".join(parts))
    assert ok


def test_criterion_4_boundary(grid):
    r = np.random.default_rng(4)
    fixed = all(np.all(bd.maxwell_incoming(np.ones(grid.K), grid, w, a) == 1.0)
                for a in (0.0, 0.25, 0.5, 1.0) for w in bd.WALLS)
    tol = bd.flux_tolerance(grid)
    worst = 0.0
    for _ in range(100):
        a = r.uniform(0, 1)
        for w in bd.WALLS:
            f = r.uniform(0, 3, grid.K)
            full = bd.maxwell_incoming(f, grid, w, a)
            worst = max(worst, abs(bd.wall_mass_flux(full, grid, w)) / full.max())
    f = r.normal(size=grid.K)
    invol = all(np.array_equal(bd.specular_reflect(bd.specular_reflect(f, grid, w), grid, w), f) for w in bd.WALLS)
    ok = fixed and worst <= tol and tol <= 1e-3 and invol
    report(4, ok, f"fixed point:{fixed} max flux/scale={worst:.2e} <= defect {tol:.2e} involution:{invol}")
    assert ok


def test_criterion_5_acoustic():
    D, L = 3, 1.0
    c = math.sqrt(5 / 3)
    expected = 2 * L / c

    def standing(N):
        x = (np.arange(N) + 0.5) * L / N
        return ac.AcousticState(np.cos(np.pi * x / L), np.zeros(N), np.zeros(N), D, L)

    s = standing(128)
    times = np.linspace(0, 3 * expected, 901)
    modal = ac.measure_period(times, [ac.mode_amplitude(ac.solve_modal(s, t)) for t in times])
    errs = []
    for N in (64, 128, 256):
        q = standing(N)
        a, b = ac.solve_fv(q, 1.0), ac.solve_modal(q, 1.0)
        errs.append(math.sqrt(q.dx * (np.sum((a.rho - b.rho) ** 2) + np.sum((a.u - b.u) ** 2)
                                      + np.sum((a.theta - b.theta) ** 2))))
    order = float(min(np.log2(np.array(errs[:-1]) / np.array(errs[1:]))))
    fine = standing(256)
    _, states = ac.solve_fv(fine, 2 * expected, cadence=0.005)
    fv = ac.measure_period([q.t for q in states], [ac.mode_amplitude(q) for q in states])
    _, states = ac.solve_fv(fine, 1.0, cadence=0.01)
    e0 = ac.energy(fine)
    drift = max(abs(ac.energy(q) - e0) for q in states)
    stat = max(float(np.max(np.abs(q.stationary() - fine.stationary()))) for q in states)
    ok = (abs(modal / expected - 1) <= 1e-3 and abs(fv / expected - 1) <= 1e-3 and order >= 1.8
          and drift <= 1e-6 and stat <= 1e-6)
    report(5, ok, f"modal period err={abs(modal / expected - 1):.1e} fv={abs(fv / expected - 1):.1e} "
                  f"order={order:.2f} energy drift={drift:.1e} stationary drift={stat:.1e}")
    assert ok


def test_criterion_6_entropy_machinery(grid, small_grid, small_tables):
    r = np.random.default_rng(6)
    from acoustic_limit.boundary import SlabDomain
    from acoustic_limit.kinetic import KineticState
    signs = True
    for _ in range(100):
        G = r.uniform(0.01, 4.0, (2, small_grid.K))
        s = KineticState(G, 0.0, 0.1, 0.1, small_grid, SlabDomain(1.0, 2))
        signs &= dg.relative_entropy(s) >= 0
        signs &= bool(np.all(dg.dissipation_rate(s, small_tables, per_cell=True) >= 0))
        signs &= dg.dissipation_rate(s, "bgk") >= 0
        for w in bd.WALLS:
            signs &= dg.dg_information(G[0], small_grid, w) >= 0
    delta = 1e-3
    g = r.normal(size=(8, grid.K))
    H = dg.relative_entropy(G=1 + delta * g, grid=grid, dx=1 / 8)
    half = 0.5 * delta**2 / 8 * np.sum((g**2) @ grid.weights)
    quad = abs(H / half - 1)
    p = r.uniform(-20, 20, 1000)
    z = np.expm1(r.uniform(-8, 4, 1000))
    young = int(np.sum(p * z <= dg.young_r_star(p) + dg.young_r(z) + 1e-12))
    q = r.uniform(0, 20, 1000)
    lam = r.uniform(0, 1, 1000)
    sq = int(np.sum(dg.young_r_star(lam * q) <= lam**2 * dg.young_r_star(q) * (1 + 1e-12)))
    ok = bool(signs) and quad <= 5e-3 and young == 1000 and sq == 1000
    report(6, ok, f"signs:{bool(signs)} quadratic rel err={quad:.1e} young {young}/1000 superquadratic {sq}/1000")
    assert ok


@pytest.fixture(scope="module")
def bgk_sweep(tmp_path_factory):
    root = tmp_path_factory.mktemp("accept")
    t = time.time()
    out = harness.run_sweep(harness.SweepConfig(), root)
    out["runtime"] = time.time() - t
    out["root"] = root
    return out


@pytest.fixture(scope="module")
def fullq_sweep(tmp_path_factory):
    root = tmp_path_factory.mktemp("accept-fullq")
    t = time.time()
    out = harness.run_sweep(harness.SweepConfig((0.1, 0.05), replace(harness.RunConfig(), operator="full-q")), root)
    out["runtime"] = time.time() - t
    return out


def _describe(out):
    ch = out["checks"]
    d = ch["defect_l1"]
    dpass = all(c["pass"] for c in d)
    return (dpass, f"(a) moment error {'ok' if ch['moment_error']['pass'] else 'NOT decreasing'}; "
                   f"(b) defects per zeta {['0' if c['vanishes'] else ('ok' if c['pass'] else 'NOT decreasing') for c in d]}; "
                   f"(c) |j| {'ok' if ch['abs_j_eps']['pass'] else 'NOT decreasing'}; "
                   f"(d) min slack {ch['slack']['min']:.1e}; (e) max |int rho| {ch['mass']['max']:.1e}")


def test_criterion_7_limit_experiment(bgk_sweep, fullq_sweep):
    assert bgk_sweep["status"] == "ok" and fullq_sweep["status"] == "ok"
    for name, out in (("bgk", bgk_sweep), ("full-q", fullq_sweep)):
        per = out["per_eps"]
        print(f"{name} sweep ({out['runtime']:.0f} s), slopes {json.dumps(out['slopes'])}")
        for p in per:
            print(f"  eps={p['eps']:<7} moment err={p['moment_error']:.4e} defect_l1="
                  f"{['%.4e' % v for v in p['defect_l1']]} |j|={p['abs_j_eps']:.3e} "
                  f"min slack={p['min_slack']:.1e} max|int rho|={p['max_abs_rho_total']:.1e}")
    b_def, b_txt = _describe(bgk_sweep)
    ch = bgk_sweep["checks"]
    bgk_ok = ch["moment_error"]["pass"] and b_def and ch["abs_j_eps"]["pass"] and ch["slack"]["pass"] and ch["mass"]["pass"]
    f_def, f_txt = _describe(fullq_sweep)
    fc = fullq_sweep["checks"]
    fq_ok = f_def and fc["abs_j_eps"]["pass"] and fc["slack"]["pass"] and fc["mass"]["pass"]
    timing = bgk_sweep["runtime"] < 600 and fullq_sweep["runtime"] < 900
    ok = bool(bgk_ok and fq_ok and timing)
    report(7, ok, f"BGK: {b_txt} | full-q eps 0.1->0.05 (b)-(e): {f_txt} | "
                  f"runtime {bgk_sweep['runtime']:.0f}s / {fullq_sweep['runtime']:.0f}s")
    assert ch["moment_error"]["pass"], "moment error not strictly decreasing"
    assert ch["slack"]["pass"] and fc["slack"]["pass"], "entropy slack below -1e-8"
    assert ch["mass"]["pass"] and fc["mass"]["pass"], "total density exceeds 1e-8"
    assert b_def and f_def, "conservation defects not strictly decreasing"
    assert ch["abs_j_eps"]["pass"] and fc["abs_j_eps"]["pass"], "|j_eps| not strictly decreasing"
    assert timing


def test_criterion_8_reproducibility(bgk_sweep, tmp_path):
    run_dir = Path(bgk_sweep["per_eps"][0]["run"])
    cfg = harness.load_config(run_dir)
    again = harness.run_kinetic(cfg, tmp_path)
    same_csv = (again.path / "series.csv").read_bytes() == (run_dir / "series.csv").read_bytes()
    same_name = again.path.name == run_dir.name
    diag = harness.diagnose(run_dir)["identical"]
    ok = same_csv and same_name and diag
    report(8, ok, f"rerun of {run_dir.name}: CSV bit-identical:{same_csv} diagnose identical:{diag}")
    assert ok
