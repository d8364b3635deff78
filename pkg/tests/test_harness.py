import json
from dataclasses import replace

import numpy as np
import pytest
import yaml

from acoustic_limit import cli, harness

TINY = harness.RunConfig(n_per_axis=12, N_x=16, horizon=0.05, cadence=0.01)


@pytest.mark.parametrize("f,slope", [(lambda e: e, 1.0), (np.sqrt, 0.5), (lambda e: 3.0 + 0 * e, 0.0),
                                     (lambda e: 2 * e**1.5, 1.5)])
def test_fit_slope_examples(f, slope):
    eps = np.array([0.1, 0.05, 0.025, 0.0125])
    assert harness.fit_slope(zip(eps, f(eps))) == pytest.approx(slope, abs=1e-12)


@pytest.mark.parametrize("pairs", [[(0.1, 1.0), (0.05, 2.0)], [(0.1, 1.0), (0.05, 0.0), (0.01, 1.0)],
                                   [(0.1, 1.0), (0.05, -1.0), (0.01, 1.0)]])
def test_fit_slope_rejects(pairs):
    with pytest.raises(ValueError):
        harness.fit_slope(pairs)


def test_config_digest_is_stable_and_sensitive():
    a, b = harness.RunConfig(), harness.RunConfig()
    assert a.digest() == b.digest() and len(a.digest()) == 16
    assert replace(a, eps=0.05).digest() != a.digest()
    # an explicit delta equal to the rule value hashes the same
    assert replace(a, delta=a.delta_value).digest() == a.digest()
    assert harness.RunConfig.from_dict(a.canonical()).digest() == a.digest()


def test_delta_rule():
    assert harness.RunConfig(eps=0.04).delta_value == pytest.approx(0.2)
    assert harness.RunConfig(eps=0.04, delta_exponent=0.75).delta_value == pytest.approx(0.04**0.75)


@pytest.mark.parametrize("kwargs", [dict(eps=0.0), dict(operator="lbgk"), dict(operator="full-q", eps=0.005),
                                    dict(profile="gaussian")])
def test_run_config_rejects(kwargs):
    with pytest.raises(ValueError):
        harness.RunConfig(**kwargs)


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(ValueError):
        harness.RunConfig.from_dict({"epsilon": 0.1})
    with pytest.raises(ValueError):
        harness.SweepConfig.from_dict({"eps": [0.1]})


@pytest.mark.parametrize("eps", [(0.1, 0.1), (0.05, 0.1), (0.1, 0.05, 0.07)])
def test_sweep_requires_strictly_decreasing(eps):
    with pytest.raises(ValueError):
        harness.SweepConfig(eps)


def test_sweep_config_round_trip():
    s = harness.SweepConfig((0.2, 0.1, 0.05), TINY, 2)
    t = harness.SweepConfig.from_dict(s.to_dict())
    assert t == s
    assert [r.eps for r in t.runs()] == [0.2, 0.1, 0.05]


def test_zero_triple_sweep_is_trivial(tmp_path):
    base = replace(TINY, profile="zero")
    out = harness.run_sweep(harness.SweepConfig((0.1, 0.05, 0.025), base), tmp_path)
    assert out["status"] == "ok" and out["passed"]
    # unit-mass rescaling over the truncated grid leaves roundoff only
    for p in out["per_eps"]:
        assert p["moment_error"] <= harness.ZERO_TOL
        assert max(p["defect_l1"]) <= harness.ZERO_TOL
        assert p["abs_j_eps"] <= harness.ZERO_TOL
    assert all(c["vanishes"] for c in out["checks"]["defect_l1"])
    assert json.loads((tmp_path / out["path"].split("/")[-1] / "sweep.json").read_text())["status"] == "ok"


def test_sweep_abort_is_persisted(tmp_path):
    base = replace(TINY, rho_amp=25.0)
    out = harness.run_sweep(harness.SweepConfig((0.1, 0.05), base), tmp_path)
    assert out["status"] == "failed" and "PositivityError" in out["failure"]
    stored = json.loads((tmp_path / out["path"].split("/")[-1] / "sweep.json").read_text())
    assert stored["status"] == "failed" and stored["per_eps"] == []


def test_parallel_sweep_matches_serial(tmp_path):
    cfg = harness.SweepConfig((0.1, 0.05), TINY)
    ser = harness.run_sweep(cfg, tmp_path / "a")
    par = harness.run_sweep(harness.SweepConfig(cfg.eps_list, TINY, 2), tmp_path / "b")
    for a, b in zip(ser["per_eps"], par["per_eps"]):
        assert a["defect_l1"] == b["defect_l1"] and a["moment_error"] == b["moment_error"]


def test_verify_initial_hypotheses_zero():
    rep = harness.verify_initial_hypotheses(harness.SweepConfig(base=replace(TINY, profile="zero")))
    assert rep["ok"] and rep["C_in"] == 0.0


def test_verify_initial_hypotheses_default():
    rep = harness.verify_initial_hypotheses(harness.SweepConfig())
    assert rep["ok"]
    ratios = [p["C_in_over_half_square"] for p in rep["per_eps"]]
    assert all(abs(r - 1) <= 0.1 for r in ratios)
    # stable across the ladder: the ratio approaches one as delta shrinks
    assert np.all(np.diff(np.abs(np.array(ratios) - 1)) <= 0)
    for p in rep["per_eps"]:
        assert p["mass_defect"] <= 1e-14
        assert p["moment_mismatch"] <= 1e-12
        assert p["H_in"] <= rep["C_in"] * p["delta"] ** 2 * (1 + 1e-12)


def test_verify_initial_hypotheses_huge_amplitude():
    rep = harness.verify_initial_hypotheses(harness.SweepConfig(base=replace(TINY, rho_amp=50.0)))
    assert not rep["ok"]
    first = rep["per_eps"][0]
    assert first["ok"] is False and first["min_G"] < TINY.G_min


def test_assess_sweep_flags_increase():
    per = [dict(eps=e, moment_error=m, defect_l1=[d, 0.0], abs_j_eps=j, min_slack=0.0, max_abs_rho_total=0.0)
           for e, m, d, j in [(0.1, 0.3, 0.2, 1e-3), (0.05, 0.2, 0.25, 5e-4), (0.025, 0.1, 0.1, 2e-4)]]
    out = harness.assess_sweep(per)
    assert out["checks"]["moment_error"]["pass"]
    assert not out["checks"]["defect_l1"][0]["pass"] and out["checks"]["defect_l1"][1]["vanishes"]
    assert out["slopes"]["defect_l1"][1] is None
    assert not out["passed"]


def test_run_persists_and_rediagnoses(tmp_path):
    res = harness.run_kinetic(TINY, tmp_path)
    assert res.path.name == TINY.digest()
    for name in ("config.json", "series.csv", "summary.json", "snapshots.npz"):
        assert (res.path / name).exists()
    assert harness.load_config(res.path).digest() == TINY.digest()
    rep = harness.diagnose(res.path)
    assert rep["identical"] and rep["n_records"] == res.summary["n_records"]


def test_run_acoustic_persists(tmp_path):
    cfg = harness.AcousticRunConfig(N_x=64, horizon=0.5, cadence=0.05)
    out = harness.run_acoustic(cfg, tmp_path)
    assert out["passed"]
    assert (tmp_path / cfg.digest()).is_dir()


def _write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return str(p)


def test_cli_run_kinetic_and_diagnose(tmp_path, capsys):
    cfg = _write(tmp_path, "k.yaml", TINY.canonical())
    assert cli.main(["run-kinetic", "--config", cfg, "--root", str(tmp_path / "runs")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert cli.main(["diagnose", out["path"]]) == 0
    assert json.loads(capsys.readouterr().out)["identical"]


def test_cli_sweep_and_fit(tmp_path, capsys):
    cfg = _write(tmp_path, "s.yaml", {"eps_list": [0.1, 0.05, 0.025], "base": {"n_per_axis": 12, "N_x": 16,
                                                                                "horizon": 0.05}})
    code = cli.main(["sweep", "--config", cfg, "--root", str(tmp_path / "runs")])
    out = json.loads(capsys.readouterr().out)
    assert code == (0 if out["passed"] else 1)
    sweep_json = str(tmp_path / "runs" / out["path"].split("/")[-1] / "sweep.json")
    assert cli.main(["fit", sweep_json, "--quantity", "moment_error"]) == 0
    fit = json.loads(capsys.readouterr().out)
    assert np.isfinite(fit["slope"])
    assert cli.main(["fit", sweep_json, "--quantity", "defect_l1:3"]) == 0


def test_cli_audit_kernel(tmp_path, capsys):
    cfg = _write(tmp_path, "a.yaml", {"n_per_axis": 12})
    code = cli.main(["audit-kernel", "--config", cfg, "--kernel", "maxwell", "--output", str(tmp_path / "a.json")])
    out = json.loads(capsys.readouterr().out)
    assert code == (0 if out["passed"] else 1)
    assert (tmp_path / "a.json").exists()


def test_cli_run_acoustic(tmp_path, capsys):
    cfg = _write(tmp_path, "ac.yaml", {"N_x": 64, "horizon": 0.2})
    assert cli.main(["run-acoustic", "--config", cfg, "--root", str(tmp_path)]) == 0
    assert json.loads(capsys.readouterr().out)["passed"]


def test_cli_errors_exit_two(tmp_path, capsys):
    assert cli.main(["run-kinetic", "--config", str(tmp_path / "missing.yaml")]) == 2
    bad = _write(tmp_path, "bad.yaml", {"operator": "full-q", "eps": 0.001})
    assert cli.main(["run-kinetic", "--config", bad]) == 2
    capsys.readouterr()


def test_cli_positivity_failure_exit_one(tmp_path, capsys):
    cfg = _write(tmp_path, "p.yaml", dict(TINY.canonical(), rho_amp=40.0))
    assert cli.main(["run-kinetic", "--config", cfg, "--root", str(tmp_path)]) == 1
    assert json.loads(capsys.readouterr().out)["status"] == "failed"
