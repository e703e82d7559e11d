import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nodalshoot import io
from nodalshoot.cli import main
from nodalshoot.config import ConfigError, validate
from nodalshoot.harness import compare, golden_dir, regress, run

import oracle


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


SCALAR_CFG = {"kind": "solve-scalar", "scalar.lambdas": [1.0], "scalar.P": [0]}
SWEEP_CFG = {"kind": "uniqueness-sweep", "params.lambda": [2.0], "params.mu": [1.0],
             "nodal.counts": [1], "sweep.launches": 16, "seed": 4}


# --- config ----------------------------------------------------------------------

def fields(exc):
    return {e["field"] for e in exc.value.errors}


def test_negative_mu_names_field():
    with pytest.raises(ConfigError) as exc:
        validate({"kind": "solve-system", "params.lambda": [1.0], "params.mu": [-1.0],
                  "nodal.counts": [0]})
    assert fields(exc) == {"params.mu"}


def test_unknown_and_missing_keys():
    with pytest.raises(ConfigError) as exc:
        validate({"kind": "continue-beta", "params.mu": [1, 1], "bogus": 1})
    assert {"bogus", "params.lambda", "nodal.counts", "continuation.target_beta_upper"} <= fields(exc)
    with pytest.raises(ConfigError) as exc:
        validate({})
    assert "kind" in fields(exc)


def test_shape_checks():
    with pytest.raises(ConfigError) as exc:
        validate({"kind": "solve-system", "params.lambda": [1, 1], "params.mu": [1, 1],
                  "params.beta_upper": [0.1], "nodal.counts": [0]})
    assert fields(exc) == {"nodal.counts"}
    with pytest.raises(ConfigError) as exc:
        validate({"kind": "solve-scalar", "integrator.rel_tol": -1})
    assert "integrator.rel_tol" in fields(exc)


def test_nested_equals_flat():
    flat = validate({"kind": "solve-system", "params.lambda": [1, 1.5], "params.mu": [1, 1],
                     "params.beta_upper": [0.05], "nodal.counts": [1, 2]})
    nested = validate({"kind": "solve-system", "params": {"lambda": [1, 1.5], "mu": [1, 1],
                       "beta_upper": [0.05]}, "nodal": {"counts": [1, 2]}})
    assert io.config_hash(flat.canonical()) == io.config_hash(nested.canonical())
    np.testing.assert_array_equal(flat.params.beta, [[0, 0.05], [0.05, 0]])


def test_cli_invalid_config_status(tmp_path, capsys):
    path = write(tmp_path, {"kind": "solve-system", "params.lambda": [1.0], "params.mu": [-2.0],
                            "nodal.counts": [0]})
    assert main(["run", "--config", path, "--out", str(tmp_path / "o")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["status"] == 2 and err["fields"][0]["field"] == "params.mu"


def test_cli_missing_file(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2


# --- run -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def scalar_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("scalar")
    cfg = write(d, SCALAR_CFG)
    assert main(["run", "--config", cfg, "--out", str(d / "a")]) == 0
    assert main(["run", "--config", cfg, "--out", str(d / "b")]) == 0
    return d


def test_solve_scalar_outputs(scalar_run):
    out = scalar_run / "a"
    assert sorted(p.name for p in out.iterdir()) == [
        "amplitudes.csv", "manifest.json", "profile_lam1_P0.csv", "record_lam1_P0.json"]
    rec = json.loads((out / "record_lam1_P0.json").read_text())
    assert rec["amplitudes"][0] == pytest.approx(oracle.FROZEN_AMPLITUDES[(1.0, 0)],
                                                 rel=oracle.ORACLE_RTOL)
    assert rec["boundary_residual"] <= 1e-8 and rec["seed"] == 0


def test_outputs_embed_config_hash(scalar_run):
    out = scalar_run / "a"
    chash = json.loads((out / "manifest.json").read_text())["config_hash"]
    for f in out.iterdir():
        assert chash in f.read_text(), f.name


def test_byte_identical_reruns(scalar_run):
    a, b = scalar_run / "a", scalar_run / "b"
    for f in a.iterdir():
        if f.name != "manifest.json":
            assert f.read_bytes() == (b / f.name).read_bytes()
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert ma["checksums"] == mb["checksums"]
    for name, digest in ma["checksums"].items():
        assert io.sha256((a / name).read_bytes()) == digest


def test_profile_csv_round_trip(scalar_run):
    out = scalar_run / "a"
    text = (out / "profile_lam1_P0.csv").read_text()
    prof = io.read_profile_csv(text)
    assert io.profile_csv(prof, text.split("=", 1)[1].split("\n", 1)[0]) == text


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_round_trips(x):
    assert float(io.fmt_float(x)) == x


def test_parallel_equals_sequential(tmp_path):
    cfg = validate(SWEEP_CFG)
    assert run(cfg, str(tmp_path / "seq"), jobs=1) == 0
    assert run(cfg, str(tmp_path / "par"), jobs=4) == 0
    seq = (tmp_path / "seq" / "uniqueness.json").read_bytes()
    assert seq == (tmp_path / "par" / "uniqueness.json").read_bytes()
    assert json.loads(seq)["verdict"] == "unique"


def test_seed_override_recorded(tmp_path):
    path = write(tmp_path, SWEEP_CFG)
    assert main(["run", "--config", path, "--out", str(tmp_path / "o"), "--seed", "9"]) == 0
    rep = json.loads((tmp_path / "o" / "uniqueness.json").read_text())
    assert rep["seed"] == 9
    assert json.loads((tmp_path / "o" / "manifest.json").read_text())["seed"] == 9


def test_solver_failure_status(tmp_path, capsys):
    path = write(tmp_path, {"kind": "solve-scalar", "scalar.P": [60]})
    assert main(["run", "--config", path, "--out", str(tmp_path / "o")]) == 1
    err = json.loads((tmp_path / "o" / "error.json").read_text())
    assert err["error"] == "NodalClassUnreachable" and err["status"] == 1
    assert json.loads((tmp_path / "o" / "manifest.json").read_text())["status"] == 1


CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.json")))
def test_shipped_configs_validate(name):
    validate(json.loads((CONFIGS / name).read_text()))


# --- regress ---------------------------------------------------------------------

def test_compare_tolerances():
    assert compare({"amplitudes": [1.0]}, {"amplitudes": [1.0 + 5e-9]}) == []
    assert compare({"amplitudes": [1.0]}, {"amplitudes": [1.0 + 5e-8]})
    assert compare({"undecided": 0}, {"undecided": 1})
    assert compare({"x": 1.0}, {})


def test_regress_subset_passes():
    results = regress(names=["solve_scalar", "transform"])
    assert [r.name for r in results] == ["solve_scalar.json", "transform.json"]
    assert all(r.passed for r in results), [r.problems for r in results]


def test_regress_perturbed_tolerance():
    results = regress(integrator_overrides={"rel_tol": 1e-6}, names=["solve_scalar"])
    assert results[0].passed, results[0].problems


def test_regress_corrupted_golden(tmp_path, capsys):
    shutil.copy(golden_dir() / "solve_system.json", tmp_path / "solve_system.json")
    (tmp_path / "broken.json").write_text('{"config": {"kind": "solve-scalar"}, "expec')
    assert main(["regress", "--golden", str(tmp_path), "--report", str(tmp_path / "r.json")]) == 1
    out = capsys.readouterr().out
    assert "FAIL broken.json" in out and "PASS solve_system.json" in out
    report = json.loads((tmp_path / "r.json").read_text())
    assert any("broken.json" in p for r in report for p in r["problems"])


def test_regress_tampered_value(tmp_path):
    g = json.loads((golden_dir() / "solve_system.json").read_text())
    g["expected"]["amplitudes"] = [x + 1e-6 for x in g["expected"]["amplitudes"]]
    (tmp_path / "solve_system.json").write_text(json.dumps(g))
    res = regress(tmp_path)
    assert not res[0].passed and "amplitudes" in res[0].problems[0]


def test_regress_missing_goldens(tmp_path):
    res = regress(tmp_path)
    assert not res[0].passed and "missing" in res[0].problems[0]


def test_console_script(tmp_path):
    exe = shutil.which("nodalshoot")
    cmd = [exe] if exe else [sys.executable, "-m", "nodalshoot.cli"]
    good = write(tmp_path, SCALAR_CFG)
    bad = write(tmp_path, {"kind": "solve-scalar", "scalar.mu": -1}, "bad.json")
    r = subprocess.run(cmd + ["run", "--config", good, "--out", str(tmp_path / "o")],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    r = subprocess.run(cmd + ["run", "--config", bad], capture_output=True, text=True)
    assert r.returncode == 2 and "scalar.mu" in r.stderr
