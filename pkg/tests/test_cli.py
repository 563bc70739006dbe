import json
import subprocess
import sys

import numpy as np
import pytest

from youngfbm.cli import build_parser, run
from youngfbm.pathio import read_gridpath_csv, read_paths_csv, write_gridpath_csv


@pytest.fixture
def driver_csv(tmp_path):
    out = tmp_path / "g.csv"
    assert run(["fbm-sample", "--alpha", "0.7", "--level", "13", "--seed", "5",
                "--out", str(out)]) == 0
    return out


def write_slepian_spec(path, **overrides):
    spec = {"kind": "driver-max", "alpha": 0.5, "level": 6, "n_paths": 1000, "seed": 2,
            "lambda_grid": [1.5, 2.0], "bound_kind": "slepian"}
    spec.update(overrides)
    path.write_text(json.dumps(spec))
    return path


def test_fbm_sample_outputs(tmp_path, capsys):
    out = tmp_path / "paths.csv"
    assert run(["fbm-sample", "--alpha", "0.5", "--level", "5", "--paths", "3",
                "--seed", "9", "--out", str(out)]) == 0
    paths = read_paths_csv(out)
    assert [p.level for p in paths] == [5, 5, 5]
    assert all(p.values[0] == 0 for p in paths)
    sidecar = json.loads((tmp_path / "paths.json").read_text())
    assert sidecar["seed"] == 9
    assert json.loads(capsys.readouterr().err)["level"] == 5


def test_fbm_sample_per_file(tmp_path):
    out = tmp_path / "p.csv"
    assert run(["fbm-sample", "--alpha", "0.2", "--level", "4", "--paths", "2",
                "--per-file", "--out", str(out)]) == 0
    assert read_gridpath_csv(tmp_path / "p_1.csv").level == 4


def test_rerun_is_byte_identical(tmp_path):
    outs = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for out in outs:
        assert run(["fbm-sample", "--alpha", "0.5", "--level", "6", "--paths", "4",
                    "--seed", "11", "--out", str(out)]) == 0
    assert outs[0].read_bytes() == outs[1].read_bytes()


def test_rs_seed_overrides_flag(tmp_path, monkeypatch):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(["fbm-sample", "--alpha", "0.5", "--level", "4", "--seed", "3", "--out", str(a)])
    monkeypatch.setenv("RS_SEED", "3")
    run(["fbm-sample", "--alpha", "0.5", "--level", "4", "--seed", "99", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()
    assert json.loads((tmp_path / "b.json").read_text())["seed"] == 3
    monkeypatch.setenv("RS_SEED", "x")
    assert run(["fbm-sample", "--alpha", "0.5", "--level", "4", "--out", str(b)]) == 2


def test_integrate_constant_integrand(tmp_path, driver_csv, capsys):
    g = read_gridpath_csv(driver_csv)
    f = tmp_path / "f.csv"
    write_gridpath_csv(g.with_values(np.full(g.values.size, 1.5)), f)
    capsys.readouterr()
    assert run(["integrate", "--f", str(f), "--g", str(driver_csv)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["value"] == pytest.approx(1.5 * (g.values[-1] - g.values[0]), rel=1e-12)
    assert res["truncation_bound"] == 0.0


def test_integrate_hypothesis_violation(tmp_path, driver_csv, capsys):
    args = ["integrate", "--f", str(driver_csv), "--g", str(driver_csv),
            "--beta", "0.4", "--kf", "1", "--gamma", "0.5", "--kg", "1"]
    assert run(args) == 3
    assert "beta+gamma <= 1" in capsys.readouterr().err
    assert run(args[:6]) == 2


def test_solve_zero_coefficients(tmp_path, driver_csv):
    out = tmp_path / "x.csv"
    assert run(["solve", "--g", str(driver_csv), "--x0", "2.5", "--alpha", "0.7",
                "--out", str(out)]) == 0
    x = read_gridpath_csv(out)
    assert np.all(x.values == 2.5)
    diag = json.loads((tmp_path / "x.json").read_text())
    assert diag["defect"] == 0.0
    assert len(diag["driver_hash"]) == 64


def test_solve_linear_with_config(tmp_path, driver_csv, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"sigma": "linear:a=1", "x0": 1.0, "alpha": 0.7}))
    out = tmp_path / "x.csv"
    assert run(["solve", "--g", str(driver_csv), "--config", str(cfg), "--out", str(out)]) == 0
    printed = json.loads(capsys.readouterr().out)
    g = read_gridpath_csv(driver_csv)
    assert printed["x_T"] == pytest.approx(np.exp(g.values[-1]), rel=1e-2)


def test_solve_errors(tmp_path, driver_csv):
    out = str(tmp_path / "x.csv")
    assert run(["solve", "--g", str(driver_csv), "--out", out]) == 2
    assert run(["solve", "--g", str(driver_csv), "--beta", "0.2", "--gamma", "0.7",
                "--out", out]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": 1}))
    assert run(["solve", "--g", str(driver_csv), "--config", str(bad), "--out", out]) == 2
    assert run(["solve", "--g", str(tmp_path / "missing.csv"), "--out", out]) == 2


@pytest.mark.parametrize("argv,key,value", [
    (["--kind", "slepian", "--alpha", "0.5", "--lambda", "3"], "bound", 0.039717),
    (["--kind", "fernique", "--alpha", "0.5", "--lambda", "6"], "bound", 0.91),
    (["--kind", "maxf", "--alpha", "0.7", "--lambda", "10", "--gamma", "0.75"], "bound", 3.33e-7),
])
def test_bounds(argv, key, value, capsys):
    assert run(["bounds", *argv]) == 0
    assert json.loads(capsys.readouterr().out)[key] == pytest.approx(value, rel=1e-2)


def test_bounds_errors():
    assert run(["bounds", "--kind", "fernique", "--alpha", "0.5", "--lambda", "1.5"]) == 3
    assert run(["bounds", "--kind", "maxf", "--alpha", "0.7", "--lambda", "3"]) == 2
    assert run(["bounds", "--kind", "maxf", "--alpha", "0.7", "--lambda", "3",
                "--gamma", "0.9"]) == 3
    assert run(["bounds", "--kind", "other", "--alpha", "0.7", "--lambda", "3"]) == 2


def test_mc_validate_pass_and_artifacts(tmp_path, capsys):
    spec = write_slepian_spec(tmp_path / "exp.json")
    assert run(["mc-validate", "--spec", str(spec)]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "lambda,analytic,empirical,ci_upper,verdict"
    assert out.rstrip().endswith("overall: pass")
    report = json.loads((tmp_path / "exp.report.json").read_text())
    assert report["passed"] is True
    assert report["config"]["experiment"]["seed"] == 2
    first = (tmp_path / "exp.report.json").read_bytes()
    assert run(["mc-validate", "--spec", str(spec)]) == 0
    assert (tmp_path / "exp.report.json").read_bytes() == first


def test_mc_validate_failure_exit(tmp_path, capsys):
    spec = write_slepian_spec(tmp_path / "exp.json", bound_kind="fernique",
                              lambda_grid=[2.0], bound={"m": 2, "inflate": 0.1})
    assert run(["mc-validate", "--spec", str(spec)]) == 1
    assert "overall: fail" in capsys.readouterr().out


def test_mc_validate_resolution_check(tmp_path):
    spec = write_slepian_spec(tmp_path / "exp.json", resolution_check=2)
    assert run(["mc-validate", "--spec", str(spec)]) == 0
    report = json.loads((tmp_path / "exp.report.json").read_text())
    assert report["resolution"]["levels"] == [6, 8]


def test_mc_validate_bad_spec(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    assert run(["mc-validate", "--spec", str(bad)]) == 2
    assert run(["mc-validate", "--spec", str(write_slepian_spec(tmp_path / "s.json",
                                                                n_paths=10))]) == 2
    bad.write_text("{not json")
    assert run(["mc-validate", "--spec", str(bad)]) == 2


def test_unknown_flag_is_usage_error():
    assert run(["fbm-sample", "--alpha", "0.5", "--out", "x.csv", "--bogus"]) == 2
    assert run([]) == 2


def test_every_flag_has_help():
    parser = build_parser()
    subs = next(a for a in parser._actions if a.choices and "solve" in a.choices).choices
    assert set(subs) == {"fbm-sample", "integrate", "solve", "bounds", "mc-validate"}
    for name, sub in subs.items():
        for action in sub._actions:
            if action.option_strings and action.dest != "help":
                assert action.help, f"{name} {action.option_strings} has no help"


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "youngfbm.cli", "bounds", "--kind", "slepian",
                           "--alpha", "0.5", "--lambda", "2"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "bound" in json.loads(proc.stdout)
    assert json.loads(proc.stderr)["command"] == "bounds"
