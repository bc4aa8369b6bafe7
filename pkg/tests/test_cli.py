import json
import subprocess
import sys

import numpy as np
import pytest

from pdsplit.cli import main
from pdsplit.diagnostics import IterationTrace

from conftest import CASE_I


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def _schedule(gamma=2.0, delta=0.6, beta_p=1.0):
    return {"gamma": gamma, "delta": delta,
            "alpha": {"form": "powerlaw", "c": 1.0, "p": -1.0},
            "beta": {"form": "powerlaw", "c": 1.0, "p": beta_p},
            "epsilon": {"form": "constant", "c": 0.0}}


def _config(tmp_path, algorithms, instances=None):
    inst = instances or [dict(name="case1", generator="l1l1", **CASE_I)]
    return _write(tmp_path / "cfg.json", {"seed": 5, "output_dir": str(tmp_path / "out"),
                                          "instances": inst, "algorithms": algorithms})


def test_run_writes_traces(tmp_path, capsys):
    cfg = _config(tmp_path, [{"name": "split", "schedule": {"preset": "example2"},
                              "epsilon_mode": "strong", "budget": {"max_iter": 200}, "stride": 20}])
    assert main(["run", "--config", cfg]) == 0
    tr = IterationTrace.read_csv(tmp_path / "out" / "case1__split.csv")
    assert tr.last["k"] == 201
    assert "case1 / split: ok" in capsys.readouterr().out
    assert json.loads((tmp_path / "out" / "summary.json").read_text())["ok"]


def test_run_missing_file(tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    assert main(["run", "--config", missing]) == 2
    assert missing in capsys.readouterr().err


def test_run_malformed_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{\"seed\": 1,,}")
    assert main(["run", "--config", str(path)]) == 2
    assert "line 1" in capsys.readouterr().err


def test_run_unknown_algorithm(tmp_path, capsys):
    cfg = _config(tmp_path, [{"name": "foo", "budget": {"max_iter": 1}}])
    assert main(["run", "--config", cfg]) == 2
    err = capsys.readouterr().err
    assert "algorithms[0].name" in err and "foo" in err


def test_run_failed_cell(tmp_path, capsys):
    cfg = _config(tmp_path, [{"name": "cp_scvx", "budget": {"max_iter": 3}}])
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o2")]) == 3
    assert "failed" in capsys.readouterr().out


def test_run_bad_threads(tmp_path):
    cfg = _config(tmp_path, [])
    assert main(["run", "--config", cfg, "--threads", "0"]) == 2


def test_usage_error_exit_code():
    assert main(["frobnicate"]) == 2


def test_validate_convex_schedule_passes(tmp_path, capsys):
    cfg = _config(tmp_path, [{"name": "joint", "schedule": {"preset": "convex_rate"},
                              "budget": {"max_iter": 100}}])
    assert main(["validate", "--config", cfg]) == 0
    assert "pass" in capsys.readouterr().out


def test_validate_reports_delta_gamma(tmp_path, capsys):
    cfg = _config(tmp_path, [{"name": "joint", "schedule": _schedule(gamma=1.0, delta=0.5),
                              "budget": {"max_iter": 100}}])
    assert main(["validate", "--config", cfg]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out and "delta" in out


def test_validate_names_violated_inequality(tmp_path, capsys):
    # alpha_k beta_k = k grows while mu_g = 0
    lad = [{"name": "lad", "generator": "lad", "m": 5, "n": 12}]
    cfg = _config(tmp_path, [{"name": "split", "schedule": _schedule(beta_p=2.0),
                              "budget": {"max_iter": 50}}], lad)
    assert main(["validate", "--config", cfg, "--horizon", "50"]) == 1
    out = capsys.readouterr().out
    assert "||B||^2 (a_{k+1}^2 b_{k+1}^2 - a_k^2 b_k^2) <= a_k b_k mu_g" in out


def _trace_csv(tmp_path, ks, values, name="t.csv"):
    tr = IterationTrace()
    for k, v in zip(ks, values):
        tr.append({"k": int(k), "feasibility": float(v)})
    path = tmp_path / name
    tr.write_csv(path)
    return str(path)


def test_rate_recovers_slope(tmp_path, capsys):
    ks = np.arange(1, 201)
    path = _trace_csv(tmp_path, ks, 3.0 / ks)
    assert main(["rate", path, "--field", "feasibility", "--from", "10"]) == 0
    out = capsys.readouterr().out
    slope = float(out.split("slope=")[1].split()[0])
    assert slope == pytest.approx(-1.0, abs=1e-9)
    assert "rows=191" in out


def test_rate_all_zero_field(tmp_path):
    path = _trace_csv(tmp_path, range(1, 50), np.zeros(49))
    assert main(["rate", path, "--field", "feasibility"]) == 4


def test_rate_short_window(tmp_path):
    ks = np.arange(1, 101)
    path = _trace_csv(tmp_path, ks, 1.0 / ks)
    assert main(["rate", path, "--field", "feasibility", "--from", "10", "--to", "14"]) == 4


def test_rate_bad_schema(tmp_path, capsys):
    path = tmp_path / "x.csv"
    path.write_text("k,foo\n1,2\n")
    assert main(["rate", str(path), "--field", "feasibility"]) == 2
    assert "schema" in capsys.readouterr().err


def test_rate_missing_file(tmp_path):
    assert main(["rate", str(tmp_path / "none.csv"), "--field", "feasibility"]) == 2


def test_gen_writes_instances(tmp_path, capsys):
    cfg = _config(tmp_path, [], [{"name": "lad", "generator": "lad", "m": 4, "n": 9}])
    out = tmp_path / "inst"
    assert main(["gen", "--config", cfg, "--out", str(out)]) == 0
    doc = json.loads((out / "lad.json").read_text())
    assert isinstance(doc, dict)
    assert str(out / "lad.json") in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "pdsplit", "rate", str(tmp_path / "z.csv"),
                           "--field", "feasibility"], capture_output=True, text=True)
    assert proc.returncode == 2 and "z.csv" in proc.stderr
