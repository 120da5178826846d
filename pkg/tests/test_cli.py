import math
import subprocess
import sys

import numpy as np
import pytest

from ddsched import cli
from ddsched.report import read_csv, read_json


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table_of(capsys, *argv, fmt="csv"):
    code, out, err = run(capsys, *argv, "--format", fmt)
    assert code == 0, err
    return read_csv(out) if fmt == "csv" else read_json(out)


def test_optimize_reference_point(capsys):
    t = table_of(capsys, "optimize", "--n", "200", "--lambda", "1/30")
    (rec,) = t.records()
    assert rec["status"] == "converged"
    assert rec["t_star"] == pytest.approx(0.6832, rel=1e-3)
    assert t.meta["config"]["lambda"] == "1/30"
    assert len(t.meta["config_sha256"]) == 64


def test_optimize_without_interior_optimum_is_not_an_error(capsys):
    t = table_of(capsys, "optimize", "--n", "50", "--lambda", "0.01")
    (rec,) = t.records()
    assert rec["status"] == "no_interior_optimum"
    assert rec["t_star"] is None


@pytest.mark.parametrize("argv", [
    ["cost", "--grid", "1:0.5:10"],
    ["cost", "--grid", "nonsense"],
    ["optimize", "--n", "-3"],
    ["optimize", "--lambda", "abc"],
    ["asymptotic", "--n-values", "1e4,1e5,1e6"],
    ["simulate", "--cycles", "10"],
    ["compare", "--dists", "weibull"],
])
def test_bad_input_exits_2(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2
    assert err.startswith("ddsched:")


def test_unknown_config_key_exits_2(capsys, tmp_path):
    ini = tmp_path / "bad.ini"
    ini.write_text("[model]\nn = 10\nbogus = 1\n")
    assert run(capsys, "optimize", "--config", str(ini))[0] == 2


def test_flags_override_config_file(capsys, tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[model]\nn = 50\nlambda = 1\n[optimize]\nrel_tol = 1e-10\n")
    t = table_of(capsys, "optimize", "--config", str(ini), "--n", "100")
    (rec,) = t.records()
    assert rec["n"] == 100
    assert t.meta["config"]["rel_tol"] == "1e-10"
    assert rec["t_star"] == pytest.approx(0.148555, rel=1e-5)


def test_table_check_flags_only_the_bad_row(capsys):
    code, out, err = run(capsys, "table", "--check")
    assert code == 3
    t = read_csv(out)
    bad = [(r["n"], r["lambda"]) for r in t.records() if not r["within_tol"]]
    assert bad == [(500, 1)]
    assert all(r["first_order_residual"] < 1e-8 for r in t.records())


def test_table_lambda_filter(capsys):
    t = table_of(capsys, "table", "--lambda-only", "1")
    assert len(t.rows) == 5
    code, out, _ = run(capsys, "table", "--lambda-only", "1/30", "--check")
    assert code == 0
    assert len(read_csv(out).rows) == 5


@pytest.mark.parametrize("argv", [
    ["table"],
    ["optimize", "--n", "321", "--lambda", "0.37"],
    ["cost", "--grid", "0.01:10:7", "--family", "n=50,100"],
    ["asymptotic"],
])
def test_csv_and_json_carry_the_same_values(capsys, argv):
    a = table_of(capsys, *argv, fmt="csv")
    b = table_of(capsys, *argv, fmt="json")
    assert a.columns == b.columns
    assert a.rows == b.rows
    assert a.meta == b.meta


def test_emitted_config_reproduces_output(capsys, tmp_path):
    ini = tmp_path / "cfg.ini"
    first = run(capsys, "simulate", "--n", "40", "--lambda", "2", "--cycles", "5000",
                "--seed", "17", "--policy", "gamma:3", "--emit-config", str(ini))
    again = run(capsys, "simulate", "--config", str(ini))
    assert first[0] == again[0] == 0
    assert first[1] == again[1]


def test_output_directory_from_environment(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("DDSCHED_OUTPUT_DIR", str(tmp_path / "out"))
    code, out, _ = run(capsys, "optimize", "--format", "json")
    assert code == 0 and out == ""
    t = read_json((tmp_path / "out" / "optimize.json").read_text())
    assert t.records()[0]["status"] == "converged"
    # '-' still forces stdout
    code, out, _ = run(capsys, "optimize", "--out", "-")
    assert read_csv(out).rows


def test_explicit_out_file(capsys, tmp_path):
    dest = tmp_path / "a" / "b.csv"
    assert run(capsys, "table", "--out", str(dest))[0] == 0
    assert len(read_csv(dest.read_text()).rows) == 10


def _minimum_location(t, col):
    costs = np.array(t.column(col), dtype=float)
    return int(np.argmin(costs)), costs


def test_cost_without_deadlocks_strictly_decreases(capsys):
    t = table_of(capsys, "cost", "--lambda", "0", "--grid", "0.001:100:100")
    costs = np.array(t.column("cost"))
    assert np.all(np.diff(costs) < 0)


def test_cost_curves_shift_with_n(capsys):
    t = table_of(capsys, "cost", "--family", "n=50,100,200,500,1000", "--layout", "wide",
                 "--grid", "0.005:1:400")
    mins = []
    for col in t.columns[1:]:
        k, costs = _minimum_location(t, col)
        d = np.sign(np.diff(costs))
        assert np.all(d[:k] < 0) and np.all(d[k:] > 0)
        mins.append(t.column("T")[k])
    assert all(a > b for a, b in zip(mins, mins[1:]))


def test_cost_curves_shift_with_lambda(capsys):
    t = table_of(capsys, "cost", "--n", "1000", "--family", "lambda=1,1/30,1/60,1/90,1/120",
                 "--layout", "wide", "--grid", "0.01:10:400")
    mins, levels = [], []
    for col in t.columns[1:]:
        k, costs = _minimum_location(t, col)
        mins.append(t.column("T")[k])
        levels.append(costs)
    # smaller lambda: later minimum, uniformly lower curve
    assert all(a < b for a, b in zip(mins, mins[1:]))
    assert all(np.all(a > b) for a, b in zip(levels, levels[1:]))


def test_simulate_agrees_with_analytic(capsys):
    t = table_of(capsys, "simulate", "--cycles", "20000", "--seed", "3")
    (rec,) = t.records()
    assert abs(rec["z_score"]) <= 5
    assert rec["mean_interval"] == pytest.approx(0.148555, rel=1e-5)


def test_simulate_needs_explicit_t_without_optimum(capsys):
    assert run(capsys, "simulate", "--n", "50", "--lambda", "0.01")[0] == 2
    assert run(capsys, "simulate", "--n", "50", "--lambda", "0.01", "--t", "2", "--cycles", "1000")[0] == 0


def test_simulate_validation_failure_exits_3(capsys, monkeypatch):
    monkeypatch.setattr(cli, "mean_cost_rate", lambda model, T: 0.0)
    code, out, err = run(capsys, "simulate", "--t", "0.5", "--cycles", "1000")
    assert code == 3
    assert "validation failed" in err
    assert read_csv(out).rows


def test_compare_rows(capsys):
    t = table_of(capsys, "compare", "--cycles", "20000", "--seed", "5")
    recs = t.records()
    assert recs[0]["policy"].startswith("fixed")
    assert [r["policy"].split("(")[0] for r in recs[1:]] == ["deterministic", "exponential", "uniform", "gamma"]
    assert recs[1]["delta_analytic"] == 0.0
    assert all(r["delta_analytic"] >= 0 for r in recs)
    assert not any(r["analytic_violation"] for r in recs)


def test_compare_analytic_violation_exits_3(capsys, monkeypatch):
    import ddsched.simulator as sim

    monkeypatch.setattr(sim, "random_schedule_cost", lambda model, d: 1.0)
    code, out, _ = run(capsys, "compare", "--t", "0.5", "--cycles", "1000", "--dists", "exponential")
    assert code == 3
    assert read_csv(out).records()[1]["analytic_violation"] is True


def test_asymptotic_check_and_rescaling(capsys):
    t = table_of(capsys, "asymptotic", "--check")
    assert t.meta["slope"] == pytest.approx(-1 / 3, abs=0.03)
    s = table_of(capsys, "asymptotic", "--lambda", "8")
    for a, b in zip(t.column("t_star"), s.column("t_star")):
        assert b == pytest.approx(a / 2, rel=1e-8)


def test_numerical_failure_exits_1(capsys):
    # lambda*n so small that every optimum lies beyond T = 1
    assert run(capsys, "asymptotic", "--lambda", "1e-9", "--n-values", "1,10,100,1000")[0] == 1


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "ddsched", "--version"], capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.startswith("ddsched ")
