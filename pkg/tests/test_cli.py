import csv
import json
import pathlib

import pytest

from teamcomm.cli import (
    main,
    strategy_from_json,
    strategy_to_json,
    tree_from_json,
    tree_to_json,
)
from teamcomm.model import validate_model
from teamcomm.solver import SolveConfig, solve
from teamcomm.strategy import SeededRandomTeamStrategy, materialize_history_strategy

from conftest import SCENARIOS, load_raw, tiny_model

S1 = str(SCENARIOS / "s1.json")
S1_ENC = str(SCENARIOS / "s1_encrypted.json")
ONESTEP = str(SCENARIOS / "onestep.json")


@pytest.fixture()
def tree_path(tmp_path):
    out = tmp_path / "s1.tree"
    rc = main(["solve", "--scenario", S1, "--deterministic-only", "--out", str(out)])
    assert rc == 0
    return out


def test_solve_summary_line(tmp_path, capsys):
    out = tmp_path / "t.tree"
    rc = main(["solve", "--scenario", S1, "--comm-grid", "2", "--ctrl-grid", "2",
               "--out", str(out)])
    captured = capsys.readouterr().out
    assert rc == 0
    assert "value=" in captured and "nodes=" in captured and "simplex-grid(2)" in captured
    assert out.exists()


def test_solve_validation_error_exit_2(tmp_path, capsys):
    bad = load_raw("s1")
    bad["local_kernel_1"]["stationary"][0][1][0] = ["3/5", "3/5"]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(bad))
    rc = main(["solve", "--scenario", str(p), "--out", str(tmp_path / "x.tree")])
    assert rc == 2
    err = capsys.readouterr().err
    assert "NonStochasticKernel" in err and "local_kernel_1[t=0][x0=0][x=1][u=0]" in err


def test_solve_cap_exceeded_exit_3(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("CIB_MAX_NODES", "2")
    rc = main(["solve", "--scenario", S1, "--out", str(tmp_path / "x.tree")])
    assert rc == 3


def test_tree_round_trip(tree_path):
    model = validate_model(load_raw("s1"))
    data = json.loads(pathlib.Path(tree_path).read_text())
    tree = tree_from_json(data)
    again = tree_to_json(tree)
    assert json.dumps(again, sort_keys=True) == json.dumps(data, sort_keys=True)
    fresh = solve(model, SolveConfig(("det",), ("det",)))
    assert tree.root_value == fresh.root_value
    assert set(tree.nodes) == set(fresh.nodes)


def test_simulate_deterministic_across_runs_and_threads(tmp_path, tree_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    c = tmp_path / "c.csv"
    base = ["simulate", "--scenario", S1, "--tree", str(tree_path),
            "--episodes", "150", "--seed", "9", "--adversary", "best-response"]
    assert main(base + ["--out", str(a)]) == 0
    assert main(base + ["--out", str(b)]) == 0
    assert main(base + ["--threads", "4", "--out", str(c)]) == 0
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()
    with open(a) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["episode", "t", "x0", "x1", "x2", "m1", "m2", "zer", "ua",
                       "u1", "u2", "stage_cost", "comm_cost"]
    assert len(rows) == 1 + 150 * 2


def test_simulate_hash_mismatch_exit_4(tmp_path, tree_path):
    other = load_raw("s1")
    other["comm_cost"][0][0][0] = "1/2"
    p = tmp_path / "other.json"
    p.write_text(json.dumps(other))
    rc = main(["simulate", "--scenario", str(p), "--tree", str(tree_path),
               "--episodes", "3", "--out", str(tmp_path / "x.csv")])
    assert rc == 4


def test_check_saddle_pass(tmp_path, tree_path, capsys):
    out = tmp_path / "checks.csv"
    rc = main(["check", "--property", "saddle", "--scenario", S1,
               "--tree", str(tree_path), "--out", str(out)])
    assert rc == 0
    assert "PASS" in capsys.readouterr().out
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["property", "location", "deviation"]


def test_check_saddle_fail_on_tampered_tree(tmp_path, tree_path, capsys):
    data = json.loads(pathlib.Path(tree_path).read_text())
    data["root_value"] += 0.5
    bad = tmp_path / "tampered.tree"
    bad.write_text(json.dumps(data))
    rc = main(["check", "--property", "saddle", "--scenario", S1,
               "--tree", str(bad), "--out", str(tmp_path / "c.csv")])
    assert rc == 1
    assert "FAIL" in capsys.readouterr().out


def test_check_ci_and_reduction(tmp_path, capsys):
    rc = main(["check", "--property", "ci", "--scenario", ONESTEP, "--seed", "3",
               "--pairs", "2", "--out", str(tmp_path / "ci.csv")])
    assert rc == 0
    rc = main(["check", "--property", "reduction", "--scenario", ONESTEP,
               "--seed", "5", "--out", str(tmp_path / "red.csv")])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 2


def test_check_anchor(tmp_path, capsys):
    rc = main(["check", "--property", "anchor", "--scenario", S1_ENC, "--seed", "2",
               "--out", str(tmp_path / "a.csv")])
    assert rc == 0
    assert "PASS" in capsys.readouterr().out


def test_evaluate_against_fixed_strategy_file(tmp_path, tree_path):
    model = validate_model(load_raw("s1"))
    strat = materialize_history_strategy(model, SeededRandomTeamStrategy(12))
    sp = tmp_path / "team.json"
    sp.write_text(json.dumps(strategy_to_json(strat)))
    out = tmp_path / "eval.csv"
    rc = main(["evaluate", "--scenario", S1, "--strategy", str(sp),
               "--adversary", "uniform", "--out", str(out)])
    assert rc == 0
    with open(out) as fh:
        rows = {r[0]: r[1] for r in list(csv.reader(fh))[1:]}
    assert "exact_cost[uniform]" in rows


def test_strategy_file_round_trip(tmp_path):
    model = tiny_model()
    strat = materialize_history_strategy(model, SeededRandomTeamStrategy(3))
    blob = strategy_to_json(strat)
    again = strategy_from_json(json.loads(json.dumps(blob)))
    assert again.tables == strat.tables
    assert again.scenario_hash == strat.scenario_hash


def test_reduce_check_report(tmp_path, capsys):
    out = tmp_path / "artifacts.json"
    report = tmp_path / "report.csv"
    rc = main(["reduce", "--scenario", ONESTEP, "--seed", "4", "--check",
               "--out", str(out), "--report", str(report)])
    assert rc == 0
    assert "PASS" in capsys.readouterr().out
    data = json.loads(out.read_text())
    assert data["kind"] == "reduction-artifacts"
    with open(report) as fh:
        rows = list(csv.reader(fh))
    assert any("max_gap_all_strategies" in r[1] for r in rows[1:])


def test_solve_with_constraints_flag(tmp_path, capsys):
    tc = str(SCENARIOS / "team_constrained.json")
    out = tmp_path / "tc.tree"
    rc = main(["solve", "--scenario", tc, "--deterministic-only",
               "--constraints", "1:2:2", "--out", str(out)])
    assert rc == 0
    data = json.loads(out.read_text())
    assert data["constraints"] == {"s_min": 1, "s_max": 2, "n_max": 2, "initial_clock": 1}
    # four-part form pins the initial clock explicitly
    rc = main(["solve", "--scenario", tc, "--deterministic-only",
               "--constraints", "1:3:2:0", "--out", str(out)])
    assert rc == 0
    assert json.loads(out.read_text())["constraints"]["initial_clock"] == 0


def test_mode_override_changes_hash(tmp_path):
    out1 = tmp_path / "a.tree"
    out2 = tmp_path / "b.tree"
    assert main(["solve", "--scenario", S1, "--deterministic-only", "--out", str(out1)]) == 0
    assert main(["solve", "--scenario", S1, "--mode", "encrypted"]) == 3  # cap: encrypted det enumeration explodes
    data1 = json.loads(out1.read_text())
    assert data1["mode"] == "maxinfo"
