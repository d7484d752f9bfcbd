import json
import os
import subprocess
import sys

import pytest

from stlftc.cli import EXIT_ERROR, EXIT_OK, EXIT_VIOLATED, main


def test_parse_writes_ast(tmp_path):
    assert main(["parse", "--scenario", "integrator", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "ast.json").exists()


def test_tree_is_idempotent(tmp_path, capsys):
    args = ["tree", "--scenario", "integrator", "--out", str(tmp_path)]
    assert main(args) == EXIT_OK
    first = (tmp_path / "tree.json").read_text()
    assert main(args) == EXIT_OK
    assert (tmp_path / "tree.json").read_text() == first
    out = capsys.readouterr().out
    assert "X5" in out and "f5" in out


def test_feasible_matches_golden(tmp_path):
    assert main(["feasible", "--scenario", "gridworld", "--out", str(tmp_path), "--check"]) == EXIT_OK


def test_reach_regions_match_golden(tmp_path):
    assert main(["reach", "--scenario", "integrator", "--out", str(tmp_path), "--check"]) == EXIT_OK
    regions = json.loads((tmp_path / "regions.json").read_text())
    assert regions


def test_simulate_and_monitor_fault(tmp_path):
    sim_dir, mon_dir = tmp_path / "sim", tmp_path / "mon"
    assert main(["simulate", "--scenario", "integrator_fault", "--out", str(sim_dir)]) == EXIT_VIOLATED
    traj = sim_dir / "trajectory.csv"
    rc = main(["monitor", "--scenario", "integrator_fault", "--trajectory", str(traj), "--out", str(mon_dir)])
    assert rc == EXIT_VIOLATED
    summary = json.loads((mon_dir / "summary.json").read_text())
    assert summary["alarm_step"] == 6


def test_reproduce_unicycle(tmp_path):
    assert main(["reproduce", "unicycle", "--out", str(tmp_path), "--check"]) == EXIT_OK


def test_reproduce_integrator_check_reports_reference_mismatches(tmp_path, capsys):
    # the reference encoding and barriers differ from the computed ones in a few
    # fields (see README "Known deviations"); the check must say so
    rc = main(["reproduce", "integrator", "--out", str(tmp_path), "--check"])
    out = capsys.readouterr().out
    assert rc == EXIT_ERROR
    assert "FAIL" in out
    assert (tmp_path / "summary.json").exists()


def test_errors_exit_one(tmp_path, capsys):
    assert main(["parse", "--scenario", str(tmp_path / "missing.json")]) == EXIT_ERROR
    assert "error:" in capsys.readouterr().err
    assert main(["simulate", "--scenario", "gridworld", "--out", str(tmp_path)]) == EXIT_ERROR


def test_bad_subcommand_exits_with_usage():
    with pytest.raises(SystemExit) as exc:
        main(["nope"])
    assert exc.value.code == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "stlftc", "--help"], capture_output=True, text=True,
                       env={**os.environ})
    assert r.returncode == 0 and "reproduce" in r.stdout
