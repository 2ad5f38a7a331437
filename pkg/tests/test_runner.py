import json
import math
from pathlib import Path

import numpy as np
import pytest

from curlforce.runner import (
    TRAJECTORY_COLUMNS,
    ScenarioRunner,
    atomic_write_text,
    format_value,
    read_trajectory_csv,
    run_scenario,
)
from curlforce.scenario import apply_overrides, resolve_preset, scenario_from_document


SUMMARY_KEYS = {
    "scenario",
    "model",
    "termination",
    "message",
    "verdict",
    "verdict_h20",
    "verdict_h200",
    "escape_time",
    "max_radius",
    "final_radius",
    "invariant_drifts",
    "el_residual_max",
    "samples",
}


def oscillator_scenario(out_dir: Path, **outputs):
    return scenario_from_document(
        {
            "name": "oscillator",
            "model": "kapitza",
            "params": {"k": 1.0, "b": 0.0, "convention": "shaft"},
            "initial_conditions": {"x": 1.0},
            "integrator": {"method": "rk4_fixed", "dt": 1e-3, "t_end": 1.0},
            "trapping": {"horizon": 1.0},
            "outputs": {"dir": str(out_dir), **outputs},
        }
    )


def test_format_value() -> None:
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(2.0) == "2"
    assert format_value(None) == ""
    assert format_value(math.nan) == ""


def test_atomic_write_creates_parent_directories(tmp_path: Path) -> None:
    target = tmp_path / "nested" / "deeper" / "file.txt"
    atomic_write_text(target, "hello\n")
    assert target.read_text(encoding="utf-8") == "hello\n"
    assert [p.name for p in target.parent.iterdir()] == ["file.txt"]


def test_run_writes_csv_and_summary(tmp_path: Path, console) -> None:
    artifacts = ScenarioRunner(console).run(oscillator_scenario(tmp_path))
    assert artifacts.trajectory_path == tmp_path / "oscillator.csv"
    assert artifacts.summary_path == tmp_path / "oscillator.summary.json"

    lines = artifacts.trajectory_path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(TRAJECTORY_COLUMNS)
    assert len(lines) == 1002
    first = dict(zip(TRAJECTORY_COLUMNS, lines[1].split(",")))
    assert first["t"] == "0"
    assert first["x"] == "1"
    assert first["gamma"] == ""
    assert first["E"] == ""
    assert first["H"] == "0.5"
    assert first["r"] == "1"

    summary = json.loads(artifacts.summary_path.read_text(encoding="utf-8"))
    assert set(summary) == SUMMARY_KEYS
    assert summary == artifacts.summary
    assert summary["samples"] == 1001
    assert summary["termination"] == "completed"
    assert summary["verdict"]["classification"] == "Trapped"
    assert set(summary["invariant_drifts"]) == {"H_nonrel", "I_fradkin"}
    assert summary["el_residual_max"] is None
    assert console.printed


def test_rerun_is_byte_identical(tmp_path: Path, console) -> None:
    first = run_scenario(oscillator_scenario(tmp_path / "a"), console)
    second = run_scenario(oscillator_scenario(tmp_path / "b"), console)
    assert first.trajectory_path.read_bytes() == second.trajectory_path.read_bytes()
    assert first.summary_path.read_bytes() == second.summary_path.read_bytes()


def test_csv_reads_back_exactly(tmp_path: Path, console) -> None:
    artifacts = run_scenario(oscillator_scenario(tmp_path), console)
    columns = read_trajectory_csv(artifacts.trajectory_path)
    data = artifacts.trajectory.as_array()
    for index, name in enumerate(("t", "x", "y", "vx", "vy")):
        np.testing.assert_array_equal(columns[name], data[:, index])
    assert np.all(np.isnan(columns["gamma"]))
    np.testing.assert_array_equal(columns["H"], artifacts.trajectory.invariants["H_nonrel"])


def test_read_rejects_foreign_header(tmp_path: Path) -> None:
    path = tmp_path / "other.csv"
    path.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(ValueError, match="trajectory header"):
        read_trajectory_csv(path)


def test_requested_invariants_only(tmp_path: Path, console) -> None:
    artifacts = run_scenario(oscillator_scenario(tmp_path, invariants=["I_fradkin"]), console)
    assert set(artifacts.summary["invariant_drifts"]) == {"I_fradkin"}
    first = dict(zip(TRAJECTORY_COLUMNS, artifacts.trajectory_path.read_text().splitlines()[1].split(",")))
    assert first["H"] == ""
    assert first["I"] == "0"


def test_relativistic_run_fills_lorentz_columns(tmp_path: Path, console) -> None:
    scenario = apply_overrides(resolve_preset("fig3_rel").build(), t_end=2.0, out_dir=tmp_path)
    artifacts = run_scenario(scenario, console)
    columns = read_trajectory_csv(artifacts.trajectory_path)
    assert columns["gamma"][0] == 1.0
    assert np.all(np.isfinite(columns["gamma"]))
    assert np.all(np.isnan(columns["E"]))
    # the horizon of 200 is not reached
    assert artifacts.summary["verdict"]["classification"] == "Undecided"
    assert artifacts.summary["verdict_h20"]["classification"] == "Undecided"


def test_jsonl_output(tmp_path: Path, console) -> None:
    artifacts = run_scenario(oscillator_scenario(tmp_path, format="jsonl"), console)
    assert artifacts.trajectory_path.suffix == ".jsonl"
    lines = artifacts.trajectory_path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1001
    record = json.loads(lines[0])
    assert tuple(record) == TRAJECTORY_COLUMNS
    assert record["gamma"] is None
    assert record["x"] == 1.0


def test_el_residual_in_summary(tmp_path: Path, console) -> None:
    scenario = scenario_from_document(
        {
            "name": "rel",
            "model": "rel_kapitza",
            "params": {"k": 1.0, "b": 0.5},
            "relativity": {"c": 1.0},
            "initial_conditions": {"x": 0.5, "vy": 0.3},
            "integrator": {"rtol": 1e-10, "atol": 1e-12, "t_end": 2.0, "max_dt": 2e-3},
            "outputs": {"dir": str(tmp_path), "el_residual": True},
        }
    )
    summary = run_scenario(scenario, console).summary
    assert summary["el_residual_max"] <= 1e-4
    assert set(summary["invariant_drifts"]) == {"H_eff_rel", "E_legendre"}


def test_el_residual_skipped_without_lagrangian(tmp_path: Path, console) -> None:
    scenario = scenario_from_document(
        {
            "model": "flapping_newton",
            "params": {"A": 0.1, "omega": 0.5},
            "integrator": {"t_end": 1.0},
            "outputs": {"dir": str(tmp_path), "el_residual": True},
        }
    )
    assert run_scenario(scenario, console).summary["el_residual_max"] is None


def test_runner_sweep_writes_table(tmp_path: Path, console) -> None:
    scenario = oscillator_scenario(tmp_path)
    table, path = ScenarioRunner(console).sweep(scenario, {"k": [0.5, 1.0], "b": [0.0]})
    assert len(table) == 2
    lines = path.read_text(encoding="utf-8").splitlines()
    assert path == tmp_path / "oscillator.sweep.csv"
    assert lines[0] == "k,b,verdict,escape_time,max_radius,final_radius,termination,error"
    assert lines[1].startswith("0.5,0,Trapped,,")
    assert len(lines) == 3
