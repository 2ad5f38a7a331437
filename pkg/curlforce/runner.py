"""Scenario execution and flat-file export."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
from rich.console import Console
from rich.table import Table

from .integrators import Termination, Trajectory, integrate
from .invariants import el_residual, invariant_reports
from .models import NoLagrangian
from .scenario import Scenario
from .trapping import Classification, SweepTable, TrapVerdict, classify, sweep, verdict_pair


logger = logging.getLogger(__name__)


TRAJECTORY_COLUMNS = ("t", "x", "y", "vx", "vy", "gamma", "gamma_x", "gamma_y", "H", "I", "E", "r")
INVARIANT_COLUMNS = {
    "H_nonrel": "H",
    "H_eff_rel": "H",
    "I_fradkin": "I",
    "E_legendre": "E",
}
SWEEP_RESULT_COLUMNS = ("verdict", "escape_time", "max_radius", "final_radius", "termination", "error")

CLASSIFICATION_STYLES = {
    Classification.TRAPPED: "green",
    Classification.ESCAPED: "red",
    Classification.UNDECIDED: "yellow",
}


@dataclass(frozen=True)
class RunArtifacts:
    trajectory_path: Path
    summary_path: Path
    summary: Dict[str, Any]
    trajectory: Trajectory


def format_value(value: Optional[float]) -> str:
    """17 significant digits, '.' decimal separator, empty for undefined values."""

    if value is None or not math.isfinite(value):
        return ""
    return format(value, ".17g")


def _json_number(value: Optional[float]) -> Optional[float]:
    if value is None or not math.isfinite(value):
        return None
    return float(value)


def atomic_write_text(path: Path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""

    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(temp_name, path)
    except BaseException:
        Path(temp_name).unlink(missing_ok=True)
        raise


# ----------------------------------------------------------------------
# Trajectory rows
# ----------------------------------------------------------------------
def trajectory_rows(traj: Trajectory) -> List[Dict[str, Optional[float]]]:
    """One mapping per sample keyed by :data:`TRAJECTORY_COLUMNS`."""

    series = {
        INVARIANT_COLUMNS[name]: values for name, values in traj.invariants.items()
    }
    rows: List[Dict[str, Optional[float]]] = []
    for index, (state, factors) in enumerate(zip(traj.samples, traj.factors)):
        row: Dict[str, Optional[float]] = {
            "t": state.t,
            "x": state.x,
            "y": state.y,
            "vx": state.vx,
            "vy": state.vy,
            "gamma": factors.gamma if factors else None,
            "gamma_x": factors.gamma_x if factors else None,
            "gamma_y": factors.gamma_y if factors else None,
            "H": None,
            "I": None,
            "E": None,
            "r": state.radius,
        }
        for column, values in series.items():
            row[column] = float(values[index])
        rows.append(row)
    return rows


def render_csv(traj: Trajectory) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TRAJECTORY_COLUMNS)
    for row in trajectory_rows(traj):
        writer.writerow([format_value(row[column]) for column in TRAJECTORY_COLUMNS])
    return buffer.getvalue()


def render_jsonl(traj: Trajectory) -> str:
    lines = [
        json.dumps({column: _json_number(row[column]) for column in TRAJECTORY_COLUMNS})
        for row in trajectory_rows(traj)
    ]
    return "\n".join(lines) + "\n"


def read_trajectory_csv(path: Path) -> Dict[str, np.ndarray]:
    """Read an exported trajectory back; empty fields become NaN."""

    with Path(path).open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or tuple(reader.fieldnames) != TRAJECTORY_COLUMNS:
            raise ValueError(f"{path} does not carry the trajectory header {','.join(TRAJECTORY_COLUMNS)}")
        columns: Dict[str, List[float]] = {name: [] for name in TRAJECTORY_COLUMNS}
        for record in reader:
            for name in TRAJECTORY_COLUMNS:
                text = record[name]
                columns[name].append(float(text) if text else math.nan)
    return {name: np.array(values, dtype=float) for name, values in columns.items()}


# ----------------------------------------------------------------------
# Summaries
# ----------------------------------------------------------------------
def verdict_document(verdict: TrapVerdict) -> Dict[str, Any]:
    return {
        "classification": verdict.classification.value,
        "escape_time": _json_number(verdict.escape_time),
        "max_radius": _json_number(verdict.max_radius),
        "final_radius": _json_number(verdict.final_radius),
    }


def build_summary(
    scenario: Scenario,
    traj: Trajectory,
    drifts: Mapping[str, float],
    residual_max: Optional[float],
) -> Dict[str, Any]:
    verdict = classify(traj, scenario.trapping)
    short, long_ = verdict_pair(traj, scenario.trapping)
    return {
        "scenario": scenario.name,
        "model": scenario.model.model_id,
        "termination": traj.termination.value,
        "message": traj.message,
        "verdict": verdict_document(verdict),
        "verdict_h20": verdict_document(short),
        "verdict_h200": verdict_document(long_),
        "escape_time": _json_number(verdict.escape_time),
        "max_radius": _json_number(verdict.max_radius),
        "final_radius": _json_number(verdict.final_radius),
        "invariant_drifts": {name: _json_number(value) for name, value in drifts.items()},
        "el_residual_max": _json_number(residual_max),
        "samples": len(traj),
    }


class ScenarioRunner:
    """Runs scenarios and sweeps, writes their files and reports through ``console``."""

    def __init__(self, console: Optional[Console] = None) -> None:
        self._console = console or Console()

    # ------------------------------------------------------------------
    def run(self, scenario: Scenario) -> RunArtifacts:
        model = scenario.model
        traj = integrate(model, scenario.initial_state, scenario.integrator)
        if traj.termination is not Termination.COMPLETED:
            logger.info("Scenario %s stopped early: %s", scenario.name, traj.message)

        names = scenario.outputs.invariants
        reports = invariant_reports(model, traj, names)
        traj = replace(traj, invariants={name: report.series for name, report in reports.items()})
        drifts = {name: report.max_rel_drift for name, report in reports.items()}
        residual_max = self._residual_max(scenario, traj)

        summary = build_summary(scenario, traj, drifts, residual_max)
        out_dir = scenario.outputs.dir
        fmt = scenario.outputs.format
        trajectory_path = out_dir / f"{scenario.name}.{fmt}"
        summary_path = out_dir / f"{scenario.name}.summary.json"
        text = render_csv(traj) if fmt == "csv" else render_jsonl(traj)
        atomic_write_text(trajectory_path, text)
        atomic_write_text(summary_path, json.dumps(summary, indent=2, allow_nan=False) + "\n")
        logger.debug("Wrote %s and %s", trajectory_path, summary_path)

        self._print_summary(summary, trajectory_path)
        return RunArtifacts(trajectory_path, summary_path, summary, traj)

    def _residual_max(self, scenario: Scenario, traj: Trajectory) -> Optional[float]:
        if not scenario.outputs.el_residual:
            return None
        if len(traj) < 3:
            logger.info("Trajectory too short for an Euler-Lagrange residual")
            return None
        try:
            return el_residual(scenario.model, traj).max()
        except NoLagrangian as exc:
            logger.info("Skipping Euler-Lagrange residual: %s", exc)
            return None

    def _print_summary(self, summary: Mapping[str, Any], trajectory_path: Path) -> None:
        table = Table(title=f"Scenario {summary['scenario']} ({summary['model']})")
        table.add_column("Quantity")
        table.add_column("Value", justify="right")
        table.add_row("termination", str(summary["termination"]))
        for key in ("verdict", "verdict_h20", "verdict_h200"):
            classification = Classification(summary[key]["classification"])
            style = CLASSIFICATION_STYLES[classification]
            table.add_row(key, f"[{style}]{classification.value}[/]")
        for key in ("escape_time", "max_radius", "final_radius", "el_residual_max"):
            value = summary[key]
            table.add_row(key, "-" if value is None else f"{value:.6g}")
        for name, drift in summary["invariant_drifts"].items():
            table.add_row(f"drift {name}", "-" if drift is None else f"{drift:.3e}")
        table.add_row("samples", str(summary["samples"]))
        self._console.print(table)
        self._console.print(f"Trajectory written to {trajectory_path}")

    # ------------------------------------------------------------------
    def sweep(
        self,
        scenario: Scenario,
        grid: Mapping[str, Sequence[float]],
        *,
        workers: Optional[int] = None,
    ) -> tuple[SweepTable, Path]:
        table = sweep(
            scenario.model,
            grid,
            scenario.initial_state,
            scenario.integrator,
            scenario.trapping,
            workers=workers,
        )
        path = scenario.outputs.dir / f"{scenario.name}.sweep.csv"
        atomic_write_text(path, render_sweep_csv(table))
        self._print_sweep(scenario, table)
        self._console.print(f"Sweep written to {path}")
        return table, path

    def _print_sweep(self, scenario: Scenario, table: SweepTable) -> None:
        view = Table(title=f"Sweep {scenario.name} ({scenario.model.model_id})")
        for name in table.parameter_names:
            view.add_column(name, justify="right")
        view.add_column("Verdict")
        view.add_column("Escape time", justify="right")
        view.add_column("Max radius", justify="right")
        view.add_column("Note")
        for row in table.rows:
            verdict = row.verdict
            style = CLASSIFICATION_STYLES[verdict.classification]
            view.add_row(
                *(f"{row.values[name]:.6g}" for name in table.parameter_names),
                f"[{style}]{verdict.classification.value}[/]",
                "-" if verdict.escape_time is None else f"{verdict.escape_time:.6g}",
                f"{verdict.max_radius:.6g}",
                row.error or (verdict.cause if verdict.termination is not Termination.COMPLETED else ""),
            )
        self._console.print(view)


def render_sweep_csv(table: SweepTable) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow((*table.parameter_names, *SWEEP_RESULT_COLUMNS))
    for row in table.rows:
        verdict = row.verdict
        writer.writerow(
            (
                *(format_value(row.values[name]) for name in table.parameter_names),
                verdict.classification.value,
                format_value(verdict.escape_time),
                format_value(verdict.max_radius),
                format_value(verdict.final_radius),
                verdict.termination.value,
                row.error or verdict.cause,
            )
        )
    return buffer.getvalue()


def run_scenario(scenario: Scenario, console: Optional[Console] = None) -> RunArtifacts:
    """Integrate ``scenario`` and write its trajectory file and summary document."""

    return ScenarioRunner(console).run(scenario)
