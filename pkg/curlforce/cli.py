"""Command line interface for curlforce."""
from __future__ import annotations

import argparse
import logging
from dataclasses import fields
from pathlib import Path
from typing import Dict, Sequence, Tuple

import numpy as np
from rich.console import Console
from rich.table import Table

from .checks import run_checks
from .models import available_models
from .runner import ScenarioRunner
from .scenario import (
    OUTPUT_FORMATS,
    Scenario,
    ScenarioError,
    ValidationError,
    apply_overrides,
    available_presets,
    load_scenario,
)


logger = logging.getLogger(__name__)


LOG_LEVEL_CHOICES = ["critical", "error", "warning", "info", "debug"]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID = 2
EXIT_IO = 3


def parse_vary(text: str) -> Tuple[str, np.ndarray]:
    """Parse ``key=start:stop:count`` into a name and a linspace grid."""

    try:
        key, _, bounds = text.partition("=")
        start, stop, count = bounds.split(":")
        values = np.linspace(float(start), float(stop), int(count))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"Expected key=start:stop:count, got '{text}'"
        ) from exc
    if not key or len(values) == 0:
        raise argparse.ArgumentTypeError(f"Expected key=start:stop:count with count >= 1, got '{text}'")
    return key.strip(), values


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out-dir", type=Path, help="Directory for trajectory and summary files")
    parser.add_argument("--format", dest="output_format", choices=OUTPUT_FORMATS, help="Trajectory file format")
    parser.add_argument("--rtol", type=float, help="Relative tolerance of the adaptive integrator")
    parser.add_argument("--dt", type=float, help="Fixed step (rk4) or initial step (rk54)")
    parser.add_argument("--t-end", type=float, help="Final integration time (normalized units)")
    parser.add_argument(
        "--freeze-gamma-phase",
        action="store_true",
        default=None,
        help="Use Γ=1 inside the 2Γωt drive phase",
    )
    parser.add_argument("--horizon", type=float, help="Trapping classification horizon")
    parser.add_argument("--r-escape", type=float, help="Escape radius")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Curl-force and relativistic Kapitza simulator")
    parser.add_argument(
        "--log-level",
        choices=LOG_LEVEL_CHOICES,
        default="warning",
        help=(
            "Python logging level to use for troubleshooting output. "
            "Use 'debug' to trace integrator steps and scenario parsing."
        ),
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    presets = ", ".join(spec.key for spec in available_presets())
    run = subparsers.add_parser("run", help="Integrate one scenario and export its trajectory")
    run.add_argument("scenario", help=f"Scenario JSON file or preset name ({presets})")
    _add_run_options(run)

    sweep = subparsers.add_parser("sweep", help="Classify trapping over a parameter grid")
    sweep.add_argument("scenario", help="Scenario JSON file or preset name")
    sweep.add_argument(
        "--vary",
        action="append",
        type=parse_vary,
        required=True,
        metavar="KEY=START:STOP:COUNT",
        help="Parameter axis to sweep; repeat for a cartesian grid",
    )
    sweep.add_argument("--workers", type=int, default=None, help="Worker processes for sweep rows")
    _add_run_options(sweep)

    presets_parser = subparsers.add_parser("presets", help="Inspect the figure presets")
    presets_parser.add_argument("action", choices=["list"])

    subparsers.add_parser("models", help="List the available force models")
    subparsers.add_parser("check", help="Run the invariant and oracle suite")
    return parser


def _load(args: argparse.Namespace) -> Scenario:
    scenario = load_scenario(args.scenario)
    return apply_overrides(
        scenario,
        rtol=args.rtol,
        dt=args.dt,
        t_end=args.t_end,
        horizon=args.horizon,
        r_escape=args.r_escape,
        freeze_gamma_phase=args.freeze_gamma_phase,
        out_dir=args.out_dir,
        output_format=args.output_format,
    )


def _check_sweep_keys(scenario: Scenario, grid: Dict[str, np.ndarray]) -> None:
    allowed = [spec.name for spec in fields(scenario.model.params)]
    if scenario.model.is_relativistic:
        allowed.append("c")
    for key in grid:
        if key not in allowed:
            raise ValidationError("--vary", f"cannot vary '{key}'. Allowed: {', '.join(allowed)}")


def _print_presets(console: Console) -> None:
    table = Table(title="Figure presets")
    table.add_column("Preset")
    table.add_column("Model")
    table.add_column("Description")
    for spec in available_presets():
        table.add_row(spec.key, str(spec.document["model"]), spec.label)
    console.print(table)


def _print_models(console: Console) -> None:
    table = Table(title="Force models")
    table.add_column("Model")
    table.add_column("Description")
    table.add_column("Relativistic")
    table.add_column("Lagrangian")
    for spec in available_models():
        table.add_row(
            spec.key,
            spec.label,
            "yes" if spec.relativistic else "no",
            "yes" if spec.has_lagrangian else "no",
        )
    console.print(table)


def _run_check(console: Console) -> int:
    results = run_checks()
    table = Table(title="curlforce check")
    table.add_column("Check")
    table.add_column("Result")
    table.add_column("Detail")
    for result in results:
        status = "[green]PASS[/]" if result.passed else "[red]FAIL[/]"
        table.add_row(result.name, status, result.detail)
    console.print(table)
    failed = [result.name for result in results if not result.passed]
    if failed:
        console.print(f"[red]{len(failed)} check(s) failed:[/] {', '.join(failed)}")
        return EXIT_CHECK_FAILED
    console.print(f"[green]All {len(results)} checks passed[/]")
    return EXIT_OK


def main(argv: Sequence[str] | None = None, *, console: Console | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        format="%(levelname)s:%(name)s:%(message)s",
        force=True,
    )

    console = console or Console()

    if args.command == "presets":
        _print_presets(console)
        return EXIT_OK
    if args.command == "models":
        _print_models(console)
        return EXIT_OK
    if args.command == "check":
        return _run_check(console)

    runner = ScenarioRunner(console)
    try:
        scenario = _load(args)
        if args.command == "run":
            runner.run(scenario)
        else:
            grid: Dict[str, np.ndarray] = dict(args.vary)
            _check_sweep_keys(scenario, grid)
            runner.sweep(scenario, grid, workers=args.workers)
    except ScenarioError as exc:
        console.print(f"[red]Invalid scenario:[/] {exc}")
        return EXIT_INVALID
    except OSError as exc:
        console.print(f"[red]I/O error:[/] {exc}")
        return EXIT_IO
    except ValueError as exc:
        console.print(f"[red]Invalid input:[/] {exc}")
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover - CLI entry point
    raise SystemExit(main())
