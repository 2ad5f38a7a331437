import json
from pathlib import Path

import numpy as np
import pytest

from curlforce.cli import EXIT_INVALID, EXIT_IO, EXIT_OK, build_parser, main, parse_vary


def write_scenario(tmp_path: Path, **overrides) -> Path:
    document = {
        "name": "channel",
        "model": "kapitza",
        "params": {"k": 1.0, "b": 0.0},
        "initial_conditions": {"y": 1e-3},
        "integrator": {"t_end": 5.0, "max_dt": 0.05},
        "trapping": {"horizon": 5.0},
    }
    document.update(overrides)
    path = tmp_path / "channel.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def test_run_twice_gives_identical_files(tmp_path: Path, console) -> None:
    path = write_scenario(tmp_path)
    outputs = []
    for name in ("first", "second"):
        out_dir = tmp_path / name
        assert main(["run", str(path), "--out-dir", str(out_dir)], console=console) == EXIT_OK
        outputs.append((out_dir / "channel.csv").read_bytes())
        assert (out_dir / "channel.summary.json").exists()
    assert outputs[0] == outputs[1]


def test_run_overrides(tmp_path: Path, console) -> None:
    path = write_scenario(tmp_path)
    argv = ["run", str(path), "--out-dir", str(tmp_path), "--format", "jsonl", "--t-end", "15", "--horizon", "15"]
    assert main(argv, console=console) == EXIT_OK
    summary = json.loads((tmp_path / "channel.summary.json").read_text(encoding="utf-8"))
    assert summary["verdict"]["classification"] == "Escaped"
    assert (tmp_path / "channel.jsonl").exists()


def test_preset_runs_are_byte_identical(tmp_path: Path, console) -> None:
    for name in ("first", "second"):
        assert main(["run", "fig1_nonrel", "--out-dir", str(tmp_path / name)], console=console) == EXIT_OK
    first = (tmp_path / "first" / "fig1_nonrel.csv").read_bytes()
    assert first == (tmp_path / "second" / "fig1_nonrel.csv").read_bytes()


def test_run_preset_with_frozen_phase(tmp_path: Path, console) -> None:
    argv = ["run", "fig1_rel", "--out-dir", str(tmp_path), "--t-end", "1", "--freeze-gamma-phase"]
    assert main(argv, console=console) == EXIT_OK
    assert (tmp_path / "fig1_rel.csv").exists()


def test_malformed_scenario_exits_invalid(tmp_path: Path, console) -> None:
    path = tmp_path / "broken.json"
    path.write_text("{ not json", encoding="utf-8")
    assert main(["run", str(path), "--out-dir", str(tmp_path)], console=console) == EXIT_INVALID
    assert "line 1" in console.text()


def test_schema_error_exits_invalid(tmp_path: Path, console) -> None:
    path = write_scenario(tmp_path, model="rel_kapitza")
    assert main(["run", str(path)], console=console) == EXIT_INVALID
    assert "relativity.c" in console.text()


def test_missing_file_exits_io(tmp_path: Path, console) -> None:
    assert main(["run", str(tmp_path / "nope.json")], console=console) == EXIT_IO


def test_presets_list(console) -> None:
    assert main(["presets", "list"], console=console) == EXIT_OK
    assert console.printed


def test_models(console) -> None:
    assert main(["models"], console=console) == EXIT_OK


def test_check_passes(console) -> None:
    assert main(["check"], console=console) == EXIT_OK
    assert "All 11 checks passed" in console.text()


def test_sweep_writes_grid(tmp_path: Path, console) -> None:
    path = write_scenario(tmp_path)
    argv = ["sweep", str(path), "--vary", "k=0.5:1.0:3", "--vary", "b=0:0.1:2", "--out-dir", str(tmp_path)]
    assert main(argv, console=console) == EXIT_OK
    lines = (tmp_path / "channel.sweep.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("k,b,verdict")
    assert len(lines) == 7


def test_sweep_rejects_unknown_parameter(tmp_path: Path, console) -> None:
    path = write_scenario(tmp_path)
    argv = ["sweep", str(path), "--vary", "omega=0:1:2", "--out-dir", str(tmp_path)]
    assert main(argv, console=console) == EXIT_INVALID
    assert "--vary" in console.text()


def test_parse_vary() -> None:
    key, values = parse_vary("omega=0.05:0.5:10")
    assert key == "omega"
    np.testing.assert_allclose(values, np.linspace(0.05, 0.5, 10))


def test_bad_vary_is_a_usage_error(tmp_path: Path) -> None:
    with pytest.raises(SystemExit) as excinfo:
        build_parser().parse_args(["sweep", "x.json", "--vary", "omega=0.5"])
    assert excinfo.value.code == 2


def test_subcommand_is_required() -> None:
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
