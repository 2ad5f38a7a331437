"""Scenario documents, normalized units and the figure presets."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import MISSING, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

from .core import CurlForceError, PhaseState, RelativityParams
from .integrators import IntegratorConfig
from .invariants import INVARIANT_NAMES
from .models import ForceModel, resolve_model_spec
from .trapping import TrapCriteria


logger = logging.getLogger(__name__)


OUTPUT_FORMATS = ("csv", "jsonl")
RELATIVITY_MODES = ("nonrel", "rel")
DEFAULT_OUT_DIR = "out"

TOP_LEVEL_KEYS = (
    "name",
    "model",
    "params",
    "relativity",
    "options",
    "initial_conditions",
    "integrator",
    "trapping",
    "outputs",
    "normalization",
)


class ScenarioError(CurlForceError):
    """Base class for scenario loading problems."""


class ParseError(ScenarioError):
    """The document is not well-formed JSON."""

    def __init__(self, message: str, *, line: Optional[int] = None, column: Optional[int] = None) -> None:
        location = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{location}")
        self.line = line
        self.column = column


class ValidationError(ScenarioError):
    """The document is well-formed but does not match the scenario schema."""

    def __init__(self, key: str, message: str) -> None:
        super().__init__(f"{key}: {message}")
        self.key = key


# ----------------------------------------------------------------------
# Normalized units
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class NormalizationScheme:
    """Reference frequency ``omega_c`` and light speed ``c`` of physical inputs."""

    omega_c: float = 1.0
    c: float = 1.0

    def __post_init__(self) -> None:
        if not (self.omega_c > 0 and self.c > 0):
            raise ValueError(
                f"omega_c and c must be positive, got omega_c={self.omega_c!r}, c={self.c!r}"
            )

    def factor(self, kind: str) -> float:
        """Multiplier taking a physical value of ``kind`` to normalized units."""

        w, c = self.omega_c, self.c
        factors = {
            "length": w / c,
            "velocity": 1.0 / c,
            "acceleration": 1.0 / (w * c),
            "time": w,
            "frequency": 1.0 / w,
            "stiffness": 1.0 / (w * w),
            "alpha": c / w,
            "monkey": c / (w * w * w),
        }
        try:
            return factors[kind]
        except KeyError as exc:
            raise ValueError(
                f"Unknown quantity kind '{kind}'. Available: {', '.join(factors)}"
            ) from exc


QUANTITY_KINDS: Dict[str, str] = {
    "x": "length",
    "y": "length",
    "r_escape": "length",
    "r_floor": "length",
    "vx": "velocity",
    "vy": "velocity",
    "ax": "acceleration",
    "ay": "acceleration",
    "t": "time",
    "t0": "time",
    "dt": "time",
    "t_end": "time",
    "max_dt": "time",
    "horizon": "time",
    "omega": "frequency",
    "Lambda": "stiffness",
    "A": "stiffness",
    "k": "stiffness",
    "b": "stiffness",
    "a": "stiffness",
    "c_pot": "stiffness",
    "alpha1": "alpha",
    "alpha2": "alpha",
    "k1": "monkey",
    "k2": "monkey",
}


def _scale(
    raw: Mapping[str, float],
    n: NormalizationScheme,
    kinds: Optional[Mapping[str, str]],
    inverse: bool,
) -> Dict[str, float]:
    kinds = QUANTITY_KINDS if kinds is None else kinds
    scaled: Dict[str, float] = {}
    for name, value in raw.items():
        if name not in kinds:
            raise ValueError(
                f"No normalization rule for '{name}'. Available: {', '.join(sorted(kinds))}"
            )
        factor = n.factor(kinds[name])
        scaled[name] = value / factor if inverse else value * factor
    return scaled


def normalize(
    raw: Mapping[str, float], n: NormalizationScheme, kinds: Optional[Mapping[str, str]] = None
) -> Dict[str, float]:
    """Map physical values onto dimensionless ones (x → xω_c/c, v → v/c, t → tω_c, ...)."""

    return _scale(raw, n, kinds, inverse=False)


def denormalize(
    values: Mapping[str, float], n: NormalizationScheme, kinds: Optional[Mapping[str, str]] = None
) -> Dict[str, float]:
    return _scale(values, n, kinds, inverse=True)


def normalize_coefficients(coeffs: Sequence[float], n: NormalizationScheme) -> Tuple[float, ...]:
    """Scale ascending polynomial coefficients: βᵢ of degree i → βᵢ(ω_c²/c²)ⁱ."""

    ratio = (n.omega_c * n.omega_c) / (n.c * n.c)
    return tuple(float(value) * ratio**degree for degree, value in enumerate(coeffs))


def denormalize_coefficients(coeffs: Sequence[float], n: NormalizationScheme) -> Tuple[float, ...]:
    ratio = (n.omega_c * n.omega_c) / (n.c * n.c)
    return tuple(float(value) / ratio**degree for degree, value in enumerate(coeffs))


# ----------------------------------------------------------------------
# Scenario
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class OutputOptions:
    dir: Path = Path(DEFAULT_OUT_DIR)
    format: str = "csv"
    invariants: Optional[Tuple[str, ...]] = None
    el_residual: bool = False

    def __post_init__(self) -> None:
        if self.format not in OUTPUT_FORMATS:
            raise ValueError(
                f"Unknown output format '{self.format}'. Available: {', '.join(OUTPUT_FORMATS)}"
            )
        if self.invariants is not None:
            for name in self.invariants:
                if name not in INVARIANT_NAMES:
                    raise ValueError(
                        f"Unknown invariant '{name}'. Available: {', '.join(INVARIANT_NAMES)}"
                    )


@dataclass(frozen=True)
class Scenario:
    """A fully validated, normalized run description."""

    name: str
    model: ForceModel
    initial_state: PhaseState
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    trapping: TrapCriteria = field(default_factory=TrapCriteria)
    outputs: OutputOptions = field(default_factory=OutputOptions)
    normalization: Optional[NormalizationScheme] = None


def _expect_object(value: Any, key: str) -> Dict[str, Any]:
    if not isinstance(value, dict):
        raise ValidationError(key, f"expected an object, got {type(value).__name__}")
    return value


def _check_keys(block: Mapping[str, Any], allowed: Sequence[str], prefix: str) -> None:
    for key in block:
        if key not in allowed:
            path = f"{prefix}.{key}" if prefix else key
            raise ValidationError(path, f"unknown key. Allowed: {', '.join(allowed)}")


def _number(value: Any, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(key, f"expected a number, got {value!r}")
    # json.loads accepts NaN and Infinity
    if not math.isfinite(value):
        raise ValidationError(key, f"expected a finite number, got {value!r}")
    return float(value)


def _integer(value: Any, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(key, f"expected an integer, got {value!r}")
    return value


def _boolean(value: Any, key: str) -> bool:
    if not isinstance(value, bool):
        raise ValidationError(key, f"expected true or false, got {value!r}")
    return value


def _string(value: Any, key: str) -> str:
    if not isinstance(value, str) or not value:
        raise ValidationError(key, f"expected a non-empty string, got {value!r}")
    return value


def _number_list(value: Any, key: str) -> Tuple[float, ...]:
    if not isinstance(value, list):
        raise ValidationError(key, f"expected a list of numbers, got {value!r}")
    return tuple(_number(item, f"{key}[{i}]") for i, item in enumerate(value))


def _normalize_block(
    values: Dict[str, Any], n: Optional[NormalizationScheme]
) -> Dict[str, Any]:
    if n is None:
        return values
    scaled = dict(values)
    numeric = {
        name: value
        for name, value in values.items()
        if name in QUANTITY_KINDS and isinstance(value, float)
    }
    scaled.update(normalize(numeric, n))
    for name in ("g_coeffs", "f_coeffs"):
        if name in values:
            scaled[name] = normalize_coefficients(values[name], n)
    return scaled


def _parse_normalization(block: Any) -> Optional[NormalizationScheme]:
    if block is None:
        return None
    block = _expect_object(block, "normalization")
    _check_keys(block, ("omega_c", "c"), "normalization")
    values = {name: _number(block[name], f"normalization.{name}") for name in block}
    try:
        return NormalizationScheme(**values)
    except ValueError as exc:
        raise ValidationError("normalization", str(exc)) from exc


def _parse_params(block: Any, params_type: type, n: Optional[NormalizationScheme]) -> Any:
    block = _expect_object(block if block is not None else {}, "params")
    allowed = [f.name for f in fields(params_type)]
    _check_keys(block, allowed, "params")

    values: Dict[str, Any] = {}
    for name, raw in block.items():
        key = f"params.{name}"
        if name in ("g_coeffs", "f_coeffs"):
            values[name] = _number_list(raw, key)
        elif name in ("convention", "form"):
            values[name] = _string(raw, key)
        elif name == "tau_rescaled":
            values[name] = _boolean(raw, key)
        else:
            values[name] = _number(raw, key)

    for spec_field in fields(params_type):
        if (
            spec_field.name not in values
            and spec_field.default is MISSING
            and spec_field.default_factory is MISSING
        ):
            raise ValidationError(
                f"params.{spec_field.name}",
                f"required by {params_type.__name__}",
            )
    try:
        return params_type(**_normalize_block(values, n))
    except (TypeError, ValueError) as exc:
        raise ValidationError("params", str(exc)) from exc


def _parse_relativity(
    block: Any, model_id: str, relativistic: bool, n: Optional[NormalizationScheme]
) -> Optional[RelativityParams]:
    block = _expect_object(block if block is not None else {}, "relativity")
    _check_keys(block, ("mode", "c"), "relativity")
    expected_mode = "rel" if relativistic else "nonrel"
    mode = _string(block.get("mode", expected_mode), "relativity.mode")
    if mode not in RELATIVITY_MODES:
        raise ValidationError(
            "relativity.mode", f"unknown mode '{mode}'. Available: {', '.join(RELATIVITY_MODES)}"
        )
    if mode != expected_mode:
        raise ValidationError(
            "relativity.mode", f"model '{model_id}' runs in '{expected_mode}' mode, not '{mode}'"
        )

    if not relativistic:
        if "c" in block:
            raise ValidationError("relativity.c", f"not used by non-relativistic model '{model_id}'")
        return None

    if n is not None:
        if "c" in block and _number(block["c"], "relativity.c") != n.c:
            raise ValidationError("relativity.c", "must match normalization.c when both are given")
        return RelativityParams(1.0)
    if "c" not in block:
        raise ValidationError("relativity.c", f"required for relativistic model '{model_id}'")
    try:
        return RelativityParams(_number(block["c"], "relativity.c"))
    except ValueError as exc:
        raise ValidationError("relativity.c", str(exc)) from exc


def _parse_initial_state(block: Any, n: Optional[NormalizationScheme]) -> PhaseState:
    block = _expect_object(block if block is not None else {}, "initial_conditions")
    names = ("x", "y", "vx", "vy", "t0")
    _check_keys(block, names, "initial_conditions")
    values = {name: _number(block.get(name, 0.0), f"initial_conditions.{name}") for name in names}
    values = _normalize_block(values, n)
    try:
        return PhaseState(values["t0"], values["x"], values["y"], values["vx"], values["vy"])
    except ValueError as exc:
        raise ValidationError("initial_conditions", str(exc)) from exc


def _parse_integrator(block: Any, n: Optional[NormalizationScheme]) -> IntegratorConfig:
    block = _expect_object(block if block is not None else {}, "integrator")
    allowed = [f.name for f in fields(IntegratorConfig)]
    _check_keys(block, allowed, "integrator")
    values: Dict[str, Any] = {}
    for name, raw in block.items():
        key = f"integrator.{name}"
        if name == "method":
            values[name] = _string(raw, key)
        elif name in ("max_steps", "sample_every"):
            values[name] = _integer(raw, key)
        elif name == "max_dt" and raw is None:
            values[name] = None
        else:
            values[name] = _number(raw, key)
    try:
        return IntegratorConfig(**_normalize_block(values, n))
    except ValueError as exc:
        raise ValidationError("integrator", str(exc)) from exc


def _parse_trapping(block: Any, n: Optional[NormalizationScheme]) -> TrapCriteria:
    block = _expect_object(block if block is not None else {}, "trapping")
    allowed = [f.name for f in fields(TrapCriteria)]
    _check_keys(block, allowed, "trapping")
    values = {name: _number(raw, f"trapping.{name}") for name, raw in block.items()}
    try:
        return TrapCriteria(**_normalize_block(values, n))
    except ValueError as exc:
        raise ValidationError("trapping", str(exc)) from exc


def _parse_outputs(block: Any) -> OutputOptions:
    block = _expect_object(block if block is not None else {}, "outputs")
    _check_keys(block, ("dir", "format", "invariants", "el_residual"), "outputs")
    values: Dict[str, Any] = {}
    if "dir" in block:
        values["dir"] = Path(_string(block["dir"], "outputs.dir"))
    if "format" in block:
        values["format"] = _string(block["format"], "outputs.format")
    if "invariants" in block:
        raw = block["invariants"]
        if not isinstance(raw, list):
            raise ValidationError("outputs.invariants", f"expected a list of names, got {raw!r}")
        values["invariants"] = tuple(
            _string(item, f"outputs.invariants[{i}]") for i, item in enumerate(raw)
        )
    if "el_residual" in block:
        values["el_residual"] = _boolean(block["el_residual"], "outputs.el_residual")
    try:
        return OutputOptions(**values)
    except ValueError as exc:
        raise ValidationError("outputs", str(exc)) from exc


def _parse_options(block: Any) -> bool:
    block = _expect_object(block if block is not None else {}, "options")
    _check_keys(block, ("freeze_gamma_phase",), "options")
    return _boolean(block.get("freeze_gamma_phase", False), "options.freeze_gamma_phase")


def scenario_from_document(document: Any, name: Optional[str] = None) -> Scenario:
    """Validate a decoded scenario document and fill in every default."""

    document = _expect_object(document, "<document>")
    _check_keys(document, TOP_LEVEL_KEYS, "")

    if "model" not in document:
        raise ValidationError("model", "required")
    model_id = _string(document["model"], "model")
    try:
        spec = resolve_model_spec(model_id)
    except ValueError as exc:
        raise ValidationError("model", str(exc)) from exc

    scenario_name = _string(document.get("name", name or model_id), "name")
    n = _parse_normalization(document.get("normalization"))
    params = _parse_params(document.get("params"), spec.params_type, n)
    rel = _parse_relativity(document.get("relativity"), model_id, spec.relativistic, n)
    freeze = _parse_options(document.get("options"))
    model = ForceModel(model_id, params, rel, freeze)

    scenario = Scenario(
        name=scenario_name,
        model=model,
        initial_state=_parse_initial_state(document.get("initial_conditions"), n),
        integrator=_parse_integrator(document.get("integrator"), n),
        trapping=_parse_trapping(document.get("trapping"), n),
        outputs=_parse_outputs(document.get("outputs")),
        normalization=n,
    )
    if scenario.integrator.t_end <= scenario.initial_state.t:
        raise ValidationError("integrator.t_end", "must exceed initial_conditions.t0")
    logger.debug("Parsed scenario %s (%s)", scenario.name, model_id)
    return scenario


def parse_scenario(text: str, name: Optional[str] = None) -> Scenario:
    """Parse a JSON scenario document."""

    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"Malformed scenario document: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
    return scenario_from_document(document, name)


# ----------------------------------------------------------------------
# Presets
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class PresetSpec:
    key: str
    label: str
    document: Mapping[str, Any]

    def build(self) -> Scenario:
        return scenario_from_document(json.loads(json.dumps(self.document)), self.key)


FIGURE_IC_NONREL = {"x": 0.0, "y": 0.0, "vx": 0.0, "vy": 0.001}
FIGURE_IC_REL = {"x": 0.0, "y": 0.0, "vx": 0.5, "vy": 0.5}
FIGURE_INTEGRATOR = {"method": "rk54_adaptive", "rtol": 1e-9, "atol": 1e-12, "t_end": 200.0, "max_dt": 0.05}
FIGURE_TRAPPING = {"r_escape": 10.0, "horizon": 200.0}

FIGURE_MODELS: Dict[str, Tuple[str, str, Dict[str, Any]]] = {
    "fig1": (
        "rel_rotating_saddle",
        "Rotating saddle, Λ=0.1, ω=0.5",
        {"Lambda": 0.1, "omega": 0.5},
    ),
    "fig2": (
        "rel_rotating_monkey",
        "Rotating monkey saddle, Λ=0.1, ω=0.5, α₁=α₂=1",
        {"Lambda": 0.1, "alpha1": 1.0, "alpha2": 1.0, "omega": 0.5},
    ),
    "fig3": (
        "rel_flap",
        "Flapping saddle, A=0.1, ω=0.5, g=f=1+u+u²",
        {"A": 0.1, "omega": 0.5, "g_coeffs": [1.0, 1.0, 1.0], "f_coeffs": [1.0, 1.0, 1.0]},
    ),
}


def _figure_preset(figure: str, variant: str) -> PresetSpec:
    model_id, label, params = FIGURE_MODELS[figure]
    ic = FIGURE_IC_NONREL if variant == "nonrel" else FIGURE_IC_REL
    suffix = "ẏ(0)=0.001" if variant == "nonrel" else "ẋ(0)=ẏ(0)=0.5c"
    key = f"{figure}_{variant}"
    document = {
        "name": key,
        "model": model_id,
        "params": params,
        "relativity": {"mode": "rel", "c": 1.0},
        "initial_conditions": ic,
        "integrator": FIGURE_INTEGRATOR,
        "trapping": FIGURE_TRAPPING,
    }
    return PresetSpec(key, f"{label}; {suffix}", document)


PRESETS: Dict[str, PresetSpec] = {
    spec.key: spec
    for spec in (
        _figure_preset(figure, variant)
        for figure in FIGURE_MODELS
        for variant in ("nonrel", "rel")
    )
}


def available_presets() -> list[PresetSpec]:
    return list(PRESETS.values())


def resolve_preset(key: str) -> PresetSpec:
    try:
        return PRESETS[key]
    except KeyError as exc:
        raise ValueError(f"Unknown preset '{key}'. Available: {', '.join(PRESETS)}") from exc


def load_scenario(source: str | Path) -> Scenario:
    """Load a preset by name or a scenario document from disk.

    Raises ``OSError`` when the file cannot be read.
    """

    if isinstance(source, str) and source in PRESETS:
        return PRESETS[source].build()
    path = Path(source)
    return parse_scenario(path.read_text(encoding="utf-8"), name=path.stem)


def apply_overrides(
    scenario: Scenario,
    *,
    rtol: Optional[float] = None,
    dt: Optional[float] = None,
    t_end: Optional[float] = None,
    horizon: Optional[float] = None,
    r_escape: Optional[float] = None,
    freeze_gamma_phase: Optional[bool] = None,
    out_dir: Optional[Path] = None,
    output_format: Optional[str] = None,
) -> Scenario:
    """Return ``scenario`` with command-line values (already normalized) applied."""

    integrator_changes = {
        name: value
        for name, value in (("rtol", rtol), ("dt", dt), ("t_end", t_end))
        if value is not None
    }
    trapping_changes = {
        name: value
        for name, value in (("horizon", horizon), ("r_escape", r_escape))
        if value is not None
    }
    output_changes: Dict[str, Any] = {}
    if out_dir is not None:
        output_changes["dir"] = Path(out_dir)
    if output_format is not None:
        output_changes["format"] = output_format

    try:
        model = scenario.model
        if freeze_gamma_phase is not None:
            model = replace(model, freeze_gamma_phase=freeze_gamma_phase)
        return replace(
            scenario,
            model=model,
            integrator=replace(scenario.integrator, **integrator_changes),
            trapping=replace(scenario.trapping, **trapping_changes),
            outputs=replace(scenario.outputs, **output_changes),
        )
    except ValueError as exc:
        raise ValidationError("overrides", str(exc)) from exc
