"""Catalogue of the curl-force systems: force laws, potentials and Lagrangians.

Every system is addressed by a model id (see :data:`MODEL_SPECS`). Velocity
independent laws take ``(state, params)``; relativistic laws additionally take
:class:`~curlforce.core.RelativityParams` and go through the shared
Euler-Lagrange solution

    ẍ = (ẋẏ/(Γc²))·κ·Y − (δ/(ΓΓₓ²))·X
    ÿ = (ẋẏ/(Γc²))·κ·X + (δ/(ΓΓ_y²))·Y

where ``X``/``Y`` are the model's force brackets (∂U/∂x and ∂U/∂y for the
potential ``U``) and ``κ``/``δ`` are the coupling and direct coefficients (both 1
except for the printed flapping-saddle equations).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, fields, replace
from functools import cached_property
from typing import Any, Callable, Optional, Tuple

from numpy.polynomial import Polynomial

from .core import CurlForceError, LorentzFactors, PhaseState, RelativityParams, lorentz_factors


logger = logging.getLogger(__name__)


Acceleration = Tuple[float, float]

KAPITZA_CONVENTIONS = ("corollary", "shaft")
FLAPPING_FORMS = ("printed", "lagrangian")


class NoLagrangian(CurlForceError):
    """Raised for model/option combinations without a Lagrangian."""


def _require_finite(record: Any) -> None:
    for spec in fields(record):
        value = getattr(record, spec.name)
        if isinstance(value, float) and not math.isfinite(value):
            raise ValueError(f"{type(record).__name__}.{spec.name} must be finite, got {value!r}")


# ----------------------------------------------------------------------
# Parameter records
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class KapitzaParams:
    """Saddle stiffness ``k`` and nonconservative coupling ``b``.

    ``convention`` picks the y-equation of the non-relativistic law:
    ``"corollary"`` gives ``ÿ = k y − b x`` and ``"shaft"`` gives ``ÿ = −k y + b x``
    (the rotating-shaft pair ẍ + ay + bx = 0, ÿ − ax + by = 0 with a → b, b → k).
    Only the shaft form conserves H and I; the relativistic law does not read it.
    """

    k: float
    b: float
    convention: str = "corollary"

    def __post_init__(self) -> None:
        object.__setattr__(self, "k", float(self.k))
        object.__setattr__(self, "b", float(self.b))
        _require_finite(self)
        if self.convention not in KAPITZA_CONVENTIONS:
            raise ValueError(
                f"Unknown Kapitza convention '{self.convention}'. "
                f"Available: {', '.join(KAPITZA_CONVENTIONS)}"
            )


@dataclass(frozen=True)
class GeneralCurlParams:
    """Kinetic coefficients α, β, γ and potential ½ax² + bxy + ½c y²."""

    alpha: float
    beta: float
    gamma_c: float
    a: float
    b: float
    c_pot: float

    def __post_init__(self) -> None:
        _require_finite(self)


@dataclass(frozen=True)
class RotatingSaddleParams:
    Lambda: float
    omega: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "Lambda", float(self.Lambda))
        object.__setattr__(self, "omega", float(self.omega))
        _require_finite(self)
        if self.omega < 0:
            raise ValueError(f"Drive frequency must be non-negative, got {self.omega!r}")


@dataclass(frozen=True)
class MonkeySaddleParams:
    k1: float
    k2: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "k1", float(self.k1))
        object.__setattr__(self, "k2", float(self.k2))
        _require_finite(self)


@dataclass(frozen=True)
class RotatingMonkeyParams:
    Lambda: float
    alpha1: float
    alpha2: float
    omega: float

    def __post_init__(self) -> None:
        for name in ("Lambda", "alpha1", "alpha2", "omega"):
            object.__setattr__(self, name, float(getattr(self, name)))
        _require_finite(self)
        if self.omega < 0:
            raise ValueError(f"Drive frequency must be non-negative, got {self.omega!r}")

    def coefficients(self, phase: float) -> MonkeySaddleParams:
        """Instantaneous ``k1 = Λα₁ cos φ``, ``k2 = Λα₂ sin φ``."""

        return MonkeySaddleParams(
            self.Lambda * self.alpha1 * math.cos(phase),
            self.Lambda * self.alpha2 * math.sin(phase),
        )


@dataclass(frozen=True)
class FlappingParams:
    """Flapping/spinning saddle drive.

    ``g_coeffs`` and ``f_coeffs`` are ascending polynomial coefficients. The
    single amplitude ``A`` stands for both A_RF/A of the potentials and the Λ of
    the printed relativistic equations.
    """

    A: float
    omega: float
    g_coeffs: Tuple[float, ...] = (1.0,)
    f_coeffs: Tuple[float, ...] = (1.0,)
    form: str = "printed"
    tau_rescaled: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "A", float(self.A))
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "g_coeffs", tuple(float(c) for c in self.g_coeffs))
        object.__setattr__(self, "f_coeffs", tuple(float(c) for c in self.f_coeffs))
        _require_finite(self)
        for name in ("g_coeffs", "f_coeffs"):
            coeffs = getattr(self, name)
            if not coeffs:
                raise ValueError(f"FlappingParams.{name} needs at least one coefficient")
            if not all(math.isfinite(c) for c in coeffs):
                raise ValueError(f"FlappingParams.{name} must be finite, got {coeffs!r}")
        if self.omega < 0:
            raise ValueError(f"Drive frequency must be non-negative, got {self.omega!r}")
        if self.form not in FLAPPING_FORMS:
            raise ValueError(
                f"Unknown flapping form '{self.form}'. Available: {', '.join(FLAPPING_FORMS)}"
            )
        if self.tau_rescaled and self.omega == 0:
            raise ValueError("The tau-rescaled flapping equations need omega > 0")

    @cached_property
    def g(self) -> Polynomial:
        return Polynomial(self.g_coeffs)

    @cached_property
    def f(self) -> Polynomial:
        return Polynomial(self.f_coeffs)

    @cached_property
    def g_prime(self) -> Polynomial:
        return self.g.deriv()

    @cached_property
    def f_prime(self) -> Polynomial:
        return self.f.deriv()


# ----------------------------------------------------------------------
# Shared helpers
# ----------------------------------------------------------------------
def curl_components(p: GeneralCurlParams) -> Tuple[float, float]:
    """Return the (i, j) components of ∇×F for the linear curl force."""

    return ((p.alpha - p.gamma_c) * p.b, p.beta * (p.c_pot - p.a))


def accel_general_curl(s: PhaseState, p: GeneralCurlParams) -> Acceleration:
    """Forces of the quadratic curl-force Hamiltonian ½αpₓ² + βpₓp_y + ½γp_y² + U."""

    dudx = p.a * s.x + p.b * s.y
    dudy = p.b * s.x + p.c_pot * s.y
    return (-p.alpha * dudx - p.beta * dudy, -p.beta * dudx - p.gamma_c * dudy)


def monkey_surfaces(x: float, y: float) -> Tuple[float, float]:
    """Return ``(Re z³, Im z³)`` for ``z = x + iy``."""

    return (x ** 3 - 3.0 * x * y * y, 3.0 * x * x * y - y ** 3)


def _relativistic_accel(
    s: PhaseState,
    rel: RelativityParams,
    factors: LorentzFactors,
    bracket_x: float,
    bracket_y: float,
    *,
    coupling: float = 1.0,
    direct: float = 1.0,
) -> Acceleration:
    gamma = factors.gamma
    mix = coupling * s.vx * s.vy / (gamma * rel.c * rel.c)
    ax = mix * bracket_y - direct * bracket_x / (gamma * factors.gamma_x ** 2)
    ay = mix * bracket_x + direct * bracket_y / (gamma * factors.gamma_y ** 2)
    return ax, ay


def _phase_gamma(factors: LorentzFactors, freeze_gamma_phase: bool) -> float:
    return 1.0 if freeze_gamma_phase else factors.gamma


def _kapitza_brackets(s: PhaseState, p: KapitzaParams) -> Tuple[float, float]:
    return (p.k * s.x + p.b * s.y, -p.k * s.y + p.b * s.x)


def _saddle_brackets(s: PhaseState, amplitude: float, phase: float) -> Tuple[float, float]:
    cos_p, sin_p = math.cos(phase), math.sin(phase)
    return (
        amplitude * (cos_p * s.x + sin_p * s.y),
        amplitude * (-cos_p * s.y + sin_p * s.x),
    )


def _monkey_brackets(s: PhaseState, k1: float, k2: float) -> Tuple[float, float]:
    diff = s.x * s.x - s.y * s.y
    cross = 2.0 * s.x * s.y
    return (k1 * diff + k2 * cross, -k1 * cross + k2 * diff)


def _flap_phase(s: PhaseState, p: FlappingParams, phase_gamma: float) -> float:
    if p.tau_rescaled:
        return 2.0 * phase_gamma * s.t
    return 2.0 * phase_gamma * p.omega * s.t


# ----------------------------------------------------------------------
# Force laws
# ----------------------------------------------------------------------
def accel_kapitza(s: PhaseState, p: KapitzaParams) -> Acceleration:
    bracket_x, bracket_y = _kapitza_brackets(s, p)
    if p.convention == "shaft":
        return -bracket_x, bracket_y
    return -bracket_x, -bracket_y


def accel_rel_kapitza(s: PhaseState, p: KapitzaParams, rel: RelativityParams) -> Acceleration:
    factors = lorentz_factors(s, rel)
    bracket_x, bracket_y = _kapitza_brackets(s, p)
    return _relativistic_accel(s, rel, factors, bracket_x, bracket_y)


def accel_rotating_saddle(s: PhaseState, p: RotatingSaddleParams) -> Acceleration:
    bracket_x, bracket_y = _saddle_brackets(s, p.Lambda, 2.0 * p.omega * s.t)
    return -bracket_x, bracket_y


def accel_rel_rotating_saddle(
    s: PhaseState,
    p: RotatingSaddleParams,
    rel: RelativityParams,
    *,
    freeze_gamma_phase: bool = False,
) -> Acceleration:
    factors = lorentz_factors(s, rel)
    phase = 2.0 * _phase_gamma(factors, freeze_gamma_phase) * p.omega * s.t
    bracket_x, bracket_y = _saddle_brackets(s, p.Lambda, phase)
    return _relativistic_accel(s, rel, factors, bracket_x, bracket_y)


def accel_monkey(s: PhaseState, p: MonkeySaddleParams) -> Acceleration:
    bracket_x, bracket_y = _monkey_brackets(s, p.k1, p.k2)
    return -bracket_x, bracket_y


def accel_rel_monkey(s: PhaseState, p: MonkeySaddleParams, rel: RelativityParams) -> Acceleration:
    factors = lorentz_factors(s, rel)
    bracket_x, bracket_y = _monkey_brackets(s, p.k1, p.k2)
    return _relativistic_accel(s, rel, factors, bracket_x, bracket_y)


def accel_rel_rotating_monkey(
    s: PhaseState,
    p: RotatingMonkeyParams,
    rel: RelativityParams,
    *,
    freeze_gamma_phase: bool = False,
) -> Acceleration:
    factors = lorentz_factors(s, rel)
    phase = 2.0 * _phase_gamma(factors, freeze_gamma_phase) * p.omega * s.t
    k = p.coefficients(phase)
    bracket_x, bracket_y = _monkey_brackets(s, k.k1, k.k2)
    return _relativistic_accel(s, rel, factors, bracket_x, bracket_y)


def accel_flapping_newton(s: PhaseState, p: FlappingParams) -> Acceleration:
    drive = -p.A * math.cos(p.omega * s.t) * float(p.g(0.5 * (s.x * s.x - s.y * s.y)))
    return drive * s.x, drive * s.y


def _flap_brackets(s: PhaseState, p: FlappingParams, phase: float) -> Tuple[float, float]:
    gp = float(p.g_prime(s.x * s.x - s.y * s.y))
    fp = float(p.f_prime(s.x * s.y))
    cos_p, sin_p = math.cos(phase), math.sin(phase)
    return (
        s.x * gp * cos_p + s.y * fp * sin_p,
        -s.y * gp * cos_p + s.x * fp * sin_p,
    )


def accel_spinning_saddle(s: PhaseState, p: FlappingParams) -> Acceleration:
    """Newton pair of the spinning saddle Û at phase 2ωt: ``(−∂Û/∂x, +∂Û/∂y)``.

    This is the rest limit of the Lagrangian form of :func:`accel_rel_flap`.
    """

    bracket_x, bracket_y = _flap_brackets(s, p, 2.0 * p.omega * s.t)
    return -2.0 * p.A * bracket_x, 2.0 * p.A * bracket_y


def accel_rel_flap(
    s: PhaseState,
    p: FlappingParams,
    rel: RelativityParams,
    *,
    freeze_gamma_phase: bool = False,
) -> Acceleration:
    factors = lorentz_factors(s, rel)
    phase = _flap_phase(s, p, _phase_gamma(factors, freeze_gamma_phase))
    bracket_x, bracket_y = _flap_brackets(s, p, phase)
    if p.form == "lagrangian":
        coupling = direct = 2.0 * p.A
    else:
        coupling, direct = p.A, 1.0
    if p.tau_rescaled:
        direct /= p.omega * p.omega
    return _relativistic_accel(
        s, rel, factors, bracket_x, bracket_y, coupling=coupling, direct=direct
    )


# ----------------------------------------------------------------------
# Potentials
# ----------------------------------------------------------------------
def _kapitza_potential(s: PhaseState, p: KapitzaParams) -> float:
    return 0.5 * p.k * (s.x * s.x - s.y * s.y) + p.b * s.x * s.y


def _saddle_potential(s: PhaseState, amplitude: float, phase: float) -> float:
    return 0.5 * amplitude * (
        (s.x * s.x - s.y * s.y) * math.cos(phase) + 2.0 * s.x * s.y * math.sin(phase)
    )


def _monkey_potential(s: PhaseState, k1: float, k2: float) -> float:
    g2, g2r = monkey_surfaces(s.x, s.y)
    return (k1 * g2 + k2 * g2r) / 3.0


def _spinning_potential(s: PhaseState, p: FlappingParams, phase: float) -> float:
    g_val = float(p.g(s.x * s.x - s.y * s.y))
    f_val = float(p.f(s.x * s.y))
    return p.A * (g_val * math.cos(phase) + 2.0 * f_val * math.sin(phase))


# ----------------------------------------------------------------------
# Model registry
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class ModelSpec:
    """Description of one dynamical system of the catalogue."""

    key: str
    label: str
    params_type: type
    relativistic: bool
    accel: Callable[["ForceModel", PhaseState], Acceleration]
    potential: Callable[["ForceModel", PhaseState, float], float]
    has_lagrangian: bool = True
    gamma_phase: bool = False
    autonomous: bool = False


def _model_phase_gamma(model: "ForceModel", s: PhaseState, phase_gamma: Optional[float]) -> float:
    if phase_gamma is not None:
        return phase_gamma
    if model.freeze_gamma_phase or not model.spec.gamma_phase:
        return 1.0
    return lorentz_factors(s, model.rel).gamma


MODEL_SPECS: dict[str, ModelSpec] = {
    "kapitza": ModelSpec(
        "kapitza",
        "Kapitza equation",
        KapitzaParams,
        relativistic=False,
        accel=lambda m, s: accel_kapitza(s, m.params),
        potential=lambda m, s, g: _kapitza_potential(s, m.params),
        autonomous=True,
    ),
    "rel_kapitza": ModelSpec(
        "rel_kapitza",
        "Relativistic Kapitza equation",
        KapitzaParams,
        relativistic=True,
        accel=lambda m, s: accel_rel_kapitza(s, m.params, m.rel),
        potential=lambda m, s, g: _kapitza_potential(s, m.params),
        autonomous=True,
    ),
    "rotating_saddle": ModelSpec(
        "rotating_saddle",
        "Rotating saddle",
        RotatingSaddleParams,
        relativistic=False,
        accel=lambda m, s: accel_rotating_saddle(s, m.params),
        potential=lambda m, s, g: _saddle_potential(
            s, m.params.Lambda, 2.0 * m.params.omega * s.t
        ),
    ),
    "rel_rotating_saddle": ModelSpec(
        "rel_rotating_saddle",
        "Relativistic rotating saddle",
        RotatingSaddleParams,
        relativistic=True,
        accel=lambda m, s: accel_rel_rotating_saddle(
            s, m.params, m.rel, freeze_gamma_phase=m.freeze_gamma_phase
        ),
        potential=lambda m, s, g: _saddle_potential(
            s, m.params.Lambda, 2.0 * g * m.params.omega * s.t
        ),
        gamma_phase=True,
    ),
    "monkey": ModelSpec(
        "monkey",
        "Monkey saddle (generalized rotating shaft)",
        MonkeySaddleParams,
        relativistic=False,
        accel=lambda m, s: accel_monkey(s, m.params),
        potential=lambda m, s, g: _monkey_potential(s, m.params.k1, m.params.k2),
        autonomous=True,
    ),
    "rel_monkey": ModelSpec(
        "rel_monkey",
        "Relativistic monkey saddle",
        MonkeySaddleParams,
        relativistic=True,
        accel=lambda m, s: accel_rel_monkey(s, m.params, m.rel),
        potential=lambda m, s, g: _monkey_potential(s, m.params.k1, m.params.k2),
        autonomous=True,
    ),
    "rel_rotating_monkey": ModelSpec(
        "rel_rotating_monkey",
        "Relativistic rotating monkey saddle",
        RotatingMonkeyParams,
        relativistic=True,
        accel=lambda m, s: accel_rel_rotating_monkey(
            s, m.params, m.rel, freeze_gamma_phase=m.freeze_gamma_phase
        ),
        potential=lambda m, s, g: _monkey_potential(
            s, *_coefficient_pair(m.params, 2.0 * g * m.params.omega * s.t)
        ),
        gamma_phase=True,
    ),
    "flapping_newton": ModelSpec(
        "flapping_newton",
        "Flapping saddle (Newton pair)",
        FlappingParams,
        relativistic=False,
        accel=lambda m, s: accel_flapping_newton(s, m.params),
        potential=lambda m, s, g: m.params.A
        * math.cos(m.params.omega * s.t)
        * float(m.params.g(0.5 * (s.x * s.x - s.y * s.y))),
        has_lagrangian=False,
    ),
    "rel_flap": ModelSpec(
        "rel_flap",
        "Relativistic flapping/spinning saddle",
        FlappingParams,
        relativistic=True,
        accel=lambda m, s: accel_rel_flap(
            s, m.params, m.rel, freeze_gamma_phase=m.freeze_gamma_phase
        ),
        potential=lambda m, s, g: _spinning_potential(s, m.params, _flap_phase(s, m.params, g)),
        gamma_phase=True,
    ),
}


def _coefficient_pair(p: RotatingMonkeyParams, phase: float) -> Tuple[float, float]:
    k = p.coefficients(phase)
    return k.k1, k.k2


def available_models() -> list[ModelSpec]:
    return list(MODEL_SPECS.values())


def resolve_model_spec(model_id: str) -> ModelSpec:
    try:
        return MODEL_SPECS[model_id]
    except KeyError as exc:
        available = ", ".join(sorted(MODEL_SPECS))
        raise ValueError(f"Unknown model '{model_id}'. Available: {available}") from exc


@dataclass(frozen=True)
class ForceModel:
    """A closed description of one dynamical system (model id + parameters)."""

    model_id: str
    params: Any
    rel: Optional[RelativityParams] = None
    freeze_gamma_phase: bool = False

    def __post_init__(self) -> None:
        spec = resolve_model_spec(self.model_id)
        if not isinstance(self.params, spec.params_type):
            raise ValueError(
                f"Model '{self.model_id}' expects {spec.params_type.__name__}, "
                f"got {type(self.params).__name__}"
            )
        if spec.relativistic and self.rel is None:
            raise ValueError(f"Relativistic model '{self.model_id}' requires RelativityParams")
        if not spec.relativistic and self.rel is not None:
            raise ValueError(f"Non-relativistic model '{self.model_id}' does not take RelativityParams")

    @property
    def spec(self) -> ModelSpec:
        return MODEL_SPECS[self.model_id]

    @property
    def is_relativistic(self) -> bool:
        return self.spec.relativistic

    def acceleration(self, s: PhaseState) -> Acceleration:
        return self.spec.accel(self, s)

    def potential(self, s: PhaseState, phase_gamma: Optional[float] = None) -> float:
        return self.spec.potential(self, s, _model_phase_gamma(self, s, phase_gamma))

    def lagrangian(self, s: PhaseState, phase_gamma: Optional[float] = None) -> float:
        return eval_lagrangian(self, s, phase_gamma=phase_gamma)

    def with_params(self, **changes: Any) -> "ForceModel":
        """Return a copy with parameter fields (or ``c``) replaced."""

        rel = self.rel
        if "c" in changes:
            c_value = changes.pop("c")
            if rel is None:
                raise ValueError(f"Non-relativistic model '{self.model_id}' has no 'c' to vary")
            rel = RelativityParams(float(c_value))
        params = replace(self.params, **changes) if changes else self.params
        return ForceModel(self.model_id, params, rel, self.freeze_gamma_phase)


def eval_potential(model: ForceModel, s: PhaseState, phase_gamma: Optional[float] = None) -> float:
    """Return the model's potential value at ``(x, y, t)``."""

    return model.potential(s, phase_gamma)


def eval_lagrangian(model: ForceModel, s: PhaseState, phase_gamma: Optional[float] = None) -> float:
    """Return the model's Lagrangian.

    ``phase_gamma`` fixes the Γ used in a 2Γωt drive phase; by default it is the
    Γ of ``s`` (or 1 with ``freeze_gamma_phase``).
    """

    spec = model.spec
    if not spec.has_lagrangian:
        raise NoLagrangian(f"Model '{model.model_id}' has no Lagrangian")
    if isinstance(model.params, FlappingParams) and model.params.tau_rescaled:
        raise NoLagrangian(f"Model '{model.model_id}' has no Lagrangian in tau-rescaled form")

    if model.rel is None:
        kinetic = 0.5 * (s.vx * s.vx - s.vy * s.vy)
    else:
        gamma = lorentz_factors(s, model.rel).gamma
        kinetic = -model.rel.c * model.rel.c / gamma
    return kinetic - model.potential(s, phase_gamma)
