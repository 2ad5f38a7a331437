"""Conserved quantities and the Euler-Lagrange residual oracle.

Non-relativistic momenta follow the Hamilton equations of the Kapitza
Hamiltonian: ``px = ẋ`` and ``py = −ẏ``. The minus sign on ``py`` is part of
every formula below.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, Dict, Iterable, Optional, Tuple

import numpy as np

from .core import GammaUndefined, PhaseState, RelativityParams, lorentz_factors
from .integrators import Trajectory
from .models import ForceModel, KapitzaParams, NoLagrangian, eval_lagrangian


logger = logging.getLogger(__name__)


INVARIANT_NAMES = ("H_nonrel", "I_fradkin", "H_eff_rel", "E_legendre")
DRIFT_FLOOR = 1e-12
STATE_STEP = 1e-6

APPLICABLE_INVARIANTS: Dict[str, Tuple[str, ...]] = {
    "kapitza": ("H_nonrel", "I_fradkin"),
    "rel_kapitza": ("H_eff_rel", "E_legendre"),
    "rel_monkey": ("E_legendre",),
}


@dataclass(frozen=True)
class InvariantReport:
    name: str
    series: np.ndarray
    max_rel_drift: float


@dataclass(frozen=True)
class ResidualSeries:
    """Per-sample values of a finite-difference diagnostic (NaN where undefined)."""

    times: np.ndarray
    values: np.ndarray

    def max(self) -> float:
        finite = self.values[np.isfinite(self.values)]
        return float(finite.max()) if finite.size else float("nan")

    @property
    def finite_fraction(self) -> float:
        if not self.values.size:
            return 0.0
        return float(np.isfinite(self.values).mean())


# ----------------------------------------------------------------------
# Integrals of motion
# ----------------------------------------------------------------------
def hamiltonian_nonrel(s: PhaseState, p: KapitzaParams) -> float:
    px, py = s.vx, -s.vy
    return (
        0.5 * px * px
        - 0.5 * py * py
        + 0.5 * p.k * (s.x * s.x - s.y * s.y)
        + p.b * s.x * s.y
    )


def fradkin_tensor(s: PhaseState, p: KapitzaParams) -> float:
    px, py = s.vx, -s.vy
    return px * py + 0.5 * p.b * (s.x * s.x - s.y * s.y) - p.k * s.x * s.y


def energy_rel(s: PhaseState, model: ForceModel) -> float:
    """Legendre-transform energy ``E = c²Γ + U`` of an autonomous relativistic model."""

    if not (model.is_relativistic and model.spec.autonomous):
        raise ValueError(
            f"energy_rel needs an autonomous relativistic model, got '{model.model_id}'"
        )
    c = model.rel.c
    return c * c * lorentz_factors(s, model.rel).gamma + model.potential(s)


def hamiltonian_eff_rel(s: PhaseState, p: KapitzaParams, rel: RelativityParams) -> float:
    """Effective Hamiltonian (pₓ² − p_y²)/(2Γ) + U; diagnostic only."""

    gamma = lorentz_factors(s, rel).gamma
    px, py = s.vx * gamma, -s.vy * gamma
    return (
        (px * px - py * py) / (2.0 * gamma)
        + 0.5 * p.k * (s.x * s.x - s.y * s.y)
        + p.b * s.x * s.y
    )


def relative_drift(series: np.ndarray, floor: float = DRIFT_FLOOR) -> float:
    if not series.size:
        return 0.0
    reference = series[0]
    return float(np.max(np.abs(series - reference)) / max(abs(reference), floor))


def _invariant_function(name: str, model: ForceModel) -> Callable[[PhaseState], float]:
    if name == "H_nonrel":
        return lambda s: hamiltonian_nonrel(s, model.params)
    if name == "I_fradkin":
        return lambda s: fradkin_tensor(s, model.params)
    if name == "H_eff_rel":
        return lambda s: hamiltonian_eff_rel(s, model.params, model.rel)
    if name == "E_legendre":
        return lambda s: energy_rel(s, model)
    raise ValueError(f"Unknown invariant '{name}'. Available: {', '.join(INVARIANT_NAMES)}")


def invariant_reports(
    model: ForceModel, traj: Trajectory, names: Optional[Iterable[str]] = None
) -> Dict[str, InvariantReport]:
    """Evaluate every requested invariant that applies to ``model`` along ``traj``."""

    applicable = APPLICABLE_INVARIANTS.get(model.model_id, ())
    selected = applicable if names is None else tuple(n for n in names if n in applicable)
    reports: Dict[str, InvariantReport] = {}
    for name in selected:
        func = _invariant_function(name, model)
        series = np.array([func(s) for s in traj.samples])
        reports[name] = InvariantReport(name, series, relative_drift(series))
        logger.debug("%s drift along %s: %.3e", name, model.model_id, reports[name].max_rel_drift)
    return reports


def with_invariants(
    model: ForceModel, traj: Trajectory, names: Optional[Iterable[str]] = None
) -> Trajectory:
    """Return ``traj`` with the per-sample invariant series attached."""

    reports = invariant_reports(model, traj, names)
    return replace(traj, invariants={name: r.series for name, r in reports.items()})


# ----------------------------------------------------------------------
# Finite-difference machinery
# ----------------------------------------------------------------------
def _sample_stride(times: np.ndarray, h: Optional[float]) -> int:
    if h is None:
        return 1
    if not h > 0:
        raise ValueError(f"Finite-difference step must be positive, got {h!r}")
    spacing = float(np.median(np.diff(times)))
    return max(1, int(round(h / spacing)))


def _central_derivative(
    times: np.ndarray, values: np.ndarray, stride: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Three-point derivative on a possibly non-uniform grid at interior indices."""

    n = len(times)
    idx = np.arange(stride, n - stride)
    t_prev, t_mid, t_next = times[idx - stride], times[idx], times[idx + stride]
    h1 = t_mid - t_prev
    h2 = t_next - t_mid
    w_prev = -h2 / (h1 * (h1 + h2))
    w_mid = (h2 - h1) / (h1 * h2)
    w_next = h1 / (h2 * (h1 + h2))
    if values.ndim > 1:
        w_prev, w_mid, w_next = w_prev[:, None], w_mid[:, None], w_next[:, None]
    derivative = w_prev * values[idx - stride] + w_mid * values[idx] + w_next * values[idx + stride]
    return idx, derivative


def _phase_gamma_at(model: ForceModel, s: PhaseState) -> float:
    if model.freeze_gamma_phase or not model.spec.gamma_phase:
        return 1.0
    return lorentz_factors(s, model.rel).gamma


def _lagrangian_partials(
    model: ForceModel, s: PhaseState, step: float
) -> Tuple[float, float, float, float]:
    """Return ∂L/∂ẋ, ∂L/∂ẏ, ∂L/∂x, ∂L/∂y by central differences.

    The drive phase is evaluated once at ``s`` and held fixed for all
    perturbed evaluations.
    """

    phase_gamma = _phase_gamma_at(model, s)

    def partial(name: str) -> float:
        value = getattr(s, name)
        upper = eval_lagrangian(model, replace(s, **{name: value + step}), phase_gamma)
        lower = eval_lagrangian(model, replace(s, **{name: value - step}), phase_gamma)
        return (upper - lower) / (2.0 * step)

    return partial("vx"), partial("vy"), partial("x"), partial("y")


def el_residual(
    model: ForceModel,
    traj: Trajectory,
    h: Optional[float] = None,
    *,
    state_step: float = STATE_STEP,
) -> ResidualSeries:
    """Euler-Lagrange residual d/dt(∂L/∂q̇) − ∂L/∂q along ``traj``.

    ∂L/∂q̇ and ∂L/∂q come from central differences with ``state_step`` on the
    state; d/dt uses three-point differences between samples ``h`` apart
    (neighbouring samples when ``h`` is None). Each interior sample reports the
    larger of the x and y residuals; samples where the Lagrangian cannot be
    evaluated report NaN.
    """

    if not model.spec.has_lagrangian:
        raise NoLagrangian(f"Model '{model.model_id}' has no Lagrangian")
    eval_lagrangian(model, traj.samples[0])

    times = traj.times
    stride = _sample_stride(times, h)
    if len(traj) < 2 * stride + 1:
        raise ValueError(
            f"Trajectory with {len(traj)} samples is too short for a stride of {stride}"
        )

    partials = np.full((len(traj), 4), np.nan)
    for i, state in enumerate(traj.samples):
        try:
            partials[i] = _lagrangian_partials(model, state, state_step)
        except GammaUndefined:
            logger.debug("Lagrangian undefined near sample %d (t=%s)", i, state.t)

    idx, momentum_rate = _central_derivative(times, partials[:, :2], stride)
    residual = np.abs(momentum_rate - partials[idx, 2:])
    series = ResidualSeries(times[idx], np.max(residual, axis=1))
    logger.debug(
        "EL residual for %s over %d samples: max %.3e", model.model_id, len(series.values), series.max()
    )
    return series


def energy_rate(model: ForceModel, traj: Trajectory, h: Optional[float] = None) -> ResidualSeries:
    """Finite-difference dE/dt of :func:`energy_rel` along ``traj``.

    Stencils touching a sample where Γ is undefined report NaN.
    """

    times = traj.times
    stride = _sample_stride(times, h)
    energies = np.full(len(traj), np.nan)
    for i, state in enumerate(traj.samples):
        try:
            energies[i] = energy_rel(state, model)
        except GammaUndefined:
            logger.debug("Energy undefined at sample %d (t=%s)", i, state.t)
    idx, rate = _central_derivative(times, energies, stride)
    return ResidualSeries(times[idx], rate)


def phase_space_divergence(model: ForceModel, s: PhaseState, step: float = STATE_STEP) -> float:
    """Divergence of (vx, vy, ax, ay) with respect to (x, y, vx, vy)."""

    def field_component(state: PhaseState, index: int) -> float:
        if index == 0:
            return state.vx
        if index == 1:
            return state.vy
        return model.acceleration(state)[index - 2]

    total = 0.0
    for index, name in enumerate(("x", "y", "vx", "vy")):
        value = getattr(s, name)
        upper = field_component(replace(s, **{name: value + step}), index)
        lower = field_component(replace(s, **{name: value - step}), index)
        total += (upper - lower) / (2.0 * step)
    return total
