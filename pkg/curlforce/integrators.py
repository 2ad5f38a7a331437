"""Fixed-step RK4 and adaptive Dormand-Prince 5(4) time stepping."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from .core import CurlForceError, GammaUndefined, LorentzFactors, PhaseState, lorentz_factors
from .models import ForceModel


logger = logging.getLogger(__name__)


INTEGRATOR_METHODS = ("rk4_fixed", "rk54_adaptive")

# Adaptive step control
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0

# Dormand-Prince 5(4) tableau (Hairer, Norsett & Wanner, Solving ODEs I, p. 178).
DP_C = (0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0)
DP_A = (
    (),
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0),
)
DP_B5 = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0)
DP_B4 = (
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
)
DP_E = tuple(b5 - b4 for b5, b4 in zip(DP_B5, DP_B4))


class MaxStepsExceeded(CurlForceError):
    """Raised when an integration needs more than ``max_steps`` steps."""


class StepFailure(CurlForceError):
    """Raised when the step size collapses or the state stops being finite."""


class Termination(str, Enum):
    COMPLETED = "completed"
    STEP_FAILURE = "step_failure"
    GAMMA_UNDEFINED = "gamma_undefined"
    MAX_STEPS = "max_steps"


@dataclass(frozen=True)
class IntegratorConfig:
    """Time-stepping settings; ``dt`` is the fixed step or the initial adaptive step."""

    method: str = "rk54_adaptive"
    dt: float = 1e-2
    rtol: float = 1e-9
    atol: float = 1e-12
    t_end: float = 200.0
    max_steps: int = 1_000_000
    sample_every: int = 1
    max_dt: Optional[float] = None

    def __post_init__(self) -> None:
        if self.method not in INTEGRATOR_METHODS:
            raise ValueError(
                f"Unknown integrator '{self.method}'. Available: {', '.join(INTEGRATOR_METHODS)}"
            )
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not math.isfinite(self.t_end):
            raise ValueError(f"t_end must be finite, got {self.t_end!r}")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError(f"rtol and atol must be positive, got {self.rtol!r}, {self.atol!r}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be at least 1, got {self.max_steps!r}")
        if self.sample_every < 1:
            raise ValueError(f"sample_every must be at least 1, got {self.sample_every!r}")
        if self.max_dt is not None and not self.max_dt > 0:
            raise ValueError(f"max_dt must be positive, got {self.max_dt!r}")


@dataclass(frozen=True)
class Trajectory:
    """Ordered samples of one integration plus per-sample auxiliary values."""

    samples: Tuple[PhaseState, ...]
    factors: Tuple[Optional[LorentzFactors], ...]
    termination: Termination = Termination.COMPLETED
    message: str = ""
    invariants: Dict[str, np.ndarray] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.samples:
            raise ValueError("A trajectory needs at least one sample")
        if len(self.factors) != len(self.samples):
            raise ValueError("One Lorentz-factor entry is required per sample")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def as_array(self) -> np.ndarray:
        """Return an ``(n, 5)`` array with columns ``t, x, y, vx, vy``."""

        return np.array([(s.t, s.x, s.y, s.vx, s.vy) for s in self.samples])

    @property
    def radii(self) -> np.ndarray:
        data = self.as_array()
        return np.hypot(data[:, 1], data[:, 2])

    @property
    def final(self) -> PhaseState:
        return self.samples[-1]

    def raise_for_termination(self) -> None:
        """Raise the exception matching a non-completed termination."""

        if self.termination is Termination.COMPLETED:
            return
        if self.termination is Termination.GAMMA_UNDEFINED:
            raise GammaUndefined(self.message)
        if self.termination is Termination.MAX_STEPS:
            raise MaxStepsExceeded(self.message)
        raise StepFailure(self.message)


def _rhs(model: ForceModel, t: float, y: np.ndarray) -> np.ndarray:
    ax, ay = model.acceleration(PhaseState.from_array(t, y))
    return np.array([y[2], y[3], ax, ay])


def _rk4_array_step(model: ForceModel, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = _rhs(model, t, y)
    k2 = _rhs(model, t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = _rhs(model, t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = _rhs(model, t + dt, y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_rk4(model: ForceModel, s: PhaseState, dt: float) -> PhaseState:
    """Advance ``s`` by one classical Runge-Kutta step of length ``dt``."""

    y = _rk4_array_step(model, s.t, s.as_array(), dt)
    return PhaseState.from_array(s.t + dt, y)


def _dopri_step(
    model: ForceModel, t: float, y: np.ndarray, h: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Return the 5th-order solution and the embedded error estimate."""

    stages: List[np.ndarray] = []
    for c_i, a_row in zip(DP_C, DP_A):
        y_stage = y.copy()
        for a_ij, k_j in zip(a_row, stages):
            if a_ij:
                y_stage += h * a_ij * k_j
        stages.append(_rhs(model, t + c_i * h, y_stage))
    y_new = y + h * sum(b * k for b, k in zip(DP_B5, stages) if b)
    error = h * sum(e * k for e, k in zip(DP_E, stages) if e)
    return y_new, error


def _error_norm(error: np.ndarray, y_old: np.ndarray, y_new: np.ndarray, cfg: IntegratorConfig) -> float:
    scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y_old), np.abs(y_new))
    return float(np.sqrt(np.mean((error / scale) ** 2)))


class _Recorder:
    def __init__(self, model: ForceModel) -> None:
        self._model = model
        self.samples: List[PhaseState] = []
        self.factors: List[Optional[LorentzFactors]] = []

    def add(self, state: PhaseState) -> None:
        self.samples.append(state)
        if self._model.is_relativistic:
            self.factors.append(lorentz_factors(state, self._model.rel))
        else:
            self.factors.append(None)

    def build(self, termination: Termination, message: str = "") -> Trajectory:
        return Trajectory(tuple(self.samples), tuple(self.factors), termination, message)


def _validate_start(model: ForceModel, s0: PhaseState, cfg: IntegratorConfig) -> None:
    if not cfg.t_end > s0.t:
        raise ValueError(f"t_end ({cfg.t_end!r}) must exceed the initial time ({s0.t!r})")
    if model.is_relativistic:
        lorentz_factors(s0, model.rel)


def _integrate_fixed(
    model: ForceModel, s0: PhaseState, cfg: IntegratorConfig, recorder: _Recorder
) -> Trajectory:
    span = cfg.t_end - s0.t
    n_steps = max(1, math.ceil(span / cfg.dt - 1e-9))
    if n_steps > cfg.max_steps:
        message = f"{n_steps} fixed steps needed, max_steps={cfg.max_steps}"
        logger.warning("Integration stopped: %s", message)
        return recorder.build(Termination.MAX_STEPS, message)

    y = s0.as_array()
    t = s0.t
    for step in range(1, n_steps + 1):
        t_next = cfg.t_end if step == n_steps else s0.t + step * cfg.dt
        try:
            y = _rk4_array_step(model, t, y, t_next - t)
            state = PhaseState.from_array(t_next, y)
        except GammaUndefined as exc:
            logger.warning("Lorentz factor undefined near t=%.6g: %s", t, exc)
            return recorder.build(Termination.GAMMA_UNDEFINED, str(exc))
        except ValueError as exc:
            logger.warning("Step failure near t=%.6g: %s", t, exc)
            return recorder.build(Termination.STEP_FAILURE, str(exc))
        t = t_next
        if step % cfg.sample_every == 0 or step == n_steps:
            try:
                recorder.add(state)
            except GammaUndefined as exc:
                return recorder.build(Termination.GAMMA_UNDEFINED, str(exc))
    return recorder.build(Termination.COMPLETED)


def _integrate_adaptive(
    model: ForceModel, s0: PhaseState, cfg: IntegratorConfig, recorder: _Recorder
) -> Trajectory:
    y = s0.as_array()
    t = s0.t
    h = min(cfg.dt, cfg.max_dt) if cfg.max_dt is not None else cfg.dt
    accepted = rejected = 0

    while t < cfg.t_end:
        if accepted + rejected >= cfg.max_steps:
            message = f"exceeded max_steps={cfg.max_steps} at t={t!r}"
            logger.warning("Integration stopped: %s", message)
            return recorder.build(Termination.MAX_STEPS, message)

        remaining = cfg.t_end - t
        last = h >= remaining - 1e-12 * max(1.0, abs(cfg.t_end))
        if last:
            h = remaining
        elif remaining - h < 0.1 * h:
            # no sliver-sized final step
            h = 0.5 * remaining
        if h <= 16.0 * np.finfo(float).eps * max(1.0, abs(t)):
            message = f"step size collapsed to {h!r} at t={t!r}"
            logger.warning("Integration stopped: %s", message)
            return recorder.build(Termination.STEP_FAILURE, message)

        try:
            y_new, error = _dopri_step(model, t, y, h)
        except GammaUndefined as exc:
            logger.warning("Lorentz factor undefined near t=%.6g: %s", t, exc)
            return recorder.build(Termination.GAMMA_UNDEFINED, str(exc))
        except ValueError as exc:
            logger.warning("Step failure near t=%.6g: %s", t, exc)
            return recorder.build(Termination.STEP_FAILURE, str(exc))

        err = _error_norm(error, y, y_new, cfg)
        if not math.isfinite(err):
            message = f"non-finite error estimate at t={t!r}"
            logger.warning("Integration stopped: %s", message)
            return recorder.build(Termination.STEP_FAILURE, message)

        factor = MAX_FACTOR if err == 0.0 else SAFETY * err ** -0.2
        factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))

        if err <= 1.0:
            t = cfg.t_end if last else t + h
            y = y_new
            accepted += 1
            if accepted % cfg.sample_every == 0 or t >= cfg.t_end:
                try:
                    recorder.add(PhaseState.from_array(t, y))
                except GammaUndefined as exc:
                    return recorder.build(Termination.GAMMA_UNDEFINED, str(exc))
        else:
            rejected += 1
        h *= factor
        if cfg.max_dt is not None:
            h = min(h, cfg.max_dt)

    logger.debug("Adaptive integration finished: %d accepted, %d rejected steps", accepted, rejected)
    return recorder.build(Termination.COMPLETED)


def integrate(model: ForceModel, s0: PhaseState, cfg: IntegratorConfig) -> Trajectory:
    """Integrate ``model`` from ``s0`` to ``cfg.t_end``.

    Failures during stepping do not raise: the trajectory is returned truncated
    with its termination cause (see :meth:`Trajectory.raise_for_termination`).
    """

    _validate_start(model, s0, cfg)
    logger.debug(
        "Integrating %s from t=%s to t=%s with %s", model.model_id, s0.t, cfg.t_end, cfg.method
    )
    recorder = _Recorder(model)
    recorder.add(s0)
    if cfg.method == "rk4_fixed":
        return _integrate_fixed(model, s0, cfg, recorder)
    return _integrate_adaptive(model, s0, cfg, recorder)
