"""State types, pseudo-Lorentz factors and the velocity/momentum maps."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import optimize


logger = logging.getLogger(__name__)


class CurlForceError(Exception):
    """Base class for every error raised by curlforce."""


class GammaUndefined(CurlForceError, ValueError):
    """Raised when a Lorentz-factor radicand is not strictly positive."""


class NoInverse(CurlForceError):
    """Raised when momenta cannot be mapped back onto velocities."""


@dataclass(frozen=True)
class PhaseState:
    """Time, planar position and planar velocity of the unit-mass particle."""

    t: float
    x: float
    y: float
    vx: float
    vy: float

    def __post_init__(self) -> None:
        for name in ("t", "x", "y", "vx", "vy"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"PhaseState.{name} must be finite, got {value!r}")

    @classmethod
    def from_array(cls, t: float, y: np.ndarray) -> "PhaseState":
        return cls(float(t), float(y[0]), float(y[1]), float(y[2]), float(y[3]))

    def as_array(self) -> np.ndarray:
        """Return ``[x, y, vx, vy]`` as a float array."""

        return np.array([self.x, self.y, self.vx, self.vy], dtype=float)

    @property
    def radius(self) -> float:
        return math.hypot(self.x, self.y)


@dataclass(frozen=True)
class RelativityParams:
    """Speed-of-light constant of a relativistic model.

    Non-relativistic mode is expressed by passing ``None`` wherever a
    ``RelativityParams`` is optional, never by a very large ``c``.
    """

    c: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.c) and self.c > 0):
            raise ValueError(f"Speed of light must be positive and finite, got {self.c!r}")


@dataclass(frozen=True)
class LorentzFactors:
    gamma: float
    gamma_x: float
    gamma_y: float


@dataclass(frozen=True)
class Momenta:
    px: float
    py: float


def lorentz_factors(state: PhaseState, rel: Optional[RelativityParams]) -> LorentzFactors:
    """Return Γ, Γₓ and Γ_y for the indefinite kinetic form ½(ẋ² − ẏ²).

    Γ = (1 − vx²/c² + vy²/c²)^(−1/2), Γₓ = (1 − vx²/c²)^(−1/2) and
    Γ_y = (1 + vy²/c²)^(−1/2). With ``rel=None`` every factor is exactly 1.
    """

    if rel is None:
        return LorentzFactors(1.0, 1.0, 1.0)

    c2 = rel.c * rel.c
    bx = state.vx * state.vx / c2
    by = state.vy * state.vy / c2
    radicand = 1.0 - bx + by
    radicand_x = 1.0 - bx
    if radicand <= 0.0 or radicand_x <= 0.0:
        raise GammaUndefined(
            f"Lorentz factor undefined at vx={state.vx!r}, vy={state.vy!r}, c={rel.c!r} "
            f"(1 - vx^2/c^2 + vy^2/c^2 = {radicand!r}, 1 - vx^2/c^2 = {radicand_x!r})"
        )
    return LorentzFactors(
        gamma=1.0 / math.sqrt(radicand),
        gamma_x=1.0 / math.sqrt(radicand_x),
        gamma_y=1.0 / math.sqrt(1.0 + by),
    )


def momenta_from_velocity(state: PhaseState, rel: Optional[RelativityParams]) -> Momenta:
    """Canonical momenta ``px = vx Γ`` and ``py = −vy Γ`` (note the sign on ``py``)."""

    gamma = lorentz_factors(state, rel).gamma
    return Momenta(px=state.vx * gamma, py=-state.vy * gamma)


def _velocity_residual(
    v: np.ndarray, px: float, py: float, c2: float
) -> np.ndarray:
    radicand = 1.0 - v[0] * v[0] / c2 + v[1] * v[1] / c2
    if radicand <= 0.0:
        raise GammaUndefined(f"iterate left the valid velocity domain: {v!r}")
    gamma = radicand ** -0.5
    return np.array([v[0] * gamma - px, -v[1] * gamma - py])


def _velocity_jacobian(v: np.ndarray, px: float, py: float, c2: float) -> np.ndarray:
    vx, vy = float(v[0]), float(v[1])
    radicand = 1.0 - vx * vx / c2 + vy * vy / c2
    if radicand <= 0.0:
        raise GammaUndefined(f"iterate left the valid velocity domain: {v!r}")
    gamma = radicand ** -0.5
    g3 = gamma ** 3 / c2
    return np.array(
        [
            [gamma + g3 * vx * vx, -g3 * vx * vy],
            [-g3 * vx * vy, -gamma + g3 * vy * vy],
        ]
    )


def _initial_velocity_guess(m: Momenta, c2: float) -> np.ndarray:
    # Γ² = 1 + (px² − py²)/c² whenever the inverse exists.
    gamma_sq = 1.0 + (m.px * m.px - m.py * m.py) / c2
    if gamma_sq > 0.0:
        gamma = math.sqrt(gamma_sq)
        return np.array([m.px / gamma, -m.py / gamma])
    return np.array([m.px, -m.py])


def velocity_from_momenta(
    m: Momenta,
    rel: Optional[RelativityParams],
    *,
    tol: float = 1e-14,
    max_iter: int = 100,
) -> Tuple[float, float]:
    """Invert :func:`momenta_from_velocity` numerically.

    Uses a damped Newton (hybrid Powell) iteration on the two-equation system
    ``vx Γ(v) = px``, ``−vy Γ(v) = py``.
    """

    if rel is None:
        return m.px, -m.py
    if m.px == 0.0 and m.py == 0.0:
        return 0.0, 0.0

    c2 = rel.c * rel.c
    guess = _initial_velocity_guess(m, c2)
    try:
        solution = optimize.root(
            _velocity_residual,
            guess,
            args=(m.px, m.py, c2),
            jac=_velocity_jacobian,
            method="hybr",
            options={"xtol": tol, "maxfev": max_iter},
        )
    except GammaUndefined as exc:
        raise NoInverse(f"No velocity maps onto momenta {m!r} at c={rel.c!r}") from exc

    if not solution.success:
        logger.debug("Momentum inversion failed for %s: %s", m, solution.message)
        raise NoInverse(
            f"Momentum inversion did not converge within {max_iter} iterations for {m!r}: "
            f"{solution.message}"
        )

    vx, vy = float(solution.x[0]), float(solution.x[1])
    try:
        back = momenta_from_velocity(PhaseState(0.0, 0.0, 0.0, vx, vy), rel)
    except GammaUndefined as exc:
        raise NoInverse(f"Inverse velocity ({vx!r}, {vy!r}) has no valid Lorentz factors") from exc
    scale = max(1.0, abs(m.px), abs(m.py))
    if abs(back.px - m.px) > 1e-10 * scale or abs(back.py - m.py) > 1e-10 * scale:
        raise NoInverse(f"Momentum inversion stalled away from a root for {m!r}")
    return vx, vy
