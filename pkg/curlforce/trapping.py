"""Trapped/escaped classification of trajectories and parameter sweeps."""
from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from functools import partial
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .core import CurlForceError, GammaUndefined, PhaseState
from .integrators import IntegratorConfig, Termination, Trajectory, integrate
from .models import ForceModel


logger = logging.getLogger(__name__)


DEFAULT_R_ESCAPE = 10.0
DEFAULT_HORIZON = 200.0
DEFAULT_R_FLOOR = 0.0
VERDICT_HORIZONS = (20.0, 200.0)


class Classification(str, Enum):
    TRAPPED = "Trapped"
    ESCAPED = "Escaped"
    UNDECIDED = "Undecided"


@dataclass(frozen=True)
class TrapCriteria:
    r_escape: float = DEFAULT_R_ESCAPE
    horizon: float = DEFAULT_HORIZON
    r_floor: float = DEFAULT_R_FLOOR

    def __post_init__(self) -> None:
        if not (0.0 <= self.r_floor < self.r_escape):
            raise ValueError(
                f"Trap radii must satisfy 0 <= r_floor < r_escape, got "
                f"r_floor={self.r_floor!r}, r_escape={self.r_escape!r}"
            )
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError(f"Trap horizon must be positive, got {self.horizon!r}")


@dataclass(frozen=True)
class TrapVerdict:
    """Outcome of :func:`classify`.

    ``termination`` and ``cause`` carry the integration outcome so an Undecided
    verdict always says why it could not be decided.
    """

    classification: Classification
    escape_time: Optional[float]
    max_radius: float
    final_radius: float
    termination: Termination = Termination.COMPLETED
    cause: str = ""

    def __post_init__(self) -> None:
        escaped = self.classification is Classification.ESCAPED
        if escaped != (self.escape_time is not None):
            raise ValueError("escape_time is set exactly when the verdict is Escaped")


def _horizon_window(traj: Trajectory, horizon: float) -> np.ndarray:
    times = traj.times
    limit = times[0] + horizon
    return times <= limit + 1e-9 * max(1.0, abs(limit))


def classify(traj: Trajectory, crit: TrapCriteria) -> TrapVerdict:
    """Classify ``traj`` over ``crit.horizon`` time units from its first sample.

    Escaped at the first sample with radius strictly above ``r_escape``;
    Trapped when the samples cover the horizon (or never leave ``r_floor``);
    Undecided when the trajectory stops short of the horizon.
    """

    window = _horizon_window(traj, crit.horizon)
    radii = traj.radii[window]
    times = traj.times[window]
    max_radius = float(radii.max())
    final_radius = float(radii[-1])

    beyond = np.flatnonzero(radii > crit.r_escape)
    if beyond.size:
        first = int(beyond[0])
        return TrapVerdict(
            Classification.ESCAPED,
            float(times[first]),
            float(radii[: first + 1].max()),
            float(radii[first]),
            traj.termination,
            traj.message,
        )

    # samples past the horizon still prove the window was integrated
    covered = traj.final.t >= times[0] + crit.horizon - 1e-9 * max(1.0, crit.horizon)
    if covered or max_radius <= crit.r_floor:
        classification = Classification.TRAPPED
    else:
        classification = Classification.UNDECIDED
        logger.debug(
            "Undecided: trajectory ends at t=%s before horizon %s (%s)",
            times[-1],
            crit.horizon,
            traj.termination.value,
        )
    return TrapVerdict(
        classification, None, max_radius, final_radius, traj.termination, traj.message
    )


def verdict_pair(
    traj: Trajectory, crit: TrapCriteria, horizons: Tuple[float, float] = VERDICT_HORIZONS
) -> Tuple[TrapVerdict, TrapVerdict]:
    """Verdicts over the short and long horizons ("trapped over a shorter time scale")."""

    short, long_ = horizons
    return classify(traj, replace(crit, horizon=short)), classify(traj, replace(crit, horizon=long_))


# ----------------------------------------------------------------------
# Sweeps
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class SweepRow:
    values: Dict[str, float]
    verdict: TrapVerdict
    error: Optional[str] = None


@dataclass(frozen=True)
class SweepTable:
    parameter_names: Tuple[str, ...]
    rows: Tuple[SweepRow, ...]

    def __len__(self) -> int:
        return len(self.rows)

    def counts(self) -> Dict[Classification, int]:
        totals = {classification: 0 for classification in Classification}
        for row in self.rows:
            totals[row.verdict.classification] += 1
        return totals


def grid_points(grid: Mapping[str, Sequence[float]]) -> list[Dict[str, float]]:
    """Cartesian product of the grid axes; the last axis varies fastest."""

    if not grid:
        raise ValueError("A sweep grid needs at least one parameter")
    names = list(grid)
    for name in names:
        if len(grid[name]) == 0:
            raise ValueError(f"Sweep axis '{name}' has no values")
    return [
        dict(zip(names, (float(v) for v in combo)))
        for combo in itertools.product(*(grid[name] for name in names))
    ]


def _sweep_row(
    values: Dict[str, float],
    model_template: ForceModel,
    ic: PhaseState,
    cfg: IntegratorConfig,
    crit: TrapCriteria,
) -> SweepRow:
    try:
        model = model_template.with_params(**values)
        traj = integrate(model, ic, cfg)
    except (CurlForceError, ValueError, TypeError) as exc:
        logger.warning("Sweep point %s failed: %s", values, exc)
        termination = (
            Termination.GAMMA_UNDEFINED if isinstance(exc, GammaUndefined) else Termination.STEP_FAILURE
        )
        verdict = TrapVerdict(
            Classification.UNDECIDED, None, ic.radius, ic.radius, termination, str(exc)
        )
        return SweepRow(values, verdict, error=f"{type(exc).__name__}: {exc}")
    return SweepRow(values, classify(traj, crit))


def sweep(
    model_template: ForceModel,
    grid: Mapping[str, Sequence[float]],
    ic: PhaseState,
    cfg: IntegratorConfig,
    crit: TrapCriteria,
    *,
    workers: Optional[int] = None,
) -> SweepTable:
    """Classify one trajectory per grid point, rows in grid order.

    ``grid`` maps parameter field names (or ``"c"``) to their values. Failures are
    recorded on the row. With ``workers`` > 1 rows run in a process pool.
    """

    points = grid_points(grid)
    run_row = partial(_sweep_row, model_template=model_template, ic=ic, cfg=cfg, crit=crit)
    logger.info("Sweeping %s over %d grid points", model_template.model_id, len(points))
    if workers is not None and workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = tuple(pool.map(run_row, points))
    else:
        rows = tuple(run_row(point) for point in points)
    return SweepTable(tuple(grid), rows)
