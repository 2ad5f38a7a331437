"""Quick self-checks behind ``curlforce check``."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np

from .core import GammaUndefined, PhaseState, RelativityParams, lorentz_factors
from .integrators import IntegratorConfig, Termination, Trajectory, integrate
from .invariants import el_residual, energy_rate, invariant_reports, phase_space_divergence
from .models import (
    FlappingParams,
    ForceModel,
    KapitzaParams,
    MonkeySaddleParams,
    RotatingMonkeyParams,
    RotatingSaddleParams,
    accel_monkey,
    accel_spinning_saddle,
)
from .scenario import resolve_preset
from .trapping import Classification, TrapCriteria, TrapVerdict, classify, verdict_pair


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class CheckSpec:
    key: str
    label: str
    run: Callable[[], CheckResult]


def _result(key: str, passed: bool, detail: str) -> CheckResult:
    return CheckResult(key, bool(passed), detail)


def check_lorentz_factors() -> CheckResult:
    rel = RelativityParams(1.0)
    at_rest = lorentz_factors(PhaseState(0.0, 0.0, 0.0, 0.0, 0.0), rel)
    moving = lorentz_factors(PhaseState(0.0, 0.0, 0.0, 0.6, 0.0), rel)
    balanced = lorentz_factors(PhaseState(0.0, 0.0, 0.0, 0.5, 0.5), rel)
    try:
        lorentz_factors(PhaseState(0.0, 0.0, 0.0, 1.0, 0.0), rel)
        undefined_raised = False
    except GammaUndefined:
        undefined_raised = True
    passed = (
        at_rest.gamma == 1.0
        and math.isclose(moving.gamma, 1.25, rel_tol=1e-15)
        and math.isclose(balanced.gamma, 1.0, rel_tol=1e-15)
        and undefined_raised
    )
    return _result(
        "lorentz_factors",
        passed,
        f"Γ(0.6c, 0)={moving.gamma:.15g}, Γ(0.5c, 0.5c)={balanced.gamma:.15g}, "
        f"Γ(c, 0) undefined: {undefined_raised}",
    )


def _zero_velocity_pairs(rng: np.random.Generator) -> List[tuple[ForceModel, Callable[[PhaseState], tuple]]]:
    rel = RelativityParams(float(rng.uniform(0.5, 3.0)))
    kapitza = KapitzaParams(float(rng.normal()), float(rng.normal()), convention="shaft")
    saddle = RotatingSaddleParams(float(rng.normal()), float(rng.uniform(0.1, 2.0)))
    monkey = MonkeySaddleParams(float(rng.normal()), float(rng.normal()))
    rotating = RotatingMonkeyParams(
        float(rng.normal()), float(rng.normal()), float(rng.normal()), float(rng.uniform(0.1, 2.0))
    )
    flap = FlappingParams(
        float(rng.normal()),
        float(rng.uniform(0.1, 2.0)),
        tuple(float(c) for c in rng.normal(size=3)),
        tuple(float(c) for c in rng.normal(size=3)),
        form="lagrangian",
    )
    # the printed flap equations keep unit direct terms: the saddle with 2A = 1
    printed_flap = replace(flap, form="printed")
    unit_flap = replace(flap, A=0.5)
    return [
        (ForceModel("rel_kapitza", kapitza, rel), ForceModel("kapitza", kapitza).acceleration),
        (
            ForceModel("rel_rotating_saddle", saddle, rel),
            ForceModel("rotating_saddle", saddle).acceleration,
        ),
        (ForceModel("rel_monkey", monkey, rel), ForceModel("monkey", monkey).acceleration),
        (
            ForceModel("rel_rotating_monkey", rotating, rel),
            lambda s: accel_monkey(s, rotating.coefficients(2.0 * rotating.omega * s.t)),
        ),
        (ForceModel("rel_flap", flap, rel), lambda s: accel_spinning_saddle(s, flap)),
        (ForceModel("rel_flap", printed_flap, rel), lambda s: accel_spinning_saddle(s, unit_flap)),
    ]


def check_zero_velocity_reduction(points: int = 100, seed: int = 7) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for rel_model, limit in _zero_velocity_pairs(rng):
        for x, y, t in rng.uniform(-2.0, 2.0, size=(points, 3)):
            s = PhaseState(float(t), float(x), float(y), 0.0, 0.0)
            diff = np.subtract(rel_model.acceleration(s), limit(s))
            worst = max(worst, float(np.max(np.abs(diff))))
    return _result("zero_velocity_reduction", worst <= 1e-12, f"max |Δa| = {worst:.3e}")


def check_phase_volume(points: int = 100, seed: int = 11) -> CheckResult:
    rng = np.random.default_rng(seed)
    models = [
        ForceModel("kapitza", KapitzaParams(1.0, 0.5)),
        ForceModel("rotating_saddle", RotatingSaddleParams(0.7, 0.5)),
        ForceModel("monkey", MonkeySaddleParams(1.0, -0.5)),
        ForceModel("flapping_newton", FlappingParams(0.3, 0.5, (1.0, 1.0, 1.0), (1.0, 1.0, 1.0))),
    ]
    worst = 0.0
    for model in models:
        for t, x, y, vx, vy in rng.uniform(-1.0, 1.0, size=(points, 5)):
            s = PhaseState(float(t), float(x), float(y), float(vx), float(vy))
            worst = max(worst, abs(phase_space_divergence(model, s)))
    return _result("phase_volume", worst <= 1e-8, f"max |div| = {worst:.3e}")


COSINE_CHANNEL = ForceModel("kapitza", KapitzaParams(1.0, 0.0))
COSINE_START = PhaseState(0.0, 1.0, 0.0, 0.0, 0.0)


def _cosine_error(cfg: IntegratorConfig) -> float:
    traj = integrate(COSINE_CHANNEL, COSINE_START, cfg)
    data = traj.as_array()
    return float(np.max(np.abs(data[:, 1] - np.cos(data[:, 0]))))


def check_rk4_order() -> CheckResult:
    steps = np.array([0.1, 0.05, 0.025, 0.0125])
    errors = np.array(
        [_cosine_error(IntegratorConfig(method="rk4_fixed", dt=float(dt), t_end=10.0)) for dt in steps]
    )
    slope = float(np.polyfit(np.log(steps), np.log(errors), 1)[0])
    return _result("rk4_order", abs(slope - 4.0) <= 0.2, f"global error slope = {slope:.3f}")


def check_rk54_accuracy() -> CheckResult:
    error = _cosine_error(IntegratorConfig(rtol=1e-11, atol=1e-13, t_end=10.0))
    return _result("rk54_accuracy", error <= 1e-8, f"max |x - cos t| = {error:.3e}")


def check_kapitza_integrals() -> CheckResult:
    model = ForceModel("kapitza", KapitzaParams(1.0, 0.5, convention="shaft"))
    start = PhaseState(0.0, 1.0, 0.1, 0.0, 0.0)
    traj = integrate(model, start, IntegratorConfig(rtol=1e-12, atol=1e-14, t_end=10.0))
    reports = invariant_reports(model, traj)
    drifts = {name: report.max_rel_drift for name, report in reports.items()}
    passed = traj.termination is Termination.COMPLETED and max(drifts.values()) <= 1e-8
    detail = ", ".join(f"{name} drift {value:.2e}" for name, value in drifts.items())
    return _result("kapitza_integrals", passed, detail)


RELATIVISTIC_KAPITZA = ForceModel("rel_kapitza", KapitzaParams(1.0, 0.5), RelativityParams(1.0))
RELATIVISTIC_START = PhaseState(0.0, 0.5, 0.0, 0.0, 0.3)


def check_relativistic_energy() -> CheckResult:
    cfg = IntegratorConfig(rtol=1e-12, atol=1e-14, t_end=5.0, max_dt=0.05)
    traj = integrate(RELATIVISTIC_KAPITZA, RELATIVISTIC_START, cfg)
    drift = invariant_reports(RELATIVISTIC_KAPITZA, traj, ["E_legendre"])["E_legendre"].max_rel_drift
    rate = float(np.nanmax(np.abs(energy_rate(RELATIVISTIC_KAPITZA, traj).values)))
    passed = traj.termination is Termination.COMPLETED and drift <= 1e-8 and rate <= 1e-6
    return _result("relativistic_energy", passed, f"E drift {drift:.2e}, max |dE/dt| {rate:.2e}")


# Runs stop where Γ breaks down; the step cap keeps the stencils short on the
# steep stretch just before it.
EULER_LAGRANGE_CONFIG = IntegratorConfig(rtol=1e-10, atol=1e-12, t_end=10.0, max_dt=5e-4)
EULER_LAGRANGE_MODELS = ("rel_kapitza", "rel_rotating_saddle", "rel_monkey", "rel_rotating_monkey", "rel_flap")


def euler_lagrange_case(model_id: str) -> Tuple[ForceModel, PhaseState]:
    """Model and start used by the Euler-Lagrange check for ``model_id``.

    Figure models use their fast preset; ``rel_flap`` switches to its
    Lagrangian form. ``rel_monkey`` starts from the same figure velocities.
    """

    if model_id == "rel_kapitza":
        return RELATIVISTIC_KAPITZA, RELATIVISTIC_START
    if model_id == "rel_monkey":
        start = resolve_preset("fig2_rel").build().initial_state
        return ForceModel("rel_monkey", MonkeySaddleParams(0.1, 0.1), RelativityParams(1.0)), start
    figure = {"rel_rotating_saddle": "fig1_rel", "rel_rotating_monkey": "fig2_rel", "rel_flap": "fig3_rel"}
    if model_id not in figure:
        raise ValueError(f"Unknown model '{model_id}'. Available: {', '.join(EULER_LAGRANGE_MODELS)}")
    scenario = resolve_preset(figure[model_id]).build()
    model = scenario.model
    if model_id == "rel_flap":
        model = model.with_params(form="lagrangian")
    return model, scenario.initial_state


def euler_lagrange_worst(model_id: str) -> Tuple[float, Trajectory]:
    model, start = euler_lagrange_case(model_id)
    traj = integrate(model, start, EULER_LAGRANGE_CONFIG)
    return el_residual(model, traj).max(), traj


def check_euler_lagrange() -> CheckResult:
    worst: Dict[str, float] = {}
    for model_id in EULER_LAGRANGE_MODELS:
        value, traj = euler_lagrange_worst(model_id)
        if traj.termination not in (Termination.COMPLETED, Termination.GAMMA_UNDEFINED):
            value = math.nan
        worst[model_id] = value
    passed = all(value <= 1e-4 for value in worst.values())
    detail = ", ".join(f"{model_id} {value:.2e}" for model_id, value in worst.items())
    return _result("euler_lagrange", passed, f"max EL residual: {detail}")


LIMIT_START = PhaseState(0.0, 0.01, 0.0, 0.0, 0.01)


def nonrelativistic_gap(c: float, t_end: float = 10.0, dt: float = 2e-3) -> float:
    """Largest position difference between rel_kapitza at ``c`` and the shaft flow."""

    params = KapitzaParams(1.0, 0.5, convention="shaft")
    cfg = IntegratorConfig(method="rk4_fixed", dt=dt, t_end=t_end)
    rel = integrate(ForceModel("rel_kapitza", params, RelativityParams(c)), LIMIT_START, cfg)
    newton = integrate(ForceModel("kapitza", params), LIMIT_START, cfg)
    rel.raise_for_termination()
    diff = rel.as_array()[:, 1:3] - newton.as_array()[:, 1:3]
    return float(np.max(np.hypot(diff[:, 0], diff[:, 1])))


def check_nonrelativistic_limit() -> CheckResult:
    ratio = nonrelativistic_gap(10.0) / nonrelativistic_gap(20.0)
    return _result("nonrelativistic_limit", 3.5 <= ratio <= 4.5, f"gap(c=10)/gap(c=20) = {ratio:.3f}")


def check_escape_time() -> CheckResult:
    start = PhaseState(0.0, 0.0, 1e-3, 0.0, 0.0)
    traj = integrate(COSINE_CHANNEL, start, IntegratorConfig(rtol=1e-10, t_end=15.0, max_dt=0.01))
    verdict = classify(traj, TrapCriteria(r_escape=10.0, horizon=15.0))
    expected = math.acosh(1e4)
    passed = (
        verdict.classification is Classification.ESCAPED
        and abs(verdict.escape_time - expected) <= 0.1
    )
    return _result(
        "escape_time",
        passed,
        f"{verdict.classification.value} at t={verdict.escape_time}, closed form {expected:.4f}",
    )


def preset_verdicts(key: str) -> Tuple[Trajectory, Tuple[TrapVerdict, TrapVerdict]]:
    """Integrate preset ``key`` and classify it over both verdict horizons."""

    scenario = resolve_preset(key).build()
    traj = integrate(scenario.model, scenario.initial_state, scenario.integrator)
    return traj, verdict_pair(traj, scenario.trapping)


def check_figure_one() -> CheckResult:
    _, (slow_short, slow_long) = preset_verdicts("fig1_nonrel")
    fast, (fast_short, fast_long) = preset_verdicts("fig1_rel")
    # a run cut short by a Γ breakdown stays Undecided
    passed = (
        slow_short.classification is Classification.TRAPPED
        and slow_short.max_radius < 1.0
        and fast_short.classification is Classification.UNDECIDED
        and fast_long.classification is Classification.UNDECIDED
        and fast.termination is Termination.GAMMA_UNDEFINED
    )
    return _result(
        "figure_one",
        passed,
        f"fig1_nonrel {slow_short.classification.value}/{slow_long.classification.value} "
        f"(max r {slow_short.max_radius:.3g} over t<=20), "
        f"fig1_rel {fast_short.classification.value}/{fast_long.classification.value} "
        f"({fast.termination.value} at t={fast.final.t:.3f}, max r {fast_long.max_radius:.3g})",
    )


CHECKS = {
    spec.key: spec
    for spec in (
        CheckSpec("lorentz_factors", "Lorentz factor examples", check_lorentz_factors),
        CheckSpec("zero_velocity_reduction", "Relativistic laws at rest", check_zero_velocity_reduction),
        CheckSpec("phase_volume", "Phase-volume preservation", check_phase_volume),
        CheckSpec("rk4_order", "RK4 convergence order", check_rk4_order),
        CheckSpec("rk54_accuracy", "Adaptive RK accuracy", check_rk54_accuracy),
        CheckSpec("kapitza_integrals", "Kapitza H and I conservation", check_kapitza_integrals),
        CheckSpec("relativistic_energy", "Relativistic energy conservation", check_relativistic_energy),
        CheckSpec("euler_lagrange", "Euler-Lagrange residual", check_euler_lagrange),
        CheckSpec("nonrelativistic_limit", "Newtonian limit of rel_kapitza", check_nonrelativistic_limit),
        CheckSpec("escape_time", "Escape time closed form", check_escape_time),
        CheckSpec("figure_one", "Rotating saddle trap, slow and fast starts", check_figure_one),
    )
}


def run_checks(names: Optional[Iterable[str]] = None) -> List[CheckResult]:
    """Run the named checks (all by default); a raising check counts as failed."""

    selected = list(CHECKS) if names is None else list(names)
    results: List[CheckResult] = []
    for key in selected:
        if key not in CHECKS:
            raise ValueError(f"Unknown check '{key}'. Available: {', '.join(CHECKS)}")
        spec = CHECKS[key]
        logger.info("Running check %s", key)
        try:
            results.append(spec.run())
        except Exception as exc:  # noqa: BLE001 - reported as a failed check
            logger.exception("Check %s raised", key)
            results.append(CheckResult(key, False, f"{type(exc).__name__}: {exc}"))
    return results
