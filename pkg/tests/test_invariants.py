import math

import numpy as np
import pytest

from curlforce.checks import EULER_LAGRANGE_MODELS, euler_lagrange_case, euler_lagrange_worst
from curlforce.core import PhaseState, RelativityParams
from curlforce.integrators import IntegratorConfig, Termination, Trajectory, integrate
from curlforce.invariants import (
    ResidualSeries,
    el_residual,
    energy_rate,
    energy_rel,
    fradkin_tensor,
    hamiltonian_eff_rel,
    hamiltonian_nonrel,
    invariant_reports,
    phase_space_divergence,
    relative_drift,
    with_invariants,
)
from curlforce.models import (
    FlappingParams,
    ForceModel,
    KapitzaParams,
    MonkeySaddleParams,
    NoLagrangian,
    RotatingSaddleParams,
)


REL = RelativityParams(1.0)
SHAFT = KapitzaParams(1.0, 0.5, convention="shaft")
TIGHT = IntegratorConfig(rtol=1e-12, atol=1e-14, t_end=10.0)
SHORT = IntegratorConfig(rtol=1e-10, atol=1e-12, t_end=2.0, max_dt=2e-3)


def at(x: float = 0.0, y: float = 0.0, vx: float = 0.0, vy: float = 0.0, t: float = 0.0) -> PhaseState:
    return PhaseState(t, x, y, vx, vy)


def cosine_trajectory(offset: float = 0.0, n: int = 2001, t_end: float = 2.0) -> Trajectory:
    samples = tuple(at(x=math.cos(t) + offset, vx=-math.sin(t), t=t) for t in np.linspace(0.0, t_end, n))
    return Trajectory(samples, (None,) * len(samples))


def test_hamiltonian_examples() -> None:
    p = KapitzaParams(1.0, 0.0)
    assert hamiltonian_nonrel(at(x=1.0), p) == pytest.approx(0.5)
    assert hamiltonian_nonrel(at(vx=1.0, vy=1.0), p) == pytest.approx(0.0)
    assert hamiltonian_nonrel(at(x=1.0, y=1.0), KapitzaParams(1.0, 2.0)) == pytest.approx(2.0)


def test_fradkin_tensor_examples() -> None:
    assert fradkin_tensor(at(vx=1.0, vy=1.0), KapitzaParams(1.0, 0.0)) == pytest.approx(-1.0)
    assert fradkin_tensor(at(x=1.0, y=1.0), KapitzaParams(1.0, 0.0)) == pytest.approx(-1.0)
    assert fradkin_tensor(at(x=2.0), KapitzaParams(0.0, 1.0)) == pytest.approx(2.0)


def test_energy_rel_examples() -> None:
    model = ForceModel("rel_kapitza", KapitzaParams(1.0, 0.0), REL)
    assert energy_rel(at(), model) == pytest.approx(1.0)
    assert energy_rel(at(x=1.0), model) == pytest.approx(1.5)
    assert energy_rel(at(vx=0.6), model) == pytest.approx(1.25)
    scaled = ForceModel("rel_kapitza", KapitzaParams(1.0, 0.0), RelativityParams(2.0))
    assert energy_rel(at(), scaled) == pytest.approx(4.0)


def test_energy_rel_rejects_non_autonomous_or_newtonian_models() -> None:
    with pytest.raises(ValueError, match="autonomous relativistic"):
        energy_rel(at(), ForceModel("kapitza", KapitzaParams(1.0, 0.0)))
    with pytest.raises(ValueError, match="autonomous relativistic"):
        energy_rel(at(), ForceModel("rel_rotating_saddle", RotatingSaddleParams(0.1, 0.5), REL))


def test_hamiltonian_eff_rel_examples() -> None:
    p = KapitzaParams(1.0, 0.0)
    assert hamiltonian_eff_rel(at(), p, REL) == 0.0
    assert hamiltonian_eff_rel(at(vx=0.6), p, REL) == pytest.approx(0.75 ** 2 / 2.5)
    assert hamiltonian_eff_rel(at(x=1.0), p, REL) == pytest.approx(0.5)


def test_relative_drift() -> None:
    assert relative_drift(np.array([2.0, 2.5, 1.0])) == pytest.approx(0.5)
    assert relative_drift(np.array([0.0, 1e-13])) == pytest.approx(0.1)
    assert relative_drift(np.array([3.0])) == 0.0


def test_shaft_kapitza_conserves_h_and_i() -> None:
    model = ForceModel("kapitza", SHAFT)
    traj = integrate(model, at(x=1.0, y=0.5, vy=0.2), TIGHT)
    assert traj.termination is Termination.COMPLETED
    reports = invariant_reports(model, traj)
    assert set(reports) == {"H_nonrel", "I_fradkin"}
    for report in reports.values():
        assert len(report.series) == len(traj)
        assert report.max_rel_drift <= 1e-7


def test_corollary_kapitza_does_not_conserve_h() -> None:
    model = ForceModel("kapitza", KapitzaParams(1.0, 0.5))
    traj = integrate(model, at(x=1.0, y=0.5, vy=0.2), TIGHT)
    assert invariant_reports(model, traj)["H_nonrel"].max_rel_drift > 1e-2


def test_relativistic_energy_is_conserved() -> None:
    model = ForceModel("rel_kapitza", KapitzaParams(1.0, 0.5), REL)
    cfg = IntegratorConfig(rtol=1e-12, atol=1e-14, t_end=5.0, max_dt=0.05)
    traj = integrate(model, at(x=0.5, vy=0.3), cfg)
    assert traj.termination is Termination.COMPLETED
    assert invariant_reports(model, traj, ["E_legendre"])["E_legendre"].max_rel_drift <= 1e-8
    rate = energy_rate(model, traj)
    assert np.max(np.abs(rate.values)) <= 1e-6


def test_energy_rate_is_nan_where_gamma_breaks_down() -> None:
    model = ForceModel("rel_kapitza", KapitzaParams(1.0, 0.0), REL)
    samples = tuple(at(t=0.1 * i) for i in range(6)) + (at(vx=1.5, t=0.6),)
    rate = energy_rate(model, Trajectory(samples, (None,) * len(samples)))
    assert len(rate.values) == 5
    np.testing.assert_allclose(rate.values[:-1], 0.0, atol=1e-9)
    assert math.isnan(rate.values[-1])
    assert rate.finite_fraction == pytest.approx(0.8)


def test_invariant_reports_filter_by_model() -> None:
    model = ForceModel("kapitza", SHAFT)
    traj = integrate(model, at(x=1.0), IntegratorConfig(t_end=1.0))
    assert set(invariant_reports(model, traj, ["I_fradkin", "E_legendre"])) == {"I_fradkin"}
    saddle = ForceModel("rotating_saddle", RotatingSaddleParams(0.1, 0.5))
    assert invariant_reports(saddle, integrate(saddle, at(x=1.0), IntegratorConfig(t_end=1.0))) == {}


def test_with_invariants_attaches_series() -> None:
    model = ForceModel("rel_monkey", MonkeySaddleParams(1.0, 0.5), REL)
    traj = integrate(model, at(x=0.2, vx=0.1), IntegratorConfig(t_end=1.0))
    enriched = with_invariants(model, traj)
    assert set(enriched.invariants) == {"E_legendre"}
    assert len(enriched.invariants["E_legendre"]) == len(traj)
    assert traj.invariants == {}


def test_residual_series_ignores_nan() -> None:
    series = ResidualSeries(np.array([0.0, 1.0, 2.0]), np.array([np.nan, 1.0, 3.0]))
    assert series.max() == 3.0
    assert series.finite_fraction == pytest.approx(2.0 / 3.0)
    empty = ResidualSeries(np.array([0.0]), np.array([np.nan]))
    assert math.isnan(empty.max())


def test_el_residual_vanishes_on_exact_solution() -> None:
    model = ForceModel("kapitza", KapitzaParams(1.0, 0.0))
    clean = el_residual(model, cosine_trajectory())
    assert len(clean.values) == 1999
    assert clean.max() <= 1e-5
    corrupted = el_residual(model, cosine_trajectory(offset=1e-3))
    assert corrupted.max() >= 10.0 * clean.max()
    assert corrupted.max() == pytest.approx(1e-3, rel=1e-2)


def test_el_residual_stride_from_step() -> None:
    model = ForceModel("kapitza", KapitzaParams(1.0, 0.0))
    strided = el_residual(model, cosine_trajectory(), h=1e-2)
    assert strided.times[0] == pytest.approx(1e-2)
    assert strided.max() <= 1e-4
    with pytest.raises(ValueError, match="too short"):
        el_residual(model, cosine_trajectory(n=5), h=2.0)


def test_el_residual_needs_a_lagrangian() -> None:
    flap = ForceModel("flapping_newton", FlappingParams(0.1, 0.5))
    with pytest.raises(NoLagrangian):
        el_residual(flap, cosine_trajectory())
    rescaled = ForceModel("rel_flap", FlappingParams(0.1, 0.5, tau_rescaled=True), REL)
    with pytest.raises(NoLagrangian):
        el_residual(rescaled, cosine_trajectory())


def test_shaft_kapitza_satisfies_euler_lagrange() -> None:
    model = ForceModel("kapitza", SHAFT)
    traj = integrate(model, at(x=0.3, y=0.1, vx=0.5, vy=0.5), SHORT)
    assert traj.termination is Termination.COMPLETED
    residual = el_residual(model, traj)
    assert residual.finite_fraction == 1.0
    assert residual.max() <= 1e-4


@pytest.mark.parametrize("model_id", EULER_LAGRANGE_MODELS)
def test_relativistic_models_satisfy_euler_lagrange_from_preset_starts(model_id: str) -> None:
    worst, traj = euler_lagrange_worst(model_id)
    assert traj.termination in (Termination.COMPLETED, Termination.GAMMA_UNDEFINED)
    assert traj.final.t > 1.0
    assert worst <= 1e-4


def test_euler_lagrange_cases_use_the_fast_figure_starts() -> None:
    model, start = euler_lagrange_case("rel_flap")
    assert model.params.form == "lagrangian"
    assert (start.vx, start.vy) == (0.5, 0.5)
    with pytest.raises(ValueError, match="Available: rel_kapitza"):
        euler_lagrange_case("kapitza")


def test_halving_the_stride_quarters_the_residual() -> None:
    # x = cos t: the residual is the h²/6 truncation of d/dt(−sin t)
    model = ForceModel("kapitza", KapitzaParams(1.0, 0.0))
    coarse = el_residual(model, cosine_trajectory(), h=1e-2).max()
    fine = el_residual(model, cosine_trajectory(), h=5e-3).max()
    assert coarse == pytest.approx(1e-4 / 6.0, rel=0.05)
    assert 3.5 <= coarse / fine <= 4.5


def test_printed_flap_equations_violate_euler_lagrange() -> None:
    printed = ForceModel("rel_flap", FlappingParams(0.1, 0.5, (1.0, 1.0, 1.0), (1.0, 1.0, 1.0)), REL)
    traj = integrate(printed, at(x=0.3, y=0.1, vx=0.5, vy=0.5), SHORT)
    assert el_residual(printed, traj).max() > 1e-2


def test_corollary_kapitza_violates_euler_lagrange() -> None:
    model = ForceModel("kapitza", KapitzaParams(1.0, 0.5))
    traj = integrate(model, at(x=1.0), SHORT)
    assert el_residual(model, traj).max() > 0.1


@pytest.mark.parametrize(
    "model",
    [
        ForceModel("kapitza", KapitzaParams(1.0, 0.5)),
        ForceModel("rotating_saddle", RotatingSaddleParams(0.7, 0.5)),
        ForceModel("monkey", MonkeySaddleParams(1.0, -0.5)),
        ForceModel("flapping_newton", FlappingParams(0.3, 0.5, (1.0, 1.0, 1.0))),
    ],
    ids=lambda m: m.model_id,
)
def test_newtonian_flows_preserve_phase_volume(model: ForceModel) -> None:
    rng = np.random.default_rng(1)
    for t, x, y, vx, vy in rng.uniform(-1.0, 1.0, size=(25, 5)):
        assert abs(phase_space_divergence(model, at(x, y, vx, vy, t))) <= 1e-8
