"""
Tests for the ground-phase collocation, feedforward compensation and the point-mass replay.
"""

import itertools
from pathlib import Path

import numpy as np
import pytest

from error import DomainError, InfeasibleProblemError, SolverError
from logic.nlp import NonlinearProgram
from logic.point_mass import PointMassSimulator
from logic.trajopt import (
    Transcription,
    build_problem,
    charge_to_plateau,
    feedforward_compensation,
    force_schedule,
    preset_config,
    reachable_leg_speed,
    solve,
    valve_timing,
)
from schema.enums import HopObjective, LiftoffReason, PneumaticMode
from schema.pneumatic import ATMOSPHERIC_PA, PneumaticConfig, TankState
from schema.robot import RobotModel
from schema.scenario import RELEASE_PRESSURE_PA, ScenarioFactory
from schema.trajectory import ForceSchedule, PhaseSolution, TrajOptConfig, TrajOptProblem, TrajSolution


def create_test_problem(**updates) -> TrajOptProblem:
    values = {
        "mass": 2.2,
        "leg_min": 0.18,
        "leg_max": 0.25,
        "apex_height": 0.30,
        "force_limit": 200.0,
        "speed_limit": 2.0,
        "mode": PneumaticMode.NONE,
        "descent_nodes": 6,
        "ascent_nodes": 6,
    }
    values.update(updates)
    return TrajOptProblem(**values)


def create_test_config(**updates) -> TrajOptConfig:
    return TrajOptConfig(**{"descent_nodes": 15, "ascent_nodes": 15, **updates})


def create_test_solution(problem: TrajOptProblem, tank_pressure: float) -> TrajSolution:
    n = problem.descent_nodes
    descent = PhaseSolution(
        times=np.linspace(0.0, 0.08, n),
        L=np.linspace(problem.leg_max, problem.leg_min, n),
        V=np.linspace(problem.touchdown_velocity, 0.0, n),
        F=np.full(n, 30.0),
        F_pneu=np.zeros(n),
    )
    ascent = descent.model_copy(update={"L": descent.L[::-1], "V": -descent.V[::-1]})
    return TrajSolution(
        descent=descent,
        ascent=ascent,
        apex_height=problem.apex_height,
        apex_clearance=problem.apex_height - problem.leg_max,
        objective_value=0.0,
        residuals={},
        iterations=0,
        tank_pressure=tank_pressure,
        mode=problem.mode,
        objective=problem.objective,
        backend="test",
    )


def test_touchdown_velocity():
    problem = create_test_problem(apex_height=0.293)
    assert problem.touchdown_velocity == pytest.approx(-0.9185, abs=1e-4)


def test_presets():
    periodic = preset_config(TrajOptConfig(), "periodic")
    assert periodic.objective is HopObjective.PERIODIC
    assert periodic.pneumatic_mode is PneumaticMode.PUMP_ONLY
    enhanced = preset_config(TrajOptConfig(), "enhanced")
    assert enhanced.pneumatic_mode is PneumaticMode.PUMP_ACTUATOR
    assert preset_config(TrajOptConfig(), "motor-only-max").pneumatic_mode is PneumaticMode.NONE
    with pytest.raises(InfeasibleProblemError):
        preset_config(TrajOptConfig(), "moonshot")


def test_build_problem_rejects_contradictory_settings():
    robot, pneumatic = RobotModel(), PneumaticConfig()
    with pytest.raises(InfeasibleProblemError):
        build_problem(robot, pneumatic, TrajOptConfig(apex_height=0.1))
    with pytest.raises(InfeasibleProblemError):
        build_problem(robot, pneumatic, TrajOptConfig(min_duration=0.5, max_duration=0.1))
    vented = pneumatic.model_copy(update={"connected": False})
    with pytest.raises(InfeasibleProblemError):
        build_problem(robot, vented, TrajOptConfig(pneumatic_mode=PneumaticMode.PUMP_ONLY))


def test_build_problem_motor_only_disconnects_pneumatics():
    cfg = preset_config(create_test_config(), "motor-only-max")
    problem = build_problem(RobotModel(), PneumaticConfig(), cfg)
    assert not problem.pneumatic.connected
    assert problem.leg_min < problem.leg_max
    assert problem.apex_height == pytest.approx(problem.leg_max + cfg.apex_clearance)
    assert problem.tank.pressure == ATMOSPHERIC_PA


@pytest.mark.parametrize(
    "objective, mode",
    [
        (HopObjective.PERIODIC, PneumaticMode.NONE),
        (HopObjective.EXPLOSIVE, PneumaticMode.NONE),
        (HopObjective.PERIODIC, PneumaticMode.PUMP_ONLY),
        (HopObjective.EXPLOSIVE, PneumaticMode.PUMP_ACTUATOR),
    ],
)
def test_transcription_derivatives_match_finite_differences(objective, mode):
    problem = create_test_problem(
        objective=objective, mode=mode, tank=TankState(pressure=RELEASE_PRESSURE_PA), valve_lead=0.02
    )
    transcription = Transcription(problem)
    rng = np.random.default_rng(1)
    p = transcription.initial_guess() * transcription.scale
    p = p * (1.0 + 0.05 * rng.standard_normal(p.size))
    # liftoff node exactly at full extension, where the actuator runs out of stroke
    a_l, _, _ = transcription.indices(1)
    p[a_l[-1]] = problem.leg_max
    h = 1e-7

    for function in (transcription.defects, transcription.boundary, transcription.path):
        _, jac = function(p)
        numeric = np.empty_like(jac)
        for j in range(p.size):
            step = np.zeros(p.size)
            step[j] = h * max(abs(p[j]), 1.0)
            numeric[:, j] = (function(p + step)[0] - function(p - step)[0]) / (2 * step[j])
        assert np.allclose(jac, numeric, rtol=1e-5, atol=1e-6)

    _, grad = transcription.objective(p)
    numeric = np.empty(p.size)
    for j in range(p.size):
        step = np.zeros(p.size)
        step[j] = h * max(abs(p[j]), 1.0)
        ahead, _ = transcription.objective(p + step)
        behind, _ = transcription.objective(p - step)
        numeric[j] = (ahead - behind) / (2 * step[j])
    assert np.allclose(grad, numeric, rtol=1e-5, atol=1e-6)


def test_periodic_motor_only_plan_returns_to_apex():
    cfg = create_test_config(objective=HopObjective.PERIODIC, pneumatic_mode=PneumaticMode.NONE)
    problem = build_problem(RobotModel(), PneumaticConfig(), cfg)
    solution = solve(problem)
    assert solution.apex_height == pytest.approx(problem.apex_height, abs=1e-5)
    assert solution.residuals["max_defect"] <= problem.tolerance
    assert solution.descent.L[0] == pytest.approx(problem.leg_max, abs=1e-6)
    assert solution.ascent.L[0] == pytest.approx(problem.leg_min, abs=1e-6)
    assert np.all(solution.descent.grf >= -1e-4)
    assert solution.valve_trigger_time is None


def test_solver_error_carries_best_iterate():
    cfg = create_test_config(pneumatic_mode=PneumaticMode.NONE, max_iterations=1, tolerance=1e-30)
    problem = build_problem(RobotModel(), PneumaticConfig(), cfg)
    with pytest.raises(SolverError) as e:
        solve(problem)
    assert e.value.best_iterate is not None
    assert e.value.best_iterate.size == Transcription(problem).size
    assert "max_defect" in e.value.residuals


def test_periodic_preset_solves_on_shipped_scenario():
    path = Path(__file__).resolve().parents[1] / "periodic-charge-config.yaml"
    scenario = ScenarioFactory.create_from_file(path)
    problem = build_problem(scenario.robot, scenario.pneumatic, preset_config(scenario.trajopt, "periodic"))
    solution = solve(problem)
    assert solution.residuals["max_defect"] < 1e-6
    assert solution.residuals["max_violation"] <= problem.tolerance
    assert solution.apex_height == pytest.approx(problem.apex_height, abs=1e-5)
    assert solution.ascent.grf[-1] == pytest.approx(0.0, abs=1e-4)
    assert np.all(solution.descent.V <= 1e-9)
    assert np.all(solution.ascent.V >= -1e-9)


def test_periodic_apex_beyond_motor_speed_is_rejected():
    robot, pneumatic = RobotModel(), PneumaticConfig()
    reachable = build_problem(robot, pneumatic, preset_config(TrajOptConfig(apex_clearance=0.02), "periodic"))
    ceiling = reachable_leg_speed(reachable)
    assert -reachable.touchdown_velocity < ceiling < reachable.speed_limit
    with pytest.raises(InfeasibleProblemError, match="periodic apexes must stay below"):
        build_problem(robot, pneumatic, preset_config(TrajOptConfig(apex_clearance=0.043), "periodic"))
    explosive = preset_config(TrajOptConfig(apex_clearance=0.043), "motor-only-max")
    assert build_problem(robot, pneumatic, explosive).apex_height > reachable.apex_height


def test_initial_guess_meets_defects_and_boundary_states():
    problem = build_problem(RobotModel(), PneumaticConfig(), create_test_config())
    transcription = Transcription(problem)
    p = transcription.initial_guess() * transcription.scale
    defects, _ = transcription.defects(p)
    boundary, _ = transcription.boundary(p)
    assert np.max(np.abs(defects)) < 1e-10
    assert np.max(np.abs(boundary)) < 1e-10


def test_unconverged_plan_is_flagged(monkeypatch):
    def stalled(self, x, active_tolerance=1e-6):
        return 1e-2

    monkeypatch.setattr(NonlinearProgram, "stationarity", stalled)
    cfg = create_test_config(pneumatic_mode=PneumaticMode.NONE)
    problem = build_problem(RobotModel(), PneumaticConfig(), cfg)
    solution = solve(problem)
    assert not solution.converged
    assert solution.residuals["stationarity"] == 1e-2
    assert solution.residuals["max_defect"] <= problem.tolerance


@pytest.mark.parametrize("preset", ["motor-only-max", "enhanced"])
def test_explosive_presets_solve(preset):
    cfg = preset_config(create_test_config(tank_pressure=RELEASE_PRESSURE_PA), preset)
    problem = build_problem(RobotModel(), PneumaticConfig(), cfg)
    solution = solve(problem)
    assert solution.residuals["max_defect"] <= problem.tolerance
    assert solution.ascent.L[-1] == pytest.approx(problem.leg_max, abs=1e-6)
    assert solution.apex_clearance > 0.0
    if preset == "enhanced":
        assert solution.valve_trigger_time is not None
        assert 0.0 <= solution.valve_trigger_time <= solution.descent.duration


def test_enhanced_plan_dominates_motor_only_and_periodic():
    robot, pneumatic = RobotModel(), PneumaticConfig()
    charged = create_test_config(tank_pressure=RELEASE_PRESSURE_PA)
    plans = {
        preset: solve(build_problem(robot, pneumatic, preset_config(charged, preset)))
        for preset in ("motor-only-max", "enhanced")
    }
    periodic = preset_config(create_test_config(), "periodic")
    plans["periodic"] = solve(build_problem(robot, pneumatic, periodic))
    assert plans["motor-only-max"].apex_height >= plans["periodic"].apex_height - 1e-6
    assert plans["enhanced"].apex_height > plans["motor-only-max"].apex_height
    # enhanced hop at the release pressure: amplification and apex band
    assert plans["enhanced"].apex_clearance >= 3.0 * plans["motor-only-max"].apex_clearance
    assert 0.15 <= plans["enhanced"].apex_clearance <= 0.30


def test_grid_refinement_keeps_apex():
    robot, pneumatic = RobotModel(), PneumaticConfig()
    apexes = [
        solve(build_problem(robot, pneumatic, preset_config(create_test_config(**nodes), "motor-only-max")))
        for nodes in ({"descent_nodes": 15, "ascent_nodes": 15}, {"descent_nodes": 30, "ascent_nodes": 30})
    ]
    assert apexes[1].apex_height == pytest.approx(apexes[0].apex_height, abs=5e-4)


def exhaustive_motor_only_apex(problem: TrajOptProblem, levels: int = 10) -> float:
    """Best apex over ascents with three equal-stroke segments of constant motor force."""
    g, m = problem.gravity, problem.mass
    segment = (problem.leg_max - problem.leg_min) / 3.0

    def envelope(rate: float) -> float:
        z = 1.0 - rate / problem.speed_limit
        w = problem.smoothing
        return problem.force_limit * 0.5 * (z + np.sqrt(z * z + w * w))

    best = -np.inf
    for forces in itertools.product(np.linspace(0.0, problem.force_limit, levels), repeat=3):
        rate = 0.0
        for force in forces:
            squared = rate * rate + 2.0 * (force / m - g) * segment
            if squared < 0.0:
                break
            end = np.sqrt(squared)
            if force > envelope(max(rate, end)):
                break
            rate = end
        else:
            best = max(best, problem.leg_max + rate * rate / (2.0 * g))
    return best


def test_explosive_plan_beats_exhaustive_segment_search():
    cfg = preset_config(create_test_config(), "motor-only-max")
    problem = build_problem(RobotModel(), PneumaticConfig(), cfg)
    oracle = exhaustive_motor_only_apex(problem)
    assert np.isfinite(oracle)
    assert solve(problem).apex_height >= oracle - 1e-3


def test_charging_with_solved_plan_plateaus():
    problem = build_problem(RobotModel(), PneumaticConfig(), preset_config(create_test_config(), "periodic"))
    solution = solve(problem)
    pressures = charge_to_plateau(problem, solution, max_cycles=20, dt=5e-4)
    increments = np.diff(pressures)
    assert np.all(increments >= 0.0)
    assert increments[0] > 0.0
    assert increments[-1] < 0.5 * increments[0]


def test_feedforward_compensation():
    cfg = create_test_config()
    problem = build_problem(RobotModel(), PneumaticConfig(), cfg)
    planned = ATMOSPHERIC_PA + 50e3
    solution = create_test_solution(problem, planned)
    same = feedforward_compensation(problem, solution, planned)
    assert same == pytest.approx(solution.descent.F)
    higher = feedforward_compensation(problem, solution, planned + 100e3)
    assert np.all(higher <= solution.descent.F + 1e-9)
    assert same.shape == solution.descent.F.shape


def test_valve_timing_and_schedule():
    problem = create_test_problem(valve_lead=0.03)
    solution = create_test_solution(problem, ATMOSPHERIC_PA)
    assert valve_timing(problem, solution) == pytest.approx(0.05)
    late = create_test_problem(valve_lead=0.5)
    assert valve_timing(late, solution) == 0.0

    schedule = force_schedule(solution, trigger_time=0.05)
    assert schedule.stance_duration == pytest.approx(0.16)
    assert schedule.force(True, 0.04) == pytest.approx(30.0)
    assert schedule.force(False, 1.0) == pytest.approx(30.0)
    assert schedule.trigger_time == 0.05


def create_constant_schedule(force: float) -> ForceSchedule:
    return ForceSchedule(
        descent_times=[0.0, 1.0],
        descent_forces=[force, force],
        ascent_times=[0.0, 1.0],
        ascent_forces=[force, force],
    )


def test_point_mass_constant_force_bounces_back_to_apex():
    problem = create_test_problem()
    weight = problem.mass * problem.gravity
    cycle = PointMassSimulator(problem).run_cycle(create_constant_schedule(2.0 * weight), problem.tank)
    assert cycle.apex_height == pytest.approx(problem.apex_height, abs=1e-6)
    assert cycle.descent_duration == pytest.approx(-problem.touchdown_velocity / problem.gravity, abs=1e-8)
    assert cycle.motor_work == pytest.approx(0.0, abs=1e-6)
    assert cycle.pump_work == 0.0
    assert not cycle.released
    assert cycle.liftoff_reason is LiftoffReason.FULL_EXTENSION


def test_point_mass_reports_why_the_stance_ended():
    problem = create_test_problem()
    weight = problem.mass * problem.gravity
    simulator = PointMassSimulator(problem)

    unloaded = ForceSchedule(
        descent_times=[0.0, 1.0],
        descent_forces=[2.0 * weight, 2.0 * weight],
        ascent_times=[0.0, 1.0],
        ascent_forces=[0.0, 0.0],
    )
    cycle = simulator.run_cycle(unloaded, problem.tank)
    assert cycle.liftoff_reason is LiftoffReason.GROUND_FORCE
    assert cycle.stance_duration == pytest.approx(cycle.descent_duration, abs=1e-8)

    short = ForceSchedule(
        descent_times=[0.0, 1.0],
        descent_forces=[2.0 * weight, 2.0 * weight],
        ascent_times=[0.0, 0.01],
        ascent_forces=[2.0 * weight, 2.0 * weight],
    )
    cycle = simulator.run_cycle(short, problem.tank)
    assert cycle.liftoff_reason is LiftoffReason.SCHEDULE_END
    assert cycle.stance_duration == pytest.approx(cycle.descent_duration + 0.01, abs=1e-8)
    assert cycle.apex_height < problem.apex_height


def test_point_mass_pump_charges_tank_and_removes_energy():
    cfg = create_test_config(apex_clearance=0.05)
    problem = build_problem(RobotModel(), PneumaticConfig(), cfg)
    weight = problem.mass * problem.gravity
    simulator = PointMassSimulator(problem)
    cycle = simulator.run_cycle(create_constant_schedule(2.0 * weight), problem.tank)
    assert cycle.tank.pressure >= problem.tank.pressure
    assert cycle.pump_work <= 0.0
    assert cycle.apex_height <= cycle.apex_start + 1e-9
    assert cycle.deepest_compression > 0.0


def test_point_mass_rejects_apex_below_leg():
    problem = create_test_problem()
    with pytest.raises(DomainError):
        PointMassSimulator(problem).run_cycle(create_constant_schedule(30.0), problem.tank, apex_height=0.2)
    with pytest.raises(DomainError):
        PointMassSimulator(problem, dt=0.0)


def test_charge_to_plateau_never_lowers_the_tank():
    problem = build_problem(RobotModel(), PneumaticConfig(), create_test_config())
    solution = create_test_solution(problem, ATMOSPHERIC_PA)
    pressures = charge_to_plateau(problem, solution, max_cycles=4, dt=5e-4)
    assert pressures[0] == ATMOSPHERIC_PA
    assert 2 <= len(pressures) <= 5
    assert np.all(np.diff(pressures) >= 0.0)
    assert pressures[1] > ATMOSPHERIC_PA
