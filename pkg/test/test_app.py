"""
Tests for the experiment runner and sweep points.
"""

import math

import numpy as np
import pytest

import app
from app import HopperExperiment, Plan, sweep_point
from error import SolverError
from logic.energy import energy_audit, ledger
from logic.trajopt import build_problem, preset_config
from schema.enums import EventKind, TaskKind
from schema.pneumatic import ATMOSPHERIC_PA
from schema.scenario import RELEASE_PRESSURE_PA, ScenarioFactory
from schema.simulation import CycleSummary, SimTrace, WorkState
from schema.trajectory import PhaseSolution, TrajOptProblem, TrajSolution


def create_test_solution(problem: TrajOptProblem, apex_clearance: float = 0.02) -> TrajSolution:
    n = 10
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
        apex_height=problem.leg_max + apex_clearance,
        apex_clearance=apex_clearance,
        objective_value=0.0,
        residuals={},
        iterations=0,
        tank_pressure=problem.tank.pressure,
        mode=problem.mode,
        objective=problem.objective,
        backend="test",
    )


def create_test_cycle(cycle: int, apex: float, released: bool = False) -> CycleSummary:
    return CycleSummary(
        cycle=cycle,
        start_time=0.4 * cycle,
        end_time=0.4 * (cycle + 1),
        apex_height=apex,
        liftoff_velocity=0.6,
        liftoff_kinetic_energy=0.8 if released else 0.4,
        tank_pressure_start=ATMOSPHERIC_PA,
        tank_pressure_touchdown=ATMOSPHERIC_PA,
        tank_pressure_end=ATMOSPHERIC_PA,
        deepest_compression=0.03,
        released=released,
        work=WorkState(),
        mechanical_energy_change=0.0,
    )


@pytest.mark.parametrize(
    "kind, presets",
    [
        ("periodic-charge", ["periodic"]),
        ("motor-only-max", ["motor-only-max"]),
        ("enhanced-hop", ["periodic", "enhanced", "motor-only-max"]),
        ("platform-jump", ["periodic", "enhanced", "motor-only-max"]),
    ],
)
def test_presets_follow_task(kind, presets):
    scenario = ScenarioFactory.create_scenario({"task": {"kind": kind}})
    assert HopperExperiment(scenario).presets() == presets


def test_plan_replays_saved_periodic_solution():
    scenario = ScenarioFactory.create_scenario({"sim": {"dt_s": 5e-4}})
    cfg = preset_config(scenario.trajopt, "periodic")
    problem = build_problem(scenario.robot, scenario.pneumatic, cfg)
    saved = create_test_solution(problem)
    plan = HopperExperiment(scenario).plan("periodic", solution=saved)
    assert plan.solution is saved
    assert plan.problem.tank.pressure == ATMOSPHERIC_PA
    assert 1 <= len(plan.replay) <= 3
    assert plan.replay[0].tank.pressure > ATMOSPHERIC_PA


def test_summary_reports_amplification():
    scenario = ScenarioFactory.create_scenario({"task": {"kind": "enhanced-hop"}})
    robot, pneumatic = scenario.robot, scenario.pneumatic
    motor_problem = build_problem(robot, pneumatic, preset_config(scenario.trajopt, "motor-only-max"))
    enhanced_cfg = preset_config(scenario.trajopt, "enhanced").model_copy(
        update={"tank_pressure": RELEASE_PRESSURE_PA}
    )
    enhanced_problem = build_problem(robot, pneumatic, enhanced_cfg)
    plans = {
        "motor-only-max": Plan(
            preset="motor-only-max", problem=motor_problem, solution=create_test_solution(motor_problem, 0.1)
        ),
        "enhanced": Plan(
            preset="enhanced", problem=enhanced_problem, solution=create_test_solution(enhanced_problem, 0.3)
        ),
    }
    trace = SimTrace(
        cycles=[
            create_test_cycle(0, 0.02),
            create_test_cycle(1, 0.04),
            create_test_cycle(2, 0.26, released=True),
        ]
    )
    baseline = SimTrace(cycles=[create_test_cycle(0, 0.03), create_test_cycle(1, 0.05)])
    energy = ledger(trace, scenario.pneumatic.tank_volume, scenario.pneumatic.atmospheric)
    summary = HopperExperiment(scenario).summarize(trace, energy, energy_audit(trace), plans, baseline)
    assert summary["task"] == TaskKind.ENHANCED_HOP.value
    assert summary["release_pressure_pa"] == RELEASE_PRESSURE_PA
    assert summary["cycles"] == 3
    assert summary["regular_apex"]["mean"] == pytest.approx(0.03)
    assert summary["enhanced_apex"]["max"] == pytest.approx(0.26)
    # simulated over simulated, predicted over predicted
    assert summary["motor_only_apex_simulated"] == pytest.approx(0.05)
    assert summary["amplification_factor"] == pytest.approx(5.2)
    assert summary["motor_only_apex_predicted"] == pytest.approx(0.1)
    assert summary["amplification_factor_predicted"] == pytest.approx(3.0)
    assert summary["liftoff_energy_ratio"] == pytest.approx(2.0)


def test_summary_without_baseline_has_no_simulated_amplification():
    scenario = ScenarioFactory.create_scenario({"task": {"kind": "enhanced-hop"}})
    cfg = preset_config(scenario.trajopt, "motor-only-max")
    problem = build_problem(scenario.robot, scenario.pneumatic, cfg)
    solution = create_test_solution(problem)
    plans = {"motor-only-max": Plan(preset="motor-only-max", problem=problem, solution=solution)}
    trace = SimTrace(cycles=[create_test_cycle(0, 0.26, released=True)])
    energy = ledger(trace, scenario.pneumatic.tank_volume, scenario.pneumatic.atmospheric)
    summary = HopperExperiment(scenario).summarize(trace, energy, energy_audit(trace), plans)
    assert "amplification_factor" not in summary
    assert "amplification_factor_predicted" not in summary
    assert summary["motor_only_apex_predicted"] == pytest.approx(0.02)


def test_summary_without_cycles():
    scenario = ScenarioFactory.create_scenario({})
    trace = SimTrace()
    energy = ledger(trace, scenario.pneumatic.tank_volume, scenario.pneumatic.atmospheric)
    summary = HopperExperiment(scenario).summarize(trace, energy, energy_audit(trace), {})
    assert summary["apex"]["count"] == 0
    assert summary["final_tank_pa"] is None
    assert summary["release_pressure_pa"] is None
    assert "amplification_factor" not in summary


def test_sweep_point_reports_unsolved_point(monkeypatch):
    def fail(problem):
        raise SolverError("no convergence", residuals={"max_defect": 1.0})

    monkeypatch.setattr(app, "solve", fail)
    scenario = ScenarioFactory.create_scenario({"task": {"kind": "enhanced-hop"}})
    row = sweep_point(scenario, ATMOSPHERIC_PA + 150e3, 2.5)
    assert row["tank_pa"] == ATMOSPHERIC_PA + 150e3
    assert row["mass_kg"] == 2.5
    assert not row["converged"]
    assert math.isnan(row["apex_replayed_m"])
    assert not row["feasible"]


def test_sweep_point_passes_convergence_through(monkeypatch):
    def stalled(problem):
        return create_test_solution(problem, 0.2).model_copy(update={"converged": False})

    monkeypatch.setattr(app, "solve", stalled)
    scenario = ScenarioFactory.create_scenario({"task": {"kind": "enhanced-hop"}, "sim": {"dt_s": 5e-4}})
    row = sweep_point(scenario, RELEASE_PRESSURE_PA, 2.2)
    assert row["feasible"]
    assert not row["converged"]
    assert row["apex_predicted_m"] == pytest.approx(0.2)
    assert math.isfinite(row["apex_replayed_m"])


def test_motor_only_baseline_hops_in_order_and_balances_energy():
    scenario = ScenarioFactory.create_scenario({"task": {"kind": "enhanced-hop"}, "sim": {"dt_s": 2e-4}})
    experiment = HopperExperiment(scenario)
    trace = experiment.baseline(experiment.plan("motor-only-max"), cycles=3)
    assert trace.termination == "completed"
    assert [cycle.cycle for cycle in trace.cycles] == [0, 1, 2]
    order = [EventKind.TOUCHDOWN, EventKind.TANK_UPDATE, EventKind.LIFTOFF, EventKind.APEX]
    kinds = [e.kind for e in trace.events if e.kind in order]
    assert kinds == order * 3
    assert all(cycle.apex_height > 0.0 and not cycle.released for cycle in trace.cycles)
    assert energy_audit(trace).passed
