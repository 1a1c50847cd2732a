"""
The hopper experiment runner
----------------------------
Turns a scenario into trajectory plans, simulations and sweep points.
"""

from typing import Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict

from error import SimulationDivergedError, SolverError
from logic.controllers import HopController
from logic.energy import amplification_factor, energy_audit, ledger
from logic.point_mass import PointMassSimulator
from logic.simulator import HybridSimulator
from logic.trajopt import (
    build_problem,
    feedforward_compensation,
    force_schedule,
    preset_config,
    solve,
)
from schema.energy import EnergyAudit, EnergyLedger
from schema.enums import TaskKind
from schema.scenario import ENHANCED_TASKS, Scenario
from schema.simulation import PointMassCycle, SimTrace
from schema.trajectory import TrajOptProblem, TrajSolution


BASELINE_CYCLES = 3


class Plan(BaseModel):
    """
    A solved trajectory problem and its point-mass replay.

    :param str preset: Preset name.
    :param TrajOptProblem problem: The problem.
    :param TrajSolution solution: The solution.
    :param list[PointMassCycle] replay: Cycles of the point-mass replay.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    preset: str
    problem: TrajOptProblem
    solution: TrajSolution
    replay: list[PointMassCycle] = []


class SimulationResult(BaseModel):
    """
    Everything a simulation run produces.

    :param SimTrace trace: The recorded run.
    :param EnergyLedger ledger: Per-cycle energy rows.
    :param EnergyAudit audit: Per-cycle balance check.
    :param dict summary: Apex statistics and amplification.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    trace: SimTrace
    ledger: EnergyLedger
    audit: EnergyAudit
    summary: dict


def _stats(values: list[float]) -> dict:
    if not values:
        return {"count": 0, "mean": None, "max": None, "min": None}
    return {
        "count": len(values),
        "mean": float(np.mean(values)),
        "max": max(values),
        "min": min(values),
    }


class HopperExperiment:
    """
    Runs the task of one scenario.

    :param Scenario scenario: The scenario.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario

    def presets(self) -> list[str]:
        """Plans the task needs, in solve order."""
        match self.scenario.task.kind:
            case TaskKind.PERIODIC_CHARGE:
                return ["periodic"]
            case TaskKind.MOTOR_ONLY_MAX:
                return ["motor-only-max"]
            case _:
                return ["periodic", "enhanced", "motor-only-max"]

    def plan(
        self,
        preset: str,
        tank_pressure: Optional[float] = None,
        replay_cycles: int = 3,
        solution: Optional[TrajSolution] = None,
    ) -> Plan:
        """
        Build, solve and replay one preset.

        :param str preset: ``periodic``, ``enhanced`` or ``motor-only-max``.
        :param Optional[float] tank_pressure: Absolute tank pressure to plan for; the
            release pressure for ``enhanced`` when absent.
        :param int replay_cycles: Point-mass cycles to replay (the first only for explosive plans).
        :param Optional[TrajSolution] solution: A saved solution of the same problem, solved
            when absent.
        :return Plan: The plan.
        """
        s = self.scenario
        cfg = preset_config(s.trajopt, preset)
        if tank_pressure is None and preset == "enhanced":
            tank_pressure = s.release_pressure
        if tank_pressure is not None:
            cfg = cfg.model_copy(update={"tank_pressure": tank_pressure})
        problem = build_problem(s.robot, s.pneumatic, cfg)
        if solution is None:
            solution = solve(problem)
        simulator = PointMassSimulator(problem, dt=s.sim.dt)
        if preset == "periodic":

            def schedule_for(cycle, tank):
                compensated = feedforward_compensation(problem, solution, tank.pressure)
                return force_schedule(solution, descent_forces=compensated)

            replay = simulator.run_cycles(schedule_for, problem.tank, replay_cycles)
        else:
            schedule = force_schedule(solution, trigger_time=solution.valve_trigger_time)
            replay = [simulator.run_cycle(schedule, problem.tank)]
        logger.info(
            f"Plan {preset}: predicted apex {solution.apex_clearance * 100:.2f} cm, "
            f"replayed {replay[-1].apex_height - problem.leg_max:.4f} m"
        )
        return Plan(preset=preset, problem=problem, solution=solution, replay=replay)

    def plans(self) -> dict[str, Plan]:
        return {preset: self.plan(preset) for preset in self.presets()}

    def _motor_only_controller(self, motor_only: Plan) -> HopController:
        s = self.scenario
        return HopController(
            model=s.robot,
            motor=s.motor,
            config=s.controller.model_copy(update={"compensate": False}),
            pneumatic=motor_only.problem.pneumatic,
            periodic=motor_only.solution,
        )

    def controller(self, plans: dict[str, Plan]) -> HopController:
        s = self.scenario
        if s.task.kind is TaskKind.MOTOR_ONLY_MAX:
            return self._motor_only_controller(plans["motor-only-max"])
        periodic = plans["periodic"]
        enhanced = plans.get("enhanced")
        return HopController(
            model=s.robot,
            motor=s.motor,
            config=s.controller,
            pneumatic=s.pneumatic,
            periodic_problem=periodic.problem,
            periodic=periodic.solution,
            enhanced=enhanced.solution if enhanced is not None else None,
        )

    def baseline(self, motor_only: Plan, cycles: int = BASELINE_CYCLES) -> Optional[SimTrace]:
        """
        Motor-only hops in the hybrid simulator, the reference of the simulated amplification.

        The pneumatics are vented and the ground stays flat.

        :param Plan motor_only: The ``motor-only-max`` plan.
        :param int cycles: Hops to run.
        :return Optional[SimTrace]: The run, or the partial run up to a divergence.
        """
        s = self.scenario
        pneumatic = s.pneumatic.model_copy(update={"connected": False})
        sim = s.sim.model_copy(update={"ground_step_height": 0.0, "ground_step_cycle": None})
        simulator = HybridSimulator(s.robot, pneumatic, sim)
        world = simulator.initial_world(apex_clearance=s.task.start_clearance)
        try:
            return simulator.run_cycles(world, self._motor_only_controller(motor_only), cycles)
        except SimulationDivergedError as e:
            logger.warning(f"Motor-only baseline diverged: {e}")
            return e.trace

    def simulate(self, plans: Optional[dict[str, Plan]] = None) -> SimulationResult:
        """
        Run the task in the hybrid simulator.

        Enhanced tasks also run a short motor-only baseline for the amplification factor.

        :param Optional[dict[str, Plan]] plans: Plans to play, solved when absent.
        :return SimulationResult: Trace, ledger, audit and summary.
        :raises SimulationDivergedError: With the partial trace.
        """
        s = self.scenario
        plans = plans or self.plans()
        pneumatic = s.pneumatic
        if s.task.kind is TaskKind.MOTOR_ONLY_MAX:
            pneumatic = pneumatic.model_copy(update={"connected": False})
        simulator = HybridSimulator(s.robot, pneumatic, s.sim)
        world = simulator.initial_world(apex_clearance=s.task.start_clearance)
        trace = simulator.run_cycles(world, self.controller(plans), s.task.cycles)
        energy = ledger(trace, pneumatic.tank_volume, pneumatic.atmospheric)
        audit = energy_audit(trace)
        baseline = None
        if s.task.kind in ENHANCED_TASKS and "motor-only-max" in plans:
            baseline = self.baseline(plans["motor-only-max"])
        summary = self.summarize(trace, energy, audit, plans, baseline)
        return SimulationResult(trace=trace, ledger=energy, audit=audit, summary=summary)

    def summarize(
        self,
        trace: SimTrace,
        energy: EnergyLedger,
        audit: EnergyAudit,
        plans: dict[str, Plan],
        baseline: Optional[SimTrace] = None,
    ) -> dict:
        """
        Apex statistics per hop type, the amplification factors and the audit verdict.

        ``amplification_factor`` divides the highest simulated enhanced apex by the highest
        apex of the simulated motor-only baseline. ``amplification_factor_predicted`` divides
        the enhanced plan's apex by the motor-only plan's.
        """
        s = self.scenario
        released = [c.apex_height for c in trace.cycles if c.released]
        regular = [c.apex_height for c in trace.cycles if not c.released]
        summary = {
            "task": s.task.kind.value,
            "mass_kg": s.robot.projected_mass,
            "release_pressure_pa": s.release_pressure if s.task.kind in ENHANCED_TASKS else None,
            "termination": trace.termination,
            "cycles": len(trace.cycles),
            "apex": _stats([c.apex_height for c in trace.cycles]),
            "regular_apex": _stats(regular),
            "enhanced_apex": _stats(released),
            "final_tank_pa": trace.cycles[-1].tank_pressure_end if trace.cycles else None,
            "energy_balance_worst": audit.worst,
            "energy_balance_passed": audit.passed,
            "ledger_incomplete": energy.incomplete,
        }
        motor_only = plans.get("motor-only-max")
        enhanced = plans.get("enhanced")
        if motor_only is not None:
            summary["motor_only_apex_predicted"] = motor_only.solution.apex_clearance
        baseline_apex = [c.apex_height for c in baseline.cycles] if baseline is not None else []
        if baseline_apex:
            summary["motor_only_apex_simulated"] = max(baseline_apex)
        if released and baseline_apex and max(baseline_apex) > 0.0:
            summary["amplification_factor"] = amplification_factor(max(released), max(baseline_apex))
        if enhanced is not None and motor_only is not None and motor_only.solution.apex_clearance > 0.0:
            summary["amplification_factor_predicted"] = amplification_factor(
                enhanced.solution.apex_clearance, motor_only.solution.apex_clearance
            )
        lift_regular = [c.liftoff_kinetic_energy for c in trace.cycles if not c.released]
        lift_enhanced = [c.liftoff_kinetic_energy for c in trace.cycles if c.released]
        if lift_regular and lift_enhanced and np.mean(lift_regular) > 0.0:
            summary["liftoff_energy_ratio"] = float(max(lift_enhanced) / np.mean(lift_regular))
        if s.task.kind in ENHANCED_TASKS and not released:
            logger.warning("Enhanced task finished without a release, check the release pressure")
        return summary


def sweep_point(scenario: Scenario, tank_pressure: float, mass: float) -> dict:
    """
    Best enhanced apex for one tank pressure and projected mass.

    Runs in a worker process; everything it needs travels in its arguments.

    :param Scenario scenario: The base scenario.
    :param float tank_pressure: Absolute release pressure (Pa).
    :param float mass: Projected mass (kg).
    :return dict: The point and its predicted and replayed apex clearances (m), NaN when
        the point did not solve. ``feasible`` marks a plan within tolerance, ``converged``
        one that also met the stationarity tolerance.
    """
    robot = scenario.robot.model_copy(update={"projected_mass": mass})
    point = scenario.model_copy(update={"robot": robot})
    row = {"tank_pa": tank_pressure, "mass_kg": mass}
    try:
        plan = HopperExperiment(point).plan("enhanced", tank_pressure=tank_pressure)
    except SolverError as e:
        logger.warning(f"Sweep point {tank_pressure:.0f} Pa, {mass} kg did not solve: {e}")
        nan = float("nan")
        return {
            **row,
            "feasible": False,
            "converged": False,
            "apex_predicted_m": nan,
            "apex_replayed_m": nan,
            "liftoff_velocity_mps": nan,
        }
    return {
        **row,
        "feasible": True,
        "converged": plan.solution.converged,
        "apex_predicted_m": plan.solution.apex_clearance,
        "apex_replayed_m": plan.replay[-1].apex_height - plan.problem.leg_max,
        "liftoff_velocity_mps": plan.replay[-1].liftoff_velocity,
    }
