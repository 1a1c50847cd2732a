"""
Vertical point-mass model of the ground phase, ``m*L'' = F_pneu + F_m - m*g``, used to
replay optimized force schedules and to charge the tank cycle by cycle.
"""

import math
from typing import Callable, Optional

import numpy as np
from loguru import logger

from error import DomainError, SimulationDivergedError
from logic.integration import locate_event, rk4_step
from logic.pneumatics import (
    actuator_joint_force,
    joint_actuator_extension,
    joint_pump_compression,
    pump_joint_force,
    pump_stroke_tank_update,
    release_tank_update,
    transient_step_response,
)
from schema.enums import EventKind, LiftoffReason, PneumaticMode
from schema.pneumatic import TankState
from schema.simulation import PointMassCycle
from schema.trajectory import ForceSchedule, TrajOptProblem


def pump_leg_force(problem: TrajOptProblem, tank: TankState, length: float) -> tuple[float, float]:
    """
    Pump force reflected to the leg and its slope in leg length.

    :param TrajOptProblem problem: Supplies the pneumatics and the transmission.
    :param TankState tank: Live tank.
    :param float length: Leg length (m).
    :return tuple[float, float]: Force (N) and dF/dL (N/m).
    """
    if problem.mode is PneumaticMode.NONE:
        return 0.0, 0.0
    r = problem.transmission
    force, slope = pump_joint_force(problem.pneumatic, tank, r * (problem.leg_max - length))
    return r * force, -r * r * slope


def actuator_leg_force(problem: TrajOptProblem, tank: TankState, length: float) -> tuple[float, float]:
    """
    Quasi-static actuator force reflected to the leg (before the transient factor) and its slope.

    Past full extension the force follows its tangent at ``leg_max``.
    """
    if problem.mode is not PneumaticMode.PUMP_ACTUATOR:
        return 0.0, 0.0
    r = problem.transmission
    x_joint = r * (problem.leg_max - length)
    force, slope = actuator_joint_force(problem.pneumatic, tank, max(x_joint, 0.0))
    if x_joint < 0.0:
        force += slope * x_joint
    return r * force, -r * r * slope


class PointMassSimulator:
    """
    Plays a force schedule through one stance of the point-mass model.

    The leg touches down fully extended, the pump resists while the leg shortens and
    updates the tank at the velocity reversal, and the leg lifts off when the ground
    force vanishes, the leg reaches full extension or the ascent schedule runs out.

    :param TrajOptProblem problem: Mass, leg range and pneumatics.
    :param float dt: RK4 step (s).
    :param float time_tolerance: Event bisection tolerance (s).
    """

    def __init__(self, problem: TrajOptProblem, dt: float = 1e-4, time_tolerance: float = 1e-10):
        if dt <= 0.0:
            raise DomainError(f"time step must be positive, got {dt}")
        self.problem = problem
        self.dt = dt
        self.time_tolerance = time_tolerance

    def _motor_force(self, schedule: ForceSchedule, t: float, reversal: Optional[float]) -> float:
        if reversal is None:
            return schedule.force(True, t)
        return schedule.force(False, t - reversal)

    def _pneumatic_force(
        self,
        length: float,
        rate: float,
        t: float,
        tank: TankState,
        trigger: Optional[tuple[float, TankState]],
    ) -> float:
        problem = self.problem
        if problem.mode is PneumaticMode.NONE or not problem.pneumatic.connected:
            return 0.0
        if rate < 0.0:
            return pump_leg_force(problem, tank, length)[0]
        if trigger is not None:
            trigger_time, trigger_tank = trigger
            force, _ = actuator_leg_force(problem, trigger_tank, length)
            delta, _ = transient_step_response(problem.pneumatic.actuator, max(t - trigger_time, 0.0))
            return force * float(delta)
        if rate > 0.0:
            return -problem.transmission * problem.pneumatic.extension_friction
        return 0.0

    def run_cycle(
        self, schedule: ForceSchedule, tank: TankState, apex_height: Optional[float] = None
    ) -> PointMassCycle:
        """
        Simulate one stance from touchdown to liftoff.

        :param ForceSchedule schedule: Motor force to play and the optional valve trigger time.
        :param TankState tank: Tank at touchdown.
        :param Optional[float] apex_height: Apex hip height the robot falls from, the
            problem's apex when absent (m).
        :return PointMassCycle: The cycle outcome.
        :raises DomainError: If the apex lies below the fully extended leg.
        :raises SimulationDivergedError: If the state diverges or the stance does not end.
        """
        problem = self.problem
        g, m = problem.gravity, problem.mass
        apex = problem.apex_height if apex_height is None else apex_height
        if apex < problem.leg_max - 1e-12:
            raise DomainError(f"apex {apex} m lies below the extended leg {problem.leg_max} m")

        v_touchdown = -math.sqrt(2.0 * g * max(apex - problem.leg_max, 0.0))
        y = np.array([0.0, problem.leg_max, v_touchdown, 0.0, 0.0, 0.0])
        touchdown_pressure = tank.pressure
        reversal: Optional[float] = None
        trigger: Optional[tuple[float, TankState]] = None
        deepest = 0.0
        liftoff_reason: Optional[LiftoffReason] = None
        time_limit = 3.0 * schedule.stance_duration + 1.0

        def make_rhs(live: TankState, rev: Optional[float], trig: Optional[tuple[float, TankState]]):
            def rhs(state: np.ndarray) -> np.ndarray:
                t, length, rate = state[0], state[1], state[2]
                f_motor = self._motor_force(schedule, t, rev)
                f_pneu = self._pneumatic_force(length, rate, t, live, trig)
                power = f_pneu * rate
                return np.array(
                    [
                        1.0,
                        rate,
                        (f_pneu + f_motor) / m - g,
                        f_motor * rate,
                        power if rate < 0.0 else 0.0,
                        power if rate >= 0.0 else 0.0,
                    ]
                )

            return rhs

        def grf(state: np.ndarray, live, rev, trig) -> float:
            return self._motor_force(schedule, state[0], rev) + self._pneumatic_force(
                state[1], state[2], state[0], live, trig
            )

        if y[2] >= 0.0 and make_rhs(tank, None, None)(y)[2] >= 0.0:
            reversal = 0.0
        compressed = y[2] < 0.0

        while True:
            rhs = make_rhs(tank, reversal, trigger)
            y1 = rk4_step(rhs, y, self.dt)
            if not np.all(np.isfinite(y1)):
                raise SimulationDivergedError(f"point-mass state became non-finite at t={y[0]:.6f} s")
            if y1[0] > time_limit:
                raise SimulationDivergedError(f"stance did not end within {time_limit:.3f} s")

            events: list[tuple[EventKind, Callable, Optional[LiftoffReason]]] = []
            if reversal is None and compressed:
                events.append((EventKind.TANK_UPDATE, lambda s: -s[2], None))
            if trigger is None and schedule.trigger_time is not None:
                events.append((EventKind.VALVE_TRIGGER, lambda s: schedule.trigger_time - s[0], None))
            if reversal is not None:
                rev, trig, live = reversal, trigger, tank
                events += [
                    (EventKind.LIFTOFF, lambda s: grf(s, live, rev, trig), LiftoffReason.GROUND_FORCE),
                    (EventKind.LIFTOFF, lambda s: problem.leg_max - s[1], LiftoffReason.FULL_EXTENSION),
                    (
                        EventKind.LIFTOFF,
                        lambda s: rev + schedule.ascent_duration - s[0],
                        LiftoffReason.SCHEDULE_END,
                    ),
                ]

            first: Optional[tuple[float, EventKind, Optional[LiftoffReason]]] = None
            for kind, fn, reason in events:
                g0, g1 = fn(y), fn(y1)
                if kind is not EventKind.TANK_UPDATE and g0 <= 0.0:
                    h = 0.0
                elif g0 > 0.0 and g1 <= 0.0:
                    h = locate_event(
                        kind,
                        lambda tau, fn=fn: fn(rk4_step(rhs, y, tau)) if tau > 0.0 else fn(y),
                        (0.0, self.dt),
                        self.time_tolerance,
                    )
                else:
                    continue
                if first is None or h < first[0]:
                    first = (h, kind, reason)

            if first is None:
                y = y1
                compressed = compressed or y[2] < 0.0
                continue

            h, kind, reason = first
            if h > 0.0:
                y = rk4_step(rhs, y, h)
            match kind:
                case EventKind.TANK_UPDATE:
                    reversal = float(y[0])
                    deepest = problem.transmission * (problem.leg_max - y[1])
                    if problem.mode is not PneumaticMode.NONE and problem.pneumatic.connected:
                        x_pump = joint_pump_compression(problem.pneumatic, deepest)
                        tank = pump_stroke_tank_update(problem.pneumatic.pump, tank, x_pump)
                case EventKind.VALVE_TRIGGER:
                    trigger = (float(y[0]), tank)
                case EventKind.LIFTOFF:
                    liftoff_reason = reason
                    break
            compressed = compressed or y[2] < 0.0

        length, rate = float(y[1]), float(y[2])
        released = trigger is not None and problem.mode is PneumaticMode.PUMP_ACTUATOR
        if released:
            x_joint = problem.transmission * (problem.leg_max - length)
            extension = joint_actuator_extension(problem.pneumatic, x_joint)
            tank = release_tank_update(tank, problem.pneumatic.actuator, extension)
        apex_next = length + max(rate, 0.0) ** 2 / (2.0 * g)
        return PointMassCycle(
            apex_start=apex,
            apex_height=apex_next,
            liftoff_velocity=rate,
            descent_duration=reversal if reversal is not None else float(y[0]),
            stance_duration=float(y[0]),
            tank_pressure_touchdown=touchdown_pressure,
            tank=tank,
            deepest_compression=deepest,
            released=released,
            liftoff_reason=liftoff_reason,
            motor_work=float(y[3]),
            pump_work=float(y[4]),
            extension_work=float(y[5]),
        )

    def run_cycles(
        self,
        schedule_for: Callable[[int, TankState], ForceSchedule],
        tank: TankState,
        n_cycles: int,
        apex_height: Optional[float] = None,
    ) -> list[PointMassCycle]:
        """
        Chain cycles, each falling from the apex the previous one reached.

        :param Callable schedule_for: ``(cycle, tank at touchdown) -> schedule``.
        :param TankState tank: Tank before the first touchdown.
        :param int n_cycles: Cycles to run.
        :param Optional[float] apex_height: First apex, the problem's apex when absent (m).
        :return list[PointMassCycle]: Completed cycles; stops early when an apex falls short
            of the extended leg.
        """
        apex = self.problem.apex_height if apex_height is None else apex_height
        cycles = []
        for cycle in range(n_cycles):
            result = self.run_cycle(schedule_for(cycle, tank), tank, apex)
            cycles.append(result)
            tank, apex = result.tank, result.apex_height
            if apex < self.problem.leg_max:
                logger.warning(f"Point-mass cycle {cycle} ended below the extended leg; stopping")
                break
        return cycles
