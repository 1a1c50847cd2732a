"""
Event-driven simulation of the hopper: fixed-step RK4 over the active contact mode,
bisection for touchdown, liftoff, apex and the pump turning point, the plastic impact
map at touchdown and the pneumatic tank bookkeeping.
"""

import math
from typing import NamedTuple, Optional

import numpy as np
from loguru import logger

from error import DomainError, SimulationDivergedError
from logic.controllers import BaseController
from logic.dynamics import (
    equations_of_motion,
    foot_position,
    impact_map,
    kinetic_energy,
    knee_for_length,
    leg_range,
    pneumatic_length,
    potential_energy,
)
from logic.integration import locate_event, rk4_step
from logic.pneumatics import (
    joint_actuator_extension,
    joint_pump_compression,
    lumped_pneumatic_force,
    pump_stroke_tank_update,
    release_tank_update,
    transient_derivative,
)
from schema.controller import ControlCommand
from schema.enums import ContactMode, EventKind
from schema.pneumatic import PneumaticConfig, TankState, TransientState
from schema.robot import RobotModel, RobotState
from schema.simulation import CycleSummary, SimConfig, SimEvent, SimTrace, TraceSample, WorkState, World


STATE_SIZE = 14


class _StepContext(NamedTuple):
    stance: bool
    tau: np.ndarray
    valve: bool
    tank: TankState
    trigger_tank: Optional[TankState]


class _Aux(NamedTuple):
    grf: np.ndarray
    f_pneu: float
    ddot: float
    x_joint: float


class HybridSimulator:
    """
    Simulates the full planar hopper.

    A run is strictly sequential; one simulator and one controller per run.

    :param RobotModel model: The robot.
    :param PneumaticConfig pneumatic: The pneumatic configuration.
    :param SimConfig config: Integration and event settings.
    """

    def __init__(self, model: RobotModel, pneumatic: PneumaticConfig, config: Optional[SimConfig] = None):
        self.model = model
        self.pneumatic = pneumatic
        self.config = config or SimConfig()
        self._extended_length, _ = pneumatic_length(model, model.knee_min)
        self._leg_max = leg_range(model)[1]
        self._rng = np.random.default_rng(self.config.seed)
        self._last_command: Optional[ControlCommand] = None

    def initial_world(self, apex_clearance: float = 0.0, leg_angle: float = 0.0) -> World:
        """
        World at rest in the air with the leg fully extended.

        :param float apex_clearance: Foot height above the ground (m).
        :param float leg_angle: Leg angle from the downward vertical (rad).
        :return World: The starting world.
        """
        q_knee = self.model.knee_min
        l_t, l_s = self.model.thigh_length, self.model.shank_length
        phi = math.atan2(l_s * math.sin(q_knee), l_t + l_s * math.cos(q_knee))
        q_hip = leg_angle - phi
        z = self.config.ground_height + self._leg_max * math.cos(leg_angle) + apex_clearance
        robot = RobotState(q=[0.0, z, q_hip, q_knee], qdot=np.zeros(4), mode=ContactMode.AERIAL)
        return World(robot=robot, tank=self.pneumatic.initial_tank(), ground_height=self.config.ground_height)

    def resting_world(self, leg_length: Optional[float] = None) -> World:
        """
        World at rest in stance with the foot on the ground below the hip.

        :param Optional[float] leg_length: Leg length, full extension when absent (m).
        :return World: The starting world.
        """
        length = leg_length or self._leg_max
        q_knee = max(knee_for_length(self.model, length), self.model.knee_min)
        l_t, l_s = self.model.thigh_length, self.model.shank_length
        phi = math.atan2(l_s * math.sin(q_knee), l_t + l_s * math.cos(q_knee))
        q = np.array([0.0, 0.0, -phi, q_knee])
        q[1] = self.config.ground_height - foot_position(self.model, q)[1]
        robot = RobotState(q=q, qdot=np.zeros(4), mode=ContactMode.STANCE)
        x_joint = self._extended_length - pneumatic_length(self.model, q_knee)[0]
        return World(
            robot=robot,
            tank=self.pneumatic.initial_tank(),
            ground_height=self.config.ground_height,
            deepest_compression=x_joint,
        )

    def _pack(self, world: World) -> np.ndarray:
        y = np.empty(STATE_SIZE)
        y[0:4] = world.robot.q
        y[4:8] = world.robot.qdot
        y[8] = world.transient.delta
        y[9] = world.transient.delta_dot
        w = world.work
        y[10:14] = (w.motor, w.pump, w.extension, w.stop)
        return y

    def _evaluate(self, y: np.ndarray, ctx: _StepContext) -> tuple[np.ndarray, _Aux]:
        q, qdot = y[0:4], y[4:8]
        d, dd_dknee = pneumatic_length(self.model, q[3])
        x_joint = self._extended_length - d
        ddot = dd_dknee * qdot[3]
        use_trigger = ctx.valve and ddot >= 0.0 and ctx.trigger_tank is not None
        tank = ctx.trigger_tank if use_trigger else ctx.tank
        transient = TransientState.model_construct(delta=y[8], delta_dot=y[9], valve_open=ctx.valve)
        f_pneu = lumped_pneumatic_force(self.pneumatic, tank, transient, x_joint, ddot, ctx.valve)
        qddot, grf, stop = equations_of_motion(self.model, q, qdot, ctx.stance, ctx.tau, f_pneu)
        ddelta, ddelta_dot = transient_derivative(self.pneumatic.actuator, y[8], y[9], ctx.valve)
        power = f_pneu * ddot
        dy = np.empty(STATE_SIZE)
        dy[0:4] = qdot
        dy[4:8] = qddot
        dy[8] = ddelta
        dy[9] = ddelta_dot
        dy[10] = ctx.tau[0] * qdot[2] + self.model.knee_transmission * ctx.tau[1] * qdot[3]
        dy[11] = power if ddot < 0.0 else 0.0
        dy[12] = power if ddot >= 0.0 else 0.0
        dy[13] = stop * qdot[3]
        if not ctx.stance:
            grf = np.zeros(2)
        return dy, _Aux(grf=grf, f_pneu=f_pneu, ddot=ddot, x_joint=x_joint)

    def _event_functions(self, world: World, ctx: _StepContext):
        ground = world.ground_height
        fall = self.config.fall_height

        def hip_clearance(y: np.ndarray) -> float:
            return y[1] - ground - fall

        functions = [(EventKind.FALL, hip_clearance)]
        if ctx.stance:
            functions.append((EventKind.LIFTOFF, lambda y: self._evaluate(y, ctx)[1].grf[1]))
            if not world.reversed:
                functions.append((EventKind.TANK_UPDATE, lambda y: -self._evaluate(y, ctx)[1].ddot))
        else:
            functions.append((EventKind.TOUCHDOWN, lambda y: foot_position(self.model, y[0:4])[1] - ground))
            functions.append((EventKind.APEX, lambda y: y[5]))
        return functions

    def _contact_indicator(self, world: World) -> float:
        alpha = 1.0 if world.stance else 0.0
        if self.config.contact_noise > 0.0 and self._rng.random() < self.config.contact_noise:
            alpha = 1.0 - alpha
        return alpha

    def _event(self, kind: EventKind, world: World, **data: float) -> SimEvent:
        return SimEvent(
            kind=kind,
            time=world.time,
            cycle=world.cycle,
            z_hip=float(world.robot.q[1] - world.ground_height),
            tank_pressure=world.tank.pressure,
            data=data,
        )

    def _switch_valve(self, world: World, requested: bool, events: list[SimEvent]) -> World:
        act = self.pneumatic.actuator
        open_now = world.transient.valve_open
        if not open_now and requested and self._valve_allowed(world):
            x_joint = self._extended_length - pneumatic_length(self.model, world.robot.q[3])[0]
            delta = 1.0 / act.k3 if act.k1 == 0.0 and act.k2 == 0.0 else world.transient.delta
            world = world.model_copy(
                update={
                    "trigger_tank": world.tank,
                    "transient": world.transient.model_copy(
                        update={"valve_open": True, "time_since_trigger": 0.0, "delta": delta}
                    ),
                    "open_extension": joint_actuator_extension(self.pneumatic, x_joint),
                }
            )
            events.append(self._event(EventKind.VALVE_TRIGGER, world))
            logger.debug(f"Valve opened at t={world.time:.4f} s, tank {world.tank.pressure:.0f} Pa")
        elif open_now and not requested:
            before = world.tank.pressure
            tank = release_tank_update(world.tank, act, world.open_extension)
            delta = 0.0 if act.k1 == 0.0 and act.k2 == 0.0 else world.transient.delta
            world = world.model_copy(
                update={
                    "tank": tank,
                    "trigger_tank": None,
                    "transient": world.transient.model_copy(update={"valve_open": False, "delta": delta}),
                }
            )
            events.append(
                self._event(
                    EventKind.VALVE_CLOSE, world, extension=world.open_extension, pressure_before=before
                )
            )
            logger.debug(f"Valve closed at t={world.time:.4f} s, tank {before:.0f} -> {tank.pressure:.0f} Pa")
        return world

    def _valve_allowed(self, world: World) -> bool:
        cfg = self.pneumatic
        return cfg.connected and world.tank.gauge_pressure >= cfg.valve_min_pressure

    def _advance(self, world: World, y: np.ndarray, h: float, ctx: _StepContext) -> World:
        _, aux = self._evaluate(y, ctx)
        transient = world.transient.model_copy(
            update={
                "delta": float(y[8]),
                "delta_dot": float(y[9]),
                "time_since_trigger": world.transient.time_since_trigger + h if ctx.valve else 0.0,
            }
        )
        updates = {
            "time": world.time + h,
            "robot": world.robot.model_copy(update={"q": y[0:4].copy(), "qdot": y[4:8].copy()}),
            "transient": transient,
            "work": world.work.model_copy(
                update={"motor": y[10], "pump": y[11], "extension": y[12], "stop": y[13]}
            ),
        }
        if ctx.stance and not world.reversed:
            updates["deepest_compression"] = max(world.deepest_compression, aux.x_joint)
        if ctx.valve:
            extension = joint_actuator_extension(self.pneumatic, aux.x_joint)
            updates["open_extension"] = max(world.open_extension, extension)
        return world.model_copy(update=updates)

    def _apply_event(
        self, kind: EventKind, world: World, controller: BaseController, events: list[SimEvent]
    ) -> World:
        robot = world.robot
        data: dict[str, float] = {}
        match kind:
            case EventKind.TOUCHDOWN:
                qdot_post, impulse = impact_map(self.model, robot)
                post = robot.model_copy(update={"qdot": qdot_post, "mode": ContactMode.STANCE})
                loss = kinetic_energy(self.model, robot) - kinetic_energy(self.model, post)
                x_joint = self._extended_length - pneumatic_length(self.model, robot.q[3])[0]
                world = world.model_copy(
                    update={
                        "robot": post,
                        "touchdown_time": world.time,
                        "deepest_compression": x_joint,
                        "reversed": False,
                        "work": world.work.model_copy(update={"impact_loss": world.work.impact_loss + loss}),
                    }
                )
                data = {
                    "velocity": float(robot.qdot[1]),
                    "impulse_x": float(impulse[0]),
                    "impulse_z": float(impulse[1]),
                    "impact_loss": float(loss),
                }
            case EventKind.LIFTOFF:
                aerial = robot.model_copy(update={"mode": ContactMode.AERIAL})
                world = world.model_copy(update={"robot": aerial})
                data = {
                    "velocity": float(robot.qdot[1]),
                    "kinetic_energy": kinetic_energy(self.model, world.robot),
                }
            case EventKind.APEX:
                data = {
                    "apex_height": float(robot.q[1] - world.ground_height - self._leg_max),
                    "forward_velocity": float(robot.qdot[0]),
                }
                cycle = world.cycle + 1
                ground = world.ground_height
                if self.config.ground_step_cycle is not None and cycle == self.config.ground_step_cycle:
                    ground += self.config.ground_step_height
                    logger.info(f"Ground raised to {ground:.3f} m at cycle {cycle}")
                world = world.model_copy(update={"cycle": cycle, "ground_height": ground})
            case EventKind.TANK_UPDATE:
                before = world.tank.pressure
                tank = world.tank
                if self.pneumatic.connected:
                    x_pump = joint_pump_compression(self.pneumatic, world.deepest_compression)
                    tank = pump_stroke_tank_update(self.pneumatic.pump, world.tank, x_pump)
                world = world.model_copy(update={"tank": tank, "reversed": True})
                data = {"deepest_compression": world.deepest_compression, "pressure_before": before}
            case EventKind.FALL:
                logger.warning(f"Hip fell below {self.config.fall_height} m at t={world.time:.4f} s")
        event = self._event(kind, world, **data)
        events.append(event)
        controller.on_event(event, world)
        return world

    def step(self, world: World, controller: BaseController, dt: Optional[float] = None) -> World:
        """
        Advance the world by one RK4 step, or up to the first event inside it.

        :param World world: The current world.
        :param BaseController controller: Supplies the command held over the step.
        :param Optional[float] dt: Step length, the configured step when absent (s).
        :return World: The next world; ``events`` lists what happened during the step.
        :raises SimulationDivergedError: If the state becomes non-finite.
        """
        dt = dt or self.config.dt
        events: list[SimEvent] = []
        command = controller.command(world, self._contact_indicator(world))
        self._last_command = command
        world = self._switch_valve(world, command.valve, events)
        ctx = _StepContext(
            stance=world.stance,
            tau=np.asarray(command.tau, dtype=float),
            valve=world.transient.valve_open,
            tank=world.tank,
            trigger_tank=world.trigger_tank,
        )

        def rhs(y: np.ndarray) -> np.ndarray:
            return self._evaluate(y, ctx)[0]

        y0 = self._pack(world)
        y1 = rk4_step(rhs, y0, dt)
        if not np.all(np.isfinite(y1)):
            raise SimulationDivergedError(f"state became non-finite at t={world.time:.6f} s", world=world)

        crossings = {}
        for kind, fn in self._event_functions(world, ctx):
            g0, g1 = fn(y0), fn(y1)
            if g0 > 0.0 and g1 <= 0.0:
                crossings[kind] = fn
            elif kind is EventKind.LIFTOFF and g0 <= 0.0 and g1 <= 0.0:
                crossings[kind] = None

        if not crossings:
            return self._advance(world, y1, dt, ctx).model_copy(update={"events": tuple(events)})

        times = {}
        for kind, fn in crossings.items():
            if fn is None:
                times[kind] = dt
                continue
            times[kind] = locate_event(
                kind,
                lambda tau, fn=fn: fn(rk4_step(rhs, y0, tau)) if tau > 0.0 else fn(y0),
                (0.0, dt),
                self.config.event_time_tolerance,
                self.config.event_value_tolerance,
            )
        kind = min(times, key=times.get)
        h = times[kind]
        world = self._advance(world, rk4_step(rhs, y0, h), h, ctx)
        world = self._apply_event(kind, world, controller, events)
        return world.model_copy(update={"events": tuple(events)})

    def _sample(self, world: World) -> TraceSample:
        command = self._last_command
        ctx = _StepContext(
            stance=world.stance,
            tau=np.asarray(command.tau, dtype=float) if command is not None else np.zeros(2),
            valve=world.transient.valve_open,
            tank=world.tank,
            trigger_tank=world.trigger_tank,
        )
        _, aux = self._evaluate(self._pack(world), ctx)
        return TraceSample(
            t=world.time,
            q=world.robot.q,
            qdot=world.robot.qdot,
            tau=ctx.tau,
            voltage=command.voltage if command is not None else np.zeros(2),
            f_pneu=aux.f_pneu,
            grf=aux.grf,
            tank_pressure=world.tank.pressure,
            delta=world.transient.delta,
            valve_open=world.transient.valve_open,
            mode=world.robot.mode,
            damped=command.damped if command is not None else False,
        )

    def mechanical_energy(self, world: World) -> float:
        return kinetic_energy(self.model, world.robot) + potential_energy(self.model, world.robot)

    def run_cycles(self, world: World, controller: BaseController, n_cycles: int) -> SimTrace:
        """
        Simulate until ``n_cycles`` apex-to-apex cycles complete, the robot falls or a cycle
        outlasts ``max_cycle_time``.

        :param World world: The starting world.
        :param BaseController controller: The controller.
        :param int n_cycles: Cycles to simulate, >= 1.
        :return SimTrace: Samples, events and per-cycle summaries.
        :raises SimulationDivergedError: With the partial trace, if the state diverges.
        """
        if n_cycles < 1:
            raise DomainError(f"n_cycles must be at least 1, got {n_cycles}")
        if n_cycles > self.config.max_cycles:
            logger.warning(f"Capping {n_cycles} requested cycles at {self.config.max_cycles}")
            n_cycles = self.config.max_cycles
        self._rng = np.random.default_rng(self.config.seed)
        self._last_command = None

        samples = [self._sample(world)]
        events: list[SimEvent] = []
        cycles: list[CycleSummary] = []
        start_cycle = world.cycle
        start = world
        start_energy = self.mechanical_energy(world)
        touchdown_pressure = world.tank.pressure
        liftoff = (0.0, 0.0)
        deepest = 0.0
        released = False
        termination = "completed"
        steps = 0

        while world.cycle - start_cycle < n_cycles:
            try:
                world = self.step(world, controller)
            except SimulationDivergedError as exc:
                partial = SimTrace(samples=samples, events=events, cycles=cycles, termination="diverged")
                logger.error(f"Simulation diverged after {steps} steps: {exc}")
                raise SimulationDivergedError(str(exc), world=exc.world, trace=partial) from exc
            steps += 1
            fell = False
            for event in world.events:
                events.append(event)
                match event.kind:
                    case EventKind.TOUCHDOWN:
                        touchdown_pressure = event.tank_pressure
                    case EventKind.LIFTOFF:
                        liftoff = (event.data["velocity"], event.data["kinetic_energy"])
                        deepest = world.deepest_compression
                    case EventKind.VALVE_TRIGGER:
                        released = True
                    case EventKind.APEX:
                        energy = self.mechanical_energy(world)
                        work = world.work
                        summary = CycleSummary(
                            cycle=world.cycle - 1,
                            start_time=start.time,
                            end_time=world.time,
                            apex_height=event.data["apex_height"],
                            liftoff_velocity=liftoff[0],
                            liftoff_kinetic_energy=liftoff[1],
                            tank_pressure_start=start.tank.pressure,
                            tank_pressure_touchdown=touchdown_pressure,
                            tank_pressure_end=world.tank.pressure,
                            deepest_compression=deepest,
                            released=released,
                            work=WorkState(
                                motor=work.motor - start.work.motor,
                                pump=work.pump - start.work.pump,
                                extension=work.extension - start.work.extension,
                                stop=work.stop - start.work.stop,
                                impact_loss=work.impact_loss - start.work.impact_loss,
                            ),
                            mechanical_energy_change=energy - start_energy,
                        )
                        cycles.append(summary)
                        logger.info(
                            f"Cycle {summary.cycle}: apex {summary.apex_height * 100:.2f} cm, "
                            f"tank {world.tank.gauge_pressure / 1e3:.1f} kPa gauge"
                        )
                        start, start_energy, released = world, energy, False
                    case EventKind.FALL:
                        fell = True
            if world.events or steps % self.config.record_every == 0:
                samples.append(self._sample(world))
            if fell:
                termination = "fall"
                break
            if world.time - start.time > self.config.max_cycle_time:
                termination = "settled"
                logger.info(f"No apex within {self.config.max_cycle_time} s, robot settled")
                break

        return SimTrace(samples=samples, events=events, cycles=cycles, termination=termination)
