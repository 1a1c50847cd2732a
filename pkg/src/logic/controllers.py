"""
The controllers module contains the feedback laws of the hopper and the controllers
that combine them for the simulator.
"""

from abc import abstractmethod
from typing import Any, Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr
from scipy.interpolate import BPoly

from error import DomainError
from logic.dynamics import (
    foot_jacobian,
    leg_kinematics,
    leg_range,
    motor_speeds,
    motor_torque_limits,
    task_jacobian,
)
from logic.pneumatics import transient_rise_time
from logic.trajopt import feedforward_compensation, force_schedule
from schema.controller import ControlCommand, ControllerConfig, MotorParams
from schema.enums import AerialMapping, EventKind
from schema.pneumatic import PneumaticConfig
from schema.robot import RobotModel, RobotState
from schema.simulation import SimEvent, World
from schema.trajectory import ForceSchedule, TrajOptProblem, TrajSolution


def foot_placement(v_k: float, v_prev: float, cfg: ControllerConfig) -> float:
    """
    Leg angle to hold through the next flight.

    :param float v_k: Forward hip velocity at this apex (m/s).
    :param float v_prev: Forward hip velocity at the previous apex (m/s).
    :param ControllerConfig cfg: Gains, desired velocity and angle limit.
    :return float: ``k_p*(v_k - v_d) + k_d*(v_k - v_prev)`` clamped to the limit (rad).
    """
    angle = cfg.foot_kp * (v_k - cfg.desired_velocity) + cfg.foot_kd * (v_k - v_prev)
    return float(np.clip(angle, -cfg.leg_angle_limit, cfg.leg_angle_limit))


def aerial_torques(
    state: RobotState,
    y_des: np.ndarray,
    ydot_des: np.ndarray,
    cfg: ControllerConfig,
    model: RobotModel,
) -> tuple[np.ndarray, bool]:
    """
    Task-space PD on ``y = [q_leg, L]``.

    The transpose mapping gives ``tau = -J_y^T (K_p e + K_d e_dot)``; the inverse mapping
    uses ``J_y^-1`` and falls back to a damped inverse when ``|det J_y|`` is small.

    :param RobotState state: The aerial state.
    :param np.ndarray y_des: Desired ``[q_leg, L]``.
    :param np.ndarray ydot_des: Desired rates.
    :param ControllerConfig cfg: Gains and mapping.
    :param RobotModel model: The robot.
    :return tuple[np.ndarray, bool]: Joint torques ``[hip, knee]`` and whether the damped
        inverse was used.
    """
    kin = leg_kinematics(model, state.q)
    jac = task_jacobian(model, state.q)
    y = np.array([kin.q_leg, kin.L])
    ydot = jac @ state.qdot[2:]
    wrench = np.diag(cfg.task_kp) @ (y - np.asarray(y_des)) + np.diag(cfg.task_kd) @ (
        ydot - np.asarray(ydot_des)
    )
    if cfg.aerial_mapping is AerialMapping.TRANSPOSE:
        return -jac.T @ wrench, False
    if abs(np.linalg.det(jac)) < cfg.singular_threshold:
        logger.warning(f"Task Jacobian near singular at q_knee={state.q[3]:.4f}, using damped inverse")
        damped = jac.T @ np.linalg.inv(jac @ jac.T + cfg.damping**2 * np.eye(2))
        return -damped @ wrench, True
    return -np.linalg.solve(jac, wrench), False


def stance_torques(
    state: RobotState, f_vertical: float, f_horizontal: float, model: RobotModel
) -> np.ndarray:
    """
    Joint torques ``J_f^T [F_x, F_z]`` that push the hip with the given force while the
    foot is pinned.

    :param RobotState state: The stance state.
    :param float f_vertical: Vertical force on the hip F_m* (N).
    :param float f_horizontal: Horizontal force on the hip (N).
    :param RobotModel model: The robot.
    :return np.ndarray: Joint torques ``[hip, knee]`` (N m).
    """
    return foot_jacobian(model, state.q).T @ np.array([f_horizontal, f_vertical])


def bezier_horizontal_profile(v_d: float, duration: float, t: float, gain: float = 10.0) -> float:
    """
    Degree-4 Bezier horizontal stance force with zero endpoints.

    Control points are ``[0, c, c, c, 0]`` with ``c = 8/7 * gain * v_d`` so that the value
    at mid-stance is ``gain * v_d``.

    :param float v_d: Desired forward velocity (m/s).
    :param float duration: Stance duration T (s).
    :param float t: Time since touchdown, 0 <= t <= T (s).
    :param float gain: Peak force per unit velocity (N s/m).
    :return float: Horizontal force (N).
    :raises DomainError: If t is outside [0, T].
    """
    if duration <= 0.0 or not 0.0 <= t <= duration:
        raise DomainError(f"stance time {t} s is outside [0, {duration}] s")
    peak = 8.0 / 7.0 * gain * v_d
    curve = BPoly(np.array([[0.0], [peak], [peak], [peak], [0.0]]), [0.0, 1.0])
    return float(curve(t / duration))


def blend(tau_stance: np.ndarray, tau_aerial: np.ndarray, alpha: float) -> np.ndarray:
    """``alpha*tau_stance + (1 - alpha)*tau_aerial``, alpha is the contact indicator."""
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"contact indicator {alpha} is outside [0, 1]")
    return alpha * np.asarray(tau_stance, dtype=float) + (1.0 - alpha) * np.asarray(tau_aerial, dtype=float)


def motor_voltage(tau: float, speed: float, params: MotorParams, clamp: bool = True) -> float:
    """
    Voltage for a geared motor output torque.

    :param float tau: Output torque (N m).
    :param float speed: Output shaft speed (rad/s).
    :param MotorParams params: Electrical parameters.
    :param bool clamp: Clamp to the supply rails.
    :return float: ``R/(k_T N) * tau + k_e N * speed`` (V).
    """
    volts = params.resistance / (params.torque_constant * params.gear_ratio) * tau
    volts += params.back_emf * params.gear_ratio * speed
    if clamp:
        return float(np.clip(volts, -params.supply_voltage, params.supply_voltage))
    return float(volts)


def saturate_torques(model: RobotModel, tau_motor: np.ndarray, qdot: np.ndarray) -> np.ndarray:
    """Clip motor-side torques to each motor's torque-speed envelope."""
    speeds = motor_speeds(model, qdot)
    clipped = np.empty(2)
    for i in range(2):
        low, high = motor_torque_limits(model, speeds[i])
        clipped[i] = min(max(tau_motor[i], low), high)
    return clipped


def joint_to_motor(model: RobotModel, tau_joint: np.ndarray) -> np.ndarray:
    """Motor-side torques for joint torques; the knee torque is shared across the belt."""
    return np.array([tau_joint[0], tau_joint[1] / model.knee_transmission])


class BaseController(BaseModel):
    """
    Interface of a controller driven by the hybrid simulator.

    Controllers own their memory and are used by one simulation at a time.

    :param RobotModel model: The robot.
    :param MotorParams motor: Motor electrical parameters.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: RobotModel = Field(default_factory=RobotModel)
    motor: MotorParams = Field(default_factory=MotorParams)

    @abstractmethod
    def command(self, world: World, alpha: float) -> ControlCommand:
        """
        Compute the command held over the next step.

        :param World world: The current world.
        :param float alpha: Contact indicator, 1 in stance.
        :return ControlCommand: Torques, voltages and valve request.
        """
        raise NotImplementedError

    def on_event(self, event: SimEvent, world: World) -> None:
        """
        React to a simulator event.

        :param SimEvent event: The event.
        :param World world: The world right after the event.
        """

    def _finish(
        self, world: World, tau_motor: np.ndarray, valve: bool = False, damped: bool = False
    ) -> ControlCommand:
        qdot = world.robot.qdot
        tau_motor = saturate_torques(self.model, tau_motor, qdot)
        speeds = motor_speeds(self.model, qdot)
        voltage = [motor_voltage(tau_motor[i], speeds[i], self.motor) for i in range(2)]
        return ControlCommand(tau=tau_motor, voltage=voltage, valve=valve, damped=damped)


class ZeroTorqueController(BaseController):
    """
    Passive controller: no torque and the valve stays closed.
    """

    def command(self, world: World, alpha: float) -> ControlCommand:
        return ControlCommand(tau=np.zeros(2), voltage=np.zeros(2))


class HopController(BaseController):
    """
    Hopping controller playing back optimized stance forces.

    In stance it pushes the hip with the planned vertical force (compensated for the
    tank pressure read at touchdown) and the Bezier horizontal force; in flight it holds
    the leg at its desired length and the foot placement angle. On release cycles the
    enhanced plan is played and the valve opens ``valve_lead`` before its ascent.

    :param ControllerConfig config: Gains and release plan.
    :param PneumaticConfig pneumatic: Pneumatic configuration for the compensation.
    :param Optional[TrajOptProblem] periodic_problem: Problem of the periodic plan.
    :param Optional[TrajSolution] periodic: Periodic (charging) plan.
    :param Optional[TrajSolution] enhanced: Explosive plan played on release cycles.
    """

    config: ControllerConfig = Field(default_factory=ControllerConfig)
    pneumatic: PneumaticConfig = Field(default_factory=PneumaticConfig)
    periodic_problem: Optional[TrajOptProblem] = None
    periodic: Optional[TrajSolution] = None
    enhanced: Optional[TrajSolution] = None

    touchdowns: int = 0
    releases: int = 0
    releasing: bool = False
    descending: bool = True
    touchdown_time: float = 0.0
    ascent_start: float = 0.0
    leg_angle_target: float = 0.0
    v_prev: float = 0.0
    schedule: Optional[ForceSchedule] = None

    _lead: float = PrivateAttr(0.0)
    _leg_length: float = PrivateAttr(0.0)

    def model_post_init(self, context: Any) -> None:
        if self.config.valve_lead is None:
            self._lead = transient_rise_time(self.pneumatic.actuator)
        else:
            self._lead = self.config.valve_lead
        self._leg_length = self.config.desired_leg_length or leg_range(self.model)[1]

    def _release_this_cycle(self, world: World) -> bool:
        if self.enhanced is None or not self.pneumatic.connected:
            return False
        cycle = self.touchdowns - 1
        if cycle in self.config.release_cycles:
            return True
        threshold = self.config.release_pressure
        if threshold is None:
            return False
        if self.releases > 0:
            return self.releases < self.config.release_count
        return world.tank.pressure >= threshold

    def _stance_schedule(self, world: World) -> Optional[ForceSchedule]:
        if self.releasing:
            trigger = max(self.enhanced.descent.duration - self._lead, 0.0)
            return force_schedule(self.enhanced, trigger_time=trigger)
        if self.periodic is None:
            return None
        if self.config.compensate and self.periodic_problem is not None:
            forces = feedforward_compensation(self.periodic_problem, self.periodic, world.tank.pressure)
            return force_schedule(self.periodic, descent_forces=forces)
        return force_schedule(self.periodic)

    def on_event(self, event: SimEvent, world: World) -> None:
        match event.kind:
            case EventKind.TOUCHDOWN:
                self.touchdowns += 1
                self.releasing = self._release_this_cycle(world)
                if self.releasing:
                    self.releases += 1
                    logger.info(
                        f"Release {self.releases} at touchdown {self.touchdowns}, "
                        f"tank {world.tank.gauge_pressure / 1e3:.1f} kPa gauge"
                    )
                self.descending = True
                self.touchdown_time = event.time
                self.schedule = self._stance_schedule(world)
            case EventKind.TANK_UPDATE:
                self.descending = False
                self.ascent_start = event.time
            case EventKind.LIFTOFF:
                self.releasing = False
            case EventKind.APEX:
                v_k = float(world.robot.qdot[0])
                self.leg_angle_target = foot_placement(v_k, self.v_prev, self.config)
                self.v_prev = v_k
            case _:
                pass

    def _valve_request(self, world: World) -> bool:
        if not self.releasing or not world.stance or self.schedule is None:
            return False
        trigger = self.schedule.trigger_time
        return trigger is not None and world.time - self.touchdown_time >= trigger

    def command(self, world: World, alpha: float) -> ControlCommand:
        state = world.robot
        tau_stance = np.zeros(2)
        tau_aerial = np.zeros(2)
        damped = False
        if alpha > 0.0:
            f_vertical = 0.0
            f_horizontal = 0.0
            if self.schedule is not None:
                if self.descending:
                    f_vertical = self.schedule.force(True, world.time - self.touchdown_time)
                else:
                    f_vertical = self.schedule.force(False, world.time - self.ascent_start)
                stance_time = min(max(world.time - self.touchdown_time, 0.0), self.schedule.stance_duration)
                f_horizontal = bezier_horizontal_profile(
                    self.config.desired_velocity,
                    self.schedule.stance_duration,
                    stance_time,
                    self.config.bezier_gain,
                )
            tau_stance = stance_torques(state, f_vertical, f_horizontal, self.model)
        if alpha < 1.0:
            y_des = np.array([self.leg_angle_target, self._leg_length])
            tau_aerial, damped = aerial_torques(state, y_des, np.zeros(2), self.config, self.model)
        tau_joint = blend(tau_stance, tau_aerial, alpha)
        return self._finish(world, joint_to_motor(self.model, tau_joint), self._valve_request(world), damped)
