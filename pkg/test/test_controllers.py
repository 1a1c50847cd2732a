"""
Tests for the hopping feedback laws and controllers.
"""

import numpy as np
import pytest

from error import DomainError
from logic.controllers import (
    HopController,
    ZeroTorqueController,
    aerial_torques,
    bezier_horizontal_profile,
    blend,
    foot_placement,
    joint_to_motor,
    motor_voltage,
    saturate_torques,
    stance_torques,
)
from logic.dynamics import foot_jacobian, leg_kinematics
from schema.controller import ControllerConfig, MotorParams
from schema.enums import AerialMapping, EventKind
from schema.pneumatic import TankState
from schema.robot import RobotModel, RobotState
from schema.simulation import SimEvent, World


def create_test_world(qdot=None) -> World:
    robot = RobotState(q=[0.0, 0.35, 0.05, 0.9], qdot=qdot if qdot is not None else np.zeros(4))
    return World(robot=robot, tank=TankState())


def test_foot_placement():
    cfg = ControllerConfig()
    assert foot_placement(0.5, 0.3, cfg) == pytest.approx(0.06)
    assert foot_placement(0.0, 0.0, cfg) == 0.0
    assert foot_placement(10.0, 0.0, cfg) == pytest.approx(cfg.leg_angle_limit)
    assert foot_placement(-10.0, 0.0, cfg) == pytest.approx(-cfg.leg_angle_limit)


def test_motor_voltage():
    params = MotorParams()
    assert motor_voltage(3.728, 0.0, params, clamp=False) == pytest.approx(19.4167, abs=1e-4)
    assert motor_voltage(10.0, 0.0, params) == pytest.approx(params.supply_voltage)
    with_emf = MotorParams(back_emf=0.01)
    assert motor_voltage(0.0, 2.0, with_emf) == pytest.approx(0.01 * 19.2 * 2.0)


def test_bezier_profile():
    assert bezier_horizontal_profile(0.5, 0.2, 0.1, gain=10.0) == pytest.approx(5.0)
    assert bezier_horizontal_profile(0.5, 0.2, 0.0) == pytest.approx(0.0)
    assert bezier_horizontal_profile(0.5, 0.2, 0.2) == pytest.approx(0.0)
    assert bezier_horizontal_profile(0.0, 0.2, 0.1) == 0.0
    with pytest.raises(DomainError):
        bezier_horizontal_profile(0.5, 0.2, 0.3)


def test_blend():
    result = blend(np.array([4.0, 8.0]), np.array([0.0, 0.0]), 0.25)
    assert result == pytest.approx([1.0, 2.0])
    assert blend([1.0, 1.0], [3.0, 3.0], 0.0) == pytest.approx([3.0, 3.0])
    with pytest.raises(DomainError):
        blend([0.0, 0.0], [0.0, 0.0], 1.5)


def test_aerial_torques_vanish_on_target():
    model = RobotModel()
    state = create_test_world().robot
    kin = leg_kinematics(model, state.q)
    y_des = np.array([kin.q_leg, kin.L])
    tau, damped = aerial_torques(state, y_des, np.zeros(2), ControllerConfig(), model)
    assert tau == pytest.approx([0.0, 0.0], abs=1e-12)
    assert not damped


def test_aerial_inverse_mapping_damps_straight_leg():
    model = RobotModel()
    state = RobotState(q=[0.0, 0.35, 0.0, 0.0], qdot=np.zeros(4))
    cfg = ControllerConfig(aerial_mapping=AerialMapping.INVERSE)
    tau, damped = aerial_torques(state, np.array([0.1, 0.2]), np.zeros(2), cfg, model)
    assert damped
    assert np.all(np.isfinite(tau))


def test_stance_torques_use_foot_jacobian():
    model = RobotModel()
    state = create_test_world().robot
    tau = stance_torques(state, 30.0, 2.0, model)
    expected = foot_jacobian(model, state.q).T @ np.array([2.0, 30.0])
    assert tau == pytest.approx(expected)


def test_torque_saturation_and_belt_split():
    model = RobotModel()
    clipped = saturate_torques(model, np.array([10.0, -10.0]), np.zeros(4))
    assert clipped == pytest.approx([3.728, -3.728])
    motor = joint_to_motor(model, np.array([1.0, 6.0]))
    assert motor == pytest.approx([1.0, 2.0])


def test_zero_torque_controller():
    command = ZeroTorqueController().command(create_test_world(), 0.0)
    assert np.all(command.tau == 0.0)
    assert not command.valve


def test_hop_controller_places_foot_at_apex():
    controller = HopController()
    world = create_test_world(qdot=np.array([0.5, 0.0, 0.0, 0.0]))
    apex = SimEvent(kind=EventKind.APEX, time=0.0, cycle=0, z_hip=0.35, tank_pressure=world.tank.pressure)
    controller.on_event(apex, world)
    assert controller.leg_angle_target == pytest.approx(0.1 * 0.5 + 0.05 * 0.5)
    assert controller.v_prev == pytest.approx(0.5)


def test_hop_controller_without_plan_stays_closed():
    controller = HopController()
    world = create_test_world()
    touchdown = SimEvent(
        kind=EventKind.TOUCHDOWN, time=0.0, cycle=0, z_hip=0.2, tank_pressure=world.tank.pressure
    )
    controller.on_event(touchdown, world)
    assert controller.touchdowns == 1
    assert not controller.releasing
    assert controller.schedule is None
    command = controller.command(world, 1.0)
    assert not command.valve
    assert command.tau == pytest.approx([0.0, 0.0])
    flight = controller.command(world, 0.0)
    assert np.all(np.abs(flight.tau) <= 3.728 + 1e-12)
    assert np.all(np.abs(flight.voltage) <= MotorParams().supply_voltage)
