"""
Tests for the event-driven hopper simulation.
"""

import math

import numpy as np
import pytest

from error import DomainError
from logic.controllers import ZeroTorqueController
from logic.dynamics import foot_position
from logic.simulator import HybridSimulator
from schema.enums import ContactMode, EventKind
from schema.pneumatic import ATMOSPHERIC_PA, PneumaticConfig
from schema.robot import RobotModel
from schema.simulation import SimConfig


def create_test_simulator(**updates) -> HybridSimulator:
    config = SimConfig(**{"dt": 5e-4, "max_cycle_time": 0.3, **updates})
    return HybridSimulator(RobotModel(), PneumaticConfig(connected=False), config)


def test_initial_and_resting_worlds():
    simulator = create_test_simulator()
    world = simulator.initial_world(apex_clearance=0.05)
    assert world.robot.mode is ContactMode.AERIAL
    assert foot_position(simulator.model, world.robot.q)[1] == pytest.approx(0.05, abs=1e-12)
    resting = simulator.resting_world()
    assert resting.robot.mode is ContactMode.STANCE
    assert foot_position(simulator.model, resting.robot.q)[1] == pytest.approx(0.0, abs=1e-12)


def test_aerial_step_without_events():
    simulator = create_test_simulator()
    world = simulator.initial_world(apex_clearance=0.05)
    after = simulator.step(world, ZeroTorqueController())
    assert after.time == pytest.approx(5e-4)
    assert after.events == ()
    assert after.robot.qdot[1] == pytest.approx(-9.81 * 5e-4)


def test_drop_touches_down_at_free_fall_time():
    simulator = create_test_simulator()
    world = simulator.initial_world(apex_clearance=0.05)
    trace = simulator.run_cycles(world, ZeroTorqueController(), 1)

    touchdown = trace.events[0]
    assert touchdown.kind is EventKind.TOUCHDOWN
    assert touchdown.time == pytest.approx(math.sqrt(2 * 0.05 / 9.81), abs=1e-6)
    assert touchdown.data["velocity"] == pytest.approx(-math.sqrt(2 * 9.81 * 0.05), abs=1e-5)
    assert touchdown.data["impact_loss"] > 0.0
    assert trace.termination in ("completed", "settled", "fall")
    assert all(s.tank_pressure == ATMOSPHERIC_PA for s in trace.samples)
    assert np.all(np.isfinite([s.q[1] for s in trace.samples]))


def test_run_cycles_rejects_zero_cycles():
    simulator = create_test_simulator()
    with pytest.raises(DomainError):
        simulator.run_cycles(simulator.initial_world(), ZeroTorqueController(), 0)


def test_stance_holds_the_foot():
    simulator = create_test_simulator()
    world = simulator.resting_world()
    foot = foot_position(simulator.model, world.robot.q)
    for _ in range(100):
        world = simulator.step(world, ZeroTorqueController())
        assert world.stance
        assert foot_position(simulator.model, world.robot.q) == pytest.approx(foot, abs=1e-6)


def test_unpowered_robot_settles_without_hopping():
    simulator = create_test_simulator(max_cycle_time=0.05)
    trace = simulator.run_cycles(simulator.resting_world(), ZeroTorqueController(), 1)
    assert trace.termination == "settled"
    assert trace.cycles == []
    assert all(event.kind is not EventKind.LIFTOFF for event in trace.events)


def test_runs_are_deterministic():
    simulator = create_test_simulator(contact_noise=0.05, seed=3)
    world = simulator.initial_world(apex_clearance=0.05)
    first = simulator.run_cycles(world, ZeroTorqueController(), 1)
    second = simulator.run_cycles(world, ZeroTorqueController(), 1)
    assert len(first.samples) == len(second.samples)
    assert all(a.t == b.t and np.array_equal(a.q, b.q) for a, b in zip(first.samples, second.samples))
    assert [e.time for e in first.events] == [e.time for e in second.events]
