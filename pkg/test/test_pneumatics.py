"""
Tests for the pneumatic force laws and tank updates.
"""

import numpy as np
import pytest

from error import DomainError
from logic.pneumatics import (
    critical_compression,
    fitted_pump_force,
    lumped_pneumatic_force,
    pump_stroke_tank_update,
    pump_volume,
    release_tank_update,
    static_actuator_force,
    step_transient,
    theoretical_closed_force,
    theoretical_open_force,
    theoretical_pump_force,
    theoretical_pump_slope,
    transient_rise_time,
    transient_step_response,
    valve_command,
)
from schema.pneumatic import (
    ATMOSPHERIC_PA,
    ActuatorModel,
    PneumaticConfig,
    PumpFitCoefficients,
    PumpGeometry,
    TankState,
    TransientState,
)


AREA = 1.539e-4
TANK_VOLUME = 1.939e-4


def create_test_pump() -> PumpGeometry:
    """Single-area pump for which the closed-valve force is P0*V0/d."""
    return PumpGeometry.single_stage(AREA, stroke=0.130)


def create_test_tank(pressure: float = ATMOSPHERIC_PA) -> TankState:
    return TankState(pressure=pressure, volume=TANK_VOLUME)


def test_closed_force_at_full_extension_is_atmospheric():
    geom = create_test_pump()
    force = theoretical_closed_force(geom, create_test_tank(), geom.stroke)
    assert force == pytest.approx(ATMOSPHERIC_PA * AREA, rel=1e-12)


def test_closed_force_at_half_stroke():
    geom = create_test_pump()
    assert theoretical_closed_force(geom, create_test_tank(), 0.065) == pytest.approx(31.2, abs=0.05)


def test_closed_force_rejects_zero_remaining_length():
    with pytest.raises(DomainError):
        theoretical_closed_force(create_test_pump(), create_test_tank(), 0.0)


def test_critical_compression():
    geom = create_test_pump()
    assert critical_compression(geom, create_test_tank()) == pytest.approx(geom.stroke, rel=1e-12)
    doubled = create_test_tank(2.0 * ATMOSPHERIC_PA)
    assert critical_compression(geom, doubled) == pytest.approx(0.065, rel=1e-9)
    tested = create_test_tank(ATMOSPHERIC_PA + 225e3)
    assert 0.0 < critical_compression(geom, tested) < geom.stroke


def test_open_force_at_full_compression():
    tank = create_test_tank(2.0 * ATMOSPHERIC_PA)
    assert theoretical_open_force(create_test_pump(), tank, 0.0) == pytest.approx(32.8, abs=0.01)


def test_closed_and_open_forces_meet_at_valve_opening():
    geom = create_test_pump()
    tank = create_test_tank(2.0 * ATMOSPHERIC_PA)
    d_c = critical_compression(geom, tank)
    closed = theoretical_closed_force(geom, tank, d_c)
    opened = theoretical_open_force(geom, tank, d_c)
    assert closed == pytest.approx(AREA * tank.pressure, rel=1e-9)
    assert opened == pytest.approx(closed, rel=1e-12)


def test_open_force_rejects_closed_valve():
    tank = create_test_tank(2.0 * ATMOSPHERIC_PA)
    with pytest.raises(DomainError):
        theoretical_open_force(create_test_pump(), tank, 0.1)


def test_open_force_approaches_tank_pressure_for_large_tank():
    geom = create_test_pump()
    tank = TankState(pressure=2.0 * ATMOSPHERIC_PA, volume=1e3)
    for d in (0.0, 0.03, 0.06):
        assert theoretical_open_force(geom, tank, d) == pytest.approx(AREA * tank.pressure, rel=1e-6)


def test_two_stage_force_is_continuous_and_monotone():
    geom = PumpGeometry()
    tank = create_test_tank(ATMOSPHERIC_PA + 100e3)
    x = np.linspace(0.0, 0.12, 601)
    force = np.array([theoretical_pump_force(geom, tank, xi) for xi in x])
    assert np.all(np.diff(force) >= -1e-9), "compression force must not drop as the pump compresses"
    valve_opening = geom.stroke - critical_compression(geom, tank)
    for edge in (geom.stage1_end, geom.stage2_start, valve_opening):
        left = theoretical_pump_force(geom, tank, edge - 1e-9)
        right = theoretical_pump_force(geom, tank, edge + 1e-9)
        assert right == pytest.approx(left, rel=1e-6)


def test_pump_slope_matches_finite_difference():
    geom = PumpGeometry()
    tank = create_test_tank(ATMOSPHERIC_PA + 100e3)
    h = 1e-7
    for x in (0.01, 0.055, 0.08, 0.115):
        ahead = theoretical_pump_force(geom, tank, x + h)
        behind = theoretical_pump_force(geom, tank, x - h)
        numeric = (ahead - behind) / (2 * h)
        assert theoretical_pump_slope(geom, tank, x) == pytest.approx(numeric, rel=1e-5)


def test_single_stage_pump_volume_vanishes_at_full_stroke():
    geom = create_test_pump()
    assert pump_volume(geom, geom.stroke) == pytest.approx(0.0, abs=1e-15)


def test_fitted_pump_force_is_zero_while_extending():
    coeffs = PumpFitCoefficients(m1=100.0, b1=15.0, m2=120.0, b2=14.0, c1=0.0, c2=150.0, c3=12.0)
    geom = PumpGeometry()
    tank = create_test_tank()
    assert fitted_pump_force(coeffs, geom, tank, 0.05, ddot=0.1) == 0.0
    assert fitted_pump_force(coeffs, geom, tank, 0.05, ddot=0.1, friction=2.0) == -2.0
    with pytest.raises(DomainError):
        fitted_pump_force(coeffs, geom, tank, 0.2, ddot=-0.1)


def test_tank_update_after_full_stroke():
    tank = create_test_tank(2.0 * ATMOSPHERIC_PA)
    updated = pump_stroke_tank_update(create_test_pump(), tank, 0.130)
    assert updated.pressure == pytest.approx(213.1e3, abs=50.0)


def test_tank_unchanged_when_valve_never_opens():
    tank = create_test_tank(2.0 * ATMOSPHERIC_PA)
    assert pump_stroke_tank_update(create_test_pump(), tank, 0.03) == tank


def test_repeated_strokes_plateau():
    geom = PumpGeometry()
    tank = create_test_tank()
    pressures = [tank.pressure]
    for _ in range(15):
        tank = pump_stroke_tank_update(geom, tank, 0.12)
        pressures.append(tank.pressure)
    increments = np.diff(pressures)
    assert np.all(increments >= 0.0)
    assert np.all(np.diff(increments[1:]) <= 1e-9), "per-stroke increments must shrink"


def test_static_actuator_force():
    act = ActuatorModel()
    tank = create_test_tank(303370.0)
    assert static_actuator_force(act, tank, 0.0) == pytest.approx(251.7, abs=0.1)
    assert static_actuator_force(act, tank, act.stroke) == pytest.approx(175.5, abs=0.2)


def test_static_actuator_conserved_product():
    act = ActuatorModel()
    tank = create_test_tank(303370.0)
    products = [
        static_actuator_force(act, tank, d) * (tank.volume + act.bore_area * d)
        for d in np.linspace(0.0, act.stroke, 7)
    ]
    assert np.allclose(products, products[0], rtol=1e-12, atol=0.0)


def test_release_update_never_drops_below_atmospheric():
    act = ActuatorModel()
    tank = create_test_tank(ATMOSPHERIC_PA + 1e3)
    assert release_tank_update(tank, act, act.stroke).pressure == ATMOSPHERIC_PA
    high = create_test_tank(303370.0)
    expected = 303370.0 * TANK_VOLUME / (TANK_VOLUME + act.bore_area * 0.05)
    assert release_tank_update(high, act, 0.05).pressure == pytest.approx(expected, rel=1e-12)


def test_transient_stays_at_rest_without_input():
    state = step_transient(TransientState(), ActuatorModel(), 0.01)
    assert state.delta == 0.0
    assert state.delta_dot == 0.0


def test_transient_settles_to_one():
    act = ActuatorModel()
    state = TransientState(valve_open=True)
    for _ in range(100):
        state = step_transient(state, act, 0.01)
    assert state.delta == pytest.approx(1.0, abs=1e-6)
    assert state.time_since_trigger == pytest.approx(1.0, rel=1e-9)


def test_overdamped_transient_matches_closed_form():
    act = ActuatorModel(k1=1.0, k2=3.0, k3=1.0)
    state = TransientState(valve_open=True)
    for _ in range(50):
        state = step_transient(state, act, 0.01)
    delta, delta_dot = transient_step_response(act, 0.5)
    assert state.delta == pytest.approx(float(delta), abs=1e-8)
    assert state.delta_dot == pytest.approx(float(delta_dot), abs=1e-8)


def test_transient_step_rejects_non_positive_step():
    with pytest.raises(DomainError):
        step_transient(TransientState(), ActuatorModel(), 0.0)


def test_instantaneous_transient():
    act = ActuatorModel(k1=0.0, k2=0.0)
    assert transient_rise_time(act) == 0.0
    state = step_transient(TransientState(valve_open=True), act, 1e-4)
    assert state.delta == 1.0


def test_unstable_transient_is_rejected():
    with pytest.raises(ValueError):
        ActuatorModel(k1=1e-4, k2=0.0)


def test_lumped_force_branches():
    cfg = PneumaticConfig()
    tank = create_test_tank(303370.0)
    settled = TransientState(delta=1.0, valve_open=True)
    retracted = cfg.actuator.stroke - cfg.actuator_preload

    closed = lumped_pneumatic_force(cfg, tank, TransientState(), 0.02, ddot=0.1, valve_open=False)
    assert closed == 0.0

    pushing = lumped_pneumatic_force(
        cfg, tank, settled, retracted, ddot=0.1, valve_open=True, absolute=True
    )
    assert pushing == pytest.approx(251.7, abs=0.1)

    net = lumped_pneumatic_force(cfg, tank, settled, retracted, ddot=0.1, valve_open=True)
    assert net == pytest.approx(pushing - ATMOSPHERIC_PA * cfg.actuator.bore_area, rel=1e-12)


def test_lumped_force_uses_fitted_stage_one_at_zero_compression():
    coeffs = PumpFitCoefficients(m1=100.0, b1=5.0, m2=120.0, b2=4.0, c1=0.0, c2=150.0, c3=2.0)
    cfg = PneumaticConfig(fit=coeffs, pump_preload=0.0)
    force = lumped_pneumatic_force(
        cfg, create_test_tank(), TransientState(), 0.0, ddot=-0.1, valve_open=False, absolute=True
    )
    assert force == pytest.approx(5.0)


def test_disconnected_pneumatics_apply_no_force():
    cfg = PneumaticConfig(connected=False)
    tank = create_test_tank(303370.0)
    assert lumped_pneumatic_force(cfg, tank, TransientState(delta=1.0), 0.05, -0.2, False) == 0.0
    assert not valve_command(True, tank, cfg)


def test_valve_needs_minimum_pressure():
    cfg = PneumaticConfig(valve_min_pressure=69e3)
    assert not valve_command(True, create_test_tank(ATMOSPHERIC_PA + 50e3), cfg)
    assert valve_command(True, create_test_tank(ATMOSPHERIC_PA + 70e3), cfg)
    assert not valve_command(False, create_test_tank(ATMOSPHERIC_PA + 70e3), cfg)
