"""
Pneumatic force laws of the leg: pump resistance (theoretical and fitted), actuator
quasi-static and transient force, the lumped prismatic-joint force and the tank
update laws.

Conventions:

- ``x`` is compression distance from full extension, ``d = stroke - x`` is the
  remaining length.
- ``ddot`` is the rate of the remaining length, negative while compressing.
- Model forces are absolute-pressure forces. The joint-level helpers subtract the
  atmospheric back-force on the active piston (``net`` forces) because the far side of
  each piston sits at atmospheric pressure.
"""

import math

import numpy as np
from loguru import logger
from scipy.linalg import expm
from scipy.optimize import brentq

from error import DomainError
from schema.pneumatic import (
    ActuatorModel,
    PneumaticConfig,
    PumpFitCoefficients,
    PumpGeometry,
    TankState,
    TransientState,
)


_REL_TOL = 1e-12


def _check_compression(geom: PumpGeometry, x: float) -> None:
    if not (-_REL_TOL * geom.stroke <= x <= geom.stroke * (1.0 + _REL_TOL)):
        raise DomainError(f"compression {x} m is outside [0, {geom.stroke}] m")


def pump_area(geom: PumpGeometry, x: float) -> float:
    """
    Working area at compression ``x``, ramping linearly across the stage transition.

    :param PumpGeometry geom: The pump geometry.
    :param float x: Compression distance (m).
    :return float: Active piston area (m^2).
    """
    l1, l2 = geom.stage1_end, geom.stage2_start
    if x < l1:
        return geom.stage1_area
    if x < l2:
        return geom.stage1_area + (geom.stage2_area - geom.stage1_area) * (x - l1) / (l2 - l1)
    return geom.stage2_area


def _area_slope(geom: PumpGeometry, x: float) -> float:
    l1, l2 = geom.stage1_end, geom.stage2_start
    if l1 <= x < l2:
        return (geom.stage2_area - geom.stage1_area) / (l2 - l1)
    return 0.0


def _swept_volume(geom: PumpGeometry, x: float) -> float:
    a1, a2 = geom.stage1_area, geom.stage2_area
    l1, l2 = geom.stage1_end, geom.stage2_start
    if x <= l1:
        return a1 * x
    if x <= l2:
        u = x - l1
        return a1 * l1 + a1 * u + 0.5 * (a2 - a1) * u * u / (l2 - l1)
    return a1 * l1 + 0.5 * (a1 + a2) * (l2 - l1) + a2 * (x - l2)


def pump_volume(geom: PumpGeometry, x: float) -> float:
    """
    Chamber volume after compressing by ``x``.

    :param PumpGeometry geom: The pump geometry.
    :param float x: Compression distance (m).
    :return float: Chamber volume (m^3).
    """
    return geom.initial_volume - _swept_volume(geom, x)


def compression_at_volume(geom: PumpGeometry, volume: float) -> float:
    """Inverse of ``pump_volume``; extrapolates linearly past the stroke."""
    swept = geom.initial_volume - volume
    a1, a2 = geom.stage1_area, geom.stage2_area
    l1, l2 = geom.stage1_end, geom.stage2_start
    stage1_volume = a1 * l1
    transition_volume = stage1_volume + 0.5 * (a1 + a2) * (l2 - l1)
    if swept <= stage1_volume:
        return swept / a1
    if swept <= transition_volume:
        rest = swept - stage1_volume
        slope = (a2 - a1) / (l2 - l1)
        return l1 + 2.0 * rest / (a1 + math.sqrt(a1 * a1 + 2.0 * slope * rest))
    return l2 + (swept - transition_volume) / a2


def critical_volume(geom: PumpGeometry, tank: TankState) -> float:
    """Chamber volume at which pump pressure reaches tank pressure."""
    return tank.atmospheric * geom.initial_volume / tank.pressure


def critical_compression(geom: PumpGeometry, tank: TankState) -> float:
    """
    Remaining length ``d_C`` at which the check valve opens.

    For a single-area pump this is ``P0*V0/(P_tank*A)``. The value is negative when
    dead volume keeps the valve from opening within the stroke.

    :param PumpGeometry geom: The pump geometry.
    :param TankState tank: The tank state.
    :return float: Critical remaining length (m).
    """
    return geom.stroke - compression_at_volume(geom, critical_volume(geom, tank))


def theoretical_closed_force(geom: PumpGeometry, tank: TankState, d: float) -> float:
    """
    Pump resistance with the check valve closed (isothermal compression).

    :param PumpGeometry geom: The pump geometry.
    :param TankState tank: Supplies the atmospheric pressure.
    :param float d: Remaining length (m), 0 < d <= stroke.
    :return float: Absolute-pressure force (N).
    :raises DomainError: If d is not in (0, stroke].
    """
    if d <= 0.0 or d > geom.stroke * (1.0 + _REL_TOL):
        raise DomainError(f"remaining length {d} m is outside (0, {geom.stroke}] m")
    x = geom.stroke - d
    volume = pump_volume(geom, x)
    if volume <= 0.0:
        raise DomainError(f"pump chamber volume vanishes at remaining length {d} m")
    return tank.atmospheric * geom.initial_volume * pump_area(geom, x) / volume


def theoretical_open_force(geom: PumpGeometry, tank: TankState, d: float) -> float:
    """
    Pump resistance once the check valve has opened into the tank.

    :param PumpGeometry geom: The pump geometry.
    :param TankState tank: The tank state.
    :param float d: Remaining length (m), 0 <= d <= d_C.
    :return float: Absolute-pressure force (N).
    :raises DomainError: If the valve is still closed at d.
    """
    d_c = critical_compression(geom, tank)
    if d < 0.0 or d > d_c + _REL_TOL * geom.stroke:
        raise DomainError(f"remaining length {d} m is outside [0, d_C={d_c}] m")
    x = geom.stroke - d
    shared = tank.pressure * (tank.volume + critical_volume(geom, tank))
    return pump_area(geom, x) * shared / (tank.volume + pump_volume(geom, x))


def theoretical_pump_force(geom: PumpGeometry, tank: TankState, x: float) -> float:
    """Theoretical compression force at compression ``x``, selecting the valve branch."""
    _check_compression(geom, x)
    x = min(max(x, 0.0), geom.stroke)
    d = geom.stroke - x
    if d > critical_compression(geom, tank):
        return theoretical_closed_force(geom, tank, d)
    return theoretical_open_force(geom, tank, d)


def theoretical_pump_slope(geom: PumpGeometry, tank: TankState, x: float) -> float:
    """Derivative of ``theoretical_pump_force`` with respect to compression."""
    x = min(max(x, 0.0), geom.stroke)
    area = pump_area(geom, x)
    area_slope = _area_slope(geom, x)
    volume = pump_volume(geom, x)
    if geom.stroke - x > critical_compression(geom, tank):
        scale = tank.atmospheric * geom.initial_volume
        return scale * (area_slope * volume + area * area) / volume**2
    shared = tank.pressure * (tank.volume + critical_volume(geom, tank))
    total = tank.volume + volume
    return shared * (area_slope * total + area * area) / total**2


def fitted_closed_force(coeffs: PumpFitCoefficients, geom: PumpGeometry, x: float) -> float:
    """Closed-valve branch of the fitted pump model."""
    if x < geom.stage1_end:
        return coeffs.m1 * x + coeffs.b1
    if x < geom.stage2_start:
        return coeffs.m2 * x + coeffs.b2
    return coeffs.c1 * x * x + coeffs.c2 * x + coeffs.c3


def _fitted_closed_slope(coeffs: PumpFitCoefficients, geom: PumpGeometry, x: float) -> float:
    if x < geom.stage1_end:
        return coeffs.m1
    if x < geom.stage2_start:
        return coeffs.m2
    return 2.0 * coeffs.c1 * x + coeffs.c2


def fitted_compression_force(
    coeffs: PumpFitCoefficients, geom: PumpGeometry, tank: TankState, x: float
) -> float:
    """Fitted compression force at ``x``, including the open-valve multiplier."""
    x_c = geom.stroke - critical_compression(geom, tank)
    if x < x_c:
        return fitted_closed_force(coeffs, geom, x)
    return fitted_closed_force(coeffs, geom, x_c) * coeffs.open_multiplier(x)


def fitted_compression_slope(
    coeffs: PumpFitCoefficients, geom: PumpGeometry, tank: TankState, x: float
) -> float:
    """Derivative of ``fitted_compression_force`` with respect to compression."""
    x_c = geom.stroke - critical_compression(geom, tank)
    if x < x_c:
        return _fitted_closed_slope(coeffs, geom, x)
    return fitted_closed_force(coeffs, geom, x_c) * (2.0 * coeffs.c4 * x + coeffs.c5)


def fitted_pump_force(
    coeffs: PumpFitCoefficients,
    geom: PumpGeometry,
    tank: TankState,
    x: float,
    ddot: float,
    friction: float = 0.0,
) -> float:
    """
    Data-driven pump force.

    :param PumpFitCoefficients coeffs: Fitted coefficients.
    :param PumpGeometry geom: Geometry holding the breakpoints.
    :param TankState tank: Tank state, sets the valve opening point.
    :param float x: Compression distance (m).
    :param float ddot: Rate of the remaining length (m/s), positive while extending.
    :param float friction: Coulomb friction opposing extension (N).
    :return float: Force (N), zero or minus friction while extending.
    :raises DomainError: If x is outside [0, stroke].
    """
    _check_compression(geom, x)
    if ddot >= 0.0:
        return -friction if ddot > 0.0 else 0.0
    return fitted_compression_force(coeffs, geom, tank, min(max(x, 0.0), geom.stroke))


def pump_stroke_tank_update(geom: PumpGeometry, tank: TankState, x_deepest: float) -> TankState:
    """
    Tank state after a pump stroke reached ``x_deepest``.

    Air pushed past the check valve shares the tank volume isothermally, so the
    pressure rises only when the stroke went past the valve opening point.

    :param PumpGeometry geom: The pump geometry.
    :param TankState tank: The tank before the stroke.
    :param float x_deepest: Deepest compression of the stroke (m).
    :return TankState: The tank after the stroke.
    """
    x = min(max(x_deepest, 0.0), geom.stroke)
    reached = pump_volume(geom, x)
    v_c = critical_volume(geom, tank)
    if reached >= v_c:
        return tank
    pressure = tank.pressure * (tank.volume + v_c) / (tank.volume + reached)
    logger.debug(f"Pump stroke to x={x:.4f} m raised tank {tank.pressure:.1f} -> {pressure:.1f} Pa")
    return tank.model_copy(update={"pressure": pressure})


def static_actuator_force(act: ActuatorModel, tank: TankState, d: float) -> float:
    """
    Quasi-static actuator force at extension ``d`` with the tank and actuator sharing
    their volume.

    :param ActuatorModel act: The actuator.
    :param TankState tank: The tank state at valve trigger.
    :param float d: Extension (m), 0 <= d <= stroke.
    :return float: Absolute-pressure force (N).
    :raises DomainError: If d is outside [0, stroke].
    """
    if not (-_REL_TOL <= d <= act.stroke * (1.0 + _REL_TOL)):
        raise DomainError(f"actuator extension {d} m is outside [0, {act.stroke}] m")
    area = act.bore_area
    return area * tank.pressure * tank.volume / (tank.volume + area * d)


def static_actuator_slope(act: ActuatorModel, tank: TankState, d: float) -> float:
    """Derivative of ``static_actuator_force`` with respect to extension."""
    area = act.bore_area
    return -area * area * tank.pressure * tank.volume / (tank.volume + area * d) ** 2


def release_tank_update(tank: TankState, act: ActuatorModel, extension: float) -> TankState:
    """
    Tank state after an actuator stroke of ``extension`` vented to atmosphere.

    :param TankState tank: The tank at valve trigger.
    :param ActuatorModel act: The actuator.
    :param float extension: Extension reached while the valve was open (m).
    :return TankState: The tank after the actuator chamber vented.
    """
    extension = min(max(extension, 0.0), act.stroke)
    pressure = tank.pressure * tank.volume / (tank.volume + act.bore_area * extension)
    return tank.model_copy(update={"pressure": max(pressure, tank.atmospheric)})


def transient_roots(act: ActuatorModel) -> tuple[complex, complex]:
    """Roots of ``k1*s^2 + k2*s + k3``; requires ``k1 > 0``."""
    disc = complex(act.k2 * act.k2 - 4.0 * act.k1 * act.k3)
    root = np.sqrt(disc)
    return (-act.k2 + root) / (2.0 * act.k1), (-act.k2 - root) / (2.0 * act.k1)


def transient_step_response(act: ActuatorModel, t: np.ndarray | float) -> tuple[np.ndarray, np.ndarray]:
    """
    Closed-form response of the transient ODE to a unit step applied at ``t = 0``.

    :param ActuatorModel act: The actuator holding k1, k2, k3.
    :param t: Time since trigger (s), scalar or array, values >= 0.
    :return tuple: ``(delta, delta_dot)`` arrays shaped like ``t``.
    """
    t = np.asarray(t, dtype=float)
    steady = 1.0 / act.k3
    if act.k1 == 0.0 and act.k2 == 0.0:
        return np.full_like(t, steady), np.zeros_like(t)
    if act.k1 == 0.0:
        tau = act.k2 / act.k3
        decay = np.exp(-t / tau)
        return steady * (1.0 - decay), steady * decay / tau
    r1, r2 = transient_roots(act)
    if abs(r1 - r2) <= 1e-7 * abs(r1):
        r = 0.5 * (r1 + r2).real
        grow = np.exp(r * t)
        return steady * (1.0 - (1.0 - r * t) * grow), steady * r * r * t * grow
    e1, e2 = np.exp(r1 * t), np.exp(r2 * t)
    delta = steady * (1.0 + (r2 * e1 - r1 * e2) / (r1 - r2))
    delta_dot = steady * r1 * r2 * (e1 - e2) / (r1 - r2)
    return np.real(delta), np.real(delta_dot)


def transient_settling_time(act: ActuatorModel) -> float:
    """Four time constants of the slowest mode; zero for an instantaneous response."""
    if act.k1 == 0.0 and act.k2 == 0.0:
        return 0.0
    if act.k1 == 0.0:
        return 4.0 * act.k2 / act.k3
    slowest = min(abs(r.real) for r in transient_roots(act))
    return 4.0 / slowest


def transient_rise_time(act: ActuatorModel, level: float = 0.9) -> float:
    """
    Time for a unit step response to first reach ``level`` of its steady state.

    :param ActuatorModel act: The actuator.
    :param float level: Fraction of the steady state, in (0, 1).
    :return float: Rise time (s); zero for an instantaneous response.
    """
    if act.k1 == 0.0 and act.k2 == 0.0:
        return 0.0
    target = level / act.k3
    horizon = transient_settling_time(act)
    grid = np.linspace(0.0, 2.0 * horizon, 2001)
    delta, _ = transient_step_response(act, grid)
    above = np.nonzero(delta >= target)[0]
    if above.size == 0:
        raise DomainError(f"step response never reaches {level} of steady state")
    k = int(above[0])
    if k == 0:
        return 0.0

    def gap(t: float) -> float:
        return float(transient_step_response(act, t)[0]) - target

    return brentq(gap, grid[k - 1], grid[k], xtol=1e-14, rtol=1e-12)


def transient_derivative(
    act: ActuatorModel, delta: float, delta_dot: float, valve_open: bool
) -> tuple[float, float]:
    """Right-hand side of the transient ODE for co-integration with the rigid body."""
    u = 1.0 if valve_open else 0.0
    if act.k1 > 0.0:
        return delta_dot, (u - act.k2 * delta_dot - act.k3 * delta) / act.k1
    if act.k2 > 0.0:
        return (u - act.k3 * delta) / act.k2, 0.0
    return 0.0, 0.0


def step_transient(state: TransientState, act: ActuatorModel, dt: float) -> TransientState:
    """
    Advance the transient state exactly over one zero-order-hold step.

    :param TransientState state: Current state; ``valve_open`` is the held input.
    :param ActuatorModel act: The actuator.
    :param float dt: Step length (s), > 0.
    :return TransientState: The state after ``dt``.
    :raises DomainError: If dt is not positive.
    """
    if dt <= 0.0:
        raise DomainError(f"time step must be positive, got {dt}")
    u = 1.0 if state.valve_open else 0.0
    if act.k1 > 0.0:
        system = np.zeros((3, 3))
        system[0, 1] = 1.0
        system[1, 0] = -act.k3 / act.k1
        system[1, 1] = -act.k2 / act.k1
        system[1, 2] = 1.0 / act.k1
        transition = expm(system * dt)
        delta, delta_dot, _ = transition @ np.array([state.delta, state.delta_dot, u])
    elif act.k2 > 0.0:
        target = u / act.k3
        delta = target + (state.delta - target) * math.exp(-act.k3 * dt / act.k2)
        delta_dot = (u - act.k3 * delta) / act.k2
    else:
        delta, delta_dot = u / act.k3, 0.0
    elapsed = state.time_since_trigger + dt if state.valve_open else 0.0
    return state.model_copy(
        update={"delta": float(delta), "delta_dot": float(delta_dot), "time_since_trigger": elapsed}
    )


def valve_command(requested: bool, tank: TankState, cfg: PneumaticConfig) -> bool:
    """The solenoid only actuates when connected and above its minimum gauge pressure."""
    return bool(requested and cfg.connected and tank.gauge_pressure >= cfg.valve_min_pressure)


def joint_pump_compression(cfg: PneumaticConfig, x_joint: float) -> float:
    """Pump compression for a prismatic joint compression, clipped to the stroke."""
    return min(max(cfg.pump_preload + x_joint, 0.0), cfg.pump.stroke)


def joint_actuator_extension(cfg: PneumaticConfig, x_joint: float) -> float:
    """Actuator extension for a prismatic joint compression, clipped to the stroke."""
    stroke = cfg.actuator.stroke
    return min(max(stroke - cfg.actuator_preload - x_joint, 0.0), stroke)


def pump_joint_force(cfg: PneumaticConfig, tank: TankState, x_joint: float) -> tuple[float, float]:
    """
    Net pump force on the joint while compressing and its slope in joint compression.

    :param PneumaticConfig cfg: The pneumatic configuration.
    :param TankState tank: The tank state.
    :param float x_joint: Joint compression from full leg extension (m).
    :return tuple[float, float]: Net force (N) and dF/dx_joint (N/m).
    """
    if not cfg.connected:
        return 0.0, 0.0
    raw = cfg.pump_preload + x_joint
    x = joint_pump_compression(cfg, x_joint)
    inside = 0.0 < raw < cfg.pump.stroke
    if cfg.fit is not None:
        force = fitted_compression_force(cfg.fit, cfg.pump, tank, x)
        slope = fitted_compression_slope(cfg.fit, cfg.pump, tank, x) if inside else 0.0
    else:
        force = theoretical_pump_force(cfg.pump, tank, x)
        slope = theoretical_pump_slope(cfg.pump, tank, x) if inside else 0.0
    net = force - tank.atmospheric * pump_area(cfg.pump, x)
    if net <= 0.0:
        return 0.0, 0.0
    return net, slope - (tank.atmospheric * _area_slope(cfg.pump, x) if inside else 0.0)


def actuator_joint_force(cfg: PneumaticConfig, tank: TankState, x_joint: float) -> tuple[float, float]:
    """
    Net quasi-static actuator force on the joint (before the transient factor) and its
    slope in joint compression.

    :param PneumaticConfig cfg: The pneumatic configuration.
    :param TankState tank: The tank state frozen at valve trigger.
    :param float x_joint: Joint compression from full leg extension (m).
    :return tuple[float, float]: Net force (N) and dF/dx_joint (N/m).
    """
    if not cfg.connected:
        return 0.0, 0.0
    act = cfg.actuator
    raw = act.stroke - cfg.actuator_preload - x_joint
    e = joint_actuator_extension(cfg, x_joint)
    net = static_actuator_force(act, tank, e) - tank.atmospheric * act.bore_area
    if net <= 0.0:
        return 0.0, 0.0
    # one-sided slope at full leg extension, where the actuator is fully out
    inside = 0.0 < raw <= act.stroke
    return net, -static_actuator_slope(act, tank, e) if inside else 0.0


def lumped_pneumatic_force(
    cfg: PneumaticConfig,
    tank: TankState,
    transient: TransientState,
    x_joint: float,
    ddot: float,
    valve_open: bool,
    absolute: bool = False,
) -> float:
    """
    Force of the pump and actuator acting in parallel on the prismatic joint.

    Compressing (``ddot < 0``) the pump resists; extending with the valve closed the
    joint is free apart from extension friction; extending with the valve open the
    actuator pushes with its quasi-static force scaled by the transient state.
    ``ddot == 0`` counts as extension.

    :param PneumaticConfig cfg: The pneumatic configuration.
    :param TankState tank: Live tank for the pump, frozen trigger tank for the actuator.
    :param TransientState transient: Normalized actuator force state.
    :param float x_joint: Joint compression from full leg extension (m).
    :param float ddot: Rate of the joint length (m/s), negative while compressing.
    :param bool valve_open: Solenoid command.
    :param bool absolute: Return absolute-pressure forces without the atmospheric correction.
    :return float: Joint force (N), positive when pushing the joint apart.
    """
    if not cfg.connected:
        return 0.0
    if ddot < 0.0:
        if not absolute:
            return pump_joint_force(cfg, tank, x_joint)[0]
        x = joint_pump_compression(cfg, x_joint)
        if cfg.fit is not None:
            return fitted_compression_force(cfg.fit, cfg.pump, tank, x)
        return theoretical_pump_force(cfg.pump, tank, x)
    if valve_open:
        if absolute:
            e = joint_actuator_extension(cfg, x_joint)
            return static_actuator_force(cfg.actuator, tank, e) * transient.delta
        return actuator_joint_force(cfg, tank, x_joint)[0] * transient.delta
    return -cfg.extension_friction if ddot > 0.0 else 0.0
