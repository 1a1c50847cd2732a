"""
Energy accounting across the mechanical and pneumatic paths: pump work charges the
tank, the tank releases into the actuator and the actuator works on the leg.
"""

import math

import numpy as np
from loguru import logger
from scipy.integrate import trapezoid

from error import DomainError
from schema.energy import EnergyAudit, EnergyLedger, EnergyRow
from schema.enums import EventKind
from schema.simulation import SimTrace


def pump_work(compression: np.ndarray, force: np.ndarray) -> float:
    """
    Work absorbed by the pump along a logged compression path.

    :param np.ndarray compression: Pump compression samples (m), in path order.
    :param np.ndarray force: Pump force at each sample (N).
    :return float: ``integral F dx`` by trapezoidal quadrature (J), positive while the
        pump is being compressed.
    """
    compression = np.asarray(compression, dtype=float)
    if compression.size < 2:
        return 0.0
    return float(trapezoid(np.asarray(force, dtype=float), compression))


def actuator_work(extension: np.ndarray, force: np.ndarray) -> float:
    """Work of the actuator along a logged extension path, ``integral F de`` (J)."""
    extension = np.asarray(extension, dtype=float)
    if extension.size < 2:
        return 0.0
    return float(trapezoid(np.asarray(force, dtype=float), extension))


def tank_energy_delta(p_prev: float, p_now: float, volume: float) -> float:
    """Energy added to the tank, ``V * (P_now - P_prev)`` (J)."""
    return volume * (p_now - p_prev)


def tank_stored_energy(pressure: float, volume: float, atmospheric: float, log_form: bool = False) -> float:
    """
    Energy stored in the tank above atmospheric.

    :param float pressure: Absolute tank pressure (Pa).
    :param float volume: Tank volume (m^3).
    :param float atmospheric: Atmospheric pressure (Pa).
    :param bool log_form: Use the isothermal expansion work
        ``V*P*ln(P/P0) - V*(P - P0)`` instead of ``V*(P - P0)``.
    :return float: Stored energy (J).
    """
    if pressure < atmospheric:
        raise DomainError(f"pressure {pressure} Pa lies below atmospheric {atmospheric} Pa")
    if log_form:
        return volume * pressure * math.log(pressure / atmospheric) - volume * (pressure - atmospheric)
    return volume * (pressure - atmospheric)


def liftoff_kinetic_energy(trace: SimTrace) -> list[float]:
    """Kinetic energy at each liftoff of a trace (J)."""
    return [event.data["kinetic_energy"] for event in trace.events_of(EventKind.LIFTOFF)]


def amplification_factor(enhanced_apex: float, regular_apex: float) -> float:
    """Ratio of the enhanced apex to the regular (motor-only) apex."""
    if regular_apex <= 0.0:
        raise DomainError(f"regular apex must be positive, got {regular_apex}")
    return enhanced_apex / regular_apex


def actuator_efficiency(row: EnergyRow, previous_tank_energy: float) -> float:
    """
    Share of the tank energy released on a cycle that the actuator turned into work.

    :param EnergyRow row: A release cycle.
    :param float previous_tank_energy: Stored energy at the start of the cycle (J).
    :return float: ``W_pa / (E_before - E_after)``; 0 when nothing was released.
    """
    released = previous_tank_energy - row.tank_energy
    if released <= 0.0:
        return 0.0
    return row.actuator_work / released


def ledger(trace: SimTrace, tank_volume: float, atmospheric: float) -> EnergyLedger:
    """
    Per-cycle energy rows of a simulated run.

    :param SimTrace trace: The run.
    :param float tank_volume: Tank volume (m^3).
    :param float atmospheric: Atmospheric pressure (Pa).
    :return EnergyLedger: One row per completed cycle; ``incomplete`` when events follow
        the last completed cycle.
    """
    rows = []
    for cycle in trace.cycles:
        work = cycle.work
        rows.append(
            EnergyRow(
                cycle=cycle.cycle,
                apex_height=cycle.apex_height,
                released=cycle.released,
                motor_work=work.motor,
                pump_work=work.pump,
                actuator_work=work.extension if cycle.released else 0.0,
                tank_delta=tank_energy_delta(cycle.tank_pressure_start, cycle.tank_pressure_end, tank_volume),
                tank_energy=tank_stored_energy(cycle.tank_pressure_end, tank_volume, atmospheric),
                liftoff_kinetic_energy=cycle.liftoff_kinetic_energy,
                impact_loss=work.impact_loss,
                energy_residual=cycle.energy_residual,
                energy_throughput=cycle.energy_throughput,
            )
        )
    if trace.cycles:
        initial_pressure = trace.cycles[0].tank_pressure_start
        last_end = trace.cycles[-1].end_time
    elif trace.samples:
        initial_pressure = trace.samples[0].tank_pressure
        last_end = trace.samples[0].t
    else:
        initial_pressure, last_end = atmospheric, 0.0
    trailing = [event for event in trace.events if event.time > last_end]
    incomplete = bool(trailing) and trace.termination != "completed"
    if incomplete:
        logger.warning(
            f"Trace ended ({trace.termination}) inside a cycle after {len(rows)} complete cycles; "
            f"{len(trailing)} trailing events are not in the ledger"
        )
    return EnergyLedger(
        rows=rows,
        initial_tank_energy=tank_stored_energy(initial_pressure, tank_volume, atmospheric),
        incomplete=incomplete,
    )


def energy_audit(trace: SimTrace, tolerance: float = 0.01) -> EnergyAudit:
    """Relative energy balance residual of every completed cycle."""
    residuals = [
        abs(cycle.energy_residual) / cycle.energy_throughput if cycle.energy_throughput > 0.0 else 0.0
        for cycle in trace.cycles
    ]
    audit = EnergyAudit(relative_residuals=residuals, tolerance=tolerance)
    if not audit.passed:
        logger.warning(f"Energy balance residual {audit.worst:.2%} exceeds {tolerance:.0%}")
    return audit
