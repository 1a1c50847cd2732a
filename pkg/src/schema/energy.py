"""
Energy ledger types.
"""

from pydantic import Field, computed_field

from ._base import ValueModel


class EnergyRow(ValueModel):
    """
    Energy flows of one apex-to-apex cycle.

    :param int cycle: Cycle index.
    :param float apex_height: Apex clearance reached at the end of the cycle (m).
    :param bool released: Whether the valve opened.
    :param float motor_work: Work of the motors on the robot (J).
    :param float pump_work: Work of the pneumatics on the leg while compressing, <= 0 (J).
    :param float actuator_work: Work of the actuator on release cycles, 0 otherwise (J).
    :param float tank_delta: ``V * (P_end - P_start)`` (J).
    :param float tank_energy: ``V * (P_end - P0)`` at the end of the cycle (J).
    :param float liftoff_kinetic_energy: Kinetic energy at liftoff (J).
    :param float impact_loss: Kinetic energy dissipated at touchdown (J).
    :param float energy_residual: Mechanical energy change minus all work (J).
    :param float energy_throughput: Sum of absolute flows (J).
    """

    cycle: int
    apex_height: float
    released: bool
    motor_work: float
    pump_work: float
    actuator_work: float
    tank_delta: float
    tank_energy: float
    liftoff_kinetic_energy: float
    impact_loss: float
    energy_residual: float
    energy_throughput: float

    @computed_field
    @property
    def relative_residual(self) -> float:
        if self.energy_throughput <= 0.0:
            return 0.0
        return abs(self.energy_residual) / self.energy_throughput


class EnergyLedger(ValueModel):
    """
    Per-cycle energy rows of a run and their totals.

    :param list[EnergyRow] rows: One row per completed cycle.
    :param float initial_tank_energy: Stored energy before the first cycle (J).
    :param bool incomplete: True when the trace ended inside a cycle.
    """

    rows: list[EnergyRow] = Field(default_factory=list)
    initial_tank_energy: float = 0.0
    incomplete: bool = False

    @computed_field
    @property
    def total_pump_work(self) -> float:
        return sum(row.pump_work for row in self.rows)

    @computed_field
    @property
    def total_actuator_work(self) -> float:
        return sum(row.actuator_work for row in self.rows)

    @computed_field
    @property
    def total_tank_delta(self) -> float:
        return sum(row.tank_delta for row in self.rows)

    @computed_field
    @property
    def total_motor_work(self) -> float:
        return sum(row.motor_work for row in self.rows)

    @property
    def final_tank_energy(self) -> float:
        return self.rows[-1].tank_energy if self.rows else self.initial_tank_energy


class EnergyAudit(ValueModel):
    """
    Per-cycle balance check.

    :param list[float] relative_residuals: ``|residual| / throughput`` per cycle.
    :param float tolerance: Accepted relative residual.
    """

    relative_residuals: list[float]
    tolerance: float = 0.01

    @computed_field
    @property
    def worst(self) -> float:
        return max(self.relative_residuals, default=0.0)

    @computed_field
    @property
    def passed(self) -> bool:
        return self.worst <= self.tolerance
