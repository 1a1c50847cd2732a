"""
Configuration, world state and trace types of the hybrid simulator.
"""

from typing import Optional

from pydantic import Field, computed_field, model_validator

from ._base import FloatArray, ValueModel
from .enums import ContactMode, EventKind, LiftoffReason
from .pneumatic import TankState, TransientState
from .robot import RobotState


class SimConfig(ValueModel):
    """
    Integration and event settings of a simulation run.

    :param float dt: Fixed RK4 step (s).
    :param float event_time_tolerance: Bisection stops once the bracket is this short (s).
    :param float event_value_tolerance: Bisection also stops once the event function is
        this close to zero (m, N or m/s depending on the event).
    :param int max_cycles: Upper bound on the cycles a run may request.
    :param float max_cycle_time: A cycle that lasts longer ends the run as settled (s).
    :param float ground_height: Initial ground height (m).
    :param float ground_step_height: Height added to the ground by the platform step (m).
    :param Optional[int] ground_step_cycle: Cycle at whose starting apex the step appears.
    :param float fall_height: Hip height above ground below which the robot has fallen (m).
    :param float contact_noise: Probability per step that the contact indicator is flipped.
    :param int record_every: Record one trace sample every this many steps.
    :param int seed: Seed of the contact noise generator.
    """

    dt: float = Field(1e-4, gt=0)
    event_time_tolerance: float = Field(1e-10, gt=0)
    event_value_tolerance: float = Field(1e-12, gt=0)
    max_cycles: int = Field(200, ge=1)
    max_cycle_time: float = Field(3.0, gt=0)
    ground_height: float = 0.0
    ground_step_height: float = 0.0
    ground_step_cycle: Optional[int] = Field(None, ge=0)
    fall_height: float = Field(0.12, gt=0)
    contact_noise: float = Field(0.0, ge=0, le=1)
    record_every: int = Field(10, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def _check_tolerances(self) -> "SimConfig":
        if self.event_time_tolerance >= self.dt:
            raise ValueError("event_time_tolerance must be smaller than dt")
        return self


class SimEvent(ValueModel):
    """
    A discrete event of a run.

    :param EventKind kind: What happened.
    :param float time: When (s).
    :param int cycle: Cycle index at the event.
    :param float z_hip: Hip height above the ground (m).
    :param float tank_pressure: Live tank pressure after the event (Pa).
    :param dict[str, float] data: Event-specific values (impulse, velocities, energies).
    """

    kind: EventKind
    time: float
    cycle: int
    z_hip: float
    tank_pressure: float
    data: dict[str, float] = Field(default_factory=dict)


class WorkState(ValueModel):
    """
    Energy flows integrated alongside the dynamics (J).

    :param float motor: Work done by the motors.
    :param float pump: Work done by the pneumatic force while compressing (negative).
    :param float extension: Work done by the pneumatic force while extending.
    :param float stop: Work done by the knee end stops.
    :param float impact_loss: Kinetic energy lost in touchdown impacts.
    """

    motor: float = 0.0
    pump: float = 0.0
    extension: float = 0.0
    stop: float = 0.0
    impact_loss: float = 0.0


class World(ValueModel):
    """
    Everything the simulator advances.

    :param float time: Simulation time (s).
    :param RobotState robot: Generalized state and contact mode.
    :param TankState tank: Live tank.
    :param Optional[TankState] trigger_tank: Tank frozen at valve trigger while the valve is open.
    :param TransientState transient: Actuator transient state and valve command.
    :param int cycle: Completed apex-to-apex cycles.
    :param float ground_height: Current ground height (m).
    :param WorkState work: Integrated energy flows.
    :param float touchdown_time: Time of the last touchdown (s).
    :param float deepest_compression: Deepest joint compression of the current stance (m).
    :param bool reversed: The current stance already passed its compression turning point.
    :param float open_extension: Largest actuator extension while the valve is open (m).
    :param tuple[SimEvent, ...] events: Events produced by the step that made this world.
    """

    time: float = 0.0
    robot: RobotState
    tank: TankState
    trigger_tank: Optional[TankState] = None
    transient: TransientState = Field(default_factory=TransientState)
    cycle: int = 0
    ground_height: float = 0.0
    work: WorkState = Field(default_factory=WorkState)
    touchdown_time: float = 0.0
    deepest_compression: float = 0.0
    reversed: bool = False
    open_extension: float = 0.0
    events: tuple[SimEvent, ...] = ()

    @property
    def stance(self) -> bool:
        return self.robot.mode is ContactMode.STANCE


class TraceSample(ValueModel):
    """
    One recorded row of a run.

    :param float t: Time (s).
    :param FloatArray q: Generalized coordinates.
    :param FloatArray qdot: Generalized rates.
    :param FloatArray tau: Motor-side torques ``[hip, knee]`` (N m).
    :param FloatArray voltage: Motor voltages ``[hip, knee]`` (V).
    :param float f_pneu: Lumped pneumatic joint force (N).
    :param FloatArray grf: Ground reaction ``[x, z]`` on the foot (N).
    :param float tank_pressure: Live tank pressure (Pa).
    :param float delta: Normalized actuator force.
    :param bool valve_open: Valve state.
    :param ContactMode mode: Contact mode.
    :param bool damped: The aerial controller used the damped inverse.
    """

    t: float
    q: FloatArray
    qdot: FloatArray
    tau: FloatArray
    voltage: FloatArray
    f_pneu: float
    grf: FloatArray
    tank_pressure: float
    delta: float
    valve_open: bool
    mode: ContactMode
    damped: bool = False


class CycleSummary(ValueModel):
    """
    Apex-to-apex summary of one hopping cycle.

    :param int cycle: Cycle index.
    :param float start_time: Time of the starting apex (s).
    :param float end_time: Time of the ending apex (s).
    :param float apex_height: Hip clearance above the fully extended leg at the ending apex (m).
    :param float liftoff_velocity: Vertical hip velocity at liftoff (m/s).
    :param float liftoff_kinetic_energy: Kinetic energy at liftoff (J).
    :param float tank_pressure_start: Tank pressure at the starting apex (Pa).
    :param float tank_pressure_touchdown: Tank pressure read at touchdown (Pa).
    :param float tank_pressure_end: Tank pressure at the ending apex (Pa).
    :param float deepest_compression: Deepest joint compression of the stance (m).
    :param bool released: The valve opened during the cycle.
    :param WorkState work: Energy flows over the cycle.
    :param float mechanical_energy_change: Change of kinetic plus potential energy (J).
    """

    cycle: int
    start_time: float
    end_time: float
    apex_height: float
    liftoff_velocity: float
    liftoff_kinetic_energy: float
    tank_pressure_start: float
    tank_pressure_touchdown: float
    tank_pressure_end: float
    deepest_compression: float
    released: bool
    work: WorkState
    mechanical_energy_change: float

    @computed_field
    @property
    def energy_residual(self) -> float:
        """Mechanical energy change minus the integrated work and impact loss (J)."""
        w = self.work
        supplied = w.motor + w.pump + w.extension + w.stop - w.impact_loss
        return self.mechanical_energy_change - supplied

    @computed_field
    @property
    def energy_throughput(self) -> float:
        """Sum of absolute energy flows through the cycle (J)."""
        w = self.work
        return abs(w.motor) + abs(w.pump) + abs(w.extension) + abs(w.stop) + abs(w.impact_loss)


class SimTrace(ValueModel):
    """
    Recorded run.

    :param list[TraceSample] samples: Time series, strictly increasing in time.
    :param list[SimEvent] events: Events in order.
    :param list[CycleSummary] cycles: Completed cycles.
    :param str termination: Why the run ended: ``completed``, ``settled``, ``fall`` or ``diverged``.
    """

    samples: list[TraceSample] = Field(default_factory=list)
    events: list[SimEvent] = Field(default_factory=list)
    cycles: list[CycleSummary] = Field(default_factory=list)
    termination: str = "completed"

    def events_of(self, kind: EventKind) -> list[SimEvent]:
        return [event for event in self.events if event.kind is kind]


class PointMassCycle(ValueModel):
    """
    One touchdown-to-liftoff cycle of the point-mass model.

    :param float apex_start: Hip apex height the cycle fell from (m).
    :param float apex_height: Predicted next apex hip height (m).
    :param float liftoff_velocity: Leg rate at liftoff (m/s).
    :param float descent_duration: Touchdown to velocity reversal (s).
    :param float stance_duration: Touchdown to liftoff (s).
    :param float tank_pressure_touchdown: Absolute tank pressure at touchdown (Pa).
    :param TankState tank: Tank after the pump stroke and any release.
    :param float deepest_compression: Deepest prismatic joint compression (m).
    :param bool released: Whether the valve opened during the stance.
    :param Optional[LiftoffReason] liftoff_reason: Which condition ended the stance.
    :param float motor_work: Work of the motor leg force (J).
    :param float pump_work: Work of the pneumatics while compressing, <= 0 (J).
    :param float extension_work: Work of the pneumatics while extending (J).
    """

    apex_start: float
    apex_height: float
    liftoff_velocity: float
    descent_duration: float
    stance_duration: float
    tank_pressure_touchdown: float
    tank: TankState
    deepest_compression: float
    released: bool = False
    liftoff_reason: Optional[LiftoffReason] = None
    motor_work: float = 0.0
    pump_work: float = 0.0
    extension_work: float = 0.0
