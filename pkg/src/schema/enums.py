from enum import Enum


class ContactMode(str, Enum):
    """
    The contact mode of the robot.

    :cvar AERIAL: Foot off the ground, no contact constraint rows.
    :cvar STANCE: Foot pinned to the ground.
    """

    AERIAL = "aerial"
    STANCE = "stance"


class EventKind(str, Enum):
    """
    The discrete events located by the hybrid simulator.

    :cvar TOUCHDOWN: Foot height crosses the ground downward.
    :cvar LIFTOFF: Vertical ground reaction force crosses zero downward.
    :cvar APEX: Vertical hip velocity crosses zero downward while aerial.
    :cvar VALVE_TRIGGER: The solenoid valve opened.
    :cvar VALVE_CLOSE: The solenoid valve closed and the actuator vented.
    :cvar TANK_UPDATE: The pump stroke reached its turning point and the tank was updated.
    :cvar FALL: The hip dropped below the fall threshold.
    """

    TOUCHDOWN = "touchdown"
    LIFTOFF = "liftoff"
    APEX = "apex"
    VALVE_TRIGGER = "valve_trigger"
    VALVE_CLOSE = "valve_close"
    TANK_UPDATE = "tank_update"
    FALL = "fall"


class LiftoffReason(str, Enum):
    """
    Why a point-mass stance ended.

    :cvar GROUND_FORCE: The ground reaction force reached zero.
    :cvar FULL_EXTENSION: The leg reached full extension.
    :cvar SCHEDULE_END: The ascent force schedule ran out.
    """

    GROUND_FORCE = "ground_force"
    FULL_EXTENSION = "full_extension"
    SCHEDULE_END = "schedule_end"


class SampleKind(str, Enum):
    """
    The kinds of system identification data.

    :cvar PUMP: Pump force against compression distance.
    :cvar ACTUATOR: Actuator force against extension.
    :cvar TRANSIENT: Normalized actuator force step response.
    """

    PUMP = "pump"
    ACTUATOR = "actuator"
    TRANSIENT = "transient"


class PneumaticMode(str, Enum):
    """
    Which pneumatic elements act on the leg during a trajectory optimization.

    :cvar NONE: Pneumatics disconnected (tank vented), motor only.
    :cvar PUMP_ONLY: Pump resists compression, the actuator stays vented.
    :cvar PUMP_ACTUATOR: Pump in descent, actuator released in ascent.
    """

    NONE = "none"
    PUMP_ONLY = "pump_only"
    PUMP_ACTUATOR = "pump_actuator"


class HopObjective(str, Enum):
    """
    The trajectory optimization objective.

    :cvar PERIODIC: Minimize control effort subject to returning to the apex.
    :cvar EXPLOSIVE: Maximize apex height with a small effort penalty.
    """

    PERIODIC = "periodic"
    EXPLOSIVE = "explosive"


class TaskKind(str, Enum):
    """
    The experiments a scenario can run.

    :cvar PERIODIC_CHARGE: Periodic hopping that charges the tank.
    :cvar ENHANCED_HOP: Charge, then release once during an ascent.
    :cvar CONSECUTIVE_ENHANCED: Charge, then release on several consecutive ascents.
    :cvar PLATFORM_JUMP: Enhanced hop onto a raised ground step.
    :cvar MOTOR_ONLY_MAX: Maximum-height hop with the pneumatics disconnected.
    """

    PERIODIC_CHARGE = "periodic-charge"
    ENHANCED_HOP = "enhanced-hop"
    CONSECUTIVE_ENHANCED = "consecutive-enhanced"
    PLATFORM_JUMP = "platform-jump"
    MOTOR_ONLY_MAX = "motor-only-max"


class AerialMapping(str, Enum):
    """
    How the aerial task-space PD wrench is mapped to joint torques.

    :cvar TRANSPOSE: tau = -J_y^T (K_p e + K_d e_dot).
    :cvar INVERSE: tau = -J_y^-1 (K_p e + K_d e_dot), damped near singularities.
    """

    TRANSPOSE = "transpose"
    INVERSE = "inverse"


class SolverBackendKind(str, Enum):
    """
    The nonlinear program solver used for trajectory optimization.

    :cvar SLSQP: Sequential least squares programming.
    :cvar AUGMENTED_LAGRANGIAN: Augmented Lagrangian outer loop with an L-BFGS-B inner loop.
    """

    SLSQP = "slsqp"
    AUGMENTED_LAGRANGIAN = "augmented_lagrangian"
