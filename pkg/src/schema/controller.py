"""
Controller gains, release plan and motor electrical parameters.
"""

from typing import Optional

from pydantic import Field, field_validator

from ._base import FloatArray, ValueModel
from .enums import AerialMapping


class ControllerConfig(ValueModel):
    """
    Gains and settings of the hopping controller.

    Gains are stored positive and every feedback law is written with an explicit
    negative sign on the error ``measured - desired``. A positive leg angle places the
    foot ahead (+x) of the hip, so positive foot placement gains decelerate drift.

    :param float foot_kp: Foot placement gain on the velocity error (rad s/m).
    :param float foot_kd: Foot placement gain on the apex-to-apex velocity change (rad s/m).
    :param float leg_angle_limit: Clamp on the commanded leg angle (rad).
    :param list[float] task_kp: Diagonal task-space stiffness for ``[q_leg, L]``.
    :param list[float] task_kd: Diagonal task-space damping for ``[q_leg, L]``.
    :param float desired_velocity: Desired forward hopping velocity v_d (m/s).
    :param Optional[float] desired_leg_length: Aerial leg length, full extension when absent (m).
    :param float bezier_gain: Peak horizontal stance force per unit v_d (N s/m).
    :param AerialMapping aerial_mapping: Task-space to joint torque mapping in flight.
    :param float singular_threshold: ``|det J_y|`` below which the damped inverse is used.
    :param float damping: Damping of the damped inverse.
    :param list[int] release_cycles: Cycles (counted by touchdowns) that release the tank.
    :param Optional[float] release_pressure: Release on the first touchdown whose tank
        pressure reaches this absolute value (Pa).
    :param int release_count: Consecutive releases once ``release_pressure`` is reached.
    :param Optional[float] valve_lead: Valve trigger lead before the ascent (s); the
        transient rise time when absent.
    :param bool compensate: Apply feedforward pump compensation at each touchdown.
    """

    foot_kp: float = Field(0.1, ge=0)
    foot_kd: float = Field(0.05, ge=0)
    leg_angle_limit: float = Field(0.35, gt=0)
    task_kp: list[float] = Field(default_factory=lambda: [20.0, 2000.0])
    task_kd: list[float] = Field(default_factory=lambda: [1.0, 40.0])
    desired_velocity: float = 0.0
    desired_leg_length: Optional[float] = Field(None, gt=0)
    bezier_gain: float = Field(10.0, ge=0)
    aerial_mapping: AerialMapping = AerialMapping.TRANSPOSE
    singular_threshold: float = Field(1e-4, gt=0)
    damping: float = Field(1e-3, gt=0)
    release_cycles: list[int] = Field(default_factory=list)
    release_pressure: Optional[float] = Field(None, gt=0)
    release_count: int = Field(1, ge=1)
    valve_lead: Optional[float] = Field(None, ge=0)
    compensate: bool = True

    @field_validator("task_kp", "task_kd")
    @classmethod
    def _check_gains(cls, value: list[float]) -> list[float]:
        if len(value) != 2 or any(gain < 0 for gain in value):
            raise ValueError("task-space gains need two non-negative diagonal entries")
        return value


class MotorParams(ValueModel):
    """
    Electrical parameters of one geared motor.

    Resistance, torque constant and gear ratio are estimates, the back-EMF constant is
    neglected by default.

    :param float resistance: Coil resistance R (ohm).
    :param float torque_constant: Torque constant k_T (N m/A).
    :param float gear_ratio: Gear ratio N.
    :param float back_emf: Electrical constant k_e (V s/rad).
    :param float supply_voltage: Rail voltage; commands are clamped to +/- this value (V).
    """

    resistance: float = Field(1.0, gt=0)
    torque_constant: float = Field(0.01, gt=0)
    gear_ratio: float = Field(19.2, gt=0)
    back_emf: float = Field(0.0, ge=0)
    supply_voltage: float = Field(24.0, gt=0)


class ControlCommand(ValueModel):
    """
    Output of a controller for one step.

    :param FloatArray tau: Motor-side torques ``[hip, per-knee-motor]`` (N m).
    :param FloatArray voltage: Motor voltages ``[hip, knee]`` (V).
    :param bool valve: Requested solenoid state.
    :param bool damped: The damped inverse was used.
    """

    tau: FloatArray
    voltage: FloatArray
    valve: bool = False
    damped: bool = False
