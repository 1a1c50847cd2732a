"""
The robot schema holds the planar linkage parameters, the generalized state and the
dynamics terms of the hopper.

Generalized coordinates are ``q = [x_hip, z_hip, q_hip, q_knee]``. The thigh angle
``q_hip`` is measured from the downward vertical, the knee angle ``q_knee`` is the shank
angle relative to the thigh (0 is a straight leg, positive bends it). The body does not
pitch: the boom holds it upright.
"""

import math

from pydantic import Field, computed_field, field_validator, model_validator

from ._base import FloatArray, ValueModel
from .enums import ContactMode


class RobotModel(ValueModel):
    """
    Planar linkage, mass distribution, transmission and limits of the hopper.

    Link masses, inertias, COM offsets and attachment points are estimates; the scenario
    factory reads them from the ``estimated`` section.

    :param float shank_length: Shank length l_s (m).
    :param float thigh_length: Thigh length l_t (m).
    :param float projected_mass: Effective translational mass m~ including the boom (kg).
    :param float thigh_mass: Thigh mass (kg).
    :param float shank_mass: Shank mass including the pneumatic cylinders (kg).
    :param float thigh_inertia: Thigh inertia about its COM (kg m^2).
    :param float shank_inertia: Shank inertia about its COM (kg m^2).
    :param float thigh_com: Hip-to-thigh-COM distance (m).
    :param float shank_com: Knee-to-shank-COM distance (m).
    :param float belt_ratio: Knee belt reduction.
    :param int knee_motor_count: Motors driving the knee.
    :param float gravity: Gravitational acceleration (m/s^2).
    :param float motor_torque_limit: Per-motor stall torque (N m).
    :param float motor_speed_limit_rpm: Motor no-load speed (rpm).
    :param float knee_min: Knee angle at full leg extension (rad).
    :param float knee_max: Knee angle at full compression (rad).
    :param list[float] thigh_attach: Pneumatic mount on the thigh, (along, across) from the hip (m).
    :param list[float] shank_attach: Pneumatic mount on the shank, (along, across) from the knee (m).
    :param float knee_stop_stiffness: End-stop stiffness (N m/rad).
    :param float knee_stop_damping: End-stop damping (N m s/rad).
    """

    shank_length: float = Field(0.100, gt=0)
    thigh_length: float = Field(0.150, gt=0)
    projected_mass: float = Field(2.2, gt=0)
    thigh_mass: float = Field(0.25, gt=0)
    shank_mass: float = Field(0.15, gt=0)
    thigh_inertia: float = Field(4.7e-4, gt=0)
    shank_inertia: float = Field(1.25e-4, gt=0)
    thigh_com: float = Field(0.075, ge=0)
    shank_com: float = Field(0.05, ge=0)
    belt_ratio: float = Field(1.5, gt=0)
    knee_motor_count: int = Field(2, ge=1)
    gravity: float = Field(9.81, gt=0)
    motor_torque_limit: float = Field(3.728, gt=0)
    motor_speed_limit_rpm: float = Field(223.0, gt=0)
    knee_min: float = Field(0.35, gt=0)
    knee_max: float = Field(1.6, lt=math.pi)
    thigh_attach: list[float] = Field(default_factory=lambda: [0.03, 0.0])
    shank_attach: list[float] = Field(default_factory=lambda: [0.09, 0.0])
    knee_stop_stiffness: float = Field(50.0, ge=0)
    knee_stop_damping: float = Field(0.5, ge=0)

    @field_validator("thigh_attach", "shank_attach")
    @classmethod
    def _check_attach(cls, value: list[float]) -> list[float]:
        if len(value) != 2:
            raise ValueError("attachment points need exactly two coordinates")
        return value

    @model_validator(mode="after")
    def _check_masses(self) -> "RobotModel":
        if self.body_mass <= 0.0:
            raise ValueError(
                f"projected_mass {self.projected_mass} kg must exceed the leg mass "
                f"{self.thigh_mass + self.shank_mass} kg"
            )
        if not self.knee_min < self.knee_max:
            raise ValueError("knee_min must be smaller than knee_max")
        return self

    @computed_field
    @property
    def body_mass(self) -> float:
        """Mass lumped at the hip (kg)."""
        return self.projected_mass - self.thigh_mass - self.shank_mass

    @property
    def motor_speed_limit(self) -> float:
        """Motor no-load speed (rad/s)."""
        return self.motor_speed_limit_rpm * 2.0 * math.pi / 60.0

    @property
    def knee_transmission(self) -> float:
        """Knee joint torque per unit motor torque."""
        return self.knee_motor_count * self.belt_ratio

    @property
    def knee_torque_limit(self) -> float:
        """Stall torque available at the knee joint (N m)."""
        return self.knee_transmission * self.motor_torque_limit


class RobotState(ValueModel):
    """
    Generalized coordinates, rates and contact mode.

    :param FloatArray q: ``[x_hip, z_hip, q_hip, q_knee]``.
    :param FloatArray qdot: Matching rates.
    :param ContactMode mode: Aerial or stance.
    """

    q: FloatArray
    qdot: FloatArray
    mode: ContactMode = ContactMode.AERIAL

    @field_validator("q", "qdot")
    @classmethod
    def _check_shape(cls, value):
        if value.shape != (4,):
            raise ValueError(f"expected 4 generalized coordinates, got shape {value.shape}")
        return value


class LegKinematics(ValueModel):
    """
    Leg outputs and their gradients with respect to ``q``.

    :param float L: Hip-to-foot distance (m).
    :param float q_leg: Hip-to-foot line angle from the downward vertical (rad).
    :param float d: Distance between the pneumatic mounts (m).
    :param FloatArray dL_dq: Gradient of L.
    :param FloatArray dqleg_dq: Gradient of q_leg.
    :param FloatArray dd_dq: Gradient of d.
    :param bool singular: True near full extension, where dL/dq_knee vanishes.
    """

    L: float
    q_leg: float
    d: float
    dL_dq: FloatArray
    dqleg_dq: FloatArray
    dd_dq: FloatArray
    singular: bool = False


class DynamicsTerms(ValueModel):
    """
    Terms of ``M*qddot + C*qdot + G = B_m*tau + B_p*F + J_h^T*F_h``.

    ``C`` is the matrix ``sum m J^T Jdot`` for which ``M_dot - 2C`` is skew-symmetric;
    ``bias`` is ``C @ qdot``. ``J_h`` has zero rows while aerial.
    """

    M: FloatArray
    M_dot: FloatArray
    C: FloatArray
    bias: FloatArray
    G: FloatArray
    B_m: FloatArray
    B_p: FloatArray
    J_h: FloatArray
    J_h_dot_qdot: FloatArray
