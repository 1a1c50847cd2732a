"""
The pneumatic schema describes the pump, tank, actuator and valve of the leg.

Pressures are absolute (Pa) everywhere in this package. Gauge values only appear
at the configuration boundary, where the scenario factory converts them.
"""

import math
from typing import Any, Optional, Sequence

from pydantic import Field, computed_field, model_validator

from ._base import ValueModel


ATMOSPHERIC_PA = 101325.0
"""Standard atmospheric pressure."""

DEFAULT_TANK_VOLUME_M3 = 1.939e-4
"""Tank volume, 2.3 times the actuator swept volume."""


def circle_area(diameter: float) -> float:
    return math.pi * (0.5 * diameter) ** 2


class PumpGeometry(ValueModel):
    """
    Geometry of the two-stage pump.

    Compression distance ``x`` is measured from full extension, remaining length is
    ``stroke - x``. The working area is ``stage1_area`` below ``stage1_end`` and
    ``stage2_area`` beyond ``stage2_start``; across the transition it ramps linearly so
    the chamber volume and theoretical force stay continuous.

    :param float stage1_area: Stage 1 working area (m^2), 14 mm bore.
    :param float stage2_area: Stage 2 working area (m^2), 17 mm bore.
    :param float stroke: Pump stroke (m).
    :param float stage1_end: Compression distance where Stage 1 ends (m).
    :param float stage2_start: Compression distance where Stage 2 begins (m).
    :param float initial_volume: Chamber volume at full extension (m^3).
    """

    stage1_area: float = Field(circle_area(0.014), gt=0, description="Stage 1 area (m^2)")
    stage2_area: float = Field(circle_area(0.017), gt=0, description="Stage 2 area (m^2)")
    stroke: float = Field(0.130, gt=0, description="Pump stroke (m)")
    stage1_end: float = Field(0.05, gt=0, description="Compression where Stage 1 ends (m)")
    stage2_start: float = Field(0.06, gt=0, description="Compression where Stage 2 begins (m)")
    initial_volume: float = Field(
        None, gt=0, description="Chamber volume at full extension (m^3), defaults to the swept volume"
    )

    @model_validator(mode="before")
    @classmethod
    def _default_initial_volume(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("initial_volume") is None:
            data = dict(data)
            defaults = cls.model_fields
            a1 = data.get("stage1_area", defaults["stage1_area"].default)
            a2 = data.get("stage2_area", defaults["stage2_area"].default)
            l1 = data.get("stage1_end", defaults["stage1_end"].default)
            l2 = data.get("stage2_start", defaults["stage2_start"].default)
            stroke = data.get("stroke", defaults["stroke"].default)
            data["initial_volume"] = a1 * l1 + 0.5 * (a1 + a2) * (l2 - l1) + a2 * (stroke - l2)
        return data

    @model_validator(mode="after")
    def _check_breakpoints(self) -> "PumpGeometry":
        if not 0 < self.stage1_end <= self.stage2_start < self.stroke:
            raise ValueError(
                "pump breakpoints must satisfy 0 < stage1_end <= stage2_start < stroke, got "
                f"{self.stage1_end}, {self.stage2_start}, {self.stroke}"
            )
        if self.initial_volume < self.swept_volume * (1.0 - 1e-12):
            raise ValueError("initial_volume is smaller than the swept volume of the stroke")
        return self

    @property
    def swept_volume(self) -> float:
        """Volume displaced by a full stroke."""
        a1, a2 = self.stage1_area, self.stage2_area
        l1, l2 = self.stage1_end, self.stage2_start
        return a1 * l1 + 0.5 * (a1 + a2) * (l2 - l1) + a2 * (self.stroke - l2)

    @classmethod
    def single_stage(cls, area: float, stroke: float = 0.130) -> "PumpGeometry":
        """
        Build a single-area pump, for which the theoretical model reduces to P0*V0/d.

        :param float area: The piston area (m^2).
        :param float stroke: The stroke (m).
        :return PumpGeometry: Geometry with equal stage areas and V0 = area * stroke.
        """
        return cls(
            stage1_area=area,
            stage2_area=area,
            stroke=stroke,
            stage1_end=0.5 * stroke,
            stage2_start=0.5 * stroke,
        )


class TankState(ValueModel):
    """
    Pressure state of the storage tank.

    :param float pressure: Absolute tank pressure (Pa).
    :param float volume: Tank volume (m^3).
    :param float atmospheric: Absolute atmospheric pressure (Pa).
    """

    pressure: float = Field(ATMOSPHERIC_PA, description="Absolute tank pressure (Pa)")
    volume: float = Field(DEFAULT_TANK_VOLUME_M3, gt=0, description="Tank volume (m^3)")
    atmospheric: float = Field(ATMOSPHERIC_PA, gt=0, description="Atmospheric pressure (Pa)")

    @model_validator(mode="after")
    def _check_pressure(self) -> "TankState":
        if self.pressure < self.atmospheric * (1.0 - 1e-12):
            raise ValueError(
                f"tank pressure {self.pressure} Pa is below atmospheric {self.atmospheric} Pa"
            )
        return self

    @computed_field
    @property
    def gauge_pressure(self) -> float:
        """Tank pressure above atmospheric (Pa)."""
        return self.pressure - self.atmospheric


class PumpFitCoefficients(ValueModel):
    """
    Coefficients of the data-driven piecewise pump model.

    Closed valve, by compression x: ``m1*x + b1`` in Stage 1, ``m2*x + b2`` across the
    transition and ``c1*x^2 + c2*x + c3`` in Stage 2. Once the check valve opens at
    compression ``x_C`` the force is the closed-valve force at ``x_C`` times
    ``c4*x^2 + c5*x + c6``. The multiplier is fitted freely, so the force may jump at
    ``x_C`` by ``|c4*x_C^2 + c5*x_C + c6 - 1|``; the fit report lists that jump.
    """

    m1: float
    b1: float
    m2: float
    b2: float
    c1: float
    c2: float
    c3: float
    c4: float = 0.0
    c5: float = 0.0
    c6: float = 1.0

    def as_vector(self) -> list[float]:
        return [self.m1, self.b1, self.m2, self.b2, self.c1, self.c2, self.c3, self.c4, self.c5, self.c6]

    def open_multiplier(self, x: float) -> float:
        """Open-valve force multiplier at compression ``x``."""
        return self.c4 * x * x + self.c5 * x + self.c6

    def continuity_residuals(
        self, geom: PumpGeometry, openings: Sequence[float] = ()
    ) -> dict[str, float]:
        """
        Relative force jumps at the segment boundaries.

        :param PumpGeometry geom: The geometry holding the breakpoints.
        :param Sequence[float] openings: Valve opening compressions to check the open-valve
            multiplier at (m); the jump there is 0 when none are given.
        :return dict[str, float]: Jump at l1, at l2 and the largest jump at a valve opening point.
        """
        l1, l2 = geom.stage1_end, geom.stage2_start
        left_1, right_1 = self.m1 * l1 + self.b1, self.m2 * l1 + self.b2
        left_2 = self.m2 * l2 + self.b2
        right_2 = self.c1 * l2**2 + self.c2 * l2 + self.c3

        def relative(a: float, b: float) -> float:
            return abs(a - b) / max(abs(a), abs(b), 1e-12)

        return {
            "stage1_end": relative(left_1, right_1),
            "stage2_start": relative(left_2, right_2),
            "valve_opening": max((abs(self.open_multiplier(x) - 1.0) for x in openings), default=0.0),
        }


class ActuatorModel(ValueModel):
    """
    The pneumatic actuator: quasi-static bore area and stroke plus the transient ODE
    ``k1*delta'' + k2*delta' + k3*delta = s_v``.

    ``k1 = 0`` gives a first-order lag and ``k1 = k2 = 0`` an instantaneous response.

    :param float bore_area: Actuator bore area (m^2), 32.5 mm bore.
    :param float stroke: Actuator stroke (m).
    :param float k1: Inertia-like coefficient (s^2).
    :param float k2: Damping-like coefficient (s).
    :param float k3: Stiffness-like coefficient, normalized to 1.
    """

    bore_area: float = Field(circle_area(0.0325), gt=0, description="Bore area (m^2)")
    stroke: float = Field(0.1016, gt=0, description="Actuator stroke (m)")
    k1: float = Field(2.5e-4, ge=0, description="Transient coefficient k1 (s^2)")
    k2: float = Field(2.0e-2, ge=0, description="Transient coefficient k2 (s)")
    k3: float = Field(1.0, gt=0, description="Transient coefficient k3")

    @model_validator(mode="after")
    def _check_stability(self) -> "ActuatorModel":
        if self.k1 > 0 and self.k2 <= 0:
            raise ValueError(
                f"transient coefficients k1={self.k1}, k2={self.k2} are not asymptotically stable"
            )
        return self


class TransientState(ValueModel):
    """
    State of the normalized actuator force.

    :param float delta: Normalized force.
    :param float delta_dot: Rate of the normalized force (1/s).
    :param bool valve_open: Solenoid valve command.
    :param float time_since_trigger: Time since the valve opened (s).
    """

    delta: float = 0.0
    delta_dot: float = 0.0
    valve_open: bool = False
    time_since_trigger: float = 0.0


class PneumaticConfig(ValueModel):
    """
    Everything needed to evaluate the lumped pneumatic joint force.

    The prismatic joint compression ``x_j`` (zero at full leg extension) maps to pump
    compression ``pump_preload + x_j`` and to actuator extension
    ``actuator.stroke - actuator_preload - x_j``.

    :param PumpGeometry pump: Pump geometry.
    :param ActuatorModel actuator: Actuator model.
    :param float tank_volume: Tank volume (m^3).
    :param float atmospheric: Atmospheric pressure (Pa).
    :param float initial_pressure: Tank pressure at the start of a run (Pa absolute).
    :param Optional[PumpFitCoefficients] fit: Fitted pump model, theoretical model when absent.
    :param float extension_friction: Coulomb friction while the pump extends (N).
    :param float valve_min_pressure: Gauge pressure below which the valve cannot actuate (Pa).
    :param float pump_preload: Pump compression at full leg extension (m).
    :param float actuator_preload: Actuator retraction at full leg extension (m).
    :param bool connected: False when the tank is vented and the pneumatics are disconnected.
    """

    pump: PumpGeometry = Field(default_factory=PumpGeometry)
    actuator: ActuatorModel = Field(default_factory=ActuatorModel)
    tank_volume: float = Field(DEFAULT_TANK_VOLUME_M3, gt=0)
    atmospheric: float = Field(ATMOSPHERIC_PA, gt=0)
    initial_pressure: float = Field(ATMOSPHERIC_PA, gt=0)
    fit: Optional[PumpFitCoefficients] = None
    extension_friction: float = Field(0.0, ge=0)
    valve_min_pressure: float = Field(0.0, ge=0)
    pump_preload: float = Field(0.04, ge=0)
    actuator_preload: float = Field(0.0, ge=0)
    connected: bool = True

    @model_validator(mode="after")
    def _check_ranges(self) -> "PneumaticConfig":
        if self.pump_preload >= self.pump.stroke:
            raise ValueError("pump_preload must be smaller than the pump stroke")
        if self.actuator_preload >= self.actuator.stroke:
            raise ValueError("actuator_preload must be smaller than the actuator stroke")
        if self.initial_pressure < self.atmospheric:
            raise ValueError("initial_pressure must be at least atmospheric")
        return self

    def initial_tank(self) -> TankState:
        return TankState(
            pressure=self.initial_pressure, volume=self.tank_volume, atmospheric=self.atmospheric
        )
