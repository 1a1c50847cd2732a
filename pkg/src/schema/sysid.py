"""
Data samples, synthetic-data parameters and fit reports for system identification.
"""

from typing import Optional

from pydantic import Field, computed_field

from ._base import ValueModel
from .pneumatic import (
    ATMOSPHERIC_PA,
    DEFAULT_TANK_VOLUME_M3,
    ActuatorModel,
    PumpFitCoefficients,
    PumpGeometry,
)


class ForceDisplacementSample(ValueModel):
    """
    One force reading from a constant-speed pumping or actuator test.

    :param float x: Compression (pump) or extension (actuator) distance (m).
    :param float force: Measured absolute-pressure force (N).
    :param float tank_pressure: Absolute tank pressure during the test (Pa).
    :param float speed: Compression speed (m/s), positive while compressing.
    """

    x: float = Field(..., ge=0)
    force: float
    tank_pressure: float = Field(..., gt=0)
    speed: float = 0.0


class StepResponseSample(ValueModel):
    """
    One normalized actuator force reading after a valve step.

    :param float t: Time since trigger (s).
    :param float normalized_force: Force divided by its quasi-static value.
    """

    t: float = Field(..., ge=0)
    normalized_force: float


class PumpSyntheticParams(ValueModel):
    """
    Parameters for synthetic pump curves.

    :param PumpGeometry geometry: The pump.
    :param float tank_volume: Tank volume (m^3).
    :param float atmospheric: Atmospheric pressure (Pa).
    :param list[float] pressures: Absolute tank pressures, one curve each (Pa).
    :param int points_per_curve: Samples per curve.
    :param float max_compression: Largest compression sampled, as a fraction of the stroke.
    :param float speed: Compression speed recorded on each sample (m/s).
    :param Optional[PumpFitCoefficients] coefficients: Generate from this piecewise model
        instead of the theoretical one.
    """

    geometry: PumpGeometry = Field(default_factory=PumpGeometry)
    tank_volume: float = Field(DEFAULT_TANK_VOLUME_M3, gt=0)
    atmospheric: float = Field(ATMOSPHERIC_PA, gt=0)
    pressures: list[float] = Field(default_factory=lambda: [ATMOSPHERIC_PA])
    points_per_curve: int = Field(60, ge=2)
    max_compression: float = Field(0.9, gt=0, le=1.0)
    speed: float = Field(0.01, gt=0)
    coefficients: Optional[PumpFitCoefficients] = None


class ActuatorSyntheticParams(ValueModel):
    """
    Parameters for synthetic quasi-static actuator curves.

    :param ActuatorModel actuator: The actuator.
    :param float tank_volume: Tank volume (m^3).
    :param float atmospheric: Atmospheric pressure (Pa).
    :param list[float] pressures: Absolute tank pressures, one curve each (Pa).
    :param int points_per_curve: Samples per curve.
    """

    actuator: ActuatorModel = Field(default_factory=ActuatorModel)
    tank_volume: float = Field(DEFAULT_TANK_VOLUME_M3, gt=0)
    atmospheric: float = Field(ATMOSPHERIC_PA, gt=0)
    pressures: list[float] = Field(default_factory=lambda: [ATMOSPHERIC_PA])
    points_per_curve: int = Field(40, ge=2)


class TransientSyntheticParams(ValueModel):
    """
    Parameters for a synthetic step response.

    :param ActuatorModel actuator: Holds k1, k2, k3.
    :param float t_start: First sample time (s).
    :param float t_end: Last sample time (s).
    :param int points: Number of samples.
    """

    actuator: ActuatorModel = Field(default_factory=ActuatorModel)
    t_start: float = Field(0.0, ge=0)
    t_end: float = Field(0.3, gt=0)
    points: int = Field(300, ge=3)


class PumpFitReport(ValueModel):
    """
    Result of a pump model fit.

    :param PumpFitCoefficients coefficients: The fitted coefficients.
    :param dict[str, float] segment_rmse: RMSE per segment (N).
    :param dict[str, int] segment_counts: Samples per segment.
    :param float rmse: RMSE over all compression samples (N).
    :param dict[str, float] continuity: Relative force jumps at the segment boundaries.
    """

    coefficients: PumpFitCoefficients
    segment_rmse: dict[str, float]
    segment_counts: dict[str, int]
    rmse: float
    continuity: dict[str, float]


class TransientFitReport(ValueModel):
    """
    Result of a transient fit.

    :param float k1: Fitted k1 (s^2).
    :param float k2: Fitted k2 (s).
    :param float k3: Normalized k3.
    :param float rmse: RMSE of the normalized force.
    :param int starts: Number of multi-start points evaluated.
    :param bool near_degenerate: True when the data carries no information about k1
        (the fitted response settles before the first sample, or k1 sits at its bound).
    """

    k1: float
    k2: float
    k3: float = 1.0
    rmse: float
    starts: int
    near_degenerate: bool = False

    @computed_field
    @property
    def damping_ratio(self) -> float:
        if self.k1 <= 0.0:
            return float("inf")
        return self.k2 / (2.0 * (self.k1 * self.k3) ** 0.5)

    @computed_field
    @property
    def natural_frequency(self) -> float:
        if self.k1 <= 0.0:
            return float("inf")
        return (self.k3 / self.k1) ** 0.5

    @computed_field
    @property
    def overshoot(self) -> bool:
        return self.damping_ratio < 1.0

    def actuator(self, base: Optional[ActuatorModel] = None) -> ActuatorModel:
        """Return ``base`` (or a default actuator) carrying the fitted coefficients."""
        base = base or ActuatorModel()
        return base.model_copy(update={"k1": self.k1, "k2": self.k2, "k3": self.k3})
