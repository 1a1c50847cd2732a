"""
Trajectory optimization problem and solution types.
"""

import math
from typing import Optional

import numpy as np
from pydantic import Field, computed_field

from ._base import FloatArray, ValueModel
from .enums import HopObjective, PneumaticMode, SolverBackendKind
from .pneumatic import PneumaticConfig, TankState


class TrajOptConfig(ValueModel):
    """
    User settings of a ground-phase optimization.

    :param HopObjective objective: Periodic (minimum effort) or explosive (maximum apex).
    :param PneumaticMode pneumatic_mode: Pneumatic elements acting on the leg.
    :param float apex_clearance: Landing apex above the fully extended leg (m).
    :param Optional[float] apex_height: Absolute landing apex hip height; overrides the clearance (m).
    :param int descent_nodes: Collocation nodes of the descending phase.
    :param int ascent_nodes: Collocation nodes of the ascending phase.
    :param float cost_weight: Effort weight c of the explosive objective.
    :param float force_scale: Multiplier on the motor force bound.
    :param Optional[float] tank_pressure: Absolute tank pressure the plan is made for (Pa);
        the pneumatic initial pressure when absent.
    :param Optional[float] valve_lead: Valve trigger lead before the ascent (s); the
        transient rise time when absent.
    :param float tolerance: Accepted defect and constraint violation.
    :param float stationarity_tolerance: Stationarity above this is reported as a warning.
    :param int max_iterations: Iteration budget of the solver backend.
    :param SolverBackendKind backend: Nonlinear program solver.
    :param float smoothing: Width of the smoothed motor speed envelope.
    :param float min_duration: Lower bound on each phase duration (s).
    :param float max_duration: Upper bound on each phase duration (s).
    """

    objective: HopObjective = HopObjective.PERIODIC
    pneumatic_mode: PneumaticMode = PneumaticMode.PUMP_ONLY
    apex_clearance: float = Field(0.02, ge=0)
    apex_height: Optional[float] = Field(None, gt=0)
    descent_nodes: int = Field(40, ge=5)
    ascent_nodes: int = Field(40, ge=5)
    cost_weight: float = Field(1e-4, ge=0)
    force_scale: float = Field(1.0, gt=0)
    tank_pressure: Optional[float] = Field(None, gt=0)
    valve_lead: Optional[float] = Field(None, ge=0)
    tolerance: float = Field(1e-6, gt=0)
    stationarity_tolerance: float = Field(1e-6, gt=0)
    max_iterations: int = Field(500, ge=1)
    backend: SolverBackendKind = SolverBackendKind.SLSQP
    smoothing: float = Field(1e-2, gt=0)
    min_duration: float = Field(5e-3, gt=0)
    max_duration: float = Field(1.0, gt=0)


class TrajOptProblem(ValueModel):
    """
    Point-mass ground-phase problem ``m*L'' = F_pneu + F_m - m*g``.

    :param float mass: Projected mass m~ (kg).
    :param float gravity: Gravitational acceleration (m/s^2).
    :param float leg_min: Shortest leg length (m).
    :param float leg_max: Longest leg length (m).
    :param float apex_height: Landing apex hip height (m).
    :param float transmission: Joint compression per unit leg shortening.
    :param int descent_nodes: Nodes of the descending phase.
    :param int ascent_nodes: Nodes of the ascending phase.
    :param float force_limit: Stall leg force of the motors (N).
    :param float speed_limit: Leg speed at the motors' no-load speed (m/s).
    :param PneumaticMode mode: Pneumatic elements acting on the leg.
    :param HopObjective objective: The objective.
    :param float cost_weight: Effort weight c.
    :param PneumaticConfig pneumatic: Pneumatic configuration.
    :param TankState tank: Tank the plan is made for.
    :param float valve_lead: Valve trigger lead before the ascent (s).
    :param float tolerance: Accepted defect and violation.
    :param float stationarity_tolerance: Stationarity warning level.
    :param int max_iterations: Solver iteration budget.
    :param SolverBackendKind backend: Solver backend.
    :param float smoothing: Smoothed envelope width.
    :param float min_duration: Phase duration lower bound (s).
    :param float max_duration: Phase duration upper bound (s).
    """

    mass: float = Field(..., gt=0)
    gravity: float = Field(9.81, gt=0)
    leg_min: float = Field(..., gt=0)
    leg_max: float = Field(..., gt=0)
    apex_height: float = Field(..., gt=0)
    transmission: float = Field(1.0, gt=0)
    descent_nodes: int = Field(40, ge=5)
    ascent_nodes: int = Field(40, ge=5)
    force_limit: float = Field(..., gt=0)
    speed_limit: float = Field(..., gt=0)
    mode: PneumaticMode = PneumaticMode.PUMP_ONLY
    objective: HopObjective = HopObjective.PERIODIC
    cost_weight: float = Field(1e-4, ge=0)
    pneumatic: PneumaticConfig = Field(default_factory=PneumaticConfig)
    tank: TankState = Field(default_factory=TankState)
    valve_lead: float = Field(0.0, ge=0)
    tolerance: float = Field(1e-6, gt=0)
    stationarity_tolerance: float = Field(1e-6, gt=0)
    max_iterations: int = Field(500, ge=1)
    backend: SolverBackendKind = SolverBackendKind.SLSQP
    smoothing: float = Field(1e-2, gt=0)
    min_duration: float = Field(5e-3, gt=0)
    max_duration: float = Field(1.0, gt=0)

    @computed_field
    @property
    def touchdown_velocity(self) -> float:
        """Leg rate at touchdown after falling from the apex (m/s, <= 0)."""
        drop = max(self.apex_height - self.leg_max, 0.0)
        return -math.sqrt(2.0 * self.gravity * drop)

    @property
    def weight(self) -> float:
        return self.mass * self.gravity


class PhaseSolution(ValueModel):
    """
    Node values of one ground phase.

    :param FloatArray times: Node times from the phase start (s).
    :param FloatArray L: Leg length (m).
    :param FloatArray V: Leg rate (m/s).
    :param FloatArray F: Motor leg force (N).
    :param FloatArray F_pneu: Pneumatic leg force (N).
    """

    times: FloatArray
    L: FloatArray
    V: FloatArray
    F: FloatArray
    F_pneu: FloatArray

    @computed_field
    @property
    def duration(self) -> float:
        return float(self.times[-1])

    @property
    def grf(self) -> np.ndarray:
        return self.F + self.F_pneu


class TrajSolution(ValueModel):
    """
    Solved ground phase.

    :param PhaseSolution descent: Descending phase.
    :param PhaseSolution ascent: Ascending phase.
    :param float apex_height: Predicted next apex hip height (m).
    :param float apex_clearance: Predicted apex above the fully extended leg (m).
    :param Optional[float] valve_trigger_time: Valve trigger time from touchdown (s).
    :param float objective_value: Objective at the solution.
    :param dict[str, float] residuals: ``max_defect``, ``max_violation`` and ``stationarity``.
    :param int iterations: Solver iterations.
    :param float tank_pressure: Absolute tank pressure the plan was made for (Pa).
    :param PneumaticMode mode: Pneumatic mode of the plan.
    :param HopObjective objective: Objective of the plan.
    :param str backend: Backend that produced it.
    :param bool converged: Whether the stationarity residual met its tolerance; a feasible
        but unconverged plan may be suboptimal.
    """

    descent: PhaseSolution
    ascent: PhaseSolution
    apex_height: float
    apex_clearance: float
    valve_trigger_time: Optional[float] = None
    objective_value: float
    residuals: dict[str, float]
    iterations: int
    tank_pressure: float
    mode: PneumaticMode
    objective: HopObjective
    backend: str
    converged: bool = True


class ForceSchedule(ValueModel):
    """
    Motor leg force to play back during one stance.

    Forces are linearly interpolated in phase time and held at their last value.

    :param FloatArray descent_times: Descent node times (s).
    :param FloatArray descent_forces: Descent forces (N).
    :param FloatArray ascent_times: Ascent node times (s).
    :param FloatArray ascent_forces: Ascent forces (N).
    :param Optional[float] trigger_time: Valve trigger time from touchdown, no release when absent (s).
    """

    descent_times: FloatArray
    descent_forces: FloatArray
    ascent_times: FloatArray
    ascent_forces: FloatArray
    trigger_time: Optional[float] = None

    def force(self, descending: bool, t_phase: float) -> float:
        if descending:
            return float(np.interp(t_phase, self.descent_times, self.descent_forces))
        return float(np.interp(t_phase, self.ascent_times, self.ascent_forces))

    @property
    def stance_duration(self) -> float:
        return float(self.descent_times[-1] + self.ascent_times[-1])

    @property
    def ascent_duration(self) -> float:
        return float(self.ascent_times[-1])
