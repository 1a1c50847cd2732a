"""
The schema module defines the value types of the hopper toolkit: robot and pneumatic
parameters, simulator state and traces, trajectory problems and solutions, energy
ledgers and the scenario document.
"""

from .controller import ControlCommand, ControllerConfig, MotorParams
from .energy import EnergyAudit, EnergyLedger, EnergyRow
from .enums import (
    AerialMapping,
    ContactMode,
    EventKind,
    HopObjective,
    PneumaticMode,
    SampleKind,
    SolverBackendKind,
    TaskKind,
)
from .pneumatic import (
    ATMOSPHERIC_PA,
    ActuatorModel,
    PneumaticConfig,
    PumpFitCoefficients,
    PumpGeometry,
    TankState,
    TransientState,
)
from .robot import DynamicsTerms, LegKinematics, RobotModel, RobotState
from .scenario import Scenario, ScenarioFactory, SweepConfig, TaskConfig
from .simulation import CycleSummary, PointMassCycle, SimConfig, SimEvent, SimTrace, TraceSample, World
from .sysid import ForceDisplacementSample, PumpFitReport, StepResponseSample, TransientFitReport
from .trajectory import ForceSchedule, PhaseSolution, TrajOptConfig, TrajOptProblem, TrajSolution

__all__ = [
    "ATMOSPHERIC_PA",
    "ActuatorModel",
    "AerialMapping",
    "ContactMode",
    "ControlCommand",
    "ControllerConfig",
    "CycleSummary",
    "DynamicsTerms",
    "EnergyAudit",
    "EnergyLedger",
    "EnergyRow",
    "EventKind",
    "ForceDisplacementSample",
    "ForceSchedule",
    "HopObjective",
    "LegKinematics",
    "MotorParams",
    "PhaseSolution",
    "PneumaticConfig",
    "PneumaticMode",
    "PointMassCycle",
    "PumpFitCoefficients",
    "PumpFitReport",
    "PumpGeometry",
    "RobotModel",
    "RobotState",
    "SampleKind",
    "Scenario",
    "ScenarioFactory",
    "SimConfig",
    "SimEvent",
    "SimTrace",
    "SolverBackendKind",
    "StepResponseSample",
    "SweepConfig",
    "TankState",
    "TaskConfig",
    "TaskKind",
    "TraceSample",
    "TrajOptConfig",
    "TrajOptProblem",
    "TrajSolution",
    "TransientFitReport",
    "TransientState",
    "World",
]
