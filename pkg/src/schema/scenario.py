"""
The scenario schema describes one experiment: the robot, its pneumatics, the controller,
the simulator, the trajectory optimization settings, the task and an optional sweep.
"""

import json
from pathlib import Path
from typing import Any, Callable, Dict, Optional

from loguru import logger
from pydantic import BaseModel, Field, ValidationError, model_validator
import yaml

from error import ConfigurationError

from ._base import ValueModel
from .controller import ControllerConfig, MotorParams
from .enums import TaskKind
from .pneumatic import ATMOSPHERIC_PA, PneumaticConfig
from .robot import RobotModel
from .simulation import SimConfig
from .trajectory import TrajOptConfig


RELEASE_PRESSURE_PA = 303370.0
"""Absolute tank pressure at which the enhanced tasks release by default."""

ENHANCED_TASKS = (TaskKind.ENHANCED_HOP, TaskKind.CONSECUTIVE_ENHANCED, TaskKind.PLATFORM_JUMP)


class TaskConfig(ValueModel):
    """
    What a scenario runs.

    :param TaskKind kind: The experiment.
    :param int cycles: Apex-to-apex cycles to simulate.
    :param float start_clearance: Foot height above the ground at the first apex (m).
    :param bool precharge: Start with the tank at the release pressure instead of charging.
    :param int release_count: Consecutive releases of the consecutive-enhanced task.
    :param float platform_height: Ground step of the platform-jump task (m).
    :param int platform_cycle: Cycle at whose starting apex the platform appears.
    """

    kind: TaskKind = TaskKind.PERIODIC_CHARGE
    cycles: int = Field(20, ge=1)
    start_clearance: float = Field(0.02, ge=0)
    precharge: bool = False
    release_count: int = Field(3, ge=1)
    platform_height: float = Field(0.10, gt=0)
    platform_cycle: Optional[int] = Field(None, ge=1)


class SweepConfig(ValueModel):
    """
    Sweep axes; each (pressure, mass) pair is one independent point.

    :param list[float] tank_pressures: Absolute release pressures (Pa).
    :param list[float] masses: Projected masses (kg).
    """

    tank_pressures: list[float] = Field(default_factory=list)
    masses: list[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_values(self) -> "SweepConfig":
        if any(p < ATMOSPHERIC_PA for p in self.tank_pressures):
            raise ValueError("sweep tank pressures must be absolute and at least atmospheric")
        if any(m <= 0.0 for m in self.masses):
            raise ValueError("sweep masses must be positive")
        return self

    @property
    def empty(self) -> bool:
        return not self.tank_pressures and not self.masses


class Scenario(ValueModel):
    """
    A complete experiment.

    :param RobotModel robot: Robot parameters.
    :param PneumaticConfig pneumatic: Pneumatic configuration.
    :param ControllerConfig controller: Controller gains and release plan.
    :param MotorParams motor: Motor electrical constants.
    :param SimConfig sim: Simulator settings.
    :param TrajOptConfig trajopt: Trajectory optimization settings.
    :param TaskConfig task: The task.
    :param SweepConfig sweep: Sweep axes.
    :param str output_dir: Where results go.
    :param int seed: Seed of every random draw in the run.
    """

    robot: RobotModel = Field(default_factory=RobotModel)
    pneumatic: PneumaticConfig = Field(default_factory=PneumaticConfig)
    controller: ControllerConfig = Field(default_factory=ControllerConfig)
    motor: MotorParams = Field(default_factory=MotorParams)
    sim: SimConfig = Field(default_factory=SimConfig)
    trajopt: TrajOptConfig = Field(default_factory=TrajOptConfig)
    task: TaskConfig = Field(default_factory=TaskConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    output_dir: str = "results"
    seed: int = 0

    @property
    def release_pressure(self) -> float:
        return self.controller.release_pressure or RELEASE_PRESSURE_PA


def _kpa(value: Any, section: Dict) -> Any:
    if isinstance(value, list):
        return [v * 1e3 for v in value]
    return value * 1e3


def _kpa_gauge(value: Any, section: Dict) -> Any:
    atmospheric = section.get("atmospheric", ATMOSPHERIC_PA)
    if isinstance(value, list):
        return [v * 1e3 + atmospheric for v in value]
    return value * 1e3 + atmospheric


def _same(value: Any, section: Dict) -> Any:
    return value


class ScenarioFactory:
    """Factory for creating Scenario instances from YAML or JSON documents."""

    SECTIONS = (
        "robot",
        "estimated",
        "pneumatic",
        "controller",
        "motor",
        "sim",
        "trajopt",
        "task",
        "sweep",
        "output_dir",
        "seed",
    )

    # Map user-facing field names (units embedded) to model fields and converters
    CONFIG_FIELD_MAPPING: Dict[str, tuple[str, Callable[[Any, Dict], Any]]] = {
        "shank_length_m": ("shank_length", _same),
        "thigh_length_m": ("thigh_length", _same),
        "projected_mass_kg": ("projected_mass", _same),
        "thigh_mass_kg": ("thigh_mass", _same),
        "shank_mass_kg": ("shank_mass", _same),
        "tank_volume_m3": ("tank_volume", _same),
        "atmospheric_pa": ("atmospheric", _same),
        "initial_pressure_kpa": ("initial_pressure", _kpa),
        "initial_pressure_kpa_gauge": ("initial_pressure", _kpa_gauge),
        "valve_min_pressure_kpa_gauge": ("valve_min_pressure", _kpa),
        "extension_friction_n": ("extension_friction", _same),
        "release_pressure_kpa": ("release_pressure", _kpa),
        "release_pressure_kpa_gauge": ("release_pressure", _kpa_gauge),
        "tank_pressure_kpa": ("tank_pressure", _kpa),
        "tank_pressure_kpa_gauge": ("tank_pressure", _kpa_gauge),
        "tank_pressures_kpa": ("tank_pressures", _kpa),
        "tank_pressures_kpa_gauge": ("tank_pressures", _kpa_gauge),
        "masses_kg": ("masses", _same),
        "apex_clearance_m": ("apex_clearance", _same),
        "platform_height_m": ("platform_height", _same),
        "dt_s": ("dt", _same),
    }

    @staticmethod
    def load_config(config_path: str | Path) -> Dict:
        """Load a scenario document; ``.json`` files are read as JSON, anything else as YAML."""
        path = Path(config_path)
        if not path.is_file():
            raise ConfigurationError(f"config file {path} not found")
        text = path.read_text()
        try:
            data = json.loads(text) if path.suffix.lower() == ".json" else yaml.safe_load(text)
        except (json.JSONDecodeError, yaml.YAMLError) as e:
            raise ConfigurationError(f"{path}: cannot parse: {e}") from e
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: top level must be a mapping of sections")
        return data

    @classmethod
    def _convert_config_fields(cls, config: Dict) -> Dict:
        """Convert config field names (and units) to match model fields."""
        converted = dict(config)
        for config_field, (model_field, convert) in cls.CONFIG_FIELD_MAPPING.items():
            if config_field in converted:
                converted[model_field] = convert(converted.pop(config_field), config)
        return converted

    @classmethod
    def _section(cls, config: Dict, name: str, errors: list[str]) -> Dict:
        section = config.get(name) or {}
        if not isinstance(section, dict):
            errors.append(f"{name}: expected a mapping, got {type(section).__name__}")
            return {}
        return cls._convert_config_fields(section)

    @staticmethod
    def _build(model: type[BaseModel], name: str, values: Dict, errors: list[str]) -> Optional[BaseModel]:
        try:
            instance = model(**values)
        except ValidationError as e:
            for error in e.errors():
                location = ".".join(str(part) for part in (name, *error["loc"]))
                errors.append(f"{location}: {error['msg']}")
            return None
        logger.debug(f"Created {name} config: {values}")
        return instance

    @classmethod
    def create_scenario(
        cls, config: Dict, seed: Optional[int] = None, output_dir: Optional[str] = None
    ) -> Scenario:
        """
        Create a Scenario from a parsed document.

        Values in the ``estimated`` section fill robot and motor fields the ``robot`` and
        ``motor`` sections leave unset. Enhanced tasks release at 303.37 kPa absolute
        unless the controller names a pressure or release cycles.

        :param Dict config: The document.
        :param Optional[int] seed: Seed override.
        :param Optional[str] output_dir: Output directory override.
        :return Scenario: The scenario.
        :raises ConfigurationError: Listing every invalid field.
        """
        errors: list[str] = []
        unknown = sorted(set(config) - set(cls.SECTIONS))
        if unknown:
            errors.append(f"unknown sections {unknown}; expected {list(cls.SECTIONS)}")

        estimated = cls._section(config, "estimated", errors)
        robot_values = {k: v for k, v in estimated.items() if k in RobotModel.model_fields}
        motor_values = {k: v for k, v in estimated.items() if k in MotorParams.model_fields}
        stray = sorted(set(estimated) - set(robot_values) - set(motor_values))
        if stray:
            errors.append(f"estimated: unknown fields {stray}")
        robot_values.update(cls._section(config, "robot", errors))
        motor_values.update(cls._section(config, "motor", errors))

        seed = seed if seed is not None else config.get("seed", 0)
        task = cls._build(TaskConfig, "task", cls._section(config, "task", errors), errors)
        sim_values = cls._section(config, "sim", errors)
        sim_values.setdefault("seed", seed)
        controller_values = cls._section(config, "controller", errors)
        pneumatic_values = cls._section(config, "pneumatic", errors)

        if task is not None:
            if task.kind in ENHANCED_TASKS:
                if not controller_values.get("release_cycles"):
                    controller_values.setdefault("release_pressure", RELEASE_PRESSURE_PA)
                if task.precharge:
                    pneumatic_values["initial_pressure"] = controller_values.get(
                        "release_pressure", RELEASE_PRESSURE_PA
                    )
            if task.kind is TaskKind.CONSECUTIVE_ENHANCED:
                controller_values.setdefault("release_count", task.release_count)
            if task.kind is TaskKind.PLATFORM_JUMP:
                sim_values.setdefault("ground_step_height", task.platform_height)
                sim_values.setdefault("ground_step_cycle", task.platform_cycle)
            if task.kind is TaskKind.MOTOR_ONLY_MAX:
                pneumatic_values["connected"] = False

        built = {
            "robot": cls._build(RobotModel, "robot", robot_values, errors),
            "motor": cls._build(MotorParams, "motor", motor_values, errors),
            "pneumatic": cls._build(PneumaticConfig, "pneumatic", pneumatic_values, errors),
            "controller": cls._build(ControllerConfig, "controller", controller_values, errors),
            "sim": cls._build(SimConfig, "sim", sim_values, errors),
            "trajopt": cls._build(TrajOptConfig, "trajopt", cls._section(config, "trajopt", errors), errors),
            "sweep": cls._build(SweepConfig, "sweep", cls._section(config, "sweep", errors), errors),
            "task": task,
        }
        if not isinstance(seed, int):
            errors.append(f"seed: expected an integer, got {seed!r}")
        if errors:
            raise ConfigurationError("invalid scenario:\n  " + "\n  ".join(errors))

        scenario = Scenario(
            **built,
            output_dir=str(output_dir or config.get("output_dir", "results")),
            seed=seed,
        )
        logger.info(
            f"Created scenario: task={scenario.task.kind.value}, cycles={scenario.task.cycles}, "
            f"mass={scenario.robot.projected_mass} kg, seed={scenario.seed}"
        )
        return scenario

    @classmethod
    def create_from_file(
        cls, config_path: str | Path, seed: Optional[int] = None, output_dir: Optional[str] = None
    ) -> Scenario:
        """Create a Scenario from a YAML or JSON file."""
        return cls.create_scenario(cls.load_config(config_path), seed=seed, output_dir=output_dir)
