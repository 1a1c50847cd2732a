"""
Module samples.py reads and writes system identification datasets.

Pump and actuator datasets carry the header ``x_m,force_n,tank_pa,speed_mps``; step
responses carry ``t_s,delta``.
"""

from pathlib import Path

import pandas as pd
from loguru import logger
from pydantic import ValidationError

from error import SchemaError
from schema.sysid import ForceDisplacementSample, StepResponseSample

from .tables import write_frame


FORCE_COLUMNS = ["x_m", "force_n", "tank_pa", "speed_mps"]
STEP_COLUMNS = ["t_s", "delta"]


def _read_frame(path: Path | str, columns: list[str]) -> pd.DataFrame:
    """Read a CSV file and check its header.

    :param Path | str path: The file.
    :param list[str] columns: Required columns.
    :return pd.DataFrame: The rows, restricted to the required columns.
    :raises SchemaError: If the file is missing, empty, non-numeric or lacks a column.
    """
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"{path}: file not found")
    try:
        frame = pd.read_csv(path)
    except pd.errors.EmptyDataError as e:
        raise SchemaError(f"{path}: file is empty, expected columns {','.join(columns)}") from e
    found = [str(column).strip() for column in frame.columns]
    frame.columns = found
    missing = [column for column in columns if column not in found]
    if missing:
        raise SchemaError(
            f"{path}: missing columns {missing}; found {found}, expected header {','.join(columns)}"
        )
    if frame.empty:
        raise SchemaError(f"{path}: no data rows")
    frame = frame[columns]
    bad = [column for column in columns if not pd.api.types.is_numeric_dtype(frame[column])]
    if bad:
        raise SchemaError(f"{path}: non-numeric values in columns {bad}")
    logger.debug(f"Read {len(frame)} rows from {path}")
    return frame


def read_force_samples_csv(path: Path | str) -> list[ForceDisplacementSample]:
    """Read force-displacement samples.

    :param Path | str path: CSV file with header ``x_m,force_n,tank_pa,speed_mps``.
    :return list[ForceDisplacementSample]: The samples.
    :raises SchemaError: On header or value problems, naming the row.
    """
    frame = _read_frame(path, FORCE_COLUMNS)
    samples = []
    for row, (x, force, tank, speed) in enumerate(frame.itertuples(index=False, name=None), start=2):
        try:
            samples.append(ForceDisplacementSample(x=x, force=force, tank_pressure=tank, speed=speed))
        except ValidationError as e:
            raise SchemaError(f"{path}: line {row}: {e.errors()[0]['msg']}") from e
    return samples


def read_step_samples_csv(path: Path | str) -> list[StepResponseSample]:
    """Read normalized step-response samples.

    :param Path | str path: CSV file with header ``t_s,delta``.
    :return list[StepResponseSample]: The samples.
    :raises SchemaError: On header or value problems, naming the row.
    """
    frame = _read_frame(path, STEP_COLUMNS)
    samples = []
    for row, (t, delta) in enumerate(frame.itertuples(index=False, name=None), start=2):
        try:
            samples.append(StepResponseSample(t=t, normalized_force=delta))
        except ValidationError as e:
            raise SchemaError(f"{path}: line {row}: {e.errors()[0]['msg']}") from e
    return samples


def write_force_samples_csv(samples: list[ForceDisplacementSample], path: Path | str) -> Path:
    frame = pd.DataFrame(
        [(s.x, s.force, s.tank_pressure, s.speed) for s in samples],
        columns=FORCE_COLUMNS,
    )
    return write_frame(frame, path)


def write_step_samples_csv(samples: list[StepResponseSample], path: Path | str) -> Path:
    frame = pd.DataFrame([(s.t, s.normalized_force) for s in samples], columns=STEP_COLUMNS)
    return write_frame(frame, path)
