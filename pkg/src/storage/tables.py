"""
Module tables.py turns results into tidy frames and writes them.

CSV floats are written with 17 significant digits and JSON with sorted keys so that
reruns produce identical bytes.
"""

import json
from pathlib import Path
from typing import Any

import pandas as pd
from loguru import logger
from pydantic import BaseModel

from schema.energy import EnergyLedger
from schema.simulation import PointMassCycle, SimTrace
from schema.trajectory import TrajSolution


FLOAT_FORMAT = "%.17g"


def write_frame(frame: pd.DataFrame, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def write_json(data: BaseModel | dict | list, path: Path | str) -> Path:
    """Write a model or plain data as indented JSON with sorted keys."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload: Any = data.model_dump(mode="json") if isinstance(data, BaseModel) else data
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    logger.debug(f"Wrote {path}")
    return path


def read_json(path: Path | str) -> Any:
    return json.loads(Path(path).read_text())


def trace_frame(trace: SimTrace) -> pd.DataFrame:
    """One row per recorded sample."""
    rows = []
    for s in trace.samples:
        rows.append(
            {
                "t_s": s.t,
                "x_hip_m": s.q[0],
                "z_hip_m": s.q[1],
                "q_hip_rad": s.q[2],
                "q_knee_rad": s.q[3],
                "xdot_hip_mps": s.qdot[0],
                "zdot_hip_mps": s.qdot[1],
                "qdot_hip_radps": s.qdot[2],
                "qdot_knee_radps": s.qdot[3],
                "tau_hip_nm": s.tau[0],
                "tau_knee_nm": s.tau[1],
                "voltage_hip_v": s.voltage[0],
                "voltage_knee_v": s.voltage[1],
                "f_pneu_n": s.f_pneu,
                "grf_x_n": s.grf[0],
                "grf_z_n": s.grf[1],
                "tank_pa": s.tank_pressure,
                "delta": s.delta,
                "valve_open": int(s.valve_open),
                "mode": s.mode.value,
                "damped": int(s.damped),
            }
        )
    return pd.DataFrame(rows)


def events_payload(trace: SimTrace) -> list[dict]:
    return [event.model_dump(mode="json") for event in trace.events]


def ledger_frame(ledger: EnergyLedger) -> pd.DataFrame:
    return pd.DataFrame([row.model_dump() for row in ledger.rows])


def cycles_frame(trace: SimTrace) -> pd.DataFrame:
    """Apex-to-apex cycle summaries with their work terms flattened."""
    rows = []
    for cycle in trace.cycles:
        row = cycle.model_dump(exclude={"work"})
        row.update({f"work_{name}": value for name, value in cycle.work.model_dump().items()})
        rows.append(row)
    return pd.DataFrame(rows)


def solution_frame(solution: TrajSolution) -> pd.DataFrame:
    """Node values of both phases; ascent times continue from the end of the descent."""
    frames = []
    offset = 0.0
    for name, phase in (("descent", solution.descent), ("ascent", solution.ascent)):
        frames.append(
            pd.DataFrame(
                {
                    "phase": name,
                    "t_s": phase.times + offset,
                    "L_m": phase.L,
                    "V_mps": phase.V,
                    "F_motor_n": phase.F,
                    "F_pneu_n": phase.F_pneu,
                    "grf_n": phase.grf,
                }
            )
        )
        offset += phase.duration
    return pd.concat(frames, ignore_index=True)


def point_mass_frame(cycles: list[PointMassCycle]) -> pd.DataFrame:
    rows = []
    for index, cycle in enumerate(cycles):
        row = cycle.model_dump(exclude={"tank"})
        row["cycle"] = index
        row["tank_pa"] = cycle.tank.pressure
        rows.append(row)
    return pd.DataFrame(rows)
