"""
Tests for the CSV and JSON storage helpers.
"""

import numpy as np
import pytest

from error import SchemaError
from schema.sysid import ForceDisplacementSample, StepResponseSample
from schema.trajectory import PhaseSolution, TrajSolution
from storage import (
    read_force_samples_csv,
    read_json,
    read_step_samples_csv,
    solution_frame,
    write_force_samples_csv,
    write_json,
    write_step_samples_csv,
)


def test_force_samples_survive_csv(tmp_path):
    samples = [
        ForceDisplacementSample(x=0.01 * i, force=20.0 + 0.1 / 3 * i, tank_pressure=201325.0, speed=0.01)
        for i in range(5)
    ]
    path = write_force_samples_csv(samples, tmp_path / "pump.csv")
    assert path.read_text().splitlines()[0] == "x_m,force_n,tank_pa,speed_mps"
    assert read_force_samples_csv(path) == samples


def test_step_samples_csv(tmp_path):
    samples = [StepResponseSample(t=0.01 * i, normalized_force=1.0 - np.exp(-i)) for i in range(4)]
    path = write_step_samples_csv(samples, tmp_path / "nested" / "step.csv")
    assert read_step_samples_csv(path) == samples


def test_missing_column_names_expected_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x_m,force_n\n0.0,1.0\n")
    with pytest.raises(SchemaError) as e:
        read_force_samples_csv(path)
    assert "tank_pa" in str(e.value)
    assert "x_m,force_n,tank_pa,speed_mps" in str(e.value)


def test_empty_files_are_rejected(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(SchemaError):
        read_step_samples_csv(empty)
    header_only = tmp_path / "header.csv"
    header_only.write_text("t_s,delta\n")
    with pytest.raises(SchemaError):
        read_step_samples_csv(header_only)
    with pytest.raises(SchemaError):
        read_step_samples_csv(tmp_path / "missing.csv")


def test_bad_values_are_rejected(tmp_path):
    text = tmp_path / "text.csv"
    text.write_text("t_s,delta\n0.0,abc\n")
    with pytest.raises(SchemaError):
        read_step_samples_csv(text)
    negative = tmp_path / "negative.csv"
    negative.write_text("x_m,force_n,tank_pa,speed_mps\n0.0,1.0,101325,0.01\n-0.1,1.0,101325,0.01\n")
    with pytest.raises(SchemaError) as e:
        read_force_samples_csv(negative)
    assert "line 3" in str(e.value)


def test_solution_frame_and_json(tmp_path):
    phase = PhaseSolution(
        times=[0.0, 0.05, 0.1],
        L=[0.25, 0.2, 0.18],
        V=[-0.6, -0.3, 0.0],
        F=[20.0, 25.0, 30.0],
        F_pneu=[0.0, 1.0, 2.0],
    )
    solution = TrajSolution(
        descent=phase,
        ascent=phase,
        apex_height=0.27,
        apex_clearance=0.02,
        objective_value=0.5,
        residuals={"max_defect": 1e-9},
        iterations=12,
        tank_pressure=101325.0,
        mode="pump_only",
        objective="periodic",
        backend="SlsqpBackend",
    )
    frame = solution_frame(solution)
    assert list(frame["phase"].unique()) == ["descent", "ascent"]
    assert frame["t_s"].iloc[-1] == pytest.approx(0.2)
    assert frame["grf_n"].iloc[2] == pytest.approx(32.0)

    path = write_json(solution, tmp_path / "solution.json")
    payload = read_json(path)
    assert payload["descent"]["duration"] == pytest.approx(0.1)
    assert payload["iterations"] == 12
