"""
Tests for the command line entry points.
"""

import pandas as pd
import pytest
from loguru import logger

from cli import exit_code, main, mass_peaks, pressure_trends
from error import (
    ConfigurationError,
    DegenerateDataError,
    SchemaError,
    SimulationDivergedError,
    SolverError,
)
from schema.pneumatic import ATMOSPHERIC_PA
from storage import read_json


@pytest.fixture(autouse=True)
def log_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("HOPPER_LOG_DIR", str(tmp_path / "logs"))
    yield
    logger.remove()


def create_test_height_points() -> pd.DataFrame:
    offsets = {2.0: 0.0, 2.5: 0.01, 3.0: 0.005}
    rows = []
    for gauge in (100.0, 200.0, 300.0):
        for mass, offset in offsets.items():
            rows.append(
                {
                    "tank_pa": ATMOSPHERIC_PA + gauge * 1e3,
                    "mass_kg": mass,
                    "apex_replayed_m": 0.02 + 1e-4 * gauge + offset,
                    "apex_predicted_m": 0.02 + 1e-4 * gauge + offset,
                }
            )
    return pd.DataFrame(rows)


def test_exit_codes():
    assert exit_code(ConfigurationError("x")) == 2
    assert exit_code(SchemaError("x")) == 2
    assert exit_code(DegenerateDataError("x")) == 3
    assert exit_code(SolverError("x")) == 4
    assert exit_code(SimulationDivergedError("x")) == 5
    assert exit_code(RuntimeError("x")) == 1


def test_sysid_rejects_empty_csv(tmp_path):
    empty = tmp_path / "pump.csv"
    empty.write_text("")
    assert main(["sysid", str(empty), "--kind", "pump", "--out", str(tmp_path / "out")]) == 2


def test_sysid_fits_generated_transient(tmp_path):
    samples = tmp_path / "step.csv"
    out = tmp_path / "out"
    assert main(["sysid", str(samples), "--kind", "transient", "--generate", "--out", str(out)]) == 0
    assert samples.is_file()
    report = read_json(out / "fit_transient.json")
    assert report["k1"] == pytest.approx(2.5e-4, rel=1e-2)
    assert report["k2"] == pytest.approx(2e-2, rel=1e-2)
    residuals = pd.read_csv(out / "residuals_transient.csv")
    assert list(residuals.columns) == ["t_s", "delta", "model", "residual"]
    assert residuals["residual"].abs().max() < 1e-4


def test_bad_config_exits_with_two(tmp_path):
    config = tmp_path / "scenario.yaml"
    config.write_text("robot:\n  projected_mass_kg: -1\n")
    assert main(["simulate", "--config", str(config), "--out", str(tmp_path / "out")]) == 2


def test_report_rejects_empty_run(tmp_path):
    run = tmp_path / "run"
    run.mkdir()
    assert main(["report", str(run), "--out", str(tmp_path / "report")]) == 2
    assert main(["report", str(tmp_path / "missing")]) == 2


def test_pressure_trends_and_mass_peaks():
    points = create_test_height_points().rename(columns={"apex_replayed_m": "apex_m"})
    points["tank_kpa_gauge"] = (points["tank_pa"] - ATMOSPHERIC_PA) / 1e3
    trends = pressure_trends(points)
    assert [row["mass_kg"] for row in trends] == [2.0, 2.5, 3.0]
    assert trends[0]["slope_m_per_kpa"] == pytest.approx(1e-4)
    assert trends[1]["intercept_m"] == pytest.approx(0.03)
    assert trends[0]["r_squared"] == pytest.approx(1.0)

    peaks = mass_peaks(points)
    assert len(peaks) == 3
    assert all(row["mass_kg"] == 2.5 for row in peaks)
    assert all(row["interior"] for row in peaks)


def test_report_aggregates_sweep(tmp_path):
    run = tmp_path / "run"
    run.mkdir()
    create_test_height_points().to_csv(run / "sweep.csv", index=False)
    out = tmp_path / "report"
    assert main(["report", str(run), "--out", str(out)]) == 0
    report = read_json(out / "report.json")
    assert report["runs"] == ["run"]
    assert len(report["pressure_trends"]) == 3
    height = pd.read_csv(out / "height_vs_pressure.csv")
    assert len(height) == 9
    assert height["apex_fit_m"].to_numpy() == pytest.approx(height["apex_m"].to_numpy())
