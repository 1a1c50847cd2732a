"""
Tests for the sweep manager.
"""

import pytest

import manager
from manager import SweepManager
from schema.scenario import RELEASE_PRESSURE_PA, ScenarioFactory


def test_points_cover_both_axes_in_order():
    scenario = ScenarioFactory.create_scenario(
        {"sweep": {"tank_pressures_kpa": [200.0, 300.0], "masses_kg": [2.0, 2.5, 3.0]}}
    )
    points = SweepManager(scenario).points()
    assert len(points) == 6
    assert points[0] == (pytest.approx(200e3), 2.0)
    assert points[2] == (pytest.approx(200e3), 3.0)
    assert points[3] == (pytest.approx(300e3), 2.0)


def test_missing_axis_holds_scenario_value():
    scenario = ScenarioFactory.create_scenario({"sweep": {"masses_kg": [2.0, 3.0]}})
    assert SweepManager(scenario).points() == [(RELEASE_PRESSURE_PA, 2.0), (RELEASE_PRESSURE_PA, 3.0)]
    only_pressure = ScenarioFactory.create_scenario({"sweep": {"tank_pressures_kpa": [250.0]}})
    assert SweepManager(only_pressure).points() == [(pytest.approx(250e3), 2.2)]


def test_run_sync_keeps_point_order(monkeypatch):
    def fake_point(scenario, pressure, mass):
        return {"tank_pa": pressure, "mass_kg": mass, "feasible": True, "converged": True}

    monkeypatch.setattr(manager, "sweep_point", fake_point)
    scenario = ScenarioFactory.create_scenario(
        {"sweep": {"tank_pressures_kpa": [200.0, 300.0], "masses_kg": [2.0, 3.0]}}
    )
    sweep = SweepManager(scenario, jobs=0)
    assert sweep.jobs == 1
    rows = sweep.run_sync()
    assert [(row["tank_pa"], row["mass_kg"]) for row in rows] == sweep.points()
