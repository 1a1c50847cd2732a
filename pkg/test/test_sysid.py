"""
Tests for the pump and transient fits.
"""

import numpy as np
import pytest

from error import DegenerateDataError, FitError, InsufficientSamplesError, SchemaError
from logic.pneumatics import critical_compression, fitted_closed_force, fitted_compression_force
from logic.sysid import fit_pump_model, fit_transient, generate_synthetic
from schema.enums import SampleKind
from schema.pneumatic import ATMOSPHERIC_PA, ActuatorModel, PumpFitCoefficients, PumpGeometry, TankState
from schema.sysid import (
    ActuatorSyntheticParams,
    ForceDisplacementSample,
    PumpSyntheticParams,
    StepResponseSample,
    TransientSyntheticParams,
)


def create_test_coefficients() -> PumpFitCoefficients:
    """Coefficients continuous at the default breakpoints (0.05 m and 0.06 m)."""
    return PumpFitCoefficients(
        m1=200.0, b1=15.0, m2=400.0, b2=5.0, c1=2000.0, c2=100.0, c3=15.8, c4=20.0, c5=-1.0, c6=1.05
    )


TEST_PRESSURES = [ATMOSPHERIC_PA + 100e3, ATMOSPHERIC_PA + 200e3, ATMOSPHERIC_PA + 300e3]


def create_test_pump_samples(noise: float = 0.0) -> list[ForceDisplacementSample]:
    params = PumpSyntheticParams(pressures=TEST_PRESSURES, coefficients=create_test_coefficients())
    return generate_synthetic(SampleKind.PUMP, params, noise=noise, seed=7)


def test_test_coefficients_are_continuous():
    jumps = create_test_coefficients().continuity_residuals(PumpGeometry())
    assert jumps["stage1_end"] == pytest.approx(0.0, abs=1e-12)
    assert jumps["stage2_start"] == pytest.approx(0.0, abs=1e-12)
    assert jumps["valve_opening"] == 0.0


def test_open_valve_multiplier_is_polynomial_in_compression():
    coeffs = create_test_coefficients()
    geom = PumpGeometry()
    tank = TankState(pressure=TEST_PRESSURES[1])
    x_c = geom.stroke - critical_compression(geom, tank)
    for x in (x_c, 0.5 * (x_c + geom.stroke), geom.stroke):
        expected = fitted_closed_force(coeffs, geom, x_c) * (20.0 * x * x - x + 1.05)
        assert fitted_compression_force(coeffs, geom, tank, x) == pytest.approx(expected, rel=1e-12)
    jump = coeffs.continuity_residuals(geom, [x_c])["valve_opening"]
    assert jump == pytest.approx(abs(20.0 * x_c * x_c - x_c + 0.05), rel=1e-12)


def test_pump_fit_recovers_noiseless_coefficients():
    geom = PumpGeometry()
    report = fit_pump_model(create_test_pump_samples(), geom)
    expected = create_test_coefficients().as_vector()
    assert report.coefficients.as_vector() == pytest.approx(expected, rel=1e-6, abs=1e-6)
    assert report.rmse == pytest.approx(0.0, abs=1e-8)
    assert all(count > 0 for count in report.segment_counts.values())
    assert report.continuity["stage1_end"] == pytest.approx(0.0, abs=1e-9)
    assert report.continuity["stage2_start"] == pytest.approx(0.0, abs=1e-9)
    openings = [geom.stroke - critical_compression(geom, TankState(pressure=p)) for p in TEST_PRESSURES]
    true_jump = create_test_coefficients().continuity_residuals(geom, openings)["valve_opening"]
    assert report.continuity["valve_opening"] == pytest.approx(true_jump, rel=1e-6)


def test_pump_fit_stays_continuous_with_noise():
    geom = PumpGeometry()
    report = fit_pump_model(create_test_pump_samples(noise=0.02), geom)
    jumps = report.continuity
    assert jumps["stage1_end"] == pytest.approx(0.0, abs=1e-9)
    assert jumps["stage2_start"] == pytest.approx(0.0, abs=1e-9)
    openings = [geom.stroke - critical_compression(geom, TankState(pressure=p)) for p in TEST_PRESSURES]
    true_jump = create_test_coefficients().continuity_residuals(geom, openings)["valve_opening"]
    assert jumps["valve_opening"] == pytest.approx(true_jump, abs=0.05)


def test_pump_fit_rejects_single_distance():
    samples = [
        ForceDisplacementSample(x=0.03, force=20.0 + i, tank_pressure=ATMOSPHERIC_PA + 1e5, speed=0.01)
        for i in range(8)
    ]
    with pytest.raises(DegenerateDataError):
        fit_pump_model(samples, PumpGeometry())


def test_pump_fit_reports_empty_segment():
    samples = [
        ForceDisplacementSample(x=x, force=15.0 + 200.0 * x, tank_pressure=ATMOSPHERIC_PA + 2e5, speed=0.01)
        for x in np.linspace(0.0, 0.04, 10)
    ]
    with pytest.raises(InsufficientSamplesError) as e:
        fit_pump_model(samples, PumpGeometry())
    assert e.value.segment == "transition"
    assert e.value.count == 0


def test_pump_fit_ignores_extension_samples():
    samples = create_test_pump_samples()
    extending = [s.model_copy(update={"speed": -0.01, "force": 0.0}) for s in samples]
    report = fit_pump_model(samples + extending, PumpGeometry())
    assert report.rmse == pytest.approx(0.0, abs=1e-8)


def test_transient_fit_recovers_coefficients():
    params = TransientSyntheticParams(actuator=ActuatorModel(k1=2.5e-4, k2=2.0e-2))
    samples = generate_synthetic(SampleKind.TRANSIENT, params)
    report = fit_transient(samples)
    assert report.k1 == pytest.approx(2.5e-4, rel=0.01)
    assert report.k2 == pytest.approx(2.0e-2, rel=0.01)
    assert report.overshoot
    assert report.rmse < 1e-6


def test_transient_fit_rejects_unsorted_times():
    samples = [
        StepResponseSample(t=0.0, normalized_force=0.0),
        StepResponseSample(t=0.02, normalized_force=0.5),
        StepResponseSample(t=0.01, normalized_force=0.9),
    ]
    with pytest.raises(SchemaError):
        fit_transient(samples)


def test_transient_fit_rejects_poor_fit():
    samples = [
        StepResponseSample(t=0.01 * i, normalized_force=2.0 if i % 2 else 0.0) for i in range(40)
    ]
    with pytest.raises(FitError):
        fit_transient(samples)


def test_synthetic_actuator_curves():
    params = ActuatorSyntheticParams(pressures=[303370.0], points_per_curve=5)
    samples = generate_synthetic(SampleKind.ACTUATOR, params)
    assert len(samples) == 5
    assert samples[0].force == pytest.approx(251.7, abs=0.1)
    assert all(s.speed == 0.0 for s in samples)
    forces = [s.force for s in samples]
    assert forces == sorted(forces, reverse=True)


def test_synthetic_noise_is_seeded():
    params = TransientSyntheticParams(points=20)
    first = generate_synthetic(SampleKind.TRANSIENT, params, noise=0.05, seed=3)
    second = generate_synthetic(SampleKind.TRANSIENT, params, noise=0.05, seed=3)
    assert first == second
