"""
System identification for the pneumatic models: constrained least-squares fits of the
piecewise pump model, multi-start nonlinear least-squares fits of the actuator transient,
and synthetic data generation in place of tensile-tester recordings.
"""

import itertools
from typing import Optional

import numpy as np
from loguru import logger
from scipy.linalg import null_space
from scipy.optimize import least_squares

from error import DegenerateDataError, FitError, InsufficientSamplesError, SchemaError
from logic.pneumatics import (
    critical_compression,
    fitted_closed_force,
    fitted_compression_force,
    static_actuator_force,
    theoretical_pump_force,
    transient_settling_time,
    transient_step_response,
)
from schema.enums import SampleKind
from schema.pneumatic import ATMOSPHERIC_PA, ActuatorModel, PumpFitCoefficients, PumpGeometry, TankState
from schema.sysid import (
    ActuatorSyntheticParams,
    ForceDisplacementSample,
    PumpFitReport,
    PumpSyntheticParams,
    StepResponseSample,
    TransientFitReport,
    TransientSyntheticParams,
)


MIN_SEGMENT_SAMPLES = 4
MIN_OPEN_SAMPLES = 3

K1_BOUNDS = (1e-10, 1e2)
K2_BOUNDS = (1e-8, 1e2)
TRANSIENT_START_GRID = (
    (1e-6, 1e-4, 1e-2),
    (1e-3, 1e-2, 1e-1),
)


def _valve_opening(geom: PumpGeometry, pressure: float, atmospheric: float) -> float:
    tank = TankState(pressure=max(pressure, atmospheric), atmospheric=atmospheric)
    return geom.stroke - critical_compression(geom, tank)


def _column_scale(design: np.ndarray) -> np.ndarray:
    scale = np.linalg.norm(design, axis=0)
    scale[scale == 0.0] = 1.0
    return scale


def _check_rank(design: np.ndarray, segment: str) -> None:
    if np.linalg.matrix_rank(design / _column_scale(design)) < design.shape[1]:
        raise DegenerateDataError(f"normal equations of segment '{segment}' are rank deficient")


def _solve_segment(design: np.ndarray, target: np.ndarray, segment: str) -> np.ndarray:
    _check_rank(design, segment)
    scale = _column_scale(design)
    scaled = design / scale
    solution, *_ = np.linalg.lstsq(scaled, target, rcond=None)
    return solution / scale


def fit_pump_model(
    samples: list[ForceDisplacementSample],
    geom: PumpGeometry,
    stage1_end: Optional[float] = None,
    stage2_start: Optional[float] = None,
    atmospheric: float = ATMOSPHERIC_PA,
) -> PumpFitReport:
    """
    Fit the piecewise pump model to compression force samples.

    The closed-valve segments are fitted jointly with equality constraints that make
    the force continuous at l1 and l2. Samples past each curve's valve opening point are
    then fitted to the open-valve multiplier ``c4*x^2 + c5*x + c6`` of the closed-valve force at
    each curve's opening point; the report lists how far it strays from 1 at those points.

    :param list[ForceDisplacementSample] samples: Compression samples (speed > 0).
    :param PumpGeometry geom: Pump geometry.
    :param Optional[float] stage1_end: Override for l1 (m).
    :param Optional[float] stage2_start: Override for l2 (m).
    :param float atmospheric: Atmospheric pressure (Pa).
    :return PumpFitReport: Coefficients and residuals.
    :raises DegenerateDataError: If the data cannot determine a segment.
    :raises InsufficientSamplesError: If a segment holds too few samples.
    """
    updates = {}
    if stage1_end is not None:
        updates["stage1_end"] = stage1_end
    if stage2_start is not None:
        updates["stage2_start"] = stage2_start
    if updates:
        geom = PumpGeometry(**{**geom.model_dump(exclude={"initial_volume"}), **updates})

    compressing = [s for s in samples if s.speed > 0.0]
    if len({round(s.x, 12) for s in compressing}) < 2:
        raise DegenerateDataError("pump samples do not span more than one compression distance")

    x = np.array([s.x for s in compressing])
    force = np.array([s.force for s in compressing])
    x_open = np.array([_valve_opening(geom, s.tank_pressure, atmospheric) for s in compressing])
    closed = x < x_open
    l1, l2 = geom.stage1_end, geom.stage2_start

    masks = {
        "stage1": closed & (x < l1),
        "transition": closed & (x >= l1) & (x < l2),
        "stage2": closed & (x >= l2),
    }
    for name, mask in masks.items():
        if int(mask.sum()) < MIN_SEGMENT_SAMPLES:
            raise InsufficientSamplesError(name, int(mask.sum()), MIN_SEGMENT_SAMPLES)

    rows = np.zeros((int(closed.sum()), 7))
    xc = x[closed]
    seg1, seg2, seg3 = (masks[name][closed] for name in ("stage1", "transition", "stage2"))
    rows[seg1, 0], rows[seg1, 1] = xc[seg1], 1.0
    rows[seg2, 2], rows[seg2, 3] = xc[seg2], 1.0
    rows[seg3, 4], rows[seg3, 5], rows[seg3, 6] = xc[seg3] ** 2, xc[seg3], 1.0

    for name, mask, cols in (
        ("stage1", seg1, slice(0, 2)),
        ("transition", seg2, slice(2, 4)),
        ("stage2", seg3, slice(4, 7)),
    ):
        _check_rank(rows[mask][:, cols], name)

    continuity = np.array(
        [
            [l1, 1.0, -l1, -1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, l2, 1.0, -l2 * l2, -l2, -1.0],
        ]
    )
    basis = null_space(continuity)
    weights = _solve_segment(rows @ basis, force[closed], "closed")
    theta = basis @ weights
    coeffs = PumpFitCoefficients(
        m1=theta[0], b1=theta[1], m2=theta[2], b2=theta[3], c1=theta[4], c2=theta[5], c3=theta[6]
    )

    open_mask = ~closed
    open_count = int(open_mask.sum())
    if open_count == 0:
        logger.warning("No open-valve samples, keeping the identity open-valve multiplier")
    elif open_count < MIN_OPEN_SAMPLES:
        raise InsufficientSamplesError("open_valve", open_count, MIN_OPEN_SAMPLES)
    else:
        x_past = x[open_mask]
        base = np.array([fitted_closed_force(coeffs, geom, xo) for xo in x_open[open_mask]])
        design = np.column_stack([x_past * x_past, x_past, np.ones(open_count)])
        c4, c5, c6 = _solve_segment(design, force[open_mask] / base, "open_valve")
        coeffs = coeffs.model_copy(update={"c4": float(c4), "c5": float(c5), "c6": float(c6)})

    masks["open_valve"] = open_mask
    predicted = np.array(
        [
            fitted_compression_force(
                coeffs,
                geom,
                TankState(pressure=max(s.tank_pressure, atmospheric), atmospheric=atmospheric),
                s.x,
            )
            for s in compressing
        ]
    )
    residual = predicted - force
    segment_rmse = {
        name: float(np.sqrt(np.mean(residual[mask] ** 2))) if mask.any() else 0.0
        for name, mask in masks.items()
    }
    report = PumpFitReport(
        coefficients=coeffs,
        segment_rmse=segment_rmse,
        segment_counts={name: int(mask.sum()) for name, mask in masks.items()},
        rmse=float(np.sqrt(np.mean(residual**2))),
        continuity=coeffs.continuity_residuals(geom, np.unique(x_open[open_mask])),
    )
    logger.info(f"Pump fit finished: rmse={report.rmse:.4g} N, segments={report.segment_counts}")
    return report


def _transient_residual(log_k: np.ndarray, t: np.ndarray, target: np.ndarray) -> np.ndarray:
    act = ActuatorModel(k1=float(np.exp(log_k[0])), k2=float(np.exp(log_k[1])), k3=1.0)
    return transient_step_response(act, t)[0] - target


def fit_transient(
    samples: list[StepResponseSample], rmse_threshold: float = 0.05
) -> TransientFitReport:
    """
    Fit ``k1*delta'' + k2*delta' + delta = 1`` to a normalized step response.

    A grid of starting points in (k1, k2) is refined by bounded nonlinear least squares
    over log-coefficients and the best result is kept.

    :param list[StepResponseSample] samples: Samples covering rise and settle.
    :param float rmse_threshold: Largest acceptable RMSE.
    :return TransientFitReport: The fitted coefficients.
    :raises SchemaError: If sample times are not strictly increasing.
    :raises FitError: If the best fit is unstable or too poor.
    """
    t = np.array([s.t for s in samples])
    target = np.array([s.normalized_force for s in samples])
    if t.size < 3 or np.any(np.diff(t) <= 0.0):
        raise SchemaError("step response samples need at least 3 strictly increasing times")

    lower = np.log([K1_BOUNDS[0], K2_BOUNDS[0]])
    upper = np.log([K1_BOUNDS[1], K2_BOUNDS[1]])
    best = None
    starts = list(itertools.product(*TRANSIENT_START_GRID))
    for k1_start, k2_start in starts:
        result = least_squares(
            _transient_residual,
            np.log([k1_start, k2_start]),
            bounds=(lower, upper),
            args=(t, target),
            method="trf",
            ftol=1e-14,
            xtol=1e-14,
            gtol=1e-14,
            max_nfev=4000,
        )
        logger.debug(f"Transient start k1={k1_start:g}, k2={k2_start:g} -> cost {result.cost:.3e}")
        if best is None or result.cost < best.cost:
            best = result

    k1, k2 = (float(v) for v in np.exp(best.x))
    if not (k1 > 0.0 and k2 > 0.0):
        raise FitError(f"best transient fit is unstable: k1={k1}, k2={k2}")
    rmse = float(np.sqrt(np.mean(best.fun**2)))
    if rmse > rmse_threshold:
        raise FitError(f"transient fit rmse {rmse:.4g} exceeds threshold {rmse_threshold:.4g}")

    fitted = ActuatorModel(k1=k1, k2=k2, k3=1.0)
    near_degenerate = (
        k1 <= 10.0 * K1_BOUNDS[0] or transient_settling_time(fitted) <= max(t[0], 0.0)
    )
    if near_degenerate:
        logger.warning("Transient data settles before the first sample, k1 is poorly determined")
    report = TransientFitReport(
        k1=k1, k2=k2, k3=1.0, rmse=rmse, starts=len(starts), near_degenerate=near_degenerate
    )
    logger.info(f"Transient fit finished: k1={k1:.4g}, k2={k2:.4g}, rmse={rmse:.3g}")
    return report


def _noisy(values: np.ndarray, noise: float, rng: np.random.Generator) -> np.ndarray:
    if noise <= 0.0:
        return values
    return values * (1.0 + noise * rng.standard_normal(values.shape))


def generate_synthetic(
    kind: SampleKind,
    params: PumpSyntheticParams | ActuatorSyntheticParams | TransientSyntheticParams,
    noise: float = 0.0,
    seed: int = 0,
) -> list[ForceDisplacementSample] | list[StepResponseSample]:
    """
    Generate a synthetic dataset from a model.

    :param SampleKind kind: Which model to sample.
    :param params: Parameters matching ``kind``.
    :param float noise: Relative standard deviation of multiplicative Gaussian noise.
    :param int seed: Seed of the noise generator.
    :return list: Samples lying on the model curve when ``noise`` is zero.
    """
    rng = np.random.default_rng(seed)
    kind = SampleKind(kind)
    if kind is SampleKind.TRANSIENT:
        t = np.linspace(params.t_start, params.t_end, params.points)
        delta = _noisy(transient_step_response(params.actuator, t)[0], noise, rng)
        return [StepResponseSample(t=float(ti), normalized_force=float(di)) for ti, di in zip(t, delta)]

    samples: list[ForceDisplacementSample] = []
    if kind is SampleKind.PUMP:
        geom = params.geometry
        x = np.linspace(0.0, params.max_compression * geom.stroke, params.points_per_curve)
        for pressure in params.pressures:
            tank = TankState(pressure=pressure, volume=params.tank_volume, atmospheric=params.atmospheric)
            if params.coefficients is not None:
                force = np.array([fitted_compression_force(params.coefficients, geom, tank, xi) for xi in x])
            else:
                force = np.array([theoretical_pump_force(geom, tank, xi) for xi in x])
            force = _noisy(force, noise, rng)
            samples.extend(
                ForceDisplacementSample(
                    x=float(xi), force=float(fi), tank_pressure=pressure, speed=params.speed
                )
                for xi, fi in zip(x, force)
            )
        return samples

    act = params.actuator
    e = np.linspace(0.0, act.stroke, params.points_per_curve)
    for pressure in params.pressures:
        tank = TankState(pressure=pressure, volume=params.tank_volume, atmospheric=params.atmospheric)
        force = _noisy(np.array([static_actuator_force(act, tank, ei) for ei in e]), noise, rng)
        samples.extend(
            ForceDisplacementSample(x=float(ei), force=float(fi), tank_pressure=pressure, speed=0.0)
            for ei, fi in zip(e, force)
        )
    return samples
