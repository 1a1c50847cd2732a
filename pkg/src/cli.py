"""
The hopper command line
-----------------------
``sysid``, ``optimize``, ``simulate`` and ``report`` over one scenario document.
"""

import argparse
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from dotenv import load_dotenv
from loguru import logger
from pydantic import ValidationError
from scipy import stats

from app import HopperExperiment, Plan
from error import (
    ConfigurationError,
    DomainError,
    FitError,
    SchemaError,
    SimulationDivergedError,
    SolverError,
)
from logic.pneumatics import fitted_compression_force, transient_step_response
from logic.sysid import fit_pump_model, fit_transient, generate_synthetic
from manager import SweepManager
from schema.enums import SampleKind
from schema.pneumatic import ATMOSPHERIC_PA, TankState
from schema.scenario import Scenario, ScenarioFactory
from schema.sysid import PumpSyntheticParams, TransientSyntheticParams
from schema.trajectory import TrajSolution
from storage import (
    cycles_frame,
    events_payload,
    ledger_frame,
    point_mass_frame,
    read_force_samples_csv,
    read_json,
    read_step_samples_csv,
    solution_frame,
    trace_frame,
    write_force_samples_csv,
    write_frame,
    write_json,
    write_step_samples_csv,
)


EXIT_CODES: list[tuple[type[Exception], int]] = [
    (ConfigurationError, 2),
    (SchemaError, 2),
    (DomainError, 2),
    (FileNotFoundError, 2),
    (FitError, 3),
    (SolverError, 4),
    (SimulationDivergedError, 5),
]
"""First matching class wins; anything else exits with 1."""

SYNTHETIC_PUMP_GAUGE_KPA = (0.0, 50.0, 100.0, 150.0)
HIP_COLUMNS = ["t_s", "x_hip_m", "z_hip_m", "zdot_hip_mps", "mode", "tank_pa"]
LOG_FORMAT = "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {name}:{function}:{line} - {message}"


def exit_code(error: BaseException) -> int:
    for kind, code in EXIT_CODES:
        if isinstance(error, kind):
            return code
    return 1


def configure_logging(verbose: bool = False) -> None:
    """Stderr sink at INFO (DEBUG when verbose) plus a daily rotating file sink."""
    load_dotenv()
    log_dir = Path(os.getenv("HOPPER_LOG_DIR", "logs"))
    file_level = os.getenv("HOPPER_LOG_LEVEL", "DEBUG")
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if verbose else "INFO")
    logger.add(
        str(log_dir / "hopper_{time:YYYYMMDD}.log"),
        rotation="1 day",
        retention=5,
        level=file_level,
        format=LOG_FORMAT,
        backtrace=True,
        diagnose=True,
    )


def _scenario(args: argparse.Namespace) -> Scenario:
    if args.config:
        return ScenarioFactory.create_from_file(args.config, seed=args.seed, output_dir=args.out)
    logger.info("No --config given, using the default scenario")
    return ScenarioFactory.create_scenario({}, seed=args.seed, output_dir=args.out)


def _output_dir(scenario: Scenario) -> Path:
    out = Path(scenario.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_synthetic(kind: SampleKind, scenario: Scenario, path: Path, noise: float) -> None:
    pneumatic = scenario.pneumatic
    if kind is SampleKind.PUMP:
        params = PumpSyntheticParams(
            geometry=pneumatic.pump,
            tank_volume=pneumatic.tank_volume,
            atmospheric=pneumatic.atmospheric,
            pressures=[pneumatic.atmospheric + kpa * 1e3 for kpa in SYNTHETIC_PUMP_GAUGE_KPA],
        )
        write_force_samples_csv(generate_synthetic(kind, params, noise, scenario.seed), path)
    else:
        params = TransientSyntheticParams(actuator=pneumatic.actuator)
        write_step_samples_csv(generate_synthetic(kind, params, noise, scenario.seed), path)
    logger.info(f"Wrote synthetic {kind.value} samples to {path}")


def cmd_sysid(args: argparse.Namespace) -> int:
    """Fit the pump or transient model to a CSV and write the report and residuals."""
    scenario = _scenario(args)
    out = _output_dir(scenario)
    kind = SampleKind(args.kind)
    path = Path(args.input)
    if args.generate:
        _write_synthetic(kind, scenario, path, args.noise)
    pneumatic = scenario.pneumatic

    if kind is SampleKind.PUMP:
        samples = read_force_samples_csv(path)
        geom = pneumatic.pump
        report = fit_pump_model(samples, geom, atmospheric=pneumatic.atmospheric)
        rows = []
        for s in samples:
            if s.speed <= 0.0:
                continue
            tank = TankState(
                pressure=s.tank_pressure,
                volume=pneumatic.tank_volume,
                atmospheric=pneumatic.atmospheric,
            )
            model = fitted_compression_force(report.coefficients, geom, tank, s.x)
            rows.append(
                {
                    "x_m": s.x,
                    "tank_pa": s.tank_pressure,
                    "force_n": s.force,
                    "model_n": model,
                    "residual_n": s.force - model,
                }
            )
        summary = f"pump fit rmse {report.rmse:.4g} N"
    elif kind is SampleKind.TRANSIENT:
        samples = read_step_samples_csv(path)
        report = fit_transient(samples)
        t = np.array([s.t for s in samples])
        delta = transient_step_response(report.actuator(), t)[0]
        rows = [
            {
                "t_s": s.t,
                "delta": s.normalized_force,
                "model": float(d),
                "residual": s.normalized_force - float(d),
            }
            for s, d in zip(samples, delta)
        ]
        summary = (
            f"transient fit k1={report.k1:.6g} s^2, k2={report.k2:.6g} s, rmse {report.rmse:.3g}"
        )
    else:
        raise ConfigurationError(f"sysid fits pump or transient data, not {kind.value}")

    write_json(report, out / f"fit_{kind.value}.json")
    write_frame(pd.DataFrame(rows), out / f"residuals_{kind.value}.csv")
    print(summary)
    return 0


def _write_plan(plan: Plan, out: Path) -> None:
    write_json(plan.solution, out / f"solution_{plan.preset}.json")
    write_frame(solution_frame(plan.solution), out / f"solution_{plan.preset}.csv")
    if plan.replay:
        write_frame(point_mass_frame(plan.replay), out / f"replay_{plan.preset}.csv")


def _load_solution(path: Path) -> TrajSolution:
    data = read_json(path)
    for phase in ("descent", "ascent"):
        if isinstance(data.get(phase), dict):
            data[phase].pop("duration", None)
    try:
        return TrajSolution.model_validate(data)
    except ValidationError as e:
        raise SchemaError(f"{path}: not a trajectory solution: {e}") from e


def _plan(experiment: HopperExperiment, preset: str, out: Path, reuse: bool = True) -> Plan:
    """Solve one preset, reusing a saved solution of the same problem when asked to."""
    path = out / f"solution_{preset}.json"
    saved: Optional[TrajSolution] = None
    if reuse and path.is_file():
        saved = _load_solution(path)
    try:
        if saved is not None:
            plan = experiment.plan(preset, solution=saved)
            same_tank = abs(plan.problem.tank.pressure - saved.tank_pressure) <= 1.0
            if same_tank and plan.problem.mode is saved.mode:
                return plan
            logger.warning(f"Saved {preset} solution does not match the scenario, solving again")
        plan = experiment.plan(preset)
    except SolverError as e:
        write_json(
            {
                "preset": preset,
                "message": str(e),
                "residuals": e.residuals,
                "best_iterate": np.asarray(e.best_iterate, dtype=float).tolist()
                if e.best_iterate is not None
                else None,
            },
            out / f"solver_failure_{preset}.json",
        )
        raise
    _write_plan(plan, out)
    return plan


def cmd_optimize(args: argparse.Namespace) -> int:
    """Solve every plan the task needs and run the configured sweep."""
    scenario = _scenario(args)
    out = _output_dir(scenario)
    experiment = HopperExperiment(scenario)
    for preset in experiment.presets():
        plan = _plan(experiment, preset, out, reuse=False)
        print(f"{preset}: predicted apex clearance {plan.solution.apex_clearance:.4f} m")
    if not scenario.sweep.empty:
        rows = SweepManager(scenario, jobs=args.jobs).run_sync()
        write_frame(pd.DataFrame(rows), out / "sweep.csv")
        solved = [row for row in rows if row["feasible"]]
        converged = sum(1 for row in solved if row["converged"])
        print(f"sweep: {len(solved)} of {len(rows)} points solved, {converged} converged")
        if solved:
            best = max(solved, key=lambda row: row["apex_replayed_m"])
            print(
                f"best apex {best['apex_replayed_m']:.4f} m "
                f"at {best['tank_pa']:.0f} Pa and {best['mass_kg']} kg"
            )
    write_json(scenario, out / "scenario.json")
    return 0


def _write_trace(trace, out: Path) -> None:
    write_frame(trace_frame(trace), out / "trace.csv")
    write_json(events_payload(trace), out / "events.json")


def cmd_simulate(args: argparse.Namespace) -> int:
    """Simulate the task and write the trace, events, ledger and summary."""
    scenario = _scenario(args)
    out = _output_dir(scenario)
    experiment = HopperExperiment(scenario)
    plans = {preset: _plan(experiment, preset, out) for preset in experiment.presets()}
    try:
        result = experiment.simulate(plans)
    except SimulationDivergedError as e:
        if e.trace is not None:
            _write_trace(e.trace, out)
        raise

    _write_trace(result.trace, out)
    write_frame(ledger_frame(result.ledger), out / "ledger.csv")
    write_frame(cycles_frame(result.trace), out / "cycles.csv")
    summary = {**result.summary, "audit": result.audit.model_dump(mode="json")}
    write_json(summary, out / "summary.json")
    write_json(scenario, out / "scenario.json")

    apex = summary["apex"]
    print(f"{summary['task']}: {summary['cycles']} cycles, {result.trace.termination}")
    if apex["count"]:
        print(f"apex mean {apex['mean']:.4f} m, max {apex['max']:.4f} m, min {apex['min']:.4f} m")
    if "amplification_factor" in summary:
        print(f"amplification factor {summary['amplification_factor']:.2f}")
    return 0


def _height_points(run: Path) -> list[pd.DataFrame]:
    frames = []
    sweep = run / "sweep.csv"
    if sweep.is_file():
        frame = pd.read_csv(sweep)
        frames.append(
            pd.DataFrame(
                {
                    "run": run.name,
                    "source": "sweep",
                    "tank_pa": frame["tank_pa"],
                    "mass_kg": frame["mass_kg"],
                    "apex_m": frame["apex_replayed_m"],
                    "apex_predicted_m": frame["apex_predicted_m"],
                }
            )
        )
    summary = run / "summary.json"
    if summary.is_file():
        data = read_json(summary)
        enhanced = data.get("enhanced_apex") or {}
        if data.get("release_pressure_pa") and enhanced.get("max") is not None:
            frames.append(
                pd.DataFrame(
                    [
                        {
                            "run": run.name,
                            "source": "simulation",
                            "tank_pa": data["release_pressure_pa"],
                            "mass_kg": data["mass_kg"],
                            "apex_m": enhanced["max"],
                            "apex_predicted_m": np.nan,
                        }
                    ]
                )
            )
    return frames


def _finite(value: float) -> Optional[float]:
    return float(value) if np.isfinite(value) else None


def pressure_trends(points: pd.DataFrame) -> list[dict]:
    """Linear apex-vs-gauge-pressure fit for every mass swept over two or more pressures."""
    trends = []
    for mass, group in points.groupby("mass_kg", sort=True):
        if group["tank_kpa_gauge"].nunique() < 2:
            continue
        fit = stats.linregress(group["tank_kpa_gauge"], group["apex_m"])
        trends.append(
            {
                "mass_kg": float(mass),
                "points": len(group),
                "slope_m_per_kpa": float(fit.slope),
                "intercept_m": float(fit.intercept),
                "r_squared": _finite(fit.rvalue**2),
            }
        )
    return trends


def mass_peaks(points: pd.DataFrame) -> list[dict]:
    """Apex maximum over mass for every pressure swept over two or more masses."""
    peaks = []
    for pressure, group in points.groupby("tank_pa", sort=True):
        if group["mass_kg"].nunique() < 2:
            continue
        best = group.sort_values("mass_kg").reset_index(drop=True)
        index = int(best["apex_m"].idxmax())
        peaks.append(
            {
                "tank_pa": float(pressure),
                "mass_kg": float(best.loc[index, "mass_kg"]),
                "apex_m": float(best.loc[index, "apex_m"]),
                "interior": 0 < index < len(best) - 1,
            }
        )
    return peaks


def cmd_report(args: argparse.Namespace) -> int:
    """Aggregate run directories into plot-ready tables."""
    runs = sorted(Path(run) for run in args.runs)
    missing = [str(run) for run in runs if not run.is_dir()]
    if missing:
        raise SchemaError(f"run directories not found: {missing}")
    out = Path(args.out or "report")

    points, ledgers, trajectories = [], [], []
    for run in runs:
        points.extend(_height_points(run))
        if (run / "ledger.csv").is_file():
            ledgers.append(pd.read_csv(run / "ledger.csv").assign(run=run.name))
        if (run / "trace.csv").is_file():
            trace = pd.read_csv(run / "trace.csv", usecols=HIP_COLUMNS)
            trajectories.append(trace.assign(run=run.name))
    if not points and not ledgers and not trajectories:
        raise SchemaError(f"no run outputs in {[str(run) for run in runs]}")

    report: dict = {"runs": [run.name for run in runs], "pressure_trends": [], "mass_peaks": []}
    if points:
        height = pd.concat(points, ignore_index=True).dropna(subset=["apex_m"])
        height["tank_kpa_gauge"] = (height["tank_pa"] - ATMOSPHERIC_PA) / 1e3
        report["pressure_trends"] = pressure_trends(height)
        report["mass_peaks"] = mass_peaks(height)
        trend = {row["mass_kg"]: row for row in report["pressure_trends"]}
        height["apex_fit_m"] = [
            trend[m]["intercept_m"] + trend[m]["slope_m_per_kpa"] * p if m in trend else np.nan
            for m, p in zip(height["mass_kg"], height["tank_kpa_gauge"])
        ]
        by_pressure = height.sort_values(["mass_kg", "tank_pa", "run"])
        write_frame(by_pressure, out / "height_vs_pressure.csv")
        write_frame(height.sort_values(["tank_pa", "mass_kg", "run"]), out / "height_vs_mass.csv")
    if ledgers:
        write_frame(pd.concat(ledgers, ignore_index=True), out / "energy_vs_cycle.csv")
    if trajectories:
        write_frame(pd.concat(trajectories, ignore_index=True), out / "hip_trajectory.csv")
    write_json(report, out / "report.json")

    for row in report["pressure_trends"]:
        slope = row["slope_m_per_kpa"]
        print(f"{row['mass_kg']} kg: apex slope {slope:.3g} m/kPa, R^2 {row['r_squared']}")
    for row in report["mass_peaks"]:
        print(f"{row['tank_pa']:.0f} Pa: apex peaks at {row['mass_kg']} kg ({row['apex_m']:.4f} m)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Scenario YAML or JSON file")
    common.add_argument("--out", help="Output directory, overrides the scenario's")
    common.add_argument("--seed", type=int, help="Seed, overrides the scenario's")
    common.add_argument("--jobs", type=int, default=1, help="Worker processes for sweeps")
    common.add_argument("--verbose", action="store_true", help="Log at DEBUG on stderr")

    parser = argparse.ArgumentParser(description="Pneumatically augmented hopper toolkit")
    commands = parser.add_subparsers(dest="command", required=True)

    sysid = commands.add_parser("sysid", parents=[common], help="Fit a pneumatic model to samples")
    sysid.add_argument("input", help="Sample CSV")
    kinds = [SampleKind.PUMP.value, SampleKind.TRANSIENT.value]
    sysid.add_argument("--kind", choices=kinds, required=True)
    sysid.add_argument("--generate", action="store_true", help="Write synthetic samples first")
    sysid.add_argument("--noise", type=float, default=0.0, help="Relative sample noise")
    sysid.set_defaults(handler=cmd_sysid)

    optimize = commands.add_parser("optimize", parents=[common], help="Solve the stance plans")
    optimize.set_defaults(handler=cmd_optimize)

    simulate = commands.add_parser("simulate", parents=[common], help="Simulate the task")
    simulate.set_defaults(handler=cmd_simulate)

    report = commands.add_parser("report", parents=[common], help="Aggregate run directories")
    report.add_argument("runs", nargs="+", help="Run output directories")
    report.set_defaults(handler=cmd_report)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.handler(args)
    except Exception as e:
        code = exit_code(e)
        if code == 1:
            logger.exception(f"{args.command} failed")
        else:
            logger.error(f"{args.command} failed: {e}")
        return code


if __name__ == "__main__":
    sys.exit(main())
