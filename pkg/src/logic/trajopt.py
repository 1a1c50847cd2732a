"""
Trapezoidal direct collocation of the point-mass ground phase.

The stance is split into a descending phase (touchdown to full compression) and an
ascending phase (full compression to liftoff). Each phase carries node values of the leg
length ``L``, its rate ``V`` and the motor leg force ``F``, plus a free duration. Variables
are scaled to order one before they reach the solver backend.
"""

import math
from typing import Optional

import numpy as np
from loguru import logger

from error import InfeasibleProblemError, SolverError
from logic.dynamics import leg_range, nominal_leg_lever, point_mass_transmission
from logic.nlp import BaseNlpBackend, NlpResult, NonlinearProgram, create_backend
from logic.pneumatics import transient_rise_time, transient_step_response
from logic.point_mass import PointMassSimulator, actuator_leg_force, pump_leg_force
from schema.enums import HopObjective, PneumaticMode
from schema.pneumatic import PneumaticConfig, TankState
from schema.robot import RobotModel
from schema.trajectory import ForceSchedule, PhaseSolution, TrajOptConfig, TrajOptProblem, TrajSolution


RATE_BOUND = 20.0
LENGTH_SCALE = 0.1
DURATION_SCALE = 0.1
MIN_GUESS_SPEED = 0.25
COARSE_NODES = 10
RESTARTS = 3

PRESETS: dict[str, dict] = {
    "periodic": {"objective": HopObjective.PERIODIC, "pneumatic_mode": PneumaticMode.PUMP_ONLY},
    "enhanced": {"objective": HopObjective.EXPLOSIVE, "pneumatic_mode": PneumaticMode.PUMP_ACTUATOR},
    "motor-only-max": {"objective": HopObjective.EXPLOSIVE, "pneumatic_mode": PneumaticMode.NONE},
}


def preset_config(base: TrajOptConfig, preset: str) -> TrajOptConfig:
    """
    Apply a named task preset to a base configuration.

    :param TrajOptConfig base: User settings.
    :param str preset: ``periodic``, ``enhanced`` or ``motor-only-max``.
    :return TrajOptConfig: The configuration with the preset's objective and pneumatic mode.
    :raises InfeasibleProblemError: If the preset is unknown.
    """
    if preset not in PRESETS:
        raise InfeasibleProblemError(
            f"unknown trajectory preset {preset!r}, expected one of {sorted(PRESETS)}"
        )
    return base.model_copy(update=PRESETS[preset])


def build_problem(robot: RobotModel, pneumatic: PneumaticConfig, cfg: TrajOptConfig) -> TrajOptProblem:
    """
    Assemble the ground-phase problem from the robot, the pneumatics and user settings.

    Motor limits reach the leg through the nominal lever: stall force
    ``knee_torque_limit / lever`` and no-load leg speed ``motor_speed / belt_ratio * lever``.

    :param RobotModel robot: The robot.
    :param PneumaticConfig pneumatic: The pneumatics; disconnected for ``NONE`` mode.
    :param TrajOptConfig cfg: User settings.
    :return TrajOptProblem: The problem.
    :raises InfeasibleProblemError: If the apex lies below the extended leg, the duration
        bounds are empty or a periodic liftoff is faster than the motors can sustain.
    """
    leg_min, leg_max, _ = leg_range(robot)
    apex = cfg.apex_height if cfg.apex_height is not None else leg_max + cfg.apex_clearance
    if apex < leg_max:
        raise InfeasibleProblemError(f"apex height {apex:.4f} m lies below the extended leg {leg_max:.4f} m")
    if cfg.min_duration >= cfg.max_duration:
        raise InfeasibleProblemError(
            f"min_duration {cfg.min_duration} s must be smaller than max_duration {cfg.max_duration} s"
        )
    if cfg.pneumatic_mode is PneumaticMode.NONE:
        pneumatic = pneumatic.model_copy(update={"connected": False})
    elif not pneumatic.connected:
        raise InfeasibleProblemError(f"{cfg.pneumatic_mode.value} mode needs connected pneumatics")

    lever = nominal_leg_lever(robot)
    pressure = cfg.tank_pressure if cfg.tank_pressure is not None else pneumatic.initial_pressure
    if pressure < pneumatic.atmospheric:
        raise InfeasibleProblemError(f"tank pressure {pressure} Pa lies below atmospheric")
    tank = TankState(pressure=pressure, volume=pneumatic.tank_volume, atmospheric=pneumatic.atmospheric)
    lead = cfg.valve_lead if cfg.valve_lead is not None else transient_rise_time(pneumatic.actuator)
    problem = TrajOptProblem(
        mass=robot.projected_mass,
        gravity=robot.gravity,
        leg_min=leg_min,
        leg_max=leg_max,
        apex_height=apex,
        transmission=point_mass_transmission(robot),
        descent_nodes=cfg.descent_nodes,
        ascent_nodes=cfg.ascent_nodes,
        force_limit=cfg.force_scale * robot.knee_torque_limit / lever,
        speed_limit=robot.motor_speed_limit / robot.belt_ratio * lever,
        mode=cfg.pneumatic_mode,
        objective=cfg.objective,
        cost_weight=cfg.cost_weight,
        pneumatic=pneumatic,
        tank=tank,
        valve_lead=lead,
        tolerance=cfg.tolerance,
        stationarity_tolerance=cfg.stationarity_tolerance,
        max_iterations=cfg.max_iterations,
        backend=cfg.backend,
        smoothing=cfg.smoothing,
        min_duration=cfg.min_duration,
        max_duration=cfg.max_duration,
    )
    logger.debug(
        f"Built {problem.objective.value}/{problem.mode.value} problem: "
        f"L in [{leg_min:.4f}, {leg_max:.4f}] m, apex {apex:.4f} m, "
        f"force limit {problem.force_limit:.1f} N, speed limit {problem.speed_limit:.3f} m/s"
    )
    if problem.objective is HopObjective.PERIODIC and problem.mode is not PneumaticMode.PUMP_ACTUATOR:
        ceiling = reachable_leg_speed(problem)
        if -problem.touchdown_velocity >= ceiling:
            highest = leg_max + ceiling * ceiling / (2.0 * problem.gravity)
            departure = -problem.touchdown_velocity
            raise InfeasibleProblemError(
                f"a periodic hop to apex {apex:.4f} m needs liftoff at {departure:.3f} m/s, "
                f"above the {ceiling:.3f} m/s the motors can still push the hip at; "
                f"periodic apexes must stay below {highest:.4f} m"
            )
    return problem


def reachable_leg_speed(problem: TrajOptProblem) -> float:
    """
    Fastest leg extension at which the motor still holds the hip against gravity.

    Above it the envelope caps the motor force below the weight (plus the extension friction
    in ``PUMP_ONLY`` mode), so the hip decelerates on every node and a periodic liftoff
    at that speed is out of reach.

    :param TrajOptProblem problem: The problem.
    :return float: Leg speed (m/s).
    """
    load = problem.weight
    if problem.mode is PneumaticMode.PUMP_ONLY:
        load += problem.transmission * problem.pneumatic.extension_friction
    u = load / problem.force_limit
    if u >= 1.0:
        return 0.0
    w = problem.smoothing
    return problem.speed_limit * (1.0 - u + w * w / (4.0 * u))


def pneumatic_leg_force(
    problem: TrajOptProblem, descending: bool, length: float, t_phase: float, tank: Optional[TankState] = None
) -> tuple[float, float, float]:
    """
    Pneumatic leg force of a phase node and its partial derivatives.

    The pump acts while descending. While ascending the leg sees the actuator scaled by the
    transient response ``delta(valve_lead + t_phase)`` in ``PUMP_ACTUATOR`` mode and the
    extension friction otherwise.

    :param TrajOptProblem problem: The problem.
    :param bool descending: Phase of the node.
    :param float length: Leg length (m).
    :param float t_phase: Time since the phase start (s).
    :param Optional[TankState] tank: Tank to evaluate with, the problem's tank when absent.
    :return tuple[float, float, float]: ``(F, dF/dL, dF/dt)``.
    """
    tank = tank or problem.tank
    if problem.mode is PneumaticMode.NONE:
        return 0.0, 0.0, 0.0
    if descending:
        force, slope = pump_leg_force(problem, tank, length)
        return force, slope, 0.0
    if problem.mode is PneumaticMode.PUMP_ONLY:
        return -problem.transmission * problem.pneumatic.extension_friction, 0.0, 0.0
    force, slope = actuator_leg_force(problem, tank, length)
    delta, delta_dot = transient_step_response(problem.pneumatic.actuator, problem.valve_lead + t_phase)
    return force * float(delta), slope * float(delta), force * float(delta_dot)


def _soft_positive(z: np.ndarray, width: float) -> tuple[np.ndarray, np.ndarray]:
    root = np.sqrt(z * z + width * width)
    return 0.5 * (z + root), 0.5 * (1.0 + z / root)


def _trapezoid_profile(
    duration: float, start: tuple[float, float], accel: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    h = duration / (accel.size - 1)
    rate = start[1] + h * np.concatenate([[0.0], np.cumsum(0.5 * (accel[:-1] + accel[1:]))])
    length = start[0] + h * np.concatenate([[0.0], np.cumsum(0.5 * (rate[:-1] + rate[1:]))])
    return length, rate


def _shaped_profile(
    duration: float,
    start: tuple[float, float],
    end: tuple[float, float],
    fixed: np.ndarray,
    shapes: tuple[np.ndarray, np.ndarray],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Acceleration ``fixed + a * shapes[0] + b * shapes[1]`` whose trapezoidal integral ends at ``end``."""
    base_length, base_rate = _trapezoid_profile(duration, start, fixed)
    columns = []
    for shape in shapes:
        length, rate = _trapezoid_profile(duration, (0.0, 0.0), shape)
        columns.append((length[-1], rate[-1]))
    target = np.array([end[0] - base_length[-1], end[1] - base_rate[-1]])
    a, b = np.linalg.solve(np.array(columns).T, target)
    accel = fixed + a * shapes[0] + b * shapes[1]
    length, rate = _trapezoid_profile(duration, start, accel)
    return length, rate, accel


class Transcription:
    """
    Decision vector layout, scaling and the constraint and objective functions of a problem.

    Physical variables are ``p = z * scale``; the program is posed over ``z``.

    :param TrajOptProblem problem: The problem.
    """

    def __init__(self, problem: TrajOptProblem):
        self.problem = problem
        self.nodes = (problem.descent_nodes, problem.ascent_nodes)
        self.size = 3 * sum(self.nodes) + 2
        self.scale = np.empty(self.size)
        for phase in (0, 1):
            i_l, i_v, i_f = self.indices(phase)
            self.scale[i_l] = LENGTH_SCALE
            self.scale[i_v] = 1.0
            self.scale[i_f] = problem.weight
            self.scale[self.duration_index(phase)] = DURATION_SCALE

    def indices(self, phase: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = self.nodes[phase]
        base = 0 if phase == 0 else 3 * self.nodes[0]
        return tuple(np.arange(base + k * n, base + (k + 1) * n) for k in range(3))

    def duration_index(self, phase: int) -> int:
        return self.size - 2 + phase

    def _phase(self, p: np.ndarray, phase: int):
        i_l, i_v, i_f = self.indices(phase)
        duration = p[self.duration_index(phase)]
        n = self.nodes[phase]
        tau = np.linspace(0.0, 1.0, n)
        forces = np.array(
            [
                pneumatic_leg_force(self.problem, phase == 0, length, duration * s)
                for length, s in zip(p[i_l], tau)
            ]
        )
        return i_l, i_v, i_f, duration, tau, forces[:, 0], forces[:, 1], forces[:, 2]

    def defects(self, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Trapezoidal defects of ``L' = V`` and ``m V' = F + F_pneu - m g`` and their Jacobian."""
        m, g = self.problem.mass, self.problem.gravity
        rows = 2 * (sum(self.nodes) - 2)
        c = np.zeros(rows)
        jac = np.zeros((rows, self.size))
        base = 0
        for phase in (0, 1):
            i_l, i_v, i_f, duration, tau, f_pn, df_dl, df_dt = self._phase(p, phase)
            i_t = self.duration_index(phase)
            n = self.nodes[phase]
            dh = 1.0 / (n - 1)
            h = duration * dh
            length, rate, force = p[i_l], p[i_v], p[i_f]
            accel = (force + f_pn) / m - g
            accel_dt = df_dt * tau / m
            lo, hi = slice(0, n - 1), slice(1, n)
            rows_l = base + np.arange(n - 1)
            rows_v = rows_l + n - 1

            c[rows_l] = length[hi] - length[lo] - 0.5 * h * (rate[lo] + rate[hi])
            jac[rows_l, i_l[hi]] = 1.0
            jac[rows_l, i_l[lo]] = -1.0
            jac[rows_l, i_v[lo]] = -0.5 * h
            jac[rows_l, i_v[hi]] = -0.5 * h
            jac[rows_l, i_t] = -0.5 * dh * (rate[lo] + rate[hi])

            c[rows_v] = rate[hi] - rate[lo] - 0.5 * h * (accel[lo] + accel[hi])
            jac[rows_v, i_v[hi]] = 1.0
            jac[rows_v, i_v[lo]] = -1.0
            jac[rows_v, i_l[lo]] = -0.5 * h * df_dl[lo] / m
            jac[rows_v, i_l[hi]] = -0.5 * h * df_dl[hi] / m
            jac[rows_v, i_f[lo]] = -0.5 * h / m
            jac[rows_v, i_f[hi]] = -0.5 * h / m
            jac[rows_v, i_t] = -0.5 * dh * (accel[lo] + accel[hi]) - 0.5 * h * (accel_dt[lo] + accel_dt[hi])
            base += 2 * (n - 1)
        return c, jac

    def boundary(self, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Touchdown, full compression, ascent start and terminal conditions."""
        problem = self.problem
        g = problem.gravity
        d_l, d_v, _ = self.indices(0)
        a_l, a_v, a_f = self.indices(1)
        rows = [
            (p[d_l[0]] - problem.leg_max, {d_l[0]: 1.0}),
            (p[d_v[0]] - problem.touchdown_velocity, {d_v[0]: 1.0}),
            (p[d_l[-1]] - problem.leg_min, {d_l[-1]: 1.0}),
            (p[d_v[-1]], {d_v[-1]: 1.0}),
            (p[a_l[0]] - problem.leg_min, {a_l[0]: 1.0}),
            (p[a_v[0]], {a_v[0]: 1.0}),
        ]
        if problem.objective is HopObjective.PERIODIC:
            length, rate = p[a_l[-1]], p[a_v[-1]]
            rows.append(
                (
                    (rate * rate - 2.0 * g * (problem.apex_height - length)) / (2.0 * g),
                    {a_v[-1]: rate / g, a_l[-1]: 1.0},
                )
            )
            i_t = self.duration_index(1)
            f_pn, df_dl, df_dt = pneumatic_leg_force(problem, False, length, p[i_t])
            weight = problem.weight
            rows.append(
                (
                    (p[a_f[-1]] + f_pn) / weight,
                    {a_f[-1]: 1.0 / weight, a_l[-1]: df_dl / weight, i_t: df_dt / weight},
                )
            )
        else:
            rows.append((p[a_l[-1]] - problem.leg_max, {a_l[-1]: 1.0}))

        c = np.array([value for value, _ in rows])
        jac = np.zeros((len(rows), self.size))
        for row, (_, entries) in enumerate(rows):
            for column, value in entries.items():
                jac[row, column] += value
        return c, jac

    def path(self, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """
        Ground force non-negativity and the motor torque-speed envelope at every node.

        A periodic liftoff node drops its ground force row, the boundary sets that force to zero.
        """
        problem = self.problem
        weight, limit, speed = problem.weight, problem.force_limit, problem.speed_limit
        blocks, jacobians = [], []
        for phase in (0, 1):
            i_l, i_v, i_f, _, tau, f_pn, df_dl, df_dt = self._phase(p, phase)
            n = self.nodes[phase]
            nodes = np.arange(n)
            rate, force = p[i_v], p[i_f]
            jac = np.zeros((3 * n, self.size))

            grf = (force + f_pn) / weight
            jac[nodes, i_f] = 1.0 / weight
            jac[nodes, i_l] = df_dl / weight
            jac[nodes, self.duration_index(phase)] = df_dt * tau / weight

            up, up_slope = _soft_positive(1.0 - rate / speed, problem.smoothing)
            upper = up - force / limit
            jac[n + nodes, i_v] = -up_slope / speed
            jac[n + nodes, i_f] = -1.0 / limit

            down, down_slope = _soft_positive(1.0 + rate / speed, problem.smoothing)
            lower = down + force / limit
            jac[2 * n + nodes, i_v] = down_slope / speed
            jac[2 * n + nodes, i_f] = 1.0 / limit

            keep = np.ones(3 * n, dtype=bool)
            if phase == 1 and problem.objective is HopObjective.PERIODIC:
                # the liftoff ground force is pinned by a boundary row
                keep[n - 1] = False
            blocks.append(np.concatenate([grf, upper, lower])[keep])
            jacobians.append(jac[keep])
        return np.concatenate(blocks), np.vstack(jacobians)

    def effort(self, p: np.ndarray) -> tuple[float, np.ndarray]:
        """Trapezoidal integral of ``(F / m g)^2`` over both phases and its gradient."""
        weight = self.problem.weight
        total = 0.0
        grad = np.zeros(self.size)
        for phase in (0, 1):
            _, _, i_f = self.indices(phase)
            i_t = self.duration_index(phase)
            n = self.nodes[phase]
            w = np.full(n, p[i_t] / (n - 1))
            w[[0, -1]] *= 0.5
            u = p[i_f] / weight
            value = float(w @ (u * u))
            total += value
            grad[i_f] = 2.0 * w * u / weight
            grad[i_t] = value / p[i_t]
        return total, grad

    def objective(self, p: np.ndarray) -> tuple[float, np.ndarray]:
        problem = self.problem
        effort, grad = self.effort(p)
        if problem.objective is HopObjective.PERIODIC:
            return effort, grad
        a_l, a_v, _ = self.indices(1)
        g = problem.gravity
        height = p[a_v[-1]] ** 2 / (2.0 * g) + p[a_l[-1]]
        grad = problem.cost_weight * grad
        grad[a_v[-1]] -= p[a_v[-1]] / g / height
        grad[a_l[-1]] -= 1.0 / height
        return problem.cost_weight * effort - math.log(height), grad

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        problem = self.problem
        lower = np.empty(self.size)
        upper = np.empty(self.size)
        for phase in (0, 1):
            i_l, i_v, i_f = self.indices(phase)
            lower[i_l], upper[i_l] = problem.leg_min, problem.leg_max
            # the leg shortens while descending and lengthens while ascending
            lower[i_v], upper[i_v] = (-RATE_BOUND, 0.0) if phase == 0 else (0.0, RATE_BOUND)
            lower[i_f], upper[i_f] = -problem.force_limit, problem.force_limit
            i_t = self.duration_index(phase)
            lower[i_t], upper[i_t] = problem.min_duration, problem.max_duration
        return lower / self.scale, upper / self.scale

    def initial_guess(self) -> np.ndarray:
        """
        Node values that satisfy the collocation defects and the boundary states exactly.

        Each phase gets a low-order acceleration profile whose trapezoidal integral meets the
        boundary states; the motor force is whatever produces it on top of the pneumatics,
        clipped to the stall force. The descent acceleration is linear in phase time. The
        ascent one ends at ``-g`` so the hip leaves the ground with zero ground force.
        """
        problem = self.problem
        g = problem.gravity
        departure = abs(problem.touchdown_velocity)
        stroke = problem.leg_max - problem.leg_min
        p = np.empty(self.size)
        for phase in (0, 1):
            n = self.nodes[phase]
            tau = np.linspace(0.0, 1.0, n)
            if phase == 0:
                duration = 2.0 * stroke / max(departure, MIN_GUESS_SPEED)
                start, end = (problem.leg_max, problem.touchdown_velocity), (problem.leg_min, 0.0)
                fixed, shapes = np.zeros(n), (1.0 - tau, tau)
            else:
                rise = 2.0 * departure / 3.0
                duration = 3.0 / g * (math.sqrt(rise * rise + 2.0 * g * stroke / 3.0) - rise)
                start, end = (problem.leg_min, 0.0), (problem.leg_max, departure)
                fixed, shapes = -g * tau, (1.0 - tau, tau * (1.0 - tau))
            duration = min(max(duration, problem.min_duration), problem.max_duration)
            length, rate, accel = _shaped_profile(duration, start, end, fixed, shapes)

            i_l, i_v, i_f = self.indices(phase)
            f_pn = np.array(
                [pneumatic_leg_force(problem, phase == 0, x, duration * s)[0] for x, s in zip(length, tau)]
            )
            force = problem.mass * (accel + g) - f_pn
            p[i_l] = np.clip(length, problem.leg_min, problem.leg_max)
            p[i_v] = rate
            p[i_f] = np.clip(force, -problem.force_limit, problem.force_limit)
            p[self.duration_index(phase)] = duration
        return p / self.scale

    def program(self) -> NonlinearProgram:
        s = self.scale

        def objective(z: np.ndarray) -> tuple[float, np.ndarray]:
            value, grad = self.objective(z * s)
            return value, grad * s

        def eq(z: np.ndarray) -> np.ndarray:
            return np.concatenate([self.defects(z * s)[0], self.boundary(z * s)[0]])

        def eq_jacobian(z: np.ndarray) -> np.ndarray:
            return np.vstack([self.defects(z * s)[1], self.boundary(z * s)[1]]) * s

        def ineq(z: np.ndarray) -> np.ndarray:
            return self.path(z * s)[0]

        def ineq_jacobian(z: np.ndarray) -> np.ndarray:
            return self.path(z * s)[1] * s

        lower, upper = self.bounds()
        return NonlinearProgram(
            objective=objective,
            eq=eq,
            eq_jacobian=eq_jacobian,
            ineq=ineq,
            ineq_jacobian=ineq_jacobian,
            lower=lower,
            upper=upper,
        )

    def phase_solution(self, p: np.ndarray, phase: int) -> PhaseSolution:
        i_l, i_v, i_f, duration, tau, f_pn, _, _ = self._phase(p, phase)
        return PhaseSolution(times=duration * tau, L=p[i_l], V=p[i_v], F=p[i_f], F_pneu=f_pn)

    def residuals(self, program: NonlinearProgram, z: np.ndarray) -> dict[str, float]:
        """Largest defect in physical units, largest constraint violation and the stationarity residual."""
        return {
            "max_defect": float(np.max(np.abs(self.defects(z * self.scale)[0]))),
            "max_violation": program.max_violation(z),
            "stationarity": program.stationarity(z, active_tolerance=max(self.problem.tolerance, 1e-8)),
        }


def _feasible(problem: TrajOptProblem, residuals: dict[str, float]) -> bool:
    return residuals["max_defect"] <= problem.tolerance and residuals["max_violation"] <= problem.tolerance


def _attempt(
    transcription: Transcription, backend: BaseNlpBackend, z0: np.ndarray
) -> tuple[NlpResult, dict[str, float], int]:
    """Run the backend from ``z0`` and restart it from its last iterate until it is feasible and settled."""
    problem = transcription.problem
    program = transcription.program()
    best, best_residuals, iterations = None, None, 0
    z = z0
    for attempt in range(RESTARTS + 1):
        result = backend.solve(program, z)
        iterations += result.iterations
        residuals = transcription.residuals(program, result.x)
        feasible = _feasible(problem, residuals)
        if best is None or feasible or residuals["max_violation"] < best_residuals["max_violation"]:
            best, best_residuals = result, residuals
        if feasible and result.success:
            break
        logger.debug(
            f"{backend.name} attempt {attempt + 1} on {sum(transcription.nodes)} nodes stopped "
            f"({result.message}): violation {residuals['max_violation']:.3e}"
        )
        z = result.x
    return best, best_residuals, iterations


def solve(
    problem: TrajOptProblem,
    initial_guess: Optional[np.ndarray] = None,
    backend_options: Optional[dict] = None,
) -> TrajSolution:
    """
    Solve the collocation problem.

    Without a starting point, problems with many nodes are first solved on a coarse grid and
    the coarse solution is resampled onto the full one. The backend is restarted from its
    last iterate a few times when it stops short.

    :param TrajOptProblem problem: The problem.
    :param Optional[np.ndarray] initial_guess: Physical decision vector to start from;
        the coarse-grid solution or :meth:`Transcription.initial_guess` when absent.
    :param Optional[dict] backend_options: Extra backend settings.
    :return TrajSolution: The solution with its residuals; ``converged`` is false when the
        stationarity residual stays above its tolerance.
    :raises SolverError: If the defects or constraint violations stay above tolerance.
    """
    transcription = Transcription(problem)
    backend = create_backend(
        problem.backend, problem.max_iterations, problem.tolerance, **(backend_options or {})
    )
    iterations = 0
    if initial_guess is not None:
        z0 = initial_guess / transcription.scale
    elif min(transcription.nodes) >= 2 * COARSE_NODES:
        coarse = Transcription(
            problem.model_copy(update={"descent_nodes": COARSE_NODES, "ascent_nodes": COARSE_NODES})
        )
        result, residuals, iterations = _attempt(coarse, backend, coarse.initial_guess())
        if _feasible(problem, residuals):
            p = result.x * coarse.scale
            phases = (coarse.phase_solution(p, 0), coarse.phase_solution(p, 1))
            z0 = _resample(transcription, phases) / transcription.scale
        else:
            logger.debug(f"Coarse grid stayed infeasible ({residuals['max_violation']:.3e}), starting over")
            z0 = transcription.initial_guess()
    else:
        z0 = transcription.initial_guess()

    result, residuals, spent = _attempt(transcription, backend, z0)
    iterations += spent
    p = result.x * transcription.scale
    if not _feasible(problem, residuals):
        raise SolverError(
            f"{backend.name} did not reach a feasible {problem.objective.value} trajectory "
            f"after {iterations} iterations ({result.message}): "
            f"defect {residuals['max_defect']:.3e}, violation {residuals['max_violation']:.3e}",
            best_iterate=p,
            residuals=residuals,
        )
    converged = result.success and residuals["stationarity"] <= problem.stationarity_tolerance
    if not converged:
        logger.warning(
            f"{backend.name} plan is feasible but not converged ({result.message}): stationarity "
            f"{residuals['stationarity']:.3e} against {problem.stationarity_tolerance:.1e}"
        )

    descent = transcription.phase_solution(p, 0)
    ascent = transcription.phase_solution(p, 1)
    apex = float(ascent.L[-1] + ascent.V[-1] ** 2 / (2.0 * problem.gravity))
    solution = TrajSolution(
        descent=descent,
        ascent=ascent,
        apex_height=apex,
        apex_clearance=apex - problem.leg_max,
        objective_value=result.fun,
        residuals=residuals,
        iterations=iterations,
        tank_pressure=problem.tank.pressure,
        mode=problem.mode,
        objective=problem.objective,
        backend=backend.name,
        converged=converged,
    )
    if problem.mode is PneumaticMode.PUMP_ACTUATOR:
        solution = solution.model_copy(update={"valve_trigger_time": valve_timing(problem, solution)})
    logger.info(
        f"Solved {problem.objective.value}/{problem.mode.value} hop: apex clearance "
        f"{solution.apex_clearance * 100:.2f} cm, stance {descent.duration + ascent.duration:.4f} s, "
        f"{iterations} iterations"
    )
    return solution


def _resample(transcription: Transcription, phases: tuple[PhaseSolution, PhaseSolution]) -> np.ndarray:
    p = np.empty(transcription.size)
    for phase, part in enumerate(phases):
        i_l, i_v, i_f = transcription.indices(phase)
        tau = np.linspace(0.0, 1.0, transcription.nodes[phase])
        source = part.times / part.duration
        p[i_l] = np.interp(tau, source, part.L)
        p[i_v] = np.interp(tau, source, part.V)
        p[i_f] = np.interp(tau, source, part.F)
        p[transcription.duration_index(phase)] = part.duration
    return p


def decision_vector(problem: TrajOptProblem, solution: TrajSolution) -> np.ndarray:
    """Physical decision vector of a solution, usable as an initial guess for a related problem."""
    return _resample(Transcription(problem), (solution.descent, solution.ascent))


def feedforward_compensation(
    problem: TrajOptProblem, solution: TrajSolution, tank_pressure: float
) -> np.ndarray:
    """
    Descent motor forces corrected for the tank pressure of the coming stance.

    ``F_k = F* + F_pump*(L*) - F_pump_k(L*)`` where the starred pump force uses the pressure
    the plan was made for and ``F_pump_k`` the current one.

    :param TrajOptProblem problem: The problem the plan solved.
    :param TrajSolution solution: The plan.
    :param float tank_pressure: Absolute tank pressure now (Pa).
    :return np.ndarray: Descent forces at the plan's descent nodes (N).
    """
    planned = problem.tank.model_copy(update={"pressure": solution.tank_pressure})
    current = problem.tank.model_copy(update={"pressure": max(tank_pressure, problem.tank.atmospheric)})
    descent = solution.descent
    correction = np.array(
        [
            pump_leg_force(problem, planned, length)[0] - pump_leg_force(problem, current, length)[0]
            for length in descent.L
        ]
    )
    return descent.F + correction


def valve_timing(problem: TrajOptProblem, solution: TrajSolution) -> float:
    """Valve trigger time from touchdown: the ascent start less the transient lead, not before touchdown."""
    return max(solution.descent.duration - problem.valve_lead, 0.0)


def force_schedule(
    solution: TrajSolution, descent_forces: Optional[np.ndarray] = None, trigger_time: Optional[float] = None
) -> ForceSchedule:
    """
    Playback schedule of a plan.

    :param TrajSolution solution: The plan.
    :param Optional[np.ndarray] descent_forces: Compensated descent forces replacing the plan's.
    :param Optional[float] trigger_time: Valve trigger time from touchdown; no release when absent.
    :return ForceSchedule: The schedule.
    """
    return ForceSchedule(
        descent_times=solution.descent.times,
        descent_forces=solution.descent.F if descent_forces is None else descent_forces,
        ascent_times=solution.ascent.times,
        ascent_forces=solution.ascent.F,
        trigger_time=trigger_time,
    )


def charge_to_plateau(
    problem: TrajOptProblem,
    solution: TrajSolution,
    max_cycles: int = 50,
    tolerance: float = 50.0,
    dt: float = 1e-4,
) -> list[float]:
    """
    Replay the compensated periodic plan until the tank stops charging.

    :param TrajOptProblem problem: The periodic problem.
    :param TrajSolution solution: The periodic plan.
    :param int max_cycles: Cycle budget.
    :param float tolerance: Per-cycle pressure increment that counts as a plateau (Pa).
    :param float dt: Point-mass step (s).
    :return list[float]: Absolute tank pressure before the first and after every cycle (Pa).
    """
    simulator = PointMassSimulator(problem, dt=dt)
    tank = problem.pneumatic.initial_tank()
    apex = problem.apex_height
    pressures = [tank.pressure]
    for cycle in range(max_cycles):
        forces = feedforward_compensation(problem, solution, tank.pressure)
        result = simulator.run_cycle(force_schedule(solution, descent_forces=forces), tank, apex)
        tank, apex = result.tank, max(result.apex_height, problem.leg_max)
        pressures.append(tank.pressure)
        if pressures[-1] - pressures[-2] < tolerance:
            logger.info(f"Tank plateau {tank.gauge_pressure / 1e3:.1f} kPa gauge after {cycle + 1} cycles")
            break
    return pressures
