"""
The nlp module contains the nonlinear program interface and the solver backends used by
trajectory optimization.

A program minimizes ``f(x)`` subject to ``c_eq(x) = 0``, ``c_in(x) >= 0`` and simple bounds,
with analytic gradients and dense constraint Jacobians supplied by the caller.
"""

from abc import abstractmethod
from typing import Callable, Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import lsq_linear, minimize

from error import ConfigurationError
from schema.enums import SolverBackendKind


VectorFn = Callable[[np.ndarray], np.ndarray]


class NonlinearProgram(BaseModel):
    """
    A smooth nonlinear program.

    :param Callable objective: ``x -> (f, grad f)``.
    :param Callable eq: ``x -> c_eq``.
    :param Callable eq_jacobian: ``x -> d c_eq / dx``.
    :param Callable ineq: ``x -> c_in``, feasible when non-negative.
    :param Callable ineq_jacobian: ``x -> d c_in / dx``.
    :param np.ndarray lower: Variable lower bounds.
    :param np.ndarray upper: Variable upper bounds.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    objective: Callable[[np.ndarray], tuple[float, np.ndarray]]
    eq: VectorFn
    eq_jacobian: VectorFn
    ineq: VectorFn
    ineq_jacobian: VectorFn
    lower: np.ndarray
    upper: np.ndarray

    def max_violation(self, x: np.ndarray) -> float:
        """Largest equality, inequality or bound violation at ``x``."""
        parts = [0.0]
        eq = self.eq(x)
        if eq.size:
            parts.append(float(np.max(np.abs(eq))))
        ineq = self.ineq(x)
        if ineq.size:
            parts.append(float(np.max(-ineq)))
        parts.append(float(np.max(self.lower - x)))
        parts.append(float(np.max(x - self.upper)))
        return max(parts)

    def stationarity(self, x: np.ndarray, active_tolerance: float = 1e-6) -> float:
        """
        First-order stationarity residual at ``x``.

        Multipliers are estimated by bounded least squares over the equality rows and the
        active inequality rows (inequality multipliers non-negative); variables resting on
        a bound are excluded from the residual.

        :param np.ndarray x: The point.
        :param float active_tolerance: Inequalities below this count as active.
        :return float: Infinity norm of the free part of the Lagrangian gradient,
            relative to ``max(1, |grad f|)``.
        """
        _, grad = self.objective(x)
        jac_eq = self.eq_jacobian(x)
        ineq = self.ineq(x)
        active = ineq <= active_tolerance
        jac_in = self.ineq_jacobian(x)[active] if ineq.size else np.zeros((0, x.size))
        free = (x - self.lower > active_tolerance) & (self.upper - x > active_tolerance)
        if not np.any(free):
            return 0.0
        jac = np.vstack([jac_eq, jac_in]).T[free]
        target = grad[free]
        if jac.shape[1] == 0:
            residual = target
        else:
            n_eq = jac_eq.shape[0]
            lower = np.concatenate([np.full(n_eq, -np.inf), np.zeros(jac_in.shape[0])])
            upper = np.full(jac.shape[1], np.inf)
            fit = lsq_linear(jac, target, bounds=(lower, upper), method="bvls")
            residual = target - jac @ fit.x
        scale = max(1.0, float(np.max(np.abs(grad))))
        return float(np.max(np.abs(residual))) / scale


class NlpResult(BaseModel):
    """
    Outcome of a backend run.

    :param np.ndarray x: Final iterate.
    :param float fun: Objective at ``x``.
    :param int iterations: Iterations used.
    :param bool success: Whether the backend reported convergence.
    :param str message: Backend message.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    x: np.ndarray
    fun: float
    iterations: int
    success: bool
    message: str = ""


class BaseNlpBackend(BaseModel):
    """
    Interface to solve a nonlinear program.

    :param int max_iterations: Iteration budget.
    :param float tolerance: Convergence tolerance.
    """

    max_iterations: int = Field(500, ge=1)
    tolerance: float = Field(1e-6, gt=0)

    @property
    def name(self) -> str:
        return type(self).__name__

    @abstractmethod
    def solve(self, program: NonlinearProgram, x0: np.ndarray) -> NlpResult:
        """
        Solve the program from a starting point.

        :param NonlinearProgram program: The program.
        :param np.ndarray x0: Starting point.
        :return NlpResult: The final iterate; callers check feasibility themselves.
        """
        raise NotImplementedError


class SlsqpBackend(BaseNlpBackend):
    """
    Sequential least squares programming through scipy.
    """

    accuracy: float = Field(1e-10, gt=0)

    def solve(self, program: NonlinearProgram, x0: np.ndarray) -> NlpResult:
        constraints = [
            {"type": "eq", "fun": program.eq, "jac": program.eq_jacobian},
            {"type": "ineq", "fun": program.ineq, "jac": program.ineq_jacobian},
        ]
        x_start = np.clip(x0, program.lower, program.upper)
        result = minimize(
            program.objective,
            x_start,
            jac=True,
            method="SLSQP",
            bounds=list(zip(program.lower, program.upper)),
            constraints=constraints,
            options={"maxiter": self.max_iterations, "ftol": self.accuracy},
        )
        logger.debug(f"SLSQP finished after {result.nit} iterations: {result.message}")
        return NlpResult(
            x=result.x,
            fun=float(result.fun),
            iterations=int(result.nit),
            success=bool(result.success),
            message=str(result.message),
        )


class AugmentedLagrangianBackend(BaseNlpBackend):
    """
    Powell-Hestenes-Rockafellar augmented Lagrangian with an L-BFGS-B inner loop.

    Equalities and inequalities are moved into the merit function; the bounds stay with
    the inner solver.

    :param float penalty: Initial penalty weight.
    :param float penalty_growth: Factor applied when the violation does not shrink enough.
    :param int max_outer: Outer (multiplier update) iterations.
    """

    penalty: float = Field(10.0, gt=0)
    penalty_growth: float = Field(10.0, gt=1)
    max_outer: int = Field(30, ge=1)

    def solve(self, program: NonlinearProgram, x0: np.ndarray) -> NlpResult:
        x = np.clip(np.asarray(x0, dtype=float), program.lower, program.upper)
        lam = np.zeros(program.eq(x).size)
        mu = np.zeros(program.ineq(x).size)
        rho = self.penalty
        bounds = list(zip(program.lower, program.upper))
        iterations = 0
        violation = program.max_violation(x)

        def merit(z: np.ndarray) -> tuple[float, np.ndarray]:
            f, grad = program.objective(z)
            c = program.eq(z)
            g = program.ineq(z)
            shifted = np.maximum(mu - rho * g, 0.0)
            value = f + lam @ c + 0.5 * rho * c @ c + (shifted @ shifted - mu @ mu) / (2.0 * rho)
            grad = grad + program.eq_jacobian(z).T @ (lam + rho * c) - program.ineq_jacobian(z).T @ shifted
            return float(value), grad

        success = False
        for outer in range(self.max_outer):
            inner = minimize(
                merit,
                x,
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": self.max_iterations, "gtol": self.tolerance * 1e-2},
            )
            x = inner.x
            iterations += int(inner.nit)
            c = program.eq(x)
            g = program.ineq(x)
            lam = lam + rho * c
            mu = np.maximum(mu - rho * g, 0.0)
            previous, violation = violation, program.max_violation(x)
            logger.debug(f"Augmented Lagrangian outer {outer}: violation {violation:.3e}, penalty {rho:.1e}")
            if violation <= self.tolerance and inner.success:
                success = True
                break
            if violation > 0.25 * previous:
                rho *= self.penalty_growth

        fun, _ = program.objective(x)
        message = "converged"
        if not success:
            message = f"violation {violation:.3e} after {self.max_outer} outer iterations"
        return NlpResult(x=x, fun=float(fun), iterations=iterations, success=success, message=message)


BACKENDS: dict[SolverBackendKind, type[BaseNlpBackend]] = {
    SolverBackendKind.SLSQP: SlsqpBackend,
    SolverBackendKind.AUGMENTED_LAGRANGIAN: AugmentedLagrangianBackend,
}


def create_backend(
    kind: SolverBackendKind, max_iterations: int = 500, tolerance: float = 1e-6, **options: float
) -> BaseNlpBackend:
    """
    Instantiate a registered backend.

    :param SolverBackendKind kind: Which backend.
    :param int max_iterations: Iteration budget.
    :param float tolerance: Convergence tolerance.
    :return BaseNlpBackend: The backend.
    :raises ConfigurationError: If the kind is not registered.
    """
    backend: Optional[type[BaseNlpBackend]] = BACKENDS.get(kind)
    if backend is None:
        raise ConfigurationError(f"unknown solver backend {kind!r}")
    return backend(max_iterations=max_iterations, tolerance=tolerance, **options)
