"""
Tests for the nonlinear program backends.
"""

import numpy as np
import pytest

from error import ConfigurationError
from logic.nlp import (
    AugmentedLagrangianBackend,
    NonlinearProgram,
    SlsqpBackend,
    create_backend,
)
from schema.enums import SolverBackendKind


def create_test_program() -> NonlinearProgram:
    """min (x0 - 1)^2 + (x1 - 2)^2 s.t. x0 + x1 = 1, x0 >= 0.5; solution (0.5, 0.5)."""

    def objective(x):
        diff = x - np.array([1.0, 2.0])
        return float(diff @ diff), 2.0 * diff

    return NonlinearProgram(
        objective=objective,
        eq=lambda x: np.array([x[0] + x[1] - 1.0]),
        eq_jacobian=lambda x: np.array([[1.0, 1.0]]),
        ineq=lambda x: np.array([x[0] - 0.5]),
        ineq_jacobian=lambda x: np.array([[1.0, 0.0]]),
        lower=np.full(2, -5.0),
        upper=np.full(2, 5.0),
    )


def test_violation_and_stationarity():
    program = create_test_program()
    assert program.max_violation(np.array([0.5, 0.5])) == pytest.approx(0.0, abs=1e-12)
    assert program.max_violation(np.array([0.0, 0.0])) == pytest.approx(1.0)
    assert program.max_violation(np.array([6.0, -5.0])) == pytest.approx(1.0)
    assert program.stationarity(np.array([0.5, 0.5])) == pytest.approx(0.0, abs=1e-9)
    assert program.stationarity(np.array([1.0, 0.0])) > 0.1


def test_slsqp_solves_toy_program():
    result = SlsqpBackend().solve(create_test_program(), np.array([3.0, -3.0]))
    assert result.success
    assert result.x == pytest.approx([0.5, 0.5], abs=1e-6)
    assert result.fun == pytest.approx(2.5, abs=1e-6)


def test_augmented_lagrangian_solves_toy_program():
    program = create_test_program()
    result = AugmentedLagrangianBackend(tolerance=1e-7).solve(program, np.array([3.0, -3.0]))
    assert result.x == pytest.approx([0.5, 0.5], abs=1e-4)
    assert program.max_violation(result.x) <= 1e-6


def test_create_backend():
    backend = create_backend(SolverBackendKind.AUGMENTED_LAGRANGIAN, 100, 1e-5, penalty=5.0)
    assert isinstance(backend, AugmentedLagrangianBackend)
    assert backend.max_iterations == 100
    assert backend.penalty == 5.0
    assert create_backend(SolverBackendKind.SLSQP).name == "SlsqpBackend"
    with pytest.raises(ConfigurationError):
        create_backend("ipopt")
