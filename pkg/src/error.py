"""
The error module defines the custom error classes for the hopper toolkit.
"""

from typing import Any, Optional


class HopperError(Exception):
    """
    Base class for all hopper toolkit errors.
    """


class ConfigurationError(HopperError):
    """
    Raised when a configuration document or model parameter set is invalid.

    The message lists every offending field, not just the first one.
    """


class InfeasibleProblemError(ConfigurationError):
    """
    Raised when a trajectory optimization problem cannot be constructed because
    its bounds are contradictory (for example L_min >= L_max).
    """


class SchemaError(HopperError):
    """
    Raised when a CSV input does not match the expected column schema or is empty.
    """


class DomainError(HopperError):
    """
    Raised when a model is evaluated outside its domain of validity.
    """


class FitError(HopperError):
    """
    Raised when a system identification fit fails its quality checks.
    """


class InsufficientSamplesError(FitError):
    """
    Raised when a fit segment does not hold enough samples.
    """

    def __init__(self, segment: str, count: int, required: int):
        super().__init__(
            f"Segment '{segment}' has {count} samples, at least {required} are required"
        )
        self.segment = segment
        self.count = count
        self.required = required


class DegenerateDataError(FitError):
    """
    Raised when the normal equations of a fit are rank deficient.
    """


class SingularConfigurationError(HopperError):
    """
    Raised when a constraint Jacobian or impact block system is singular.
    """


class BracketError(HopperError):
    """
    Raised when an event function does not change sign over the supplied bracket.
    """


class SimulationDivergedError(HopperError):
    """
    Raised when the integrated state becomes non-finite.

    :param Any world: The last valid world before divergence.
    :param Any trace: The partial trace recorded up to divergence.
    """

    def __init__(self, message: str, world: Any = None, trace: Any = None):
        super().__init__(message)
        self.world = world
        self.trace = trace


class SolverError(HopperError):
    """
    Raised when the trajectory optimizer does not converge within its budget.

    :param Any best_iterate: The best decision vector found.
    :param Optional[dict] residuals: Constraint and stationarity residuals of the best iterate.
    """

    def __init__(self, message: str, best_iterate: Any = None, residuals: Optional[dict] = None):
        super().__init__(message)
        self.best_iterate = best_iterate
        self.residuals = residuals or {}
