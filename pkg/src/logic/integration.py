"""
Fixed-step integration and event localization shared by the simulators.
"""

from typing import Callable

import numpy as np
from loguru import logger

from error import BracketError
from schema.enums import EventKind


def rk4_step(rhs: Callable[[np.ndarray], np.ndarray], y: np.ndarray, h: float) -> np.ndarray:
    """One classical Runge-Kutta step of an autonomous system."""
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def locate_event(
    kind: EventKind,
    event_fn: Callable[[float], float],
    bracket: tuple[float, float],
    time_tolerance: float = 1e-10,
    value_tolerance: float = 0.0,
) -> float:
    """
    Locate a downward zero crossing of ``event_fn`` by bisection.

    Touchdown (foot height), liftoff (vertical ground reaction) and apex (vertical hip
    velocity) all cross zero from above, so the bracket must start positive and end
    non-positive.

    :param EventKind kind: The event, for diagnostics.
    :param Callable event_fn: Event function of time.
    :param tuple[float, float] bracket: ``(t_lo, t_hi)``.
    :param float time_tolerance: Stop once the bracket is this short.
    :param float value_tolerance: Stop once ``|event_fn|`` is this small at the upper end.
    :return float: The upper end of the final bracket, where ``event_fn <= 0``.
    :raises BracketError: If the function does not cross zero downward over the bracket.
    """
    lo, hi = bracket
    g_lo, g_hi = event_fn(lo), event_fn(hi)
    if not (g_lo > 0.0 and g_hi <= 0.0):
        raise BracketError(
            f"{kind.value} function does not cross zero downward over [{lo}, {hi}]: "
            f"g(lo)={g_lo:.6g}, g(hi)={g_hi:.6g}"
        )
    iterations = 0
    while hi - lo > time_tolerance and abs(g_hi) > value_tolerance:
        mid = 0.5 * (lo + hi)
        g_mid = event_fn(mid)
        if g_mid > 0.0:
            lo = mid
        else:
            hi, g_hi = mid, g_mid
        iterations += 1
    logger.debug(f"Located {kind.value} at t={hi:.9f} after {iterations} bisections")
    return hi
