"""
Tests for the fixed-step integrator and event localization.
"""

import math

import numpy as np
import pytest

from error import BracketError
from logic.integration import locate_event, rk4_step
from schema.enums import EventKind


def test_rk4_step_on_exponential_decay():
    y = rk4_step(lambda y: -y, np.array([1.0]), 0.1)
    assert y[0] == pytest.approx(math.exp(-0.1), abs=1e-6)


def test_rk4_integrates_projectile_exactly():
    def rhs(y):
        return np.array([y[1], -9.81])

    y = np.array([0.0, 2.0])
    for _ in range(10):
        y = rk4_step(rhs, y, 0.01)
    assert y[0] == pytest.approx(2.0 * 0.1 - 0.5 * 9.81 * 0.01, rel=1e-12)
    assert y[1] == pytest.approx(2.0 - 0.981, rel=1e-12)


def test_locate_free_fall_touchdown():
    def foot_height(t):
        return 0.234 - 0.5 * 9.81 * t * t

    t = locate_event(EventKind.TOUCHDOWN, foot_height, (0.0, 0.5))
    assert t == pytest.approx(math.sqrt(2 * 0.234 / 9.81), abs=1e-9)
    assert t == pytest.approx(0.2184, abs=1e-4)
    assert foot_height(t) <= 0.0


def test_locate_event_stops_on_value_tolerance():
    t = locate_event(EventKind.APEX, lambda t: 1.0 - t, (0.0, 4.0), value_tolerance=0.6)
    assert 1.0 <= t <= 1.6


def test_locate_event_needs_downward_crossing():
    with pytest.raises(BracketError):
        locate_event(EventKind.LIFTOFF, lambda t: 1.0 + t, (0.0, 1.0))
    with pytest.raises(BracketError):
        locate_event(EventKind.APEX, lambda t: t - 0.5, (0.0, 1.0))
