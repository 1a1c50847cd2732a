"""
The sweep manager
-----------------
"""

from itertools import product

import anyio
from anyio import to_process
from loguru import logger

from app import sweep_point
from schema.scenario import Scenario


class SweepManager:
    """
    Runs the (pressure, mass) points of a scenario sweep, in worker processes when
    ``jobs > 1``.

    Points share nothing; results come back in submission order.

    :param Scenario scenario: The base scenario.
    :param int jobs: Worker processes.
    """

    def __init__(self, scenario: Scenario, jobs: int = 1):
        self.scenario = scenario
        self.jobs = max(jobs, 1)

    def points(self) -> list[tuple[float, float]]:
        """Cartesian product of the sweep axes; a missing axis holds the scenario's value."""
        sweep = self.scenario.sweep
        pressures = sweep.tank_pressures or [self.scenario.release_pressure]
        masses = sweep.masses or [self.scenario.robot.projected_mass]
        return list(product(pressures, masses))

    async def run(self) -> list[dict]:
        """
        Evaluate every point.

        :return list[dict]: One row per point, ordered like ``points()``.
        """
        points = self.points()
        results: list[dict | None] = [None] * len(points)
        logger.info(f"Sweeping {len(points)} points with {self.jobs} job(s)")

        if self.jobs == 1:
            for index, (pressure, mass) in enumerate(points):
                results[index] = sweep_point(self.scenario, pressure, mass)
            return results

        limiter = anyio.CapacityLimiter(self.jobs)

        async def run_point(index: int, pressure: float, mass: float) -> None:
            results[index] = await to_process.run_sync(
                sweep_point, self.scenario, pressure, mass, limiter=limiter
            )
            logger.debug(f"Sweep point {index} done: {pressure:.0f} Pa, {mass} kg")

        async with anyio.create_task_group() as tg:
            for index, (pressure, mass) in enumerate(points):
                tg.start_soon(run_point, index, pressure, mass)
        return results

    def run_sync(self) -> list[dict]:
        return anyio.run(self.run)
