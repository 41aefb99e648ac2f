"""Reference policies: no scheduling and uniform spreading."""

from __future__ import annotations

from .model import ChannelParams, RewardWeights, Scenario
from .waterfill import (
    ScheduleResult,
    _result,
    state_from_energies,
    uniform_energies,
)

__all__ = ["no_scheduling", "uniform_scheduling"]


def _finish(scenario, mu, params, e1, e2, policy) -> ScheduleResult:
    st = state_from_energies(scenario, e1, e2, mu, params)
    return _result(st, scenario, mu, params, policy)


def no_scheduling(scenario: Scenario, mu: RewardWeights,
                  params: ChannelParams) -> ScheduleResult:
    """Spend each harvest inside the interval that starts at its arrival.

    Every interval is optimised on its own; energy is never carried over.
    """
    return _finish(scenario, mu, params, scenario.harvest1, scenario.harvest2,
                   "no-s")


def uniform_scheduling(scenario: Scenario, mu: RewardWeights,
                       params: ChannelParams) -> ScheduleResult:
    """Spread each harvest ``(t, e)`` at constant power ``e / (t_final - t)``
    over the rest of the horizon, then optimise every interval on its own."""
    e1, e2 = uniform_energies(scenario)
    return _finish(scenario, mu, params, e1, e2, "uni-s")
