"""Offline power scheduling for an energy-harvesting two-user Gaussian MAC
with a common message.

The package computes the boundary of the departure region by iterative
backward water-filling and compares the optimum with two simple baselines.
"""

from .model import (
    ChannelParams,
    DepartureTriplet,
    PowerSchedule,
    Rates,
    RewardWeights,
    Scenario,
    boundary_rates,
    build_intervals,
    capacity,
    check_feasibility,
    departure,
    load_scenario,
)
from .interval import (
    IntervalAllocation,
    classify_region,
    g_fun,
    recover_multipliers,
    rho_from_multipliers,
    solve_interval,
)
from .waterfill import (
    ScheduleResult,
    ScheduleState,
    WaterLevels,
    equalize_pair,
    kkt_residuals,
    schedule,
    water_levels,
)
from .baselines import no_scheduling, uniform_scheduling
from .oracle import GridSpec, brute_force_schedule, compare

__version__ = "0.1.0"

__all__ = [
    "ChannelParams",
    "DepartureTriplet",
    "GridSpec",
    "IntervalAllocation",
    "PowerSchedule",
    "Rates",
    "RewardWeights",
    "Scenario",
    "ScheduleResult",
    "ScheduleState",
    "WaterLevels",
    "boundary_rates",
    "brute_force_schedule",
    "build_intervals",
    "capacity",
    "check_feasibility",
    "classify_region",
    "compare",
    "departure",
    "equalize_pair",
    "g_fun",
    "kkt_residuals",
    "load_scenario",
    "no_scheduling",
    "recover_multipliers",
    "rho_from_multipliers",
    "schedule",
    "solve_interval",
    "uniform_scheduling",
    "water_levels",
]
