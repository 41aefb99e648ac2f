"""Brute-force reference solver for small instances.

The oracle shares no code with the water-filling solver. It enumerates causal
per-node energy splits on a grid and, for each interval, maximises the
weighted rate over a (p1, p2) grid taking the better of the T and U corners,
so it does not rely on the weight-ordering case analysis. Both grids are
refined around the incumbent.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .interval import IntervalAllocation
from .model import (
    ChannelParams,
    DepartureTriplet,
    PowerSchedule,
    RewardWeights,
    Scenario,
    departure,
)
from .waterfill import ScheduleResult, ScheduleState

__all__ = ["GridSpec", "CompareReport", "brute_force_schedule", "compare",
           "interval_value_grid"]

MAX_N = 3
_CHUNK = 1_500_000


@dataclass(frozen=True)
class GridSpec:
    """Discretisation of the brute-force search.

    Attributes
    ----------
    energy_steps : int
        Levels per cumulative-energy decision.
    power_steps : int
        Levels per private power axis.
    refinement_rounds : int
        Number of re-grids around the incumbent.
    zoom : float
        Window shrink factor per refinement round.
    """

    energy_steps: int = 41
    power_steps: int = 61
    refinement_rounds: int = 2
    zoom: float = 10.0

    def __post_init__(self) -> None:
        if self.energy_steps < 2 or self.power_steps < 2:
            raise ValueError("grid counts must be at least 2")
        if self.refinement_rounds < 0:
            raise ValueError("refinement_rounds must be non-negative")
        if self.zoom <= 1:
            raise ValueError("zoom must exceed 1")


def _corner_values(x, y, p1, p2, mu: RewardWeights):
    """Weighted rate (natural-log units) at the better of the T and U corners."""
    lone = (x <= 0) | (y <= 0)
    a = np.maximum(x - p1, 0.0)
    b = np.maximum(y - p2, 0.0)
    p0 = np.where(lone, 0.0, (np.sqrt(a) + np.sqrt(b)) ** 2)
    l_all = np.log1p(p0 + p1 + p2)
    l_12 = np.log1p(p1 + p2)
    l_1 = np.log1p(p1)
    l_2 = np.log1p(p2)
    r0 = l_all - l_12
    t = mu.mu0 * r0 + mu.mu1 * l_1 + mu.mu2 * (l_12 - l_1)
    u = mu.mu0 * r0 + mu.mu1 * (l_12 - l_2) + mu.mu2 * l_2
    return np.maximum(t, u)


def interval_value_grid(x, y, mu: RewardWeights, steps: int, rounds: int,
                        zoom: float):
    """Grid maximum of the weighted rate for arrays of normalised powers.

    Returns (value, p1, p2) arrays shaped like ``x``.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    val = np.empty_like(x)
    bp1 = np.empty_like(x)
    bp2 = np.empty_like(x)
    g = np.linspace(0.0, 1.0, steps)
    chunk = max(1, _CHUNK // (steps * steps))
    for s in range(0, len(x), chunk):
        xs, ys = x[s:s + chunk, None, None], y[s:s + chunk, None, None]
        lo1 = np.zeros_like(xs)
        lo2 = np.zeros_like(ys)
        w1, w2 = xs.copy(), ys.copy()
        for r in range(rounds + 1):
            p1 = np.clip(lo1 + w1 * g[None, :, None], 0.0, xs)
            p2 = np.clip(lo2 + w2 * g[None, None, :], 0.0, ys)
            v = _corner_values(xs, ys, p1, p2, mu)
            flat = v.reshape(len(xs), -1)
            idx = np.argmax(flat, axis=1)
            i, j = np.unravel_index(idx, (steps, steps))
            rows = np.arange(len(xs))
            c1 = p1[rows, i, 0][:, None, None]
            c2 = p2[rows, 0, j][:, None, None]
            best = flat[rows, idx]
            if r == rounds:
                break
            w1, w2 = w1 / zoom, w2 / zoom
            lo1 = np.clip(c1 - w1 / 2, 0.0, None)
            lo2 = np.clip(c2 - w2 / 2, 0.0, None)
        val[s:s + chunk] = best
        bp1[s:s + chunk] = c1.ravel()
        bp2[s:s + chunk] = c2.ravel()
    return val, bp1, bp2


def _cum_candidates(env: np.ndarray, centre, width: float, steps: int):
    """Causal cumulative-energy vectors (free entries only) on a grid."""
    N = len(env)
    total = float(env[-1])
    axes = []
    for n in range(N - 1):
        cap = float(env[n])
        if centre is None:
            pts = np.linspace(0.0, total, steps)
        else:
            pts = centre[n] + np.linspace(-width / 2, width / 2, steps)
        pts = np.clip(pts, 0.0, cap)
        if centre is None or abs(centre[n] - cap) <= width / 2:
            pts = np.append(pts, cap)
        axes.append(np.unique(pts))
    out = []
    for combo in itertools.product(*axes):
        if all(combo[i] <= combo[i + 1] for i in range(len(combo) - 1)):
            out.append(combo + (total,))
    return np.array(out, dtype=float).reshape(len(out), N)


def _energies(cums: np.ndarray) -> np.ndarray:
    return np.diff(np.concatenate([np.zeros((len(cums), 1)), cums], axis=1), axis=1)


def brute_force_schedule(scenario: Scenario, mu: RewardWeights,
                         params: ChannelParams,
                         grid: GridSpec = GridSpec()) -> ScheduleResult:
    """Exhaustive grid search over causal energy splits, N <= 3 only."""
    N = scenario.n
    if N > MAX_N:
        raise ValueError(f"brute force is limited to N <= {MAX_N}, got {N}")
    A = params.a
    L = np.asarray(scenario.lengths, dtype=float)
    widths = {k: float(scenario.envelope(k)[-1]) for k in (1, 2)}
    centres = {1: None, 2: None}
    best_total = -math.inf
    best = None
    for r in range(grid.refinement_rounds + 1):
        e = {}
        for k in (1, 2):
            cums = _cum_candidates(scenario.envelope(k), centres[k], widths[k],
                                   grid.energy_steps)
            e[k] = _energies(cums)
        total = np.zeros((len(e[1]), len(e[2])))
        tables = []
        for n in range(N):
            u1, inv1 = np.unique(np.round(e[1][:, n], 18), return_inverse=True)
            u2, inv2 = np.unique(np.round(e[2][:, n], 18), return_inverse=True)
            X, Y = np.meshgrid(np.maximum(u1, 0) / L[n] / A,
                               np.maximum(u2, 0) / L[n] / A, indexing="ij")
            v, q1, q2 = interval_value_grid(X, Y, mu, grid.power_steps,
                                            grid.refinement_rounds, grid.zoom)
            v = v.reshape(X.shape) * L[n]
            tables.append((u1, u2, inv1, inv2, q1.reshape(X.shape), q2.reshape(X.shape)))
            total += v[inv1][:, inv2]
        i, j = np.unravel_index(np.argmax(total), total.shape)
        if total[i, j] >= best_total:
            best_total = float(total[i, j])
            p = []
            for n, (u1, u2, inv1, inv2, q1, q2) in enumerate(tables):
                a, b = inv1[i], inv2[j]
                p.append((u1[a], u2[b], q1[a, b] * A, q2[a, b] * A))
            best = (e[1][i].copy(), e[2][j].copy(), p)
        for k in (1, 2):
            centres[k] = np.cumsum(best[k - 1])
            widths[k] = widths[k] / grid.zoom
    e1, e2, p = best
    allocs = []
    for n, (en1, en2, p1, p2) in enumerate(p):
        pb1, pb2 = en1 / L[n], en2 / L[n]
        a, b = max(pb1 - p1, 0.0), max(pb2 - p2, 0.0)
        lone = pb1 <= 0 or pb2 <= 0
        p0 = 0.0 if lone else (math.sqrt(a) + math.sqrt(b)) ** 2
        if p0 > 0:
            rho = math.sqrt(a) / (math.sqrt(a) + math.sqrt(b))
        else:
            rho = 1.0 if pb2 <= 0 < pb1 else (0.0 if pb1 <= 0 < pb2 else 0.5)
        if lone:
            p1, p2 = pb1, pb2
        allocs.append(IntervalAllocation(
            pbar1=pb1, pbar2=pb2, p0=p0, p1=p1, p2=p2, rho=rho,
            lambda1=math.nan, lambda2=math.nan, region_index=0, chi1=None,
            chi2=None, case=mu.canonical().case, objective=math.nan))
    st = ScheduleState(e1, e2, tuple(allocs), grid.refinement_rounds, math.nan, True)
    sched = PowerSchedule(np.array([a.p0 for a in allocs]),
                          np.array([a.p1 for a in allocs]),
                          np.array([a.p2 for a in allocs]),
                          np.array([a.rho for a in allocs]))
    trip = _best_corner_departure(sched, scenario, params, mu)
    return ScheduleResult(st, trip, trip.weighted(mu), mu, scenario.key(), "oracle")


def _best_corner_departure(sched, scenario, params, mu) -> DepartureTriplet:
    # T beats U exactly when mu1 >= mu2, whatever the powers
    return departure(sched, scenario, params, "T" if mu.mu1 >= mu.mu2 else "U")


@dataclass(frozen=True)
class CompareReport:
    """Outcome of comparing a solver result against the oracle."""

    passed: bool
    delta_objective: float
    relative: float
    delta_b0: float
    delta_b1: float
    delta_b2: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"{tag} oracle-solver objective gap {self.delta_objective:.6g} bits "
                f"({self.relative:.3%})")


def compare(waterfill_result: ScheduleResult, oracle_result: ScheduleResult,
            slack: float = 0.01) -> CompareReport:
    """Pass iff the oracle beats the solver by at most ``slack`` of the
    oracle objective."""
    if waterfill_result.scenario_key != oracle_result.scenario_key:
        raise ValueError("results are for different scenarios")
    if waterfill_result.mu != oracle_result.mu:
        raise ValueError("results are for different reward weights")
    d = oracle_result.objective - waterfill_result.objective
    scale = abs(oracle_result.objective)
    rel = d / scale if scale > 0 else 0.0
    tw, to = waterfill_result.triplet, oracle_result.triplet
    return CompareReport(d <= slack * scale, d, rel, to.b0 - tw.b0,
                         to.b1 - tw.b1, to.b2 - tw.b2)
