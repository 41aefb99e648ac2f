"""Iterative backward water-filling over N intervals.

Each node's energy is moved between intervals, holding the other node fixed,
until the node's water level (the inverse of its marginal value of power)
is equal across every pair of intervals linked by stored energy. Node sweeps
alternate and run from the last interval pair towards the first.

Interval arguments ``n`` are 0-based. Reports meant for people (trace
records, causality violations) use 1-based interval numbers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .interval import (
    IntervalAllocation,
    _weights,
    solve_interval,
    stationarity_residual,
)
from .model import (
    ChannelParams,
    DepartureTriplet,
    PowerSchedule,
    RewardWeights,
    Scenario,
    departure,
)

__all__ = [
    "KKTReport",
    "ScheduleResult",
    "ScheduleState",
    "WaterLevels",
    "equalize_pair",
    "initial_state",
    "kkt_residuals",
    "level_mismatch",
    "schedule",
    "state_from_energies",
    "uniform_energies",
    "water_levels",
]

TOL = 1e-6
MAX_ITER = 500
_MOVE_REL = 1e-10   # energy below this fraction of a node's total is not movable


@dataclass(frozen=True)
class WaterLevels:
    """Water levels of one interval.

    ``wl1``-``wl3`` are evaluated in the canonical frame of the weight case
    (nodes swapped for mirrored cases); ``wl4`` and ``wl5`` always belong to
    node 1 and node 2. Levels that do not exist for the case or for a node
    without power are ``None``.
    """

    wl1: Optional[float]
    wl2: Optional[float]
    wl3: Optional[float]
    wl4: Optional[float]
    wl5: Optional[float]
    case: str


@dataclass(frozen=True)
class ScheduleState:
    """Per-interval energy assignment and the resulting allocations."""

    ebar1: np.ndarray
    ebar2: np.ndarray
    allocations: tuple[IntervalAllocation, ...]
    iterations: int = 0
    mismatch: float = math.inf
    converged: bool = False

    def energy(self, k: int) -> np.ndarray:
        return self.ebar1 if k == 1 else self.ebar2

    def power_schedule(self) -> PowerSchedule:
        al = self.allocations
        return PowerSchedule(np.array([a.p0 for a in al]),
                             np.array([a.p1 for a in al]),
                             np.array([a.p2 for a in al]),
                             np.array([a.rho for a in al]))

    def lambdas(self, k: int) -> np.ndarray:
        return np.array([a.lambda1 if k == 1 else a.lambda2
                         for a in self.allocations])


@dataclass(frozen=True)
class ScheduleResult:
    """Outcome of a scheduling policy."""

    state: ScheduleState
    triplet: DepartureTriplet
    objective: float
    mu: RewardWeights
    scenario_key: str
    policy: str

    @property
    def converged(self) -> bool:
        return self.state.converged

    @property
    def schedule(self) -> PowerSchedule:
        return self.state.power_schedule()

    def to_dict(self, scenario: Scenario) -> dict:
        sch = self.schedule
        return {
            "policy": self.policy,
            "mu": {"mu0": self.mu.mu0, "mu1": self.mu.mu1, "mu2": self.mu.mu2},
            "case": self.mu.case,
            "converged": bool(self.converged),
            "iterations": self.state.iterations,
            "mismatch": float(self.state.mismatch),
            **self.triplet.as_dict(),
            "objective_bits": self.objective,
            "intervals": [
                {
                    "interval": i + 1,
                    "t_start_s": float(scenario.boundaries[i]),
                    "length_s": float(scenario.lengths[i]),
                    "p0_w": float(sch.p0[i]), "p1_w": float(sch.p1[i]),
                    "p2_w": float(sch.p2[i]), "rho": float(sch.rho[i]),
                    "pbar1_w": float(sch.pbar1[i]), "pbar2_w": float(sch.pbar2[i]),
                    "e1_mJ": float(self.state.ebar1[i] * 1e3),
                    "e2_mJ": float(self.state.ebar2[i] * 1e3),
                    "region": self.state.allocations[i].region_index,
                }
                for i in range(scenario.n)
            ],
        }


def _inv(v: float) -> Optional[float]:
    if v > 1e-300 and math.isfinite(v):
        return 1.0 / float(v)
    return None


def water_levels(state: ScheduleState, n: int, mu: RewardWeights,
                 params: ChannelParams) -> WaterLevels:
    """Water levels of interval ``n`` from its solved allocation."""
    al = state.allocations[n]
    case, mu0, m2, m1 = _weights(mu)
    c = al.swapped() if mu.mirrored else al
    a = params.a
    p0, p1, p2 = c.p0 / a, c.p1 / a, c.p2 / a
    u = mu0 / (1.0 + p0 + p1 + p2)
    v = m2 / (1.0 + p1 + p2)
    w = m1 / (1.0 + p1)
    wl1 = wl2 = None
    if case == "T":
        wl1, wl2 = _inv(u + v + w), _inv(u + v)
    elif case == "S":
        wl1 = _inv(u + w)
    wl4 = _inv(al.lambda1) if al.pbar1 > 0 else None
    wl5 = _inv(al.lambda2) if al.pbar2 > 0 else None
    return WaterLevels(wl1, wl2, _inv(u), wl4, wl5, case)


class _Work:
    """Mutable working copy used inside a solve."""

    def __init__(self, scenario: Scenario, mu: RewardWeights,
                 params: ChannelParams, e1, e2, allocs=None):
        self.sc = scenario
        self.mu = mu
        self.params = params
        self.L = np.asarray(scenario.lengths, dtype=float)
        self.e = {1: np.array(e1, dtype=float), 2: np.array(e2, dtype=float)}
        if allocs is None:
            allocs = [self.solve(i, self.e[1][i], self.e[2][i])
                      for i in range(scenario.n)]
        self.al = list(allocs)
        self.eps = {k: _MOVE_REL * max(float(scenario.envelope(k)[-1]), 1e-300)
                    for k in (1, 2)}

    def solve(self, i: int, e1: float, e2: float) -> IntervalAllocation:
        L = self.L[i]
        return solve_interval(max(e1, 0.0) / L, max(e2, 0.0) / L, self.mu,
                              self.params)

    def lam(self, k: int, al: IntervalAllocation) -> float:
        return al.lambda1 if k == 1 else al.lambda2

    def slack(self, k: int) -> np.ndarray:
        return self.sc.envelope(k) - np.cumsum(self.e[k])

    def objective(self) -> float:
        return float(np.dot([a.objective for a in self.al], self.L))

    def state(self, iterations=0, mismatch=math.inf, converged=False):
        e1 = self.e[1].copy()
        e2 = self.e[2].copy()
        e1.setflags(write=False)
        e2.setflags(write=False)
        return ScheduleState(e1, e2, tuple(self.al), iterations, mismatch,
                             converged)

    def pair_violation(self, k: int, n: int, m: int, slack=None) -> float:
        """Relative water-level gap between n < m that a transfer could close."""
        ln, lm = self.lam(k, self.al[n]), self.lam(k, self.al[m])
        e, eps = self.e[k], self.eps[k]
        if lm > ln and e[n] > eps:
            return 1.0 if math.isinf(lm) else (lm - ln) / lm
        if ln > lm and e[m] > eps:
            if slack is None:
                slack = self.slack(k)
            if np.min(slack[n:m]) > eps:
                return 1.0 if math.isinf(ln) else (ln - lm) / ln
        return 0.0

    def mismatch(self, adjacent_only=False) -> float:
        worst = 0.0
        N = self.sc.n
        for k in (1, 2):
            sl = self.slack(k)
            for n in range(N - 1):
                hi = n + 2 if adjacent_only else N
                for m in range(n + 1, hi):
                    worst = max(worst, self.pair_violation(k, n, m, sl))
        return worst

    def equalize(self, k: int, n: int, m: int) -> float:
        """Move node-k energy between n and m to equalise its level."""
        e = self.e[k]
        other = self.e[3 - k]
        sl = self.slack(k)
        hi = float(e[n])
        lo = -float(min(e[m], np.min(sl[n:m]))) if m > n else 0.0
        lo = min(lo, 0.0)

        def pair(d):
            en, em = e[n] - d, e[m] + d
            if k == 1:
                an = self.solve(n, en, other[n])
                am = self.solve(m, em, other[m])
            else:
                an = self.solve(n, other[n], en)
                am = self.solve(m, other[m], em)
            return an, am

        def dphi(d):
            an, am = pair(d)
            val = self.lam(k, am) - self.lam(k, an)
            return max(-1e12, min(1e12, val))

        d0 = self.lam(k, self.al[m]) - self.lam(k, self.al[n])
        if d0 == 0:
            return 0.0
        if d0 > 0:
            if hi <= self.eps[k]:
                return 0.0
            if dphi(hi) >= 0:
                delta = hi
            else:
                delta = brentq(dphi, 0.0, hi, xtol=1e-300, rtol=1e-15, maxiter=200)
        else:
            if lo >= -self.eps[k]:
                return 0.0
            if dphi(lo) <= 0:
                delta = lo
            else:
                delta = brentq(dphi, lo, 0.0, xtol=1e-300, rtol=1e-15, maxiter=200)
        an, am = pair(delta)
        old = (self.al[n].objective * self.L[n] + self.al[m].objective * self.L[m])
        new = an.objective * self.L[n] + am.objective * self.L[m]
        if new < old - 1e-12 * abs(old):
            return 0.0
        e[n] -= delta
        e[m] += delta
        if e[n] < 0:
            e[n] = 0.0
        self.al[n], self.al[m] = an, am
        return delta


def state_from_energies(scenario: Scenario, ebar1: Sequence[float],
                        ebar2: Sequence[float], mu: RewardWeights,
                        params: ChannelParams) -> ScheduleState:
    """Solve every interval for a given per-interval energy assignment (J)."""
    e1, e2 = np.asarray(ebar1, float), np.asarray(ebar2, float)
    if e1.shape != (scenario.n,) or e2.shape != (scenario.n,):
        raise ValueError("energy vectors must have one entry per interval")
    w = _Work(scenario, mu, params, e1, e2)
    return w.state(mismatch=w.mismatch())


def initial_state(scenario: Scenario, mu: RewardWeights,
                  params: ChannelParams) -> ScheduleState:
    """Each harvest spent in the interval that starts at its arrival."""
    return state_from_energies(scenario, scenario.harvest1, scenario.harvest2,
                               mu, params)


def uniform_energies(scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Per-interval energies when each harvest is spread at constant power
    from its arrival until the deadline."""
    out = []
    for events in (scenario.events_node1, scenario.events_node2):
        e = np.zeros(scenario.n)
        for t, en in events:
            rate = en / (scenario.t_final - t)
            mask = scenario.boundaries >= t
            e[mask] += rate * scenario.lengths[mask]
        out.append(e)
    return out[0], out[1]


def level_mismatch(state: ScheduleState, scenario: Scenario, mu: RewardWeights,
                   params: ChannelParams) -> float:
    """Largest relative water-level gap that some energy transfer could close."""
    w = _Work(scenario, mu, params, state.ebar1, state.ebar2, state.allocations)
    return w.mismatch()


def equalize_pair(state: ScheduleState, scenario: Scenario, mu: RewardWeights,
                  params: ChannelParams, k: int, n: int,
                  m: Optional[int] = None) -> tuple[ScheduleState, float]:
    """Equalise node ``k``'s water level between intervals ``n`` and ``m``.

    ``m`` defaults to ``n + 1``. The transfer ``delta`` (J, positive means
    forward in time) is the root of the level difference, found by bracketed
    root search; it is clipped to what the energy in ``n`` and the causality
    slack allow. When the levels cannot be equalised no energy moves beyond
    the bracket end, and when they already agree ``delta`` is zero.
    """
    if k not in (1, 2):
        raise ValueError("node must be 1 or 2")
    m = n + 1 if m is None else m
    if not (0 <= n < m < scenario.n):
        raise ValueError("need 0 <= n < m < N")
    w = _Work(scenario, mu, params, state.ebar1, state.ebar2, state.allocations)
    delta = w.equalize(k, n, m)
    return w.state(state.iterations, w.mismatch(), False), delta


def _record(trace, **rec) -> None:
    if trace is not None:
        trace.write(json.dumps(rec) + "\n")


def schedule(scenario: Scenario, mu: RewardWeights, params: ChannelParams,
             tol: float = TOL, max_iter: int = MAX_ITER,
             trace: Optional[IO[str]] = None,
             init: str = "uniform") -> ScheduleResult:
    """Optimal offline schedule by iterative backward water-filling.

    One iteration is a node-1 sweep followed by a node-2 sweep, each running
    from the last interval pair to the first. After the adjacent sweeps any
    remaining gap between non-adjacent intervals (an empty interval in
    between can block adjacent moves) is closed directly. Iterations stop
    once every closable water-level gap is below ``tol`` (relative).

    ``init`` selects the starting point: ``"uniform"`` spreads each harvest
    evenly until the deadline, ``"no-s"`` spends it in its arrival interval.
    The uniform start keeps both nodes active wherever both have energy.
    From the arrival-interval start a node alone in an interval sends no
    common data, and single-node transfers cannot leave that corner when
    common data is worth more than private data.

    Returns
    -------
    ScheduleResult
        ``converged`` is False when ``max_iter`` iterations did not reach
        ``tol``; the best state found is still returned.
    """
    if init == "uniform":
        e1, e2 = uniform_energies(scenario)
    elif init == "no-s":
        e1, e2 = scenario.harvest1, scenario.harvest2
    else:
        raise ValueError(f"unknown init {init!r}")
    w = _Work(scenario, mu, params, e1, e2)
    N = scenario.n
    mism = w.mismatch()
    it = 0
    _record(trace, iteration=0, node=None, interval=None, target=None,
            delta_j=0.0, objective_bits=w.objective(), mismatch=mism)
    while mism >= tol and it < max_iter:
        it += 1
        for k in (1, 2):
            for n in range(N - 2, -1, -1):
                d = w.equalize(k, n, n + 1)
                if trace is not None:
                    lv = [_inv(w.lam(k, w.al[j])) for j in (n, n + 1)]
                    _record(trace, iteration=it, node=k, interval=n + 1,
                            target=n + 2, delta_j=d, wl_n=lv[0], wl_next=lv[1],
                            objective_bits=w.objective())
        for k in (1, 2):
            for n in range(N - 3, -1, -1):
                for m in range(N - 1, n + 1, -1):
                    if w.pair_violation(k, n, m) >= tol:
                        d = w.equalize(k, n, m)
                        _record(trace, iteration=it, node=k, interval=n + 1,
                                target=m + 1, delta_j=d,
                                objective_bits=w.objective())
        mism = w.mismatch()
        _record(trace, iteration=it, node=None, interval=None, target=None,
                delta_j=0.0, objective_bits=w.objective(), mismatch=mism)
    st = w.state(it, mism, mism < tol)
    return _result(st, scenario, mu, params, "opt-s")


def _result(st: ScheduleState, scenario: Scenario, mu: RewardWeights,
            params: ChannelParams, policy: str) -> ScheduleResult:
    trip = departure(st.power_schedule(), scenario, params, mu)
    return ScheduleResult(st, trip, trip.weighted(mu), mu, scenario.key(), policy)


@dataclass(frozen=True)
class KKTReport:
    """Residuals of the multi-interval optimality conditions.

    All entries are in normalised multiplier units or relative level gaps.
    """

    stationarity: float
    slackness: float
    ordering: float
    pairwise: float
    per_interval: tuple[float, ...] = field(default=())
    notes: tuple[str, ...] = field(default=())

    @property
    def max_residual(self) -> float:
        return max(self.stationarity, self.slackness, self.ordering, self.pairwise)

    def ok(self, threshold: float = TOL) -> bool:
        return self.max_residual < threshold


_NODE_SETS = {
    # (regions with the node's private power at zero, regions with it positive)
    1: ({2, 4, 6}, {3, 5, 7, 8}),
    2: ({2, 3, 5}, {4, 6, 7, 8}),
}


def _rel(a: float, b: float) -> float:
    if a == b:
        return 0.0
    if math.isinf(a) or math.isinf(b):
        return 1.0
    return abs(a - b) / max(abs(a), abs(b))


def kkt_residuals(state: ScheduleState, scenario: Scenario, mu: RewardWeights,
                  params: ChannelParams) -> KKTReport:
    """Check a schedule against the optimality conditions.

    * stationarity: per-interval optimality of the power split
    * slackness: multipliers may drop between intervals only where the
      causality constraint is tight
    * ordering: marginal values never rise forward in time where energy
      could be deferred (water levels non-decreasing forward)
    * pairwise: for the T ordering and its mirror, the level conditions for
      pairs of neighbouring intervals linked by stored energy, by region
    """
    w = _Work(scenario, mu, params, state.ebar1, state.ebar2, state.allocations)
    N = scenario.n
    stat = [stationarity_residual(a, mu, params) for a in state.allocations]
    slackness = ordering = pairwise = 0.0
    notes = []
    for k in (1, 2):
        sl = w.slack(k)
        e = w.e[k]
        for n in range(N - 1):
            for m in range(n + 1, N):
                ln, lm = w.lam(k, w.al[n]), w.lam(k, w.al[m])
                if lm > ln and e[n] > w.eps[k]:
                    r = 1.0 if math.isinf(lm) else (lm - ln) / lm
                    if r > ordering:
                        ordering = r
                        notes.append(f"node {k}: level rises from {n + 1} to {m + 1}")
                if ln > lm and e[m] > w.eps[k] and np.min(sl[n:m]) > w.eps[k]:
                    r = 1.0 if math.isinf(ln) else (ln - lm) / ln
                    if r > slackness:
                        slackness = r
                        notes.append(
                            f"node {k}: slack before {m + 1} but level drops")
    case, *_ = _weights(mu)
    if case == "T":
        for k in (1, 2):
            kc = (3 - k) if mu.mirrored else k
            zero, pos = _NODE_SETS[kc]
            sl = w.slack(k)
            e = w.e[k]
            for n in range(N - 1):
                if not (sl[n] > w.eps[k] and e[n] > w.eps[k] and e[n + 1] > w.eps[k]):
                    continue
                wl_a = water_levels(state, n, mu, params)
                wl_b = water_levels(state, n + 1, mu, params)
                eq_a = wl_a.wl4 if k == 1 else wl_a.wl5
                eq_b = wl_b.wl4 if k == 1 else wl_b.wl5
                pairwise = max(pairwise, _rel(eq_a or 0.0, eq_b or 0.0))
                ra = state.allocations[n].region_index
                rb = state.allocations[n + 1].region_index
                la = wl_a.wl1 if kc == 1 else wl_a.wl2
                lb = wl_b.wl1 if kc == 1 else wl_b.wl2
                if la is None or lb is None:
                    continue
                scale = max(la, lb)
                if ra in zero and rb in pos:
                    r = max(0.0, lb - la) / scale
                elif ra in pos and rb in zero:
                    r = max(0.0, la - lb) / scale
                elif ra in pos and rb in pos:
                    r = abs(la - lb) / scale
                else:
                    r = 0.0
                pairwise = max(pairwise, r)
    return KKTReport(max(stat) if stat else 0.0, slackness, ordering, pairwise,
                     tuple(stat), tuple(notes[-10:]))
