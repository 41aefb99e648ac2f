"""Physical model: channel capacity, interval structure, corner-point rates,
departure accounting and energy-causality checks.

All quantities are SI (W, J, s, Hz, bits). Base-2 logarithms throughout.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

__all__ = [
    "EPS_FEAS",
    "ChannelParams",
    "DepartureTriplet",
    "PowerSchedule",
    "Rates",
    "RewardWeights",
    "Scenario",
    "ScenarioError",
    "Violation",
    "boundary_rates",
    "build_intervals",
    "capacity",
    "check_feasibility",
    "corner_for_case",
    "departure",
    "load_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
]

# absolute slack allowed on causality constraints, in J
EPS_FEAS = 1e-9

_LN2 = math.log(2.0)


class ScenarioError(ValueError):
    """Raised for malformed scenario input; the message names the field."""


@dataclass(frozen=True)
class ChannelParams:
    """Channel constants.

    Parameters
    ----------
    w_tot : float
        Bandwidth in Hz.
    n0 : float
        Noise spectral density in W/Hz.
    h : float
        Path-loss gain (dimensionless).
    """

    w_tot: float
    n0: float
    h: float

    def __post_init__(self) -> None:
        for name in ("w_tot", "n0", "h"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")

    @property
    def a(self) -> float:
        """Power constant in W; the noise power seen at the receiver."""
        return self.w_tot * self.n0 / self.h


def capacity(p, params: ChannelParams):
    """Shannon rate ``w_tot * log2(1 + p / a)`` in bits/s.

    Accepts a scalar or an array. Negative power raises ``ValueError``.
    """
    if isinstance(p, (int, float)):
        if not p >= 0:
            raise ValueError("capacity is defined for non-negative power only")
        return params.w_tot * math.log1p(p / params.a) / _LN2
    arr = np.asarray(p, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("capacity is defined for non-negative power only")
    out = params.w_tot * np.log1p(arr / params.a) / _LN2
    if out.ndim == 0:
        return float(out)
    return out


class Rates(NamedTuple):
    """Rate triplet in bits/s."""

    r0: float
    r1: float
    r2: float


def boundary_rates(point: str, p1: float, p2: float, p0: float,
                   params: ChannelParams) -> Rates:
    """Rates of a corner point of the single-interval capacity region.

    ``point`` is one of ``"S", "T", "U", "V", "Q"``. The returned tuple has
    named fields so the common rate ``r0`` is never confused with ``r1``.
    """
    for name, v in (("p0", p0), ("p1", p1), ("p2", p2)):
        if v < 0:
            raise ValueError(f"{name} must be non-negative")
    c = lambda p: capacity(p, params)  # noqa: E731
    c_all = c(p0 + p1 + p2)
    c_12 = c(p1 + p2)
    if point == "T":
        return Rates(c_all - c_12, c(p1), c_12 - c(p1))
    if point == "U":
        return Rates(c_all - c_12, c_12 - c(p2), c(p2))
    if point == "S":
        return Rates(c_all - c(p1), c(p1), 0.0)
    if point == "V":
        return Rates(c_all - c(p2), 0.0, c(p2))
    if point == "Q":
        return Rates(c_all, 0.0, 0.0)
    raise ValueError(f"unknown boundary point {point!r}")


@dataclass(frozen=True)
class RewardWeights:
    """Weights of the common (mu0) and individual (mu1, mu2) messages.

    The ``case`` tag follows the weight ordering:

    ``T``: mu1 >= mu2 >= mu0, ``U``: mu2 > mu1 >= mu0 (mirror of T),
    ``S``: mu1 >= mu0 > mu2, ``V``: mu2 >= mu0 > mu1 (mirror of S),
    ``Q``: mu0 > max(mu1, mu2).

    Ties are resolved towards T so that mu1 == mu2 gives the T corner.
    """

    mu0: float
    mu1: float
    mu2: float

    def __post_init__(self) -> None:
        vals = (self.mu0, self.mu1, self.mu2)
        if any((not math.isfinite(v)) or v < 0 for v in vals):
            raise ValueError("reward weights must be finite and non-negative")
        if all(v == 0 for v in vals):
            raise ValueError("reward weights must not all be zero")

    @classmethod
    def parse(cls, text: str) -> "RewardWeights":
        """Parse ``"mu0,mu1,mu2"``."""
        parts = [s.strip() for s in text.split(",")]
        if len(parts) != 3:
            raise ValueError("expected three comma-separated weights mu0,mu1,mu2")
        return cls(*(float(s) for s in parts))

    @property
    def case(self) -> str:
        m0, m1, m2 = self.mu0, self.mu1, self.mu2
        if m0 <= min(m1, m2):
            return "T" if m1 >= m2 else "U"
        if m0 > max(m1, m2):
            return "Q"
        return "S" if m1 >= m2 else "V"

    @property
    def mirrored(self) -> bool:
        return self.case in ("U", "V")

    def swapped(self) -> "RewardWeights":
        return RewardWeights(self.mu0, self.mu2, self.mu1)

    def canonical(self) -> "RewardWeights":
        """Weights with node roles swapped when the case is a mirror."""
        return self.swapped() if self.mirrored else self

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.mu0, self.mu1, self.mu2)


def corner_for_case(case: str) -> str:
    """Corner used to account departed bits for a weight case.

    The T corner reduces to S when p2 = 0 and to Q when p1 = p2 = 0, so it
    serves all non-mirrored cases; mirrored cases use U. Using the generic
    corner keeps the private data of a lone transmitting node counted as
    private data.
    """
    if case in ("T", "S", "Q"):
        return "T"
    if case in ("U", "V"):
        return "U"
    raise ValueError(f"unknown case {case!r}")


@dataclass(frozen=True)
class DepartureTriplet:
    """Delivered bits for the common (b0) and individual (b1, b2) messages."""

    b0: float
    b1: float
    b2: float

    def weighted(self, mu: RewardWeights) -> float:
        return mu.mu0 * self.b0 + mu.mu1 * self.b1 + mu.mu2 * self.b2

    def as_dict(self) -> dict[str, float]:
        return {
            "b0_bits": self.b0, "b1_bits": self.b1, "b2_bits": self.b2,
            "b0_mbit": self.b0 / 1e6, "b1_mbit": self.b1 / 1e6,
            "b2_mbit": self.b2 / 1e6,
        }


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Scenario:
    """Harvest events and the derived interval structure.

    ``harvest1[n]`` is the energy node 1 harvests exactly at ``boundaries[n]``;
    ``env1[n]`` is the cumulative energy harvested up to and including that
    instant. Energy harvested at a boundary is usable in the interval that
    starts there.
    """

    events_node1: tuple[tuple[float, float], ...]
    events_node2: tuple[tuple[float, float], ...]
    t_final: float
    boundaries: np.ndarray = field(repr=False)
    lengths: np.ndarray = field(repr=False)
    harvest1: np.ndarray = field(repr=False)
    harvest2: np.ndarray = field(repr=False)
    env1: np.ndarray = field(repr=False)
    env2: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.lengths)

    def harvest(self, k: int) -> np.ndarray:
        return self.harvest1 if k == 1 else self.harvest2

    def envelope(self, k: int) -> np.ndarray:
        return self.env1 if k == 1 else self.env2

    def key(self) -> str:
        """Stable fingerprint of the interval structure and energy envelopes."""
        h = hashlib.sha256()
        for arr in (self.lengths, self.env1, self.env2):
            h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
        return h.hexdigest()[:16]

    def swapped(self) -> "Scenario":
        """The same scenario with the node roles exchanged."""
        return build_intervals(self.events_node2, self.events_node1, self.t_final)


def _clean_events(events: Iterable[Sequence[float]], t_final: float,
                  label: str) -> dict[float, float]:
    merged: dict[float, float] = {}
    for i, ev in enumerate(events):
        if len(ev) != 2:
            raise ScenarioError(f"{label}[{i}]: expected (time, energy)")
        t, e = float(ev[0]), float(ev[1])
        if not (math.isfinite(t) and math.isfinite(e)):
            raise ScenarioError(f"{label}[{i}]: non-finite value")
        if t < 0:
            raise ScenarioError(f"{label}[{i}]: event time {t} is negative")
        if t >= t_final:
            raise ScenarioError(
                f"{label}[{i}]: event time {t} is not before t_final {t_final}")
        if e < 0:
            raise ScenarioError(f"{label}[{i}]: energy {e} is negative")
        merged[t] = merged.get(t, 0.0) + e
    return merged


def build_intervals(events_node1: Iterable[Sequence[float]],
                    events_node2: Iterable[Sequence[float]],
                    t_final: float) -> Scenario:
    """Derive boundaries, interval lengths and cumulative energy envelopes.

    Events are (time in s, energy in J). Events of one node at the same
    instant are merged by summing their energies.
    """
    t_final = float(t_final)
    if not (math.isfinite(t_final) and t_final > 0):
        raise ScenarioError("t_final must be a positive finite number")
    m1 = _clean_events(events_node1, t_final, "node1")
    m2 = _clean_events(events_node2, t_final, "node2")
    times = sorted(set(m1) | set(m2))
    if not times:
        raise ScenarioError("at least one harvest event is required")
    bnd = np.array(times, dtype=float)
    lengths = np.diff(np.append(bnd, t_final))
    h1 = np.array([m1.get(t, 0.0) for t in times])
    h2 = np.array([m2.get(t, 0.0) for t in times])
    return Scenario(
        events_node1=tuple(sorted(m1.items())),
        events_node2=tuple(sorted(m2.items())),
        t_final=t_final,
        boundaries=_readonly(bnd),
        lengths=_readonly(lengths),
        harvest1=_readonly(h1),
        harvest2=_readonly(h2),
        env1=_readonly(np.cumsum(h1)),
        env2=_readonly(np.cumsum(h2)),
    )


@dataclass(frozen=True)
class PowerSchedule:
    """Per-interval powers (W) and common-power split.

    ``pbar1 = p1 + rho**2 * p0`` and ``pbar2 = p2 + (1 - rho)**2 * p0`` are
    the powers drawn from each node's battery.
    """

    p0: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    rho: np.ndarray

    def __post_init__(self) -> None:
        arrays = [np.asarray(getattr(self, f), dtype=float)
                  for f in ("p0", "p1", "p2", "rho")]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
            raise ValueError("schedule arrays must be 1-D with equal length")
        if any(np.any(a < 0) for a in arrays[:3]):
            raise ValueError("powers must be non-negative")
        if np.any(arrays[3] < 0) or np.any(arrays[3] > 1):
            raise ValueError("rho must lie in [0, 1]")
        for f, a in zip(("p0", "p1", "p2", "rho"), arrays):
            object.__setattr__(self, f, _readonly(a))

    @classmethod
    def zeros(cls, n: int) -> "PowerSchedule":
        z = np.zeros(n)
        return cls(z, z, z, np.full(n, 0.5))

    @property
    def n(self) -> int:
        return len(self.p0)

    @property
    def pbar1(self) -> np.ndarray:
        return self.p1 + self.rho ** 2 * self.p0

    @property
    def pbar2(self) -> np.ndarray:
        return self.p2 + (1.0 - self.rho) ** 2 * self.p0

    def swapped(self) -> "PowerSchedule":
        return PowerSchedule(self.p0, self.p2, self.p1, 1.0 - self.rho)


def departure(schedule: PowerSchedule, scenario: Scenario,
              params: ChannelParams, case) -> DepartureTriplet:
    """Bits delivered by ``schedule``, accounted at the corner of ``case``.

    ``case`` is a :class:`RewardWeights` or a case tag.
    """
    if schedule.n != scenario.n:
        raise ValueError(
            f"schedule has {schedule.n} intervals, scenario has {scenario.n}")
    tag = case.case if isinstance(case, RewardWeights) else case
    corner = corner_for_case(tag)
    L = scenario.lengths
    p0, p1, p2 = schedule.p0, schedule.p1, schedule.p2
    c_all = capacity(p0 + p1 + p2, params)
    c_12 = capacity(p1 + p2, params)
    if corner == "T":
        r1 = capacity(p1, params)
        r2 = c_12 - r1
    else:
        r2 = capacity(p2, params)
        r1 = c_12 - r2
    r0 = c_all - c_12
    return DepartureTriplet(float(np.dot(r0, L)), float(np.dot(r1, L)),
                            float(np.dot(r2, L)))


class Violation(NamedTuple):
    """A causality violation; ``slack`` is envelope minus consumption (J)."""

    node: int
    interval: int
    slack: float


def check_feasibility(schedule: PowerSchedule, scenario: Scenario,
                      tol: float = EPS_FEAS, exhaust: bool = True) -> list[Violation]:
    """Report every energy-causality violation of ``schedule``.

    Consumption up to each interval must not exceed the harvested envelope;
    with ``exhaust`` the total must also equal the total harvest. Intervals
    are 1-based in the report.
    """
    if schedule.n != scenario.n:
        raise ValueError(
            f"schedule has {schedule.n} intervals, scenario has {scenario.n}")
    out: list[Violation] = []
    for k, pbar in ((1, schedule.pbar1), (2, schedule.pbar2)):
        used = np.cumsum(pbar * scenario.lengths)
        slack = scenario.envelope(k) - used
        for i, s in enumerate(slack):
            last = i == scenario.n - 1
            if s < -tol or (last and exhaust and abs(s) > tol):
                out.append(Violation(k, i + 1, float(s)))
    return out


def scenario_from_dict(data: Mapping) -> tuple[Scenario, ChannelParams]:
    """Build a scenario and channel from the JSON-style mapping.

    Energies are given in mJ under ``e_mJ`` and times in s under ``t_s``.
    """
    if not isinstance(data, Mapping):
        raise ScenarioError("scenario: expected a JSON object")
    events = {}
    for node in ("node1", "node2"):
        raw = data.get(node, [])
        if not isinstance(raw, list):
            raise ScenarioError(f"{node}: expected a list of events")
        evs = []
        for i, item in enumerate(raw):
            if not isinstance(item, Mapping):
                raise ScenarioError(f"{node}[{i}]: expected an object")
            for fld in ("t_s", "e_mJ"):
                if fld not in item:
                    raise ScenarioError(f"{node}[{i}].{fld}: missing")
                if not isinstance(item[fld], (int, float)) or isinstance(item[fld], bool):
                    raise ScenarioError(f"{node}[{i}].{fld}: expected a number")
            evs.append((float(item["t_s"]), float(item["e_mJ"]) * 1e-3))
        events[node] = evs
    if "t_final_s" not in data:
        raise ScenarioError("t_final_s: missing")
    t_final = data["t_final_s"]
    if not isinstance(t_final, (int, float)) or isinstance(t_final, bool):
        raise ScenarioError("t_final_s: expected a number")
    ch = data.get("channel")
    if not isinstance(ch, Mapping):
        raise ScenarioError("channel: missing or not an object")
    vals = {}
    for fld in ("w_hz", "n0_w_per_hz", "h"):
        v = ch.get(fld)
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ScenarioError(f"channel.{fld}: missing or not a number")
        vals[fld] = float(v)
    try:
        params = ChannelParams(vals["w_hz"], vals["n0_w_per_hz"], vals["h"])
    except ValueError as exc:
        raise ScenarioError(f"channel: {exc}") from None
    scen = build_intervals(events["node1"], events["node2"], float(t_final))
    return scen, params


def load_scenario(path) -> tuple[Scenario, ChannelParams]:
    """Read a scenario JSON file."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario: invalid JSON ({exc})") from None
    return scenario_from_dict(data)


def scenario_to_dict(scenario: Scenario, params: ChannelParams) -> dict:
    ev = lambda es: [{"t_s": t, "e_mJ": e * 1e3} for t, e in es]  # noqa: E731
    return {
        "node1": ev(scenario.events_node1),
        "node2": ev(scenario.events_node2),
        "t_final_s": scenario.t_final,
        "channel": {"w_hz": params.w_tot, "n0_w_per_hz": params.n0, "h": params.h},
    }
