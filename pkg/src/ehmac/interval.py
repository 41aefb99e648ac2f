"""Single-interval weighted-rate maximisation.

Given the powers a node may spend in one interval (pbar1, pbar2), choose the
private powers p1, p2 and the beam-formed common power p0 that maximise
``mu0*R0 + mu1*R1 + mu2*R2`` at the corner selected by the weight ordering,
then recover the per-interval multipliers of the two power constraints.

Internally everything is normalised: P' = P / A and multipliers are
lambda' = lambda * A * ln2 / W_tot, so the objective becomes a sum of natural
logs ``mu0*ln(1+Sigma) + m2*ln(1+p1+p2) + m1*ln(1+p1)``. The search variable
is ``s = sqrt(pbar1' - p1')``; with ``q = sqrt(pbar2' - p2')`` the common
power is ``p0' = (s + q)**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

from scipy.optimize import brentq

from .model import ChannelParams, RewardWeights, boundary_rates, corner_for_case

__all__ = [
    "EPS_POW",
    "EPS_KKT",
    "IntervalAllocation",
    "RegionError",
    "classify_region",
    "g_fun",
    "interval_lambdas",
    "recover_multipliers",
    "rho_from_multipliers",
    "solve_interval",
    "stationarity_residual",
]

EPS_POW = 1e-12   # W, positivity threshold and identity tolerance
EPS_KKT = 1e-7    # normalised stationarity tolerance

_CLIP = 1e12
_INF = math.inf


class RegionError(ValueError):
    """Power pattern matches none of the optimality regions."""


@dataclass(frozen=True)
class IntervalAllocation:
    """Optimal single-interval powers and multipliers.

    Attributes
    ----------
    p0, p1, p2 : float
        Common and private powers in W.
    rho : float
        Share of the common signal amplitude carried by node 1.
    lambda1, lambda2 : float
        Normalised marginal value of power for each node. May be ``inf`` when
        a node with zero power would unlock a jump in value (common data
        needs both nodes).
    region_index : int
        Optimality region in the canonical (non-mirrored) frame.
    chi1, chi2 : float or None
        ``sqrt((pbar_k - p_k) / (pbar_j - p_j))`` when both differences are
        positive.
    objective : float
        Weighted rate ``mu . R`` in bits/s.
    """

    pbar1: float
    pbar2: float
    p0: float
    p1: float
    p2: float
    rho: float
    lambda1: float
    lambda2: float
    region_index: int
    chi1: Optional[float]
    chi2: Optional[float]
    case: str
    objective: float

    def swapped(self) -> "IntervalAllocation":
        return replace(self, pbar1=self.pbar2, pbar2=self.pbar1, p1=self.p2,
                       p2=self.p1, rho=1.0 - self.rho, lambda1=self.lambda2,
                       lambda2=self.lambda1, chi1=self.chi2, chi2=self.chi1)


def g_fun(l1: float, l2: float) -> float:
    """``l1*l2/(l1+l2)``; the effective multiplier of the common power."""
    if l1 < 0 or l2 < 0:
        raise ValueError("multipliers must be non-negative")
    if l1 == 0 and l2 == 0:
        raise ValueError("g is undefined when both multipliers are zero")
    if math.isinf(l1):
        return float(l2)
    if math.isinf(l2):
        return float(l1)
    return l1 * l2 / (l1 + l2)


def rho_from_multipliers(l1p: float, l2p: float) -> float:
    """Common split ``rho = l2/(l1+l2)`` implied by the power multipliers."""
    if l1p < 0 or l2p < 0:
        raise ValueError("multipliers must be non-negative")
    if l1p + l2p == 0:
        raise ValueError("rho is undefined when both multipliers are zero")
    if math.isinf(l1p):
        return 0.0 if not math.isinf(l2p) else 0.5
    if math.isinf(l2p):
        return 1.0
    return l2p / (l1p + l2p)


def _weights(mu: RewardWeights) -> tuple[str, float, float, float]:
    """Canonical case tag and log weights (mu0, m2, m1)."""
    c = mu.canonical()
    case = c.case
    if case == "T":
        return case, c.mu0, c.mu2 - c.mu0, c.mu1 - c.mu2
    if case == "S":
        return case, c.mu0, 0.0, c.mu1 - c.mu0
    return case, c.mu0, 0.0, 0.0


def _inner(s: float, x: float, y: float, mu0: float, m2: float):
    """Best q for fixed s, from the stationarity quadratic in q.

    Returns (q, r) with r = q/s, or the s -> 0 limit of q/s when s == 0.
    """
    p1 = x - s * s
    k = 1.0 + p1 + y
    b = m2 * (1.0 + x + y)
    rad = math.sqrt(b * b + 4.0 * (mu0 + 2.0 * m2) * mu0 * s * s * k)
    den = b + rad
    r = 2.0 * mu0 * k / den if den > 0 else _INF
    sy = math.sqrt(y)
    if s > 0:
        q = min(r * s, sy)
        return q, q / s
    return 0.0, r


def _solve_canonical(x: float, y: float, case: str, mu0: float, m2: float,
                     m1: float) -> tuple[float, float]:
    """Return (s, q) maximising the canonical objective for x, y > 0."""
    sx, sy = math.sqrt(x), math.sqrt(y)
    if case == "Q" or (m1 == 0 and m2 == 0):
        return sx, sy
    if mu0 == 0:
        return 0.0, 0.0

    def h(s: float) -> float:
        # -df/dp1, decreasing in s
        q, r = _inner(s, x, y, mu0, m2)
        S = 1.0 + x + y + 2.0 * s * q
        p1 = x - s * s
        v = m2 / (1.0 + p1 + y - q * q) + m1 / (1.0 + p1)
        val = mu0 * r / S - v
        return max(-_CLIP, min(_CLIP, val))

    if h(sx) >= 0:
        s = sx
    elif h(0.0) <= 0:
        s = 0.0
    else:
        # absolute tolerance tied to the bracket: a root below it changes p0
        # by a relative 1e-36 at most
        s = brentq(h, 0.0, sx, xtol=1e-18 * sx, rtol=4 * 2.220446049250313e-16,
                   maxiter=500)
    q, _ = _inner(s, x, y, mu0, m2)
    return s, q


def interval_lambdas(x: float, y: float, s: float, q: float,
                     mu: RewardWeights) -> tuple[float, float]:
    """Normalised multipliers in the canonical frame.

    ``x, y`` are normalised assigned powers, ``s, q`` the square roots of the
    common contributions. For a node with zero assigned power the value is
    the right derivative of the optimal value, ``inf`` where the value jumps.
    """
    case, mu0, m2, m1 = _weights(mu)
    c = mu.canonical()
    mu1, mu2 = c.mu1, c.mu2
    if x <= 0 and y <= 0:
        return mu1, mu2
    if y <= 0:
        l1 = mu1 / (1.0 + x)
        if case == "Q":
            return l1, _INF
        if mu1 > mu0:
            common = mu0 * mu1 / ((mu1 - mu0) * (1.0 + x))
        else:
            common = _INF if mu0 > 0 else 0.0
        if case == "S":
            return l1, common
        return l1, max(mu2 / (1.0 + x), common)
    if x <= 0:
        l2 = mu2 / (1.0 + y)
        if case in ("Q", "S"):
            return _INF, l2
        if mu2 > mu0:
            common = mu0 * mu2 / ((mu2 - mu0) * (1.0 + y))
        else:
            common = _INF if mu0 > 0 else 0.0
        return max(l2 + (mu1 - mu2), common), l2
    p1 = x - s * s
    p2 = y - q * q
    u = mu0 / (1.0 + x + y + 2.0 * s * q)
    v = m2 / (1.0 + p1 + p2)
    w = m1 / (1.0 + p1)
    if s > 0 and q > 0:
        return u * (1.0 + q / s), u * (1.0 + s / q)
    l1 = _INF if (s == 0 and q > 0 and mu0 > 0) else u + v + w
    l2 = _INF if (q == 0 and s > 0 and mu0 > 0) else u + v
    return l1, l2


_REGIONS = {
    "T": {(0, 0, 0): 1, (1, 0, 0): 2, (0, 1, 0): 3, (0, 0, 1): 4,
          (1, 1, 0): 5, (1, 0, 1): 6, (0, 1, 1): 7, (1, 1, 1): 8},
    # index 5 of S and 3, 4 of Q: a lone node sending private data
    "S": {(0, 0, 0): 1, (0, 1, 0): 2, (1, 0, 0): 3, (1, 1, 0): 4, (0, 0, 1): 5},
    "Q": {(0, 0, 0): 1, (1, 0, 0): 2, (0, 1, 0): 3, (0, 0, 1): 4},
}


def _region(case: str, p0: float, p1: float, p2: float) -> int:
    key = (int(p0 > EPS_POW), int(p1 > EPS_POW), int(p2 > EPS_POW))
    try:
        return _REGIONS[case][key]
    except KeyError:
        raise RegionError(
            f"power pattern (p0, p1, p2 > 0) = {key} is not an optimality "
            f"region of case {case}") from None


def classify_region(alloc: IntervalAllocation, mu: RewardWeights) -> int:
    """Optimality region index from the sign pattern of the powers.

    Mirrored cases are classified in the node-swapped frame.
    """
    case, *_ = _weights(mu)
    p1, p2 = (alloc.p2, alloc.p1) if mu.mirrored else (alloc.p1, alloc.p2)
    return _region(case, alloc.p0, p1, p2)


def _build(x, y, s, q, mu_c: RewardWeights, params: ChannelParams,
           case: str) -> IntervalAllocation:
    a = params.a
    p1n = max(x - s * s, 0.0)
    p2n = max(y - q * q, 0.0)
    p0n = (s + q) ** 2
    l1, l2 = interval_lambdas(x, y, s, q, mu_c)
    if p0n > 0:
        rho = s / (s + q)
    elif x > 0 and y <= 0:
        rho = 1.0
    elif y > 0 and x <= 0:
        rho = 0.0
    elif x <= 0 and y <= 0:
        rho = 0.5
    else:
        rho = rho_from_multipliers(l1, l2)
    chi1 = s / q if (s > 0 and q > 0) else None
    chi2 = q / s if (s > 0 and q > 0) else None
    p0, p1, p2 = p0n * a, p1n * a, p2n * a
    rates = boundary_rates(corner_for_case(case), p1, p2, p0, params)
    obj = mu_c.mu0 * rates.r0 + mu_c.mu1 * rates.r1 + mu_c.mu2 * rates.r2
    return IntervalAllocation(
        pbar1=x * a, pbar2=y * a, p0=p0, p1=p1, p2=p2, rho=rho,
        lambda1=l1, lambda2=l2, region_index=_region(case, p0, p1, p2),
        chi1=chi1, chi2=chi2, case=case, objective=obj)


def solve_interval(pbar1: float, pbar2: float, mu: RewardWeights,
                   params: ChannelParams) -> IntervalAllocation:
    """Maximise the weighted rate of one interval.

    Parameters
    ----------
    pbar1, pbar2 : float
        Powers (W) available to node 1 and node 2 in this interval.
    mu : RewardWeights
        Reward weights; mirrored orderings are solved with node roles swapped.
    params : ChannelParams

    Returns
    -------
    IntervalAllocation
        The maximiser with multipliers in the physical node order.

    Notes
    -----
    Common data is only sent when both nodes have power. A lone node spends
    all of its power on its own private message.
    """
    if pbar1 < 0 or pbar2 < 0:
        raise ValueError("assigned powers must be non-negative")
    a = params.a
    x, y = pbar1 / a, pbar2 / a
    mirrored = mu.mirrored
    if mirrored:
        x, y = y, x
    mu_c = mu.canonical()
    case, mu0, m2, m1 = _weights(mu)
    if x > 0 and y > 0:
        s, q = _solve_canonical(x, y, case, mu0, m2, m1)
    else:
        s, q = 0.0, 0.0
    alloc = _build(x, y, s, q, mu_c, params, case)
    return alloc.swapped() if mirrored else alloc


def _check_identity(p0, p1, p2, pbar1, pbar2, a):
    for name, v in (("p0", p0), ("p1", p1), ("p2", p2)):
        if v < -EPS_POW:
            raise RegionError(f"{name} is negative")
    if p1 > pbar1 + EPS_POW or p2 > pbar2 + EPS_POW:
        raise RegionError("private power exceeds the assigned power")
    da, db = max(pbar1 - p1, 0.0), max(pbar2 - p2, 0.0)
    if da > EPS_POW and db > EPS_POW:
        expect = (math.sqrt(da) + math.sqrt(db)) ** 2
        if abs(p0 - expect) > max(EPS_POW, 1e-9 * expect):
            raise RegionError("p0 violates the beamforming identity")
    elif p0 > EPS_POW:
        raise RegionError("common power needs power from both nodes")
    return math.sqrt(da / a), math.sqrt(db / a)


def recover_multipliers(p0: float, p1: float, p2: float, pbar1: float,
                        pbar2: float, mu: RewardWeights,
                        params: ChannelParams) -> tuple[float, float]:
    """Normalised multipliers (lambda1, lambda2) implied by a power split.

    The powers must satisfy the equality form of the per-node power
    constraints; ``RegionError`` is raised otherwise or when the sign
    pattern matches no optimality region.
    """
    a = params.a
    s, q = _check_identity(p0, p1, p2, pbar1, pbar2, a)
    x, y = pbar1 / a, pbar2 / a
    case, *_ = _weights(mu)
    if mu.mirrored:
        x, y, s, q, p1, p2 = y, x, q, s, p2, p1
    _region(case, p0, p1, p2)
    l1, l2 = interval_lambdas(x, y, s, q, mu.canonical())
    return (l2, l1) if mu.mirrored else (l1, l2)


def stationarity_residual(alloc: IntervalAllocation, mu: RewardWeights,
                          params: ChannelParams) -> float:
    """Largest normalised violation of the single-interval optimality
    conditions at ``alloc``.

    Interior private powers need a zero partial derivative; powers at a
    bound need the derivative to point out of the box. With common power the
    split must satisfy ``rho = l2/(l1+l2)`` and ``mu0/(1+Sigma') = g``; without
    it ``mu0/(1+Sigma') <= g``.
    """
    al = alloc.swapped() if mu.mirrored else alloc
    case, mu0, m2, m1 = _weights(mu)
    a = params.a
    x, y = al.pbar1 / a, al.pbar2 / a
    if x <= 0 or y <= 0:
        return 0.0
    p1, p2, p0 = al.p1 / a, al.p2 / a, al.p0 / a
    if p0 > 0:
        # rho splits the common amplitude; better conditioned than pbar - p
        s, q = al.rho * math.sqrt(p0), (1.0 - al.rho) * math.sqrt(p0)
    else:
        s = math.sqrt(max(x - p1, 0.0))
        q = math.sqrt(max(y - p2, 0.0))
    u = mu0 / (1.0 + p0 + p1 + p2)
    v = m2 / (1.0 + p1 + p2)
    w = m1 / (1.0 + p1)
    res = 0.0

    def box(d: float, val: float, hi: float) -> float:
        if hi <= EPS_POW / a:
            return 0.0   # variable pinned at zero by an empty budget
        if val <= EPS_POW / a:
            return max(0.0, d)
        if val >= hi - EPS_POW / a:
            return max(0.0, -d)
        return abs(d)

    if case in ("T", "S"):
        r = q / s if s > 0 else (_INF if q > 0 else 0.0)
        d1 = -u * r + v + w
        if math.isfinite(d1):
            res = max(res, box(d1, p1, x))
        elif p1 < x - EPS_POW / a:
            res = _INF
    if case == "T":
        r2 = s / q if q > 0 else (_INF if s > 0 else 0.0)
        d2 = -u * r2 + v
        if math.isfinite(d2):
            res = max(res, box(d2, p2, y))
        elif p2 < y - EPS_POW / a:
            res = _INF
    l1, l2 = al.lambda1, al.lambda2
    if math.isfinite(l1) and math.isfinite(l2) and l1 + l2 > 0:
        g = g_fun(l1, l2)
        if p0 > EPS_POW / a:
            res = max(res, abs(u - g), abs(al.rho - l2 / (l1 + l2)))
        else:
            res = max(res, u - g)
    return res
