"""Reward-weight sweeps of the departure-region boundary and iso-B0 contours."""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .model import ChannelParams, DepartureTriplet, RewardWeights, Scenario
from .waterfill import MAX_ITER, TOL, schedule

__all__ = ["SweepSpec", "SweepPoint", "octant_grid", "sweep_boundary",
           "contour_b0", "parse_levels", "write_points", "read_points", "write_contours",
           "POINTS_HEADER", "CONTOUR_HEADER"]

POINTS_HEADER = ["mu0", "mu1", "mu2", "b0_bits", "b1_bits", "b2_bits", "converged"]
CONTOUR_HEADER = ["level_bits", "b1_bits", "b2_bits", "seq"]
DEFAULT_RES = 24
_FMT = "{:.12g}"
_ZERO = 1e-12   # angular samples below this are snapped to zero


def octant_grid(res: int = DEFAULT_RES) -> list[tuple[float, float, float]]:
    """Unit-sphere sampling of the positive octant.

    ``mu0 = cos(theta)``, ``mu1 = sin(theta) cos(phi)``,
    ``mu2 = sin(theta) sin(phi)`` with ``res`` values of each angle on
    ``[0, pi/2]``. Duplicates (all of ``theta = 0``) are dropped. The grid
    maps onto itself under ``mu1 <-> mu2``.
    """
    if res < 2:
        raise ValueError("grid resolution must be at least 2")
    ang = np.linspace(0.0, math.pi / 2, res)
    # sin(phi_j) taken as cos(phi_{res-1-j}) so the grid is exactly mirror-symmetric
    cos_ph = np.cos(ang)
    out, seen = [], set()
    for th in ang:
        for j in range(res):
            st = math.sin(th)
            v = [math.cos(th), st * cos_ph[j], st * cos_ph[res - 1 - j]]
            v = tuple(0.0 if abs(c) < _ZERO else float(c) for c in v)
            key = tuple(round(c, 12) for c in v)
            if key not in seen:
                seen.add(key)
                out.append(v)
    return out


@dataclass(frozen=True)
class SweepSpec:
    """Set of reward-weight triples ``(mu0, mu1, mu2)`` to solve.

    ``mu_grid`` is either an explicit list of triples or an integer
    resolution for :func:`octant_grid`. With ``include_mirrors`` every triple
    with ``mu1 != mu2`` is followed by its node-swapped twin.
    """

    mu_grid: object = DEFAULT_RES
    include_mirrors: bool = False

    def triples(self) -> list[RewardWeights]:
        if isinstance(self.mu_grid, (int, np.integer)):
            base = octant_grid(int(self.mu_grid))
        else:
            base = [tuple(float(c) for c in t) for t in self.mu_grid]
        out, seen = [], set()
        for t in base:
            if len(t) != 3:
                raise ValueError(f"expected (mu0, mu1, mu2), got {t!r}")
            cands = [t]
            if self.include_mirrors and t[1] != t[2]:
                cands.append((t[0], t[2], t[1]))
            for c in cands:
                if c not in seen:
                    seen.add(c)
                    out.append(RewardWeights(*c))
        if not out:
            raise ValueError("empty reward-weight grid")
        return out


@dataclass(frozen=True)
class SweepPoint:
    mu: RewardWeights
    triplet: DepartureTriplet
    converged: bool


def _solve_one(args) -> SweepPoint:
    scenario, mu, params, tol, max_iter = args
    res = schedule(scenario, mu, params, tol=tol, max_iter=max_iter)
    return SweepPoint(mu, res.triplet, res.converged)


def sweep_boundary(scenario: Scenario, spec: SweepSpec, params: ChannelParams,
                   workers: int = 1, tol: float = TOL,
                   max_iter: int = MAX_ITER) -> list[SweepPoint]:
    """Solve the optimal schedule for every triple of ``spec``.

    Points come back in the order of ``spec.triples()``. A triple that does
    not converge is kept with ``converged=False``.
    """
    jobs = [(scenario, mu, params, tol, max_iter) for mu in spec.triples()]
    if workers <= 1 or len(jobs) == 1:
        return [_solve_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_solve_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def write_points(points: Iterable[SweepPoint], path) -> None:
    """Write the sweep CSV (12 significant digits)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(POINTS_HEADER)
        for p in points:
            vals = (*p.mu.as_tuple(), p.triplet.b0, p.triplet.b1, p.triplet.b2)
            w.writerow([_FMT.format(v) for v in vals] + [int(p.converged)])


def read_points(path) -> list[SweepPoint]:
    """Read a sweep CSV written by :func:`write_points`."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != POINTS_HEADER:
            raise ValueError(f"{Path(path).name}: unexpected header {header!r}")
        out = []
        for line_no, row in enumerate(r, start=2):
            if not row:
                continue
            if len(row) != len(POINTS_HEADER):
                raise ValueError(f"{Path(path).name}:{line_no}: expected "
                                 f"{len(POINTS_HEADER)} columns")
            try:
                v = [float(c) for c in row[:6]]
                conv = bool(int(row[6]))
            except ValueError:
                raise ValueError(f"{Path(path).name}:{line_no}: malformed number") from None
            out.append(SweepPoint(RewardWeights(*v[:3]),
                                  DepartureTriplet(*v[3:]), conv))
    return out


def _pareto(poly: np.ndarray) -> np.ndarray:
    # keep points not dominated in (b1, b2); sorted by b1 this makes b2 non-increasing
    poly = poly[np.lexsort((-poly[:, 1], poly[:, 0]))]
    keep = []
    best = -math.inf
    for i in range(len(poly) - 1, -1, -1):
        if poly[i, 1] > best:
            keep.append(i)
            best = poly[i, 1]
    return poly[keep[::-1]]


def contour_b0(points: Sequence[SweepPoint],
               levels: Sequence[float]) -> dict[float, np.ndarray]:
    """Constant-B0 polylines in the (b1, b2) plane.

    Points are grouped by azimuth ``atan2(mu2, mu1)`` and ordered by
    elevation (``mu0`` share of the weight). Along each azimuth B0 grows
    with the elevation; the first crossing of a level is located by linear
    interpolation. Points with ``mu1 = mu2 = 0`` close every azimuth from
    above. The per-level polyline is sorted by b1 and reduced to its
    non-dominated points, so b2 is non-increasing in b1.

    Returns a mapping ``level -> array of shape (k, 2)``; a level above the
    largest B0 in the cloud maps to an empty array and raises a warning.
    """
    if not points:
        raise ValueError("empty point cloud")
    groups: dict[float, list] = {}
    top = []
    for p in points:
        m0, m1, m2 = p.mu.as_tuple()
        nrm = math.sqrt(m0 * m0 + m1 * m1 + m2 * m2)
        elev = math.asin(min(1.0, m0 / nrm))
        row = (elev, p.triplet.b0, p.triplet.b1, p.triplet.b2)
        if m1 == 0 and m2 == 0:
            top.append(row)
        else:
            groups.setdefault(round(math.atan2(m2, m1), 9), []).append(row)
    if not groups:
        groups[0.0] = []
    b0_max = max(p.triplet.b0 for p in points)
    out = {}
    for lev in levels:
        lev = float(lev)
        if lev > b0_max:
            warnings.warn(f"level {lev:.6g} bits exceeds the largest B0 "
                          f"{b0_max:.6g} bits in the cloud", stacklevel=2)
            out[lev] = np.empty((0, 2))
            continue
        poly = []
        for az in sorted(groups):
            ray = sorted(groups[az] + top)
            prev = None
            for row in ray:
                if row[1] >= lev:
                    if prev is None or row[1] == prev[1]:
                        poly.append(row[2:])
                    else:
                        t = (lev - prev[1]) / (row[1] - prev[1])
                        poly.append(tuple(prev[k] + t * (row[k] - prev[k]) for k in (2, 3)))
                    break
                prev = row
        arr = np.array(poly, dtype=float).reshape(-1, 2)
        out[lev] = _pareto(arr) if len(arr) else arr
    return out


def write_contours(contours: dict[float, np.ndarray], path) -> None:
    """Write the contour CSV ``level_bits,b1_bits,b2_bits,seq``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CONTOUR_HEADER)
        for lev, poly in contours.items():
            for i, (b1, b2) in enumerate(poly):
                w.writerow([_FMT.format(lev), _FMT.format(b1), _FMT.format(b2), i])


def parse_levels(text: str) -> list[float]:
    """Parse a comma-separated list of levels in bits."""
    try:
        vals = [float(c) for c in text.split(",") if c.strip()]
    except ValueError:
        raise ValueError("levels: expected comma-separated numbers") from None
    if not vals:
        raise ValueError("levels: at least one level is required")
    return vals
