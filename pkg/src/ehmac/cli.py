"""Command-line front-end.

Exit codes: 0 success, 1 oracle check failed, 2 input error,
3 non-convergence (results are still written, flagged).
"""

from __future__ import annotations

import argparse
import contextlib
import json
import sys
from typing import Optional, Sequence

from .baselines import no_scheduling, uniform_scheduling
from .model import RewardWeights, ScenarioError, load_scenario
from .oracle import MAX_N, GridSpec, brute_force_schedule, compare
from .sweep import (
    SweepSpec,
    contour_b0,
    parse_levels,
    read_points,
    sweep_boundary,
    write_contours,
    write_points,
)
from .waterfill import MAX_ITER, TOL, kkt_residuals, schedule

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT = 2
EXIT_NOT_CONVERGED = 3


class InputError(Exception):
    pass


def _mu(text: str) -> RewardWeights:
    try:
        return RewardWeights.parse(text)
    except ValueError as exc:
        raise InputError(f"--mu: {exc}") from None


def _scenario(path: str):
    try:
        return load_scenario(path)
    except FileNotFoundError:
        raise InputError(f"--scenario: no such file {path!r}") from None
    except ScenarioError as exc:
        raise InputError(f"{path}: {exc}") from None


def _emit(doc: dict, out: Optional[str]) -> None:
    text = json.dumps(doc, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _grid(text: str) -> GridSpec:
    try:
        parts = [int(s) for s in text.split(",")]
        return GridSpec(*parts)
    except (ValueError, TypeError) as exc:
        raise InputError(f"--grid: expected energy_steps[,power_steps[,rounds]] ({exc})") from None


def cmd_solve(args) -> int:
    scen, params = _scenario(args.scenario)
    mu = _mu(args.mu)
    with contextlib.ExitStack() as stack:
        trace = stack.enter_context(open(args.trace, "w")) if args.trace else None
        res = schedule(scen, mu, params, tol=args.tol, max_iter=args.max_iter,
                       trace=trace, init=args.init)
    doc = res.to_dict(scen)
    doc["kkt_max_residual"] = kkt_residuals(res.state, scen, mu, params).max_residual
    _emit(doc, args.out)
    if not res.converged:
        print(f"warning: not converged after {res.state.iterations} iterations "
              f"(mismatch {res.state.mismatch:.3g})", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_baseline(args) -> int:
    scen, params = _scenario(args.scenario)
    mu = _mu(args.mu)
    fn = no_scheduling if args.policy == "no-s" else uniform_scheduling
    _emit(fn(scen, mu, params).to_dict(scen), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    scen, params = _scenario(args.scenario)
    if args.grid_res < 2:
        raise InputError("--grid-res: must be at least 2")
    spec = SweepSpec(args.grid_res, include_mirrors=args.mirrors)
    pts = sweep_boundary(scen, spec, params, workers=args.workers,
                         tol=args.tol, max_iter=args.max_iter)
    write_points(pts, args.out)
    bad = sum(not p.converged for p in pts)
    print(f"{len(pts)} points written to {args.out}", file=sys.stderr)
    if bad:
        print(f"warning: {bad} points did not converge", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_contour(args) -> int:
    try:
        levels = parse_levels(args.levels)
    except ValueError as exc:
        raise InputError(f"--{exc}") from None
    if args.mbit:
        levels = [v * 1e6 for v in levels]
    try:
        pts = read_points(args.points)
    except FileNotFoundError:
        raise InputError(f"--points: no such file {args.points!r}") from None
    except ValueError as exc:
        raise InputError(f"--points: {exc}") from None
    if not pts:
        raise InputError("--points: no data rows")
    write_contours(contour_b0(pts, levels), args.out)
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    scen, params = _scenario(args.scenario)
    if scen.n > MAX_N:
        raise InputError(f"--scenario: oracle supports at most {MAX_N} intervals, "
                         f"scenario has {scen.n}")
    mu = _mu(args.mu)
    grid = _grid(args.grid) if args.grid else GridSpec()
    wf = schedule(scen, mu, params)
    orc = brute_force_schedule(scen, mu, params, grid)
    rep = compare(wf, orc, slack=args.slack)
    print(rep.line())
    _emit({"passed": rep.passed, "solver_objective_bits": wf.objective,
           "oracle_objective_bits": orc.objective, "relative_gap": rep.relative,
           "solver": wf.triplet.as_dict(), "oracle": orc.triplet.as_dict()}, args.out)
    if not wf.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK if rep.passed else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ehmac",
        description="Offline power scheduling for an energy-harvesting "
                    "two-user MAC with common data.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, mu=True):
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        if mu:
            p.add_argument("--mu", required=True, help="reward weights mu0,mu1,mu2")
        p.add_argument("--out", help="write JSON here instead of stdout")

    p = sub.add_parser("solve", help="optimal schedule for one weight triple")
    common(p)
    p.add_argument("--trace", help="write per-step JSON-lines trace to this file")
    p.add_argument("--tol", type=float, default=TOL)
    p.add_argument("--max-iter", type=int, default=MAX_ITER)
    p.add_argument("--init", choices=("uniform", "no-s"), default="uniform")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("baseline", help="no-scheduling or uniform baseline")
    common(p)
    p.add_argument("--policy", choices=("no-s", "uni-s"), required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("sweep", help="boundary points over an angular weight grid")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--grid-res", type=int, default=24, help="samples per angle")
    p.add_argument("--mirrors", action="store_true", help="add node-swapped triples")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--tol", type=float, default=TOL)
    p.add_argument("--max-iter", type=int, default=MAX_ITER)
    p.add_argument("--out", required=True, help="points CSV")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("contour", help="constant-B0 contours from a points CSV")
    p.add_argument("--points", required=True)
    p.add_argument("--levels", required=True, help="comma-separated B0 levels (bits)")
    p.add_argument("--mbit", action="store_true", help="levels are given in Mbit")
    p.add_argument("--out", required=True, help="contours CSV")
    p.set_defaults(func=cmd_contour)

    p = sub.add_parser("oracle-check", help="compare against brute force (N <= 3)")
    common(p)
    p.add_argument("--grid", help="energy_steps[,power_steps[,rounds]]")
    p.add_argument("--slack", type=float, default=0.01,
                   help="allowed relative objective gap")
    p.set_defaults(func=cmd_oracle_check)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
