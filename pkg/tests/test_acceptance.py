"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line that is printed in the pytest summary.
Run ``python tests/test_acceptance.py`` to get the same lines without pytest.
"""

import functools
import math
import time

import numpy as np

from conftest import REF_PARAMS, random_scenario, record, reference_scenario
from ehmac import (
    GridSpec,
    PowerSchedule,
    RewardWeights,
    brute_force_schedule,
    build_intervals,
    capacity,
    check_feasibility,
    compare,
    kkt_residuals,
    no_scheduling,
    schedule,
    uniform_scheduling,
    water_levels,
)
from ehmac.sweep import octant_grid

MBIT = 1e6
TOL = 1e-6
KKT_LIMIT = 1e-6
RAY_MU0 = [0.0, 0.25, 0.5, 0.613, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0]

# every Opt-S run of criteria 1-7 is registered here for the KKT check
_OPT_RUNS: list = []


def _opt(scen, mu, params=REF_PARAMS):
    res = schedule(scen, mu, params)
    _OPT_RUNS.append((scen, mu, params, res))
    return res


def _line(num, ok, text):
    record(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {text}")
    return ok


@functools.lru_cache(maxsize=None)
def reference_point():
    scen = reference_scenario()
    t0 = time.perf_counter()
    res = _opt(scen, RewardWeights(0.613, 1.0, 1.0))
    return scen, res, time.perf_counter() - t0


@functools.lru_cache(maxsize=None)
def ray():
    scen = reference_scenario()
    return [(m0, _opt(scen, RewardWeights(m0, 1.0, 1.0))) for m0 in RAY_MU0]


@functools.lru_cache(maxsize=None)
def oracle_runs():
    rng = np.random.default_rng(2024)
    mus = [RewardWeights(0.5, 1.0, 0.7),   # common worth least
           RewardWeights(0.8, 0.3, 1.0),   # between the private weights
           RewardWeights(2.0, 1.0, 1.0)]   # common worth most
    grid = GridSpec(energy_steps=21, power_steps=21, refinement_rounds=2)
    out = []
    t0 = time.perf_counter()
    for n_ev in [2] * 10 + [3] * 5:
        scen = random_scenario(rng, n_ev)
        assert scen.n == n_ev
        for mu in mus:
            wf = _opt(scen, mu)
            out.append((scen.n, mu, compare(wf, brute_force_schedule(scen, mu, REF_PARAMS, grid))))
    return out, time.perf_counter() - t0


@functools.lru_cache(maxsize=None)
def zero_mu0_runs():
    rng = np.random.default_rng(7)
    scens = [reference_scenario()] + [random_scenario(rng, 4) for _ in range(5)]
    mus = [RewardWeights(0.0, 1.0, 1.0), RewardWeights(0.0, 1.0, 0.4),
           RewardWeights(0.0, 0.3, 1.0)]
    return [(s, mu, _opt(s, mu)) for s in scens for mu in mus]


@functools.lru_cache(maxsize=None)
def dominance_runs():
    scen = reference_scenario()
    out = []
    for t in octant_grid(12):
        mu = RewardWeights(*t)
        out.append((mu, _opt(scen, mu).objective,
                    uniform_scheduling(scen, mu, REF_PARAMS).objective,
                    no_scheduling(scen, mu, REF_PARAMS).objective))
    return out


def test_criterion_1_reference_b0():
    scen, res, dt = reference_point()
    b0 = res.triplet.b0
    ok = abs(b0 - 5.41 * MBIT) <= 0.02 * 5.41 * MBIT and dt < 5.0 and res.converged
    _line(1, ok, f"B0 at mu = (0.613, 1, 1) is {b0 / MBIT:.4f} Mbit (target 5.41 +/- 2%), "
                 f"{dt:.2f} s, converged={res.converged}")
    assert ok


def test_criterion_2_apex():
    pts = ray()
    b0 = [r.triplet.b0 for _, r in pts]
    top = max(b0)
    mono = all(b >= a - 1e-6 * top for a, b in zip(b0, b0[1:]))
    ok = abs(top - 8.41 * MBIT) <= 0.02 * 8.41 * MBIT and mono
    _line(2, ok, f"max B0 on mu1=mu2 ray = {top / MBIT:.4f} Mbit (target 8.41 +/- 2%), "
                 f"non-decreasing={mono}")
    assert ok


def test_criterion_3_no_s_ceiling():
    scen = reference_scenario()
    runs = [no_scheduling(scen, RewardWeights(m0, 1.0, 1.0), REF_PARAMS) for m0 in RAY_MU0]
    best = max(runs, key=lambda r: r.triplet.b0)
    t = best.triplet
    ok = abs(t.b0 - 1.52 * MBIT) <= 0.05 * 1.52 * MBIT and t.b1 > 0 and t.b2 > 0
    _line(3, ok, f"No-S max B0 = {t.b0 / MBIT:.4f} Mbit (target 1.52 +/- 5%), "
                 f"B1 = {t.b1 / MBIT:.4f}, B2 = {t.b2 / MBIT:.4f}")
    assert ok


def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b))


def test_criterion_4_water_levels():
    scen, res, _ = reference_point()
    mu = res.mu
    wl = [water_levels(res.state, n, mu, REF_PARAMS) for n in range(scen.n)]
    # 1-based interval pairs (n, n+1)
    pairs4 = [(2, 3), (4, 5)]
    pairs5 = [(1, 2), (3, 4), (4, 5)]
    gaps = []
    ok = res.converged
    for attr, pairs in (("wl4", pairs4), ("wl5", pairs5)):
        for a, b in pairs:
            va, vb = getattr(wl[a - 1], attr), getattr(wl[b - 1], attr)
            if va is None or vb is None:
                ok = False
                gaps.append(math.inf)
            else:
                gaps.append(_rel(va, vb))
    ok = ok and max(gaps) <= 1e-6
    # transfers: node 1 into intervals 3 and 5, node 2 into 2, 4 and 5
    e1, e2 = res.state.ebar1, res.state.ebar2
    h1, h2 = scen.harvest1, scen.harvest2
    recv1 = {i + 1 for i in range(scen.n) if e1[i] > h1[i] + 1e-9}
    recv2 = {i + 1 for i in range(scen.n) if e2[i] > h2[i] + 1e-9}
    ok = ok and recv1 == {3, 5} and recv2 == {2, 4, 5}
    _line(4, ok, f"WL4/WL5 equilibrium max gap {max(gaps):.2e} (limit 1e-6), "
                 f"node 1 receives {sorted(recv1)}, node 2 receives {sorted(recv2)}")
    assert ok


def test_criterion_5_oracle():
    runs, dt = oracle_runs()
    worst = max(c.relative for _, _, c in runs)
    ok = all(c.passed for _, _, c in runs) and dt < 120.0
    _line(5, ok, f"{len(runs)} oracle comparisons, worst oracle advantage "
                 f"{worst:.3%} (limit 1%), {dt:.1f} s (limit 120 s)")
    assert ok


def test_criterion_6_zero_common_reward():
    bad = []
    for scen, mu, res in zero_mu0_runs():
        sch = res.schedule
        if not res.converged or np.max(sch.p0) > 1e-12:
            bad.append((mu, "p0"))
            continue
        if mu.mu1 == mu.mu2:
            tot = sch.pbar1 + sch.pbar2
            # the water level here is 1 + total normalised power; the solver
            # equalises levels to TOL relative, so monotonicity holds to TOL
            level = 1.0 + tot / REF_PARAMS.a
            if np.any(np.diff(level) < -TOL * level[1:]):
                bad.append((mu, "monotone"))
            used = float(np.dot(tot, scen.lengths))
            want = scen.envelope(1)[-1] + scen.envelope(2)[-1]
            if abs(used - want) > 1e-9 * want:
                bad.append((mu, "exhaust"))
    n = len(zero_mu0_runs())
    ok = not bad
    _line(6, ok, f"mu0 = 0: {n} schedules, p0 == 0, total power non-decreasing and "
                 f"exhausted for mu1 = mu2; failures: {len(bad)}")
    assert ok


def test_criterion_7_dominance():
    runs = dominance_runs()
    ou = sum(o >= u - 1e-9 for _, o, u, _ in runs)
    on = sum(o >= n - 1e-9 for _, o, _, n in runs)
    un = sum(u >= n - 1e-9 for _, _, u, n in runs)
    worst = min((u - n) / n for _, _, u, n in runs)
    ok = ou == on == un == len(runs)
    _line(7, ok, f"12x12 octant, {len(runs)} points: Opt-S >= Uni-S at {ou}, "
                 f"Opt-S >= No-S at {on}, Uni-S >= No-S at {un} "
                 f"(worst Uni-S deficit {-worst:.3%})")
    assert ok


def test_criterion_8_kkt():
    reference_point(), ray(), oracle_runs(), zero_mu0_runs(), dominance_runs()
    worst, count, failed = 0.0, 0, 0
    for scen, mu, params, res in _OPT_RUNS:
        if not res.converged:
            continue
        count += 1
        r = kkt_residuals(res.state, scen, mu, params).max_residual
        worst = max(worst, r)
        failed += r >= KKT_LIMIT
    ok = failed == 0 and count > 0
    _line(8, ok, f"KKT residual < 1e-6 on {count - failed}/{count} converged "
                 f"schedules (worst {worst:.2e})")
    assert ok


def _mixed_schedule(sa, sb, theta):
    """Time-share two schedules interval by interval with coherent common power."""
    P0 = theta * sa.p0 + (1 - theta) * sb.p0
    c1 = theta * sa.p0 * sa.rho ** 2 + (1 - theta) * sb.p0 * sb.rho ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(P0 > 0, np.sqrt(c1 / np.where(P0 > 0, P0, 1.0)), 0.5)
    return PowerSchedule(P0, theta * sa.p1 + (1 - theta) * sb.p1,
                         theta * sa.p2 + (1 - theta) * sb.p2, np.clip(rho, 0.0, 1.0))


def _rates(sch, scen, params, corner):
    c_all = capacity(sch.p0 + sch.p1 + sch.p2, params)
    c12 = capacity(sch.p1 + sch.p2, params)
    if corner == "T":
        r1 = capacity(sch.p1, params)
        r2 = c12 - r1
    else:
        r2 = capacity(sch.p2, params)
        r1 = c12 - r2
    return np.stack([c_all - c12, r1, r2])


def _in_region(rates, sch, params, tol):
    r0, r1, r2 = rates
    return (np.all(r1 <= capacity(sch.p1, params) + tol)
            and np.all(r2 <= capacity(sch.p2, params) + tol)
            and np.all(r1 + r2 <= capacity(sch.p1 + sch.p2, params) + tol)
            and np.all(r0 + r1 + r2 <= capacity(sch.p0 + sch.p1 + sch.p2, params) + tol))


def convexity_trial(rng):
    n_ev = int(rng.integers(1, 5))
    times = np.concatenate([[0.0], np.sort(rng.uniform(0.5, 5.0, n_ev - 1))])
    t_f = float(times[-1] + rng.uniform(0.5, 3.0))
    scen = {}
    for tag in "ab":
        e1 = rng.uniform(0.0, 8e-3, n_ev)
        e2 = rng.uniform(0.0, 8e-3, n_ev)
        scen[tag] = build_intervals(list(zip(times, e1)), list(zip(times, e2)), t_f)
    theta = float(rng.uniform(0.0, 1.0))
    def mix(a, b):
        return [(t, theta * ea + (1 - theta) * eb) for (t, ea), (_, eb) in zip(a, b)]

    mixed = build_intervals(mix(scen["a"].events_node1, scen["b"].events_node1),
                            mix(scen["a"].events_node2, scen["b"].events_node2), t_f)
    pols = [schedule, no_scheduling, uniform_scheduling]
    res = {}
    for tag in "ab":
        mu = RewardWeights(*rng.uniform(0.0, 1.0, 3) + 1e-3)
        res[tag] = pols[int(rng.integers(0, 3))](scen[tag], mu, REF_PARAMS)
    sa, sb = res["a"].schedule, res["b"].schedule
    sm = _mixed_schedule(sa, sb, theta)
    feas = not check_feasibility(sm, mixed, tol=1e-9, exhaust=False)
    ca = "T" if res["a"].mu.mu1 >= res["a"].mu.mu2 else "U"
    cb = "T" if res["b"].mu.mu1 >= res["b"].mu.mu2 else "U"
    rates = theta * _rates(sa, scen["a"], REF_PARAMS, ca) + \
        (1 - theta) * _rates(sb, scen["b"], REF_PARAMS, cb)
    inside = _in_region(rates, sm, REF_PARAMS, tol=1e-6)
    # the mixed triplet is the time-weighted sum of the per-interval mixed rates
    tri = rates @ mixed.lengths
    ta, tb = res["a"].triplet, res["b"].triplet
    want = theta * np.array([ta.b0, ta.b1, ta.b2]) + (1 - theta) * np.array([tb.b0, tb.b1, tb.b2])
    sums = np.allclose(tri, want, rtol=1e-9, atol=1e-3)
    return feas and inside and sums


def test_criterion_9_convexity():
    rng = np.random.default_rng(99)
    passed = sum(convexity_trial(rng) for _ in range(100))
    ok = passed == 100
    _line(9, ok, f"{passed}/100 mixed schedules feasible and inside the mixed region")
    assert ok


if __name__ == "__main__":
    from conftest import REPORT
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion"):
            try:
                fn()
            except AssertionError:
                pass
    print("\n".join(REPORT))
