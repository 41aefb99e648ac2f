import numpy as np
import pytest

from ehmac import ChannelParams, build_intervals

REPORT: list[str] = []


def record(line: str) -> None:
    REPORT.append(line)


def pytest_terminal_summary(terminalreporter):
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)


def reference_scenario():
    ev1 = [(0, 3e-3), (2, 6e-3), (6, 10e-3)]
    ev2 = [(0, 4e-3), (5, 11e-3), (8, 6e-3)]
    return build_intervals(ev1, ev2, 11.0)


REF_PARAMS = ChannelParams(1e6, 1e-19, 1e-11)


def random_scenario(rng, n_events, horizon=(0.5, 4.0), e_max=8e-3, p_zero=0.25):
    """Random scenario with ``n_events`` distinct arrival times shared by both nodes."""
    times = np.concatenate([[0.0], np.sort(rng.uniform(*horizon, n_events - 1))])
    times = np.round(times, 6)
    e1 = rng.uniform(0.2e-3, e_max, n_events)
    e2 = rng.uniform(0.2e-3, e_max, n_events)
    e1[1:][rng.random(n_events - 1) < p_zero] = 0.0
    e2[1:][rng.random(n_events - 1) < p_zero] = 0.0
    t_f = float(times[-1] + rng.uniform(0.5, 3.0))
    return build_intervals(list(zip(times, e1)), list(zip(times, e2)), t_f)


@pytest.fixture
def ref():
    return reference_scenario()


@pytest.fixture
def params():
    return REF_PARAMS
