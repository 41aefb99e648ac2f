import numpy as np
import pytest

from ehmac import RewardWeights, build_intervals, check_feasibility, no_scheduling, uniform_scheduling

from conftest import REF_PARAMS


def test_no_s_spends_each_harvest_on_arrival(ref):
    res = no_scheduling(ref, RewardWeights(1, 1, 1), REF_PARAMS)
    np.testing.assert_allclose(res.state.ebar1, ref.harvest1)
    np.testing.assert_allclose(res.state.ebar2, ref.harvest2)
    assert res.policy == "no-s"
    assert check_feasibility(res.schedule, ref) == []


def test_no_s_common_ceiling(ref):
    res = no_scheduling(ref, RewardWeights(10, 1, 1), REF_PARAMS)
    # intervals where only one node harvests still carry private data
    assert res.triplet.b0 == pytest.approx(1.52e6, rel=0.05)
    assert res.triplet.b1 > 0 and res.triplet.b2 > 0


def test_uni_s_constant_power_per_harvest():
    sc = build_intervals([(0, 4e-3), (2, 2e-3)], [(0, 3e-3)], 4.0)
    res = uniform_scheduling(sc, RewardWeights(1, 1, 1), REF_PARAMS)
    np.testing.assert_allclose(res.state.ebar1, [2e-3, 2e-3 + 2e-3])
    np.testing.assert_allclose(res.state.ebar2, [1.5e-3, 1.5e-3])
    assert res.policy == "uni-s"
    assert check_feasibility(res.schedule, sc) == []


def test_baselines_exhaust_energy(ref):
    for fn in (no_scheduling, uniform_scheduling):
        res = fn(ref, RewardWeights(0.613, 1, 1), REF_PARAMS)
        assert check_feasibility(res.schedule, ref) == []


def test_uniform_beats_no_s_for_common_data(ref):
    mu = RewardWeights(1, 0, 0)
    assert uniform_scheduling(ref, mu, REF_PARAMS).objective > \
        no_scheduling(ref, mu, REF_PARAMS).objective


def test_uniform_can_lose_to_no_s():
    # a short, well-supplied last interval: spreading the first harvest into
    # it takes energy away from where it is worth more
    sc = build_intervals([(0, 1e-3), (10, 20e-3)], [(0, 1e-3), (10, 20e-3)], 11.0)
    mu = RewardWeights(0, 1, 1)
    assert uniform_scheduling(sc, mu, REF_PARAMS).objective < \
        no_scheduling(sc, mu, REF_PARAMS).objective
