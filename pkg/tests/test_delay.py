"""
Delay of minor-road drivers via super customers.
"""

import numpy as np
import pytest

from src.core.approx import lt_limit_delta
from src.core.delay import (analyze_delay, lst_moments, position_probabilities, position_sojourn_lst,
                            position_wait_lst, super_service)
from src.core.gap_service import BehaviorModel, ServiceTransform
from src.core.queue_core import BatchDistribution
from src.utils.errors import ModelError
from src.utils.jets import Jet
from src.utils.policy import NumericPolicy

from .conftest import example_road

LAM = 50 / 3600


@pytest.fixture(scope="module")
def low_high_analysis():
    batch = BatchDistribution(((1, 0.5), (7, 0.5)))
    return analyze_delay(example_road(70.0), BehaviorModel.constant(7.0), LAM, batch)


@pytest.fixture(scope="module")
def fixed_batch_analysis():
    batch = BatchDistribution(((3, 1.0),))
    return analyze_delay(example_road(200.0), BehaviorModel.constant(7.0), LAM, batch)


def test_position_probabilities():
    r = position_probabilities(BatchDistribution(((1, 0.5), (7, 0.5))))
    assert r.sum() == pytest.approx(1.0, abs=1e-15)
    assert r[0] == pytest.approx(0.25)
    assert np.allclose(r[1:], 0.125)


@pytest.mark.parametrize("pmf, expected", [
    (((1, 0.5), (7, 0.5)), 2.625),
    (tuple((k, 1 / 7) for k in range(1, 8)), 2.0),
    (((1, 1.0),), 0.0),
])
def test_mean_batch_mates_behind(pmf, expected):
    assert lt_limit_delta(BatchDistribution(pmf)) == pytest.approx(expected)


def test_first_position_waits_like_its_batch(low_high_analysis):
    dt = low_high_analysis.transforms
    st = low_high_analysis.service
    assert lst_moments(position_wait_lst(dt, st, 1)) == pytest.approx(lst_moments(dt.wait_sc))


def test_sojourn_of_position_is_wait_of_next(low_high_analysis):
    dt = low_high_analysis.transforms
    st = low_high_analysis.service
    for m in range(1, 7):
        ew_next, _ = lst_moments(position_wait_lst(dt, st, m + 1))
        es, _ = lst_moments(position_sojourn_lst(dt, st, m))
        assert es == pytest.approx(ew_next)


def test_position_bounds(low_high_analysis):
    dt = low_high_analysis.transforms
    st = low_high_analysis.service
    with pytest.raises(ModelError):
        position_wait_lst(dt, st, 9)
    with pytest.raises(ModelError):
        position_sojourn_lst(dt, st, 0)


def test_position_table_mixes_to_arbitrary_driver(low_high_analysis):
    table = low_high_analysis.position_table()
    assert list(table["position"]) == list(range(1, 8))
    assert table["share"].sum() == pytest.approx(1.0)
    assert np.all(np.diff(table["EW_s"]) > 0)
    assert (table["share"] * table["EW_s"]).sum() == pytest.approx(low_high_analysis.moments.EW, rel=1e-10)
    assert (table["share"] * table["ES_s"]).sum() == pytest.approx(low_high_analysis.moments.ES, rel=1e-10)


def test_moments_are_consistent(low_high_analysis):
    m = low_high_analysis.moments
    assert 0 < m.EW < m.ES
    assert m.VarW > 0 and m.VarS > 0
    assert set(m.as_dict()) == {"EW_s", "VarW_s2", "ES_s", "VarS_s2"}


def test_fixed_batch_last_driver_leaves_with_batch(fixed_batch_analysis):
    dt = fixed_batch_analysis.transforms
    st = fixed_batch_analysis.service
    last = position_sojourn_lst(dt, st, 3)
    assert lst_moments(last) == pytest.approx(lst_moments(dt.sojourn_sc), rel=1e-8)
    assert fixed_batch_analysis.super_moments().ES == pytest.approx(lst_moments(last)[0], rel=1e-8)


def test_wait_by_type_partitions_batches(low_high_analysis):
    table = low_high_analysis.wait_by_type()
    assert len(table) == 4
    assert table["probability"].sum() == pytest.approx(1.0, abs=1e-9)
    idle = table[table["arrival"] == "idle"]
    assert np.allclose(idle["EW_s"], 0.0, atol=1e-9)


def test_lst_moments_of_exponential():
    # 1 / (1 + s) has mean 1 and variance 1
    s = Jet.variable(0.0, 3)
    mean, var = lst_moments(1.0 / (1.0 + s))
    assert mean == pytest.approx(1.0)
    assert var == pytest.approx(1.0)


def test_low_jet_order_rejected():
    with pytest.raises(ModelError):
        analyze_delay(example_road(70.0), BehaviorModel.constant(7.0), LAM, BatchDistribution.single(),
                      NumericPolicy(jet_order=2))


@pytest.mark.parametrize("behavior", [
    BehaviorModel.constant(7.0),
    BehaviorModel.inconsistent([(6.22, 0.9), (14.0, 0.1)]),
    BehaviorModel.consistent([(6.22, 0.9), (14.0, 0.1)]),
])
def test_super_service_phase_matrices_are_stochastic(behavior, uniform_batches):
    ss = super_service(ServiceTransform(example_road(420.0), behavior, LAM), uniform_batches)
    for m in ss.at(0.0):
        m = np.real(np.asarray(m))
        assert np.all(m >= -1e-12)
        assert np.allclose(m.sum(axis=1), 1.0, atol=1e-10)


@pytest.mark.parametrize("qbar, platoons_delay_more", [(300.0, True), (500.0, False)])
def test_platooning_effect_changes_sign_with_flow(qbar, platoons_delay_more, uniform_batches):
    behavior = BehaviorModel.constant(7.0)
    road = example_road(qbar)
    platooned = analyze_delay(road, behavior, LAM, uniform_batches).moments.EW
    poisson = analyze_delay(road.poisson_equivalent(), behavior, LAM, uniform_batches).moments.EW
    assert (platooned > poisson) is platoons_delay_more
