"""
Service-time transforms for the three gap-acceptance behaviors.
"""

import numpy as np
import pytest

from src.core.gap_service import (BehaviorModel, ServiceTransform, first_service_lst, service_lst_b1,
                                  service_lst_b2, service_lst_b3, service_moments)
from src.core.phase_process import PhaseProcess, service_lst_two_phase
from src.utils.errors import ModelError

from .conftest import example_road


def test_behavior_validation():
    with pytest.raises(ModelError):
        BehaviorModel.constant(0.0)
    with pytest.raises(ModelError):
        BehaviorModel.inconsistent([(5.0, 0.5), (25.0, 0.4)])
    with pytest.raises(ModelError):
        BehaviorModel("B1", ((5.0, 0.5), (6.0, 0.5)))


def test_poisson_b1_matches_closed_form():
    q, gap = 0.05, 7.0
    road = PhaseProcess.poisson(q)
    for s in (0.0, 0.1, 0.7 + 0.2j):
        e = np.exp(-(s + q) * gap)
        expected = (s + q) * e / (s + q * e)
        assert complex(service_lst_b1(road, gap, s)[0, 0]) == pytest.approx(expected, rel=1e-10)


def test_poisson_b1_mean_service():
    q, gap = 0.05, 7.0
    st = ServiceTransform(PhaseProcess.poisson(q), BehaviorModel.constant(gap))
    m = service_moments(st)
    assert m.mean == pytest.approx((np.exp(q * gap) - 1) / q, rel=1e-10)


@pytest.mark.parametrize("s", [0.0, 0.05, 0.3 + 0.1j])
def test_two_phase_b1_matches_closed_form(s):
    road = example_road(420.0)
    numeric = np.asarray(service_lst_b1(road, 7.0, s), dtype=complex)
    closed = service_lst_two_phase(road, 7.0, s)
    assert np.allclose(numeric, closed, rtol=1e-9, atol=1e-12)


def test_phase_matrices_are_stochastic(road420, b2):
    st = ServiceTransform(road420, b2, lam=50 / 3600)
    for m in (st.P, st.P_star, st.pbar):
        assert np.all(m >= -1e-12)
        assert np.allclose(m.sum(axis=1), 1.0, atol=1e-10)


def test_b3_is_mixture_of_fixed_gaps(road70, b3):
    s = 0.02
    mixed = service_lst_b3(road70, b3, s)
    parts = 0.9 * service_lst_b1(road70, 6.22, s) + 0.1 * service_lst_b1(road70, 14.0, s)
    assert np.allclose(mixed, parts)


def test_single_gap_b2_equals_b1(road70):
    s = 0.01
    b2 = BehaviorModel.inconsistent([(7.0, 1.0)])
    assert np.allclose(service_lst_b2(road70, b2, s), service_lst_b1(road70, 7.0, s))


def test_inconsistent_drivers_wait_less_than_consistent(road420, b2, b3):
    mean2 = service_moments(ServiceTransform(road420, b2)).mean
    mean3 = service_moments(ServiceTransform(road420, b3)).mean
    assert mean2 < mean3


def test_exceptional_needs_arrival_rate(road70, b1):
    st = ServiceTransform(road70, b1)
    with pytest.raises(ModelError):
        st.exceptional(0.0)
    assert st.with_arrival_rate(0.01).exceptional(0.0).shape == (2, 2)


@pytest.mark.parametrize("s", [0.0, 0.02, 0.1 + 0.05j])
def test_first_service_lst_matches_exceptional_transform(road70, b2, s):
    lam = 50 / 3600
    base = ServiceTransform(road70, b2)
    got = np.asarray(first_service_lst(road70, base, lam, s), dtype=complex)
    expected = np.asarray(ServiceTransform(road70, b2, lam).exceptional(s), dtype=complex)
    assert np.allclose(got, expected, rtol=1e-12, atol=1e-14)


def test_service_moments_have_positive_variance(road70, b1):
    m = service_moments(ServiceTransform(road70, b1, lam=0.01))
    assert np.isclose(m.pi.sum(), 1.0)
    assert m.mean > 7.0
    assert m.variance > 0
    assert m.exceptional_mean > 7.0
