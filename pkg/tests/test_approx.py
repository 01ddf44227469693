"""
Light/heavy-traffic interpolation of the mean sojourn time.
"""

import pytest

from src.core.approx import (ApproxParams, approx_params, estimate_eta, ex_approx, exact_mean_queue,
                             richardson_limit, sojourn_approx, wait_approx)
from src.core.delay import analyze_delay
from src.core.gap_service import BehaviorModel, ServiceTransform, service_moments
from src.core.queue_core import BatchDistribution
from src.utils.errors import ModelError, UnstableQueueError

from .conftest import example_road

DELTA, ETA = 2.0, 0.343


@pytest.fixture(scope="module")
def setting():
    return example_road(500.0), BehaviorModel.constant(7.0), BatchDistribution.uniform(1, 7)


def test_interpolation_endpoints():
    assert ex_approx(ApproxParams(DELTA, ETA, 0.0)) == pytest.approx(DELTA)
    assert ex_approx(ApproxParams(DELTA, ETA, 0.5)) == pytest.approx(4.9154519, rel=1e-6)
    rho = 1 - 1e-9
    assert (1 - rho) * ex_approx(ApproxParams(DELTA, ETA, rho)) == pytest.approx(1 / ETA, rel=1e-6)


def test_params_validation():
    with pytest.raises(ModelError):
        ApproxParams(DELTA, 0.0, 0.5)
    with pytest.raises(UnstableQueueError):
        ApproxParams(DELTA, ETA, 1.0)


def test_sojourn_approx_increases_with_load(setting):
    _, _, batch = setting
    mean_service = 11.4
    values = []
    for rho in (0.1, 0.3, 0.5, 0.7, 0.9):
        lam = rho / (batch.mean * mean_service)
        values.append(sojourn_approx(ApproxParams(DELTA, ETA, rho), lam, batch))
    assert all(b > a for a, b in zip(values, values[1:]))


def test_richardson_recovers_polynomial():
    rhos = [0.95, 0.97, 0.99]
    assert richardson_limit(rhos, [3.0 - r * r for r in rhos]) == pytest.approx(2.0)


def test_estimate_eta_of_single_server_queue_length():
    assert estimate_eta(lambda rho: rho / (1 - rho)) == pytest.approx(1.0)


def test_load_per_batch_rate(setting):
    road, behavior, batch = setting
    mean_service = service_moments(ServiceTransform(road, behavior)).mean
    assert batch.mean * mean_service == pytest.approx(45.67, rel=5e-3)


def test_configured_params_skip_estimation(setting):
    road, behavior, batch = setting
    params = approx_params(road, behavior, 40 / 3600, batch, eta=ETA)
    assert params.delta == pytest.approx(2.0)
    assert params.rho == pytest.approx(45.67 * 40 / 3600, rel=5e-3)


def test_wait_is_sojourn_less_mean_service(setting):
    road, behavior, batch = setting
    lam = 0.5 / 45.67
    st = ServiceTransform(road, behavior, lam)
    params = approx_params(road, behavior, lam, batch, eta=ETA)
    wait = wait_approx(params, lam, batch, st)
    assert wait == pytest.approx(sojourn_approx(params, lam, batch) - service_moments(st).mean)
    assert 0 < wait < sojourn_approx(params, lam, batch)


@pytest.mark.slow
@pytest.mark.parametrize("rho, tolerance", [(0.02, 0.10), (0.2, 0.08), (0.5, 0.05), (0.8, 0.05), (0.98, 0.02)])
def test_approximation_tracks_exact_sojourn(setting, rho, tolerance):
    road, behavior, batch = setting
    lam = rho / 45.67
    exact = analyze_delay(road, behavior, lam, batch).moments.ES
    approx = sojourn_approx(approx_params(road, behavior, lam, batch, eta=ETA), lam, batch)
    # the interpolation sits a few seconds below the exact value at every load
    assert approx < exact
    assert approx == pytest.approx(exact, rel=tolerance)


@pytest.mark.slow
def test_estimated_eta_close_to_reference(setting):
    road, behavior, batch = setting
    eta = estimate_eta(exact_mean_queue(road, behavior, batch))
    assert 1 / eta == pytest.approx(1 / ETA, rel=0.03)
