#!/usr/bin/env python3
"""
Closed-form approximation of the mean delay.

Interpolates between the light-traffic limit of (1 - rho) E[X] (the mean
number of batch mates behind a departing driver, delta) and its
heavy-traffic limit 1 / eta.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ..utils.errors import ModelError, UnstableQueueError
from ..utils.policy import DEFAULT_POLICY, NumericPolicy
from .delay import position_probabilities
from .gap_service import BehaviorModel, ServiceTransform, service_moments
from .phase_process import PhaseProcess
from .queue_core import BatchDistribution, build_system, queue_length_moments, solve_queue

logger = logging.getLogger(__name__)

HEAVY_TRAFFIC_GRID = (0.95, 0.97, 0.99)


@dataclass(frozen=True)
class ApproxParams:
    delta: float
    eta: float
    rho: float

    def __post_init__(self):
        if self.eta <= 0:
            raise ModelError(f"eta must be > 0, got {self.eta}")
        if self.delta < 0:
            raise ModelError(f"delta must be >= 0, got {self.delta}")
        if not 0 <= self.rho < 1:
            raise UnstableQueueError(self.rho, f"approximation needs 0 <= rho < 1, got {self.rho}")


def lt_limit_delta(batch: BatchDistribution) -> float:
    """delta = sum_k k r_{k+1}."""
    r = position_probabilities(batch)
    return float(sum(k * r[k] for k in range(1, len(r))))


def ex_approx(p: ApproxParams) -> float:
    """E[X] ~ (delta + rho (1/eta - delta)) / (1 - rho)."""
    return (p.delta + p.rho * (1.0 / p.eta - p.delta)) / (1.0 - p.rho)


def sojourn_approx(p: ApproxParams, lam: float, batch: BatchDistribution) -> float:
    """E[S] from E[X] by subtracting batch mates and applying Little's law."""
    behind = batch.second_factorial_moment / (2.0 * batch.mean)
    return (ex_approx(p) - behind) / (lam * batch.mean)


def wait_approx(p: ApproxParams, lam: float, batch: BatchDistribution, st: ServiceTransform) -> float:
    """E[W] = E[S] - E[G], with E[G] the mean regular service under pi of P."""
    return sojourn_approx(p, lam, batch) - service_moments(st).mean


def richardson_limit(rhos: Sequence[float], values: Sequence[float], at: float = 1.0) -> float:
    """Value at ``at`` of the interpolating polynomial through (rho, value)."""
    rhos = np.asarray(rhos, dtype=float)
    values = np.asarray(values, dtype=float)
    if rhos.shape != values.shape or len(rhos) < 1:
        raise ModelError("need matching, non-empty grids for extrapolation")
    coeffs = np.polyfit(rhos - at, values, len(rhos) - 1)
    return float(coeffs[-1])


def estimate_eta(mean_queue_at_load: Callable[[float], float],
                 rho_grid: Sequence[float] = HEAVY_TRAFFIC_GRID) -> float:
    """Heavy-traffic constant from (1 - rho) E[X] extrapolated to rho = 1."""
    values = [(1.0 - rho) * mean_queue_at_load(rho) for rho in rho_grid]
    limit = richardson_limit(rho_grid, values)
    if limit <= 0:
        raise ModelError(f"extrapolated heavy-traffic limit is not positive ({limit})")
    logger.info("heavy-traffic limit %.6g from loads %s (eta = %.6g)", limit, list(rho_grid), 1.0 / limit)
    return 1.0 / limit


def exact_mean_queue(process: PhaseProcess, behavior: BehaviorModel, batch: BatchDistribution,
                     policy: NumericPolicy = DEFAULT_POLICY) -> Callable[[float], float]:
    """rho -> E[X] of the customer chain, with lambda chosen to give load rho."""
    mean_service = service_moments(ServiceTransform(process, behavior, None, policy)).mean

    def at_load(rho: float) -> float:
        lam = rho / (batch.mean * mean_service)
        st = ServiceTransform(process, behavior, lam, policy)
        mean, _ = queue_length_moments(solve_queue(build_system(st, lam, batch), policy))
        return mean

    return at_load


def approx_params(process: PhaseProcess, behavior: BehaviorModel, lam: float, batch: BatchDistribution,
                  eta: Optional[float] = None, policy: NumericPolicy = DEFAULT_POLICY) -> ApproxParams:
    """Approximation inputs at batch rate ``lam``; eta is estimated when not given."""
    st = ServiceTransform(process, behavior, lam, policy)
    rho = lam * batch.mean * service_moments(st).mean
    if eta is None:
        logger.warning("no eta configured; estimating it numerically from the exact chain")
        eta = estimate_eta(exact_mean_queue(process, behavior, batch, policy))
    return ApproxParams(delta=lt_limit_delta(batch), eta=eta, rho=rho)
