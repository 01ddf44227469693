#!/usr/bin/env python3
"""
Embedded Markov chain of the M^X/SM2/1 queue at departures.

Rows of the joint pgf f(z) = (f_1(z), ..., f_N(z)), where f_j(z) is the pgf
of the queue left behind by a departure that leaves the road in phase j,
satisfy

    f(z) (z I - A(z)) = f(0) (B(z) A*(z) - A(z))

with A(z) = G(lambda (1 - B(z))) and A*(z) = G*(lambda (1 - B(z))). The
unknown boundary f(0) follows from the N - 1 zeros of det(z I - A(z)) inside
the unit disk together with the normalization F(1) = 1.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from ..utils.errors import ModelError, NumericalError, UnstableQueueError
from ..utils.jets import Jet, JetLike, value_of
from ..utils.linalg import (right_null_vector, solve_rows, solve_singular_rows,
                            split_real)
from ..utils.policy import DEFAULT_POLICY, NumericPolicy
from ..utils.roots import eigenvalue_fixed_points, unit_disk_roots
from .gap_service import BehaviorModel, ServiceTransform, service_moments
from .phase_process import PhaseProcess

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BatchDistribution:
    """Batch-size pmf on {1, ..., M}, stored as ((k, b_k), ...) with b_k > 0."""

    pmf: Tuple[Tuple[int, float], ...]

    def __post_init__(self):
        items = []
        for k, b in self.pmf:
            if int(k) != k or k < 1:
                raise ModelError(f"batch sizes must be integers >= 1, got {k}")
            if not 0 < float(b) <= 1:
                raise ModelError(f"batch probability for size {k} must lie in (0, 1], got {b}")
            items.append((int(k), float(b)))
        if not items:
            raise ModelError("batch distribution is empty")
        sizes = [k for k, _ in items]
        if len(set(sizes)) != len(sizes):
            raise ModelError(f"duplicate batch sizes in {sizes}")
        total = math.fsum(b for _, b in items)
        if abs(total - 1.0) > 1e-9:
            raise ModelError(f"batch probabilities must sum to 1, got {total}")
        object.__setattr__(self, "pmf", tuple(sorted(items)))

    @classmethod
    def from_mapping(cls, pmf: Mapping) -> "BatchDistribution":
        return cls(tuple((int(k), float(v)) for k, v in pmf.items()))

    @classmethod
    def single(cls) -> "BatchDistribution":
        return cls(((1, 1.0),))

    @classmethod
    def uniform(cls, low: int, high: int) -> "BatchDistribution":
        n = high - low + 1
        return cls(tuple((k, 1.0 / n) for k in range(low, high + 1)))

    @property
    def max_size(self) -> int:
        return self.pmf[-1][0]

    @property
    def mean(self) -> float:
        return math.fsum(k * b for k, b in self.pmf)

    @property
    def second_factorial_moment(self) -> float:
        """B''(1) = E[B (B - 1)]."""
        return math.fsum(k * (k - 1) * b for k, b in self.pmf)

    def probability(self, k: int) -> float:
        return dict(self.pmf).get(k, 0.0)

    def exact_pmf(self) -> Dict[int, Fraction]:
        return {k: Fraction(b) for k, b in self.pmf}

    def pgf(self, z: JetLike):
        """B(z) = sum_k b_k z^k."""
        total = None
        for k, b in self.pmf:
            term = b * z ** k
            total = term if total is None else total + term
        return total

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        sizes = np.array([k for k, _ in self.pmf])
        return rng.choice(sizes, size=size, p=[b for _, b in self.pmf])


@dataclass(frozen=True)
class MarkedPGFSystem:
    """Kernel data of an embedded departure chain.

    Attributes:
        n_phases: number of road phases N
        arrival_kernel: z -> A(z)
        first_kernel: z -> A*(z)
        batch_pgf: z -> B(z)
        rho: offered load
        label: chain name used in log messages
    """

    n_phases: int
    arrival_kernel: Callable[[JetLike], JetLike]
    first_kernel: Callable[[JetLike], JetLike]
    batch_pgf: Callable[[JetLike], JetLike]
    rho: float
    label: str = "customer"

    def kernels(self, z: JetLike):
        """(D(z), R(z)) with D = zI - A(z) and R = B(z) A*(z) - A(z)."""
        a = self.arrival_kernel(z)
        a_star = self.first_kernel(z)
        eye = np.eye(self.n_phases)
        d = z * eye - a if isinstance(z, Jet) else complex(z) * eye - a
        r = self.batch_pgf(z) * a_star - a
        return d, r


def load(st: ServiceTransform, lam: float, batch: BatchDistribution) -> float:
    """rho = lambda E[B] E[G]."""
    return lam * batch.mean * service_moments(st).mean


def build_system(st: ServiceTransform, lam: float, batch: BatchDistribution) -> MarkedPGFSystem:
    """Customer-level chain: one step per departing driver."""
    if st.lam is None or st.lam != lam:
        st = st.with_arrival_rate(lam)

    def argument(z):
        return lam * (1.0 - batch.pgf(z))

    return MarkedPGFSystem(
        n_phases=st.n_phases,
        arrival_kernel=lambda z: st.regular(argument(z)),
        first_kernel=lambda z: st.exceptional(argument(z)),
        batch_pgf=batch.pgf,
        rho=load(st, lam, batch),
        label="customer",
    )


@dataclass
class QueueSolution:
    """Boundary vector f(0) and an evaluator for f(z)."""

    system: MarkedPGFSystem
    boundary: np.ndarray
    roots: List[complex]
    policy: NumericPolicy = DEFAULT_POLICY

    @property
    def rho(self) -> float:
        return self.system.rho

    @property
    def empty_probability(self) -> float:
        """P(departure leaves the system empty) = F(0)."""
        return float(self.boundary.sum())

    def evaluate(self, z: JetLike):
        """f(z) as a row vector (ndarray) or a vector jet.

        At z = 1 the kernel is singular; a jet argument loses one order there.
        """
        z0 = complex(value_of(z))
        at_one = abs(z0 - 1.0) < 1e-12
        if at_one and not isinstance(z, Jet):
            return self.evaluate(Jet.variable(1.0, 1)).value
        d, r = self.system.kernels(z)
        b = self.boundary @ r
        if at_one:
            return solve_singular_rows(d, b, self.policy)
        return solve_rows(d, b, self.policy)

    def total(self, z: JetLike):
        """F(z) = sum_j f_j(z)."""
        f = self.evaluate(z)
        return f.sum() if isinstance(f, Jet) else f.sum()


def _normalization_row(system: MarkedPGFSystem, policy: NumericPolicy) -> np.ndarray:
    """h with F(1) = h . f(0), from the singular solve at z = 1."""
    z = Jet.variable(1.0, 1)
    d, r = system.kernels(z)
    rows = solve_singular_rows(d, r, policy)
    return np.real(rows.value.sum(axis=1))


def solve_queue(system: MarkedPGFSystem, policy: NumericPolicy = DEFAULT_POLICY) -> QueueSolution:
    """Determine f(0) and return the solved chain.

    Raises:
        UnstableQueueError: rho >= 1, or rho above ``policy.max_load``
        RootCountError: the contour count disagrees with N - 1 interior roots
        NumericalError: the boundary vector is not a real probability vector
    """
    rho = system.rho
    if rho >= 1.0:
        raise UnstableQueueError(rho)
    if rho >= policy.max_load:
        raise UnstableQueueError(rho, f"load {rho:.6f} too close to 1 for a reliable analysis (limit {policy.max_load})")
    n = system.n_phases

    def arrival_matrix(z):
        return np.asarray(system.arrival_kernel(z), dtype=complex)

    def characteristic(z):
        return complex(np.linalg.det(z * np.eye(n) - arrival_matrix(z)))

    candidates = eigenvalue_fixed_points(arrival_matrix, n, policy=policy) if n > 1 else []
    roots = unit_disk_roots(characteristic, n - 1, candidates, policy)
    logger.debug("%s chain: %d interior roots %s", system.label, len(roots), np.round(roots, 8))

    conditions = []
    for root in roots:
        d, r = system.kernels(root)
        v = right_null_vector(d, policy)
        conditions.append(np.asarray(r) @ v)
    conditions.append(_normalization_row(system, policy))
    matrix = np.array(conditions, dtype=complex)
    rhs = np.zeros(n, dtype=complex)
    rhs[-1] = 1.0
    try:
        boundary = np.linalg.solve(matrix, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"boundary system is singular: {exc}") from exc

    boundary, imag = split_real(boundary, 1e-6)
    if boundary.min() < -policy.negative_probability_tolerance:
        raise NumericalError(f"boundary vector has a negative entry: {boundary}")
    boundary = np.clip(boundary, 0.0, None)
    logger.debug("%s chain boundary f(0) = %s (discarded imag %.2e)", system.label, boundary, imag)
    return QueueSolution(system=system, boundary=boundary, roots=list(roots), policy=policy)


def queue_length_moments(qs: QueueSolution) -> Tuple[float, float]:
    """Mean and variance of the queue left behind at a departure."""
    if qs.policy.jet_order < 3:
        raise ModelError("queue-length variance needs jet order >= 3")
    series = qs.total(Jet.variable(1.0, qs.policy.jet_order))
    c = np.real(series.coeffs)
    mean = float(c[1])
    var = float(2.0 * c[2] + c[1] - c[1] ** 2)
    return mean, var


def stability_limit(process: PhaseProcess, behavior: BehaviorModel, lam: float, batch: BatchDistribution,
                    high_vph: float = 2000.0, tol_vph: float = 0.01,
                    policy: NumericPolicy = DEFAULT_POLICY) -> float:
    """Mean major-road flow (veh/h) at which rho reaches 1, by bisection.

    The road keeps its generator and relative phase rates; only the mean
    flow is scaled.
    """
    def rho_at(qbar: float) -> float:
        road = process.with_mean_flow(qbar)
        return load(ServiceTransform(road, behavior, None, policy), lam, batch)

    low = 0.0
    if rho_at(low) >= 1.0:
        return 0.0
    while rho_at(high_vph) < 1.0:
        low = high_vph
        high_vph *= 2.0
        if high_vph > 1e6:
            raise ModelError("queue stays stable for every realistic major-road flow")
    while high_vph - low > tol_vph:
        mid = 0.5 * (low + high_vph)
        if rho_at(mid) < 1.0:
            low = mid
        else:
            high_vph = mid
    return 0.5 * (low + high_vph)
