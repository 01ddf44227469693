#!/usr/bin/env python3
"""
Service-time transforms for minor-road drivers under three gap-acceptance
behaviors.

The service of a driver starts when the previous driver has crossed (or on
arrival at an empty stop line) and ends when the driver has crossed; a
driver needs a major-road gap of at least T seconds and crossing takes T.

Behaviors:
    B1  one fixed critical gap T
    B2  inconsistent driver: T is redrawn at every major-road passage
    B3  consistent driver: T is drawn once per driver

G(s)_ij is the joint transform of the service time with the major-road
phase j at the end of service, given phase i at its start.
"""

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import ModelError
from ..utils.jets import Jet, JetLike, exp
from ..utils.linalg import solve_linear, stationary_vector
from ..utils.policy import DEFAULT_POLICY, NumericPolicy
from .phase_process import PhaseProcess, pbar, phi, psi_hat

logger = logging.getLogger(__name__)


class BehaviorKind(str, Enum):
    B1 = "B1"
    B2 = "B2"
    B3 = "B3"


@dataclass(frozen=True)
class BehaviorModel:
    """Critical-gap behavior with a finite gap distribution.

    Attributes:
        kind: B1, B2 or B3
        gaps: ((T_k, p_k), ...) with T_k > 0 seconds and probabilities summing to 1
    """

    kind: BehaviorKind
    gaps: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        kind = BehaviorKind(self.kind)
        gaps = tuple((float(t), float(pk)) for t, pk in self.gaps)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "gaps", gaps)
        if not gaps:
            raise ModelError("behavior needs at least one critical gap")
        for t, pk in gaps:
            if not (np.isfinite(t) and t > 0):
                raise ModelError(f"critical gap must be finite and > 0, got {t}")
            if not 0 < pk <= 1:
                raise ModelError(f"gap probability must lie in (0, 1], got {pk}")
        total = math.fsum(pk for _, pk in gaps)
        if abs(total - 1.0) > 1e-9:
            raise ModelError(f"gap probabilities must sum to 1, got {total}")
        if kind is BehaviorKind.B1 and len(gaps) != 1:
            raise ModelError("B1 uses exactly one critical gap")

    @classmethod
    def constant(cls, gap_s: float) -> "BehaviorModel":
        return cls(BehaviorKind.B1, ((gap_s, 1.0),))

    @classmethod
    def inconsistent(cls, gaps: Sequence[Tuple[float, float]]) -> "BehaviorModel":
        return cls(BehaviorKind.B2, tuple(gaps))

    @classmethod
    def consistent(cls, gaps: Sequence[Tuple[float, float]]) -> "BehaviorModel":
        return cls(BehaviorKind.B3, tuple(gaps))

    @property
    def mean_gap(self) -> float:
        return math.fsum(t * pk for t, pk in self.gaps)

    def sample_gap(self, rng: np.random.Generator) -> float:
        if len(self.gaps) == 1:
            return self.gaps[0][0]
        idx = rng.choice(len(self.gaps), p=[pk for _, pk in self.gaps])
        return self.gaps[idx][0]


@dataclass(frozen=True)
class ServiceMoments:
    """Stationary service summary: pi of P, E[G] and E[G^2] in seconds."""

    pi: np.ndarray
    mean: float
    second_moment: float
    exceptional_mean: Optional[float] = None

    @property
    def variance(self) -> float:
        return self.second_moment - self.mean ** 2


class _GapKernel:
    """Per-gap cache of phi(T)."""

    def __init__(self, process: PhaseProcess):
        self.process = process
        self._phi: Dict[float, np.ndarray] = {}

    def phi(self, horizon: float) -> np.ndarray:
        if horizon not in self._phi:
            self._phi[horizon] = phi(self.process, horizon)
        return self._phi[horizon]


def _kernel(process: PhaseProcess, kernel: Optional[_GapKernel]) -> _GapKernel:
    return kernel if kernel is not None else _GapKernel(process)


def _identity(s, n: int):
    return Jet.constant(np.eye(n), s.order) if isinstance(s, Jet) else np.eye(n)


def service_lst_b1(p: PhaseProcess, horizon: float, s: JetLike, kernel: Optional[_GapKernel] = None,
                   policy: NumericPolicy = DEFAULT_POLICY):
    """G(s) for a fixed critical gap: (I - psi_hat(s, T))^{-1} e^{-sT} phi(T)."""
    k = _kernel(p, kernel)
    rhs = exp(-s * horizon) * k.phi(horizon)
    return solve_linear(_identity(s, p.n_phases) - psi_hat(p, s, horizon), rhs, policy)


def service_lst_b2(p: PhaseProcess, behavior: BehaviorModel, s: JetLike, kernel: Optional[_GapKernel] = None,
                   policy: NumericPolicy = DEFAULT_POLICY):
    """G(s) for an inconsistent driver: the gap is redrawn after each passage."""
    k = _kernel(p, kernel)
    restart = None
    finish = None
    for horizon, prob in behavior.gaps:
        a = prob * psi_hat(p, s, horizon)
        b = prob * exp(-s * horizon) * k.phi(horizon)
        restart = a if restart is None else restart + a
        finish = b if finish is None else finish + b
    return solve_linear(_identity(s, p.n_phases) - restart, finish, policy)


def service_lst_b3(p: PhaseProcess, behavior: BehaviorModel, s: JetLike, kernel: Optional[_GapKernel] = None,
                   policy: NumericPolicy = DEFAULT_POLICY):
    """G(s) for a consistent driver: a mixture of fixed-gap transforms."""
    k = _kernel(p, kernel)
    total = None
    for horizon, prob in behavior.gaps:
        term = prob * service_lst_b1(p, horizon, s, k, policy)
        total = term if total is None else total + term
    return total


class ServiceTransform:
    """Evaluators s -> G(s) and s -> G*(s) for one road, behavior and arrival rate.

    G*(s) = Pbar G(s) is the transform for the first driver of a busy
    period, whose service starts at a batch arrival rather than at a
    departure.
    """

    _MEMO_SIZE = 64

    def __init__(self, process: PhaseProcess, behavior: BehaviorModel, lam: Optional[float] = None,
                 policy: NumericPolicy = DEFAULT_POLICY):
        self.process = process
        self.behavior = behavior
        self.lam = lam
        self.policy = policy
        self._kernel = _GapKernel(process)
        self._memo: "OrderedDict[Tuple, object]" = OrderedDict()
        self._pbar = pbar(process, lam) if lam is not None else None
        self._P: Optional[np.ndarray] = None

    @property
    def n_phases(self) -> int:
        return self.process.n_phases

    def _key(self, s) -> Tuple:
        if isinstance(s, Jet):
            return ("jet", s.coeffs.dtype.str, s.coeffs.tobytes())
        return ("num", complex(s))

    def regular(self, s: JetLike):
        """G(s)."""
        key = self._key(s)
        if key in self._memo:
            self._memo.move_to_end(key)
            return self._memo[key]
        kind = self.behavior.kind
        if kind is BehaviorKind.B1:
            value = service_lst_b1(self.process, self.behavior.gaps[0][0], s, self._kernel, self.policy)
        elif kind is BehaviorKind.B2:
            value = service_lst_b2(self.process, self.behavior, s, self._kernel, self.policy)
        else:
            value = service_lst_b3(self.process, self.behavior, s, self._kernel, self.policy)
        self._memo[key] = value
        if len(self._memo) > self._MEMO_SIZE:
            self._memo.popitem(last=False)
        return value

    def exceptional(self, s: JetLike):
        """G*(s) = Pbar G(s)."""
        if self._pbar is None:
            raise ModelError("the exceptional service transform needs the batch arrival rate")
        return self._pbar @ self.regular(s)

    @property
    def pbar(self) -> np.ndarray:
        if self._pbar is None:
            raise ModelError("Pbar needs the batch arrival rate")
        return self._pbar

    @property
    def P(self) -> np.ndarray:
        """Phase transition matrix over one service, G(0)."""
        if self._P is None:
            self._P = np.real(np.asarray(self.regular(0.0)))
        return self._P

    @property
    def P_star(self) -> np.ndarray:
        return self.pbar @ self.P

    def with_arrival_rate(self, lam: float) -> "ServiceTransform":
        return ServiceTransform(self.process, self.behavior, lam, self.policy)


def first_service_lst(p: PhaseProcess, base: ServiceTransform, lam: float, s: JetLike):
    """G*(s) for arrival rate ``lam``."""
    return pbar(p, lam) @ base.regular(s)


def service_moments(st: ServiceTransform) -> ServiceMoments:
    """pi of P with the stationary mean and second moment of the service time."""
    series = st.regular(Jet.variable(0.0, 2))
    c = np.real(series.coeffs)
    pi = stationary_vector(np.eye(st.n_phases) - c[0], st.policy)
    ones = np.ones(st.n_phases)
    mean = float(pi @ (-c[1]) @ ones)
    second = float(pi @ (2.0 * c[2]) @ ones)
    exceptional = None
    if st.lam is not None:
        # preceding departure phase taken as pi
        exceptional = float(pi @ st.pbar @ (-c[1]) @ ones)
    logger.debug("service moments: E[G]=%.6g E[G^2]=%.6g", mean, second)
    return ServiceMoments(pi=pi, mean=mean, second_moment=second, exceptional_mean=exceptional)
