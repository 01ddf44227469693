#!/usr/bin/env python3
"""
Markov-modulated Poisson description of major-road traffic.

A continuous-time Markov chain with generator Q drives the road; while the
chain is in phase i vehicles pass at rate q_i. The transient kernels
phi(t) and psi(t) describe how the phase evolves during a lag that no
vehicle interrupts.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import ModelError
from ..utils.jets import JetLike
from ..utils.linalg import mat_exp, solve_linear, stationary_vector, transient_integral

logger = logging.getLogger(__name__)

SECONDS_PER_HOUR = 3600.0


def _reachability(adjacency: np.ndarray) -> np.ndarray:
    n = adjacency.shape[0]
    reach = np.eye(n, dtype=bool) | adjacency
    for _ in range(n):
        reach = reach | ((reach.astype(int) @ reach.astype(int)) > 0)
    return reach


@dataclass(frozen=True, eq=False)
class PhaseProcess:
    """MMPP parameters in per-second units.

    Attributes:
        generator: N x N generator Q of the phase chain
        rates: non-negative passing rates q_i per phase
    """

    generator: np.ndarray
    rates: np.ndarray
    _stationary: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        q = np.array(self.generator, dtype=float, copy=True)
        rates = np.array(self.rates, dtype=float, copy=True).reshape(-1)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ModelError(f"generator must be square, got shape {q.shape}")
        n = q.shape[0]
        if rates.shape != (n,):
            raise ModelError(f"expected {n} passing rates, got {rates.shape[0]}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(rates))):
            raise ModelError("generator and rates must be finite")
        if np.any(rates < 0):
            raise ModelError(f"passing rates must be >= 0, got {rates}")
        off = q - np.diag(np.diag(q))
        if np.any(off < 0):
            raise ModelError("generator off-diagonal entries must be >= 0")
        if np.max(np.abs(q.sum(axis=1))) > 1e-9 * max(1.0, float(np.max(np.abs(q)))):
            raise ModelError(f"generator rows must sum to 0, got {q.sum(axis=1)}")
        if n > 1 and not np.all(_reachability(off > 0)):
            raise ModelError("generator must be irreducible")
        q.setflags(write=False)
        rates.setflags(write=False)
        object.__setattr__(self, "generator", q)
        object.__setattr__(self, "rates", rates)
        pi = np.ones(1) if n == 1 else stationary_vector(q)
        pi.setflags(write=False)
        object.__setattr__(self, "_stationary", pi)

    # ------------------------------------------------------------ constructors

    @classmethod
    def poisson(cls, rate_per_s: float) -> "PhaseProcess":
        return cls(np.zeros((1, 1)), np.array([rate_per_s]))

    @classmethod
    def two_phase(cls, mean_sojourn_s: Sequence[float], rates_per_s: Sequence[float]) -> "PhaseProcess":
        """Two alternating phases with the given mean sojourn times."""
        if len(mean_sojourn_s) != 2 or min(mean_sojourn_s) <= 0:
            raise ModelError(f"need two positive mean sojourn times, got {mean_sojourn_s}")
        mu1, mu2 = 1.0 / mean_sojourn_s[0], 1.0 / mean_sojourn_s[1]
        return cls(np.array([[-mu1, mu1], [mu2, -mu2]]), np.asarray(rates_per_s, dtype=float))

    @classmethod
    def from_flow_ratio(cls, generator: np.ndarray, ratio: Sequence[float], mean_flow_vph: float) -> "PhaseProcess":
        """Scale relative phase rates so the long-run flow equals ``mean_flow_vph``."""
        ratio = np.asarray(ratio, dtype=float)
        if np.any(ratio < 0) or not np.any(ratio > 0):
            raise ModelError(f"flow ratio must be non-negative and not all zero, got {ratio}")
        if mean_flow_vph < 0:
            raise ModelError(f"mean flow must be >= 0, got {mean_flow_vph}")
        shape = cls(generator, ratio)
        scale = mean_flow_vph / SECONDS_PER_HOUR / float(shape.stationary @ ratio)
        return cls(generator, ratio * scale)

    # -------------------------------------------------------------- properties

    @property
    def n_phases(self) -> int:
        return self.generator.shape[0]

    @property
    def stationary(self) -> np.ndarray:
        return self._stationary

    @property
    def sub_generator(self) -> np.ndarray:
        """Q - diag(q): phase evolution killed at vehicle passages."""
        return self.generator - np.diag(self.rates)

    def with_mean_flow(self, mean_flow_vph: float) -> "PhaseProcess":
        return PhaseProcess.from_flow_ratio(self.generator, self.rates, mean_flow_vph)

    def poisson_equivalent(self) -> "PhaseProcess":
        """Poisson road with the same long-run flow."""
        return PhaseProcess.poisson(mean_flow_rate(self))

    def __repr__(self) -> str:
        return f"PhaseProcess(N={self.n_phases}, rates={self.rates.tolist()})"


def stationary_phase(p: PhaseProcess) -> np.ndarray:
    """Stationary distribution pi of the phase chain."""
    return p.stationary.copy()


def mean_flow_rate(p: PhaseProcess) -> float:
    """Long-run passing rate pi . q (vehicles per second)."""
    return float(p.stationary @ p.rates)


def phi(p: PhaseProcess, t: float) -> np.ndarray:
    """phi_ij(t) = P(phase j at t, no passage in (0, t] | phase i at 0)."""
    if t < 0:
        raise ModelError(f"time must be >= 0, got {t}")
    return mat_exp(p.sub_generator, t)


def psi(p: PhaseProcess, t: float) -> np.ndarray:
    """Density of the first passage at t, arriving in phase j."""
    return phi(p, t) @ np.diag(p.rates)


def psi_hat(p: PhaseProcess, s: JetLike, horizon: float):
    """Laplace transform of psi truncated at ``horizon``."""
    return transient_integral(p.sub_generator, s, horizon) @ np.diag(p.rates)


def pbar(p: PhaseProcess, lam: float) -> np.ndarray:
    """(I - Q / lambda)^{-1}: phase at a batch arrival given the last service ended in phase i."""
    if lam <= 0:
        raise ModelError(f"arrival rate must be > 0, got {lam}")
    n = p.n_phases
    return solve_linear(np.eye(n) - p.generator / lam, np.eye(n))


# --------------------------------------------------------- two-phase closed forms


def two_phase_exponents(p: PhaseProcess) -> Tuple[float, float]:
    """Eigenvalues omega1 > omega2 of Q - diag(q) for a two-phase road."""
    if p.n_phases != 2:
        raise ModelError("closed forms need a two-phase process")
    mu1, mu2 = -p.generator[0, 0], -p.generator[1, 1]
    q1, q2 = p.rates
    b = q1 + mu1 + q2 + mu2
    disc = b * b - 4.0 * (mu1 * q2 + mu2 * q1 + q1 * q2)
    root = np.sqrt(max(disc, 0.0))
    return (-b + root) / 2.0, (-b - root) / 2.0


def phi_two_phase(p: PhaseProcess, t: float) -> np.ndarray:
    """Closed-form phi(t) for N = 2."""
    w1, w2 = two_phase_exponents(p)
    if w1 == w2:
        raise ModelError("closed form needs distinct exponents")
    mu = (-p.generator[0, 0], -p.generator[1, 1])
    q = p.rates
    e1, e2 = np.exp(w1 * t), np.exp(w2 * t)
    out = np.empty((2, 2))
    for i in range(2):
        o = 1 - i
        out[i, i] = ((w1 + q[o] + mu[o]) * e1 - (w2 + q[o] + mu[o]) * e2) / (w1 - w2)
        out[i, o] = mu[i] * (e1 - e2) / (w1 - w2)
    return out


def service_lst_two_phase(p: PhaseProcess, horizon: float, s: complex) -> np.ndarray:
    """Closed-form B1 service transform for N = 2, solved column by column."""
    w1, w2 = two_phase_exponents(p)
    mu1, mu2 = -p.generator[0, 0], -p.generator[1, 1]
    q1, q2 = p.rates
    d1, d2 = s - w1, s - w2
    t1, t2 = np.exp(-d1 * horizon), np.exp(-d2 * horizon)
    span = w1 - w2
    cross = span / (d1 * d2) - t1 / d1 + t2 / d2

    def own(qo, muo):
        return span * (s + qo + muo) / (d1 * d2) - (w1 + qo + muo) / d1 * t1 + (w2 + qo + muo) / d2 * t2

    system = np.array([
        [1.0 - q1 / span * own(q2, mu2), -mu1 * q2 / span * cross],
        [-mu2 * q1 / span * cross, 1.0 - q2 / span * own(q1, mu1)],
    ], dtype=complex)
    rhs = np.exp(-s * horizon) * phi_two_phase(p, horizon)
    return np.linalg.solve(system, rhs)
