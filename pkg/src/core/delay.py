#!/usr/bin/env python3
"""
Delay analysis of minor-road drivers.

A batch of drivers arriving together is treated as one super customer whose
service is the sum of its members' services. Solving the departure chain of
super customers yields the waiting and sojourn transforms of whole batches;
those of the m-th driver of a batch follow by appending m - 1 services.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
import pandas as pd

from ..utils.errors import ModelError
from ..utils.jets import Jet, JetLike, value_of
from ..utils.policy import DEFAULT_POLICY, NumericPolicy
from .gap_service import BehaviorModel, ServiceTransform
from .phase_process import PhaseProcess
from .queue_core import BatchDistribution, MarkedPGFSystem, QueueSolution, load, solve_queue

logger = logging.getLogger(__name__)


class SuperServiceTransform:
    """Service transforms of a whole batch.

    regular(s)     = sum_k b_k G(s)^k
    exceptional(s) = G*(s) sum_k b_k G(s)^(k-1)
    """

    def __init__(self, st: ServiceTransform, batch: BatchDistribution):
        self.service = st
        self.batch = batch

    def at(self, s: JetLike):
        g = self.service.regular(s)
        g_star = self.service.exceptional(s)
        n = self.service.n_phases
        power = Jet.constant(np.eye(n), g.order) if isinstance(g, Jet) else np.eye(n)
        regular = None
        tail = None
        k_prev = 0
        for k, b in self.batch.pmf:
            for _ in range(k - 1 - k_prev):
                power = power @ g
            # power == G^(k-1)
            t = b * power
            tail = t if tail is None else tail + t
            power = power @ g
            k_prev = k
            r = b * power
            regular = r if regular is None else regular + r
        return regular, g_star @ tail

    def regular(self, s: JetLike):
        return self.at(s)[0]

    def exceptional(self, s: JetLike):
        return self.at(s)[1]


def super_service(st: ServiceTransform, batch: BatchDistribution) -> SuperServiceTransform:
    return SuperServiceTransform(st, batch)


def super_chain(ss: SuperServiceTransform, lam: float, policy: NumericPolicy = DEFAULT_POLICY) -> QueueSolution:
    """Departure chain of super customers: A(z) = G_sc(lambda (1 - z)), B(z) = z."""
    st = ss.service
    system = MarkedPGFSystem(
        n_phases=st.n_phases,
        arrival_kernel=lambda z: ss.regular(lam * (1.0 - z)),
        first_kernel=lambda z: ss.exceptional(lam * (1.0 - z)),
        batch_pgf=lambda z: z,
        rho=load(st, lam, ss.batch),
        label="super-customer",
    )
    return solve_queue(system, policy)


def begin_service_split(qs: QueueSolution, z: JetLike):
    """Split of the begin-service pgf by whether the batch found the server idle.

    Returns:
        (empty, nonempty) with empty_i = f_i(0) and
        nonempty_i = (f_i(z) - f_i(0)) / z
    """
    f0 = qs.boundary
    z0 = complex(value_of(z))
    if isinstance(z, Jet):
        empty = Jet.constant(f0, z.order)
    else:
        empty = f0.copy()
    if abs(z0) < 1e-12:
        # Taylor shift of f around 0
        order = z.order if isinstance(z, Jet) else 0
        series = qs.evaluate(Jet.variable(0.0, order + 1))
        shifted = Jet(series.coeffs[1:])
        nonempty = shifted.compose(z) if isinstance(z, Jet) else shifted.value
        return empty, nonempty
    f = qs.evaluate(z)
    return empty, (f - f0) / z


@dataclass(frozen=True)
class DelayTransforms:
    """Super-customer delay transforms at a common argument ``s``.

    All members are jets in s (or arrays for numeric s), indexed by the
    road phase at the super customer's departure.
    """

    s: JetLike
    lam: float
    batch: BatchDistribution
    sojourn_by_type: JetLike
    wait_empty_by_type: JetLike
    wait_nonempty_by_type: JetLike

    @property
    def sojourn_sc(self):
        return self.sojourn_by_type.sum()

    @property
    def wait_sc(self):
        return self.wait_empty_by_type.sum() + self.wait_nonempty_by_type.sum()


def little_transforms(qs: QueueSolution, lam: float, batch: BatchDistribution, s: JetLike) -> DelayTransforms:
    """Sojourn and waiting transforms of super customers via z = 1 - s / lambda."""
    z = 1.0 - s / lam
    empty, nonempty = begin_service_split(qs, z)
    return DelayTransforms(
        s=s,
        lam=lam,
        batch=batch,
        sojourn_by_type=qs.evaluate(z),
        wait_empty_by_type=empty,
        wait_nonempty_by_type=nonempty,
    )


def _check_position(dt: DelayTransforms, m: int, upper: int):
    if not 1 <= m <= upper:
        raise ModelError(f"position must lie in [1, {upper}], got {m}")


def position_wait_lst(dt: DelayTransforms, st: ServiceTransform, m: int):
    """Waiting transform of the m-th driver of a batch, 1 <= m <= M + 1."""
    _check_position(dt, m, dt.batch.max_size + 1)
    if m == 1:
        return dt.wait_sc
    g = st.regular(dt.s)
    n = st.n_phases
    ones = np.ones(n)
    g_star = st.exceptional(dt.s)
    chain = g_star
    for _ in range(m - 2):
        chain = chain @ g
    behind_idle = dt.wait_empty_by_type @ (chain @ ones)
    busy = g
    for _ in range(m - 2):
        busy = busy @ g
    behind_busy = dt.wait_nonempty_by_type @ (busy @ ones)
    return behind_idle + behind_busy


def position_sojourn_lst(dt: DelayTransforms, st: ServiceTransform, m: int):
    """Sojourn transform of the m-th driver of a batch, 1 <= m <= M."""
    _check_position(dt, m, dt.batch.max_size)
    out = position_wait_lst(dt, st, m + 1)
    if m == dt.batch.max_size and len(dt.batch.pmf) == 1 and isinstance(out, Jet) and out.order >= 1:
        # a fixed batch size makes the last driver's sojourn the batch sojourn
        gap = abs(out.coeffs[1] - dt.sojourn_sc.coeffs[1])
        if gap > 1e-6:
            logger.warning("last-position sojourn differs from batch sojourn by %.3e", gap)
    return out


def position_probabilities(batch: BatchDistribution) -> np.ndarray:
    """r_m = P(a driver is m-th in its batch) = (1 / E[B]) sum_{k >= m} b_k."""
    pmf = batch.exact_pmf()
    mean = sum(k * b for k, b in pmf.items())
    probs = []
    for m in range(1, batch.max_size + 1):
        probs.append(sum(b for k, b in pmf.items() if k >= m) / mean)
    return np.array([float(r) for r in probs])


def arbitrary_delay(dt: DelayTransforms, st: ServiceTransform):
    """(W, S) transforms of an arbitrary driver, mixed over positions."""
    r = position_probabilities(dt.batch)
    wait = None
    sojourn = None
    nxt = position_wait_lst(dt, st, 1)
    for m in range(1, dt.batch.max_size + 1):
        w_m = nxt
        nxt = position_wait_lst(dt, st, m + 1)
        wait = r[m - 1] * w_m if wait is None else wait + r[m - 1] * w_m
        sojourn = r[m - 1] * nxt if sojourn is None else sojourn + r[m - 1] * nxt
    return wait, sojourn


def lst_moments(transform: Jet) -> Tuple[float, float]:
    """Mean and variance from a scalar transform jet at s = 0."""
    if not isinstance(transform, Jet) or transform.order < 2:
        raise ModelError("moments need a transform jet of order >= 2")
    c = np.real(transform.coeffs)
    mean = -float(c[1])
    return mean, float(2.0 * c[2] - mean ** 2)


@dataclass(frozen=True)
class DelayMoments:
    """Mean and variance of waiting time W and sojourn time S, in seconds."""

    EW: float
    VarW: float
    ES: float
    VarS: float

    def as_dict(self) -> Dict[str, float]:
        return {"EW_s": self.EW, "VarW_s2": self.VarW, "ES_s": self.ES, "VarS_s2": self.VarS}


def delay_moments(dt: DelayTransforms, st: ServiceTransform) -> DelayMoments:
    """Moments of the arbitrary driver's waiting and sojourn times."""
    wait, sojourn = arbitrary_delay(dt, st)
    ew, varw = lst_moments(wait)
    es, vars_ = lst_moments(sojourn)
    return DelayMoments(EW=ew, VarW=varw, ES=es, VarS=vars_)


def super_delay_moments(dt: DelayTransforms) -> DelayMoments:
    """Waiting and sojourn moments of whole batches."""
    ew, varw = lst_moments(dt.wait_sc)
    es, vars_ = lst_moments(dt.sojourn_sc)
    return DelayMoments(EW=ew, VarW=varw, ES=es, VarS=vars_)


def position_delay_table(dt: DelayTransforms, st: ServiceTransform) -> pd.DataFrame:
    """Delay moments per position in the batch, with the share r_m of drivers in each position."""
    r = position_probabilities(dt.batch)
    rows = []
    for m in range(1, dt.batch.max_size + 1):
        ew, varw = lst_moments(position_wait_lst(dt, st, m))
        es, vars_ = lst_moments(position_sojourn_lst(dt, st, m))
        rows.append({"position": m, "share": r[m - 1], "EW_s": ew, "VarW_s2": varw,
                     "ES_s": es, "VarS_s2": vars_})
    return pd.DataFrame(rows)


def conditional_wait_by_type(dt: DelayTransforms) -> pd.DataFrame:
    """Batch waiting time split by start-of-service phase and by whether the server was idle."""
    rows = []
    for label, part in (("idle", dt.wait_empty_by_type), ("busy", dt.wait_nonempty_by_type)):
        for j in range(part.shape[0]):
            c = np.real(part[j].coeffs)
            share = float(c[0])
            rows.append({
                "phase": j + 1,
                "arrival": label,
                "probability": share,
                "EW_s": -float(c[1]) / share if share > 0 else math.nan,
            })
    return pd.DataFrame(rows)


@dataclass
class DelayAnalysis:
    """Everything the delay pipeline produces for one operating point."""

    rho: float
    service: ServiceTransform
    chain: QueueSolution
    transforms: DelayTransforms
    moments: DelayMoments

    def position_table(self) -> pd.DataFrame:
        return position_delay_table(self.transforms, self.service)

    def super_moments(self) -> DelayMoments:
        return super_delay_moments(self.transforms)

    def wait_by_type(self) -> pd.DataFrame:
        return conditional_wait_by_type(self.transforms)


def analyze_delay(process: PhaseProcess, behavior: BehaviorModel, lam: float, batch: BatchDistribution,
                  policy: NumericPolicy = DEFAULT_POLICY) -> DelayAnalysis:
    """Delay moments of an arbitrary minor-road driver.

    Args:
        process: major-road MMPP
        behavior: gap-acceptance behavior
        lam: batch arrival rate (batches per second)
        batch: batch-size distribution

    Returns:
        DelayAnalysis with the solved super-customer chain and the moments
    """
    if policy.jet_order < 3:
        raise ModelError("delay variances need jet order >= 3")
    st = ServiceTransform(process, behavior, lam, policy)
    ss = super_service(st, batch)
    chain = super_chain(ss, lam, policy)
    s = Jet.variable(0.0, policy.jet_order)
    dt = little_transforms(chain, lam, batch, s)
    moments = delay_moments(dt, st)
    logger.info("rho=%.4f E[W]=%.4f s E[S]=%.4f s", chain.rho, moments.EW, moments.ES)
    return DelayAnalysis(rho=chain.rho, service=st, chain=chain, transforms=dt, moments=moments)
