#!/usr/bin/env python3
"""
Discrete-event simulation of the minor-road queue.

The major road is a sample path of the MMPP generated ahead of time in
chunks; minor-road batches arrive as a Poisson process and are served one
driver at a time, first come first served. A driver in service scans the
major road from the start of its service and crosses once the next vehicle
is at least one critical gap away; crossing takes the critical gap.
"""

import heapq
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import stats

from ..utils.errors import ModelError, UnstableQueueError
from .gap_service import BehaviorKind, BehaviorModel, ServiceTransform
from .phase_process import SECONDS_PER_HOUR, PhaseProcess
from .queue_core import BatchDistribution, load

logger = logging.getLogger(__name__)

METRICS = ("EW_s", "VarW_s2", "ES_s", "VarS_s2", "EX", "P0", "mean_in_system", "flow_vph", "customers")


@dataclass(frozen=True)
class SimConfig:
    """One simulated operating point.

    Attributes:
        lam: batch arrival rate (batches per second)
        measurement_s: length of the observation window
        warmup_s: discarded start-up period; 10% of the window when omitted
    """

    process: PhaseProcess
    behavior: BehaviorModel
    lam: float
    batch: BatchDistribution
    measurement_s: float = 4 * SECONDS_PER_HOUR
    warmup_s: Optional[float] = None
    replications: int = 20
    seed: int = 0

    def __post_init__(self):
        if not self.lam > 0:
            raise ModelError(f"batch arrival rate must be > 0, got {self.lam}")
        if not self.measurement_s > 0:
            raise ModelError(f"measurement window must be > 0, got {self.measurement_s}")
        if self.warmup_s is not None and self.warmup_s < 0:
            raise ModelError(f"warm-up must be >= 0, got {self.warmup_s}")
        if self.replications < 1:
            raise ModelError(f"need at least one replication, got {self.replications}")

    @property
    def warmup(self) -> float:
        return 0.1 * self.measurement_s if self.warmup_s is None else self.warmup_s

    @property
    def horizon(self) -> float:
        return self.warmup + self.measurement_s


class Event:
    """Simulation event ordered by time, ties broken by scheduling order."""

    __slots__ = ("time", "kind", "seq")

    ARRIVAL = "arrival"
    DEPARTURE = "departure"

    def __init__(self, time: float, kind: str, seq: int):
        self.time = time
        self.kind = kind
        self.seq = seq

    def __lt__(self, other: "Event") -> bool:
        return (self.time, self.seq) < (other.time, other.seq)


class MajorRoad:
    """Lazily generated MMPP passage times."""

    def __init__(self, process: PhaseProcess, rng: np.random.Generator, chunk_s: float = SECONDS_PER_HOUR):
        self.process = process
        self.rng = rng
        self.chunk_s = chunk_s
        self._times = np.empty(0)
        self._horizon = 0.0
        self._phase = int(rng.choice(process.n_phases, p=process.stationary))
        self._silent = not np.any(process.rates > 0)

    def _extend(self):
        q = self.process.generator
        rates = self.process.rates
        t = self._horizon
        target = t + self.chunk_s
        pieces = [self._times]
        while t < target:
            i = self._phase
            exit_rate = -q[i, i]
            stay = self.rng.exponential(1.0 / exit_rate) if exit_rate > 0 else math.inf
            end = min(t + stay, target)
            count = self.rng.poisson(rates[i] * (end - t))
            if count:
                pieces.append(np.sort(self.rng.uniform(t, end, count)))
            if t + stay <= target:
                jump = q[i].copy()
                jump[i] = 0.0
                self._phase = int(self.rng.choice(len(jump), p=jump / exit_rate))
            t = end
        self._times = np.concatenate(pieces)
        self._horizon = target

    def next_arrival_after(self, t: float) -> float:
        """First passage strictly after ``t``."""
        if self._silent:
            return math.inf
        while True:
            idx = int(np.searchsorted(self._times, t, side="right"))
            if idx < len(self._times):
                return float(self._times[idx])
            self._extend()

    def count_until(self, t: float) -> int:
        while self._horizon < t:
            self._extend()
        return int(np.searchsorted(self._times, t, side="right"))


@dataclass
class _Driver:
    arrival: float
    batch_id: int
    position: int
    measured: bool
    start: float = 0.0


class _Replication:
    """One independent run of the minor-road queue."""

    def __init__(self, cfg: SimConfig, road_rng: np.random.Generator, minor_rng: np.random.Generator,
                 collect_embedded: bool):
        self.cfg = cfg
        self.road = MajorRoad(cfg.process, road_rng)
        self.rng = minor_rng
        self.collect_embedded = collect_embedded
        self.events: List[Event] = []
        self.queue: deque = deque()
        self.batches: deque = deque()
        self.remaining: Dict[int, int] = {}
        self.in_service: Optional[_Driver] = None
        self._seq = 0
        self._next_batch = 0
        self.waits: List[float] = []
        self.sojourns: List[float] = []
        self.left_behind: List[int] = []
        self.batch_left_behind: List[int] = []
        self.begin_service: List[int] = []
        self._area = 0.0
        self._last = 0.0

    def _schedule(self, time: float, kind: str):
        self._seq += 1
        heapq.heappush(self.events, Event(time, kind, self._seq))

    def _in_system(self) -> int:
        return len(self.queue) + (self.in_service is not None)

    def _advance(self, now: float):
        lo = max(self._last, self.cfg.warmup)
        hi = min(now, self.cfg.horizon)
        if hi > lo:
            self._area += self._in_system() * (hi - lo)
        self._last = now

    def _service_time(self, start: float) -> float:
        """Time from ``start`` until the driver has crossed."""
        behavior = self.cfg.behavior
        gap = behavior.sample_gap(self.rng)
        t = start
        while True:
            nxt = self.road.next_arrival_after(t)
            if nxt - t >= gap:
                return t + gap - start
            t = nxt
            if behavior.kind is BehaviorKind.B2:
                gap = behavior.sample_gap(self.rng)

    def _start_service(self, now: float):
        driver = self.queue.popleft()
        driver.start = now
        self.in_service = driver
        if driver.position == 1 and driver.measured and self.collect_embedded:
            self.begin_service.append(len(self.batches) - 1)
        self._schedule(now + self._service_time(now), Event.DEPARTURE)

    def _on_arrival(self, now: float):
        if now >= self.cfg.horizon:
            return
        size = int(self.cfg.batch.sample(self.rng))
        measured = now >= self.cfg.warmup
        bid = self._next_batch
        self._next_batch += 1
        for m in range(1, size + 1):
            self.queue.append(_Driver(now, bid, m, measured))
        self.batches.append(bid)
        self.remaining[bid] = size
        self._schedule(now + self.rng.exponential(1.0 / self.cfg.lam), Event.ARRIVAL)
        if self.in_service is None:
            self._start_service(now)

    def _on_departure(self, now: float):
        driver = self.in_service
        self.in_service = None
        if driver.measured:
            self.waits.append(driver.start - driver.arrival)
            self.sojourns.append(now - driver.arrival)
            self.left_behind.append(len(self.queue))
        self.remaining[driver.batch_id] -= 1
        if self.remaining[driver.batch_id] == 0:
            del self.remaining[driver.batch_id]
            self.batches.popleft()
            if driver.measured and self.collect_embedded:
                self.batch_left_behind.append(len(self.batches))
        if self.queue:
            self._start_service(now)

    def run(self) -> Dict:
        self._schedule(self.rng.exponential(1.0 / self.cfg.lam), Event.ARRIVAL)
        while self.events:
            event = heapq.heappop(self.events)
            self._advance(event.time)
            if event.kind == Event.ARRIVAL:
                self._on_arrival(event.time)
            else:
                self._on_departure(event.time)

        waits = np.asarray(self.waits)
        sojourns = np.asarray(self.sojourns)
        behind = np.asarray(self.left_behind)
        n = len(waits)
        ddof = 1 if n > 1 else 0
        result = {
            "EW_s": float(waits.mean()) if n else math.nan,
            "VarW_s2": float(waits.var(ddof=ddof)) if n else math.nan,
            "ES_s": float(sojourns.mean()) if n else math.nan,
            "VarS_s2": float(sojourns.var(ddof=ddof)) if n else math.nan,
            "EX": float(behind.mean()) if n else math.nan,
            "P0": float(np.mean(behind == 0)) if n else math.nan,
            "mean_in_system": self._area / self.cfg.measurement_s,
            "flow_vph": self.road.count_until(self.cfg.horizon) / self.cfg.horizon * SECONDS_PER_HOUR,
            "customers": float(n),
        }
        if self.collect_embedded:
            result["pmf"] = {
                "departure": _pmf(self.left_behind),
                "batch_departure": _pmf(self.batch_left_behind),
                "begin_service": _pmf(self.begin_service),
            }
        return result


def _pmf(samples: List[int]) -> np.ndarray:
    if not samples:
        return np.zeros(1)
    counts = np.bincount(np.asarray(samples, dtype=int))
    return counts / counts.sum()


def simulate_replication(cfg: SimConfig, seed: np.random.SeedSequence, collect_embedded: bool = False) -> Dict:
    """Run one replication with its own Philox streams for road and minor traffic."""
    road_seed, minor_seed = seed.spawn(2)
    return _Replication(cfg, np.random.Generator(np.random.Philox(road_seed)),
                        np.random.Generator(np.random.Philox(minor_seed)), collect_embedded).run()


@dataclass
class SimStats:
    """Across-replication summary."""

    per_replication: pd.DataFrame
    replications: int
    estimates: Dict[str, float] = field(default_factory=dict)
    std_errors: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        frame = self.per_replication[list(METRICS)]
        self.estimates = frame.mean().to_dict()
        if self.replications > 1:
            self.std_errors = (frame.std(ddof=1) / math.sqrt(self.replications)).to_dict()
        else:
            self.std_errors = {k: math.nan for k in METRICS}

    def confidence_interval(self, metric: str, level: float = 0.95) -> Tuple[float, float]:
        """Student-t interval for the across-replication mean."""
        if self.replications < 2:
            return math.nan, math.nan
        half = stats.t.ppf(0.5 + level / 2.0, self.replications - 1) * self.std_errors[metric]
        return self.estimates[metric] - half, self.estimates[metric] + half

    def __getitem__(self, metric: str) -> float:
        return self.estimates[metric]


@dataclass
class EmbeddedProbe:
    """Empirical pmfs of the embedded queue counts, one per replication.

    departure       drivers left behind by a departing driver
    batch_departure batches left behind when a batch's last driver departs
    begin_service   other batches present when a batch starts service
    """

    departure: List[np.ndarray]
    batch_departure: List[np.ndarray]
    begin_service: List[np.ndarray]

    def _series(self, which: str) -> List[np.ndarray]:
        if which not in ("departure", "batch_departure", "begin_service"):
            raise ModelError(f"unknown embedded count {which!r}")
        return getattr(self, which)

    @staticmethod
    def _summary(values: np.ndarray) -> Tuple[float, float]:
        se = values.std(ddof=1) / math.sqrt(len(values)) if len(values) > 1 else math.nan
        return float(values.mean()), float(se)

    def pgf(self, which: str, z: float) -> Tuple[float, float]:
        values = np.array([np.polyval(p[::-1], z) for p in self._series(which)])
        return self._summary(values)

    def mean(self, which: str) -> Tuple[float, float]:
        values = np.array([float(np.arange(len(p)) @ p) for p in self._series(which)])
        return self._summary(values)

    def empty_probability(self, which: str) -> Tuple[float, float]:
        return self._summary(np.array([p[0] for p in self._series(which)]))


def _check_stable(cfg: SimConfig) -> float:
    rho = load(ServiceTransform(cfg.process, cfg.behavior, cfg.lam), cfg.lam, cfg.batch)
    if rho >= 1.0:
        raise UnstableQueueError(rho, f"refusing to simulate an unstable queue (rho = {rho:.4f})")
    return rho


def _replicate(cfg: SimConfig, n_jobs: int, collect_embedded: bool) -> List[Dict]:
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.replications)
    return Parallel(n_jobs=n_jobs)(delayed(simulate_replication)(cfg, s, collect_embedded) for s in seeds)


def run(cfg: SimConfig, n_jobs: int = 1) -> SimStats:
    """Simulate ``cfg.replications`` independent replications.

    Results depend only on ``cfg.seed``, never on ``n_jobs``.
    """
    rho = _check_stable(cfg)
    logger.info("simulating rho=%.4f for %d replications of %.0f s", rho, cfg.replications, cfg.measurement_s)
    results = _replicate(cfg, n_jobs, collect_embedded=False)
    frame = pd.DataFrame(results, columns=list(METRICS))
    frame.insert(0, "replication", range(1, len(frame) + 1))
    return SimStats(per_replication=frame, replications=cfg.replications)


def run_embedded_probe(cfg: SimConfig, n_jobs: int = 1) -> EmbeddedProbe:
    """Empirical embedded-chain pmfs for checking the analytic transforms."""
    _check_stable(cfg)
    results = _replicate(cfg, n_jobs, collect_embedded=True)
    return EmbeddedProbe(
        departure=[r["pmf"]["departure"] for r in results],
        batch_departure=[r["pmf"]["batch_departure"] for r in results],
        begin_service=[r["pmf"]["begin_service"] for r in results],
    )
