"""
Experiment configuration.

A JSON tree with explicit units in every key name is parsed into frozen
dataclasses; ``emit_config`` writes the same tree back. Unknown keys are
rejected and every validation failure names the offending key.
"""

import json
import logging
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np

from .errors import ConfigError, GapQueueError

logger = logging.getLogger(__name__)

EXPERIMENT_KINDS = ("analyze", "table1", "sweep", "simulate", "approx")
SWEEP_AXES = ("qbar_vph", "lambda_bph")
SECONDS_PER_HOUR = 3600.0


def _require(tree: Mapping, key: str, path: str):
    if key not in tree:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required key")
    return tree[key]


def _reject_unknown(tree: Mapping, allowed: Iterable[str], path: str):
    if not isinstance(tree, Mapping):
        raise ConfigError(path or "<root>", "expected an object")
    for key in tree:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown key")


def _number(value, key: str, minimum: Optional[float] = None, strict: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    value = float(value)
    if not np.isfinite(value):
        raise ConfigError(key, "must be finite")
    if minimum is not None and (value <= minimum if strict else value < minimum):
        raise ConfigError(key, f"must be {'>' if strict else '>='} {minimum}, got {value}")
    return value


def _numbers(values, key: str, minimum: Optional[float] = None, strict: bool = False) -> Tuple[float, ...]:
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError(key, "expected a non-empty list of numbers")
    return tuple(_number(v, f"{key}[{i}]", minimum, strict) for i, v in enumerate(values))


def _names(values, key: str, known: Iterable[str]) -> Tuple[str, ...]:
    if not isinstance(values, (list, tuple)):
        raise ConfigError(key, "expected a list of names")
    known = list(known)
    for v in values:
        if v not in known:
            raise ConfigError(key, f"unknown name {v!r} (known: {', '.join(known)})")
    return tuple(values)


def _increasing(values: Tuple[float, ...], key: str) -> Tuple[float, ...]:
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(key, "grid must be strictly increasing")
    return values


def _pmf_sum(pmf: Iterable[Tuple[Any, float]], key: str):
    total = float(np.sum([p for _, p in pmf]))
    if abs(total - 1.0) > 1e-9:
        raise ConfigError(key, f"probabilities must sum to 1 within 1e-9, got {total!r}")


# ------------------------------------------------------------------ model parts


@dataclass(frozen=True)
class MajorRoadConfig:
    """Phase chain (generator or two-phase mean sojourns) and phase rates (fixed or relative)."""

    generator_per_s: Optional[Tuple[Tuple[float, ...], ...]] = None
    mean_phase_sojourn_s: Optional[Tuple[float, ...]] = None
    arrival_rates_vph: Optional[Tuple[float, ...]] = None
    flow_ratio: Optional[Tuple[float, ...]] = None

    KEYS = ("generator_per_s", "mean_phase_sojourn_s", "arrival_rates_vph", "flow_ratio")

    @classmethod
    def from_tree(cls, tree: Mapping, path: str = "major_road") -> "MajorRoadConfig":
        _reject_unknown(tree, cls.KEYS, path)
        has_gen, has_mean = "generator_per_s" in tree, "mean_phase_sojourn_s" in tree
        if has_gen == has_mean:
            raise ConfigError(path, "give exactly one of generator_per_s, mean_phase_sojourn_s")
        has_rates, has_ratio = "arrival_rates_vph" in tree, "flow_ratio" in tree
        if has_rates == has_ratio:
            raise ConfigError(path, "give exactly one of arrival_rates_vph, flow_ratio")

        generator = sojourns = None
        if has_gen:
            rows = tree["generator_per_s"]
            if not isinstance(rows, list) or not rows:
                raise ConfigError(f"{path}.generator_per_s", "expected a square matrix")
            generator = tuple(_numbers(r, f"{path}.generator_per_s[{i}]") for i, r in enumerate(rows))
            if any(len(r) != len(generator) for r in generator):
                raise ConfigError(f"{path}.generator_per_s", "matrix must be square")
            n = len(generator)
        else:
            sojourns = _numbers(tree["mean_phase_sojourn_s"], f"{path}.mean_phase_sojourn_s", 0.0, strict=True)
            if len(sojourns) != 2:
                raise ConfigError(f"{path}.mean_phase_sojourn_s", "shorthand describes exactly two phases")
            n = 2
        key = "arrival_rates_vph" if has_rates else "flow_ratio"
        rates = _numbers(tree[key], f"{path}.{key}", 0.0)
        if len(rates) != n:
            raise ConfigError(f"{path}.{key}", f"expected {n} entries, got {len(rates)}")
        if has_ratio and not any(r > 0 for r in rates):
            raise ConfigError(f"{path}.flow_ratio", "at least one phase must carry traffic")
        cfg = cls(generator, sojourns, rates if has_rates else None, rates if has_ratio else None)
        try:
            cfg.process(1.0 if has_ratio else None)
        except GapQueueError as exc:
            raise ConfigError(path, str(exc)) from exc
        return cfg

    def to_tree(self) -> Dict[str, Any]:
        return {k: _listify(getattr(self, k)) for k in self.KEYS if getattr(self, k) is not None}

    @property
    def needs_flow(self) -> bool:
        return self.flow_ratio is not None

    def generator(self) -> np.ndarray:
        if self.generator_per_s is not None:
            return np.array(self.generator_per_s, dtype=float)
        mu1, mu2 = (1.0 / m for m in self.mean_phase_sojourn_s)
        return np.array([[-mu1, mu1], [mu2, -mu2]])

    def process(self, qbar_vph: Optional[float] = None):
        """PhaseProcess in per-second units, scaled to mean flow ``qbar_vph`` when given."""
        from ..core.phase_process import PhaseProcess

        if self.flow_ratio is not None:
            if qbar_vph is None:
                raise ConfigError("major_road.flow_ratio", "relative rates need a mean flow qbar_vph")
            return PhaseProcess.from_flow_ratio(self.generator(), self.flow_ratio, qbar_vph)
        road = PhaseProcess(self.generator(), np.array(self.arrival_rates_vph) / SECONDS_PER_HOUR)
        return road if qbar_vph is None else road.with_mean_flow(qbar_vph)


@dataclass(frozen=True)
class BehaviorConfig:
    kind: str
    critical_gap_s: Optional[float] = None
    critical_gaps: Optional[Tuple[Tuple[float, float], ...]] = None

    @classmethod
    def from_tree(cls, tree: Mapping, path: str) -> "BehaviorConfig":
        _reject_unknown(tree, ("kind", "critical_gap_s", "critical_gaps"), path)
        kind = _require(tree, "kind", path)
        if kind not in ("B1", "B2", "B3"):
            raise ConfigError(f"{path}.kind", f"must be B1, B2 or B3, got {kind!r}")
        if ("critical_gap_s" in tree) == ("critical_gaps" in tree):
            raise ConfigError(path, "give exactly one of critical_gap_s, critical_gaps")
        if "critical_gap_s" in tree:
            return cls(kind, _number(tree["critical_gap_s"], f"{path}.critical_gap_s", 0.0, strict=True))
        if kind == "B1":
            raise ConfigError(f"{path}.critical_gaps", "B1 takes a single critical_gap_s")
        entries = tree["critical_gaps"]
        if not isinstance(entries, list) or not entries:
            raise ConfigError(f"{path}.critical_gaps", "expected a non-empty list")
        gaps = []
        for i, entry in enumerate(entries):
            here = f"{path}.critical_gaps[{i}]"
            _reject_unknown(entry, ("gap_s", "prob"), here)
            gaps.append((_number(_require(entry, "gap_s", here), f"{here}.gap_s", 0.0, strict=True),
                         _number(_require(entry, "prob", here), f"{here}.prob", 0.0, strict=True)))
        _pmf_sum(gaps, f"{path}.critical_gaps")
        return cls(kind, None, tuple(gaps))

    def to_tree(self) -> Dict[str, Any]:
        tree: Dict[str, Any] = {"kind": self.kind}
        if self.critical_gap_s is not None:
            tree["critical_gap_s"] = self.critical_gap_s
        else:
            tree["critical_gaps"] = [{"gap_s": t, "prob": p} for t, p in self.critical_gaps]
        return tree

    def model(self):
        from ..core.gap_service import BehaviorKind, BehaviorModel

        gaps = ((self.critical_gap_s, 1.0),) if self.critical_gap_s is not None else self.critical_gaps
        return BehaviorModel(BehaviorKind(self.kind), gaps)


@dataclass(frozen=True)
class BatchConfig:
    lambda_bph: float
    pmf: Tuple[Tuple[int, float], ...]

    @classmethod
    def from_tree(cls, tree: Mapping, path: str) -> "BatchConfig":
        _reject_unknown(tree, ("lambda_bph", "pmf"), path)
        lam = _number(_require(tree, "lambda_bph", path), f"{path}.lambda_bph", 0.0, strict=True)
        raw = _require(tree, "pmf", path)
        if not isinstance(raw, Mapping) or not raw:
            raise ConfigError(f"{path}.pmf", "expected an object mapping batch size to probability")
        pmf = []
        for k, p in raw.items():
            here = f"{path}.pmf.{k}"
            try:
                size = int(k)
            except (TypeError, ValueError):
                raise ConfigError(here, "batch size must be an integer") from None
            if size < 1 or str(size) != str(k).strip():
                raise ConfigError(here, "batch size must be an integer >= 1")
            pmf.append((size, _number(p, here, 0.0, strict=True)))
        _pmf_sum(pmf, f"{path}.pmf")
        return cls(lam, tuple(sorted(pmf)))

    def to_tree(self) -> Dict[str, Any]:
        return {"lambda_bph": self.lambda_bph, "pmf": {str(k): p for k, p in self.pmf}}

    @property
    def lam_per_s(self) -> float:
        return self.lambda_bph / SECONDS_PER_HOUR

    def distribution(self):
        from ..core.queue_core import BatchDistribution

        return BatchDistribution(self.pmf)


# ------------------------------------------------------------------ experiments


@dataclass(frozen=True)
class ExperimentPlan:
    """Per-kind experiment settings. Empty name tuples select every entry."""

    qbar_vph: Tuple[float, ...] = ()
    behaviors: Tuple[str, ...] = ()
    batches: Tuple[str, ...] = ()
    axis: str = "qbar_vph"
    grid: Tuple[float, ...] = ()
    platooning: bool = True
    warmup_s: Optional[float] = None
    measurement_s: float = 4 * SECONDS_PER_HOUR
    replications: int = 20
    seed: int = 0
    eta: Optional[float] = None
    delta: Optional[float] = None


PLAN_KEYS: Dict[str, Tuple[str, ...]] = {
    "analyze": ("qbar_vph", "behaviors", "batches"),
    "table1": ("qbar_vph", "behaviors", "batches"),
    "sweep": ("axis", "grid", "qbar_vph", "behaviors", "batches", "platooning"),
    "simulate": ("qbar_vph", "behaviors", "batches", "warmup_s", "measurement_s", "replications", "seed"),
    "approx": ("qbar_vph", "behaviors", "batches", "grid", "eta", "delta"),
}


def _plan_from_tree(kind: str, tree: Mapping, behaviors, batches) -> ExperimentPlan:
    path = f"experiments.{kind}"
    _reject_unknown(tree, PLAN_KEYS[kind], path)
    values: Dict[str, Any] = {}
    if "qbar_vph" in tree:
        raw = tree["qbar_vph"]
        raw = raw if isinstance(raw, list) else [raw]
        values["qbar_vph"] = _numbers(raw, f"{path}.qbar_vph", 0.0)
    if "behaviors" in tree:
        values["behaviors"] = _names(tree["behaviors"], f"{path}.behaviors", behaviors)
    if "batches" in tree:
        values["batches"] = _names(tree["batches"], f"{path}.batches", batches)
    if "axis" in tree:
        if tree["axis"] not in SWEEP_AXES:
            raise ConfigError(f"{path}.axis", f"must be one of {', '.join(SWEEP_AXES)}")
        values["axis"] = tree["axis"]
    if "grid" in tree:
        values["grid"] = _increasing(_numbers(tree["grid"], f"{path}.grid", 0.0), f"{path}.grid")
    if "platooning" in tree:
        if not isinstance(tree["platooning"], bool):
            raise ConfigError(f"{path}.platooning", "expected true or false")
        values["platooning"] = tree["platooning"]
    if "warmup_s" in tree:
        values["warmup_s"] = _number(tree["warmup_s"], f"{path}.warmup_s", 0.0)
    if "measurement_s" in tree:
        values["measurement_s"] = _number(tree["measurement_s"], f"{path}.measurement_s", 0.0, strict=True)
    for key, low in (("replications", 1), ("seed", 0)):
        if key in tree:
            v = tree[key]
            if isinstance(v, bool) or not isinstance(v, int) or v < low or v >= 2 ** 64:
                raise ConfigError(f"{path}.{key}", f"expected an integer in [{low}, 2**64)")
            values[key] = v
    for key in ("eta", "delta"):
        if key in tree:
            values[key] = _number(tree[key], f"{path}.{key}", 0.0, strict=(key == "eta"))
    plan = ExperimentPlan(**values)
    if kind == "sweep" and not plan.grid:
        raise ConfigError(f"{path}.grid", "sweep needs a grid")
    if kind == "approx" and not plan.grid:
        raise ConfigError(f"{path}.grid", "approx needs a lambda_bph grid")
    if kind == "sweep" and plan.axis == "lambda_bph" and len(plan.qbar_vph) != 1:
        raise ConfigError(f"{path}.qbar_vph", "a lambda sweep needs exactly one qbar_vph")
    return plan


def _plan_to_tree(kind: str, plan: ExperimentPlan) -> Dict[str, Any]:
    default = ExperimentPlan()
    tree = {}
    for f in fields(ExperimentPlan):
        if f.name not in PLAN_KEYS[kind]:
            continue
        value = getattr(plan, f.name)
        if value != getattr(default, f.name):
            tree[f.name] = _listify(value)
    return tree


def _listify(value):
    if isinstance(value, tuple):
        return [_listify(v) for v in value]
    return value


@dataclass(frozen=True)
class ExperimentSpec:
    """A fully validated experiment configuration."""

    case: str
    kind: str
    major_road: MajorRoadConfig
    behaviors: Tuple[Tuple[str, BehaviorConfig], ...]
    batches: Tuple[Tuple[str, BatchConfig], ...]
    experiments: Tuple[Tuple[str, ExperimentPlan], ...] = ()

    @property
    def behavior_names(self) -> List[str]:
        return [name for name, _ in self.behaviors]

    @property
    def batch_names(self) -> List[str]:
        return [name for name, _ in self.batches]

    def behavior(self, name: str) -> BehaviorConfig:
        return dict(self.behaviors)[name]

    def batch(self, name: str) -> BatchConfig:
        return dict(self.batches)[name]

    def plan(self, kind: Optional[str] = None) -> ExperimentPlan:
        return dict(self.experiments).get(kind or self.kind, ExperimentPlan())

    def with_plan(self, kind: str, **changes) -> "ExperimentSpec":
        plans = dict(self.experiments)
        plans[kind] = replace(plans.get(kind, ExperimentPlan()), **changes)
        return replace(self, experiments=tuple((k, plans[k]) for k in EXPERIMENT_KINDS if k in plans))


def spec_from_tree(tree: Mapping, kind: Optional[str] = None) -> ExperimentSpec:
    """Validate a parsed JSON tree."""
    _reject_unknown(tree, ("case", "kind", "major_road", "behaviors", "batches", "experiments"), "")
    case = _require(tree, "case", "")
    if not isinstance(case, str) or not case:
        raise ConfigError("case", "expected a non-empty string")
    chosen = kind or tree.get("kind", "analyze")
    if chosen not in EXPERIMENT_KINDS:
        raise ConfigError("kind", f"must be one of {', '.join(EXPERIMENT_KINDS)}, got {chosen!r}")
    road = MajorRoadConfig.from_tree(_require(tree, "major_road", ""))

    raw_behaviors = _require(tree, "behaviors", "")
    raw_batches = _require(tree, "batches", "")
    for key, raw in (("behaviors", raw_behaviors), ("batches", raw_batches)):
        if not isinstance(raw, Mapping) or not raw:
            raise ConfigError(key, "expected a non-empty object of named entries")
    behaviors = tuple((name, BehaviorConfig.from_tree(b, f"behaviors.{name}")) for name, b in raw_behaviors.items())
    batches = tuple((name, BatchConfig.from_tree(b, f"batches.{name}")) for name, b in raw_batches.items())

    raw_plans = tree.get("experiments", {})
    _reject_unknown(raw_plans, EXPERIMENT_KINDS, "experiments")
    names_b, names_x = [n for n, _ in behaviors], [n for n, _ in batches]
    plans = tuple((k, _plan_from_tree(k, raw_plans[k], names_b, names_x)) for k in EXPERIMENT_KINDS if k in raw_plans)
    return ExperimentSpec(case=case, kind=chosen, major_road=road, behaviors=behaviors,
                          batches=batches, experiments=plans)


def parse_config(path: Union[str, Path], kind: Optional[str] = None) -> ExperimentSpec:
    """Read and validate a config file.

    Args:
        path: JSON config file
        kind: experiment kind overriding the file's ``kind``

    Raises:
        ConfigError: naming the offending key and the violated constraint
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(str(path), "config file not found")
    try:
        with open(path, "r") as f:
            tree = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"malformed JSON ({exc})") from exc
    spec = spec_from_tree(tree, kind)
    if spec.kind == "analyze":
        check_analytic_stability(spec)
    logger.debug("parsed %s (%s, %d behaviors, %d batch distributions)",
                 path, spec.kind, len(spec.behaviors), len(spec.batches))
    return spec


def check_analytic_stability(spec: ExperimentSpec):
    """Reject analyze plans containing an operating point with rho >= 1."""
    from ..core.gap_service import ServiceTransform
    from ..core.queue_core import load

    plan = spec.plan("analyze")
    qbars = plan.qbar_vph or ((None,) if not spec.major_road.needs_flow else ())
    if not qbars:
        raise ConfigError("experiments.analyze.qbar_vph", "relative flow_ratio needs a qbar_vph")
    for name in plan.behaviors or spec.behavior_names:
        model = spec.behavior(name).model()
        for bname in plan.batches or spec.batch_names:
            batch = spec.batch(bname)
            for qbar in qbars:
                road = spec.major_road.process(qbar)
                rho = load(ServiceTransform(road, model), batch.lam_per_s, batch.distribution())
                if rho >= 1.0:
                    raise ConfigError("experiments.analyze",
                                      f"rho = {rho:.4f} >= 1 for behavior {name}, batches {bname}, qbar {qbar}")


def emit_config(spec: ExperimentSpec) -> Dict[str, Any]:
    """JSON tree that parses back to ``spec``."""
    tree: Dict[str, Any] = {
        "case": spec.case,
        "kind": spec.kind,
        "major_road": spec.major_road.to_tree(),
        "behaviors": {name: b.to_tree() for name, b in spec.behaviors},
        "batches": {name: b.to_tree() for name, b in spec.batches},
    }
    if spec.experiments:
        tree["experiments"] = {k: _plan_to_tree(k, plan) for k, plan in spec.experiments}
    return tree


def write_config(spec: ExperimentSpec, path: Union[str, Path]):
    with open(path, "w") as f:
        json.dump(emit_config(spec), f, indent=2)
