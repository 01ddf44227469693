#!/usr/bin/env python3
"""
Experiment orchestration and command-line handlers.

Each experiment kind turns a validated ExperimentSpec into rows of the
result CSV:

    case,behavior,batch_dist,qbar_vph,lambda_bph,rho,EW_s,VarW_s2,ES_s,VarS_s2,source

with ``source`` one of analytic, simulated, approx.
"""

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import pandas as pd
from joblib import Parallel, delayed

from ..utils.config import ExperimentSpec, parse_config
from ..utils.errors import ConfigError, GapQueueError, UnstableQueueError
from ..utils.policy import NumericPolicy
from . import approx as approx_mod
from .delay import analyze_delay
from .gap_service import ServiceTransform, service_moments
from .phase_process import SECONDS_PER_HOUR, PhaseProcess
from .queue_core import stability_limit
from .simulator import SimConfig, run as run_simulation

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["case", "behavior", "batch_dist", "qbar_vph", "lambda_bph", "rho",
               "EW_s", "VarW_s2", "ES_s", "VarS_s2", "source"]
TABLE1_FLOWS = (70.0, 420.0)
NAN_METRICS = {"EW_s": math.nan, "VarW_s2": math.nan, "ES_s": math.nan, "VarS_s2": math.nan}


def _analytic_row(case: str, behavior_name: str, batch_name: str, qbar: float, lambda_bph: float,
                  road: PhaseProcess, spec: ExperimentSpec, policy: NumericPolicy,
                  tolerate_unstable: bool) -> Dict:
    """Solve one operating point; unstable points become NaN rows when tolerated."""
    row = {"case": case, "behavior": behavior_name, "batch_dist": batch_name,
           "qbar_vph": qbar, "lambda_bph": lambda_bph, "source": "analytic"}
    model = spec.behavior(behavior_name).model()
    batch = spec.batch(batch_name).distribution()
    lam = lambda_bph / SECONDS_PER_HOUR
    try:
        result = analyze_delay(road, model, lam, batch, policy)
    except UnstableQueueError as exc:
        if not tolerate_unstable:
            raise
        logger.warning("%s/%s/%s at qbar=%.1f: %s", case, behavior_name, batch_name, qbar, exc)
        row.update(rho=exc.rho, **NAN_METRICS)
        return row
    row.update(rho=result.rho, **result.moments.as_dict())
    return row


class GapAcceptanceToolkit:
    """Runs the configured experiments and writes their CSV artifacts."""

    def __init__(self, spec: ExperimentSpec, out_dir: Path, policy: NumericPolicy = NumericPolicy(),
                 n_jobs: int = 1):
        self.spec = spec
        self.out_dir = Path(out_dir)
        self.policy = policy
        self.n_jobs = n_jobs

    # ------------------------------------------------------------------ helpers

    def _selection(self, kind: str) -> Tuple[List[str], List[str], Tuple[float, ...]]:
        plan = self.spec.plan(kind)
        behaviors = list(plan.behaviors or self.spec.behavior_names)
        batches = list(plan.batches or self.spec.batch_names)
        return behaviors, batches, plan.qbar_vph

    def _road(self, qbar: Optional[float]) -> PhaseProcess:
        return self.spec.major_road.process(qbar)

    def _flows(self, qbars: Sequence[float]) -> Sequence[Optional[float]]:
        if qbars:
            return qbars
        if self.spec.major_road.needs_flow:
            raise ConfigError(f"experiments.{self.spec.kind}.qbar_vph", "relative flow_ratio needs a qbar_vph")
        return (None,)

    def _points(self, kind: str, qbars: Sequence[Optional[float]]) -> Iterator[Tuple[str, str, Optional[float]]]:
        behaviors, batches, _ = self._selection(kind)
        for bname in batches:
            for name in behaviors:
                for qbar in qbars:
                    yield name, bname, qbar

    def _solve_all(self, jobs: List[Tuple], tolerate_unstable: bool) -> List[Dict]:
        return Parallel(n_jobs=self.n_jobs)(
            delayed(_analytic_row)(case, name, bname, qbar, lam_bph, road, self.spec, self.policy, tolerate_unstable)
            for case, name, bname, qbar, lam_bph, road in jobs
        )

    def _flow_of(self, road: PhaseProcess) -> float:
        return float(road.stationary @ road.rates) * SECONDS_PER_HOUR

    def _write(self, frame: pd.DataFrame, suffix: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / f"{self.spec.case}_{suffix}.csv"
        frame.to_csv(path, index=False, float_format="%.10g")
        print(f"💾 Saved {path}")
        return path

    @staticmethod
    def _frame(rows: List[Dict]) -> pd.DataFrame:
        return pd.DataFrame(rows, columns=CSV_COLUMNS)

    # -------------------------------------------------------------- experiments

    def analyze(self) -> pd.DataFrame:
        """Exact delay moments for every configured operating point."""
        print(f"\n📊 Analyzing {self.spec.case}")
        print("=" * 60)
        jobs = []
        for name, bname, qbar in self._points("analyze", self._flows(self._selection("analyze")[2])):
            road = self._road(qbar)
            jobs.append((self.spec.case, name, bname, self._flow_of(road),
                         self.spec.batch(bname).lambda_bph, road))
        frame = self._frame(self._solve_all(jobs, tolerate_unstable=False))
        for row in frame.itertuples():
            print(f"✅ {row.behavior:>4} {row.batch_dist:<10} qbar={row.qbar_vph:7.1f}  rho={row.rho:.4f}  "
                  f"E[W]={row.EW_s:9.3f} s  Var(W)={row.VarW_s2:11.3f}  E[S]={row.ES_s:9.3f} s")
        self._write(frame, "analyze")

        # per-position detail for the first point
        name, bname, qbar = next(self._points("analyze", self._flows(self._selection("analyze")[2])))
        batch = self.spec.batch(bname)
        detail = analyze_delay(self._road(qbar), self.spec.behavior(name).model(), batch.lam_per_s,
                               batch.distribution(), self.policy)
        self._write(detail.position_table(), "positions")
        return frame

    def table1(self) -> pd.DataFrame:
        """(E[W], Var(W)) grid over batch distributions, behaviors and two flows."""
        _, _, qbars = self._selection("table1")
        qbars = qbars or TABLE1_FLOWS
        print(f"\n📊 Waiting-time table for {self.spec.case}")
        print("=" * 60)
        jobs = [(self.spec.case, name, bname, qbar, self.spec.batch(bname).lambda_bph, self._road(qbar))
                for name, bname, qbar in self._points("table1", qbars)]
        frame = self._frame(self._solve_all(jobs, tolerate_unstable=True))
        for bname, part in frame.groupby("batch_dist", sort=False):
            print(f"\n{bname}")
            print(f"{'':6}" + "".join(f"{'qbar=' + format(q, 'g'):>26}" for q in qbars))
            for name, rows in part.groupby("behavior", sort=False):
                cells = "".join(f"{r.EW_s:>11.2f} ({r.VarW_s2:>11.2f})" for r in rows.itertuples())
                print(f"{name:6}{cells}")
        self._write(frame, "table1")
        return frame

    def sweep(self) -> pd.DataFrame:
        """Delay curves along a qbar or lambda grid, with the Poisson-road counterpart."""
        plan = self.spec.plan("sweep")
        print(f"\n📊 Sweeping {plan.axis} for {self.spec.case}")
        print("=" * 60)
        jobs = []
        behaviors, batches, _ = self._selection("sweep")
        for bname in batches:
            for name in behaviors:
                for x in plan.grid:
                    if plan.axis == "qbar_vph":
                        qbar, lam_bph = x, self.spec.batch(bname).lambda_bph
                    else:
                        qbar, lam_bph = plan.qbar_vph[0], x
                    road = self._road(qbar)
                    jobs.append((self.spec.case, name, bname, self._flow_of(road), lam_bph, road))
                    if plan.platooning and road.n_phases > 1:
                        jobs.append((f"{self.spec.case}-poisson", name, bname, self._flow_of(road), lam_bph,
                                     road.poisson_equivalent()))
        frame = self._frame(self._solve_all(jobs, tolerate_unstable=True))
        unstable = frame["EW_s"].isna().sum()
        print(f"✅ {len(frame) - unstable} stable points" + (f", ⚠️  {unstable} unstable" if unstable else ""))
        self._write(frame, "sweep")
        if plan.axis == "qbar_vph":
            self._write(self._stability_limits(behaviors, batches, plan.platooning), "stability")
        return frame

    def _stability_limits(self, behaviors: List[str], batches: List[str], platooning: bool) -> pd.DataFrame:
        rows = []
        base = self._road(1.0 if self.spec.major_road.needs_flow else None)
        roads = [(self.spec.case, base)]
        if platooning and base.n_phases > 1:
            roads.append((f"{self.spec.case}-poisson", base.poisson_equivalent()))
        for case, road in roads:
            for bname in batches:
                batch = self.spec.batch(bname)
                for name in behaviors:
                    limit = stability_limit(road, self.spec.behavior(name).model(), batch.lam_per_s,
                                            batch.distribution(), policy=self.policy)
                    print(f"📈 {case} {name} {bname}: unstable beyond qbar = {limit:.1f} veh/h")
                    rows.append({"case": case, "behavior": name, "batch_dist": bname, "qbar_limit_vph": limit})
        return pd.DataFrame(rows)

    def simulate(self) -> pd.DataFrame:
        """Simulation estimates next to the analytic values for each configured point."""
        plan = self.spec.plan("simulate")
        print(f"\n🚗 Simulating {self.spec.case} ({plan.replications} replications, seed {plan.seed})")
        print("=" * 60)
        rows, reps = [], []
        for name, bname, qbar in self._points("simulate", self._flows(plan.qbar_vph)):
            road = self._road(qbar)
            batch = self.spec.batch(bname)
            flow = self._flow_of(road)
            analytic = _analytic_row(self.spec.case, name, bname, flow, batch.lambda_bph, road, self.spec,
                                     self.policy, tolerate_unstable=True)
            cfg = SimConfig(process=road, behavior=self.spec.behavior(name).model(), lam=batch.lam_per_s,
                            batch=batch.distribution(), measurement_s=plan.measurement_s, warmup_s=plan.warmup_s,
                            replications=plan.replications, seed=plan.seed)
            try:
                stats = run_simulation(cfg, n_jobs=self.n_jobs)
            except UnstableQueueError as exc:
                logger.warning("skipping simulation of %s/%s at qbar=%.1f: %s", name, bname, flow, exc)
                rows.append(analytic)
                continue
            simulated = dict(analytic, source="simulated",
                             **{k: stats.estimates[k] for k in ("EW_s", "VarW_s2", "ES_s", "VarS_s2")})
            rows.extend([analytic, simulated])
            se = stats.std_errors["EW_s"]
            off = abs(analytic["EW_s"] - stats.estimates["EW_s"]) / se if se > 0 else math.nan
            mark = "✅" if off <= 3 else "⚠️ "
            print(f"{mark} {name:>4} {bname:<10} qbar={flow:7.1f}  E[W] exact={analytic['EW_s']:9.3f}  "
                  f"sim={stats.estimates['EW_s']:9.3f} ± {se:.3f}  ({off:.2f} SE)")
            per = stats.per_replication.copy()
            per.insert(0, "qbar_vph", flow)
            per.insert(0, "batch_dist", bname)
            per.insert(0, "behavior", name)
            reps.append(per)
        frame = self._frame(rows)
        self._write(frame, "simulate")
        if reps:
            self._write(pd.concat(reps, ignore_index=True), "replications")
        return frame

    def approx(self) -> pd.DataFrame:
        """Exact against interpolated mean sojourn (and waiting) times along a lambda grid."""
        plan = self.spec.plan("approx")
        print(f"\n📊 Light/heavy-traffic approximation for {self.spec.case}")
        print("=" * 60)
        rows = []
        for name, bname, qbar in self._points("approx", self._flows(plan.qbar_vph)):
            road = self._road(qbar)
            model = self.spec.behavior(name).model()
            batch = self.spec.batch(bname).distribution()
            flow = self._flow_of(road)
            eta = plan.eta
            if eta is None:
                logger.warning("eta not configured for %s/%s; estimating it from the exact chain", name, bname)
                eta = approx_mod.estimate_eta(approx_mod.exact_mean_queue(road, model, batch, self.policy))
            delta = plan.delta if plan.delta is not None else approx_mod.lt_limit_delta(batch)
            mean_service = service_moments(ServiceTransform(road, model, None, self.policy)).mean
            print(f"ℹ️  {name} {bname}: delta={delta:.4g} eta={eta:.4g} rho/lambda={batch.mean * mean_service:.4g} s")
            for lam_bph in plan.grid:
                exact = _analytic_row(self.spec.case, name, bname, flow, lam_bph, road, self.spec, self.policy,
                                      tolerate_unstable=True)
                rows.append(exact)
                lam = lam_bph / SECONDS_PER_HOUR
                rho = lam * batch.mean * mean_service
                if rho >= 1.0:
                    continue
                params = approx_mod.ApproxParams(delta=delta, eta=eta, rho=rho)
                st = ServiceTransform(road, model, lam, self.policy)
                es = approx_mod.sojourn_approx(params, lam, batch)
                ew = approx_mod.wait_approx(params, lam, batch, st)
                rows.append(dict(exact, source="approx", rho=rho, EW_s=ew, VarW_s2=math.nan, ES_s=es,
                                 VarS_s2=math.nan))
                err = (es - exact["ES_s"]) / exact["ES_s"] if exact["ES_s"] else math.nan
                print(f"   lambda={lam_bph:7.2f}/h rho={rho:.3f}  E[S] exact={exact['ES_s']:9.3f}  "
                      f"approx={es:9.3f}  ({100 * err:+.2f}%)")
        frame = self._frame(rows)
        self._write(frame, "approx")
        return frame

    def run(self, kind: Optional[str] = None) -> pd.DataFrame:
        kind = kind or self.spec.kind
        return getattr(self, kind)()


def run_experiment(spec: ExperimentSpec, out_dir: Path = Path("results"), policy: NumericPolicy = NumericPolicy(),
                   n_jobs: int = 1) -> int:
    """Run ``spec.kind`` and return the process exit code."""
    try:
        GapAcceptanceToolkit(spec, out_dir, policy, n_jobs).run()
    except GapQueueError as exc:
        print(f"❌ {exc.category}: {exc}")
        print(f"error_category={exc.category}", file=sys.stderr)
        return exc.exit_code
    return 0


# ---------------------------------------------------------------------- CLI


def _configure_logging(debug: bool):
    logging.basicConfig(
        level=logging.DEBUG if debug else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _policy(args) -> NumericPolicy:
    if args.jet_order is None:
        return NumericPolicy()
    if args.jet_order < 3:
        raise ConfigError("--jet-order", f"must be >= 3 for variances, got {args.jet_order}")
    return NumericPolicy(jet_order=args.jet_order)


def _load(args, kind: str) -> ExperimentSpec:
    spec = parse_config(args.config, kind)
    changes = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed", "expected an unsigned 64-bit integer")
        changes["seed"] = args.seed
    if args.replications is not None:
        if args.replications < 1:
            raise ConfigError("--replications", "expected a positive integer")
        changes["replications"] = args.replications
    if changes:
        spec = spec.with_plan("simulate", **changes)
    return spec


def _command(kind: str):
    def handler(args) -> int:
        try:
            spec = _load(args, kind)
            policy = _policy(args)
        except GapQueueError as exc:
            print(f"❌ {exc.category}: {exc}")
            print(f"error_category={exc.category}", file=sys.stderr)
            return exc.exit_code
        return run_experiment(spec, Path(args.out), policy, args.jobs)

    handler.__name__ = f"cmd_{kind}"
    return handler


cmd_analyze = _command("analyze")
cmd_table1 = _command("table1")
cmd_sweep = _command("sweep")
cmd_simulate = _command("simulate")
cmd_approx = _command("approx")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", required=True, help="Experiment config (JSON)")
    p.add_argument("--out", default="results", help="Output directory for CSV files (default results/)")
    p.add_argument("--seed", type=int, help="Override the simulation seed")
    p.add_argument("--replications", type=int, help="Override the number of simulation replications")
    p.add_argument("--jet-order", type=int, dest="jet_order", help="Taylor order of transform jets (>= 3)")
    p.add_argument("--jobs", type=int, default=1, help="Parallel workers for sweep points and replications")
    p.add_argument("--debug", action="store_true", help="Verbose numerical diagnostics")


def build_arg_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        description="🚦 Gap-acceptance queue toolkit - delays at priority intersections with platooned major-road traffic"
    )
    p.add_argument("--test", action="store_true", help="Run the production smoke tests")
    p.add_argument("--version", action="store_true", help="Show version information")
    sub = p.add_subparsers(dest="cmd", required=False)

    for kind, handler, text in (
        ("analyze", cmd_analyze, "📊 Exact delay moments for the configured operating points"),
        ("table1", cmd_table1, "📋 Mean/variance waiting-time table (batch distributions x behaviors x flows)"),
        ("sweep", cmd_sweep, "📈 Delay curves over a major-road flow or batch-rate grid"),
        ("simulate", cmd_simulate, "🚗 Simulation cross-check of the analytic results"),
        ("approx", cmd_approx, "🧮 Light/heavy-traffic approximation against exact sojourn times"),
    ):
        sp = sub.add_parser(kind, help=text)
        _common(sp)
        sp.set_defaults(func=handler)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_arg_parser()
    args = parser.parse_args(argv)

    if args.version:
        from .. import __version__
        print(f"Gap-acceptance queue toolkit v{__version__}")
        return 0

    if args.test:
        print("🧪 Running production tests...")
        from tests.production_test import run_comprehensive_tests
        return 0 if run_comprehensive_tests() else 1

    if not getattr(args, "func", None):
        parser.print_help()
        return 0

    _configure_logging(args.debug)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        print("\n\n👋 Interrupted")
        return 130
    except Exception as exc:
        print(f"\n❌ An error occurred: {exc}")
        logger.debug("unexpected failure", exc_info=True)
        return 1
