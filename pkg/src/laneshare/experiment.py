"""
Experiment orchestration for laneshare.

This module turns an ExperimentSpec into simulation runs and output files:
- Scenario loading and parameter overrides (lambda, windows, horizon,
  CAV penetration)
- Single runs, writing the event trace, metric CSVs, the effective
  scenario document and the run configuration
- Comparison matrices (policy x seed x penetration), fanned out over
  worker processes and merged into a ComparisonTable

Every output is derived from the traces of the constituent runs, so a
comparison can be rebuilt from its run directories.
"""

from concurrent.futures import Future, ProcessPoolExecutor
from dataclasses import dataclass, field
import json
import logging
import os
from typing import Dict, List, Optional, Sequence

import pandas as pd

from . import __version__
from .config.loader import build_scenario, load_scenario
from .config.models import ExperimentSpec, LoggingConfig, ScenarioDocument
from .core.errors import LaneshareError
from .core.logging import setup_logging
from .core.network import VehicleClass
from .routing import Policy, create_policy
from .sim.audit import audit_trace
from .sim.engine import Simulation
from .sim.metrics import MetricsReport, accumulate_metrics

OUTPUT_ROOT_ENV = "LANESHARE_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "runs"

logger = logging.getLogger("laneshare.experiment")


def default_output_root() -> str:
    return os.environ.get(OUTPUT_ROOT_ENV, DEFAULT_OUTPUT_ROOT)


def apply_overrides(
    doc: ScenarioDocument, spec: ExperimentSpec, penetration: Optional[float] = None
) -> ScenarioDocument:
    """Copy of `doc` with the experiment's overrides applied.

    A penetration p splits the total demand (the experiment's
    `total_demand` in veh/h, else the scenario's CAV + HV rate) into
    p for CAVs and 1 - p for HVs. A stream without OD pairs borrows the
    other stream's pairs.
    """
    params: Dict[str, object] = {}
    if spec.lambda_ is not None:
        params["lambda_"] = spec.lambda_
    if spec.delta_t_dl is not None:
        params["delta_t_dl"] = spec.delta_t_dl
    if spec.delta_t_gpl is not None:
        params["delta_t_gpl"] = spec.delta_t_gpl
    if spec.horizon is not None:
        params["horizon"] = spec.horizon

    doc = doc.model_copy(deep=True)
    doc.params = doc.params.model_copy(update=params)
    if penetration is None:
        return doc

    cav, hv = doc.demand.cav, doc.demand.hv
    if spec.total_demand is not None:
        total = spec.total_demand / 60.0
    else:
        total = cav.rate_per_min + hv.rate_per_min
    cav.rate_per_min = penetration * total
    hv.rate_per_min = (1.0 - penetration) * total
    if not cav.od_pairs:
        cav.od_pairs = list(hv.od_pairs)
    if not hv.od_pairs:
        hv.od_pairs = list(cav.od_pairs)
    return doc


@dataclass(frozen=True)
class RunKey:
    """One cell of an experiment matrix."""

    policy: str
    seed: int
    penetration: Optional[float] = None

    @property
    def label(self) -> str:
        text = f"{self.policy} seed {self.seed}"
        if self.penetration is not None:
            text += f" at {self.penetration:.0%} CAVs"
        return text

    def directory(self, root: str) -> str:
        parts = [root]
        if self.penetration is not None:
            parts.append(f"p{int(round(self.penetration * 100)):03d}")
        parts.extend([self.policy, f"seed-{self.seed}"])
        return os.path.join(*parts)


@dataclass
class RunResult:
    key: RunKey
    out_dir: str
    report: Optional[MetricsReport] = None
    digest: Optional[str] = None
    events: int = 0
    violations: List[str] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_single(doc: ScenarioDocument, key: RunKey, out_dir: str) -> RunResult:
    """Run one (policy, seed) cell and write its outputs to `out_dir`.

    Files written:
    - trace.jsonl: the event trace
    - series.csv, stations.csv, summary.csv: the metrics report
    - scenario.json: the effective scenario document, loadable with
      --scenario to repeat the run
    - config.json: policy, seed, penetration, resolved parameters, trace
      digest and package version
    - audit.txt: trace audit violations, only when there are any

    Raises:
        LaneshareError: If the scenario is invalid or the run aborts
    """
    scenario = build_scenario(doc)
    policy = create_policy(Policy(key.policy), scenario.network, doc.params)
    sim = Simulation(doc, scenario.network, policy, seed=key.seed)
    trace = sim.run()

    report = accumulate_metrics(trace, doc.params.on_time_tolerance, end_time=sim.t)
    audit = audit_trace(trace, scenario.network, doc.params.delta_t_dl, sim.sensors)
    digest = trace.digest()

    os.makedirs(out_dir, exist_ok=True)
    trace.write(os.path.join(out_dir, "trace.jsonl"))
    report.write_csv(out_dir)
    with open(os.path.join(out_dir, "scenario.json"), "w", encoding="utf-8") as f:
        json.dump(doc.model_dump(mode="json", by_alias=True), f, indent=2)
    config = {
        "version": __version__,
        "scenario": doc.name,
        "policy": key.policy,
        "seed": key.seed,
        "penetration": key.penetration,
        "params": doc.params.model_dump(mode="json", by_alias=True),
        "demand": {
            "cav_rate_per_min": doc.demand.cav.rate_per_min,
            "hv_rate_per_min": doc.demand.hv.rate_per_min,
        },
        "trace_digest": digest,
        "end_time": trace.last_time,
    }
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as f:
        json.dump(config, f, indent=2, sort_keys=True)

    if not audit.ok:
        with open(os.path.join(out_dir, "audit.txt"), "w", encoding="utf-8") as f:
            f.write("\n".join(audit.violations) + "\n")
        logger.warning(f"Trace audit of {key.label} found {len(audit.violations)} violations")

    return RunResult(
        key=key,
        out_dir=out_dir,
        report=report,
        digest=digest,
        events=len(trace),
        violations=audit.violations,
    )


def _run_cell(doc: ScenarioDocument, key: RunKey, out_dir: str) -> RunResult:
    try:
        return run_single(doc, key, out_dir)
    except LaneshareError as e:
        logger.error(f"Run {key.label} aborted: {e}")
        return RunResult(key=key, out_dir=out_dir, error=f"{type(e).__name__}: {e}")
    except Exception as e:
        logger.exception(f"Run {key.label} crashed")
        return RunResult(key=key, out_dir=out_dir, error=f"{type(e).__name__}: {e}")


def _collect(future: Future, key: RunKey, out_dir: str) -> RunResult:
    """Result of a pooled cell, or a failure when its worker process died."""
    try:
        return future.result()
    except Exception as e:
        logger.error(f"Worker for {key.label} failed: {e}")
        return RunResult(key=key, out_dir=out_dir, error=f"{type(e).__name__}: {e}")


class ComparisonTable:
    """Merged results of an experiment matrix.

    On-time percentages and per-class figures are seed means; the per-run
    values stay available through `runs_frame`.
    """

    def __init__(self, results: Sequence[RunResult], policies: Sequence[str]):
        order = {p: i for i, p in enumerate(policies)}
        self.results = sorted(
            results,
            key=lambda r: (
                r.key.penetration or 0.0,
                order.get(r.key.policy, len(order)),
                r.key.seed,
            ),
        )
        self.policies = list(policies)

    @property
    def completed(self) -> List[RunResult]:
        return [r for r in self.results if r.ok]

    @property
    def failures(self) -> List[RunResult]:
        return [r for r in self.results if not r.ok]

    @property
    def has_penetration(self) -> bool:
        return any(r.key.penetration is not None for r in self.results)

    def _group_columns(self) -> List[str]:
        return ["penetration", "policy"] if self.has_penetration else ["policy"]

    def runs_frame(self) -> pd.DataFrame:
        """One row per completed run."""
        rows = []
        for r in self.completed:
            report = r.report
            assert report is not None
            row: Dict[str, object] = {
                "policy": r.key.policy,
                "penetration": r.key.penetration,
                "seed": r.key.seed,
                "total_bus_delay": report.total_bus_delay,
                "overdue_bus_runs": report.overdue_runs,
                "mean_station_on_time": report.mean_station_on_time(),
            }
            for i, pct in enumerate(report.station_on_time().values(), start=1):
                row[f"station_{i}"] = pct
            for vclass in VehicleClass:
                summary = report.classes[vclass]
                row[f"{vclass.value}_cum_tt"] = summary.cum_travel_time
                row[f"{vclass.value}_p90_tt"] = summary.p90_travel_time
                row[f"{vclass.value}_mean_delay"] = summary.mean_trip_delay
            row.update(events=r.events, violations=len(r.violations), digest=r.digest)
            rows.append(row)
        return pd.DataFrame(rows)

    def on_time_frame(self) -> pd.DataFrame:
        """Seed-mean on-time percentage per station and policy.

        Columns are "Station 1".."Station n" in stop order plus "Average";
        rows follow the policy order of the experiment.
        """
        runs = self.runs_frame()
        if runs.empty:
            return pd.DataFrame()
        stations = sorted(
            (c for c in runs.columns if c.startswith("station_")),
            key=lambda c: int(c.split("_")[1]),
        )
        groups = self._group_columns()
        table = runs.groupby(groups, sort=False)[stations].mean().reset_index()
        table = table.rename(columns={c: f"Station {c.split('_')[1]}" for c in stations})
        station_cols = [f"Station {c.split('_')[1]}" for c in stations]
        table["Average"] = table[station_cols].mean(axis=1)
        table["policy"] = [Policy(p).label for p in table["policy"]]
        return table

    def class_summary_frame(self) -> pd.DataFrame:
        """Seed-mean per-class travel time figures per policy."""
        frames = []
        for r in self.completed:
            assert r.report is not None
            frame = r.report.summary_frame()
            frame.insert(0, "seed", r.key.seed)
            frame.insert(0, "policy", r.key.policy)
            frame.insert(0, "penetration", r.key.penetration)
            frames.append(frame)
        if not frames:
            return pd.DataFrame()
        merged = pd.concat(frames, ignore_index=True)
        groups = self._group_columns() + ["class"]
        return (
            merged.drop(columns=["seed"] + ([] if self.has_penetration else ["penetration"]))
            .groupby(groups, sort=False)
            .mean()
            .reset_index()
        )

    def trip_delay_frame(self) -> pd.DataFrame:
        """Mean trip delay per class (columns) and penetration level (rows),
        one block per policy."""
        summary = self.class_summary_frame()
        if summary.empty or not self.has_penetration:
            return pd.DataFrame()
        return summary.pivot_table(
            index=["policy", "penetration"], columns="class", values="mean_trip_delay"
        ).reset_index()

    def series_frames(self) -> Dict[str, pd.DataFrame]:
        """Seed-mean time series per policy (and penetration).

        Runs of different length are aligned on the longest one; the
        cumulative series hold their last value after a run ends.
        """
        grouped: Dict[str, List[pd.DataFrame]] = {}
        for r in self.completed:
            assert r.report is not None
            name = r.key.policy
            if r.key.penetration is not None:
                name = f"{name}_p{int(round(r.key.penetration * 100)):03d}"
            grouped.setdefault(name, []).append(r.report.series_frame().set_index("time"))

        series: Dict[str, pd.DataFrame] = {}
        for name, frames in grouped.items():
            end = max(int(f.index.max()) for f in frames)
            index = pd.RangeIndex(end + 1, name="time")
            aligned = [f.reindex(index).ffill() for f in frames]
            series[name] = pd.concat(aligned).groupby(level=0).mean().reset_index()
        return series

    def failures_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "policy": r.key.policy,
                    "penetration": r.key.penetration,
                    "seed": r.key.seed,
                    "error": r.error,
                }
                for r in self.failures
            ],
            columns=["policy", "penetration", "seed", "error"],
        )

    def write(self, out_dir: str) -> List[str]:
        """Write every table as CSV into `out_dir`; return the paths."""
        os.makedirs(out_dir, exist_ok=True)
        outputs = {
            "table_on_time.csv": self.on_time_frame(),
            "class_summary.csv": self.class_summary_frame(),
            "runs.csv": self.runs_frame(),
        }
        if self.has_penetration:
            outputs["trip_delay_by_penetration.csv"] = self.trip_delay_frame()
        if self.failures:
            outputs["failures.csv"] = self.failures_frame()
        for name, frame in self.series_frames().items():
            outputs[f"series_{name}.csv"] = frame

        paths = []
        for name, frame in outputs.items():
            path = os.path.join(out_dir, name)
            frame.to_csv(path, index=False)
            paths.append(path)
        return paths


class ExperimentRunner:
    """Runs the single simulations and comparisons requested by the CLI."""

    def __init__(
        self,
        spec: ExperimentSpec,
        log_config: Optional[LoggingConfig] = None,
        log_level: Optional[str] = None,
    ):
        """Load the scenario; remember how worker processes should log.

        Raises:
            ScenarioError: If the scenario cannot be loaded
        """
        self.spec = spec
        self.log_config = log_config or LoggingConfig()
        self.log_level = log_level
        self.scenario = load_scenario(spec.scenario)

    def keys(self) -> List[RunKey]:
        penetrations: Sequence[Optional[float]] = self.spec.penetrations or [None]
        return [
            RunKey(policy, seed, p)
            for p in penetrations
            for policy in self.spec.policies
            for seed in self.spec.seeds
        ]

    def document_for(self, key: RunKey) -> ScenarioDocument:
        return apply_overrides(self.scenario.document, self.spec, key.penetration)

    def simulate(self) -> RunResult:
        """Run the first cell of the matrix, the one-policy one-seed case.

        Raises:
            LaneshareError: If the run aborts
        """
        key = self.keys()[0]
        out_dir = self.spec.out
        logger.info(f"Simulating {key.label} into {out_dir}")
        return run_single(self.document_for(key), key, out_dir)

    def compare(self) -> ComparisonTable:
        """Run every cell, in parallel unless a single worker is requested.

        Aborted runs are reported in the table's failures instead of
        stopping the matrix.
        """
        keys = self.keys()
        cells = [(self.document_for(k), k, k.directory(self.spec.out)) for k in keys]
        logger.info(
            f"Comparing {len(self.spec.policies)} policies over {len(self.spec.seeds)} seeds: "
            f"{len(cells)} runs"
        )
        if self.spec.workers == 1:
            results = [_run_cell(*cell) for cell in cells]
        else:
            with ProcessPoolExecutor(
                max_workers=self.spec.workers,
                initializer=setup_logging,
                initargs=(self.log_config, self.log_level),
            ) as pool:
                futures = [pool.submit(_run_cell, *cell) for cell in cells]
                results = [
                    _collect(future, key, out_dir)
                    for future, (_, key, out_dir) in zip(futures, cells)
                ]

        table = ComparisonTable(results, self.spec.policies)
        table.write(self.spec.out)
        if table.failures:
            logger.error(f"{len(table.failures)} of {len(results)} runs failed")
        return table
