"""
Tests for experiment orchestration.

This module tests:
- Parameter and penetration overrides
- Output files of a single run and their reproducibility
- Comparison matrices, merged tables and failure reporting
"""

import json
import os
from unittest.mock import patch

import pandas as pd
import pytest

from laneshare import experiment
from laneshare.config.loader import load_scenario
from laneshare.config.models import ExperimentSpec, ScenarioDocument
from laneshare.core.errors import SimulationAbort
from laneshare.experiment import (
    OUTPUT_ROOT_ENV,
    ExperimentRunner,
    RunKey,
    apply_overrides,
    default_output_root,
    run_single,
)


@pytest.fixture
def scenario_path(small_data, tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(small_data))
    return str(path)


def make_spec(scenario_path, out, **kwargs):
    kwargs.setdefault("policies", ["srp", "coordinated"])
    kwargs.setdefault("seeds", [1, 2])
    return ExperimentSpec(scenario=scenario_path, out=str(out), workers=1, **kwargs)


class TestOverrides:
    """Test cases for applying experiment overrides to a scenario."""

    def test_parameters(self, small_doc):
        """Test that set overrides replace params and unset ones keep them."""
        spec = ExperimentSpec(
            scenario="small", policies=["srp"], out="x", lambda_=0.3, delta_t_dl=45
        )
        doc = apply_overrides(small_doc, spec)
        assert doc.params.lambda_ == 0.3
        assert doc.params.delta_t_dl == 45
        assert doc.params.delta_t_gpl == 60
        assert doc.params.horizon == 300
        assert small_doc.params.lambda_ == 0.1

    def test_penetration_splits_scenario_demand(self, small_doc):
        """Test that a penetration splits the combined CAV + HV rate."""
        spec = ExperimentSpec(scenario="small", policies=["srp"], out="x")
        doc = apply_overrides(small_doc, spec, penetration=0.25)
        assert doc.demand.cav.rate_per_min == pytest.approx(3.0)
        assert doc.demand.hv.rate_per_min == pytest.approx(9.0)
        assert small_doc.demand.cav.rate_per_min == 6

    def test_penetration_with_total_demand(self, small_doc):
        """Test that total_demand is given in vehicles per hour."""
        spec = ExperimentSpec(scenario="small", policies=["srp"], out="x", total_demand=1200)
        doc = apply_overrides(small_doc, spec, penetration=0.5)
        assert doc.demand.cav.rate_per_min == pytest.approx(10.0)
        assert doc.demand.hv.rate_per_min == pytest.approx(10.0)

    def test_stream_without_pairs_borrows_them(self, small_data):
        """Test that an empty OD list is filled from the other stream."""
        small_data["demand"]["cav"] = {"rate_per_min": 0, "od_pairs": []}
        spec = ExperimentSpec(scenario="small", policies=["srp"], out="x")
        doc = apply_overrides(ScenarioDocument(**small_data), spec, penetration=0.5)
        assert doc.demand.cav.od_pairs == [(1, 3)]
        assert doc.demand.cav.rate_per_min == pytest.approx(3.0)


class TestRunKey:
    """Test cases for run labels and directories."""

    def test_without_penetration(self):
        key = RunKey("srp", 3)
        assert key.label == "srp seed 3"
        assert key.directory("out") == os.path.join("out", "srp", "seed-3")

    def test_with_penetration(self):
        key = RunKey("coordinated", 1, 0.3)
        assert key.label == "coordinated seed 1 at 30% CAVs"
        assert key.directory("out") == os.path.join("out", "p030", "coordinated", "seed-1")

    @patch.dict(os.environ, {OUTPUT_ROOT_ENV: "/data/laneshare"})
    def test_output_root_from_environment(self):
        assert default_output_root() == "/data/laneshare"

    @patch.dict(os.environ, {}, clear=True)
    def test_default_output_root(self):
        assert default_output_root() == "runs"


class TestRunSingle:
    """Test cases for one (policy, seed) run and its outputs."""

    def test_outputs(self, small_doc, tmp_path):
        """Test that every output file is written and consistent."""
        out = tmp_path / "run"
        result = run_single(small_doc, RunKey("coordinated", 7), str(out))

        assert result.ok
        assert result.violations == []
        assert not (out / "audit.txt").exists()
        for name in ("trace.jsonl", "series.csv", "stations.csv", "summary.csv"):
            assert (out / name).exists()

        lines = (out / "trace.jsonl").read_text().splitlines()
        assert len(lines) == result.events
        assert json.loads(lines[0])["kind"] == "spawn"

        config = json.loads((out / "config.json").read_text())
        assert config["policy"] == "coordinated"
        assert config["seed"] == 7
        assert config["penetration"] is None
        assert config["trace_digest"] == result.digest
        assert config["params"]["lambda"] == 0.1

        summary = pd.read_csv(out / "summary.csv").set_index("class")
        assert summary.loc["bus", "completed"] == 3

    def test_scenario_json_repeats_the_run(self, small_doc, tmp_path):
        """Test that the written scenario reproduces the trace digest."""
        first = run_single(small_doc, RunKey("drp", 2), str(tmp_path / "a"))
        doc = load_scenario(str(tmp_path / "a" / "scenario.json")).document
        second = run_single(doc, RunKey("drp", 2), str(tmp_path / "b"))
        assert second.digest == first.digest


class TestExperimentRunner:
    """Test cases for simulate and compare."""

    def test_keys(self, scenario_path, tmp_path):
        spec = make_spec(scenario_path, tmp_path, penetrations=[0.5, 1.0])
        keys = ExperimentRunner(spec).keys()
        assert len(keys) == 8
        assert keys[0] == RunKey("srp", 1, 0.5)
        assert keys[-1] == RunKey("coordinated", 2, 1.0)

    def test_simulate(self, scenario_path, tmp_path):
        spec = make_spec(scenario_path, tmp_path / "one", policies=["drp"], seeds=[4])
        result = ExperimentRunner(spec).simulate()
        assert result.key == RunKey("drp", 4)
        assert result.out_dir == str(tmp_path / "one")
        assert (tmp_path / "one" / "trace.jsonl").exists()

    def test_compare(self, scenario_path, tmp_path):
        """Test the merged tables of a two-policy, two-seed matrix."""
        table = ExperimentRunner(make_spec(scenario_path, tmp_path)).compare()

        assert len(table.completed) == 4
        assert table.failures == []
        assert [r.key.policy for r in table.results] == ["srp", "srp", "coordinated", "coordinated"]

        on_time = table.on_time_frame()
        assert on_time["policy"].tolist() == ["SRP", "Coordinated"]
        assert list(on_time.columns) == ["policy", "Station 1", "Average"]

        summary = table.class_summary_frame()
        assert len(summary) == 6
        assert set(summary["class"]) == {"hv", "cav", "bus"}

        runs = table.runs_frame()
        assert len(runs) == 4
        assert (runs["violations"] == 0).all()

        for name in (
            "table_on_time.csv",
            "class_summary.csv",
            "runs.csv",
            "series_srp.csv",
            "series_coordinated.csv",
        ):
            assert (tmp_path / name).exists()
        assert not (tmp_path / "failures.csv").exists()
        assert (tmp_path / "srp" / "seed-2" / "trace.jsonl").exists()

    def test_compare_with_penetrations(self, scenario_path, tmp_path):
        spec = make_spec(scenario_path, tmp_path, seeds=[1], penetrations=[0.5, 1.0])
        table = ExperimentRunner(spec).compare()

        assert table.has_penetration
        assert list(table.on_time_frame().columns[:2]) == ["penetration", "policy"]
        delays = table.trip_delay_frame()
        assert len(delays) == 4
        assert set(table.series_frames()) == {
            "srp_p050",
            "srp_p100",
            "coordinated_p050",
            "coordinated_p100",
        }
        assert (tmp_path / "trip_delay_by_penetration.csv").exists()
        assert (tmp_path / "p100" / "coordinated" / "seed-1" / "config.json").exists()

    def test_aborted_runs_are_reported(self, scenario_path, tmp_path):
        """Test that a failing cell does not stop the matrix."""
        real_run_single = experiment.run_single

        def flaky(doc, key, out_dir):
            if key.policy == "coordinated" and key.seed == 2:
                raise SimulationAbort("cav 12 routed onto dl lane of edge 4")
            return real_run_single(doc, key, out_dir)

        with patch("laneshare.experiment.run_single", side_effect=flaky):
            table = ExperimentRunner(make_spec(scenario_path, tmp_path)).compare()

        assert len(table.completed) == 3
        [failed] = table.failures
        assert failed.key == RunKey("coordinated", 2)
        assert failed.error == "SimulationAbort: cav 12 routed onto dl lane of edge 4"
        failures = pd.read_csv(tmp_path / "failures.csv")
        assert failures["seed"].tolist() == [2]

    def test_crashed_runs_are_reported(self, scenario_path, tmp_path):
        """Test that an unexpected worker error lands in failures.csv."""
        real_run_single = experiment.run_single

        def crashing(doc, key, out_dir):
            if key.policy == "srp" and key.seed == 1:
                raise KeyError("edge 99")
            return real_run_single(doc, key, out_dir)

        with patch("laneshare.experiment.run_single", side_effect=crashing):
            table = ExperimentRunner(make_spec(scenario_path, tmp_path)).compare()

        assert len(table.completed) == 3
        [failed] = table.failures
        assert failed.key == RunKey("srp", 1)
        assert failed.error.startswith("KeyError")
        failures = pd.read_csv(tmp_path / "failures.csv")
        assert failures["policy"].tolist() == ["srp"]

    def test_series_are_aligned(self, scenario_path, tmp_path):
        table = ExperimentRunner(make_spec(scenario_path, tmp_path)).compare()
        for frame in table.series_frames().values():
            assert frame["time"].tolist() == list(range(len(frame)))
            assert not frame.isna().any().any()
