"""
Command-line surface and CSV artifacts.
"""

import json

import pandas as pd
import pytest

from src.core.toolkit import CSV_COLUMNS, GapAcceptanceToolkit, main
from src.utils.config import spec_from_tree


def _small_tree(kind="analyze"):
    return {
        "case": "small",
        "kind": kind,
        "major_road": {"mean_phase_sojourn_s": [60.0, 240.0], "flow_ratio": [3.0, 1.0]},
        "behaviors": {"B1": {"kind": "B1", "critical_gap_s": 7.0}},
        "batches": {"pairs": {"lambda_bph": 50.0, "pmf": {"1": 0.5, "2": 0.5}}},
        "experiments": {
            "analyze": {"qbar_vph": [70.0]},
            "sweep": {"axis": "qbar_vph", "grid": [70.0, 420.0], "platooning": True},
            "simulate": {"qbar_vph": [70.0], "measurement_s": 1800.0, "replications": 2, "seed": 5},
            "approx": {"qbar_vph": [500.0], "grid": [8.0, 16.0], "eta": 0.343},
        },
    }


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(_small_tree()))
    return path


def test_version_and_help(capsys):
    assert main(["--version"]) == 0
    assert "v" in capsys.readouterr().out
    assert main([]) == 0


def test_analyze_writes_result_csv(small_config, tmp_path):
    out = tmp_path / "results"
    assert main(["analyze", "--config", str(small_config), "--out", str(out)]) == 0
    frame = pd.read_csv(out / "small_analyze.csv")
    assert list(frame.columns) == CSV_COLUMNS
    assert frame.loc[0, "source"] == "analytic"
    assert frame.loc[0, "qbar_vph"] == pytest.approx(70.0)
    assert 0 < frame.loc[0, "EW_s"] < frame.loc[0, "ES_s"]
    positions = pd.read_csv(out / "small_positions.csv")
    assert list(positions["position"]) == [1, 2]


def test_config_errors_exit_with_category(tmp_path, capsys):
    tree = _small_tree()
    tree["batches"]["pairs"]["pmf"] = {"1": 0.5, "2": 0.4}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(tree))
    assert main(["analyze", "--config", str(path), "--out", str(tmp_path)]) == 2
    assert "error_category=config" in capsys.readouterr().err


def test_missing_config_and_low_jet_order(small_config, tmp_path):
    assert main(["analyze", "--config", str(tmp_path / "none.json")]) == 2
    assert main(["analyze", "--config", str(small_config), "--jet-order", "2", "--out", str(tmp_path)]) == 2


def test_unstable_analyze_point_is_rejected(tmp_path, capsys):
    tree = _small_tree()
    tree["batches"]["pairs"]["lambda_bph"] = 1500.0
    path = tmp_path / "heavy.json"
    path.write_text(json.dumps(tree))
    assert main(["analyze", "--config", str(path), "--out", str(tmp_path)]) == 2
    assert "error_category=config" in capsys.readouterr().err


def test_sweep_adds_poisson_rows_and_stability(tmp_path):
    toolkit = GapAcceptanceToolkit(spec_from_tree(_small_tree("sweep")), tmp_path)
    frame = toolkit.run()
    assert set(frame["case"]) == {"small", "small-poisson"}
    assert len(frame) == 4
    limits = pd.read_csv(tmp_path / "small_stability.csv")
    assert len(limits) == 2
    assert (limits["qbar_limit_vph"] > 420.0).all()


def test_simulate_writes_replications(tmp_path):
    toolkit = GapAcceptanceToolkit(spec_from_tree(_small_tree("simulate")), tmp_path)
    frame = toolkit.run()
    assert list(frame["source"]) == ["analytic", "simulated"]
    reps = pd.read_csv(tmp_path / "small_replications.csv")
    assert list(reps["replication"]) == [1, 2]


def test_approx_rows_follow_exact_rows(tmp_path):
    toolkit = GapAcceptanceToolkit(spec_from_tree(_small_tree("approx")), tmp_path)
    frame = toolkit.run()
    assert list(frame["source"]) == ["analytic", "approx"] * 2
    assert frame["lambda_bph"].tolist() == [8.0, 8.0, 16.0, 16.0]
