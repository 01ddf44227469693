"""
Experiment configuration parsing and emission.
"""

import json

import numpy as np
import pytest

from src.utils.config import emit_config, parse_config, spec_from_tree, write_config
from src.utils.errors import ConfigError


def _tree(config_dir, name="example1.json"):
    with open(config_dir / name) as f:
        return json.load(f)


def test_example1_parses(config_dir):
    spec = parse_config(config_dir / "example1.json")
    assert spec.kind == "table1"
    assert spec.behavior_names == ["B1", "B2", "B3"]
    assert spec.batch_names == ["low_high", "uniform", "no_batches"]
    assert np.allclose(spec.major_road.generator(), [[-1 / 60, 1 / 60], [1 / 240, -1 / 240]])
    assert spec.batch("low_high").lam_per_s == pytest.approx(50 / 3600)
    assert spec.batch("no_batches").distribution().mean == pytest.approx(1.0)
    road = spec.major_road.process(70.0)
    assert np.allclose(road.rates * 3600, [150.0, 50.0])
    assert spec.plan("simulate").seed == 20240611
    assert spec.plan("table1").qbar_vph == (70.0, 420.0)


@pytest.mark.parametrize("name", ["example1.json", "example2.json", "example3.json"])
def test_shipped_configs_parse(config_dir, name):
    assert parse_config(config_dir / name).case == name.split(".")[0]


def test_kind_override(config_dir):
    assert parse_config(config_dir / "example1.json", kind="sweep").kind == "sweep"


def test_pmf_must_sum_to_one(config_dir):
    tree = _tree(config_dir)
    tree["batches"]["low_high"]["pmf"] = {"1": 0.5, "7": 0.49}
    with pytest.raises(ConfigError) as info:
        spec_from_tree(tree)
    assert info.value.key == "batches.low_high.pmf"


def test_unknown_key_is_named(config_dir):
    tree = _tree(config_dir)
    tree["major_road"]["speed_kph"] = 50
    with pytest.raises(ConfigError) as info:
        spec_from_tree(tree)
    assert info.value.key == "major_road.speed_kph"


@pytest.mark.parametrize("mutate, key", [
    (lambda t: t["behaviors"]["B1"].update(critical_gap_s=-1.0), "behaviors.B1.critical_gap_s"),
    (lambda t: t["batches"]["uniform"].update(lambda_bph=0.0), "batches.uniform.lambda_bph"),
    (lambda t: t["experiments"]["sweep"].update(grid=[10.0, 5.0]), "experiments.sweep.grid"),
    (lambda t: t["experiments"]["simulate"].update(seed=-1), "experiments.simulate.seed"),
    (lambda t: t.update(kind="forecast"), "kind"),
])
def test_invalid_values_are_named(config_dir, mutate, key):
    tree = _tree(config_dir)
    mutate(tree)
    with pytest.raises(ConfigError) as info:
        spec_from_tree(tree)
    assert info.value.key == key


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "absent.json")


def test_unstable_analyze_plan_rejected(config_dir, tmp_path):
    tree = _tree(config_dir)
    tree["kind"] = "analyze"
    tree["batches"]["uniform"]["lambda_bph"] = 400.0
    path = tmp_path / "heavy.json"
    path.write_text(json.dumps(tree))
    with pytest.raises(ConfigError) as info:
        parse_config(path)
    assert info.value.key == "experiments.analyze"


def test_written_config_parses_back(config_dir, tmp_path):
    spec = parse_config(config_dir / "example2.json")
    path = tmp_path / "copy.json"
    write_config(spec, path)
    assert parse_config(path) == spec
    assert "platooning" not in emit_config(spec)["experiments"]["sweep"]
