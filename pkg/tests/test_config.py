import json

import pytest

from robust_node.config import ExperimentConfig
from robust_node.exceptions import ConfigError


def test_defaults():
    cfg = ExperimentConfig(seed=3)
    assert cfg.seeds == [3, 4, 5, 6, 7]
    assert cfg.dataset.M == 200 and cfg.dataset.N == 4
    assert cfg.shooting.n_layers == 20 and cfg.evaluation.grid_resolution == 101


def test_roundtrip(tmp_path):
    cfg = ExperimentConfig(seed=1, method="worst-case")
    cfg.shooting.tau = 0.25
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    path = tmp_path / "c.json"
    path.write_text(cfg.dumps())
    assert ExperimentConfig.load(path) == cfg


def test_dumps_is_canonical():
    a = ExperimentConfig.from_dict({"seed": 0, "method": "uniform"})
    b = ExperimentConfig.from_dict({"method": "uniform", "seed": 0})
    assert a.dumps() == b.dumps()


def test_shooting_config():
    sc = ExperimentConfig(seed=2, method="worst-case").shooting_config()
    assert sc.weight_scheme == "worst_case" and sc.seed == 2
    assert ExperimentConfig(seed=2).shooting_config("non-robust", 9).weight_scheme == "uniform"


@pytest.mark.parametrize("data,field", [
    ({}, "seed"),
    ({"seed": 0, "extra": 1}, "extra"),
    ({"seed": 0, "dataset": {"Mm": 3}}, "dataset.Mm"),
    ({"seed": 0, "dataset": {"M": "200"}}, "dataset.M"),
    ({"seed": 0, "dataset": {"M": 1}}, "dataset.M"),
    ({"seed": 0, "dataset": {"epsilon": 0.06}}, "dataset.epsilon"),
    ({"seed": 0, "method": "robust"}, "method"),
    ({"seed": 0, "seeds": []}, "seeds"),
    ({"seed": 0, "seeds": [1, "2"]}, "seeds"),
    ({"seed": True}, "seed"),
    ({"seed": 0, "task": {"t1": [-1.0, 0.0]}}, "task.t1"),
    ({"seed": 0, "task": {"kappa": 0}}, "task.kappa"),
    ({"seed": 0, "shooting": {"tau": 0.0}}, "shooting"),
    ({"seed": 0, "shooting": []}, "shooting"),
    ({"seed": 0, "evaluation": {"confidence_threshold": 0.4}}, "evaluation.confidence_threshold"),
])
def test_errors_name_field(data, field):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict(data)
    assert info.value.field == field
    assert str(info.value).startswith(field)


def test_invalid_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{seed: 1")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(path)


def test_shipped_configs_load():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    for path in root.glob("*.json"):
        ExperimentConfig.from_dict(json.loads(path.read_text()))
