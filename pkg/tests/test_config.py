import json

import pytest

from rttbench.config import RunConfig
from rttbench.errors import ConfigError


def test_defaults():
    cfg = RunConfig()
    assert cfg.seed == 42
    assert cfg.frames["baseline"] == 2000
    assert len(cfg.models) == 7
    assert len(cfg.scenarios) == 9


def test_unknown_top_level_key():
    with pytest.raises(ConfigError, match="unknown config keys"):
        RunConfig.from_dict({"sede": 1})


def test_unknown_sim_key():
    with pytest.raises(ConfigError, match="sim config"):
        RunConfig.from_dict({"sim": {"callrate": 70}})


def test_unknown_model_kind():
    with pytest.raises(ConfigError, match="model kinds"):
        RunConfig.from_dict({"models": ["dt", "mlp"]})


def test_frames_merged_with_defaults():
    cfg = RunConfig.from_dict({"frames": {"trained": 99}})
    assert cfg.frames["trained"] == 99
    assert cfg.frames["baseline"] == 2000
    with pytest.raises(ConfigError, match="frames.trained"):
        RunConfig.from_dict({"frames": {"trained": 0}})


def test_load_from_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"seed": 7, "data_dir": "d"}))
    cfg = RunConfig.load(path)
    assert cfg.seed == 7 and cfg.data_dir == "d"
    with pytest.raises(ConfigError, match="not found"):
        RunConfig.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigError):
        RunConfig.load(bad)


def test_env_overrides_only_paths_and_seed(monkeypatch):
    monkeypatch.setenv("RTTBENCH_DATA_DIR", "/x/data")
    monkeypatch.setenv("RTTBENCH_REPORT_DIR", "/x/reports")
    monkeypatch.setenv("RTTBENCH_SEED", "1234")
    cfg = RunConfig.load(None)
    assert cfg.data_dir == "/x/data"
    assert cfg.report_dir == "/x/reports"
    assert cfg.seed == 1234
    monkeypatch.setenv("RTTBENCH_SEED", "one")
    with pytest.raises(ConfigError):
        RunConfig.load(None)


def test_round_trip_dict():
    cfg = RunConfig.from_dict({"seed": 9, "train_fraction": 0.7})
    again = RunConfig.from_dict(cfg.to_dict())
    assert again == cfg
