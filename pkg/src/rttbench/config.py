"""Run configuration: JSON file, strict key checking, env overrides.

Only paths and the seed may be overridden from the environment
(RTTBENCH_DATA_DIR, RTTBENCH_REPORT_DIR, RTTBENCH_SEED); everything else
comes from the config file or its defaults.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .models import MODEL_KINDS
from .stressors import ALL_KINDS

_SIM_KEYS = {"call_rate", "frame_duration", "base_transmission_time",
             "base_processing_time", "processing_jitter",
             "retransmission_timeout", "loss_probability", "arrivals",
             "load_spread", "load_floor"}
_FRAME_KEYS = {"baseline", "trained", "unstressed", "untrained_rows"}
_TOP_KEYS = {"seed", "data_dir", "report_dir", "sim", "frames",
             "train_fraction", "models", "scenarios", "hyperparams",
             "profiles", "min_baseline_frames"}


@dataclass
class RunConfig:
    seed: int = 42
    data_dir: str = "data"
    report_dir: str = "reports"
    sim: dict = field(default_factory=dict)
    frames: dict = field(default_factory=lambda: {
        "baseline": 2000, "trained": 400, "unstressed": 1200,
        "untrained_rows": 1000})
    train_fraction: float = 0.8
    models: list = field(default_factory=lambda: list(MODEL_KINDS))
    scenarios: list = field(default_factory=lambda: list(ALL_KINDS))
    hyperparams: dict = field(default_factory=dict)
    profiles: dict = field(default_factory=dict)
    min_baseline_frames: int = 300

    def __post_init__(self):
        unknown = set(self.sim) - _SIM_KEYS
        if unknown:
            raise ConfigError(f"unknown sim config keys: {sorted(unknown)}")
        unknown = set(self.frames) - _FRAME_KEYS
        if unknown:
            raise ConfigError(f"unknown frames config keys: {sorted(unknown)}")
        bad = [m for m in self.models if m not in MODEL_KINDS]
        if bad:
            raise ConfigError(f"unknown model kinds: {bad}")
        bad = [k for k in self.scenarios if k not in ALL_KINDS]
        if bad:
            raise ConfigError(f"unknown stressor kinds: {bad}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must be in (0, 1)")
        self.frames = {**{"baseline": 2000, "trained": 400, "unstressed": 1200,
                          "untrained_rows": 1000}, **self.frames}
        for key, value in self.frames.items():
            if value < 1:
                raise ConfigError(f"frames.{key} must be >= 1")

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        unknown = set(doc) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {k: v for k, v in doc.items()}
        return cls(**kwargs)

    @classmethod
    def load(cls, path=None) -> "RunConfig":
        if path is None:
            cfg = cls()
        else:
            try:
                with open(path) as fh:
                    doc = json.load(fh)
            except FileNotFoundError:
                raise ConfigError(f"config file not found: {path}") from None
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {path}: {exc}") from None
            cfg = cls.from_dict(doc)
        return cfg.with_env_overrides()

    def with_env_overrides(self) -> "RunConfig":
        updates = {}
        if os.environ.get("RTTBENCH_DATA_DIR"):
            updates["data_dir"] = os.environ["RTTBENCH_DATA_DIR"]
        if os.environ.get("RTTBENCH_REPORT_DIR"):
            updates["report_dir"] = os.environ["RTTBENCH_REPORT_DIR"]
        if os.environ.get("RTTBENCH_SEED"):
            try:
                updates["seed"] = int(os.environ["RTTBENCH_SEED"])
            except ValueError:
                raise ConfigError("RTTBENCH_SEED must be an integer") from None
        return dataclasses.replace(self, **updates) if updates else self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)
