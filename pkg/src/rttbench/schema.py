"""Canonical server-side KPI feature schema and frame/record containers.

Every dataset, simulated or ingested from real tool output, carries the
same ordered feature vector. The order below is fixed; SCHEMA_VERSION is
embedded in every dataset file so alternates can extend it later.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError

SCHEMA_VERSION = "kpi-v1"

# (name, unit, source tool). vmstat/iostat report per-interval gauges;
# netstat counters are differenced into rates by the parser.
FEATURES = [
    ("procs_runnable", "count", "vmstat"),
    ("procs_blocked", "count", "vmstat"),
    ("mem_free", "KB", "vmstat"),
    ("mem_buff", "KB", "vmstat"),
    ("mem_cache", "KB", "vmstat"),
    ("swap_in", "KB/s", "vmstat"),
    ("swap_out", "KB/s", "vmstat"),
    ("blocks_in", "blk/s", "vmstat"),
    ("blocks_out", "blk/s", "vmstat"),
    ("interrupts", "/s", "vmstat"),
    ("context_switches", "/s", "vmstat"),
    ("cpu_user", "%", "vmstat"),
    ("cpu_sys", "%", "vmstat"),
    ("cpu_idle", "%", "vmstat"),
    ("cpu_wait", "%", "vmstat"),
    ("tps", "/s", "iostat"),
    ("kb_read_per_s", "KB/s", "iostat"),
    ("kb_wrtn_per_s", "KB/s", "iostat"),
    ("tcp_segments_in", "/s", "netstat"),
    ("tcp_segments_out", "/s", "netstat"),
    ("tcp_retransmits", "/s", "netstat"),
    ("udp_in", "/s", "netstat"),
    ("udp_out", "/s", "netstat"),
    ("udp_errors", "/s", "netstat"),
]

FEATURE_NAMES = [name for name, _, _ in FEATURES]
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}
N_FEATURES = len(FEATURE_NAMES)

# Percentage features are clamped to [0, 100]; everything else to >= 0.
PERCENT_FEATURES = frozenset({"cpu_user", "cpu_sys", "cpu_idle", "cpu_wait"})

# Channel families used by the stressor catalog's selectivity contract.
CHANNEL_FAMILIES = {
    "cpu": ["procs_runnable", "interrupts", "context_switches",
            "cpu_user", "cpu_sys", "cpu_idle", "cpu_wait"],
    "memory": ["mem_free", "mem_buff", "mem_cache", "swap_in", "swap_out"],
    "disk": ["procs_blocked", "blocks_in", "blocks_out",
             "tps", "kb_read_per_s", "kb_wrtn_per_s"],
    "network": ["tcp_segments_in", "tcp_segments_out", "tcp_retransmits",
                "udp_in", "udp_out", "udp_errors"],
}


def features_for_tool(tool: str) -> list[str]:
    return [name for name, _, src in FEATURES if src == tool]


def check_vector(values: np.ndarray) -> np.ndarray:
    """Validate a feature vector against the schema; returns it as float64."""
    vec = np.asarray(values, dtype=np.float64)
    if vec.shape != (N_FEATURES,):
        raise SchemaError(
            f"feature vector has {vec.shape} values, schema {SCHEMA_VERSION} "
            f"defines {N_FEATURES}")
    if not np.all(np.isfinite(vec)):
        bad = FEATURE_NAMES[int(np.flatnonzero(~np.isfinite(vec))[0])]
        raise SchemaError(f"non-finite value in feature '{bad}'")
    return vec


@dataclass
class KpiFrame:
    """One logging interval's server-side feature vector."""

    frame_start: float
    frame_duration: float
    features: np.ndarray

    def __post_init__(self):
        self.features = check_vector(self.features)

    def value(self, name: str) -> float:
        return float(self.features[FEATURE_INDEX[name]])

    def __eq__(self, other):
        if not isinstance(other, KpiFrame):
            return NotImplemented
        return (self.frame_start == other.frame_start
                and self.frame_duration == other.frame_duration
                and np.array_equal(self.features, other.features))


VALID_TOOLS = ("vmstat", "iostat", "netstat")


@dataclass
class ToolRecord:
    """One parsed sample from a monitoring tool.

    ``values`` may contain more names than the canonical schema uses
    (e.g. vmstat's swpd column); frame assembly picks what it needs.
    ``is_rate`` is False for netstat snapshots that could not be
    differenced into per-second rates.
    """

    tool: str
    timestamp: float
    values: dict[str, float] = field(default_factory=dict)
    is_rate: bool = True

    def __post_init__(self):
        if self.tool not in VALID_TOOLS:
            raise SchemaError(f"unknown tool '{self.tool}'")
        for k, v in self.values.items():
            if not math.isfinite(v):
                raise SchemaError(f"non-finite value for '{k}' in {self.tool} record")
