"""Stressor scenario catalog: nine kinds at two levels plus the unstressed case.

Five kinds (cpu, icache, aio, udp, rawsock) are in the trained set; four
(matrix, revio, rawudp, rawpkt) exist only for generalization testing and
never appear in any training split. Each (kind, level) pair maps to a pure
data profile: a processing-time inflation, additive KPI channel deltas and
an optional per-frame burst term. Numeric values live in a versioned data
file and were calibrated until every scenario passes the 97% purity gate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import TYPE_CHECKING

import numpy as np

from .errors import DomainError, FormatError
from .schema import CHANNEL_FAMILIES, FEATURE_INDEX, FEATURE_NAMES, N_FEATURES

if TYPE_CHECKING:
    from .labeling import Threshold
    from .sim import Trace

TRAINED_KINDS = ("cpu", "icache", "aio", "udp", "rawsock")
UNTRAINED_KINDS = ("matrix", "revio", "rawudp", "rawpkt")
ALL_KINDS = TRAINED_KINDS + UNTRAINED_KINDS
LEVELS = ("low", "high")

CATALOG_VERSION = "profiles-v1"

# Untrained kind -> trained analogue whose KPI channel families it shares.
ANALOGUES = {
    "matrix": ("cpu", "icache"),
    "revio": ("aio",),
    "rawudp": ("rawsock", "udp"),
    "rawpkt": ("rawsock",),
}

EXPECTED_ANOMALOUS = "anomalous"
EXPECTED_NON_ANOMALOUS = "non-anomalous"


def is_trained(kind: str) -> bool:
    if kind == "none":
        return False
    if kind not in ALL_KINDS:
        raise DomainError(f"unknown stressor kind '{kind}'")
    return kind in TRAINED_KINDS


@dataclass(frozen=True)
class ScenarioId:
    """A (kind, level) pair; high level implies the anomalous expected class."""

    kind: str
    level: str

    def __post_init__(self):
        if self.kind == "none":
            if self.level != "none":
                raise DomainError("unstressed scenario must have level 'none'")
        elif self.kind in ALL_KINDS:
            if self.level not in LEVELS:
                raise DomainError(
                    f"invalid level '{self.level}' for kind '{self.kind}'")
        else:
            raise DomainError(f"unknown stressor kind '{self.kind}'")

    @property
    def expected_class(self) -> str:
        return EXPECTED_ANOMALOUS if self.level == "high" else EXPECTED_NON_ANOMALOUS

    @property
    def name(self) -> str:
        return "unstressed" if self.kind == "none" else f"{self.kind}-{self.level}"


UNSTRESSED = ScenarioId("none", "none")


def all_scenarios() -> list[ScenarioId]:
    """The 19 catalog scenarios: 9 kinds x 2 levels plus unstressed."""
    out = [UNSTRESSED]
    for kind in ALL_KINDS:
        for level in LEVELS:
            out.append(ScenarioId(kind, level))
    return out


@dataclass(frozen=True)
class StressorProfile:
    kind: str
    level: str
    processing_inflation: float
    kpi_deltas: dict[str, float] = field(default_factory=dict)
    burst_probability: float = 0.0
    burst_multiplier: float = 1.0
    channels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.processing_inflation < 1.0:
            raise DomainError("processing_inflation must be >= 1")
        if not 0.0 <= self.burst_probability <= 1.0:
            raise DomainError("burst_probability must be in [0, 1]")
        if self.burst_multiplier < 1.0:
            raise DomainError("burst_multiplier must be >= 1")
        for name in self.kpi_deltas:
            if name not in FEATURE_INDEX:
                raise DomainError(f"kpi delta for unknown feature '{name}'")

    def delta_vector(self) -> np.ndarray:
        vec = np.zeros(N_FEATURES)
        for name, delta in self.kpi_deltas.items():
            vec[FEATURE_INDEX[name]] = delta
        return vec


IDENTITY_PROFILE = StressorProfile(kind="none", level="none",
                                   processing_inflation=1.0)


class Catalog:
    """Baseline KPI table plus one profile per (kind, level) pair."""

    def __init__(self, baseline: dict[str, float], noise_std: dict[str, float],
                 profiles: dict[tuple[str, str], StressorProfile]):
        missing = [n for n in FEATURE_NAMES if n not in baseline]
        if missing:
            raise FormatError(f"catalog baseline missing features: {missing}")
        self.baseline = np.array([baseline[n] for n in FEATURE_NAMES])
        self.noise_std = np.array([noise_std.get(n, 0.0) for n in FEATURE_NAMES])
        self._profiles = profiles

    def profile_for(self, kind: str, level: str) -> StressorProfile:
        """Catalog profile for a scenario; (none, none) is the identity."""
        if kind == "none" and level == "none":
            return IDENTITY_PROFILE
        if kind not in ALL_KINDS or level not in LEVELS:
            raise DomainError(f"no profile for kind='{kind}' level='{level}'")
        return self._profiles[(kind, level)]

    def profile_for_scenario(self, scenario: ScenarioId) -> StressorProfile:
        return self.profile_for(scenario.kind, scenario.level)

    @classmethod
    def from_dict(cls, doc: dict) -> "Catalog":
        if doc.get("version") != CATALOG_VERSION:
            raise FormatError(
                f"profile catalog version {doc.get('version')!r}, "
                f"expected {CATALOG_VERSION!r}")
        profiles = {}
        for key, body in doc["profiles"].items():
            kind, _, level = key.partition("/")
            profiles[(kind, level)] = StressorProfile(
                kind=kind, level=level,
                processing_inflation=body["processing_inflation"],
                kpi_deltas=dict(body.get("kpi_deltas", {})),
                burst_probability=body.get("burst_probability", 0.0),
                burst_multiplier=body.get("burst_multiplier", 1.0),
                channels=tuple(body.get("channels", ())),
            )
        missing = [f"{k}/{lv}" for k in ALL_KINDS for lv in LEVELS
                   if (k, lv) not in profiles]
        if missing:
            raise FormatError(f"profile catalog missing entries: {missing}")
        # High must stress strictly harder than low for the same kind.
        for kind in ALL_KINDS:
            if (profiles[(kind, "high")].processing_inflation
                    <= profiles[(kind, "low")].processing_inflation):
                raise FormatError(
                    f"{kind}: high inflation must exceed low inflation")
        return cls(doc["baseline"], doc["noise_std"], profiles)

    def to_dict(self) -> dict:
        return {
            "version": CATALOG_VERSION,
            "baseline": {n: float(v) for n, v in zip(FEATURE_NAMES, self.baseline)},
            "noise_std": {n: float(v) for n, v in zip(FEATURE_NAMES, self.noise_std)},
            "profiles": {
                f"{p.kind}/{p.level}": {
                    "processing_inflation": p.processing_inflation,
                    "burst_probability": p.burst_probability,
                    "burst_multiplier": p.burst_multiplier,
                    "channels": list(p.channels),
                    "kpi_deltas": dict(p.kpi_deltas),
                }
                for p in self._profiles.values()
            },
        }


def default_catalog() -> Catalog:
    text = resources.files("rttbench.data").joinpath("profiles.json").read_text()
    return Catalog.from_dict(json.loads(text))


def load_catalog(path) -> Catalog:
    with open(path) as fh:
        return Catalog.from_dict(json.load(fh))


def channel_features(profile: StressorProfile) -> set[str]:
    """Union of schema features covered by the profile's channel families."""
    names: set[str] = set()
    for family in profile.channels:
        names.update(CHANNEL_FAMILIES[family])
    return names


def validate_purity(trace: "Trace", threshold: "Threshold", expected: str) -> float:
    """Fraction of the trace's frames whose RTT label matches ``expected``.

    The caller compares the result against the 0.97 purity gate.
    """
    if expected not in (EXPECTED_ANOMALOUS, EXPECTED_NON_ANOMALOUS):
        raise DomainError(f"unknown expected class '{expected}'")
    if not trace.frames:
        raise DomainError("cannot validate purity of an empty trace")
    avgs = np.array([rtt.avg_rtt for _, rtt in trace.frames])
    anomalous = avgs >= threshold.cutoff
    want = anomalous if expected == EXPECTED_ANOMALOUS else ~anomalous
    return float(np.mean(want))
