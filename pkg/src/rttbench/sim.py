"""Deterministic simulator of a loaded client-server call-processing system.

Replaces a physical two-VM call-generator rig with a seeded model. Per
call, the round trip time decomposes into two one-way transmissions plus
the server processing time; a lost setup response adds one retransmission
timeout.
Server KPIs are synthesized per logging frame from the catalog baseline
plus the active stressor's channel deltas and bounded noise.

Processing time is log-normal per call, modulated by a per-frame load
factor shared by every call in the frame. The shared factor is what gives
frame-averaged RTT its realistic variance: with ~420 independent calls per
frame, per-call jitter alone would average away to nothing. Stressors
multiply the processing-time mean by their inflation; bursts multiply a
randomly chosen frame's load factor without touching its KPIs.

Everything is driven by one PCG64 stream in a fixed per-frame draw order,
so a (config, profile, seed) triple reproduces a byte-identical trace, and
profiles that differ only in inflation consume identical random draws
(which makes level comparisons paired).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .labeling import FrameRtt
from .schema import FEATURE_INDEX, KpiFrame, N_FEATURES
from .stressors import Catalog, ScenarioId, StressorProfile, default_catalog

_CPU_USER = FEATURE_INDEX["cpu_user"]
_CPU_SYS = FEATURE_INDEX["cpu_sys"]
_CPU_IDLE = FEATURE_INDEX["cpu_idle"]
_CPU_WAIT = FEATURE_INDEX["cpu_wait"]
_PERCENT_IDX = np.array(sorted([_CPU_USER, _CPU_SYS, _CPU_IDLE, _CPU_WAIT]))


@dataclass(frozen=True)
class SimConfig:
    run_duration: float
    call_rate: float = 70.0
    frame_duration: float = 6.0
    base_transmission_time: float = 0.5   # ms, one-way
    base_processing_time: float = 3.633   # ms, unstressed mean
    processing_jitter: float = 0.71       # ms, per-call spread
    retransmission_timeout: float = 50.0  # ms
    loss_probability: float = 0.0005
    seed: int = 0
    arrivals: str = "poisson"             # poisson | fixed
    load_spread: float = 0.378            # per-frame load factor std
    load_floor: float = 0.3               # lower clip of the load factor

    def __post_init__(self):
        if not self.call_rate > 0:
            raise ConfigError("call_rate must be > 0")
        if not self.frame_duration > 0:
            raise ConfigError("frame_duration must be > 0")
        if not self.run_duration >= self.frame_duration:
            raise ConfigError("run_duration must be >= frame_duration")
        if not self.base_processing_time > 0:
            raise ConfigError("base_processing_time must be > 0")
        if self.base_transmission_time < 0:
            raise ConfigError("base_transmission_time must be >= 0")
        if self.processing_jitter < 0:
            raise ConfigError("processing_jitter must be >= 0")
        floor = 2 * self.base_transmission_time + self.base_processing_time
        if not self.retransmission_timeout > floor:
            raise ConfigError(
                "retransmission_timeout must exceed 2*base_transmission_time"
                f" + base_processing_time ({floor:.3f}ms), otherwise every"
                " call retransmits")
        if not 0.0 <= self.loss_probability <= 1.0:
            raise ConfigError("loss_probability must be in [0, 1]")
        if self.arrivals not in ("poisson", "fixed"):
            raise ConfigError("arrivals must be 'poisson' or 'fixed'")
        if self.load_spread < 0:
            raise ConfigError("load_spread must be >= 0")
        if not 0 < self.load_floor <= 1:
            raise ConfigError("load_floor must be in (0, 1]")

    @property
    def frame_count(self) -> int:
        return int(self.run_duration // self.frame_duration)

    def with_seed(self, seed: int) -> "SimConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class RttSample:
    timestamp: float
    rtt: float
    retransmitted: bool


@dataclass
class Trace:
    """Simulation output: per-frame (KPI vector, averaged RTT) pairs.

    ``samples`` keeps the raw per-call RTTs as a structured array with
    fields (frame, timestamp, rtt, retransmitted).
    """

    config: SimConfig
    scenario: ScenarioId
    frames: list[tuple[KpiFrame, FrameRtt]]
    samples: np.ndarray = field(repr=False)

    def frame_avgs(self) -> np.ndarray:
        return np.array([rtt.avg_rtt for _, rtt in self.frames])

    def raw_rtts(self) -> np.ndarray:
        return self.samples["rtt"]


SAMPLE_DTYPE = np.dtype([("frame", np.int64), ("timestamp", np.float64),
                         ("rtt", np.float64), ("retransmitted", np.bool_)])


def _lognorm_params(mean_one_cv: float) -> tuple[float, float]:
    # mean-1 log-normal: exp(mu + sigma*Z) with E[.] = 1
    sigma = math.sqrt(math.log1p(mean_one_cv ** 2))
    return -0.5 * sigma * sigma, sigma


def sample_rtt(rng: np.random.Generator, config: SimConfig,
               profile: StressorProfile, frame_factor: float = 1.0,
               timestamp: float = 0.0) -> RttSample:
    """Draw one call's round trip time.

    rtt = 2 * t_tx + t_p, with t_p log-normal around
    base_processing_time * inflation * frame_factor; a loss event adds the
    retransmission timeout on top.
    """
    cv = config.processing_jitter / config.base_processing_time
    mu, sigma = _lognorm_params(cv)
    w = math.exp(mu + sigma * rng.standard_normal())
    t_p = config.base_processing_time * profile.processing_inflation * frame_factor * w
    rtt = 2.0 * config.base_transmission_time + t_p
    retransmitted = bool(rng.random() < config.loss_probability)
    if retransmitted:
        rtt += config.retransmission_timeout
    return RttSample(timestamp=timestamp, rtt=rtt, retransmitted=retransmitted)


def frame_kpis(profile: StressorProfile, frame_index: int,
               noise: np.ndarray, catalog: Catalog,
               frame_duration: float) -> KpiFrame:
    """Synthesize one frame's KPI vector: baseline + profile deltas + noise.

    Non-negative features clamp at 0; the four cpu percentages are kept on
    a 100% budget by deriving cpu_idle from the other three.
    """
    values = catalog.baseline + profile.delta_vector() + noise * catalog.noise_std
    np.clip(values, 0.0, None, out=values)
    u, s, w = values[_CPU_USER], values[_CPU_SYS], values[_CPU_WAIT]
    u, s, w = min(u, 100.0), min(s, 100.0), min(w, 100.0)
    busy = u + s + w
    if busy > 100.0:
        scale = 100.0 / busy
        u, s, w, busy = u * scale, s * scale, w * scale, 100.0
    values[_CPU_USER], values[_CPU_SYS], values[_CPU_WAIT] = u, s, w
    values[_CPU_IDLE] = 100.0 - busy
    return KpiFrame(frame_start=frame_index * frame_duration,
                    frame_duration=frame_duration, features=values)


def simulate_scenario(config: SimConfig, profile: StressorProfile,
                      catalog: Catalog | None = None) -> Trace:
    """Run one scenario: floor(run_duration / frame_duration) frames.

    Each frame draws, in order: the load factor, the burst coin, the call
    arrivals, per-call processing jitter, per-call loss events, and the KPI
    noise vector. Poisson frames are forced to hold at least one call so
    every frame has a defined RTT average.
    """
    catalog = catalog or default_catalog()
    rng = np.random.default_rng(np.random.PCG64(config.seed))
    n_frames = config.frame_count
    per_frame = config.call_rate * config.frame_duration
    cv = config.processing_jitter / config.base_processing_time
    mu, sigma = _lognorm_params(cv)
    t_base = config.base_processing_time * profile.processing_inflation

    frames: list[tuple[KpiFrame, FrameRtt]] = []
    chunks: list[np.ndarray] = []
    for k in range(n_frames):
        factor = max(config.load_floor,
                     1.0 + config.load_spread * rng.standard_normal())
        if rng.random() < profile.burst_probability:
            factor *= profile.burst_multiplier
        if config.arrivals == "poisson":
            n_calls = max(1, int(rng.poisson(per_frame)))
            offsets = np.sort(rng.random(n_calls)) * config.frame_duration
        else:
            n_calls = max(1, round(per_frame))
            offsets = (np.arange(n_calls) + 0.5) * (config.frame_duration / n_calls)
        w = np.exp(mu + sigma * rng.standard_normal(n_calls))
        rtts = 2.0 * config.base_transmission_time + t_base * factor * w
        lost = rng.random(n_calls) < config.loss_probability
        rtts[lost] += config.retransmission_timeout
        noise = rng.standard_normal(N_FEATURES)

        frame_start = k * config.frame_duration
        chunk = np.empty(n_calls, dtype=SAMPLE_DTYPE)
        chunk["frame"] = k
        chunk["timestamp"] = frame_start + offsets
        chunk["rtt"] = rtts
        chunk["retransmitted"] = lost
        chunks.append(chunk)

        kpi = frame_kpis(profile, k, noise, catalog, config.frame_duration)
        frames.append((kpi, FrameRtt(frame_start=frame_start,
                                     avg_rtt=float(np.mean(rtts)),
                                     sample_count=n_calls)))

    return Trace(config=config,
                 scenario=ScenarioId(profile.kind, profile.level),
                 frames=frames,
                 samples=np.concatenate(chunks))
