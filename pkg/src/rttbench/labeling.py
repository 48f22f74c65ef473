"""Frame-RTT labeling: baseline threshold, binary labels, feature scaling.

The anomalous cutoff is the baseline mean of frame-averaged RTT plus three
sample standard deviations. A frame at or above the cutoff is anomalous
(the boundary is inclusive). Features are min-max scaled without centering;
the scaling is fitted on training rows only and reused unchanged for test
rows, which may therefore fall outside [0, 1].
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FormatError, SchemaError

LABEL_ANOMALOUS = "anomalous"
LABEL_NON_ANOMALOUS = "non-anomalous"

THRESHOLD_VERSION = "threshold-v1"

DEFAULT_MIN_BASELINE_FRAMES = 300


@dataclass(frozen=True)
class FrameRtt:
    """Per-frame average of the round-trip times measured in that frame."""

    frame_start: float
    avg_rtt: float
    sample_count: int

    def __post_init__(self):
        if self.sample_count < 1:
            raise DomainError("FrameRtt needs at least one sample")
        if not self.avg_rtt > 0:
            raise DomainError("FrameRtt average must be positive")


class DegenerateBaselineWarning(UserWarning):
    """Baseline frame averages have zero variance; cutoff collapses to the mean."""


@dataclass(frozen=True)
class Threshold:
    baseline_mean: float
    baseline_frame_std: float
    cutoff: float
    baseline_frame_count: int

    def to_json(self) -> str:
        return json.dumps({
            "version": THRESHOLD_VERSION,
            "baseline_mean": self.baseline_mean,
            "baseline_frame_std": self.baseline_frame_std,
            "cutoff": self.cutoff,
            "baseline_frame_count": self.baseline_frame_count,
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Threshold":
        doc = json.loads(text)
        if doc.get("version") != THRESHOLD_VERSION:
            raise FormatError(
                f"threshold file version {doc.get('version')!r}, "
                f"expected {THRESHOLD_VERSION!r}")
        return cls(doc["baseline_mean"], doc["baseline_frame_std"],
                   doc["cutoff"], doc["baseline_frame_count"])


def compute_threshold(baseline: list[FrameRtt] | np.ndarray,
                      min_frames: int = DEFAULT_MIN_BASELINE_FRAMES) -> Threshold:
    """Mean + 3 * sample std (n-1 denominator) of baseline frame averages.

    ``baseline`` is a list of FrameRtt from an unstressed run, or a plain
    array of frame averages. Zero variance yields cutoff == mean with a
    DegenerateBaselineWarning.
    """
    if isinstance(baseline, np.ndarray):
        avgs = np.asarray(baseline, dtype=np.float64)
    else:
        avgs = np.array([f.avg_rtt for f in baseline], dtype=np.float64)
    n = avgs.size
    if n < min_frames:
        raise DomainError(
            f"baseline has {n} frames, need at least {min_frames}")
    mean = float(np.mean(avgs))
    std = float(np.std(avgs, ddof=1)) if n > 1 else 0.0
    if std == 0.0:
        warnings.warn("baseline frame averages have zero variance",
                      DegenerateBaselineWarning, stacklevel=2)
    return Threshold(baseline_mean=mean, baseline_frame_std=std,
                     cutoff=mean + 3.0 * std, baseline_frame_count=n)


def label_avg_rtt(avg_rtt, threshold: Threshold):
    """True (anomalous) iff avg_rtt >= cutoff. Accepts scalars or arrays."""
    return np.asarray(avg_rtt, dtype=np.float64) >= threshold.cutoff


def label_name(anomalous: bool) -> str:
    return LABEL_ANOMALOUS if anomalous else LABEL_NON_ANOMALOUS


def label_frames(frames, threshold: Threshold, scenario):
    """Attach binary labels to (KpiFrame, FrameRtt) pairs.

    Returns a list of (KpiFrame, FrameRtt, scenario, label_string) rows;
    ``scenario`` is recorded unchanged for evaluation-time polarity
    selection.
    """
    if not frames:
        raise DomainError("no frames to label")
    rows = []
    for kpi, rtt in frames:
        anomalous = rtt.avg_rtt >= threshold.cutoff
        rows.append((kpi, rtt, scenario, label_name(anomalous)))
    return rows


@dataclass(frozen=True)
class FeatureScaling:
    """Per-feature (min, max) fitted on training rows."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        if self.mins.shape != self.maxs.shape:
            raise SchemaError("scaling mins/maxs shape mismatch")
        if np.any(self.mins > self.maxs):
            raise SchemaError("scaling has min > max")

    @property
    def n_features(self) -> int:
        return self.mins.shape[0]


def fit_scaling(features: np.ndarray) -> FeatureScaling:
    """Fit min-max scaling on a (rows, features) training matrix."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise DomainError("scaling needs a non-empty 2-D feature matrix")
    return FeatureScaling(mins=x.min(axis=0), maxs=x.max(axis=0))


def apply_scaling(features: np.ndarray, scaling: FeatureScaling) -> np.ndarray:
    """Map each feature by (x - min) / (max - min); constant features to 0.

    No clamping: values fitted on training rows may map outside [0, 1]
    for test rows.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != scaling.n_features:
        raise SchemaError(
            f"feature count {x.shape[-1]} does not match scaling "
            f"({scaling.n_features})")
    span = scaling.maxs - scaling.mins
    out = np.zeros_like(x)
    nonconst = span > 0
    out[..., nonconst] = (x[..., nonconst] - scaling.mins[nonconst]) / span[nonconst]
    return out


def scaling_to_dict(scaling: FeatureScaling) -> dict:
    return {"mins": scaling.mins.tolist(), "maxs": scaling.maxs.tolist()}


def scaling_from_dict(doc: dict) -> FeatureScaling:
    return FeatureScaling(mins=np.array(doc["mins"], dtype=np.float64),
                          maxs=np.array(doc["maxs"], dtype=np.float64))
