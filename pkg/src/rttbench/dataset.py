"""The canonical labeled dataset and its CSV form.

One row per logging frame: scenario provenance, the frame-averaged RTT,
the binary label and the KPI feature vector in schema order. Floats are
serialized with Python's shortest round-trip repr, so write -> read is
lossless and two identical datasets produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .errors import DomainError, FormatError
from .labeling import (LABEL_ANOMALOUS, LABEL_NON_ANOMALOUS, FeatureScaling,
                       Threshold)
from .schema import FEATURE_NAMES, SCHEMA_VERSION
from .util import atomic_write_bytes

if TYPE_CHECKING:
    from .sim import Trace

FIXED_COLUMNS = ["schema_version", "frame_start", "scenario_kind",
                 "scenario_level", "avg_rtt_ms", "label"]


@dataclass
class LabeledDataset:
    frame_start: np.ndarray
    kinds: np.ndarray
    levels: np.ndarray
    avg_rtt: np.ndarray
    labels: np.ndarray          # int8, 1 = anomalous
    features: np.ndarray        # (rows, features) float64
    schema_version: str = SCHEMA_VERSION
    feature_names: list[str] = field(default_factory=lambda: list(FEATURE_NAMES))
    scaling: FeatureScaling | None = None   # in-memory only, not persisted

    def __post_init__(self):
        n = self.features.shape[0]
        for name in ("frame_start", "kinds", "levels", "avg_rtt", "labels"):
            if getattr(self, name).shape[0] != n:
                raise FormatError(f"dataset column '{name}' length mismatch")
        if self.features.shape[1] != len(self.feature_names):
            raise FormatError("feature matrix width does not match names")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(
            frame_start=self.frame_start[idx], kinds=self.kinds[idx],
            levels=self.levels[idx], avg_rtt=self.avg_rtt[idx],
            labels=self.labels[idx], features=self.features[idx],
            schema_version=self.schema_version,
            feature_names=list(self.feature_names))

    def row_identities(self) -> set[tuple]:
        return {(k, lv, float(fs)) for k, lv, fs
                in zip(self.kinds, self.levels, self.frame_start)}

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (self.schema_version == other.schema_version
                and self.feature_names == other.feature_names
                and np.array_equal(self.frame_start, other.frame_start)
                and np.array_equal(self.kinds, other.kinds)
                and np.array_equal(self.levels, other.levels)
                and np.array_equal(self.avg_rtt, other.avg_rtt)
                and np.array_equal(self.labels, other.labels)
                and np.array_equal(self.features, other.features))


def concat_datasets(parts: list[LabeledDataset]) -> LabeledDataset:
    if not parts:
        raise DomainError("nothing to concatenate")
    first = parts[0]
    for p in parts[1:]:
        if p.schema_version != first.schema_version or p.feature_names != first.feature_names:
            raise FormatError("cannot concatenate datasets with different schemas")
    return LabeledDataset(
        frame_start=np.concatenate([p.frame_start for p in parts]),
        kinds=np.concatenate([p.kinds for p in parts]),
        levels=np.concatenate([p.levels for p in parts]),
        avg_rtt=np.concatenate([p.avg_rtt for p in parts]),
        labels=np.concatenate([p.labels for p in parts]),
        features=np.vstack([p.features for p in parts]),
        schema_version=first.schema_version,
        feature_names=list(first.feature_names))


def dataset_from_trace(trace: "Trace", threshold: Threshold) -> LabeledDataset:
    """Label a simulated trace against the baseline threshold."""
    n = len(trace.frames)
    if n == 0:
        raise DomainError("trace has no frames")
    avg = np.array([rtt.avg_rtt for _, rtt in trace.frames])
    feats = np.vstack([kpi.features for kpi, _ in trace.frames])
    starts = np.array([kpi.frame_start for kpi, _ in trace.frames])
    return LabeledDataset(
        frame_start=starts,
        kinds=np.array([trace.scenario.kind] * n),
        levels=np.array([trace.scenario.level] * n),
        avg_rtt=avg,
        labels=(avg >= threshold.cutoff).astype(np.int8),
        features=feats)


def dataset_to_csv_bytes(ds: LabeledDataset) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIXED_COLUMNS + list(ds.feature_names))
    for i in range(ds.n_rows):
        label = LABEL_ANOMALOUS if ds.labels[i] == 1 else LABEL_NON_ANOMALOUS
        row = [ds.schema_version, repr(float(ds.frame_start[i])),
               str(ds.kinds[i]), str(ds.levels[i]),
               repr(float(ds.avg_rtt[i])), label]
        row.extend(repr(float(v)) for v in ds.features[i])
        writer.writerow(row)
    return buf.getvalue().encode("utf-8")


def write_dataset(ds: LabeledDataset, path) -> None:
    atomic_write_bytes(path, dataset_to_csv_bytes(ds))


def read_dataset(path) -> LabeledDataset:
    with open(path, newline="") as fh:
        return _parse_dataset(fh)


def dataset_from_csv_bytes(data: bytes) -> LabeledDataset:
    return _parse_dataset(io.StringIO(data.decode("utf-8")))


def _parse_dataset(fh) -> LabeledDataset:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("empty dataset file") from None
    expected = FIXED_COLUMNS + list(FEATURE_NAMES)
    if len(header) != len(expected):
        raise FormatError(
            f"dataset has {len(header)} columns, schema {SCHEMA_VERSION} "
            f"defines {len(expected)}")
    if header != expected:
        bad = next(i for i, (a, b) in enumerate(zip(header, expected)) if a != b)
        raise FormatError(f"unexpected column '{header[bad]}' at position {bad}")
    starts, kinds, levels, avgs, labels, feats = [], [], [], [], [], []
    for row_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if row[0] != SCHEMA_VERSION:
            raise FormatError(
                f"row {row_no}: schema version '{row[0]}', "
                f"expected '{SCHEMA_VERSION}'")
        if row[5] not in (LABEL_ANOMALOUS, LABEL_NON_ANOMALOUS):
            raise FormatError(f"row {row_no}: unknown label '{row[5]}'")
        try:
            vec = [float(v) for v in row[6:]]
            start = float(row[1])
            avg = float(row[4])
        except ValueError as exc:
            raise FormatError(f"row {row_no}: {exc}") from None
        if not all(np.isfinite(v) for v in vec) or not np.isfinite(avg):
            raise FormatError(f"row {row_no}: non-finite feature value")
        starts.append(start)
        kinds.append(row[2])
        levels.append(row[3])
        avgs.append(avg)
        labels.append(1 if row[5] == LABEL_ANOMALOUS else 0)
        feats.append(vec)
    if not feats:
        raise FormatError("dataset file has no data rows")
    return LabeledDataset(
        frame_start=np.array(starts), kinds=np.array(kinds),
        levels=np.array(levels), avg_rtt=np.array(avgs),
        labels=np.array(labels, dtype=np.int8),
        features=np.array(feats))
