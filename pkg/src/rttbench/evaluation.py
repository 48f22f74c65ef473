"""Classification matrices, the four metrics, and the evaluation protocol.

Polarity rule: in every test the positive class is the scenario's expected
class. Anomalous (high-level) tests count a correctly predicted anomalous
frame as a true positive; unstressed and low-level tests count a correctly
predicted non-anomalous frame as one. Swapping polarity therefore swaps
tp with tn and fp with fn.

Accuracy is correct-over-total; precision, recall and F1 use the standard
ratios and are reported as absent (None) on zero denominators.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dataset import LabeledDataset, concat_datasets
from .errors import DomainError, ProtocolError
from .labeling import apply_scaling, fit_scaling
from .models import MODEL_KINDS, train
from .stressors import (ScenarioId, TRAINED_KINDS, UNSTRESSED, UNTRAINED_KINDS,
                        all_scenarios)

POLARITY_ANOMALOUS = "anomalous-positive"
POLARITY_NON_ANOMALOUS = "non-anomalous-positive"

CATEGORIES = ("unstressed", "anomalous", "non-anomalous", "overall")


def polarity_for(scenario: ScenarioId) -> str:
    return (POLARITY_ANOMALOUS if scenario.expected_class == "anomalous"
            else POLARITY_NON_ANOMALOUS)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int
    polarity: str = POLARITY_ANOMALOUS

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def swapped(self) -> "ConfusionMatrix":
        """The same outcomes counted under the opposite polarity."""
        other = (POLARITY_NON_ANOMALOUS if self.polarity == POLARITY_ANOMALOUS
                 else POLARITY_ANOMALOUS)
        return ConfusionMatrix(tp=self.tn, fp=self.fn, fn=self.fp, tn=self.tp,
                               polarity=other)

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.polarity != other.polarity:
            raise DomainError("cannot pool confusion matrices of mixed polarity")
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn,
                               self.polarity)


def confusion(predictions, labels, polarity: str) -> ConfusionMatrix:
    """Count outcomes with the positive class given by ``polarity``.

    ``predictions`` and ``labels`` are arrays of 1 (anomalous) / 0.
    """
    pred = np.asarray(predictions)
    lab = np.asarray(labels)
    if pred.shape != lab.shape:
        raise DomainError(
            f"predictions ({pred.shape}) and labels ({lab.shape}) differ")
    if polarity not in (POLARITY_ANOMALOUS, POLARITY_NON_ANOMALOUS):
        raise DomainError(f"unknown polarity '{polarity}'")
    pos = 1 if polarity == POLARITY_ANOMALOUS else 0
    return ConfusionMatrix(
        tp=int(np.sum((lab == pos) & (pred == pos))),
        fp=int(np.sum((lab != pos) & (pred == pos))),
        fn=int(np.sum((lab == pos) & (pred != pos))),
        tn=int(np.sum((lab != pos) & (pred != pos))),
        polarity=polarity)


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float | None
    recall: float | None
    f1: float | None
    row_count: int
    scenario: ScenarioId | None = None
    model: str | None = None


def metrics(cm: ConfusionMatrix, scenario: ScenarioId | None = None,
            model: str | None = None) -> MetricsReport:
    total = cm.total
    if total < 1:
        raise DomainError("empty confusion matrix")
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp > 0 else None
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn > 0 else None
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return MetricsReport(accuracy=(cm.tp + cm.tn) / total,
                         precision=precision, recall=recall, f1=f1,
                         row_count=total, scenario=scenario, model=model)


# --- evaluation protocol --------------------------------------------------

@dataclass
class ScenarioResult:
    scenario: ScenarioId
    model: str
    split: str                    # trained-test | untrained
    cm: ConfusionMatrix
    report: MetricsReport


@dataclass
class EvaluationRun:
    seed: int
    train_fraction: float
    train_rows: int
    train_anomalous: int
    scenario_results: list[ScenarioResult]
    category_results: dict            # model -> category -> MetricsReport
    untrained_kind_results: dict      # model -> kind -> MetricsReport
    # wall-clock timing is reporting-only: excluded from equality and JSON
    train_seconds: dict = field(default_factory=dict, compare=False)
    model_meta: dict = field(default_factory=dict)

    def result_for(self, model: str, kind: str, level: str) -> ScenarioResult:
        for r in self.scenario_results:
            if (r.model == model and r.scenario.kind == kind
                    and r.scenario.level == level):
                return r
        raise KeyError(f"{model}/{kind}/{level}")


def stratified_split(labels: np.ndarray, fraction: float,
                     rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Per-label shuffled split; returns (train_idx, test_idx) sorted."""
    train, test = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        perm = rng.permutation(idx)
        cut = int(round(fraction * idx.size))
        train.append(perm[:cut])
        test.append(perm[cut:])
    return (np.sort(np.concatenate(train)).astype(np.int64),
            np.sort(np.concatenate(test)).astype(np.int64))


def _scenario_rng(seed: int, scenario: ScenarioId) -> np.random.Generator:
    order = {s: i for i, s in enumerate(all_scenarios())}
    return np.random.default_rng(np.random.SeedSequence((seed, order[scenario])))


@dataclass
class ProtocolSplit:
    """Materialized train/test partition for one protocol run."""

    train: LabeledDataset
    tests: dict                    # ScenarioId -> LabeledDataset
    scaling: object
    train_x: np.ndarray            # scaled
    test_x: dict                   # ScenarioId -> scaled features


def build_split(datasets: dict, seed: int, train_fraction: float = 0.8) -> ProtocolSplit:
    """80/20 stratified split of trained scenarios; untrained stay test-only.

    Scaling is fitted on the pooled training rows and applied unchanged to
    every test set.
    """
    needed = [UNSTRESSED] + [ScenarioId(k, lv) for k in TRAINED_KINDS + UNTRAINED_KINDS
                             for lv in ("low", "high")]
    missing = [s.name for s in needed if s not in datasets]
    if missing:
        raise ProtocolError(f"missing scenario datasets: {missing}")

    train_parts = []
    tests = {}
    for scenario, ds in sorted(datasets.items(), key=lambda kv: kv[0].name):
        if scenario.kind in UNTRAINED_KINDS:
            tests[scenario] = ds
            continue
        rng = _scenario_rng(seed, scenario)
        tr_idx, te_idx = stratified_split(ds.labels, train_fraction, rng)
        train_parts.append(ds.subset(tr_idx))
        tests[scenario] = ds.subset(te_idx)
    train = concat_datasets(train_parts)

    train_ids = train.row_identities()
    for scenario in tests:
        if scenario.kind in UNTRAINED_KINDS:
            overlap = train_ids & tests[scenario].row_identities()
            if overlap:
                raise ProtocolError(
                    f"training rows leak into untrained scenario "
                    f"{scenario.name}: {sorted(overlap)[:3]}")

    scaling = fit_scaling(train.features)
    return ProtocolSplit(
        train=train, tests=tests, scaling=scaling,
        train_x=apply_scaling(train.features, scaling),
        test_x={s: apply_scaling(ds.features, scaling) for s, ds in tests.items()})


def train_models(split: ProtocolSplit, kinds, hp: dict, seed: int) -> tuple[dict, dict]:
    """Fit each requested kind on the pooled scaled training rows."""
    if not kinds:
        raise ProtocolError("no model kinds requested")
    unknown = [k for k in kinds if k not in MODEL_KINDS]
    if unknown:
        raise ProtocolError(f"unknown model kinds: {unknown}")
    y = split.train.labels
    models, seconds = {}, {}
    for kind in kinds:
        t0 = time.perf_counter()
        if kind == "oc_svm":
            keep = y == 0
            models[kind] = train(kind, split.train_x[keep], y[keep], hp,
                                 seed, scaling=split.scaling)
        else:
            models[kind] = train(kind, split.train_x, y, hp, seed,
                                 scaling=split.scaling)
        seconds[kind] = time.perf_counter() - t0
    return models, seconds


def evaluate_models(models: dict, split: ProtocolSplit, seed: int,
                    train_fraction: float = 0.8,
                    train_seconds: dict | None = None) -> EvaluationRun:
    """Score every model on every test scenario and build the run report."""
    if not models:
        raise ProtocolError("no trained models to evaluate")
    results = []
    pooled: dict[str, dict[str, ConfusionMatrix]] = {}
    untrained_pooled: dict[str, dict[str, ConfusionMatrix]] = {}

    for kind, tm in models.items():
        for scenario in sorted(split.tests, key=lambda s: s.name):
            ds = split.tests[scenario]
            pred = tm.predict(split.test_x[scenario])
            cm = confusion(pred, ds.labels, polarity_for(scenario))
            split_name = ("untrained" if scenario.kind in UNTRAINED_KINDS
                          else "trained-test")
            results.append(ScenarioResult(
                scenario=scenario, model=kind, split=split_name, cm=cm,
                report=metrics(cm, scenario=scenario, model=kind)))

            if scenario.kind in UNTRAINED_KINDS:
                # per-kind pooling normalizes polarity to anomalous-positive
                cm_pool = cm if cm.polarity == POLARITY_ANOMALOUS else cm.swapped()
                bucket = untrained_pooled.setdefault(kind, {})
                bucket[scenario.kind] = (bucket.get(scenario.kind) or
                                         ConfusionMatrix(0, 0, 0, 0,
                                                         POLARITY_ANOMALOUS)) + cm_pool
            else:
                if scenario == UNSTRESSED:
                    cat = "unstressed"
                elif scenario.level == "high":
                    cat = "anomalous"
                else:
                    cat = "non-anomalous"
                bucket = pooled.setdefault(kind, {})
                bucket[cat] = (bucket.get(cat) or
                               ConfusionMatrix(0, 0, 0, 0, cm.polarity)) + cm

    category_results = {}
    for kind, buckets in pooled.items():
        per_cat = {cat: metrics(cm, model=kind) for cat, cm in buckets.items()}
        overall = ConfusionMatrix(
            tp=sum(cm.tp for cm in buckets.values()),
            fp=sum(cm.fp for cm in buckets.values()),
            fn=sum(cm.fn for cm in buckets.values()),
            tn=sum(cm.tn for cm in buckets.values()),
            polarity=POLARITY_ANOMALOUS)
        per_cat["overall"] = metrics(overall, model=kind)
        category_results[kind] = per_cat

    untrained_kind_results = {
        kind: {k: metrics(cm, model=kind) for k, cm in buckets.items()}
        for kind, buckets in untrained_pooled.items()}

    return EvaluationRun(
        seed=seed, train_fraction=train_fraction,
        train_rows=split.train.n_rows,
        train_anomalous=int((split.train.labels == 1).sum()),
        scenario_results=results,
        category_results=category_results,
        untrained_kind_results=untrained_kind_results,
        train_seconds=train_seconds or {},
        model_meta={k: tm.meta for k, tm in models.items()})


def run_protocol(datasets: dict, kinds, hp: dict, seed: int,
                 train_fraction: float = 0.8) -> tuple[EvaluationRun, dict]:
    """Full protocol: split, train every kind once, evaluate everywhere."""
    split = build_split(datasets, seed, train_fraction)
    models, seconds = train_models(split, kinds, hp, seed)
    run = evaluate_models(models, split, seed, train_fraction, seconds)
    return run, models
