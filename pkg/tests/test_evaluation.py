import numpy as np
import pytest

from rttbench.dataset import LabeledDataset
from rttbench.errors import DomainError, ProtocolError
from rttbench.evaluation import (POLARITY_ANOMALOUS, POLARITY_NON_ANOMALOUS,
                                 ConfusionMatrix, build_split, confusion,
                                 evaluate_models, metrics, polarity_for,
                                 run_protocol, stratified_split, train_models)
from rttbench.models import TrainedModel, default_hyperparams
from rttbench.schema import N_FEATURES
from rttbench.stressors import ScenarioId, UNSTRESSED, all_scenarios


def test_anomalous_test_counting():
    labels = np.ones(100, dtype=np.int8)
    preds = labels.copy()
    preds[0] = 0
    cm = confusion(preds, labels, POLARITY_ANOMALOUS)
    assert (cm.tp, cm.fp, cm.fn, cm.tn) == (99, 0, 1, 0)


def test_non_anomalous_perfect_case():
    labels = np.zeros(50, dtype=np.int8)
    cm = confusion(labels, labels, POLARITY_NON_ANOMALOUS)
    assert (cm.tp, cm.fp, cm.fn, cm.tn) == (50, 0, 0, 0)


def test_mixed_purity_perfect_predictor():
    labels = np.r_[np.ones(97, dtype=np.int8), np.zeros(3, dtype=np.int8)]
    cm = confusion(labels, labels, POLARITY_ANOMALOUS)
    assert (cm.tp, cm.fp, cm.fn, cm.tn) == (97, 0, 0, 3)


def test_confusion_contracts():
    with pytest.raises(DomainError):
        confusion(np.ones(3), np.ones(4), POLARITY_ANOMALOUS)
    with pytest.raises(DomainError):
        confusion(np.ones(3), np.ones(3), "positive")


def test_polarity_swap_swaps_cells():
    rng = np.random.default_rng(0)
    preds = rng.integers(0, 2, 200).astype(np.int8)
    labels = rng.integers(0, 2, 200).astype(np.int8)
    a = confusion(preds, labels, POLARITY_ANOMALOUS)
    b = confusion(preds, labels, POLARITY_NON_ANOMALOUS)
    assert (a.tp, a.fp, a.fn, a.tn) == (b.tn, b.fn, b.fp, b.tp)
    assert a.swapped() == b


def test_conservation():
    rng = np.random.default_rng(1)
    preds = rng.integers(0, 2, 321).astype(np.int8)
    labels = rng.integers(0, 2, 321).astype(np.int8)
    cm = confusion(preds, labels, POLARITY_ANOMALOUS)
    assert cm.total == 321


def test_metrics_symmetric_example():
    rep = metrics(ConfusionMatrix(tp=99, fp=1, fn=1, tn=99))
    assert rep.accuracy == pytest.approx(0.99)
    assert rep.precision == pytest.approx(0.99)
    assert rep.recall == pytest.approx(0.99)
    assert rep.f1 == pytest.approx(0.99)


def test_metrics_zero_denominators():
    rep = metrics(ConfusionMatrix(tp=0, fp=0, fn=10, tn=90))
    assert rep.accuracy == pytest.approx(0.9)
    assert rep.precision is None
    assert rep.recall == 0.0
    assert rep.f1 is None


def test_metrics_pure_positive_example():
    rep = metrics(ConfusionMatrix(tp=97, fp=0, fn=3, tn=0))
    assert rep.recall == pytest.approx(0.97)
    assert rep.precision == pytest.approx(1.0)
    assert rep.f1 == pytest.approx(2 * 0.97 / 1.97)
    assert rep.f1 == pytest.approx(0.9847715736040609, abs=1e-12)


def test_metrics_empty_rejected():
    with pytest.raises(DomainError):
        metrics(ConfusionMatrix(0, 0, 0, 0))


def brute_force_metrics(preds, labels, positive):
    tp = sum(1 for p, l in zip(preds, labels) if l == positive and p == positive)
    fp = sum(1 for p, l in zip(preds, labels) if l != positive and p == positive)
    fn = sum(1 for p, l in zip(preds, labels) if l == positive and p != positive)
    tn = sum(1 for p, l in zip(preds, labels) if l != positive and p != positive)
    total = len(preds)
    acc = (tp + tn) / total
    prec = tp / (tp + fp) if tp + fp else None
    rec = tp / (tp + fn) if tp + fn else None
    f1 = (2 * prec * rec / (prec + rec)
          if prec is not None and rec is not None and prec + rec > 0 else None)
    return (tp, fp, fn, tn), acc, prec, rec, f1


def test_brute_force_oracle_1000_cases():
    rng = np.random.default_rng(9)
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        preds = rng.integers(0, 2, n).astype(np.int8)
        labels = rng.integers(0, 2, n).astype(np.int8)
        polarity = POLARITY_ANOMALOUS if rng.random() < 0.5 else POLARITY_NON_ANOMALOUS
        positive = 1 if polarity == POLARITY_ANOMALOUS else 0
        cm = confusion(preds, labels, polarity)
        cells, acc, prec, rec, f1 = brute_force_metrics(preds.tolist(),
                                                        labels.tolist(), positive)
        assert (cm.tp, cm.fp, cm.fn, cm.tn) == cells
        rep = metrics(cm)
        assert abs(rep.accuracy - acc) <= 1e-12
        for got, want in ((rep.precision, prec), (rep.recall, rec), (rep.f1, f1)):
            if want is None:
                assert got is None
            else:
                assert abs(got - want) <= 1e-12
        if rep.precision is not None and rep.recall is not None and rep.f1 is not None:
            lo = min(rep.precision, rep.recall) - 1e-12
            hi = max(rep.precision, rep.recall) + 1e-12
            assert lo <= rep.f1 <= hi


def test_polarity_for_scenarios():
    assert polarity_for(ScenarioId("udp", "high")) == POLARITY_ANOMALOUS
    assert polarity_for(ScenarioId("udp", "low")) == POLARITY_NON_ANOMALOUS
    assert polarity_for(UNSTRESSED) == POLARITY_NON_ANOMALOUS


def test_stratified_split_fractions():
    rng = np.random.default_rng(0)
    labels = np.r_[np.zeros(80, dtype=np.int8), np.ones(20, dtype=np.int8)]
    train_idx, test_idx = stratified_split(labels, 0.8, rng)
    assert len(set(train_idx) & set(test_idx)) == 0
    assert len(train_idx) + len(test_idx) == 100
    assert (labels[train_idx] == 1).sum() == 16
    assert (labels[test_idx] == 1).sum() == 4


# --- protocol over synthetic datasets --------------------------------------

def synthetic_dataset(scenario, n=60, seed=0):
    """Cleanly separable toy: anomalous rows live in a different feature box."""
    rng = np.random.default_rng(seed)
    anomalous = scenario.expected_class == "anomalous"
    frac = 0.98 if scenario.kind != "none" else 0.995
    labels = (rng.random(n) < (frac if anomalous else 1.0 - frac)).astype(np.int8)
    feats = np.where(labels[:, None] == 1,
                     rng.uniform(0.7, 1.0, (n, N_FEATURES)),
                     rng.uniform(0.0, 0.3, (n, N_FEATURES)))
    return LabeledDataset(
        frame_start=np.arange(n) * 6.0,
        kinds=np.array([scenario.kind] * n),
        levels=np.array([scenario.level] * n),
        avg_rtt=np.where(labels == 1, 20.0, 4.7),
        labels=labels,
        features=feats)


def all_synthetic(n=60):
    return {s: synthetic_dataset(s, n=n, seed=10 + i)
            for i, s in enumerate(all_scenarios())}


def test_missing_scenarios_is_protocol_error():
    datasets = all_synthetic()
    del datasets[ScenarioId("udp", "high")]
    with pytest.raises(ProtocolError, match="udp-high"):
        build_split(datasets, seed=1)


def test_split_hygiene_on_identity_collision():
    datasets = all_synthetic()
    collided = datasets[ScenarioId("rawudp", "high")]
    collided.kinds[:] = "udp"   # claim the trained scenario's identity triplets
    collided.levels[:] = "high"
    collided.frame_start[:] = datasets[ScenarioId("udp", "high")].frame_start
    with pytest.raises(ProtocolError, match="leak"):
        build_split(datasets, seed=1)


def test_protocol_perfect_model_upper_bound():
    datasets = all_synthetic()
    run, models = run_protocol(datasets, ["dt"], default_hyperparams(), seed=3)
    # separable toy: the tree is a perfect predictor everywhere
    for r in run.scenario_results:
        assert r.report.f1 == pytest.approx(1.0)
        assert r.report.accuracy == pytest.approx(1.0)
    assert run.category_results["dt"]["overall"].accuracy == pytest.approx(1.0)


class ConstantModel:
    def __init__(self, label):
        self.label = label

    def predict(self, x):
        return np.full(np.atleast_2d(x).shape[0], self.label, dtype=np.int8)


def test_always_anomalous_predictor_matches_purity():
    # a constant-anomalous predictor is correct exactly on the rows labeled
    # anomalous: accuracy equals each test set's anomalous fraction (the
    # purity for high-level tests, one minus it for low-level tests)
    datasets = all_synthetic(n=200)
    split = build_split(datasets, seed=4)
    stub = {"dt": TrainedModel(kind="dt", model=ConstantModel(1), scaling=None,
                               hyperparams={}, meta={})}
    run = evaluate_models(stub, split, seed=4)
    for r in run.scenario_results:
        ds = split.tests[r.scenario]
        anom_frac = float(np.mean(ds.labels == 1))
        assert r.report.accuracy == pytest.approx(anom_frac)


def test_train_models_requires_kinds():
    datasets = all_synthetic()
    split = build_split(datasets, seed=5)
    with pytest.raises(ProtocolError):
        train_models(split, [], default_hyperparams(), 5)
    with pytest.raises(ProtocolError, match="unknown"):
        train_models(split, ["dt", "catboost"], default_hyperparams(), 5)


def test_evaluate_requires_models():
    datasets = all_synthetic()
    split = build_split(datasets, seed=6)
    with pytest.raises(ProtocolError):
        evaluate_models({}, split, seed=6)
