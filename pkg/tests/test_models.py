import numpy as np
import pytest

from rttbench.errors import DomainError
from rttbench.labeling import fit_scaling
from rttbench.models import (MODEL_KINDS, default_hyperparams, load_model,
                             save_model, train)

HP = default_hyperparams()


def training_data(n=120, seed=0):
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(0.0, 0.4, (n, 24))
    x1 = rng.uniform(0.6, 1.0, (n, 24))
    x = np.vstack([x0, x1])
    y = np.r_[np.zeros(n, dtype=np.int8), np.ones(n, dtype=np.int8)]
    return x, y


def train_kind(kind, x, y, seed=7):
    if kind == "oc_svm":
        keep = y == 0
        return train(kind, x[keep], y[keep], HP, seed)
    return train(kind, x, y, HP, seed)


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_train_predict_deterministic(kind):
    x, y = training_data()
    queries = np.random.default_rng(1).uniform(0, 1, (60, 24))
    a = train_kind(kind, x, y).predict(queries)
    b = train_kind(kind, x, y).predict(queries)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("kind", ["gnb", "knn", "svc", "nu_svr", "oc_svm"])
def test_permutation_invariance(kind):
    x, y = training_data()
    queries = np.random.default_rng(2).uniform(0, 1, (60, 24))
    base = train_kind(kind, x, y).predict(queries)
    perm = np.random.default_rng(3).permutation(x.shape[0])
    shuffled = train_kind(kind, x[perm], y[perm]).predict(queries)
    assert np.array_equal(base, shuffled)


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_serialization_round_trip_exact_predictions(kind, tmp_path):
    x, y = training_data(seed=4)
    scaling = fit_scaling(x)
    tm = train_kind(kind, x, y)
    tm.scaling = scaling
    queries = np.random.default_rng(5).uniform(-0.2, 1.2, (80, 24))
    before = tm.predict(queries)
    path = tmp_path / f"{kind}.npz"
    save_model(tm, path)
    again = load_model(path)
    assert again.kind == kind
    assert np.array_equal(again.predict(queries), before)
    assert np.array_equal(again.scaling.mins, scaling.mins)
    assert again.meta == tm.meta


def test_oc_svm_contract_via_train():
    x, y = training_data()
    with pytest.raises(DomainError, match="non-anomalous"):
        train("oc_svm", x, y, HP, 0)


def test_single_class_rejected_for_supervised():
    x, _ = training_data()
    y = np.zeros(x.shape[0], dtype=np.int8)
    for kind in ("gnb", "knn", "dt", "rf", "svc"):
        with pytest.raises(DomainError):
            train(kind, x, y, HP, 0)


def test_unknown_kind():
    x, y = training_data()
    with pytest.raises(DomainError, match="unknown model kind"):
        train("xgboost", x, y, HP, 0)


def test_predict_raw_applies_scaling():
    x, y = training_data()
    raw = x * 50.0 + 10.0
    scaling = fit_scaling(raw)
    tm = train("dt", x, y, HP, 0, scaling=scaling)
    assert np.array_equal(tm.predict_raw(raw), tm.predict(x))


def test_default_hyperparams_cover_all_kinds():
    for kind in MODEL_KINDS:
        assert kind in HP
    assert HP["nu_svr"]["kernel"]["degree"] == 7
    assert HP["oc_svm"]["kernel"]["name"] == "rbf"
    assert HP["knn"]["distance"] == "manhattan"
    assert HP["dt"]["split_criterion"] == "entropy"
    assert HP["rf"]["split_criterion"] == "gini"
