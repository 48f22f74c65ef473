import math

import numpy as np
import pytest

from rttbench.errors import DomainError, SchemaError
from rttbench.models.bayes import GaussianNB


def gaussian_logpdf(x, mu, var):
    return -0.5 * (math.log(2.0 * math.pi * var) + (x - mu) ** 2 / var)


def test_equal_means_unequal_variances():
    # two classes share the mean but differ in spread; the posterior must
    # still separate a point at the shared mean (tight class wins there)
    rng = np.random.default_rng(0)
    n = 4000
    x0 = rng.normal(0.0, 0.5, (n, 1))
    x1 = rng.normal(0.0, 3.0, (n, 1))
    x = np.vstack([x0, x1])
    y = np.r_[np.zeros(n, dtype=np.int8), np.ones(n, dtype=np.int8)]
    model = GaussianNB(variance_smoothing=1e-9).fit(x, y)
    assert model.predict(np.array([[0.0]]))[0] == 0
    assert model.predict(np.array([[6.0]]))[0] == 1
    assert model.predict(np.array([[-6.0]]))[0] == 1


def test_posterior_matches_hand_oracle():
    x = np.array([[1.0, 2.0], [2.0, 1.0], [1.5, 1.5],
                  [5.0, 6.0], [6.0, 5.0], [5.5, 5.5], [5.0, 5.0]])
    y = np.array([0, 0, 0, 1, 1, 1, 1], dtype=np.int8)
    smoothing = 1e-3
    model = GaussianNB(variance_smoothing=smoothing).fit(x, y)
    boost = smoothing * float(np.var(x, axis=0).max())
    queries = np.array([[1.2, 1.9], [5.2, 4.9], [3.0, 3.0]])
    got = model.log_posterior(queries)
    for qi, q in enumerate(queries):
        for ci, cls in enumerate((0, 1)):
            rows = x[y == cls]
            prior = (y == cls).mean()
            want = math.log(prior)
            for f in range(2):
                mu = rows[:, f].mean()
                var = rows[:, f].var() + boost
                want += gaussian_logpdf(q[f], mu, var)
            assert got[qi, ci] == pytest.approx(want, rel=1e-12)


def test_smoothing_uses_max_feature_variance():
    # one near-constant feature, one wide: without smoothing, the constant
    # feature's tiny variance would dominate the log-likelihood
    rng = np.random.default_rng(1)
    n = 500
    wide = rng.normal(0, 10.0, (n, 1))
    const = np.full((n, 1), 3.0) + rng.normal(0, 1e-9, (n, 1))
    x = np.hstack([const, wide])
    y = (wide.ravel() > 0).astype(np.int8)
    model = GaussianNB(variance_smoothing=1e-3).fit(x, y)
    assert np.all(model.vars_[:, 0] >= 1e-3 * np.var(wide) * (1.0 - 1e-12))
    acc = (model.predict(x) == y).mean()
    assert acc > 0.95


def test_single_class_rejected():
    with pytest.raises(DomainError):
        GaussianNB().fit(np.ones((5, 2)), np.ones(5, dtype=np.int8))


def test_schema_mismatch():
    model = GaussianNB().fit(np.random.default_rng(0).normal(size=(10, 3)),
                             np.array([0, 1] * 5, dtype=np.int8))
    with pytest.raises(SchemaError):
        model.predict(np.ones((2, 4)))


def test_deterministic():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(100, 4))
    y = (x[:, 0] > 0).astype(np.int8)
    a = GaussianNB().fit(x, y).predict(x)
    b = GaussianNB().fit(x, y).predict(x)
    assert np.array_equal(a, b)
