import numpy as np
import pytest

from rttbench.errors import DomainError
from rttbench.models.kernels import PolyKernel, RbfKernel
from rttbench.models.svm import NuSvrModel, OneClassSvmModel, SvcModel


def blobs(n=80, gap=2.0, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    x0 = rng.normal(0.0, 0.25, (n, dim))
    x1 = rng.normal(gap, 0.25, (n, dim))
    x = np.vstack([x0, x1])
    y = np.r_[np.zeros(n, dtype=np.int8), np.ones(n, dtype=np.int8)]
    return x, y


def test_two_point_toy_margin_signs():
    x = np.array([[0.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1], dtype=np.int8)
    model = SvcModel(kernel=PolyKernel(degree=1, coef0=0.0, gamma=1.0),
                     c=1.0, class_weights=False).fit(x, y)
    decisions = model.decision_function(x)
    assert np.array_equal(model.predict(x), y)
    # unit margins on the two support vectors with the conventional signs
    assert decisions[0] == pytest.approx(-1.0, abs=1e-6)
    assert decisions[1] == pytest.approx(1.0, abs=1e-6)


def test_svc_objective_non_increasing():
    x, y = blobs()
    model = SvcModel(kernel=PolyKernel(degree=3, coef0=1.0, gamma=0.25),
                     c=10.0).fit(x, y, record_objective=True)
    trace = model.result_.objective_trace
    assert trace.size >= 1
    assert np.all(np.diff(trace) <= 1e-9)
    assert model.result_.converged


def test_svc_separable_support_vectors_classified():
    x, y = blobs()
    model = SvcModel(kernel=PolyKernel(degree=3, coef0=1.0, gamma=0.25),
                     c=10.0).fit(x, y)
    assert (model.predict(x) == y).all()
    anom_sv = model.support_x_[model.dual_coef_ > 0]
    assert anom_sv.shape[0] > 0
    assert np.all(model.predict(anom_sv) == 1)


def test_svc_single_class_rejected():
    with pytest.raises(DomainError, match="single class"):
        SvcModel().fit(np.ones((4, 2)), np.zeros(4, dtype=np.int8))


def test_svc_class_weights_change_fit():
    rng = np.random.default_rng(3)
    x = np.vstack([rng.normal(0, 1.0, (200, 2)), rng.normal(1.2, 1.0, (20, 2))])
    y = np.r_[np.zeros(200, dtype=np.int8), np.ones(20, dtype=np.int8)]
    kern = PolyKernel(degree=3, coef0=1.0, gamma=0.5)
    weighted = SvcModel(kernel=kern, c=1.0, class_weights=True).fit(x, y)
    plain = SvcModel(kernel=kern, c=1.0, class_weights=False).fit(x, y)
    # weighting must recover more of the minority (anomalous) class
    recall_w = (weighted.predict(x[y == 1]) == 1).mean()
    recall_p = (plain.predict(x[y == 1]) == 1).mean()
    assert recall_w >= recall_p


def test_nu_svr_objective_and_base_rate():
    x, y = blobs(seed=2)
    model = NuSvrModel(kernel=PolyKernel(degree=7, coef0=1.0, gamma=0.25),
                       c=1.0, nu=0.3).fit(x, y, record_objective=True)
    trace = model.result_.objective_trace
    assert np.all(np.diff(trace) <= 1e-9)
    base_rate = max(y.mean(), 1.0 - y.mean())
    assert (model.predict(x) == y).mean() >= base_rate


def test_nu_svr_regression_targets():
    x, y = blobs(seed=4)
    model = NuSvrModel(kernel=PolyKernel(degree=7, coef0=1.0, gamma=0.25),
                       c=1.0, nu=0.3).fit(x, y)
    out = model.regression_output(x)
    assert np.median(out[y == 0]) < 0.5 < np.median(out[y == 1])


def test_nu_svr_invalid_nu():
    with pytest.raises(DomainError):
        NuSvrModel(nu=0.0).fit(*blobs())


def test_oc_svm_rejects_anomalous_rows():
    x, y = blobs()
    with pytest.raises(DomainError, match="non-anomalous"):
        OneClassSvmModel().fit(x, y)


def test_oc_svm_novelty_contract():
    rng = np.random.default_rng(5)
    x = rng.normal(0.0, 0.3, (150, 4))
    model = OneClassSvmModel(kernel=RbfKernel(gamma=0.5), nu=0.1).fit(
        x, np.zeros(150, dtype=np.int8), record_objective=True)
    assert np.all(np.diff(model.result_.objective_trace) <= 1e-9)
    far = np.full((5, 4), 9.0)
    assert np.all(model.predict(far) == 1)
    # the nu parameter bounds the rejected fraction of training data
    assert model.predict(x).mean() <= 0.25


def test_oc_svm_nu_fraction_tracks():
    rng = np.random.default_rng(6)
    x = rng.normal(0.0, 0.3, (300, 3))
    for nu in (0.05, 0.2):
        model = OneClassSvmModel(kernel=RbfKernel(gamma=1.0), nu=nu).fit(x)
        rejected = model.predict(x).mean()
        assert abs(rejected - nu) < 0.1


def test_solvers_deterministic():
    x, y = blobs(seed=8)
    for cls in (lambda: SvcModel(c=5.0),
                lambda: NuSvrModel(c=1.0, nu=0.3)):
        a = cls().fit(x, y).predict(x)
        b = cls().fit(x, y).predict(x)
        assert np.array_equal(a, b)
