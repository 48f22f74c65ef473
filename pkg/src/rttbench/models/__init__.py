"""Seven anomaly-detection models behind one train/predict interface.

Labels are 1 (anomalous) and 0 (non-anomalous) throughout. All models
consume min-max-scaled feature matrices; a TrainedModel bundles the fitted
state with the scaling it was trained under and enough metadata to
reproduce the fit. Serialization goes through a single .npz layout whose
round trip preserves predictions exactly (float64 arrays are stored raw).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from ..errors import DomainError, FormatError, SchemaError
from ..labeling import FeatureScaling, apply_scaling, scaling_from_dict, scaling_to_dict
from ..util import atomic_write_bytes
from .bayes import GaussianNB
from .kernels import Kernel, PolyKernel, RbfKernel
from .neighbors import KnnClassifier
from .svm import NuSvrModel, OneClassSvmModel, SvcModel
from .trees import DecisionTree, RandomForest, TreeNodes

MODEL_KINDS = ("gnb", "knn", "dt", "rf", "svc", "nu_svr", "oc_svm")
MODEL_FILE_VERSION = "model-v1"
HYPERPARAMS_VERSION = "hyperparams-v1"


def default_hyperparams() -> dict:
    text = resources.files("rttbench.data").joinpath("model_defaults.json").read_text()
    doc = json.loads(text)
    if doc.get("version") != HYPERPARAMS_VERSION:
        raise FormatError(f"model defaults version {doc.get('version')!r}")
    return doc


def _kernel_from_spec(spec: dict) -> Kernel:
    if spec["name"] == "polynomial":
        return PolyKernel(degree=int(spec["degree"]), coef0=spec["coef0"],
                          gamma=spec["gamma"])
    if spec["name"] == "rbf":
        return RbfKernel(gamma=spec["gamma"])
    raise DomainError(f"unknown kernel '{spec['name']}'")


def build_model(kind: str, hp: dict):
    """Instantiate an unfitted model for ``kind`` from its parameter bag."""
    if kind == "gnb":
        return GaussianNB(variance_smoothing=hp["variance_smoothing"])
    if kind == "knn":
        return KnnClassifier(k=int(hp["k"]), metric=hp["distance"],
                             p=hp.get("minkowski_p", 3.0))
    if kind == "dt":
        return DecisionTree(criterion=hp["split_criterion"],
                            max_depth=int(hp["max_depth"]),
                            min_split_weight=int(hp["min_split_weight"]))
    if kind == "rf":
        return RandomForest(tree_count=int(hp["tree_count"]),
                            criterion=hp["split_criterion"],
                            max_depth=int(hp["max_depth"]),
                            min_split_weight=int(hp["min_split_weight"]),
                            features_per_split=hp["features_per_split"],
                            bootstrap=bool(hp["bootstrap"]))
    if kind == "svc":
        return SvcModel(kernel=_kernel_from_spec(hp["kernel"]), c=hp["C"],
                        class_weights=bool(hp["class_weights"]),
                        tol=hp.get("tol", 1e-3),
                        max_iter=int(hp.get("max_iter", 200_000)))
    if kind == "nu_svr":
        return NuSvrModel(kernel=_kernel_from_spec(hp["kernel"]), c=hp["C"],
                          nu=hp["nu"], cutoff=hp.get("decision_cutoff", 0.5),
                          tol=hp.get("tol", 1e-2),
                          max_iter=int(hp.get("max_iter", 300_000)))
    if kind == "oc_svm":
        return OneClassSvmModel(kernel=_kernel_from_spec(hp["kernel"]),
                                nu=hp["nu"], tol=hp.get("tol", 1e-3),
                                max_iter=int(hp.get("max_iter", 200_000)))
    raise DomainError(f"unknown model kind '{kind}'")


@dataclass
class TrainedModel:
    kind: str
    model: object
    scaling: FeatureScaling | None
    hyperparams: dict
    meta: dict

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Binary labels for already-scaled feature rows (1 = anomalous)."""
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        return self.model.predict(x)

    def predict_raw(self, features: np.ndarray) -> np.ndarray:
        """Scale raw feature rows with the training scaling, then predict."""
        if self.scaling is None:
            raise SchemaError("model carries no scaling reference")
        return self.predict(apply_scaling(np.atleast_2d(features), self.scaling))


def train(kind: str, x_scaled: np.ndarray, y: np.ndarray, hp: dict,
          seed: int, scaling: FeatureScaling | None = None) -> TrainedModel:
    """Fit one model kind on scaled rows.

    oc_svm must be given only non-anomalous rows (contract error otherwise);
    every other kind needs both classes present.
    """
    if kind not in MODEL_KINDS:
        raise DomainError(f"unknown model kind '{kind}'")
    x = np.asarray(x_scaled, dtype=np.float64)
    y = np.asarray(y, dtype=np.int8)
    if x.shape[0] == 0:
        raise DomainError("empty training data")
    params = hp[kind] if kind in hp and isinstance(hp.get(kind), dict) else hp
    model = build_model(kind, params)
    if kind == "rf":
        model.fit(x, y, rng=np.random.default_rng(seed))
    elif kind == "oc_svm":
        model.fit(x, y)
    else:
        model.fit(x, y)
    meta = {
        "seed": seed,
        "rows": int(x.shape[0]),
        "anomalous_rows": int((y == 1).sum()),
        "non_anomalous_rows": int((y == 0).sum()),
    }
    return TrainedModel(kind=kind, model=model, scaling=scaling,
                        hyperparams=params, meta=meta)


# --- serialization -------------------------------------------------------

def _tree_state(prefix: str, tree: DecisionTree) -> dict:
    nd = tree.nodes
    return {f"{prefix}feature": nd.feature, f"{prefix}threshold": nd.threshold,
            f"{prefix}left": nd.left, f"{prefix}right": nd.right,
            f"{prefix}label": nd.label}


def _tree_from_state(prefix: str, state, params: dict) -> DecisionTree:
    tree = DecisionTree(criterion=params["split_criterion"],
                        max_depth=int(params["max_depth"]),
                        min_split_weight=int(params["min_split_weight"]))
    tree.nodes = TreeNodes(feature=state[f"{prefix}feature"],
                           threshold=state[f"{prefix}threshold"],
                           left=state[f"{prefix}left"],
                           right=state[f"{prefix}right"],
                           label=state[f"{prefix}label"])
    tree.n_features_ = int(state["n_features"])
    return tree


def _model_state(tm: TrainedModel) -> dict:
    m = tm.model
    if tm.kind == "gnb":
        return {"classes": m.classes_, "priors": m.priors_,
                "means": m.means_, "vars": m.vars_}
    if tm.kind == "knn":
        return {"train_x": m._x, "train_y": m._y}
    if tm.kind == "dt":
        return {"n_features": np.int64(m.n_features_), **_tree_state("t0_", m)}
    if tm.kind == "rf":
        state = {"n_trees": np.int64(len(m.trees)),
                 "n_features": np.int64(m.trees[0].n_features_)}
        for ti, tree in enumerate(m.trees):
            state.update(_tree_state(f"t{ti}_", tree))
        return state
    if tm.kind in ("svc", "nu_svr"):
        return {"support_x": m.support_x_, "dual_coef": m.dual_coef_,
                "bias": np.float64(m.bias_)}
    if tm.kind == "oc_svm":
        return {"support_x": m.support_x_, "dual_coef": m.dual_coef_,
                "rho": np.float64(m.rho_)}
    raise DomainError(f"unknown model kind '{tm.kind}'")


def _model_from_state(kind: str, params: dict, state) -> object:
    if kind == "gnb":
        m = GaussianNB(variance_smoothing=params["variance_smoothing"])
        m.classes_ = state["classes"]
        m.priors_ = state["priors"]
        m.means_ = state["means"]
        m.vars_ = state["vars"]
        return m
    if kind == "knn":
        m = build_model("knn", params)
        m._x = state["train_x"]
        m._y = state["train_y"]
        return m
    if kind == "dt":
        return _tree_from_state("t0_", state, params)
    if kind == "rf":
        m = build_model("rf", params)
        m.trees = [_tree_from_state(f"t{ti}_", state, params)
                   for ti in range(int(state["n_trees"]))]
        return m
    if kind in ("svc", "nu_svr", "oc_svm"):
        m = build_model(kind, params)
        m.support_x_ = state["support_x"]
        m.dual_coef_ = state["dual_coef"]
        if kind == "oc_svm":
            m.rho_ = float(state["rho"])
        else:
            m.bias_ = float(state["bias"])
        return m
    raise DomainError(f"unknown model kind '{kind}'")


def save_model(tm: TrainedModel, path) -> None:
    import io

    header = {
        "version": MODEL_FILE_VERSION,
        "kind": tm.kind,
        "hyperparams": tm.hyperparams,
        "meta": tm.meta,
        "scaling": scaling_to_dict(tm.scaling) if tm.scaling else None,
    }
    buf = io.BytesIO()
    np.savez(buf, header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
             **_model_state(tm))
    atomic_write_bytes(path, buf.getvalue())


def load_model(path) -> TrainedModel:
    with np.load(path) as state:
        header = json.loads(bytes(state["header"]).decode())
        if header.get("version") != MODEL_FILE_VERSION:
            raise FormatError(
                f"model file version {header.get('version')!r}, "
                f"expected {MODEL_FILE_VERSION!r}")
        kind = header["kind"]
        params = header["hyperparams"]
        model = _model_from_state(kind, params, state)
    scaling = scaling_from_dict(header["scaling"]) if header["scaling"] else None
    return TrainedModel(kind=kind, model=model, scaling=scaling,
                        hyperparams=params, meta=header["meta"])
