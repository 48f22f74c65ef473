"""Decision tree (CART-style) and random forest.

A split is only accepted when it strictly decreases the weighted impurity
of the node, so every internal node of a grown tree is informative. Trees
are stored as flat arrays (feature, threshold, child links, leaf label),
which keeps prediction vectorized and serialization trivial. A forest with
one tree, no bootstrap and all features per split degenerates to exactly
the plain decision tree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, SchemaError
from .impurity import IMPURITY_FUNCS

_MIN_GAIN = 1e-12


def _impurity_curve(criterion: str, left_pos, left_n, total_pos, total_n):
    """Weighted child impurity for every candidate split position.

    ``left_pos``/``left_n`` are prefix counts of anomalous rows and rows on
    the left side of each candidate. Vectorized binary-class entropy/gini.
    """
    right_pos = total_pos - left_pos
    right_n = total_n - left_n
    if criterion == "gini":
        def node_imp(pos, n):
            with np.errstate(invalid="ignore", divide="ignore"):
                p = pos / n
            imp = 1.0 - p * p - (1.0 - p) ** 2
            return np.where(n > 0, imp, 0.0)
    else:
        def node_imp(pos, n):
            with np.errstate(invalid="ignore", divide="ignore"):
                p = pos / n
                q = 1.0 - p
                term = -(np.where(p > 0, p * np.log2(p, where=p > 0), 0.0)
                         + np.where(q > 0, q * np.log2(q, where=q > 0), 0.0))
            return np.where(n > 0, term, 0.0)
    return (left_n * node_imp(left_pos, left_n)
            + right_n * node_imp(right_pos, right_n)) / total_n


@dataclass
class TreeNodes:
    """Flat node storage; leaves have feature == -1 and carry the label."""

    feature: np.ndarray = field(default_factory=lambda: np.empty(0, np.int32))
    threshold: np.ndarray = field(default_factory=lambda: np.empty(0, np.float64))
    left: np.ndarray = field(default_factory=lambda: np.empty(0, np.int32))
    right: np.ndarray = field(default_factory=lambda: np.empty(0, np.int32))
    label: np.ndarray = field(default_factory=lambda: np.empty(0, np.int8))


@dataclass
class DecisionTree:
    criterion: str = "entropy"
    max_depth: int = 12
    min_split_weight: int = 8

    def __post_init__(self):
        if self.criterion not in IMPURITY_FUNCS:
            raise DomainError(f"unknown split criterion '{self.criterion}'")
        if self.max_depth < 1:
            raise DomainError("max_depth must be >= 1")
        if self.min_split_weight < 2:
            raise DomainError("min_split_weight must be >= 2")
        self.nodes = None
        self.n_features_ = None

    def fit(self, x: np.ndarray, y: np.ndarray,
            rng: np.random.Generator | None = None,
            features_per_split: int | None = None,
            single_class_ok: bool = False):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int8)
        if x.shape[0] != y.shape[0] or x.shape[0] == 0:
            raise DomainError("empty or mismatched training data")
        if not single_class_ok and np.unique(y).size < 2:
            raise DomainError("decision tree training data has a single class")
        self.n_features_ = x.shape[1]
        self._m = features_per_split or self.n_features_
        self._rng = rng
        rec = {"feature": [], "threshold": [], "left": [], "right": [], "label": []}
        self._grow(x, y, np.arange(x.shape[0]), 0, rec)
        self.nodes = TreeNodes(
            feature=np.array(rec["feature"], np.int32),
            threshold=np.array(rec["threshold"], np.float64),
            left=np.array(rec["left"], np.int32),
            right=np.array(rec["right"], np.int32),
            label=np.array(rec["label"], np.int8))
        self._rng = None
        return self

    def _node_impurity(self, y_node: np.ndarray) -> float:
        pos = int(y_node.sum())
        return IMPURITY_FUNCS[self.criterion]([y_node.size - pos, pos])

    def _best_split(self, x, y, idx):
        """(weighted impurity, feature, threshold) of the best candidate.

        Features are scanned in ascending index with strict improvement,
        so ties resolve to the lowest feature index and, within a feature,
        argmin takes the lowest threshold. Deterministic.
        """
        n = idx.size
        total_pos = int(y[idx].sum())
        if self._m < self.n_features_:
            feats = np.sort(self._rng.choice(self.n_features_, size=self._m,
                                             replace=False))
        else:
            feats = range(self.n_features_)
        best = (math.inf, -1, 0.0)
        for f in feats:
            col = x[idx, f]
            order = np.argsort(col, kind="stable")
            vals = col[order]
            labels = y[idx][order]
            distinct = np.flatnonzero(vals[1:] > vals[:-1])
            if distinct.size == 0:
                continue
            left_n = (distinct + 1).astype(np.float64)
            left_pos = np.cumsum(labels, dtype=np.float64)[distinct]
            curve = _impurity_curve(self.criterion, left_pos, left_n,
                                    float(total_pos), float(n))
            k = int(np.argmin(curve))
            if curve[k] < best[0]:
                thr = 0.5 * (vals[distinct[k]] + vals[distinct[k] + 1])
                best = (float(curve[k]), int(f), float(thr))
        return best

    def _grow(self, x, y, idx, depth, rec):
        node_id = len(rec["feature"])
        for key in rec:
            rec[key].append(0)
        y_node = y[idx]
        pos = int(y_node.sum())
        majority = 1 if 2 * pos >= y_node.size else 0  # tie goes anomalous

        def as_leaf():
            rec["feature"][node_id] = -1
            rec["threshold"][node_id] = 0.0
            rec["left"][node_id] = -1
            rec["right"][node_id] = -1
            rec["label"][node_id] = majority

        if (depth >= self.max_depth or idx.size < self.min_split_weight
                or pos == 0 or pos == y_node.size):
            as_leaf()
            return node_id
        parent_imp = self._node_impurity(y_node)
        child_imp, f, thr = self._best_split(x, y, idx)
        if not child_imp < parent_imp - _MIN_GAIN:
            as_leaf()
            return node_id
        mask = x[idx, f] <= thr
        rec["feature"][node_id] = f
        rec["threshold"][node_id] = thr
        rec["label"][node_id] = majority
        rec["left"][node_id] = self._grow(x, y, idx[mask], depth + 1, rec)
        rec["right"][node_id] = self._grow(x, y, idx[~mask], depth + 1, rec)
        return node_id

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1] != self.n_features_:
            raise SchemaError("query feature count does not match training data")
        nd = self.nodes
        pos = np.zeros(x.shape[0], dtype=np.int32)
        active = nd.feature[pos] >= 0
        while np.any(active):
            rows = np.flatnonzero(active)
            cur = pos[rows]
            go_left = x[rows, nd.feature[cur]] <= nd.threshold[cur]
            pos[rows] = np.where(go_left, nd.left[cur], nd.right[cur])
            active[rows] = nd.feature[pos[rows]] >= 0
        return nd.label[pos]

    @property
    def depth(self) -> int:
        def walk(i):
            if self.nodes.feature[i] < 0:
                return 0
            return 1 + max(walk(self.nodes.left[i]), walk(self.nodes.right[i]))
        return walk(0)


def resolve_features_per_split(spec_value, n_features: int) -> int:
    if spec_value in (None, "all"):
        return n_features
    if spec_value == "sqrt":
        return max(1, round(math.sqrt(n_features)))
    if spec_value == "log2":
        return max(1, int(math.log2(n_features)))
    m = int(spec_value)
    if not 1 <= m <= n_features:
        raise DomainError(f"features_per_split {m} outside [1, {n_features}]")
    return m


@dataclass
class RandomForest:
    tree_count: int = 60
    criterion: str = "gini"
    max_depth: int = 14
    min_split_weight: int = 4
    features_per_split: object = "sqrt"
    bootstrap: bool = True

    def __post_init__(self):
        if self.tree_count < 1:
            raise DomainError("tree_count must be >= 1")
        self.trees: list[DecisionTree] = []

    def fit(self, x: np.ndarray, y: np.ndarray, rng: np.random.Generator):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int8)
        if np.unique(y).size < 2:
            raise DomainError("random forest training data has a single class")
        n = x.shape[0]
        m = resolve_features_per_split(self.features_per_split, x.shape[1])
        self.trees = []
        for tree_rng in rng.spawn(self.tree_count):
            if self.bootstrap:
                take = tree_rng.integers(0, n, size=n)
                xt, yt = x[take], y[take]
            else:
                xt, yt = x, y
            tree = DecisionTree(criterion=self.criterion,
                                max_depth=self.max_depth,
                                min_split_weight=self.min_split_weight)
            # bootstrap resamples may collapse to one class; grow a stump
            tree.fit(xt, yt, rng=tree_rng, features_per_split=m,
                     single_class_ok=True)
            self.trees.append(tree)
        return self

    def predict(self, x: np.ndarray) -> np.ndarray:
        votes = np.zeros(np.asarray(x).shape[0], dtype=np.int32)
        for tree in self.trees:
            votes += tree.predict(x)
        return (2 * votes >= self.tree_count).astype(np.int8)
