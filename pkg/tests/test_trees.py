import numpy as np
import pytest

from rttbench.errors import DomainError
from rttbench.models.impurity import IMPURITY_FUNCS
from rttbench.models.trees import DecisionTree, RandomForest, resolve_features_per_split


def separable_toy():
    x = np.array([[0.0], [0.2], [0.8], [1.0]])
    y = np.array([0, 0, 1, 1], dtype=np.int8)
    return x, y


def test_separable_toy_depth_one():
    x, y = separable_toy()
    tree = DecisionTree(criterion="entropy", max_depth=5, min_split_weight=2).fit(x, y)
    assert tree.depth == 1
    assert np.array_equal(tree.predict(x), y)


def test_single_class_rejected():
    with pytest.raises(DomainError, match="single class"):
        DecisionTree().fit(np.zeros((8, 2)), np.zeros(8, dtype=np.int8))
    with pytest.raises(DomainError, match="single class"):
        RandomForest().fit(np.zeros((8, 2)), np.zeros(8, dtype=np.int8),
                           np.random.default_rng(0))


def test_max_depth_respected():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(300, 6))
    y = (x[:, 0] * x[:, 1] > 0).astype(np.int8)  # needs depth >= 2
    for depth in (1, 2, 4):
        tree = DecisionTree(max_depth=depth, min_split_weight=2).fit(x, y)
        assert tree.depth <= depth


@pytest.mark.parametrize("criterion", ["entropy", "gini"])
def test_every_split_strictly_decreases_impurity(criterion):
    rng = np.random.default_rng(42)
    x = rng.normal(size=(400, 5))
    y = ((x[:, 0] + 0.5 * x[:, 2] + 0.2 * rng.normal(size=400)) > 0).astype(np.int8)
    tree = DecisionTree(criterion=criterion, max_depth=8, min_split_weight=4).fit(x, y)
    impurity = IMPURITY_FUNCS[criterion]

    def check(node_id, idx):
        nd = tree.nodes
        if nd.feature[node_id] < 0:
            return
        mask = x[idx, nd.feature[node_id]] <= nd.threshold[node_id]
        left, right = idx[mask], idx[~mask]
        assert left.size > 0 and right.size > 0

        def imp(rows):
            pos = int(y[rows].sum())
            return impurity([rows.size - pos, pos])

        parent = imp(idx)
        weighted = (left.size * imp(left) + right.size * imp(right)) / idx.size
        assert weighted < parent
        check(nd.left[node_id], left)
        check(nd.right[node_id], right)

    check(0, np.arange(x.shape[0]))


def test_single_tree_forest_equals_decision_tree():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(250, 8))
    y = ((x[:, 1] > 0.2) | (x[:, 4] < -0.5)).astype(np.int8)
    for criterion in ("entropy", "gini"):
        dt = DecisionTree(criterion=criterion, max_depth=10,
                          min_split_weight=4).fit(x, y)
        rf = RandomForest(tree_count=1, criterion=criterion, max_depth=10,
                          min_split_weight=4, features_per_split="all",
                          bootstrap=False).fit(x, y, np.random.default_rng(123))
        queries = rng.normal(size=(500, 8))
        assert np.array_equal(rf.predict(queries), dt.predict(queries))


def test_forest_determinism_and_bootstrap_variation():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(300, 6))
    y = (x[:, 0] > 0).astype(np.int8)
    a = RandomForest(tree_count=12).fit(x, y, np.random.default_rng(5))
    b = RandomForest(tree_count=12).fit(x, y, np.random.default_rng(5))
    queries = rng.normal(size=(200, 6))
    assert np.array_equal(a.predict(queries), b.predict(queries))
    # bootstrapped trees are not all identical
    node_counts = {t.nodes.feature.size for t in a.trees}
    assert len(node_counts) > 1


def test_leaf_tie_votes_anomalous():
    x = np.array([[0.0], [0.0]])
    y = np.array([0, 1], dtype=np.int8)
    tree = DecisionTree(min_split_weight=2).fit(x, y)
    assert tree.predict(np.array([[0.0]]))[0] == 1


def test_features_per_split_resolution():
    assert resolve_features_per_split("sqrt", 24) == 5
    assert resolve_features_per_split("log2", 24) == 4
    assert resolve_features_per_split("all", 24) == 24
    assert resolve_features_per_split(None, 24) == 24
    assert resolve_features_per_split(7, 24) == 7
    with pytest.raises(DomainError):
        resolve_features_per_split(30, 24)


def test_invalid_params():
    with pytest.raises(DomainError):
        DecisionTree(criterion="twoing")
    with pytest.raises(DomainError):
        DecisionTree(max_depth=0)
    with pytest.raises(DomainError):
        RandomForest(tree_count=0)
