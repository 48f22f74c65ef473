"""Exact k-nearest-neighbor search and the kNN classifier.

Two search routes exist on purpose: a vectorized linear scan (the oracle,
also the fastest batch route at desk scale) and a ball tree (the
accelerated single-query structure). Both return exactly the same k
neighbors: ordering is lexicographic by (distance, training-row index),
and the tree's pruning bound carries a tiny slack so floating-point
rounding can only ever cause extra node visits, never a missed neighbor.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, SchemaError
from .kernels import METRICS, distance_matrix

_PRUNE_SLACK = 1e-9


def _point_dists(metric: str, points: np.ndarray, q: np.ndarray, p: float) -> np.ndarray:
    return distance_matrix(metric, q[None, :], points, p)[0]


def linear_scan(metric: str, points: np.ndarray, query: np.ndarray, k: int,
                p: float = 3.0) -> np.ndarray:
    """Indices of the k nearest points, ordered by (distance, index)."""
    d = _point_dists(metric, points, query, p)
    order = np.lexsort((np.arange(d.size), d))
    return order[:k]


class _Node:
    __slots__ = ("center", "radius", "left", "right", "indices")

    def __init__(self, center, radius, left=None, right=None, indices=None):
        self.center = center
        self.radius = radius
        self.left = left
        self.right = right
        self.indices = indices  # leaf only


class BallTree:
    """Exact nearest-neighbor tree valid for any metric with the triangle
    inequality (all four supported metrics qualify)."""

    def __init__(self, points: np.ndarray, metric: str = "manhattan",
                 p: float = 3.0, leaf_size: int = 32):
        if metric not in METRICS:
            raise DomainError(f"unknown distance metric '{metric}'")
        self.points = np.asarray(points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[0] == 0:
            raise DomainError("BallTree needs a non-empty 2-D point matrix")
        self.metric = metric
        self.p = p
        self.leaf_size = max(1, leaf_size)
        self._root = self._build(np.arange(self.points.shape[0]))

    def _ball(self, idx: np.ndarray) -> tuple[np.ndarray, float]:
        pts = self.points[idx]
        center = pts.mean(axis=0)
        radius = float(_point_dists(self.metric, pts, center, self.p).max())
        return center, radius

    def _build(self, idx: np.ndarray) -> _Node:
        center, radius = self._ball(idx)
        if idx.size <= self.leaf_size:
            return _Node(center, radius, indices=idx)
        pts = self.points[idx]
        spread = pts.max(axis=0) - pts.min(axis=0)
        dim = int(np.argmax(spread))
        if spread[dim] == 0.0:  # all points identical: no useful split
            return _Node(center, radius, indices=idx)
        order = np.argsort(pts[:, dim], kind="stable")
        half = idx.size // 2
        return _Node(center, radius,
                     left=self._build(idx[order[:half]]),
                     right=self._build(idx[order[half:]]))

    def query(self, query: np.ndarray, k: int) -> np.ndarray:
        """Indices of the k nearest points, ordered by (distance, index)."""
        q = np.asarray(query, dtype=np.float64)
        if q.shape != (self.points.shape[1],):
            raise SchemaError("query dimension does not match tree points")
        if k < 1:
            raise DomainError("k must be >= 1")
        k = min(k, self.points.shape[0])
        # max-heap of the current k best, keyed by (-distance, -index) so the
        # heap root is the lexicographically worst (distance, index) pair.
        heap: list[tuple[float, int]] = []

        def visit(node: _Node):
            lower = (_point_dists(self.metric, node.center[None, :], q, self.p)[0]
                     - node.radius - _PRUNE_SLACK)
            if len(heap) == k and lower > -heap[0][0]:
                return
            if node.indices is not None:
                dists = _point_dists(self.metric, self.points[node.indices], q, self.p)
                for d, i in zip(dists, node.indices):
                    item = (-d, -int(i))
                    if len(heap) < k:
                        heapq.heappush(heap, item)
                    elif item > heap[0]:
                        heapq.heapreplace(heap, item)
                return
            d_left = _point_dists(self.metric, node.left.center[None, :], q, self.p)[0]
            d_right = _point_dists(self.metric, node.right.center[None, :], q, self.p)[0]
            children = ([node.left, node.right] if d_left <= d_right
                        else [node.right, node.left])
            for child in children:
                visit(child)

        visit(self._root)
        best = sorted(((-d, -i) for d, i in heap))
        return np.array([i for _, i in best], dtype=np.int64)


@dataclass
class KnnClassifier:
    """kNN over the scaled training matrix; ties vote anomalous."""

    k: int = 5
    metric: str = "manhattan"
    p: float = 3.0

    def __post_init__(self):
        if self.k < 1:
            raise DomainError("k must be >= 1")
        if self.metric not in METRICS:
            raise DomainError(f"unknown distance metric '{self.metric}'")
        self._x = None
        self._y = None
        self._tree = None

    def fit(self, x: np.ndarray, y: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int8)
        if np.unique(y).size < 2:
            raise DomainError("kNN training data has a single class")
        if self.k > x.shape[0]:
            raise DomainError(f"k={self.k} exceeds {x.shape[0]} training rows")
        # canonical row order makes equal-distance tie-breaking (and thus
        # predictions) independent of the caller's row order
        order = np.lexsort(tuple([np.asarray(y, dtype=np.float64)]
                                 + [x[:, f] for f in range(x.shape[1] - 1, -1, -1)]))
        self._x = x[order]
        self._y = y[order]
        self._tree = None
        return self

    @property
    def tree(self) -> BallTree:
        if self._tree is None:
            self._tree = BallTree(self._x, metric=self.metric, p=self.p)
        return self._tree

    def _vote(self, neighbor_idx: np.ndarray) -> np.ndarray:
        votes = self._y[neighbor_idx].sum(axis=-1)
        return (2 * votes >= self.k).astype(np.int8)

    def predict_one(self, query: np.ndarray) -> int:
        """Single-query route through the ball tree."""
        return int(self._vote(self.tree.query(query, self.k)[None, :])[0])

    def predict(self, x: np.ndarray, chunk: int = 512) -> np.ndarray:
        """Batch route: exact vectorized scan, chunked to bound memory."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1] != self._x.shape[1]:
            raise SchemaError("query feature count does not match training data")
        out = np.empty(x.shape[0], dtype=np.int8)
        idx = np.arange(self._x.shape[0])
        for lo in range(0, x.shape[0], chunk):
            d = distance_matrix(self.metric, x[lo:lo + chunk], self._x, self.p)
            order = np.lexsort((np.broadcast_to(idx, d.shape), d), axis=1)
            out[lo:lo + d.shape[0]] = self._vote(order[:, :self.k])
        return out
