"""Kernel functions and distance metrics shared by the SVM and kNN models.

Scalar entry points (kernel_eval, distance) implement the definitions on a
pair of vectors; the *_matrix variants are the vectorized forms the models
actually train with. Both routes share the same arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, SchemaError


@dataclass(frozen=True)
class PolyKernel:
    degree: int = 3
    coef0: float = 1.0
    gamma: float = 1.0

    name = "polynomial"


@dataclass(frozen=True)
class RbfKernel:
    gamma: float = 1.0

    name = "rbf"


Kernel = PolyKernel | RbfKernel


def _check_pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise SchemaError(f"vector length mismatch: {x.shape} vs {y.shape}")
    return x, y


def kernel_eval(kernel: Kernel, x, y) -> float:
    """polynomial: (gamma*<x,y> + coef0)^degree; rbf: exp(-gamma*||x-y||^2)."""
    x, y = _check_pair(x, y)
    if isinstance(kernel, PolyKernel):
        return float((kernel.gamma * np.dot(x, y) + kernel.coef0) ** kernel.degree)
    diff = x - y
    return float(np.exp(-kernel.gamma * np.dot(diff, diff)))


def kernel_matrix(kernel: Kernel, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gram matrix K[i, j] = k(a[i], b[j]) for row-matrices a, b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise SchemaError("kernel matrix operands disagree on feature count")
    if isinstance(kernel, PolyKernel):
        return (kernel.gamma * (a @ b.T) + kernel.coef0) ** kernel.degree
    sq = (np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :]
          - 2.0 * (a @ b.T))
    np.clip(sq, 0.0, None, out=sq)
    return np.exp(-kernel.gamma * sq)


METRICS = ("manhattan", "euclidean", "hamming", "minkowski")


def distance(metric: str, x, y, p: float = 3.0) -> float:
    """Distance between two vectors under the named metric.

    hamming counts differing coordinates; minkowski uses the given p.
    """
    x, y = _check_pair(x, y)
    if metric == "manhattan":
        return float(np.sum(np.abs(x - y)))
    if metric == "euclidean":
        return float(np.sqrt(np.sum((x - y) ** 2)))
    if metric == "hamming":
        return float(np.count_nonzero(x != y))
    if metric == "minkowski":
        if p < 1:
            raise DomainError("minkowski p must be >= 1")
        return float(np.sum(np.abs(x - y) ** p) ** (1.0 / p))
    raise DomainError(f"unknown distance metric '{metric}'")


def distance_matrix(metric: str, queries: np.ndarray, points: np.ndarray,
                    p: float = 3.0) -> np.ndarray:
    """All pairwise distances, queries on rows, points on columns."""
    q = np.asarray(queries, dtype=np.float64)
    x = np.asarray(points, dtype=np.float64)
    if q.shape[1] != x.shape[1]:
        raise SchemaError("distance matrix operands disagree on feature count")
    diff = q[:, None, :] - x[None, :, :]
    if metric == "manhattan":
        return np.sum(np.abs(diff), axis=2)
    if metric == "euclidean":
        return np.sqrt(np.sum(diff * diff, axis=2))
    if metric == "hamming":
        return np.count_nonzero(diff != 0, axis=2).astype(np.float64)
    if metric == "minkowski":
        if p < 1:
            raise DomainError("minkowski p must be >= 1")
        return np.sum(np.abs(diff) ** p, axis=2) ** (1.0 / p)
    raise DomainError(f"unknown distance metric '{metric}'")
