"""Split-quality measures for the tree models."""

from __future__ import annotations

import numpy as np

from ..errors import DomainError


def entropy(class_counts) -> float:
    """Shannon entropy in bits: -sum(p_i * log2(p_i)) over nonzero classes."""
    counts = np.asarray(class_counts, dtype=np.float64)
    if np.any(counts < 0):
        raise DomainError("class counts must be non-negative")
    total = counts.sum()
    if total < 1:
        raise DomainError("class counts sum to zero")
    p = counts[counts > 0] / total
    return float(-np.sum(p * np.log2(p)))


def gini_impurity(class_counts) -> float:
    """Gini impurity: 1 - sum(p_i^2)."""
    counts = np.asarray(class_counts, dtype=np.float64)
    if np.any(counts < 0):
        raise DomainError("class counts must be non-negative")
    total = counts.sum()
    if total < 1:
        raise DomainError("class counts sum to zero")
    p = counts / total
    return float(1.0 - np.sum(p * p))


IMPURITY_FUNCS = {"entropy": entropy, "gini": gini_impurity}
