"""Gaussian naive Bayes with max-variance smoothing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, SchemaError


@dataclass
class GaussianNB:
    """Per-class independent Gaussians over each feature.

    ``variance_smoothing`` adds that fraction of the largest per-feature
    variance (over the whole training set) to every class variance, which
    keeps near-constant features from dominating the log-likelihood.
    """

    variance_smoothing: float = 1e-3

    def fit(self, x: np.ndarray, y: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int8)
        classes = np.unique(y)
        if classes.size < 2:
            raise DomainError("GNB training data has a single class")
        boost = self.variance_smoothing * float(np.var(x, axis=0).max())
        self.classes_ = classes
        self.priors_ = np.array([(y == c).mean() for c in classes])
        self.means_ = np.stack([x[y == c].mean(axis=0) for c in classes])
        self.vars_ = np.stack([x[y == c].var(axis=0) for c in classes]) + boost
        if np.any(self.vars_ <= 0):
            raise DomainError("zero variance after smoothing; increase "
                              "variance_smoothing")
        return self

    def log_posterior(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1] != self.means_.shape[1]:
            raise SchemaError("query feature count does not match training data")
        out = np.empty((x.shape[0], self.classes_.size))
        for ci in range(self.classes_.size):
            mu, var = self.means_[ci], self.vars_[ci]
            ll = -0.5 * (np.log(2.0 * math.pi * var) + (x - mu) ** 2 / var)
            out[:, ci] = math.log(self.priors_[ci]) + ll.sum(axis=1)
        return out

    def predict(self, x: np.ndarray) -> np.ndarray:
        # argmax keeps the first (lower class id) on exact ties
        best = np.argmax(self.log_posterior(x), axis=1)
        return self.classes_[best].astype(np.int8)
