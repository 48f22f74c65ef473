"""Support vector machines trained by sequential minimal optimization.

One two-variable dual solver backs all three models: the C-classifier
(polynomial kernel, optional inverse-frequency class weights), nu-SVR used
as a thresholded binary classifier, and the one-class novelty detector.
The solver is the standard max-violating-pair scheme with a second-order
partner choice; each step solves the two-variable subproblem exactly, so
the dual objective never increases. nu-SVR needs the variant that keeps
its two equality constraints by always pairing variables from the same
sign group.

At desk scale (a few thousand rows) the full kernel matrix fits in memory,
so no caching or shrinking heuristics are needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, SchemaError
from .kernels import Kernel, PolyKernel, RbfKernel, kernel_matrix

_TAU = 1e-12




def _canonical_order(x: np.ndarray, *keys: np.ndarray) -> np.ndarray:
    """Content-based row order so fits depend on the row multiset only.

    SMO paths (and therefore near-optimal endpoints at loose tolerance)
    depend on row order through tie-breaking; sorting by content restores
    permutation invariance.
    """
    cols = [np.asarray(k, dtype=np.float64) for k in keys]
    cols.extend(x[:, f] for f in range(x.shape[1] - 1, -1, -1))
    return np.lexsort(tuple(cols))


@dataclass
class SmoResult:
    alpha: np.ndarray
    gradient: np.ndarray
    iterations: int
    converged: bool
    objective_trace: np.ndarray | None = None


def _objective(alpha, gradient, p):
    # G = Q a + p  =>  0.5 aQa + pa = 0.5 a(G - p) + pa = 0.5 a(G + p)
    return 0.5 * float(alpha @ (gradient + p))


def smo_minimize(kcol, kdiag, y, p, c_upper, alpha, gradient,
                 tol=1e-3, max_iter=200_000, same_group=False,
                 record_objective=False) -> SmoResult:
    """Minimize 0.5 aQa + pa with Q = (y yT) * K, 0 <= a <= C, yTa fixed.

    ``kcol(i)`` returns kernel column i; ``alpha``/``gradient`` are the
    consistent starting point (gradient = Q alpha + p) and are mutated.
    ``same_group=True`` restricts pairs to equal y (the nu-SVR solver),
    which additionally keeps sum(a) fixed.
    """
    n = alpha.size
    pos = y > 0
    trace = [] if record_objective else None
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        minus_yg = -y * gradient
        up = np.where(pos, alpha < c_upper, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < c_upper)
        if same_group:
            i, j, gap, ki = _select_nu(minus_yg, up, low, pos, kcol, kdiag)
        else:
            i, j, gap, ki = _select(minus_yg, up, low, kcol, kdiag)
        if gap < tol or i < 0:
            converged = True
            it -= 1
            break
        _update_pair(i, j, ki, kcol, kdiag, y, c_upper, alpha, gradient)
        if record_objective:
            trace.append(_objective(alpha, gradient, p))
    return SmoResult(alpha=alpha, gradient=gradient, iterations=it,
                     converged=converged,
                     objective_trace=np.array(trace) if record_objective else None)


def _select(minus_yg, up, low, kcol, kdiag):
    """First index by max violation, partner by best second-order decrease."""
    if not up.any() or not low.any():
        return -1, -1, 0.0, None
    ui = np.flatnonzero(up)
    i = int(ui[np.argmax(minus_yg[ui])])
    g_max = minus_yg[i]
    li = np.flatnonzero(low)
    g_min = float(np.min(minus_yg[li]))
    gap = g_max - g_min
    if gap <= 0:
        return -1, -1, 0.0, None
    ki = kcol(i)
    b = g_max - minus_yg[li]
    quad = np.maximum(kdiag[i] + kdiag[li] - 2.0 * ki[li], _TAU)
    eligible = b > 0
    if not eligible.any():
        return -1, -1, 0.0, None
    score = -(b * b) / quad
    score[~eligible] = np.inf
    j = int(li[np.argmin(score)])
    return i, j, gap, ki


def _select_nu(minus_yg, up, low, pos, kcol, kdiag):
    """Per-group max-violating pair; take the group violating harder."""
    best = (-1, -1, 0.0, None)
    for grp in (pos, ~pos):
        up_g = np.flatnonzero(up & grp)
        low_g = np.flatnonzero(low & grp)
        if up_g.size == 0 or low_g.size == 0:
            continue
        i = int(up_g[np.argmax(minus_yg[up_g])])
        gap = minus_yg[i] - float(np.min(minus_yg[low_g]))
        if gap > best[2]:
            ki = kcol(i)
            b = minus_yg[i] - minus_yg[low_g]
            quad = np.maximum(kdiag[i] + kdiag[low_g] - 2.0 * ki[low_g], _TAU)
            eligible = b > 0
            if not eligible.any():
                continue
            score = -(b * b) / quad
            score[~eligible] = np.inf
            j = int(low_g[np.argmin(score)])
            best = (i, j, float(gap), ki)
    return best


def _update_pair(i, j, ki, kcol, kdiag, y, c_upper, alpha, gradient):
    """Exact two-variable subproblem solve with box clipping (LIBSVM style)."""
    ci = c_upper[i] if np.ndim(c_upper) else c_upper
    cj = c_upper[j] if np.ndim(c_upper) else c_upper
    kj = kcol(j)
    # both sign cases reduce to ||phi_i - phi_j||^2 in kernel space
    quad = max(kdiag[i] + kdiag[j] - 2.0 * ki[j], _TAU)
    old_i, old_j = alpha[i], alpha[j]
    if y[i] != y[j]:
        delta = (-gradient[i] - gradient[j]) / quad
        diff = old_i - old_j
        ai, aj = old_i + delta, old_j + delta
        if diff > 0:
            if aj < 0:
                aj, ai = 0.0, diff
        else:
            if ai < 0:
                ai, aj = 0.0, -diff
        if diff > ci - cj:
            if ai > ci:
                ai, aj = ci, ci - diff
        else:
            if aj > cj:
                aj, ai = cj, cj + diff
    else:
        delta = (gradient[i] - gradient[j]) / quad
        total = old_i + old_j
        ai, aj = old_i - delta, old_j + delta
        if total > ci:
            if ai > ci:
                ai, aj = ci, total - ci
        else:
            if aj < 0:
                aj, ai = 0.0, total
        if total > cj:
            if aj > cj:
                aj, ai = cj, total - cj
        else:
            if ai < 0:
                ai, aj = 0.0, total
    d_i, d_j = ai - old_i, aj - old_j
    alpha[i], alpha[j] = ai, aj
    gradient += y * (y[i] * ki * d_i + y[j] * kj * d_j)


def _free_average(values, free_mask, lower_mask, upper_mask):
    """Average over free variables, else midpoint of the KKT bound interval.

    ``lower_mask`` marks variables whose value lower-bounds the estimate,
    ``upper_mask`` those that upper-bound it.
    """
    if free_mask.any():
        return float(np.mean(values[free_mask]))
    lo = float(np.max(values[lower_mask])) if lower_mask.any() else -np.inf
    hi = float(np.min(values[upper_mask])) if upper_mask.any() else np.inf
    if not np.isfinite(lo) and not np.isfinite(hi):
        return 0.0
    if not np.isfinite(lo):
        return hi
    if not np.isfinite(hi):
        return lo
    return 0.5 * (lo + hi)


@dataclass
class SvcModel:
    """Soft-margin classifier; anomalous is the +1 class."""

    kernel: Kernel = field(default_factory=PolyKernel)
    c: float = 150.0
    class_weights: bool = True
    tol: float = 1e-3
    max_iter: int = 200_000

    def fit(self, x: np.ndarray, y: np.ndarray, record_objective=False):
        x = np.asarray(x, dtype=np.float64)
        y01 = np.asarray(y, dtype=np.int8)
        if np.unique(y01).size < 2:
            raise DomainError("SVC training data has a single class")
        order = _canonical_order(x, y01)
        x, y01 = x[order], y01[order]
        ysv = np.where(y01 == 1, 1.0, -1.0)
        n = x.shape[0]
        if self.class_weights:
            n_pos = int((y01 == 1).sum())
            w_pos = n / (2.0 * n_pos)
            w_neg = n / (2.0 * (n - n_pos))
            c_upper = np.where(y01 == 1, self.c * w_pos, self.c * w_neg)
        else:
            c_upper = np.full(n, self.c)
        k = kernel_matrix(self.kernel, x, x)
        alpha = np.zeros(n)
        gradient = np.full(n, -1.0)  # p = -1, Q alpha = 0
        res = smo_minimize(lambda i: k[:, i], np.diag(k).copy(), ysv,
                           np.full(n, -1.0), c_upper, alpha, gradient,
                           tol=self.tol, max_iter=self.max_iter,
                           record_objective=record_objective)
        free = (alpha > 0) & (alpha < c_upper)
        b_vals = -ysv * res.gradient
        # b is bracketed by -yG over the bound-constrained parts of I_up/I_low
        self.bias_ = _free_average(
            b_vals, free,
            lower_mask=np.where(ysv > 0, alpha <= 0, alpha >= c_upper),
            upper_mask=np.where(ysv > 0, alpha >= c_upper, alpha <= 0))
        keep = alpha > 0
        self.support_x_ = x[keep]
        self.dual_coef_ = (alpha * ysv)[keep]
        self.result_ = res
        return self

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1] != self.support_x_.shape[1]:
            raise SchemaError("query feature count does not match training data")
        k = kernel_matrix(self.kernel, x, self.support_x_)
        return k @ self.dual_coef_ + self.bias_

    def predict(self, x: np.ndarray) -> np.ndarray:
        return (self.decision_function(x) >= 0.0).astype(np.int8)


@dataclass
class NuSvrModel:
    """nu-SVR on 0/1 targets, thresholded into a binary classifier."""

    kernel: Kernel = field(default_factory=lambda: PolyKernel(degree=7))
    c: float = 1.0
    nu: float = 0.2
    cutoff: float = 0.5
    tol: float = 1e-2
    max_iter: int = 200_000

    def fit(self, x: np.ndarray, y: np.ndarray, record_objective=False):
        x = np.asarray(x, dtype=np.float64)
        z = np.asarray(y, dtype=np.float64)
        if not 0 < self.nu <= 1:
            raise DomainError("nu must be in (0, 1]")
        order = _canonical_order(x, z)
        x, z = x[order], z[order]
        n = x.shape[0]
        k = kernel_matrix(self.kernel, x, x)
        kdiag2 = np.concatenate([np.diag(k), np.diag(k)])
        y2 = np.concatenate([np.ones(n), -np.ones(n)])
        p2 = np.concatenate([-z, z])
        # alpha and alpha* start equal, so Q alpha = 0 and gradient = p
        alpha2 = np.zeros(2 * n)
        budget = self.c * self.nu * n / 2.0
        for i in range(n):
            take = min(budget, self.c)
            alpha2[i] = alpha2[n + i] = take
            budget -= take
            if budget <= 0:
                break
        gradient = p2.copy()

        def kcol(t):
            return np.tile(k[:, t % n], 2)

        res = smo_minimize(kcol, kdiag2, y2, p2, self.c, alpha2, gradient,
                           tol=self.tol, max_iter=self.max_iter,
                           same_group=True, record_objective=record_objective)
        free = (alpha2 > 0) & (alpha2 < self.c)
        g = res.gradient
        r_pos = _free_average(g[:n], free[:n],
                              lower_mask=alpha2[:n] >= self.c,
                              upper_mask=alpha2[:n] <= 0)
        r_neg = _free_average(g[n:], free[n:],
                              lower_mask=alpha2[n:] >= self.c,
                              upper_mask=alpha2[n:] <= 0)
        self.bias_ = 0.5 * (r_neg - r_pos)
        coef = alpha2[:n] - alpha2[n:]
        keep = coef != 0
        self.support_x_ = x[keep]
        self.dual_coef_ = coef[keep]
        self.result_ = res
        return self

    def regression_output(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1] != self.support_x_.shape[1]:
            raise SchemaError("query feature count does not match training data")
        k = kernel_matrix(self.kernel, x, self.support_x_)
        return k @ self.dual_coef_ + self.bias_

    def predict(self, x: np.ndarray) -> np.ndarray:
        return (self.regression_output(x) >= self.cutoff).astype(np.int8)


@dataclass
class OneClassSvmModel:
    """Novelty detector trained on non-anomalous rows only."""

    kernel: Kernel = field(default_factory=lambda: RbfKernel(gamma=0.5))
    nu: float = 0.08
    tol: float = 1e-3
    max_iter: int = 200_000

    def fit(self, x: np.ndarray, y: np.ndarray | None = None,
            record_objective=False):
        """``y`` is accepted only to enforce the non-anomalous-rows contract."""
        x = np.asarray(x, dtype=np.float64)
        if y is not None and np.any(np.asarray(y) == 1):
            raise DomainError("one-class SVM must be trained on "
                              "non-anomalous rows only")
        if not 0 < self.nu <= 1:
            raise DomainError("nu must be in (0, 1]")
        x = x[_canonical_order(x)]
        n = x.shape[0]
        k = kernel_matrix(self.kernel, x, x)
        alpha = np.zeros(n)
        cap = self.nu * n
        full = int(cap)
        alpha[:full] = 1.0
        if full < n:
            alpha[full] = cap - full
        gradient = k @ alpha  # p = 0
        res = smo_minimize(lambda i: k[:, i], np.diag(k).copy(),
                           np.ones(n), np.zeros(n), 1.0, alpha, gradient,
                           tol=self.tol, max_iter=self.max_iter,
                           record_objective=record_objective)
        free = (alpha > 0) & (alpha < 1.0)
        self.rho_ = _free_average(res.gradient, free,
                                  lower_mask=alpha >= 1.0, upper_mask=alpha <= 0)
        keep = alpha > 0
        self.support_x_ = x[keep]
        self.dual_coef_ = alpha[keep]
        self.result_ = res
        return self

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1] != self.support_x_.shape[1]:
            raise SchemaError("query feature count does not match training data")
        k = kernel_matrix(self.kernel, x, self.support_x_)
        return k @ self.dual_coef_ - self.rho_

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Anomalous (1) where the point falls outside the learned support."""
        return (self.decision_function(x) < 0.0).astype(np.int8)
