"""Benchmarks (random walk, AR(p)) and penalized linear regressions.

All penalized objectives share the ``1/(2n)`` residual normalization with an
unpenalized intercept fitted on centered data::

    ridge:  (1/2n)|y - b0 - Xb|^2 + a * |b|_2^2
    lasso:  (1/2n)|y - b0 - Xb|^2 + l * |b|_1
    enet:   (1/2n)|y - b0 - Xb|^2 + a * [(1 - g) |b|_2^2 + g |b|_1]
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .base import Learner

logger = logging.getLogger(__name__)

RIDGE_JITTER = 1e-8


class SingularSolveWarning(RuntimeWarning):
    pass


class ConvergenceWarning(RuntimeWarning):
    pass


# -- benchmarks ------------------------------------------------------------


def rw_forecast(y) -> float:
    """Random walk: the next value equals the last observed one."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("random walk needs at least one observation")
    return float(y[-1])


def _lstsq_with_fallback(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    gram = A.T @ A
    if np.linalg.matrix_rank(gram) < gram.shape[0]:
        warnings.warn("singular normal equations; adding ridge 1e-8", SingularSolveWarning, stacklevel=3)
        return np.linalg.solve(gram + RIDGE_JITTER * np.eye(gram.shape[0]), A.T @ b)
    return np.linalg.solve(gram, A.T @ b)


def ar_fit(y, p: int = 3) -> tuple[float, np.ndarray]:
    """OLS estimate of ``y_t = a + sum_i phi_i y_{t-i} + e_t``; returns ``(a, phi)``."""
    y = np.asarray(y, dtype=float)
    if y.size <= p + 1:
        raise ValueError(f"AR({p}) needs more than {p + 1} observations")
    if p == 0:
        return float(y.mean()), np.zeros(0)
    lags = np.column_stack([y[p - i : y.size - i] for i in range(1, p + 1)])
    A = np.column_stack([np.ones(y.size - p), lags])
    coef = _lstsq_with_fallback(A, y[p:])
    return float(coef[0]), coef[1:]


def ar_fit_forecast(y, p: int = 3) -> float:
    """One-step AR(p) forecast from the end of ``y``."""
    y = np.asarray(y, dtype=float)
    a, phi = ar_fit(y, p)
    return float(a + phi @ y[::-1][:p]) if p else a


# -- penalized regressions -------------------------------------------------


@dataclass
class PenalizedFit:
    intercept: float
    coef: np.ndarray
    alpha: float
    l1_ratio: float | None = None
    n_iter: int = 0
    converged: bool = True
    objective_history: list[float] = field(default_factory=list)

    def predict(self, X) -> np.ndarray:
        return self.intercept + np.asarray(X, dtype=float) @ self.coef


def _center(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    xm, ym = X.mean(axis=0), y.mean()
    return X - xm, y - ym, xm, ym


def ridge_fit(X, y, alpha: float) -> PenalizedFit:
    """Closed-form ridge: ``(Xc'Xc + 2 n alpha I) b = Xc'yc``."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    Xc, yc, xm, ym = _center(X, y)
    n, p = Xc.shape
    if alpha == 0:
        coef = _lstsq_with_fallback(Xc, yc) if p else np.zeros(0)
    else:
        coef = np.linalg.solve(Xc.T @ Xc + 2.0 * n * alpha * np.eye(p), Xc.T @ yc)
    return PenalizedFit(intercept=float(ym - xm @ coef), coef=coef, alpha=alpha)


def soft_threshold(z: float, t: float) -> float:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def enet_objective(Xc, yc, coef, alpha, l1_ratio) -> float:
    r = yc - Xc @ coef
    pen = alpha * ((1 - l1_ratio) * coef @ coef + l1_ratio * np.abs(coef).sum())
    return float(r @ r / (2 * len(yc)) + pen)


def enet_fit(
    X,
    y,
    alpha: float,
    l1_ratio: float,
    tol: float = 1e-6,
    max_iter: int = 10_000,
    warm_start: np.ndarray | None = None,
    track_objective: bool = False,
) -> PenalizedFit:
    """Cyclic coordinate descent with soft-thresholding.

    Stops when the largest coefficient change in a full sweep is below
    ``tol``. Non-convergence emits :class:`ConvergenceWarning` and returns the
    last iterate with ``converged=False``.
    """
    if alpha < 0:
        raise ValueError("penalty must be nonnegative")
    if not 0.0 <= l1_ratio <= 1.0:
        raise ValueError("l1_ratio must lie in [0, 1]")
    Xc, yc, xm, ym = _center(X, y)
    n, p = Xc.shape
    gram = Xc.T @ Xc / n
    xty = Xc.T @ yc / n
    diag = np.diag(gram).copy()
    l1 = alpha * l1_ratio
    denom = diag + 2.0 * alpha * (1.0 - l1_ratio)
    coef = np.zeros(p) if warm_start is None else np.array(warm_start, dtype=float)
    g_coef = gram @ coef
    history = [enet_objective(Xc, yc, coef, alpha, l1_ratio)] if track_objective else []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        max_delta = 0.0
        for j in range(p):
            if denom[j] <= 0.0:
                continue  # constant column
            old = coef[j]
            rho = xty[j] - g_coef[j] + diag[j] * old
            new = soft_threshold(rho, l1) / denom[j]
            if new != old:
                d = new - old
                g_coef += gram[:, j] * d
                coef[j] = new
                max_delta = max(max_delta, abs(d))
        if track_objective:
            history.append(enet_objective(Xc, yc, coef, alpha, l1_ratio))
        if max_delta < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"coordinate descent did not converge in {max_iter} sweeps", ConvergenceWarning, stacklevel=2)
    return PenalizedFit(
        intercept=float(ym - xm @ coef),
        coef=coef,
        alpha=alpha,
        l1_ratio=l1_ratio,
        n_iter=it,
        converged=converged,
        objective_history=history,
    )


def lasso_fit(X, y, lam: float, **kw) -> PenalizedFit:
    return enet_fit(X, y, lam, 1.0, **kw)


def cbfi_importance(fit: PenalizedFit, names, dummy_mask=None) -> dict[str, float]:
    """Signed coefficients of the non-dummy features (rank by absolute value)."""
    mask = np.zeros(len(names), bool) if dummy_mask is None else np.asarray(dummy_mask, bool)
    return {n: float(c) for n, c, d in zip(names, fit.coef, mask) if not d}


# -- learner wrappers ------------------------------------------------------


class RandomWalk(Learner):
    name = "RW"
    view = "lags"

    def fit(self, X, y):
        self._fitted = True
        return self

    def predict(self, X):
        self._check_fitted()
        return np.asarray(X, dtype=float)[:, 0].copy()


class AutoRegressive(Learner):
    """AR(p) estimated by OLS on lagged-target rows."""

    name = "AR"
    view = "lags"

    def __init__(self, p: int = 3, **kw):
        super().__init__(**kw)
        self.p = int(p)

    def fit(self, X, y):
        L = np.asarray(X, dtype=float)[:, : self.p]
        y = np.asarray(y, dtype=float)
        if y.size <= self.p + 1:
            raise ValueError(f"AR({self.p}) needs more than {self.p + 1} observations")
        A = np.column_stack([np.ones(len(y)), L])
        coef = _lstsq_with_fallback(A, y)
        self.intercept_, self.phi_ = float(coef[0]), coef[1:]
        self._fitted = True
        return self

    def predict(self, X):
        self._check_fitted()
        return self.intercept_ + np.asarray(X, dtype=float)[:, : self.p] @ self.phi_

    def importance(self):
        return {f"y_lag{i + 1}": float(c) for i, c in enumerate(self.phi_)}


class _Penalized(Learner):
    def predict(self, X):
        self._check_fitted()
        return self.fit_.predict(X)

    def importance(self):
        self._check_fitted()
        return cbfi_importance(self.fit_, self.feature_names, self.dummy_mask)


class Ridge(_Penalized):
    name = "Ridge"

    def __init__(self, alpha: float = 1.0, **kw):
        super().__init__(**kw)
        self.alpha = float(alpha)

    def fit(self, X, y):
        self.fit_ = ridge_fit(X, y, self.alpha)
        self._fitted = True
        return self


class Lasso(_Penalized):
    name = "LASSO"

    def __init__(self, lam: float = 0.1, **kw):
        super().__init__(**kw)
        self.lam = float(lam)

    def fit(self, X, y):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            self.fit_ = lasso_fit(X, y, self.lam)
        self._fitted = True
        return self


class ElasticNet(_Penalized):
    name = "EN"

    def __init__(self, alpha: float = 0.1, l1_ratio: float = 0.5, **kw):
        super().__init__(**kw)
        self.alpha = float(alpha)
        self.l1_ratio = float(l1_ratio)

    def fit(self, X, y):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            self.fit_ = enet_fit(X, y, self.alpha, self.l1_ratio)
        self._fitted = True
        return self
