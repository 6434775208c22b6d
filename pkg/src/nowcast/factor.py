"""Latent-factor learners: PCA, principal-component ridge regression, PLS1 with
VIP scores, and a light dynamic factor model (static factors + AR residual)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import Learner
from .linear import ar_fit, cbfi_importance, PenalizedFit, ridge_fit


class FactorError(ValueError):
    pass


@dataclass
class PcaDecomposition:
    loadings: np.ndarray  # (p, k), orthonormal columns
    eigenvalues: np.ndarray  # (k,), descending
    mean: np.ndarray  # (p,)
    total_variance: float

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) @ self.loadings

    @property
    def explained_ratio(self) -> np.ndarray:
        return self.eigenvalues / self.total_variance if self.total_variance > 0 else self.eigenvalues * 0


def pca_decompose(X, k: int) -> PcaDecomposition:
    """Eigen-decomposition of the sample covariance of the centered data.

    Loadings are sign-fixed so the largest-magnitude entry of each is positive.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if not 1 <= k <= min(n - 1, p):
        raise FactorError(f"k={k} outside 1..{min(n - 1, p)}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (n - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals, vecs = np.clip(vals[order], 0.0, None), vecs[:, order]
    V = vecs[:, :k]
    flip = np.sign(V[np.argmax(np.abs(V), axis=0), np.arange(k)])
    V = V * np.where(flip == 0, 1.0, flip)
    return PcaDecomposition(V, vals[:k], mean, float(vals.sum()))


@dataclass
class PcrFit:
    pca: PcaDecomposition
    score_fit: PenalizedFit
    coef: np.ndarray  # back-projected, original feature space
    intercept: float

    def predict(self, X) -> np.ndarray:
        return self.intercept + np.asarray(X, dtype=float) @ self.coef


def pcr_fit(X, y, k: int, lam: float) -> PcrFit:
    """Ridge of ``y`` on the first ``k`` principal-component scores, mapped back
    to the original features through the loadings."""
    pca = pca_decompose(X, k)
    Z = pca.transform(X)
    sf = ridge_fit(Z, y, lam)
    coef = pca.loadings @ sf.coef
    intercept = sf.intercept - pca.mean @ coef
    return PcrFit(pca, sf, coef, float(intercept))


@dataclass
class PlsFit:
    weights: np.ndarray  # W (p, A), unit columns
    scores: np.ndarray  # T (n, A)
    x_loadings: np.ndarray  # P (p, A)
    y_loadings: np.ndarray  # c (A,)
    x_mean: np.ndarray
    y_mean: float
    coef: np.ndarray
    ssy: np.ndarray  # y sum of squares explained per component

    @property
    def n_components(self) -> int:
        return self.weights.shape[1]

    def predict(self, X) -> np.ndarray:
        return self.y_mean + (np.asarray(X, dtype=float) - self.x_mean) @ self.coef


def pls_fit(X, y, n_components: int) -> PlsFit:
    """PLS1 by NIPALS with X and y deflation.

    Extraction stops early if the deflated cross-covariance vanishes (``y``
    already fully explained), so the returned fit may hold fewer components.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if not 1 <= n_components <= min(n - 1, p):
        raise FactorError(f"n_components={n_components} outside 1..{min(n - 1, p)}")
    if np.std(y) == 0:
        raise FactorError("target has zero variance")
    xm, ym = X.mean(axis=0), y.mean()
    Xa, ya = X - xm, y - ym
    W, T, P, C = [], [], [], []
    scale = np.linalg.norm(X - xm) * np.linalg.norm(y - ym)
    for _ in range(n_components):
        w = Xa.T @ ya
        nw = np.linalg.norm(w)
        if nw <= 1e-12 * max(scale, 1.0):
            break
        w /= nw
        t = Xa @ w
        tt = t @ t
        pa = Xa.T @ t / tt
        ca = ya @ t / tt
        Xa = Xa - np.outer(t, pa)
        ya = ya - ca * t
        W.append(w), T.append(t), P.append(pa), C.append(ca)
    W, T, P, C = (np.column_stack(W), np.column_stack(T), np.column_stack(P), np.asarray(C))
    coef = W @ np.linalg.solve(P.T @ W, C)
    ssy = C**2 * np.einsum("ij,ij->j", T, T)
    return PlsFit(W, T, P, C, xm, float(ym), coef, ssy)


def vip_scores(fit: PlsFit, names=None) -> dict[str, float] | np.ndarray:
    """Variable importance in projection.

    ``VIP_j = sqrt(p * sum_a SSY_a (w_ja/|w_a|)^2 / sum_a SSY_a)``; the mean of
    the squared scores over features is 1.
    """
    W = fit.weights / np.linalg.norm(fit.weights, axis=0)
    p = W.shape[0]
    total = fit.ssy.sum()
    if total <= 0:
        vip = np.zeros(p)
    else:
        vip = np.sqrt(p * (W**2 @ fit.ssy) / total)
    if names is None:
        return vip
    return {n: float(v) for n, v in zip(names, vip)}


@dataclass
class DfmFit:
    pca: PcaDecomposition
    reg_coef: np.ndarray  # [intercept, factors..., dummies...]
    ar_intercept: float
    ar_coef: np.ndarray
    residuals: np.ndarray


def dfm_fit(X, y, dummies, r: int, p_ar: int) -> DfmFit:
    """Static factors from PCA, OLS of ``y`` on factors and dummies, AR on the residuals."""
    if r < 1 or p_ar < 0:
        raise FactorError("need r >= 1 and p_ar >= 0")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    D = np.asarray(dummies, dtype=float).reshape(len(y), -1)
    pca = pca_decompose(X, r)
    F = pca.transform(X)
    A = np.column_stack([np.ones(len(y)), F, D])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    if p_ar > 0:
        a0, phi = ar_fit(resid, p_ar)
    else:
        a0, phi = 0.0, np.zeros(0)
    return DfmFit(pca, coef, a0, phi, resid)


def dfm_predict(fit: DfmFit, X, dummies) -> np.ndarray:
    """Regression prediction plus the AR forecast of the residual.

    Rows are taken as the consecutive quarters after the fitting sample, so
    the h-th row gets the h-step-ahead residual forecast.
    """
    X = np.asarray(X, dtype=float)
    D = np.asarray(dummies, dtype=float).reshape(X.shape[0], -1)
    A = np.column_stack([np.ones(X.shape[0]), fit.pca.transform(X), D])
    base = A @ fit.reg_coef
    p = fit.ar_coef.size
    if p == 0:
        return base
    hist = list(fit.residuals[-p:])
    extra = np.empty(X.shape[0])
    for h in range(X.shape[0]):
        nxt = fit.ar_intercept + float(np.dot(fit.ar_coef, hist[::-1][:p]))
        extra[h] = nxt
        hist.append(nxt)
    return base + extra


def dfm_fit_forecast(X, y, dummies, x_next, d_next, r: int, p_ar: int) -> float:
    fit = dfm_fit(X, y, dummies, r, p_ar)
    return float(dfm_predict(fit, np.atleast_2d(x_next), np.atleast_2d(d_next))[0])


# -- learner wrappers ------------------------------------------------------


def _max_components(n: int, p: int) -> int:
    return max(1, min(n - 1, p))


class PCR(Learner):
    name = "PCR"

    def __init__(self, k: int = 3, lam: float = 0.01, **kw):
        super().__init__(**kw)
        self.k = int(k)
        self.lam = float(lam)

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        k = min(self.k, _max_components(*X.shape))
        self.fit_ = pcr_fit(X, y, k, self.lam)
        self._fitted = True
        return self

    def predict(self, X):
        self._check_fitted()
        return self.fit_.predict(X)

    def importance(self):
        self._check_fitted()
        pf = PenalizedFit(self.fit_.intercept, self.fit_.coef, self.lam)
        return cbfi_importance(pf, self.feature_names, self.dummy_mask)


class PLSR(Learner):
    name = "PLSR"

    def __init__(self, n_components: int = 2, **kw):
        super().__init__(**kw)
        self.n_components = int(n_components)

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        A = min(self.n_components, _max_components(*X.shape))
        self.fit_ = pls_fit(X, y, A)
        self._fitted = True
        return self

    def predict(self, X):
        self._check_fitted()
        return self.fit_.predict(X)

    def importance(self):
        self._check_fitted()
        vip = vip_scores(self.fit_)
        return self._named(vip)


class DFM(Learner):
    """Light dynamic factor model on the continuous features; dummies enter the
    target regression directly."""

    name = "DFM"

    def __init__(self, r: int = 2, p_ar: int = 1, **kw):
        super().__init__(**kw)
        self.r = int(r)
        self.p_ar = int(p_ar)

    def _split(self, X):
        X = np.asarray(X, dtype=float)
        if not self.dummy_mask.size:
            return X, np.zeros((X.shape[0], 0))
        return X[:, ~self.dummy_mask], X[:, self.dummy_mask]

    def fit(self, X, y):
        Xc, D = self._split(X)
        r = min(self.r, _max_components(*Xc.shape))
        self.fit_ = dfm_fit(Xc, y, D, r, self.p_ar)
        self._fitted = True
        return self

    def predict(self, X):
        self._check_fitted()
        Xc, D = self._split(X)
        return dfm_predict(self.fit_, Xc, D)
