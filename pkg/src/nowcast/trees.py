"""Regression trees, bagged random forests (MDI importance) and second-order
gradient boosting (gain importance).

Split search is exhaustive over midpoints between sorted unique feature
values. Ties in the split criterion go to the lowest feature index, then the
lowest threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import Learner


class InvalidSplitError(ValueError):
    pass


# -- impurity --------------------------------------------------------------


def impurity(y, criterion: str = "squared_error") -> float:
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise InvalidSplitError("empty node")
    if criterion == "squared_error":
        return float(np.mean((y - y.mean()) ** 2))
    if criterion == "absolute_error":
        return float(np.mean(np.abs(y - np.median(y))))
    raise ValueError(f"unknown criterion {criterion!r}")


def impurity_decrease(y, left_mask, criterion: str = "squared_error") -> float:
    """``I(node) - [n_L/n I(left) + n_R/n I(right)]`` for a boolean split mask."""
    y = np.asarray(y, dtype=float)
    left_mask = np.asarray(left_mask, dtype=bool)
    yl, yr = y[left_mask], y[~left_mask]
    if yl.size == 0 or yr.size == 0:
        raise InvalidSplitError("split leaves an empty child")
    n = y.size
    return impurity(y, criterion) - (
        yl.size / n * impurity(yl, criterion) + yr.size / n * impurity(yr, criterion)
    )


# -- tree container --------------------------------------------------------


@dataclass
class RegressionTree:
    feature: list[int] = field(default_factory=list)  # -1 for leaves
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)
    gain: list[float] = field(default_factory=list)  # impurity decrease or boosting gain

    def add_leaf(self, value: float) -> int:
        self.feature.append(-1)
        self.threshold.append(np.nan)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        self.gain.append(0.0)
        return len(self.feature) - 1

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        feat = np.asarray(self.feature)
        thr = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        val = np.asarray(self.value)
        node = np.zeros(X.shape[0], dtype=int)
        active = feat[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            f = feat[node[idx]]
            go_left = X[idx, f] <= thr[node[idx]]
            node[idx] = np.where(go_left, left[node[idx]], right[node[idx]])
            active = feat[node] >= 0
        return val[node]

    def split_totals(self, n_features: int) -> np.ndarray:
        out = np.zeros(n_features)
        for f, g in zip(self.feature, self.gain):
            if f >= 0:
                out[f] += g
        return out

    @property
    def n_leaves(self) -> int:
        return sum(1 for f in self.feature if f < 0)


def _midpoints(xs_sorted: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Positions ``i`` (split after sorted index i) where the value changes, and the midpoints."""
    change = np.nonzero(xs_sorted[1:] > xs_sorted[:-1])[0]
    return change, 0.5 * (xs_sorted[change] + xs_sorted[change + 1])


def _sorted_columns(Xn: np.ndarray, *vals: np.ndarray):
    """Column-wise stable sort of ``Xn`` and the row-aligned ``vals`` gathered in that order."""
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    return xs, [v[order] for v in vals]


def _pick(score: np.ndarray, xs: np.ndarray, feats: np.ndarray, floor: float = 0.0):
    """Best ``(score, feature, threshold)`` from a ``(n-1, f)`` score grid.

    Invalid positions must hold ``-inf``. Ties go to the lowest feature index,
    then the lowest threshold; nothing is returned unless the best score
    exceeds ``floor``.
    """
    col_best = score.max(axis=0)
    top = col_best.max()
    if not top > floor + 1e-12:
        return (0.0, -1, np.nan)
    order = np.argsort(feats, kind="stable")
    for j in order:
        if col_best[j] >= top - 1e-12:
            i = int(np.argmax(score[:, j] >= top - 1e-12))
            return (float(score[i, j]), int(feats[j]), float(0.5 * (xs[i, j] + xs[i + 1, j])))
    raise AssertionError("unreachable")


def _prefix_mad(ys: np.ndarray) -> np.ndarray:
    """``sum |y - median|`` of every prefix of each column of ``ys``: shape ``(n, f)``."""
    n = ys.shape[0]
    tri = np.tril(np.ones((n, n), bool))
    M = np.where(tri[:, :, None], ys[None, :, :], np.nan)  # (prefix, row, feature)
    med = np.nanmedian(M, axis=1)
    return np.nansum(np.abs(M - med[:, None, :]), axis=1)


# -- CART regression tree --------------------------------------------------


@dataclass
class TreeParams:
    criterion: str = "squared_error"
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features: int | None = None  # features tried per split (m_try)


def _best_cart_split(X, y, feats, params: TreeParams):
    n = y.size
    feats = np.asarray(feats)
    xs, (ys,) = _sorted_columns(X[:, feats], y)
    msl = params.min_samples_leaf
    nl = np.arange(1, n)[:, None]
    ok = (xs[1:] > xs[:-1]) & (nl >= msl) & (n - nl >= msl)
    if not ok.any():
        return (0.0, -1, np.nan)
    parent = impurity(y, params.criterion)
    if params.criterion == "squared_error":
        cs, cs2 = np.cumsum(ys, axis=0), np.cumsum(ys**2, axis=0)
        sl, sl2 = cs[:-1], cs2[:-1]
        sr, sr2 = cs[-1] - sl, cs2[-1] - sl2
        sse = (sl2 - sl**2 / nl) + (sr2 - sr**2 / (n - nl))
        dec = parent - sse / n
    else:
        left = _prefix_mad(ys)[:-1]
        right = _prefix_mad(ys[::-1])[::-1][1:]
        dec = parent - (left + right) / n
    return _pick(np.where(ok, dec, -np.inf), xs, feats)


def _leaf_value(y, criterion):
    return float(np.median(y)) if criterion == "absolute_error" else float(np.mean(y))


def build_tree(X, y, params: TreeParams | None = None, rng: np.random.Generator | None = None) -> RegressionTree:
    params = params or TreeParams()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    p = X.shape[1]
    m_try = p if params.max_features is None else max(1, min(p, int(params.max_features)))
    rng = rng or np.random.default_rng(0)
    tree = RegressionTree()

    def grow(idx: np.ndarray, depth: int) -> int:
        ys = y[idx]
        node = tree.add_leaf(_leaf_value(ys, params.criterion))
        if (
            idx.size < params.min_samples_split
            or (params.max_depth is not None and depth >= params.max_depth)
            or np.all(ys == ys[0])
        ):
            return node
        feats = np.arange(p) if m_try == p else rng.choice(p, size=m_try, replace=False)
        dec, f, thr = _best_cart_split(X[idx], ys, feats, params)
        if f < 0:
            return node
        mask = X[idx, f] <= thr
        tree.feature[node], tree.threshold[node], tree.gain[node] = f, thr, dec
        tree.left[node] = grow(idx[mask], depth + 1)
        tree.right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(y.size), 0)
    return tree


# -- random forest ---------------------------------------------------------


@dataclass
class ForestFit:
    trees: list[RegressionTree]
    n_features: int
    max_features: int | None
    bootstrap: bool
    seed: int

    def tree_predictions(self, X) -> np.ndarray:
        return np.stack([t.predict(X) for t in self.trees])

    def predict(self, X) -> np.ndarray:
        return self.tree_predictions(X).mean(axis=0)


def rf_fit(
    X,
    y,
    n_estimators: int = 100,
    params: TreeParams | None = None,
    bootstrap: bool = True,
    seed: int = 42,
) -> ForestFit:
    """Bagged trees on i.i.d. bootstrap resamples; each tree has its own RNG stream."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    params = params or TreeParams()
    n = y.size
    trees = []
    for b in range(n_estimators):
        rng = np.random.default_rng([seed, b])
        idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(build_tree(X[idx], y[idx], params, rng))
    return ForestFit(trees, X.shape[1], params.max_features, bootstrap, seed)


def mdi_importance(fit: ForestFit) -> np.ndarray:
    """Per-feature impurity decrease summed over each tree's splits, averaged over trees."""
    return np.mean([t.split_totals(fit.n_features) for t in fit.trees], axis=0)


# -- gradient boosting -----------------------------------------------------


def xgb_split_gain(g_l: float, h_l: float, g_r: float, h_r: float, lam: float, gamma: float) -> float:
    """``Score(parent) - Score(L) - Score(R) - gamma`` with ``Score = -G^2/(H + lam)``."""

    def score(g, h):
        return -(g * g) / (h + lam) if h + lam > 0 else 0.0

    return score(g_l + g_r, h_l + h_r) - score(g_l, h_l) - score(g_r, h_r) - gamma


@dataclass
class BoostParams:
    n_estimators: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0
    subsample: float = 1.0
    colsample_bytree: float = 1.0


@dataclass
class BoostFit:
    base_score: float
    learning_rate: float
    trees: list[RegressionTree]
    n_features: int
    train_mse: list[float] = field(default_factory=list)

    def predict(self, X) -> np.ndarray:
        out = np.full(np.asarray(X).shape[0], self.base_score)
        for t in self.trees:
            out += self.learning_rate * t.predict(X)
        return out


def _build_boost_tree(X, g, h, feats, bp: BoostParams) -> RegressionTree:
    feats = np.asarray(feats)
    tree = RegressionTree()
    lam = bp.reg_lambda

    def grow(idx: np.ndarray, depth: int) -> int:
        G, H = g[idx].sum(), h[idx].sum()
        node = tree.add_leaf(-G / (H + lam) if H + lam > 0 else 0.0)
        if depth >= bp.max_depth or idx.size < 2:
            return node
        xs, (gs, hs) = _sorted_columns(X[np.ix_(idx, feats)], g[idx], h[idx])
        gl, hl = np.cumsum(gs, axis=0)[:-1], np.cumsum(hs, axis=0)[:-1]
        gr, hr = G - gl, H - hl
        ok = (xs[1:] > xs[:-1]) & (hl >= bp.min_child_weight) & (hr >= bp.min_child_weight)
        gain = -(G * G) / (H + lam) + gl**2 / (hl + lam) + gr**2 / (hr + lam) - bp.gamma
        best = _pick(np.where(ok, gain, -np.inf), xs, feats) if ok.any() else (0.0, -1, np.nan)
        gain, f, thr = best
        if f < 0:
            return node
        mask = X[idx, f] <= thr
        tree.feature[node], tree.threshold[node], tree.gain[node] = f, thr, gain
        tree.left[node] = grow(idx[mask], depth + 1)
        tree.right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(X.shape[0]), 0)
    return tree


def xgb_fit(X, y, params: BoostParams | None = None, seed: int = 42) -> BoostFit:
    """Squared-error boosting with ``g = pred - y``, ``h = 1`` and base score ``mean(y)``."""
    bp = params or BoostParams()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    rng = np.random.default_rng(seed)
    fit = BoostFit(float(y.mean()), bp.learning_rate, [], p)
    pred = np.full(n, fit.base_score)
    for _ in range(bp.n_estimators):
        g, h = pred - y, np.ones(n)
        rows = np.arange(n)
        if bp.subsample < 1.0:
            rows = np.sort(rng.choice(n, size=max(1, int(round(bp.subsample * n))), replace=False))
        feats = np.arange(p)
        if bp.colsample_bytree < 1.0:
            feats = np.sort(rng.choice(p, size=max(1, int(round(bp.colsample_bytree * p))), replace=False))
        tree = _build_boost_tree(X[rows], g[rows], h[rows], feats, bp)
        fit.trees.append(tree)
        pred = pred + bp.learning_rate * tree.predict(X)
        fit.train_mse.append(float(np.mean((y - pred) ** 2)))
    return fit


def gain_importance(fit: BoostFit) -> np.ndarray:
    """Per-feature split gain summed within each tree, averaged over trees."""
    if not fit.trees:
        return np.zeros(fit.n_features)
    return np.mean([t.split_totals(fit.n_features) for t in fit.trees], axis=0)


# -- learner wrappers ------------------------------------------------------


class RandomForest(Learner):
    name = "RF"

    def __init__(
        self,
        n_estimators: int = 100,
        max_depth: int | None = None,
        min_samples_leaf: int = 1,
        min_samples_split: int = 2,
        max_features: float = 1.0,
        criterion: str = "squared_error",
        seed: int = 42,
        **kw,
    ):
        super().__init__(**kw)
        self.n_estimators = int(n_estimators)
        self.max_depth = None if max_depth is None else int(max_depth)
        self.min_samples_leaf = int(min_samples_leaf)
        self.min_samples_split = int(min_samples_split)
        self.max_features = float(max_features)
        self.criterion = criterion
        self.seed = int(seed)

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        m_try = max(1, int(round(self.max_features * X.shape[1])))
        tp = TreeParams(self.criterion, self.max_depth, self.min_samples_split, self.min_samples_leaf, m_try)
        self.fit_ = rf_fit(X, y, self.n_estimators, tp, True, self.seed)
        self._fitted = True
        return self

    def predict(self, X):
        self._check_fitted()
        return self.fit_.predict(X)

    def importance(self):
        self._check_fitted()
        return self._named(mdi_importance(self.fit_))


class GradientBoosting(Learner):
    name = "XGB"

    def __init__(self, seed: int = 42, **params):
        feature_names = params.pop("feature_names", ())
        dummy_mask = params.pop("dummy_mask", None)
        super().__init__(feature_names=feature_names, dummy_mask=dummy_mask)
        self.params = BoostParams(**params)
        self.seed = int(seed)

    def fit(self, X, y):
        self.fit_ = xgb_fit(X, y, self.params, self.seed)
        self._fitted = True
        return self

    def predict(self, X):
        self._check_fitted()
        return self.fit_.predict(X)

    def importance(self):
        self._check_fitted()
        return self._named(gain_importance(self.fit_))
