import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nowcast.trees import (
    BoostParams,
    GradientBoosting,
    InvalidSplitError,
    RandomForest,
    TreeParams,
    _best_cart_split,
    build_tree,
    gain_importance,
    impurity,
    impurity_decrease,
    mdi_importance,
    rf_fit,
    xgb_fit,
    xgb_split_gain,
)


class TestImpurity:
    def test_pure_node(self):
        y = np.full(6, 2.5)
        for k in range(1, 6):
            assert impurity_decrease(y, np.arange(6) < k) == 0.0

    def test_perfect_split(self):
        assert impurity_decrease([0, 0, 10, 10], [1, 1, 0, 0]) == pytest.approx(25.0)

    def test_absolute_error(self):
        assert impurity([1, 2, 9], "absolute_error") == pytest.approx((1 + 0 + 7) / 3)

    def test_empty_child(self):
        with pytest.raises(InvalidSplitError):
            impurity_decrease([1, 2, 3], [True, True, True])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["squared_error", "absolute_error"]), st.integers(1, 3))
def test_split_search_matches_brute_force(seed, criterion, msl):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 5, size=(15, 3)).astype(float)
    y = rng.normal(size=15)
    dec, f, thr = _best_cart_split(X, y, np.arange(3), TreeParams(criterion, min_samples_leaf=msl))
    best = (-np.inf, -1, np.nan)
    for j in range(3):
        vals = np.unique(X[:, j])
        for a, b in zip(vals, vals[1:]):
            t = (a + b) / 2
            mask = X[:, j] <= t
            if min(mask.sum(), (~mask).sum()) < msl:
                continue
            d = impurity_decrease(y, mask, criterion)
            if d > best[0] + 1e-12:
                best = (d, j, t)
    if best[1] < 0:
        assert f < 0
    else:
        assert dec == pytest.approx(best[0], abs=1e-10)
        assert (f, thr) == (best[1], best[2])


def test_tie_break_lowest_feature():
    X = np.array([[0, 0], [0, 0], [1, 1], [1, 1]], float)
    _, f, thr = _best_cart_split(X, np.array([0, 0, 1, 1.0]), np.arange(2), TreeParams())
    assert (f, thr) == (0, 0.5)


def test_tree_partitions_and_fits():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 2))
    y = np.where(X[:, 0] > 0, 3.0, -1.0)
    tree = build_tree(X, y, TreeParams(max_depth=1))
    assert tree.feature[0] == 0 and tree.n_leaves == 2
    np.testing.assert_allclose(tree.predict(X), y)


class TestForest:
    def test_single_tree_single_split(self):
        X = np.column_stack([np.arange(8.0), np.zeros(8)])
        y = (np.arange(8) >= 4).astype(float)
        fit = rf_fit(X, y, 1, TreeParams(max_depth=1), bootstrap=False)
        imp = mdi_importance(fit)
        assert imp[0] > 0 and imp[1] == 0

    def test_constant_target(self):
        fit = rf_fit(np.random.default_rng(0).normal(size=(20, 3)), np.ones(20), 5)
        np.testing.assert_array_equal(mdi_importance(fit), 0.0)

    def test_step_function_beats_ols(self):
        rng = np.random.default_rng(42)
        x = rng.uniform(-1, 1, 60)
        y = (x > 0).astype(float)
        xt = np.linspace(-1, 1, 101)
        yt = (xt > 0).astype(float)
        fit = rf_fit(x[:, None], y, 25, seed=42)
        rf_mse = np.mean((fit.predict(xt[:, None]) - yt) ** 2)
        ols_mse = np.mean((np.polyval(np.polyfit(x, y, 1), xt) - yt) ** 2)
        assert rf_mse < ols_mse

    def test_mean_of_trees_and_bookkeeping(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(40, 4))
        y = X[:, 0] + rng.normal(size=40)
        fit = rf_fit(X, y, 7, TreeParams(max_depth=3, max_features=2), seed=1)
        np.testing.assert_array_equal(fit.predict(X), np.mean([t.predict(X) for t in fit.trees], axis=0))
        imp = mdi_importance(fit)
        assert np.all(imp >= 0)
        assert imp.sum() == pytest.approx(np.mean([sum(t.gain) for t in fit.trees]))

    def test_reproducible(self):
        X = np.random.default_rng(5).normal(size=(30, 3))
        y = X[:, 1] ** 2
        a = rf_fit(X, y, 5, TreeParams(max_features=2), seed=9).predict(X)
        b = rf_fit(X, y, 5, TreeParams(max_features=2), seed=9).predict(X)
        np.testing.assert_array_equal(a, b)


class TestBoosting:
    def test_gain_examples(self):
        assert xgb_split_gain(-4, 2, 4, 2, 0, 0) == pytest.approx(16.0)
        assert xgb_split_gain(1.5, 3, 1.5, 3, 1.0, 0.7) == pytest.approx(
            -(9 / 7) + 2 * (2.25 / 4) - 0.7)
        assert xgb_split_gain(2, 3, 2, 3, 0, 0.4) == pytest.approx(-(16 / 6) + 2 * 4 / 3 - 0.4)

    def test_identical_children(self):
        # both children carry zero gradient: no improvement, only the penalty
        assert xgb_split_gain(0, 2, 0, 2, 1.0, 0.3) == pytest.approx(-0.3)

    def test_large_gamma_single_leaf(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(30, 2))
        fit = xgb_fit(X, X[:, 0], BoostParams(n_estimators=5, gamma=1e9))
        assert all(t.n_leaves == 1 for t in fit.trees)

    def test_zero_learning_rate(self):
        X = np.random.default_rng(1).normal(size=(20, 2))
        y = X[:, 0] * 3
        fit = xgb_fit(X, y, BoostParams(n_estimators=10, learning_rate=0.0))
        np.testing.assert_array_equal(fit.predict(X), np.full(20, y.mean()))

    def test_stump_on_sign(self):
        x = np.linspace(-1, 1, 20)
        X = np.column_stack([x, np.zeros(20)])
        fit = xgb_fit(X, np.sign(x), BoostParams(n_estimators=1, max_depth=1))
        imp = gain_importance(fit)
        assert fit.trees[0].feature[0] == 0
        assert imp[0] > 0 and imp[1] == 0

    def test_train_mse_nonincreasing(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(50, 4))
        y = np.sin(X[:, 0]) + X[:, 1] ** 2 + 0.1 * rng.normal(size=50)
        mse = xgb_fit(X, y, BoostParams(n_estimators=40, learning_rate=0.3, reg_lambda=1.0)).train_mse
        assert all(b <= a + 1e-12 for a, b in zip(mse, mse[1:]))

    def test_bit_reproducible(self):
        X = np.random.default_rng(4).normal(size=(30, 3))
        y = X @ [1.0, -2.0, 0.5]
        a = xgb_fit(X, y, BoostParams(n_estimators=15), seed=3).predict(X)
        b = xgb_fit(X, y, BoostParams(n_estimators=15), seed=3).predict(X)
        assert a.tobytes() == b.tobytes()

    def test_prediction_is_accumulated_sum(self):
        X = np.random.default_rng(6).normal(size=(25, 2))
        fit = xgb_fit(X, X[:, 0], BoostParams(n_estimators=6, learning_rate=0.2))
        manual = fit.base_score + sum(0.2 * t.predict(X) for t in fit.trees)
        np.testing.assert_allclose(fit.predict(X), manual, rtol=1e-14)


def test_learner_wrappers_skip_dummies():
    rng = np.random.default_rng(7)
    X = np.column_stack([rng.normal(size=40), rng.normal(size=40), np.arange(40) % 2])
    y = X[:, 0] + 0.5 * X[:, 2]
    names, mask = ["a", "b", "season_q1"], [False, False, True]
    for m in (RandomForest(n_estimators=10, max_depth=3, feature_names=names, dummy_mask=mask),
              GradientBoosting(n_estimators=10, feature_names=names, dummy_mask=mask)):
        imp = m.fit(X, y).importance()
        assert set(imp) == {"a", "b"} and imp["a"] > imp["b"] >= 0
