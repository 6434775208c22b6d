import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nowcast.base import NotFittedError
from nowcast.linear import (
    AutoRegressive,
    ElasticNet,
    Lasso,
    RandomWalk,
    Ridge,
    SingularSolveWarning,
    ar_fit,
    ar_fit_forecast,
    cbfi_importance,
    enet_fit,
    lasso_fit,
    ridge_fit,
    rw_forecast,
)

from oracles import lasso_by_enumeration


def _problem(seed, n=10, p=5):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = X @ rng.normal(size=p) + 0.3 * rng.normal(size=n)
    return X, y


class TestBenchmarks:
    def test_rw(self):
        assert rw_forecast([0.2, 1.7]) == 1.7
        assert rw_forecast([5]) == 5
        with pytest.raises(ValueError):
            rw_forecast([])

    def test_ar_recovers_phi(self):
        rng = np.random.default_rng(42)
        e = rng.normal(size=500)
        y = np.zeros(500)
        for t in range(1, 500):
            y[t] = 0.5 * y[t - 1] + e[t]
        a, phi = ar_fit(y, 1)
        A = np.column_stack([np.ones(499), y[:-1]])
        oracle = np.linalg.lstsq(A, y[1:], rcond=None)[0]
        assert 0.4 <= phi[0] <= 0.6
        np.testing.assert_allclose([a, phi[0]], oracle, atol=1e-10)

    def test_ar_constant_series(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SingularSolveWarning)
            assert ar_fit_forecast(np.full(20, 1.3), 3) == pytest.approx(1.3, abs=1e-6)

    def test_ar_default_order(self):
        assert AutoRegressive().p == 3

    def test_ar_learner_matches_function(self):
        rng = np.random.default_rng(1)
        y = rng.normal(size=40).cumsum() * 0.1
        # row t holds y_{t-1}, y_{t-2}, y_{t-3} for targets y_3..y_39
        lags = np.column_stack([y[2:39], y[1:38], y[0:37]])
        m = AutoRegressive(p=3).fit(lags, y[3:])
        assert m.predict([[y[39], y[38], y[37]]])[0] == pytest.approx(ar_fit_forecast(y, 3), rel=1e-10)

    def test_rw_learner_returns_last_value(self):
        m = RandomWalk().fit(np.zeros((3, 2)), np.zeros(3))
        np.testing.assert_array_equal(m.predict([[1.7, 0.2]]), [1.7])


class TestRidge:
    def test_zero_penalty_is_ols(self):
        X, y = _problem(0, n=30)
        fit = ridge_fit(X, y, 0.0)
        A = np.column_stack([np.ones(30), X])
        np.testing.assert_allclose(np.r_[fit.intercept, fit.coef], np.linalg.lstsq(A, y, rcond=None)[0], atol=1e-10)

    def test_full_shrinkage(self):
        X, y = _problem(1)
        fit = ridge_fit(X, y, 1e9)
        assert np.abs(fit.coef).max() < 1e-6
        assert fit.intercept == pytest.approx(y.mean(), abs=1e-6)

    @pytest.mark.parametrize("alpha", [0.05, 0.5, 2.0])
    def test_single_predictor_shape(self, alpha):
        x = np.linspace(-1, 1, 21)
        x = (x - x.mean()) / x.std()
        n = x.size
        fit = ridge_fit(x[:, None], 2 * x, alpha)
        assert fit.coef[0] == pytest.approx(2 * n / (n + 2 * n * alpha), rel=1e-12)


class TestLasso:
    def test_soft_threshold_example(self):
        x = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
        x = x / x.std()
        fit = lasso_fit(x[:, None], 2 * x, 0.5)
        grid = np.linspace(0, 3, 30001)
        obj = [0.5 * np.mean((2 * x - b * x) ** 2) + 0.5 * abs(b) for b in grid]
        assert fit.coef[0] == pytest.approx(1.5, abs=1e-6)
        assert fit.coef[0] == pytest.approx(grid[int(np.argmin(obj))], abs=1e-4)

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("lam", [0.01, 0.1, 0.4])
    def test_matches_enumeration_oracle(self, seed, lam):
        X, y = _problem(seed)
        np.testing.assert_allclose(lasso_fit(X, y, lam, tol=1e-10).coef, lasso_by_enumeration(X, y, lam), atol=1e-4)

    def test_large_penalty_exact_zero(self):
        X, y = _problem(3)
        assert np.all(lasso_fit(X, y, 1e3).coef == 0.0)

    @pytest.mark.parametrize("seed", range(3))
    def test_kkt(self, seed):
        X, y = _problem(seed, n=40, p=8)
        lam = 0.05
        fit = lasso_fit(X, y, lam, tol=1e-12)
        Xc, yc = X - X.mean(0), y - y.mean()
        grad = Xc.T @ (yc - Xc @ fit.coef) / len(y)
        act = fit.coef != 0
        assert np.all(np.abs(grad[~act]) <= lam + 1e-6)
        np.testing.assert_allclose(grad[act], lam * np.sign(fit.coef[act]), atol=1e-6)

    def test_objective_nonincreasing(self):
        X, y = _problem(4, n=30, p=8)
        h = enet_fit(X, y, 0.05, 0.7, track_objective=True).objective_history
        assert all(b <= a + 1e-12 for a, b in zip(h, h[1:]))


class TestElasticNet:
    @pytest.mark.parametrize("seed", range(5))
    def test_mix_one_is_lasso(self, seed):
        X, y = _problem(seed)
        np.testing.assert_allclose(enet_fit(X, y, 0.1, 1.0).coef, lasso_fit(X, y, 0.1).coef, atol=1e-6)

    def test_mix_zero_is_ridge(self):
        X, y = _problem(5, n=30)
        np.testing.assert_allclose(enet_fit(X, y, 0.3, 0.0, tol=1e-12).coef, ridge_fit(X, y, 0.3).coef, atol=1e-8)

    def test_continuous_in_mix(self):
        X, y = _problem(6, n=30)
        a = enet_fit(X, y, 0.2, 0.5, tol=1e-12).coef
        b = enet_fit(X, y, 0.2, 0.5 + 1e-6, tol=1e-12).coef
        assert np.abs(a - b).max() < 1e-4

    def test_bad_mix(self):
        with pytest.raises(ValueError):
            enet_fit(np.eye(3), np.ones(3), 0.1, 1.5)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000), st.floats(1e-3, 1.0), st.floats(0.0, 1.0))
    def test_coefficients_finite(self, seed, alpha, mix):
        X, y = _problem(seed, n=15, p=6)
        assert np.isfinite(enet_fit(X, y, alpha, mix).coef).all()


class TestImportance:
    def test_rank_and_dummies(self):
        from nowcast.linear import PenalizedFit
        fit = PenalizedFit(0.0, np.array([2.0, -3.0, 1.0]), 0.1)
        imp = cbfi_importance(fit, ["a", "b", "season_q1"], [False, False, True])
        assert imp == {"a": 2.0, "b": -3.0}
        assert sorted(imp, key=lambda k: -abs(imp[k])) == ["b", "a"]

    def test_learners(self):
        X, y = _problem(7, n=30, p=3)
        for cls, kw in ((Ridge, {"alpha": 0.1}), (Lasso, {"lam": 0.05}), (ElasticNet, {"alpha": 0.05})):
            m = cls(feature_names=["a", "b", "c"], **kw)
            with pytest.raises(NotFittedError):
                m.predict(X)
            m.fit(X, y)
            assert set(m.importance()) <= {"a", "b", "c"}
            assert m.predict(X).shape == (30,)
