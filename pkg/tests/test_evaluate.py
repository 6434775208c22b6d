import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from statsmodels.stats.diagnostic import acorr_ljungbox

from nowcast.evaluate import (
    DegenerateError,
    autocovariances,
    giacomini_white,
    ljung_box,
    metrics,
    rmsfe_ratio,
    shapiro_wilk,
    weave_covariance,
    weave_weights,
)

DRAWS = {
    "normal-20": lambda rng: rng.normal(size=20),
    "exponential-50": lambda rng: rng.exponential(size=50),
    "t3-120": lambda rng: rng.standard_t(3, size=120),
}


def diagnostics_gaps(seed=42):
    """Largest |dW|, |dp_sw|, |dQ|, |dp_lb| against scipy / statsmodels over the fixed draws."""
    gaps = np.zeros(4)
    for make in DRAWS.values():
        x = make(np.random.default_rng(seed))
        w, p = shapiro_wilk(x)
        ref = stats.shapiro(x)
        q, qp = ljung_box(x, 4)
        lb = acorr_ljungbox(x, lags=[4])
        row = [abs(w - ref.statistic), abs(p - ref.pvalue),
               abs(q - float(lb["lb_stat"].iloc[0])), abs(qp - float(lb["lb_pvalue"].iloc[0]))]
        gaps = np.maximum(gaps, row)
    return gaps


def gw_rejection_rates(n_draws=2000, n=26, seed=0):
    rng = np.random.default_rng(seed)
    null = power = 0
    for _ in range(n_draws):
        e1, e2 = rng.normal(size=n), rng.normal(size=n)
        null += giacomini_white(e1**2, e2**2).wald_p < 0.05
        d = rng.normal(-1.0, 0.1, size=n)
        r = giacomini_white(d, np.zeros(n))
        power += r.wald_p < 0.05 and r.intercept < 0
    return null / n_draws, power / n_draws


class TestMetrics:
    def test_perfect(self):
        m = metrics([1.0, 2.0], [1.0, 2.0])
        assert (m.msfe, m.rmsfe, m.mafe) == (0.0, 0.0, 0.0)

    def test_hand_example(self):
        m = metrics([3.0, 4.0], [0.0, 0.0])
        assert m.msfe == 12.5 and m.rmsfe == pytest.approx(3.5355339, rel=1e-7) and m.mafe == 3.5

    def test_empty(self):
        with pytest.raises(ValueError):
            metrics([], [])

    def test_ratios(self):
        a = metrics([1.0], [0.0])
        assert rmsfe_ratio(a, a) == 1.0
        assert rmsfe_ratio(a, metrics([2.0], [0.0])) == 0.5
        with pytest.raises(ZeroDivisionError):
            rmsfe_ratio(a, metrics([0.0], [0.0]))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_permutation_invariant(self, seed):
        rng = np.random.default_rng(seed)
        f, y = rng.normal(size=12), rng.normal(size=12)
        perm = rng.permutation(12)
        a, b = metrics(f, y), metrics(f[perm], y[perm])
        assert a.msfe == pytest.approx(b.msfe) and a.mafe == pytest.approx(b.mafe)
        assert a.rmsfe == pytest.approx(np.sqrt(a.msfe))


class TestShapiroWilk:
    def test_matches_reference_on_fixed_draws(self):
        gaps = diagnostics_gaps()
        assert gaps[0] <= 1e-3 and gaps[1] <= 5e-3

    def test_normal_draw_not_rejected(self):
        assert shapiro_wilk(np.random.default_rng(42).normal(size=20))[1] > 0.05

    def test_exponential_rejected(self):
        assert shapiro_wilk(np.random.default_rng(42).exponential(size=50))[1] < 0.01

    @pytest.mark.parametrize("n", [3, 4, 5, 11, 12, 30, 200, 1000])
    def test_sizes(self, n):
        x = np.random.default_rng(n).normal(size=n)
        w, p = shapiro_wilk(x)
        ref = stats.shapiro(x)
        assert 0 < w <= 1
        assert w == pytest.approx(ref.statistic, abs=1e-6)
        assert p == pytest.approx(ref.pvalue, abs=1e-5)

    def test_constant(self):
        with pytest.raises(DegenerateError):
            shapiro_wilk(np.ones(10))


class TestLjungBox:
    def test_matches_reference(self):
        gaps = diagnostics_gaps()
        assert gaps[2] <= 1e-6 and gaps[3] <= 5e-3

    def test_zero_autocorrelation(self):
        # mean zero, and the only nonzero products sit at lag 6
        q, p = ljung_box([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0], 4)
        assert q == 0.0 and p == 1.0

    def test_ar1_rejected(self):
        rng = np.random.default_rng(42)
        e = rng.normal(size=200)
        x = np.zeros(200)
        for t in range(1, 200):
            x[t] = 0.8 * x[t - 1] + e[t]
        assert ljung_box(x, 4)[1] < 0.01

    def test_order_matters(self):
        rng = np.random.default_rng(1)
        x = np.cumsum(rng.normal(size=60))
        assert ljung_box(x, 4)[0] != pytest.approx(ljung_box(rng.permutation(x), 4)[0])

    def test_too_short(self):
        with pytest.raises(ValueError):
            ljung_box([1.0, 2.0, 3.0], 4)


class TestWeave:
    def test_max_lag_zero(self):
        u = np.random.default_rng(0).normal(size=50)
        assert weave_covariance(u, 0) == pytest.approx(np.var(u) / 50, rel=1e-12)

    def test_iid_close_to_variance(self):
        ratios = []
        for s in range(50):
            u = np.random.default_rng(s).normal(size=500)
            ratios.append(weave_covariance(u, 4) * 500 / np.var(u))
        assert abs(np.mean(ratios) - 1.0) < 0.10

    def test_positive_autocorrelation_inflates(self):
        rng = np.random.default_rng(3)
        e = rng.normal(size=2000)
        u = np.zeros(2000)
        for t in range(1, 2000):
            u[t] = 0.6 * u[t - 1] + e[t]
        lrv = weave_covariance(u, 4) * 2000
        g0 = np.var(u)
        assert g0 < lrv <= (1 + 0.6) / (1 - 0.6) * g0

    def test_weights_monotone_clipped(self):
        w = weave_weights(np.array([1.0, -0.2, 0.5, 0.1, 0.3]))
        assert w[0] == 1.0 and np.all(np.diff(w) <= 1e-15) and np.all((w >= 0) & (w <= 1))

    def test_autocovariances(self):
        u = np.array([1.0, -1.0, 2.0, 0.0])
        np.testing.assert_allclose(autocovariances(u, 2), [6 / 4, (-1 - 2 + 0) / 4, (2 + 0) / 4])

    def test_degenerate(self):
        with pytest.raises(DegenerateError):
            weave_covariance(np.ones(10))


class TestGiacominiWhite:
    def test_identical_forecasts(self):
        l = np.random.default_rng(0).chisquare(1, 20)
        r = giacomini_white(l, l)
        assert r.degenerate == "identical forecasts" and r.wald_p == 1.0

    def test_constant_differential(self):
        l = np.random.default_rng(0).chisquare(1, 20)
        assert giacomini_white(l - 1.0, l).degenerate == "constant loss differential"

    def test_power_negative_intercept(self):
        d = np.random.default_rng(42).normal(-1.0, 0.1, size=26)
        r = giacomini_white(d, np.zeros(26))
        assert r.intercept < 0 and r.wald_p < 0.05 and r.intercept_p < 0.05

    def test_calibration_small(self):
        null, power = gw_rejection_rates(300)
        assert 0.01 <= null <= 0.12 and power == 1.0

    def test_pvalues_in_unit_interval(self):
        rng = np.random.default_rng(9)
        r = giacomini_white(rng.chisquare(1, 30), rng.chisquare(1, 30))
        assert 0 <= r.intercept_p <= 1 and 0 <= r.wald_p <= 1 and r.wald >= 0

    def test_too_short(self):
        with pytest.raises(ValueError):
            giacomini_white(np.ones(5), np.zeros(5))
