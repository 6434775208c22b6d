"""Accuracy metrics, residual diagnostics and the Giacomini-White test with an
adaptive autocorrelation-robust variance."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats
from scipy.optimize import isotonic_regression


class DegenerateError(ValueError):
    pass


@dataclass(frozen=True)
class MetricBundle:
    msfe: float
    rmsfe: float
    mafe: float
    n: int

    def as_dict(self) -> dict:
        return asdict(self)


def metrics(forecasts, actuals) -> MetricBundle:
    f = np.asarray(forecasts, dtype=float)
    y = np.asarray(actuals, dtype=float)
    if f.shape != y.shape:
        raise ValueError("forecasts and actuals are not aligned")
    if f.size == 0:
        raise ValueError("no forecasts to evaluate")
    e = f - y
    msfe = float(np.mean(e**2))
    return MetricBundle(msfe, float(np.sqrt(msfe)), float(np.mean(np.abs(e))), int(e.size))


def rmsfe_ratio(model: MetricBundle, benchmark: MetricBundle) -> float:
    if benchmark.rmsfe <= 0:
        raise ZeroDivisionError("benchmark RMSFE is zero")
    return model.rmsfe / benchmark.rmsfe


# -- Shapiro-Wilk (Royston's AS R94 approximation) ------------------------

_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def _poly(c, x):
    return float(np.polynomial.polynomial.polyval(x, c))


def _sw_coefficients(n: int) -> np.ndarray:
    """Upper-half coefficients ``a_1 >= a_2 >= ...`` (length ``n // 2``)."""
    nn2 = n // 2
    if n == 3:
        return np.array([np.sqrt(0.5)])
    m = stats.norm.ppf((np.arange(1, nn2 + 1) - 0.375) / (n + 0.25))
    summ2 = 2.0 * np.sum(m**2)
    ssumm2 = np.sqrt(summ2)
    rsn = 1.0 / np.sqrt(n)
    a = -m / ssumm2
    a1 = _poly(_C1, rsn) - m[0] / ssumm2
    if n > 5:
        a2 = -m[1] / ssumm2 + _poly(_C2, rsn)
        fac = np.sqrt((summ2 - 2 * m[0] ** 2 - 2 * m[1] ** 2) / (1 - 2 * a1**2 - 2 * a2**2))
        a = -m / fac
        a[0], a[1] = a1, a2
    else:
        fac = np.sqrt((summ2 - 2 * m[0] ** 2) / (1 - 2 * a1**2))
        a = -m / fac
        a[0] = a1
    return a


def shapiro_wilk(residuals) -> tuple[float, float]:
    """W statistic and p-value via Royston's normalizing transformation."""
    x = np.sort(np.asarray(residuals, dtype=float))
    n = x.size
    if not 3 <= n <= 5000:
        raise ValueError("Shapiro-Wilk needs 3 <= n <= 5000")
    rng_ = x[-1] - x[0]
    if rng_ < 1e-19:
        raise DegenerateError("constant residuals")
    x = (x - x[0]) / rng_
    a = _sw_coefficients(n)
    k = a.size
    num = np.sum(a * (x[::-1][:k] - x[:k])) ** 2
    den = np.sum((x - x.mean()) ** 2)
    w = min(float(num / den), 1.0)
    if n == 3:
        p = (6 / np.pi) * (np.arcsin(np.sqrt(w)) - np.pi / 3)
        return w, float(np.clip(p, 0.0, 1.0))
    y = np.log1p(-w) if w < 1 else -np.inf
    if n <= 11:
        gamma = _poly(_G, n)
        if y >= gamma:
            return w, 1e-99
        y = -np.log(gamma - y)
        mu, sigma = _poly(_C3, n), np.exp(_poly(_C4, n))
    else:
        ln = np.log(n)
        mu, sigma = _poly(_C5, ln), np.exp(_poly(_C6, ln))
    return w, float(stats.norm.sf((y - mu) / sigma))


# -- Ljung-Box ------------------------------------------------------------


def autocorrelations(x, nlags: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    u = x - x.mean()
    den = u @ u
    if den == 0:
        raise DegenerateError("constant series has no autocorrelation")
    return np.array([u[k:] @ u[: u.size - k] / den for k in range(1, nlags + 1)])


def ljung_box(residuals, lags: int = 4) -> tuple[float, float]:
    """``Q = n(n+2) sum_k rho_k^2/(n-k)`` with a chi-squared(lags) upper-tail p-value."""
    x = np.asarray(residuals, dtype=float)
    n = x.size
    if lags < 1 or n <= lags:
        raise ValueError("need 1 <= lags < n")
    rho = autocorrelations(x, lags)
    q = float(n * (n + 2) * np.sum(rho**2 / (n - np.arange(1, lags + 1))))
    return q, float(stats.chi2.sf(q, lags))


# -- adaptive long-run variance and Giacomini-White -----------------------


def autocovariances(u, max_lag: int) -> np.ndarray:
    """``gamma_k = (1/n) sum_t u_t u_{t-k}`` for ``k = 0..max_lag`` (``u`` already centered)."""
    u = np.asarray(u, dtype=float)
    n = u.size
    return np.array([u[k:] @ u[: n - k] / n for k in range(min(max_lag, n - 1) + 1)])


def weave_weights(gamma: np.ndarray) -> np.ndarray:
    """Nonincreasing projection of ``|gamma_k|/gamma_0``, clipped to [0, 1]."""
    r = np.abs(gamma) / gamma[0]
    fit = isotonic_regression(r, increasing=False).x
    return np.clip(fit, 0.0, 1.0)


def weave_covariance(residuals, max_lag: int = 4) -> float:
    """Variance of the sample mean of ``residuals`` from an adaptively weighted long-run variance.

    Falls back to ``gamma_0`` if the weighted sum is not positive.
    """
    u = np.asarray(residuals, dtype=float)
    u = u - u.mean()
    gamma = autocovariances(u, max_lag)
    if gamma[0] <= 0:
        raise DegenerateError("zero residual variance")
    w = weave_weights(gamma)
    lrv = gamma[0] + 2.0 * np.sum(w[1:] * gamma[1:])
    if lrv <= 0:
        lrv = gamma[0]
    return float(lrv / u.size)


@dataclass(frozen=True)
class GwReport:
    intercept: float
    intercept_p: float
    wald: float
    wald_p: float
    n: int
    degenerate: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def giacomini_white(loss_model, loss_benchmark, max_lag: int = 4) -> GwReport:
    """Intercept-only test on ``d_t = loss_model - loss_benchmark``.

    A significantly negative intercept means the model beats the benchmark.
    """
    lm = np.asarray(loss_model, dtype=float)
    lb = np.asarray(loss_benchmark, dtype=float)
    if lm.shape != lb.shape or lm.ndim != 1:
        raise ValueError("loss series are not aligned")
    n = lm.size
    if n < 8:
        raise ValueError("Giacomini-White needs at least 8 observations")
    d = lm - lb
    mu = float(d.mean())
    if np.allclose(d, d[0], rtol=0, atol=1e-15 * max(1.0, np.abs(d).max())):
        flag = "identical forecasts" if d[0] == 0 else "constant loss differential"
        return GwReport(mu, 1.0, 0.0, 1.0, n, flag)
    var = weave_covariance(d, max_lag)
    wald = mu * mu / var
    t = mu / np.sqrt(var)
    return GwReport(
        mu,
        float(2 * stats.t.sf(abs(t), n - 1)),
        float(wald),
        float(stats.chi2.sf(wald, 1)),
        n,
    )
