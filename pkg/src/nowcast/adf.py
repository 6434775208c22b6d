"""Augmented Dickey-Fuller unit-root test (constant, no trend, fixed lag order).

P-values use MacKinnon's (1994) response-surface approximation and critical
values use MacKinnon's (2010) finite-sample surface, both for the
constant-only, single-series case. The coefficients are embedded so the
test has no dependency beyond numpy/scipy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

# MacKinnon (1994), regression "c", N = 1.
_TAU_MAX = 2.74
_TAU_MIN = -18.83
_TAU_STAR = -1.61
_SMALLP = (2.1659, 1.4412, 0.038269)
_LARGEP = (1.7339, 0.93202, -0.12745, -0.010368)

# MacKinnon (2010), regression "c", N = 1: b0 + b1/T + b2/T^2 + b3/T^3.
_CRIT_2010 = {
    "1%": (-3.43035, -6.5393, -16.786, -79.433),
    "5%": (-2.86154, -2.8903, -4.234, -40.040),
    "10%": (-2.56677, -1.5384, -2.809, 0.0),
}


@dataclass(frozen=True)
class AdfResult:
    statistic: float
    pvalue: float
    lags: int
    nobs: int
    critical_values: dict[str, float]

    def rejects_unit_root(self, alpha: float) -> bool:
        return self.pvalue < alpha


def mackinnon_pvalue(stat: float) -> float:
    """Approximate asymptotic p-value of an ADF t-statistic (constant only)."""
    if stat > _TAU_MAX:
        return 1.0
    if stat < _TAU_MIN:
        return 0.0
    coef = _SMALLP if stat <= _TAU_STAR else _LARGEP
    z = sum(c * stat**k for k, c in enumerate(coef))
    return float(norm.cdf(z))


def mackinnon_critical_values(nobs: int) -> dict[str, float]:
    return {
        level: b[0] + b[1] / nobs + b[2] / nobs**2 + b[3] / nobs**3
        for level, b in _CRIT_2010.items()
    }


def adf_test(x, lags: int = 4) -> AdfResult:
    """Run the ADF regression ``dy_t = a + r*y_{t-1} + sum_i f_i*dy_{t-i} + e_t``.

    Parameters
    ----------
    x : array_like
        Series in levels.
    lags : int
        Number of lagged differences (fixed, no automatic selection).

    Returns
    -------
    AdfResult
        t-statistic on ``r`` with its MacKinnon p-value.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("adf_test expects a 1-D series")
    dx = np.diff(x)
    nobs = dx.size - lags
    if nobs < lags + 3:
        raise ValueError(f"series too short for an ADF regression with {lags} lags")
    y = dx[lags:]
    cols = [np.ones(nobs), x[lags:-1]]
    for i in range(1, lags + 1):
        cols.append(dx[lags - i : -i])
    X = np.column_stack(cols)
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    dof = nobs - X.shape[1]
    sigma2 = resid @ resid / dof
    xtx_inv = np.linalg.pinv(X.T @ X)
    se = np.sqrt(sigma2 * xtx_inv[1, 1])
    stat = float(beta[1] / se)
    return AdfResult(
        statistic=stat,
        pvalue=mackinnon_pvalue(stat),
        lags=lags,
        nobs=nobs,
        critical_values=mackinnon_critical_values(nobs),
    )
