"""Synthetic quarterly datasets with a planted linear signal, for demos and tests."""

from __future__ import annotations

import numpy as np

from .data import SeriesFrame
from .quarters import Quarter, quarter_range


def make_synthetic(
    n_quarters: int = 134,
    n_features: int = 10,
    n_signal: int = 4,
    phi: float = 0.5,
    noise: float = 0.5,
    end: str = "2023 Q2",
    target: str = "gdp_growth",
    seed: int = 42,
) -> SeriesFrame:
    """Raw frame of AR(1) regressors and a target driven by the first ``n_signal`` of them.

    ``y_t = 0.5 + sum_j b_j x_{j,t} + e_t`` with ``b_j`` alternating in sign, so
    contemporaneous regressors carry most of the signal and the previous
    value of ``y`` carries little.
    """
    rng = np.random.default_rng(seed)
    last = Quarter.parse(end)
    index = quarter_range(last - (n_quarters - 1), last)
    X = np.zeros((n_quarters, n_features))
    shocks = rng.normal(size=(n_quarters, n_features))
    X[0] = shocks[0]
    for t in range(1, n_quarters):
        X[t] = phi * X[t - 1] + shocks[t]
    beta = np.zeros(n_features)
    beta[:n_signal] = [(1.0 if k % 2 == 0 else -0.6) for k in range(n_signal)]
    y = 0.5 + X @ beta + noise * rng.normal(size=n_quarters)
    names = [target] + [f"x{j:02d}" for j in range(n_features)]
    return SeriesFrame(index, names, np.column_stack([y, X]))
