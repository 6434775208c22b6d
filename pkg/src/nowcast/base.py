"""The uniform learner contract shared by every model family."""

from __future__ import annotations

from typing import Sequence

import numpy as np


class NotFittedError(RuntimeError):
    pass


class Learner:
    """Base class: ``fit(X, y)``, ``predict(X)``, ``importance()``.

    ``view`` tells the pipeline which input representation the learner
    consumes:

    ``"tabular"``
        ``(n, p)`` standardized features of the row's own quarter.
    ``"lags"``
        ``(n, max_lag)`` past target values, column ``k`` holding ``y_{t-k-1}``.
    ``"sequence"``
        ``(n, window, p)`` trailing feature windows ending at the row's quarter.
    """

    name = "learner"
    view = "tabular"

    def __init__(self, feature_names: Sequence[str] = (), dummy_mask: Sequence[bool] | None = None):
        self.feature_names = list(feature_names)
        if dummy_mask is None:
            dummy_mask = [False] * len(self.feature_names)
        self.dummy_mask = np.asarray(dummy_mask, dtype=bool)
        self._fitted = False

    def fit(self, X, y) -> Learner:
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        raise NotImplementedError

    def importance(self) -> dict[str, float]:
        return {}

    def _check_fitted(self) -> None:
        if not self._fitted:
            raise NotFittedError(f"{type(self).__name__} must be fitted before use")

    def _named(self, values: np.ndarray, skip_dummies: bool = True) -> dict[str, float]:
        out = {}
        for j, name in enumerate(self.feature_names):
            if skip_dummies and self.dummy_mask.size and self.dummy_mask[j]:
                continue
            out[name] = float(values[j])
        return out
