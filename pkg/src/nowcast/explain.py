"""Importance aggregation across walk-forward splits, top-k ranking and rank
correlation between predictors and the target."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .quarters import Quarter
from .windows import Horizon, subperiod_mask


class AggregationError(ValueError):
    pass


class UndefinedCorrelationError(ValueError):
    pass


# measures that are nonnegative by construction rank by value, the rest by |value|
NONNEGATIVE_MEASURES = frozenset({"VIP", "MDI", "GBI"})


@dataclass
class ImportanceTrajectory:
    """One importance value per (feature, split) for a single model."""

    model: str
    measure: str
    quarters: list[Quarter] = field(default_factory=list)
    values: dict[str, list[float]] = field(default_factory=dict)

    @property
    def signed(self) -> bool:
        return self.measure not in NONNEGATIVE_MEASURES

    def append(self, quarter: Quarter, importance: Mapping[str, float]) -> None:
        k = len(self.quarters)
        for name in importance:
            if name not in self.values:
                self.values[name] = [0.0] * k
        for name, series in self.values.items():
            series.append(float(importance.get(name, 0.0)))
        self.quarters.append(quarter)

    def matrix(self) -> tuple[list[str], np.ndarray]:
        names = sorted(self.values)
        return names, np.array([self.values[n] for n in names]).reshape(len(names), len(self.quarters))


def aggregate(traj: ImportanceTrajectory, mask: Sequence[bool] | None = None) -> dict[str, float]:
    """Per-feature mean over the splits selected by ``mask`` (all by default)."""
    names, M = traj.matrix()
    sel = np.ones(len(traj.quarters), bool) if mask is None else np.asarray(mask, bool)
    if sel.size != len(traj.quarters):
        raise AggregationError("mask length does not match the trajectory")
    if not sel.any():
        raise AggregationError(f"no splits selected for {traj.model}")
    return {n: float(v) for n, v in zip(names, M[:, sel].mean(axis=1))}


def aggregate_period(traj: ImportanceTrajectory, period: str, horizon: Horizon) -> dict[str, float]:
    return aggregate(traj, subperiod_mask(traj.quarters, period, horizon))


def top_k(means: Mapping[str, float], k: int = 10, signed: bool = True,
          exclude: Sequence[str] = ()) -> list[tuple[str, float]]:
    """Features ranked by ``|mean|`` (signed measures) or ``mean``; ties by name."""
    if k < 1:
        raise ValueError("k must be >= 1")
    skip = set(exclude)
    items = [(n, float(v)) for n, v in means.items() if n not in skip]
    items.sort(key=lambda nv: (-(abs(nv[1]) if signed else nv[1]), nv[0]))
    return items[:k]


def spearman(x, y) -> float:
    """Pearson correlation of average ranks."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("spearman needs two 1-d series of equal length")
    if x.size < 3:
        raise ValueError("spearman needs at least 3 points")
    rx, ry = rankdata(x), rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    den = np.sqrt((rx @ rx) * (ry @ ry))
    if den == 0:
        raise UndefinedCorrelationError("a series has zero rank variance")
    return float(np.clip(rx @ ry / den, -1.0, 1.0))


def spearman_table(features: Mapping[str, np.ndarray], target) -> dict[str, float]:
    """Rank correlation of each predictor with the target; constant predictors are skipped."""
    out = {}
    for name, col in features.items():
        try:
            out[name] = spearman(col, target)
        except UndefinedCorrelationError:
            continue
    return out
