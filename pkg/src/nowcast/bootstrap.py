"""Segmented pair block bootstrap for forecast intervals and importance
confidence intervals.

The train+validation sample is cut at known structural-break quarters;
within each segment, contiguous blocks of rows are drawn with replacement,
concatenated and truncated to the segment length. Rows stay paired, so
regressors, target and any lagged views move together.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .quarters import Quarter

logger = logging.getLogger(__name__)

DEFAULT_BREAKS = ("1997 Q3", "2001 Q1", "2003 Q1", "2008 Q3", "2020 Q1", "2022 Q1")
MAX_FAILURE_SHARE = 0.05


class BootstrapError(RuntimeError):
    pass


@dataclass(frozen=True)
class BreakSchedule:
    breaks: tuple[Quarter, ...] = tuple(Quarter.parse(q) for q in DEFAULT_BREAKS)

    def __post_init__(self):
        qs = tuple(Quarter.parse(q) if isinstance(q, str) else q for q in self.breaks)
        if any(b <= a for a, b in zip(qs, qs[1:])):
            raise ValueError("break quarters must be strictly increasing")
        object.__setattr__(self, "breaks", qs)

    @classmethod
    def from_strings(cls, items: Sequence[str]) -> BreakSchedule:
        return cls(tuple(Quarter.parse(s) for s in items))


@dataclass(frozen=True)
class BootstrapConfig:
    block_len: int = 4
    n_boot: int = 1000
    alpha: float = 0.025
    seed: int = 42

    def __post_init__(self):
        if self.block_len < 1:
            raise ValueError("block_len must be >= 1")
        if not 0.0 < self.alpha < 0.5:
            raise ValueError("alpha must lie in (0, 0.5)")
        if self.n_boot < 1:
            raise ValueError("n_boot must be >= 1")


def segment(quarters: Sequence[Quarter], schedule: BreakSchedule | None = None) -> list[np.ndarray]:
    """Row-index blocks of a contiguous quarterly sample, cut where a break quarter starts.

    Breaks at or before the first quarter, or after the last, are ignored.
    """
    schedule = schedule or BreakSchedule()
    n = len(quarters)
    if n == 0:
        return []
    first, last = quarters[0], quarters[-1]
    cuts = [b - first for b in schedule.breaks if first < b <= last]
    edges = [0, *cuts, n]
    return [np.arange(a, b) for a, b in zip(edges[:-1], edges[1:])]


def resample_segment(n: int, block_len: int, rng: np.random.Generator) -> np.ndarray:
    """Positions ``0..n-1`` resampled in contiguous blocks, truncated to ``n``.

    Block starts are uniform over every position that leaves a full block;
    a segment shorter than one block is returned whole.
    """
    if n < 1:
        raise ValueError("segment must hold at least one row")
    if n <= block_len:
        return np.arange(n)
    n_blocks = -(-n // block_len)
    starts = rng.integers(0, n - block_len + 1, size=n_blocks)
    return (starts[:, None] + np.arange(block_len)).ravel()[:n]


def resample_rows(segments: Sequence[np.ndarray], block_len: int, rng: np.random.Generator) -> np.ndarray:
    """One bootstrap draw of row indices: each segment resampled within itself."""
    return np.concatenate([seg[resample_segment(seg.size, block_len, rng)] for seg in segments])


def replicate_rng(seed: int, b: int) -> np.random.Generator:
    return np.random.default_rng([seed, b])


def quantiles(values, probs) -> np.ndarray:
    """Empirical quantiles with linear interpolation between order statistics."""
    return np.quantile(np.asarray(values, dtype=float), probs, method="linear")


@dataclass
class BootstrapResult:
    points: np.ndarray  # successful replicate forecasts
    importances: list[dict[str, float]] = field(default_factory=list)
    failures: int = 0
    alpha: float = 0.025

    @property
    def interval(self) -> tuple[float, float]:
        lo, hi = quantiles(self.points, [self.alpha, 1.0 - self.alpha])
        return float(lo), float(hi)

    @property
    def median(self) -> float:
        return float(quantiles(self.points, 0.5))

    def importance_ci(self) -> dict[str, tuple[float, float, float]]:
        """Per feature ``(mean, lower, upper)`` over replicates."""
        return importance_ci(self.importances, self.alpha)


def importance_ci(draws: Sequence[dict[str, float]], alpha: float = 0.025) -> dict[str, tuple[float, float, float]]:
    if not draws:
        return {}
    names = sorted(set().union(*draws))
    out = {}
    for name in names:
        vals = np.array([d.get(name, 0.0) for d in draws])
        lo, hi = quantiles(vals, [alpha, 1.0 - alpha])
        out[name] = (float(vals.mean()), float(lo), float(hi))
    return out


def run_bootstrap(
    replicate: Callable[[np.ndarray, np.random.Generator], tuple[float, dict[str, float]]],
    segments: Sequence[np.ndarray],
    cfg: BootstrapConfig,
) -> BootstrapResult:
    """Call ``replicate(rows, rng)`` for ``cfg.n_boot`` resampled row sets.

    ``replicate`` refits on the given rows and returns the fixed test-row
    forecast plus an importance mapping. Exceptions count as failed
    replicates; more than 5% failures raise :class:`BootstrapError`.
    """
    points, imps, failures = [], [], 0
    for b in range(cfg.n_boot):
        rng = replicate_rng(cfg.seed, b)
        rows = resample_rows(segments, cfg.block_len, rng)
        try:
            point, imp = replicate(rows, rng)
            if not np.isfinite(point):
                raise FloatingPointError("non-finite replicate forecast")
        except (ArithmeticError, ValueError, np.linalg.LinAlgError, RuntimeError) as exc:
            failures += 1
            logger.debug("bootstrap replicate %d failed: %s", b, exc)
            continue
        points.append(point)
        imps.append(imp)
    if failures > MAX_FAILURE_SHARE * cfg.n_boot or not points:
        raise BootstrapError(f"{failures} of {cfg.n_boot} bootstrap replicates failed")
    return BootstrapResult(np.asarray(points), imps, failures, cfg.alpha)


def prediction_interval(replicate, segments, cfg: BootstrapConfig | None = None) -> tuple[float, float, np.ndarray]:
    """``(lower, upper, replicate forecasts)`` from :func:`run_bootstrap`."""
    res = run_bootstrap(replicate, segments, cfg or BootstrapConfig())
    lo, hi = res.interval
    return lo, hi, res.points
