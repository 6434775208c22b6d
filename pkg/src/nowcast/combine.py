"""Model Confidence Set screening and forecast combinations.

Combinations replay the whole test sample in order: the weights used for
quarter ``t`` depend only on forecasts and outcomes realized before ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_ETA_GRID = (0.01, 0.05, 0.1, 0.5, 1.0, 2.0)


class AlignmentError(ValueError):
    pass


# -- model confidence set --------------------------------------------------


@dataclass
class McsResult:
    models: list[str]
    survivors: list[str]
    pvalues: dict[str, float]  # MCS p-values, max-so-far over elimination steps
    eliminated: list[str]  # in elimination order
    statistic: str
    alpha: float

    @property
    def ranking(self) -> list[str]:
        """Best first: survivors (last eliminated first) then earlier eliminations."""
        return list(reversed(self.eliminated))


def block_bootstrap_indices(n: int, n_boot: int, block_len: int, rng: np.random.Generator) -> np.ndarray:
    """``(n_boot, n)`` moving-block resampling indices, truncated to ``n``."""
    if n <= block_len:
        return np.tile(np.arange(n), (n_boot, 1))
    n_blocks = -(-n // block_len)
    starts = rng.integers(0, n - block_len + 1, size=(n_boot, n_blocks))
    return (starts[:, :, None] + np.arange(block_len)).reshape(n_boot, -1)[:, :n]


def _safe_ratio(num, den):
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


def mcs(
    losses,
    models: Sequence[str] | None = None,
    alpha: float = 0.10,
    n_boot: int = 10_000,
    block_len: int = 4,
    statistic: str = "TR",
    seed: int = 42,
) -> McsResult:
    """Iterative elimination with a moving-block bootstrap of loss means.

    ``statistic="TR"`` uses the largest absolute pairwise t-statistic and
    eliminates the model with the largest worst-case pairwise t-statistic;
    ``"Tmax"`` uses t-statistics of each model's loss against the set average.
    Differentials with zero bootstrap variance get t = 0, so identical
    models are never separated.
    """
    L = np.asarray(losses, dtype=float)
    if L.ndim != 2 or L.shape[0] < 1 or L.shape[1] < 1:
        raise ValueError("loss matrix must be 2-d with N, K >= 1")
    if not np.isfinite(L).all():
        raise ValueError("loss matrix has missing or non-finite entries")
    N, K = L.shape
    if N < block_len:
        raise ValueError(f"need at least {block_len} loss rows")
    if statistic not in ("TR", "Tmax"):
        raise ValueError("statistic must be 'TR' or 'Tmax'")
    names = list(models) if models is not None else [f"m{i}" for i in range(K)]
    rng = np.random.default_rng(seed)
    idx = block_bootstrap_indices(N, n_boot, block_len, rng)
    mean = L.mean(axis=0)
    boot = L[idx].mean(axis=1)  # (B, K)
    zeta = boot - mean  # centered bootstrap means

    alive = list(range(K))
    eliminated, step_p = [], []
    while len(alive) > 1:
        a = np.array(alive)
        m, z = mean[a], zeta[:, a]
        if statistic == "Tmax":
            d = m - m.mean()
            zd = z - z.mean(axis=1, keepdims=True)
            sd = np.sqrt(np.mean(zd**2, axis=0))
            t = _safe_ratio(d, sd)
            t_obs = t.max()
            t_boot = _safe_ratio(zd, sd).max(axis=1)
            worst = int(np.argmax(t))
        else:
            d = m[:, None] - m[None, :]
            zd = z[:, :, None] - z[:, None, :]
            sd = np.sqrt(np.mean(zd**2, axis=0))
            t = _safe_ratio(d, sd)
            t_obs = np.abs(t).max()
            t_boot = np.abs(_safe_ratio(zd, sd)).reshape(n_boot, -1).max(axis=1)
            worst = int(np.argmax(t.max(axis=1)))
        p = float(np.mean(t_boot >= t_obs - 1e-12 * max(1.0, abs(t_obs))))
        step_p.append(p)
        eliminated.append(alive.pop(worst))
    eliminated.append(alive[0])
    step_p.append(1.0)
    pvals, running = {}, 0.0
    for k, p in zip(eliminated, step_p):
        running = max(running, p)
        pvals[names[k]] = running
    survivors = [n for n in names if pvals[n] >= alpha]
    return McsResult(names, survivors, pvals, [names[k] for k in eliminated], statistic, alpha)


# -- combinations ----------------------------------------------------------


@dataclass
class WeightTrajectory:
    models: list[str]
    weights: np.ndarray  # (N, M)
    quarters: list = field(default_factory=list)

    def dominant(self, t: int) -> str:
        """Largest weight at row ``t``; ties go to the earliest model in roster order."""
        return dominant_model(self.weights[t], self.models)


def dominant_model(weights, models: Sequence[str]) -> str:
    w = np.asarray(weights, dtype=float)
    return models[int(np.argmax(w))]


def _check(F, y=None):
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[1] < 1:
        raise AlignmentError("forecasts must be an (N, M) matrix")
    if not np.isfinite(F).all():
        raise AlignmentError("missing forecast in the combination input")
    if y is not None:
        y = np.asarray(y, dtype=float)
        if y.shape != (F.shape[0],):
            raise AlignmentError("actuals do not align with forecasts")
        if not np.isfinite(y).all():
            raise AlignmentError("missing actual in the combination input")
    return F, y


def _apply(W: np.ndarray, F: np.ndarray) -> np.ndarray:
    return np.einsum("tm,tm->t", W, F)


def _uniform(N: int, M: int) -> np.ndarray:
    return np.full((N, M), 1.0 / M)


def combine_sa(F, models: Sequence[str] | None = None) -> tuple[np.ndarray, WeightTrajectory]:
    F, _ = _check(F)
    W = _uniform(*F.shape)
    return _apply(W, F), WeightTrajectory(_names(models, F), W)


def _names(models, F):
    return list(models) if models is not None else [f"m{i}" for i in range(F.shape[1])]


def _softmin(L: np.ndarray, eta: float) -> np.ndarray:
    w = np.exp(-eta * (L - L.min()))
    return w / w.sum()


def combine_wa(F, y, models: Sequence[str] | None = None) -> tuple[np.ndarray, WeightTrajectory]:
    """Inverse-RMSE weights from errors realized before each quarter; uniform at the start."""
    F, y = _check(F, y)
    N, M = F.shape
    W = _uniform(N, M)
    sq = (F - y[:, None]) ** 2
    cum = np.cumsum(sq, axis=0)
    for t in range(1, N):
        rmse = np.sqrt(cum[t - 1] / t)
        zero = rmse == 0
        if zero.any():
            w = zero / zero.sum()
        else:
            inv = 1.0 / rmse
            w = inv / inv.sum()
        W[t] = w
    return _apply(W, F), WeightTrajectory(_names(models, F), W)


def ewa_weights(F, y, eta: float) -> np.ndarray:
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    F, y = _check(F, y)
    N, M = F.shape
    W = _uniform(N, M)
    L = np.zeros(M)
    for t in range(N):
        if t:
            W[t] = _softmin(L, eta)
        L = L + (F[t] - y[t]) ** 2
    return W


def combine_ewa(F, y, eta: float, models: Sequence[str] | None = None) -> tuple[np.ndarray, WeightTrajectory]:
    """Exponential weights on cumulative squared error through the previous quarter."""
    F, y = _check(F, y)
    W = ewa_weights(F, y, eta)
    return _apply(W, F), WeightTrajectory(_names(models, F), W)


@dataclass
class MetaEwaResult:
    combined: np.ndarray
    experts: dict[float, WeightTrajectory]  # per-eta model weights
    meta_weights: np.ndarray  # (N, len(grid))
    grid: tuple[float, ...]


def combine_meta_ewa(F, y, grid: Sequence[float] = DEFAULT_ETA_GRID, lam: float = 1.0,
                     models: Sequence[str] | None = None) -> MetaEwaResult:
    """A second exponential-weights layer over one EWA aggregator per ``eta``."""
    if not len(grid):
        raise ValueError("eta grid must be nonempty")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    F, y = _check(F, y)
    names = _names(models, F)
    experts, G = {}, []
    for eta in grid:
        c, traj = combine_ewa(F, y, eta, names)
        experts[float(eta)] = traj
        G.append(c)
    G = np.column_stack(G)
    Omega = ewa_weights(G, y, lam)
    return MetaEwaResult(_apply(Omega, G), experts, Omega, tuple(float(g) for g in grid))
