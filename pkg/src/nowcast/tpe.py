"""Tree-structured Parzen Estimator search with median pruning.

Each trial evaluates a hyperparameter assignment on a split's validation set.
After ``n_startup`` uniform warm-up trials, completed trials are split at the
``gamma`` loss quantile into a good and a bad set; per-parameter Parzen
densities ``l`` (good) and ``g`` (bad) are fitted, candidates are drawn from
``l`` and the one maximizing ``l/g`` is proposed.
"""

from __future__ import annotations

import inspect
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Union

import numpy as np
from scipy.special import ndtr

logger = logging.getLogger(__name__)

_EPS = 1e-12


class ConfigurationError(ValueError):
    pass


class OptimizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class FloatParam:
    low: float
    high: float
    log: bool = False

    def __post_init__(self) -> None:
        if not self.low < self.high:
            raise ConfigurationError(f"interval lower {self.low} must be < upper {self.high}")
        if self.log and self.low <= 0:
            raise ConfigurationError("log-scaled interval needs a positive lower bound")

    def to_internal(self, v):
        return np.log(v) if self.log else np.asarray(v, dtype=float)

    def from_internal(self, u):
        v = float(np.exp(u)) if self.log else float(u)
        return min(max(v, self.low), self.high)

    @property
    def bounds(self) -> tuple[float, float]:
        lo, hi = self.to_internal(self.low), self.to_internal(self.high)
        return float(lo), float(hi)


@dataclass(frozen=True)
class IntParam:
    low: int
    high: int
    log: bool = False

    def __post_init__(self) -> None:
        if not self.low < self.high:
            raise ConfigurationError(f"interval lower {self.low} must be < upper {self.high}")
        if self.log and self.low <= 0:
            raise ConfigurationError("log-scaled interval needs a positive lower bound")

    def to_internal(self, v):
        return np.log(v) if self.log else np.asarray(v, dtype=float)

    def from_internal(self, u) -> int:
        v = math.exp(u) if self.log else float(u)
        return int(min(max(round(v), self.low), self.high))

    @property
    def bounds(self) -> tuple[float, float]:
        # widen by half a step so the end points are as likely as interior ints
        if self.log:
            return math.log(self.low - 0.5 if self.low > 0.5 else self.low), math.log(self.high + 0.5)
        return self.low - 0.5, self.high + 0.5


@dataclass(frozen=True)
class CategoricalParam:
    choices: tuple

    def __init__(self, choices):
        choices = tuple(choices)
        if not choices:
            raise ConfigurationError("categorical parameter needs at least one choice")
        object.__setattr__(self, "choices", choices)


Param = Union[FloatParam, IntParam, CategoricalParam]
SearchSpace = dict[str, Param]


@dataclass
class TrialRecord:
    number: int
    params: dict[str, Any]
    intermediate_losses: list[float] = field(default_factory=list)
    final_loss: float | None = None
    status: str = "running"  # complete | pruned | failed
    user_attrs: dict[str, Any] = field(default_factory=dict)


@dataclass
class StudyState:
    gamma_fraction: float = 0.10
    n_trials: int = 60
    n_startup: int = 10
    n_candidates: int = 24
    seed: int = 42
    trials: list[TrialRecord] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not 0 < self.gamma_fraction < 1:
            raise ConfigurationError("gamma_fraction must lie in (0, 1)")

    @property
    def complete(self) -> list[TrialRecord]:
        return [t for t in self.trials if t.status == "complete"]

    @property
    def best_trial(self) -> TrialRecord:
        done = self.complete
        if not done:
            raise OptimizationError("no completed trials")
        return min(done, key=lambda t: (t.final_loss, t.number))

    def best_so_far(self) -> list[float]:
        out, best = [], math.inf
        for t in self.trials:
            if t.status == "complete":
                best = min(best, t.final_loss)
            out.append(best)
        return out

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=_json_default)

    @classmethod
    def from_json(cls, text: str) -> StudyState:
        d = json.loads(text)
        trials = [TrialRecord(**t) for t in d.pop("trials")]
        return cls(**d, trials=trials)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o)}")


# -- Parzen estimators -----------------------------------------------------


class _NumericParzen:
    """Mixture of bound-truncated Gaussians at observed points plus a uniform prior."""

    def __init__(self, obs: np.ndarray, lo: float, hi: float):
        self.lo, self.hi = lo, hi
        self.centers = np.asarray(obs, dtype=float)
        n = max(self.centers.size, 1)
        self.sigma = max((hi - lo) * 1.06 * n ** (-0.2), _EPS)
        k = self.centers.size
        self.weights = np.full(k + 1, 1.0 / (k + 1))  # last component = uniform prior

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        comp = rng.choice(self.weights.size, size=size, p=self.weights)
        out = np.empty(size)
        for i, c in enumerate(comp):
            if c == self.centers.size:
                out[i] = rng.uniform(self.lo, self.hi)
            else:
                mu = self.centers[c]
                while True:  # rejection from the truncated normal; bounds always hold mass
                    v = rng.normal(mu, self.sigma)
                    if self.lo <= v <= self.hi:
                        break
                out[i] = v
        return out

    def pdf(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_1d(u)
        dens = np.full(u.shape, self.weights[-1] / (self.hi - self.lo))
        if self.centers.size:
            z = (u[:, None] - self.centers[None, :]) / self.sigma
            mass = ndtr((self.hi - self.centers) / self.sigma) - ndtr((self.lo - self.centers) / self.sigma)
            phi = np.exp(-0.5 * z**2) / (math.sqrt(2 * math.pi) * self.sigma)
            dens = dens + (phi / np.maximum(mass, _EPS)) @ self.weights[:-1]
        return dens


class _CategoricalParzen:
    """Laplace-smoothed category frequencies."""

    def __init__(self, obs: list, choices: tuple):
        counts = np.array([sum(1 for o in obs if o == c) for c in choices], dtype=float)
        self.choices = choices
        self.p = (counts + 1.0) / (counts.sum() + len(choices))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(len(self.choices), size=size, p=self.p)

    def pdf(self, idx: np.ndarray) -> np.ndarray:
        return self.p[np.asarray(idx, dtype=int)]


def split_good_bad(
    trials: list[TrialRecord], gamma_fraction: float
) -> tuple[list[TrialRecord], list[TrialRecord]]:
    """Good set = the ``ceil(gamma * n)`` lowest-loss completed trials (at least one)."""
    done = sorted((t for t in trials if t.status == "complete"), key=lambda t: (t.final_loss, t.number))
    n_good = max(1, math.ceil(gamma_fraction * len(done)))
    return done[:n_good], done[n_good:]


def _uniform_draw(space: SearchSpace, rng: np.random.Generator) -> dict[str, Any]:
    out = {}
    for name, p in space.items():
        if isinstance(p, CategoricalParam):
            out[name] = p.choices[int(rng.integers(len(p.choices)))]
        else:
            lo, hi = p.bounds
            out[name] = p.from_internal(rng.uniform(lo, hi))
    return out


def suggest(study: StudyState, space: SearchSpace, rng: np.random.Generator | None = None) -> dict[str, Any]:
    """Propose the next assignment (uniform during warm-up, TPE afterwards)."""
    if not space:
        raise ConfigurationError("empty search space")
    if rng is None:
        rng = np.random.default_rng([study.seed, len(study.trials)])
    if len(study.complete) < study.n_startup:
        return _uniform_draw(space, rng)

    good, bad = split_good_bad(study.trials, study.gamma_fraction)
    m = study.n_candidates
    log_ratio = np.zeros(m)
    columns: dict[str, np.ndarray] = {}
    for name, p in space.items():
        if isinstance(p, CategoricalParam):
            lg = _CategoricalParzen([t.params[name] for t in good], p.choices)
            bg = _CategoricalParzen([t.params[name] for t in bad], p.choices)
        else:
            lo, hi = p.bounds
            lg = _NumericParzen(np.array([p.to_internal(t.params[name]) for t in good]), lo, hi)
            bg = _NumericParzen(np.array([p.to_internal(t.params[name]) for t in bad]), lo, hi)
        cand = lg.sample(rng, m)
        log_ratio += np.log(lg.pdf(cand) + _EPS) - np.log(bg.pdf(cand) + _EPS)
        columns[name] = cand
    best = int(np.argmax(log_ratio))
    out = {}
    for name, p in space.items():
        v = columns[name][best]
        out[name] = p.choices[int(v)] if isinstance(p, CategoricalParam) else p.from_internal(v)
    return out


def should_prune(study: StudyState, trial: TrialRecord, epoch: int) -> bool:
    """Median rule: prune when this epoch's loss exceeds the median of completed trials."""
    done = study.complete
    if len(done) < study.n_startup or epoch >= len(trial.intermediate_losses):
        return False
    peers = [t.intermediate_losses[epoch] for t in done if len(t.intermediate_losses) > epoch]
    if not peers:
        return False
    return trial.intermediate_losses[epoch] > float(np.median(peers))


Objective = Callable[[dict[str, Any]], Any]


def _unpack(value) -> tuple[float, dict]:
    if isinstance(value, tuple):
        return float(value[0]), dict(value[1])
    return float(value), {}


def run_trial(study: StudyState, objective: Objective, params: dict[str, Any]) -> TrialRecord:
    trial = TrialRecord(number=len(study.trials), params=params)
    study.trials.append(trial)
    try:
        out = objective(params)
        if inspect.isgenerator(out):
            final = None
            try:
                while True:
                    loss = float(next(out))
                    trial.intermediate_losses.append(loss)
                    if should_prune(study, trial, len(trial.intermediate_losses) - 1):
                        out.close()
                        trial.status = "pruned"
                        return trial
            except StopIteration as stop:
                final = stop.value
            if final is None:
                if not trial.intermediate_losses:
                    raise OptimizationError("objective produced no loss")
                final = trial.intermediate_losses[-1]
            loss, attrs = _unpack(final)
        else:
            loss, attrs = _unpack(out)
        if not math.isfinite(loss):
            raise OptimizationError(f"non-finite loss {loss}")
        trial.final_loss, trial.user_attrs, trial.status = loss, attrs, "complete"
    except Exception as exc:  # noqa: BLE001 - a failed trial must not abort the study
        logger.debug("trial %d failed: %s", trial.number, exc)
        trial.status = "failed"
        trial.user_attrs = {"error": repr(exc)}
    return trial


def optimize(
    objective: Objective,
    space: SearchSpace,
    n_trials: int | None = None,
    study: StudyState | None = None,
) -> tuple[dict[str, Any], StudyState]:
    """Run the search and return the best completed assignment.

    ``objective(params)`` either returns the validation loss (optionally as
    ``(loss, attrs)``) or is a generator yielding per-epoch validation losses;
    a generator's return value, when given, is the final loss.
    """
    study = study or StudyState()
    budget = study.n_trials if n_trials is None else n_trials
    while len(study.trials) < budget:
        params = suggest(study, space)
        run_trial(study, objective, params)
        if _is_single_point(space) and study.complete:
            break
    if not study.complete:
        raise OptimizationError("all trials failed or were pruned")
    return dict(study.best_trial.params), study


def _is_single_point(space: SearchSpace) -> bool:
    return all(isinstance(p, CategoricalParam) and len(p.choices) == 1 for p in space.values())


def space_from_dict(d: dict) -> SearchSpace:
    """Build a search space from config entries like
    ``{"alpha": {"type": "float", "low": 1e-4, "high": 10, "log": true}}``."""
    out: SearchSpace = {}
    for name, spec in d.items():
        kind = spec.get("type", "float")
        if kind == "float":
            out[name] = FloatParam(float(spec["low"]), float(spec["high"]), bool(spec.get("log", False)))
        elif kind == "int":
            out[name] = IntParam(int(spec["low"]), int(spec["high"]), bool(spec.get("log", False)))
        elif kind == "categorical":
            out[name] = CategoricalParam(spec["choices"])
        else:
            raise ConfigurationError(f"unknown parameter type {kind!r} for {name!r}")
    return out


def space_to_dict(space: SearchSpace) -> dict:
    out = {}
    for name, p in space.items():
        if isinstance(p, CategoricalParam):
            out[name] = {"type": "categorical", "choices": list(p.choices)}
        else:
            out[name] = {
                "type": "int" if isinstance(p, IntParam) else "float",
                "low": p.low,
                "high": p.high,
                "log": p.log,
            }
    return out
