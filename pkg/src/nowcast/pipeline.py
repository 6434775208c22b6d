"""End-to-end walk-forward run: ingestion, per-split tuning and forecasting,
bootstrap uncertainty, importance, confidence-set screening, combination and
evaluation.

Every per-split computation only sees rows up to and including the split's
test quarter, and draws its randomness from a seed derived from the master
seed, the model name and the test quarter. Poisoning later rows therefore
cannot change a split's output.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .bootstrap import DEFAULT_BREAKS, BootstrapConfig, BreakSchedule, run_bootstrap, segment
from .combine import DEFAULT_ETA_GRID, combine_ewa, combine_meta_ewa, combine_sa, combine_wa, mcs
from .data import ColumnKind, DataError, SeriesFrame, TransformSpec, ingest, iterative_standardize, load_clean
from .evaluate import DegenerateError, giacomini_white, ljung_box, metrics, shapiro_wilk
from .explain import ImportanceTrajectory, aggregate, spearman_table, top_k
from .models import NEURAL, REGISTRY, build_learner, default_space
from .quarters import Quarter
from .tpe import StudyState, optimize, space_from_dict
from .windows import Horizon, SplitPlan, neutralize_shock_dummies, plan_walk_forward, subperiod_mask

logger = logging.getLogger(__name__)

LAG_DEPTH = 4  # columns of the lagged-target view and length of sequence windows

IMPORTANCE_MEASURE = {
    "AR": "coefficient",
    "LASSO": "CBFI",
    "Ridge": "CBFI",
    "EN": "CBFI",
    "PCR": "CBFI",
    "PLSR": "VIP",
    "RF": "MDI",
    "XGB": "GBI",
    "MLP": "IG",
    "GRU": "IG",
}


class ConfigError(ValueError):
    pass


class PipelineError(RuntimeError):
    """A stage failure; ``stage`` names where the run stopped."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


# -- configuration ---------------------------------------------------------


@dataclass
class RunConfig:
    """Run settings, loadable from a JSON document with the same keys."""

    data: str = ""
    target: str = "gdp_growth"
    ingestion_ledger: str | None = None  # set when ``data`` is an already-cleaned CSV
    deflator: str | None = None
    transform: dict[str, Any] = field(default_factory=dict)
    models: list[str] = field(default_factory=lambda: list(REGISTRY))
    benchmarks: list[str] = field(default_factory=lambda: ["RW", "AR"])
    search_spaces: dict[str, dict] = field(default_factory=dict)
    n_trials: int = 60
    n_startup: int = 10
    gamma_fraction: float = 0.10
    horizon: dict[str, Any] = field(default_factory=lambda: Horizon().to_dict())
    bootstrap: dict[str, Any] = field(default_factory=lambda: {"block_len": 4, "n_boot": 1000, "alpha": 0.025})
    breaks: list[str] = field(default_factory=lambda: list(DEFAULT_BREAKS))
    mcs: dict[str, Any] = field(
        default_factory=lambda: {"alpha": 0.10, "n_boot": 10_000, "block_len": 4, "statistic": "TR"}
    )
    ewa_eta: float = 0.1
    eta_grid: list[float] = field(default_factory=lambda: list(DEFAULT_ETA_GRID))
    meta_lambda: float = 1.0
    gw_max_lag: int = 4
    ljung_box_lags: int = 4
    ig_steps: int = 50
    top_k: int = 10
    seed: int = 42
    output: str = "out"
    cache_dir: str | None = None

    def __post_init__(self):
        unknown = [m for m in self.models if m not in REGISTRY]
        if unknown:
            raise ConfigError(f"unknown models {unknown}; known: {sorted(REGISTRY)}")
        if not self.models:
            raise ConfigError("model roster is empty")
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        try:
            self.horizon_obj
            self.bootstrap_config
            self.break_schedule
            self.transform_spec
            for m in self.models:
                self.space_for(m)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @property
    def horizon_obj(self) -> Horizon:
        return Horizon.from_dict(self.horizon)

    @property
    def bootstrap_config(self) -> BootstrapConfig:
        return BootstrapConfig(seed=self.seed, **self.bootstrap)

    @property
    def break_schedule(self) -> BreakSchedule:
        return BreakSchedule.from_strings(self.breaks)

    @property
    def transform_spec(self) -> TransformSpec:
        return TransformSpec(**self.transform)

    def space_for(self, model: str):
        if model in self.search_spaces:
            return space_from_dict(self.search_spaces[model])
        return default_space(model)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(d)


# -- per-split design matrices ---------------------------------------------


@dataclass
class Design:
    """Three input views of one standardized frame, row-aligned with it."""

    tabular: np.ndarray  # (n, p)
    lags: np.ndarray  # (n, LAG_DEPTH), column k = y_{t-k-1}
    sequence: np.ndarray  # (n, LAG_DEPTH, p), rows t-3..t
    y: np.ndarray
    feature_names: list[str]
    dummy_mask: np.ndarray

    def view(self, kind: str, rows) -> np.ndarray:
        return getattr(self, kind)[rows]


def build_design(frame: SeriesFrame, stats_stop: int) -> Design:
    """Standardize ``frame`` with statistics of its first ``stats_stop`` rows."""
    z, _ = iterative_standardize(frame.rows(0, stats_stop), frame)
    names = z.feature_names
    X = z.select(names).values
    y = z.col(z.target_name).copy()
    n = len(y)
    lags = np.full((n, LAG_DEPTH), np.nan)
    for k in range(LAG_DEPTH):
        lags[k + 1 :, k] = y[: n - k - 1]
    seq = np.full((n, LAG_DEPTH, X.shape[1]), np.nan)
    for w in range(LAG_DEPTH):
        shift = LAG_DEPTH - 1 - w
        seq[shift:, w] = X[: n - shift]
    mask = np.array([z.kinds[c].is_dummy for c in names])
    return Design(X, lags, seq, y, names, mask)


# -- per-split record ------------------------------------------------------


@dataclass
class SplitRecord:
    model: str
    quarter: str
    params: dict[str, Any]
    forecast: float
    actual: float
    lower: float
    upper: float
    importance: dict[str, float]
    importance_ci: dict[str, list[float]]  # feature -> [mean, lower, upper]
    best_epoch: int | None = None
    trials_complete: int = 0
    trials_pruned: int = 0
    boot_failures: int = 0

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)


def split_seed(master: int, model: str, quarter: Quarter) -> int:
    ss = np.random.SeedSequence([master, zlib.crc32(model.encode()), quarter.ordinal])
    return int(ss.generate_state(1)[0])


def _mse(a, b) -> float:
    return float(np.mean((np.asarray(a) - np.asarray(b)) ** 2))


def run_split(frame: SeriesFrame, split: SplitPlan, model: str, cfg: RunConfig) -> SplitRecord:
    """Tune, fit, forecast, bootstrap and explain one model on one split.

    ``frame`` is the cleaned frame; only rows up to the test quarter are used.
    """
    seed = split_seed(cfg.seed, model, split.test_quarter)
    first = frame.position(split.train_start)
    test = frame.position(split.test_quarter)
    local = neutralize_shock_dummies(frame.rows(first, test + 1), split)
    view = REGISTRY[model].view
    n_train = split.n_train
    n_tv = test - first  # train + validation rows
    start = LAG_DEPTH  # first row with a complete lag/sequence history
    if n_train - start < 8:
        raise PipelineError("plan", f"training block too short for split {split.test_quarter}")

    # 1. hyperparameter search: train statistics, validation loss
    dz = build_design(local, n_train)
    tr, va = np.arange(start, n_train), np.arange(n_train, n_tv)
    Xtr, ytr = dz.view(view, tr), dz.y[tr]
    Xva, yva = dz.view(view, va), dz.y[va]

    def make(params, **extra):
        return build_learner(model, params, dz.feature_names, dz.dummy_mask, seed=seed,
                             **({"ig_steps": cfg.ig_steps} if model in NEURAL else {}), **extra)

    if model in NEURAL:
        def objective(params):
            learner = make(params)
            yield from learner.fit_epochs(Xtr, ytr, Xva, yva)
            return min(learner.history_.val_loss), {"best_epoch": learner.history_.best_epoch}
    else:
        def objective(params):
            learner = make(params).fit(Xtr, ytr)
            return _mse(learner.predict(Xva), yva)

    study = StudyState(gamma_fraction=cfg.gamma_fraction, n_trials=cfg.n_trials, n_startup=cfg.n_startup, seed=seed)
    space = cfg.space_for(model)
    if space:
        params, study = optimize(objective, space, study=study)
        best_epoch = study.best_trial.user_attrs.get("best_epoch") if model in NEURAL else None
    else:
        params, best_epoch = {}, None  # nothing to tune

    # 2. final fit on train+validation with their statistics
    df = build_design(local, n_tv)
    tv = np.arange(start, n_tv)
    Xtv, ytv = df.view(view, tv), df.y[tv]
    x_test = df.view(view, [n_tv])
    explain_rows = np.arange(n_train, n_tv + 1)
    extra = {"max_epochs": max(int(best_epoch), 1)} if best_epoch else {}

    def fit_once(rows, learner_seed=None):
        kw = dict(extra)
        learner = build_learner(model, params, df.feature_names, df.dummy_mask,
                                seed=seed if learner_seed is None else learner_seed,
                                **({"ig_steps": cfg.ig_steps} if model in NEURAL else {}), **kw)
        learner.fit(Xtv[rows], ytv[rows])
        if model in NEURAL:
            learner.set_explain_data(df.view(view, explain_rows))
        return learner

    final = fit_once(np.arange(tv.size))
    forecast = float(final.predict(x_test)[0])
    importance = final.importance()

    # 3. block bootstrap over break segments of the train+validation rows
    segs = segment(local.index[start:n_tv], cfg.break_schedule)

    def replicate(rows, rng):
        learner = fit_once(rows, int(rng.integers(2**31 - 1)))
        return float(learner.predict(x_test)[0]), learner.importance()

    boot = run_bootstrap(replicate, segs, dataclasses.replace(cfg.bootstrap_config, seed=seed))
    lower, upper = boot.interval
    ci = {k: list(v) for k, v in boot.importance_ci().items()}
    return SplitRecord(
        model=model,
        quarter=str(split.test_quarter),
        params={k: (v.item() if isinstance(v, np.generic) else v) for k, v in params.items()},
        forecast=forecast,
        actual=float(local.col(local.target_name)[test - first]),
        lower=lower,
        upper=upper,
        importance=importance,
        importance_ci=ci,
        best_epoch=best_epoch,
        trials_complete=len(study.complete),
        trials_pruned=sum(t.status == "pruned" for t in study.trials),
        boot_failures=boot.failures,
    )


# -- run ledger ------------------------------------------------------------


@dataclass
class RunLedger:
    config: dict
    splits: list[dict] = field(default_factory=list)
    records: list[SplitRecord] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)  # post-split stages
    spearman: dict[str, float] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict, compare=False)

    def to_json(self) -> str:
        # wall-clock timings are excluded so identical runs serialize identically;
        # insertion order is kept so reports regenerated from disk keep roster order
        d = dataclasses.asdict(self)
        d.pop("timings")
        return json.dumps(d, indent=1, default=_json_default)

    @classmethod
    def from_json(cls, text: str) -> RunLedger:
        d = json.loads(text)
        d["records"] = [SplitRecord(**r) for r in d["records"]]
        return cls(**d)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    def table(self, model: str) -> list[SplitRecord]:
        return [r for r in self.records if r.model == model]

    @property
    def models(self) -> list[str]:
        seen = []
        for r in self.records:
            if r.model not in seen:
                seen.append(r.model)
        return seen

    def forecast_matrix(self, models: Sequence[str]) -> tuple[list[str], np.ndarray, np.ndarray]:
        """Test quarters, ``(N, K)`` forecasts and actuals for ``models``."""
        quarters = [r.quarter for r in self.table(models[0])]
        F = np.empty((len(quarters), len(models)))
        y = np.array([r.actual for r in self.table(models[0])])
        for j, m in enumerate(models):
            rows = self.table(m)
            if [r.quarter for r in rows] != quarters:
                raise PipelineError("report", f"model {m} is missing test quarters")
            F[:, j] = [r.forecast for r in rows]
        return quarters, F, y


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


# -- stages ----------------------------------------------------------------


def load_frame(cfg: RunConfig) -> SeriesFrame:
    try:
        if cfg.ingestion_ledger:
            return load_clean(cfg.data, cfg.ingestion_ledger)
        frame, _ = ingest(cfg.data, cfg.target, cfg.transform_spec, cfg.deflator)
        return frame
    except (OSError, DataError, ValueError) as exc:
        raise PipelineError("ingest", str(exc)) from exc


def _cached(cfg: RunConfig, model: str, split: SplitPlan, frame: SeriesFrame, compute):
    if not cfg.cache_dir:
        return compute()
    rows = frame.rows(0, frame.position(split.test_quarter) + 1)
    key = hashlib.sha256((cfg.digest() + rows.to_pandas().to_csv()).encode()).hexdigest()[:16]
    path = Path(cfg.cache_dir) / f"{model}_{split.test_quarter.year}Q{split.test_quarter.quarter}_{key}.json"
    if path.exists():
        return SplitRecord(**json.loads(path.read_text()))
    rec = compute()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(rec.to_json())
    return rec


def forecast_stage(frame: SeriesFrame, cfg: RunConfig, ledger: RunLedger) -> None:
    horizon = cfg.horizon_obj
    try:
        plans = plan_walk_forward(frame.index[0], frame.index[-1], horizon)
    except ValueError as exc:
        raise PipelineError("plan", str(exc)) from exc
    ledger.splits = [p.as_row() for p in plans]
    for model in cfg.models:
        t0 = time.perf_counter()
        for plan in plans:
            try:
                rec = _cached(cfg, model, plan, frame, lambda: run_split(frame, plan, model, cfg))
            except PipelineError:
                raise
            except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
                raise PipelineError("forecast", f"{model} at {plan.test_quarter}: {exc}") from exc
            ledger.records.append(rec)
        ledger.timings[model] = round(time.perf_counter() - t0, 3)
        logger.info("%s done in %.1fs", model, ledger.timings[model])


def evaluate_stage(ledger: RunLedger, cfg: RunConfig, frame: SeriesFrame | None = None) -> None:
    """Screening, combination, metrics, tests, diagnostics and importance summaries."""
    horizon = cfg.horizon_obj
    models = [m for m in cfg.models if ledger.table(m)]
    quarters, F, y = ledger.forecast_matrix(models)
    qobjs = [Quarter.parse(q) for q in quarters]
    losses = (F - y[:, None]) ** 2
    summary: dict[str, Any] = {"quarters": quarters, "actual": y.tolist()}

    # model confidence set
    mc = dict(cfg.mcs)
    if len(quarters) >= mc.get("block_len", 4):
        res = mcs(losses, models, seed=cfg.seed, **mc)
        survivors = res.survivors
        summary["mcs"] = {"survivors": survivors, "pvalues": res.pvalues, "eliminated": res.eliminated}
    else:
        survivors = models
        summary["mcs"] = {"survivors": survivors, "pvalues": {m: 1.0 for m in models}, "eliminated": []}

    # combinations over survivors
    idx = [models.index(m) for m in survivors]
    Fs = F[:, idx]
    series: dict[str, np.ndarray] = {m: F[:, j] for j, m in enumerate(models)}
    weights: dict[str, np.ndarray] = {}
    series["SA"], w = combine_sa(Fs, survivors)
    weights["SA"] = w.weights
    series["WA"], w = combine_wa(Fs, y, survivors)
    weights["WA"] = w.weights
    series["EWA"], w = combine_ewa(Fs, y, cfg.ewa_eta, survivors)
    weights["EWA"] = w.weights
    meta = combine_meta_ewa(Fs, y, cfg.eta_grid, cfg.meta_lambda, survivors)
    series["Meta-EWA"] = meta.combined
    summary["combinations"] = {
        "members": survivors,
        "forecasts": {k: series[k].tolist() for k in ("SA", "WA", "EWA", "Meta-EWA")},
        "weights": {k: v.tolist() for k, v in weights.items()},
        "meta_weights": meta.meta_weights.tolist(),
        "eta_grid": list(meta.grid),
        "dominant": {k: [survivors[int(np.argmax(r))] for r in v] for k, v in weights.items() if k != "SA"},
    }

    # metrics and ratios per sub-period
    table = {}
    for name, f in series.items():
        for period in horizon.subperiods:
            mask = subperiod_mask(qobjs, period, horizon)
            if mask.any():
                table[f"{name}|{period}"] = metrics(f[mask], y[mask]).as_dict()
    summary["metrics"] = table
    ratios = {}
    for bench in cfg.benchmarks:
        if bench not in series:
            continue
        for name in series:
            for period in horizon.subperiods:
                key, bkey = f"{name}|{period}", f"{bench}|{period}"
                if key in table and bkey in table and table[bkey]["rmsfe"] > 0:
                    ratios[f"{name}|{bench}|{period}"] = table[key]["rmsfe"] / table[bkey]["rmsfe"]
    summary["ratios"] = ratios

    # predictive-ability tests against each benchmark
    tests = {}
    if len(y) >= 8:
        for bench in cfg.benchmarks:
            if bench not in series:
                continue
            lb = (series[bench] - y) ** 2
            for name, f in series.items():
                if name == bench:
                    continue
                rep = giacomini_white((f - y) ** 2, lb, cfg.gw_max_lag)
                tests[f"{name}|{bench}"] = rep.as_dict()
    summary["tests"] = tests

    # residual diagnostics
    diags = {}
    for name, f in series.items():
        e = y - f
        row: dict[str, Any] = {}
        try:
            row["sw_w"], row["sw_p"] = shapiro_wilk(e)
        except (DegenerateError, ValueError) as exc:
            row["sw_error"] = str(exc)
        try:
            row["lb_q"], row["lb_p"] = ljung_box(e, cfg.ljung_box_lags)
        except (DegenerateError, ValueError) as exc:
            row["lb_error"] = str(exc)
        diags[name] = row
    summary["diagnostics"] = diags

    # importance aggregates with bootstrap CI ranges
    imp = {}
    for m in models:
        measure = IMPORTANCE_MEASURE.get(m)
        if measure is None:
            continue
        traj = ImportanceTrajectory(m, measure)
        ranges = ImportanceTrajectory(m, measure)
        for r in ledger.table(m):
            q = Quarter.parse(r.quarter)
            traj.append(q, r.importance)
            ranges.append(q, {k: v[2] - v[1] for k, v in r.importance_ci.items()})
        if not traj.values:
            continue
        per = {}
        for period in horizon.subperiods:
            mask = subperiod_mask(traj.quarters, period, horizon)
            if not mask.any():
                continue
            means = aggregate(traj, mask)
            rng_ = aggregate(ranges, mask) if ranges.values else {}
            ranked = top_k(means, cfg.top_k, traj.signed)
            per[period] = [[f, v, rng_.get(f, 0.0)] for f, v in ranked]
        imp[m] = {"measure": measure, "top": per, "trajectory": {k: v for k, v in traj.values.items()}}
    summary["importance"] = imp
    ledger.summary = summary

    if frame is not None:
        last = min(frame.position(horizon.last_test), len(frame) - 1)
        sub = frame.rows(0, last + 1)
        cont = {n: sub.col(n) for n in sub.names_of(ColumnKind.CONTINUOUS)}
        ledger.spearman = spearman_table(cont, sub.col(sub.target_name))


def run(cfg: RunConfig, frame: SeriesFrame | None = None, emit: bool = True) -> RunLedger:
    """Execute every stage in order and, with ``emit``, write reports to ``cfg.output``."""
    from .reports import write_reports

    ledger = RunLedger(config=cfg.to_dict())
    out = Path(cfg.output)
    t0 = time.perf_counter()
    try:
        if frame is None:
            frame = load_frame(cfg)
        forecast_stage(frame, cfg, ledger)
        try:
            evaluate_stage(ledger, cfg, frame)
        except PipelineError:
            raise
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            raise PipelineError("evaluate", str(exc)) from exc
    except PipelineError:
        if emit:
            out.mkdir(parents=True, exist_ok=True)
            ledger.save(out / "ledger.partial.json")
        raise
    ledger.timings["total"] = round(time.perf_counter() - t0, 3)
    if emit:
        out.mkdir(parents=True, exist_ok=True)
        ledger.save(out / "ledger.json")
        (out / "timings.json").write_text(json.dumps(ledger.timings, indent=1))
        write_reports(ledger, cfg, out)
    return ledger
