"""Ingestion and preprocessing of the quarterly design matrix.

Raw series arrive as a quarter-indexed CSV. They are forward-filled, screened
for stationarity with an ADF test, augmented with seasonal and shock dummies,
and standardized per split with training-only statistics.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
import pandas as pd

from .adf import adf_test
from .quarters import Quarter

logger = logging.getLogger(__name__)

Aggregation = Literal["sum", "mean", "end_of_period"]


class DataError(ValueError):
    """Base class for ingestion/preprocessing failures."""


class ShapeError(DataError):
    pass


class DomainError(DataError):
    pass


class IngestionError(DataError):
    pass


class StandardizationError(DataError):
    def __init__(self, column: str):
        super().__init__(f"training std is zero for continuous column {column!r}")
        self.column = column


class ColumnKind(str, enum.Enum):
    CONTINUOUS = "continuous"
    SEASONAL_DUMMY = "seasonal_dummy"
    SHOCK_DUMMY = "shock_dummy"
    TARGET = "target"

    @property
    def is_dummy(self) -> bool:
        return self in (ColumnKind.SEASONAL_DUMMY, ColumnKind.SHOCK_DUMMY)


@dataclass(frozen=True)
class TransformSpec:
    aggregation: dict[str, Aggregation] = field(default_factory=dict)
    forward_fill_limit: int = 9
    adf_alpha: float = 0.05
    adf_lags: int = 4
    neg_shock_threshold: float = -2.5
    pos_shock_threshold: float = 5.0

    def __post_init__(self) -> None:
        if not self.neg_shock_threshold < 0 < self.pos_shock_threshold:
            raise ValueError("shock thresholds must satisfy neg < 0 < pos")
        if not 0 < self.adf_alpha < 1:
            raise ValueError("adf_alpha must lie in (0, 1)")


class SeriesFrame:
    """Quarter-indexed matrix of named columns, each tagged with a :class:`ColumnKind`.

    Values are stored as a dense ``(n_quarters, n_columns)`` float array.
    """

    def __init__(
        self,
        index: Sequence[Quarter],
        names: Sequence[str],
        values: np.ndarray,
        kinds: dict[str, ColumnKind] | None = None,
    ):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape != (len(index), len(names)):
            raise ShapeError(
                f"values shape {values.shape} does not match "
                f"{len(index)} quarters x {len(names)} columns"
            )
        if len(set(names)) != len(names):
            raise ShapeError("duplicate column names")
        self.index = [Quarter.parse(q) for q in index]
        for a, b in zip(self.index, self.index[1:]):
            if b.ordinal != a.ordinal + 1:
                raise ShapeError(f"index is not contiguous at {a} -> {b}")
        self.names = list(names)
        self.values = values
        kinds = dict(kinds or {})
        self.kinds = {n: ColumnKind(kinds.get(n, ColumnKind.CONTINUOUS)) for n in self.names}

    # -- accessors ---------------------------------------------------------
    def __len__(self) -> int:
        return len(self.index)

    def __repr__(self) -> str:
        span = f"{self.index[0]}..{self.index[-1]}" if self.index else "empty"
        return f"SeriesFrame({span}, {len(self.names)} columns)"

    def col(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def position(self, q: Quarter | str) -> int:
        q = Quarter.parse(q)
        pos = q.ordinal - self.index[0].ordinal
        if not 0 <= pos < len(self.index):
            raise KeyError(f"{q} outside frame range")
        return pos

    def names_of(self, *kinds: ColumnKind) -> list[str]:
        return [n for n in self.names if self.kinds[n] in kinds]

    @property
    def target_name(self) -> str:
        targets = self.names_of(ColumnKind.TARGET)
        if len(targets) != 1:
            raise DataError(f"expected exactly one target column, found {len(targets)}")
        return targets[0]

    @property
    def feature_names(self) -> list[str]:
        return [n for n in self.names if self.kinds[n] is not ColumnKind.TARGET]

    def copy(self) -> SeriesFrame:
        return SeriesFrame(self.index, self.names, self.values.copy(), self.kinds)

    def rows(self, start: int, stop: int) -> SeriesFrame:
        return SeriesFrame(self.index[start:stop], self.names, self.values[start:stop], self.kinds)

    def between(self, first: Quarter | str, last: Quarter | str) -> SeriesFrame:
        return self.rows(self.position(first), self.position(last) + 1)

    def select(self, names: Sequence[str]) -> SeriesFrame:
        idx = [self.names.index(n) for n in names]
        return SeriesFrame(self.index, names, self.values[:, idx], {n: self.kinds[n] for n in names})

    def drop(self, names: Sequence[str]) -> SeriesFrame:
        gone = set(names)
        return self.select([n for n in self.names if n not in gone])

    def with_columns(self, cols: dict[str, np.ndarray], kinds: dict[str, ColumnKind]) -> SeriesFrame:
        names = self.names + list(cols)
        values = np.column_stack([self.values] + [np.asarray(v, float) for v in cols.values()])
        return SeriesFrame(self.index, names, values, {**self.kinds, **kinds})

    def validate(self) -> None:
        """Check the post-ingestion invariants."""
        if np.isnan(self.values).any():
            bad = [n for n in self.names if np.isnan(self.col(n)).any()]
            raise DataError(f"missing values remain in {bad}")
        for n in self.names:
            if self.kinds[n].is_dummy and not np.isin(self.col(n), (0.0, 1.0)).all():
                raise DataError(f"dummy column {n!r} has values outside {{0, 1}}")
        _ = self.target_name

    # -- io ----------------------------------------------------------------
    def to_pandas(self) -> pd.DataFrame:
        df = pd.DataFrame(self.values, columns=self.names)
        df.insert(0, "quarter", [str(q) for q in self.index])
        return df

    @classmethod
    def from_pandas(cls, df: pd.DataFrame, kinds: dict[str, ColumnKind] | None = None) -> SeriesFrame:
        if df.columns[0] != "quarter":
            raise IngestionError("first CSV column must be named 'quarter'")
        index = [Quarter.parse(q) for q in df["quarter"]]
        body = df.drop(columns="quarter")
        values = body.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
        return cls(index, [str(c) for c in body.columns], values, kinds)

    @classmethod
    def read_csv(cls, path: str | Path, kinds: dict[str, ColumnKind] | None = None) -> SeriesFrame:
        return cls.from_pandas(pd.read_csv(path, dtype={"quarter": str}), kinds)

    def write_csv(self, path: str | Path) -> None:
        self.to_pandas().to_csv(path, index=False, float_format="%.10g")


# -- elementary transforms -------------------------------------------------


def deflate_and_growth(nominal, deflator) -> np.ndarray:
    """Quarter-over-quarter percentage growth of the deflated series.

    ``real_t = 100 * nominal_t / deflator_t``; the result has one fewer element.
    """
    nominal = np.asarray(nominal, dtype=float)
    deflator = np.asarray(deflator, dtype=float)
    if nominal.shape != deflator.shape or nominal.ndim != 1:
        raise ShapeError("nominal and deflator must be 1-D and equally long")
    if nominal.size < 2:
        raise ShapeError("need at least two observations to form a growth rate")
    if np.any(deflator <= 0):
        raise DomainError("deflator must be strictly positive")
    real = 100.0 * nominal / deflator
    return 100.0 * (real[1:] - real[:-1]) / real[:-1]


def aggregate_monthly(values, method: Aggregation) -> np.ndarray:
    """Collapse a monthly series (length ``3k``) to ``k`` quarterly values."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size % 3:
        raise ShapeError(f"monthly series length {values.size} is not divisible by 3")
    m = values.reshape(-1, 3)
    if method == "sum":
        return m.sum(axis=1)
    if method == "mean":
        return m.mean(axis=1)
    if method == "end_of_period":
        return m[:, 2].copy()
    raise ValueError(f"unknown aggregation {method!r}")


def forward_fill(values, limit: int = 9) -> tuple[np.ndarray, bool]:
    """Carry the last observation forward over gaps (NaN).

    Returns ``(filled, flagged)``. ``flagged`` is True when the series starts
    with more than ``limit`` gaps, in which case the column should be removed
    and ``filled`` is returned unchanged.

    Raises
    ------
    IngestionError
        If there are leading gaps (no prior value to carry) but too few of
        them to flag the column for removal.
    """
    x = np.asarray(values, dtype=float).copy()
    observed = ~np.isnan(x)
    if not observed.any():
        return x, True
    lead = int(np.argmax(observed))
    if lead >= limit + 1:
        return x, True
    if lead > 0:
        raise IngestionError(f"{lead} leading gap(s) with no prior value to carry forward")
    # index of last observation at or before each position
    last = np.where(observed, np.arange(x.size), 0)
    np.maximum.accumulate(last, out=last)
    return x[last], False


@dataclass
class AdfRecord:
    column: str
    statistic: float | None
    pvalue: float | None
    dropped: bool
    reason: str | None = None


def adf_filter(frame: SeriesFrame, spec: TransformSpec) -> tuple[SeriesFrame, list[AdfRecord]]:
    """Drop continuous columns whose ADF test cannot reject a unit root.

    Dummy and target columns are never tested.
    """
    records: list[AdfRecord] = []
    drop: list[str] = []
    for name in frame.names_of(ColumnKind.CONTINUOUS):
        x = frame.col(name)
        if np.nanstd(x) == 0:
            records.append(AdfRecord(name, None, None, True, "zero variance"))
            drop.append(name)
            continue
        res = adf_test(x, lags=spec.adf_lags)
        keep = res.rejects_unit_root(spec.adf_alpha)
        records.append(
            AdfRecord(name, res.statistic, res.pvalue, not keep, None if keep else "unit root")
        )
        if not keep:
            drop.append(name)
    if drop:
        logger.info("ADF filter dropped %d column(s): %s", len(drop), drop)
    return frame.drop(drop), records


SEASONAL_NAMES = ("season_q1", "season_q2", "season_q3")
NEG_SHOCK = "shock_negative"
POS_SHOCK = "shock_positive"


def build_dummies(
    index: Sequence[Quarter], target_growth, spec: TransformSpec | None = None
) -> dict[str, np.ndarray]:
    """Seasonal (Q1-Q3, Q4 baseline) and threshold shock dummies."""
    spec = spec or TransformSpec()
    g = np.asarray(target_growth, dtype=float)
    if g.shape != (len(index),):
        raise ShapeError("target must be aligned with the quarter index")
    qs = np.array([Quarter.parse(q).quarter for q in index])
    out = {name: (qs == k + 1).astype(float) for k, name in enumerate(SEASONAL_NAMES)}
    out[NEG_SHOCK] = (g <= spec.neg_shock_threshold).astype(float)
    out[POS_SHOCK] = (g >= spec.pos_shock_threshold).astype(float)
    return out


@dataclass(frozen=True)
class ColumnStats:
    mean: float
    std: float


def iterative_standardize(
    train: SeriesFrame, apply_to: SeriesFrame
) -> tuple[SeriesFrame, dict[str, ColumnStats]]:
    """Z-score the continuous columns of ``apply_to`` with ``train`` statistics.

    Dummy and target columns pass through untouched. Statistics use the
    population standard deviation.
    """
    out = apply_to.copy()
    stats: dict[str, ColumnStats] = {}
    for name in apply_to.names_of(ColumnKind.CONTINUOUS):
        x = train.col(name)
        mu, sd = float(np.mean(x)), float(np.std(x))
        if not sd > 0:
            raise StandardizationError(name)
        stats[name] = ColumnStats(mu, sd)
        j = out.names.index(name)
        out.values[:, j] = (out.values[:, j] - mu) / sd
    return out, stats


# -- full ingestion --------------------------------------------------------


@dataclass
class IngestionLedger:
    source: str
    target: str
    first_quarter: str
    last_quarter: str
    removed: dict[str, str] = field(default_factory=dict)
    adf: list[AdfRecord] = field(default_factory=list)
    column_kinds: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "source": self.source,
                "target": self.target,
                "first_quarter": self.first_quarter,
                "last_quarter": self.last_quarter,
                "removed": self.removed,
                "adf": [vars(r) for r in self.adf],
                "column_kinds": self.column_kinds,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> IngestionLedger:
        d = json.loads(text)
        return cls(
            source=d["source"],
            target=d["target"],
            first_quarter=d["first_quarter"],
            last_quarter=d["last_quarter"],
            removed=d["removed"],
            adf=[AdfRecord(**r) for r in d["adf"]],
            column_kinds=d["column_kinds"],
        )


def ingest(
    raw: SeriesFrame | str | Path,
    target: str,
    spec: TransformSpec | None = None,
    deflator: str | None = None,
) -> tuple[SeriesFrame, IngestionLedger]:
    """Turn a raw quarterly table into the stationary, dummy-augmented frame.

    Parameters
    ----------
    raw : SeriesFrame or path
        Raw quarterly table; missing cells are NaN.
    target : str
        Target column. When ``deflator`` is given the target column holds
        nominal levels and is converted to real q/q growth (the first quarter
        is lost); otherwise it is taken as growth already.
    spec : TransformSpec, optional
    deflator : str, optional
        Deflator column name (removed from the features).
    """
    spec = spec or TransformSpec()
    source = str(raw) if not isinstance(raw, SeriesFrame) else "<frame>"
    frame = raw if isinstance(raw, SeriesFrame) else SeriesFrame.read_csv(raw)
    if target not in frame.names:
        raise IngestionError(f"target column {target!r} not found")
    if deflator is not None:
        growth = deflate_and_growth(frame.col(target), frame.col(deflator))
        frame = frame.drop([deflator]).rows(1, len(frame))
        frame.values[:, frame.names.index(target)] = growth
    if np.isnan(frame.col(target)).any():
        raise IngestionError("target column has missing values")

    removed: dict[str, str] = {}
    values = frame.values.copy()
    for j, name in enumerate(frame.names):
        if name == target:
            continue
        try:
            filled, flagged = forward_fill(values[:, j], spec.forward_fill_limit)
        except IngestionError as exc:
            raise IngestionError(f"column {name!r}: {exc}") from None
        if flagged:
            removed[name] = f"more than {spec.forward_fill_limit} leading missing values"
        else:
            values[:, j] = filled
    kinds = {n: ColumnKind.CONTINUOUS for n in frame.names}
    kinds[target] = ColumnKind.TARGET
    frame = SeriesFrame(frame.index, frame.names, values, kinds).drop(list(removed))

    frame, adf_records = adf_filter(frame, spec)
    for r in adf_records:
        if r.dropped:
            removed[r.column] = r.reason or "dropped"

    dummies = build_dummies(frame.index, frame.col(target), spec)
    dkinds = {n: ColumnKind.SEASONAL_DUMMY for n in SEASONAL_NAMES}
    dkinds.update({NEG_SHOCK: ColumnKind.SHOCK_DUMMY, POS_SHOCK: ColumnKind.SHOCK_DUMMY})
    frame = frame.with_columns(dummies, dkinds)
    frame.validate()
    ledger = IngestionLedger(
        source=source,
        target=target,
        first_quarter=str(frame.index[0]),
        last_quarter=str(frame.index[-1]),
        removed=removed,
        adf=adf_records,
        column_kinds={n: k.value for n, k in frame.kinds.items()},
    )
    return frame, ledger


def load_clean(csv_path: str | Path, ledger_path: str | Path) -> SeriesFrame:
    """Reload a frame written by :func:`ingest` together with its column kinds."""
    ledger = IngestionLedger.from_json(Path(ledger_path).read_text())
    kinds = {n: ColumnKind(k) for n, k in ledger.column_kinds.items()}
    frame = SeriesFrame.read_csv(csv_path, kinds)
    frame.validate()
    return frame
