"""Walk-forward split planning (expanding train, rolling validation, one test quarter)."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from .data import ColumnKind, SeriesFrame
from .quarters import Quarter

T = TypeVar("T")

VALIDATION_LENGTH = 12


class PlanningError(ValueError):
    pass


@dataclass(frozen=True)
class SplitPlan:
    """One walk-forward iteration; all ranges are inclusive."""

    train_start: Quarter
    train_end: Quarter
    val_start: Quarter
    val_end: Quarter
    test_quarter: Quarter

    def __post_init__(self) -> None:
        if not (
            self.train_start <= self.train_end
            and self.val_start.ordinal == self.train_end.ordinal + 1
            and self.val_end.ordinal - self.val_start.ordinal + 1 == VALIDATION_LENGTH
            and self.test_quarter.ordinal == self.val_end.ordinal + 1
        ):
            raise PlanningError(f"inconsistent split {self}")

    @property
    def n_train(self) -> int:
        return self.train_end - self.train_start + 1

    def as_row(self) -> dict[str, str]:
        return {
            "train_start": str(self.train_start),
            "train_end": str(self.train_end),
            "val_start": str(self.val_start),
            "val_end": str(self.val_end),
            "test_quarter": str(self.test_quarter),
        }


def _default_subperiods() -> dict[str, tuple[Quarter, Quarter]]:
    return {
        "Pre-COVID": (Quarter(2017, 1), Quarter(2019, 4)),
        "COVID": (Quarter(2020, 1), Quarter(2020, 4)),
        "Post-COVID": (Quarter(2021, 1), Quarter(2023, 2)),
    }


@dataclass
class Horizon:
    """Test-quarter span and the named evaluation sub-periods.

    ``Overall`` is always ``[first_test, last_test]`` and ``Excluding-COVID``
    is ``Overall`` minus the ``COVID`` interval; the remaining intervals are
    configurable.
    """

    first_test: Quarter = Quarter(2017, 1)
    last_test: Quarter = Quarter(2023, 2)
    intervals: dict[str, tuple[Quarter, Quarter]] = field(default_factory=_default_subperiods)

    def __post_init__(self) -> None:
        self.first_test = Quarter.parse(self.first_test)
        self.last_test = Quarter.parse(self.last_test)
        self.intervals = {
            k: (Quarter.parse(a), Quarter.parse(b)) for k, (a, b) in self.intervals.items()
        }
        if self.last_test < self.first_test:
            raise PlanningError("last_test precedes first_test")

    @property
    def subperiods(self) -> list[str]:
        names = ["Overall", *self.intervals]
        if "COVID" in self.intervals:
            names.append("Excluding-COVID")
        return names

    def contains(self, name: str, q: Quarter) -> bool:
        q = Quarter.parse(q)
        in_overall = self.first_test <= q <= self.last_test
        if name == "Overall":
            return in_overall
        if name == "Excluding-COVID" and "COVID" in self.intervals:
            lo, hi = self.intervals["COVID"]
            return in_overall and not lo <= q <= hi
        if name in self.intervals:
            lo, hi = self.intervals[name]
            return in_overall and lo <= q <= hi
        raise KeyError(f"unknown sub-period {name!r}; known: {self.subperiods}")

    def to_dict(self) -> dict:
        return {
            "first_test": str(self.first_test),
            "last_test": str(self.last_test),
            "subperiods": {k: [str(a), str(b)] for k, (a, b) in self.intervals.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> Horizon:
        kw = {}
        if "subperiods" in d:
            kw["intervals"] = {k: tuple(v) for k, v in d["subperiods"].items()}
        return cls(
            Quarter.parse(d.get("first_test", "2017 Q1")),
            Quarter.parse(d.get("last_test", "2023 Q2")),
            **kw,
        )


def plan_walk_forward(
    data_start: Quarter | str, data_end: Quarter | str, horizon: Horizon | None = None
) -> list[SplitPlan]:
    """One split per test quarter; the training block grows one quarter per step."""
    horizon = horizon or Horizon()
    data_start, data_end = Quarter.parse(data_start), Quarter.parse(data_end)
    if horizon.first_test - data_start < VALIDATION_LENGTH + 1:
        raise PlanningError(
            f"need at least {VALIDATION_LENGTH + 1} quarters before {horizon.first_test}"
        )
    if horizon.last_test > data_end:
        raise PlanningError(f"last test quarter {horizon.last_test} beyond data end {data_end}")
    plans = []
    for k in range(horizon.first_test.ordinal, horizon.last_test.ordinal + 1):
        test = Quarter.from_ordinal(k)
        plans.append(
            SplitPlan(
                train_start=data_start,
                train_end=test - (VALIDATION_LENGTH + 1),
                val_start=test - VALIDATION_LENGTH,
                val_end=test - 1,
                test_quarter=test,
            )
        )
    return plans


def neutralize_shock_dummies(frame: SeriesFrame, split: SplitPlan) -> SeriesFrame:
    """Zero shock dummies on the last validation quarter and on the test quarter."""
    out = frame.copy()
    cols = [out.names.index(n) for n in out.names_of(ColumnKind.SHOCK_DUMMY)]
    if not cols:
        return out
    for q in (split.val_end, split.test_quarter):
        try:
            row = out.position(q)
        except KeyError:
            continue
        out.values[row, cols] = 0.0
    return out


def slice_subperiod(
    records: Iterable[T],
    name: str,
    horizon: Horizon | None = None,
    quarter_of: Callable[[T], Quarter] | None = None,
) -> list[T]:
    """Keep records whose test quarter falls in sub-period ``name``."""
    horizon = horizon or Horizon()
    if name not in horizon.subperiods:
        raise KeyError(f"unknown sub-period {name!r}; known: {horizon.subperiods}")
    key = quarter_of or _default_quarter_of
    return [r for r in records if horizon.contains(name, key(r))]


def _default_quarter_of(r) -> Quarter:
    if isinstance(r, Quarter):
        return r
    if isinstance(r, SplitPlan):
        return r.test_quarter
    return Quarter.parse(getattr(r, "quarter"))


def subperiod_mask(quarters: Sequence[Quarter], name: str, horizon: Horizon) -> np.ndarray:
    return np.array([horizon.contains(name, q) for q in quarters], dtype=bool)


def export_splits(plans: Sequence[SplitPlan], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(plans[0].as_row()))
        w.writeheader()
        for p in plans:
            w.writerow(p.as_row())
