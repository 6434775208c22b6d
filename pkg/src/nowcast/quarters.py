"""Quarter arithmetic."""

from __future__ import annotations

import re
from dataclasses import dataclass

_QUARTER_RE = re.compile(r"^\s*(\d{4})\s*[- ]?\s*[Qq]([1-4])\s*$")


@dataclass(frozen=True, order=True)
class Quarter:
    """A calendar quarter, totally ordered by ``(year, quarter)``."""

    year: int
    quarter: int

    def __post_init__(self) -> None:
        if not 1 <= self.quarter <= 4:
            raise ValueError(f"quarter must be in 1..4, got {self.quarter}")

    @classmethod
    def parse(cls, text: str | Quarter) -> Quarter:
        """Parse ``"2017 Q1"`` (also ``"2017Q1"`` / ``"2017-Q1"``)."""
        if isinstance(text, Quarter):
            return text
        m = _QUARTER_RE.match(str(text))
        if m is None:
            raise ValueError(f"cannot parse quarter {text!r}; expected 'YYYY Qn'")
        return cls(int(m.group(1)), int(m.group(2)))

    @property
    def ordinal(self) -> int:
        return self.year * 4 + (self.quarter - 1)

    @classmethod
    def from_ordinal(cls, k: int) -> Quarter:
        return cls(k // 4, k % 4 + 1)

    def __add__(self, n: int) -> Quarter:
        return Quarter.from_ordinal(self.ordinal + int(n))

    def __sub__(self, other):
        if isinstance(other, Quarter):
            return self.ordinal - other.ordinal
        return Quarter.from_ordinal(self.ordinal - int(other))

    def succ(self) -> Quarter:
        return self + 1

    def __str__(self) -> str:
        return f"{self.year} Q{self.quarter}"


def quarter_range(start: Quarter | str, end: Quarter | str) -> list[Quarter]:
    """Inclusive list of quarters from ``start`` to ``end``."""
    a, b = Quarter.parse(start), Quarter.parse(end)
    return [Quarter.from_ordinal(k) for k in range(a.ordinal, b.ordinal + 1)]
