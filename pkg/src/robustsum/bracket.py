"""Extended reals and certified enclosures.

Extended reals are plain floats: ``math.inf`` plays the role of +inf.
Family terms never take the value -inf; it only shows up in classification
results and in dual values such as ``-phi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

INF = math.inf


def ext_add(*values: float) -> float:
    """Sum extended reals with +inf absorbing, so that (+inf) + (-inf) = +inf."""
    if any(v == INF for v in values):
        return INF
    return math.fsum(values)


@dataclass(frozen=True)
class Bracket:
    """A certified enclosure ``lo <= value <= hi`` of an extended real."""

    lo: float
    hi: float

    def __post_init__(self):
        # "+ 0.0" also turns -0.0 into 0.0
        object.__setattr__(self, "lo", float(self.lo) + 0.0)
        object.__setattr__(self, "hi", float(self.hi) + 0.0)
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("bracket endpoints must not be NaN")
        if self.lo > self.hi:
            raise ValueError(f"bracket with lo={self.lo!r} > hi={self.hi!r}")

    @classmethod
    def exact(cls, value: float) -> "Bracket":
        return cls(float(value), float(value))

    @property
    def width(self) -> float:
        if self.lo == self.hi:
            return 0.0
        return self.hi - self.lo

    @property
    def is_exact(self) -> bool:
        return self.lo == self.hi

    @property
    def mid(self) -> float:
        if self.lo == self.hi:
            return self.lo
        if math.isinf(self.lo) or math.isinf(self.hi):
            return self.hi if math.isinf(self.lo) else self.lo
        return 0.5 * (self.lo + self.hi)

    @property
    def is_plus_inf(self) -> bool:
        return self.lo == INF

    @property
    def is_minus_inf(self) -> bool:
        return self.hi == -INF

    def contains(self, value: float, tol: float = 0.0) -> bool:
        if math.isinf(value):
            return (value == self.hi if value > 0 else value == self.lo)
        return self.lo - tol <= value <= self.hi + tol

    def __neg__(self) -> "Bracket":
        return Bracket(-self.hi, -self.lo)

    def shift(self, delta: float) -> "Bracket":
        return Bracket(self.lo + delta, self.hi + delta)

    def map_increasing(self, fn) -> "Bracket":
        return Bracket(fn(self.lo), fn(self.hi))

    def __float__(self) -> float:
        return self.mid

    def to_json(self) -> dict:
        return {"lo": self.lo, "hi": self.hi}


def hull(*brackets: Bracket) -> Bracket:
    return Bracket(min(b.lo for b in brackets), max(b.hi for b in brackets))
