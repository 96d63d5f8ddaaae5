"""Robust sums of families of extended reals.

The robust sum of ``(a_i)`` is the supremum, over nonempty finite index sets
``J``, of ``sum_{i in J} a_i``.  It is always defined in ``R u {+inf}`` and
obeys the dichotomy

* ``sum a_i^+`` when ``sup a_i >= 0``;
* ``sup a_i`` when ``sup a_i <= 0``,

which is how it is evaluated here.  Finite families are evaluated exactly
(up to the correctly rounded ``math.fsum``).  Countable families need a
:class:`TailCertificate`; without one, evaluation gives up after a term
budget instead of guessing from samples.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import kernels
from .bracket import INF, Bracket
from .errors import InvalidFamily, SizeLimit, UnknownBudgetExceeded

DEFAULT_TOL = 1e-9
DEFAULT_BUDGET = 10**6
_START_TERMS = 64
_EPS = np.finfo(float).eps

TailBound = Callable[[int], Union[float, tuple]]


class Sign(enum.Enum):
    NONNEGATIVE = "nonnegative"
    NONPOSITIVE = "nonpositive"
    ZERO = "zero"


class Finiteness(enum.Enum):
    FINITE = "finite"
    INFINITE = "infinite"
    UNKNOWN = "unknown"


class SumKind(enum.Enum):
    EXISTS_FINITE = "exists_finite"
    MINUS_INFINITY = "minus_infinity"
    PLUS_INFINITY_UNCONDITIONAL = "plus_infinity_unconditional"
    UNDEFINED = "undefined"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class SumClassification:
    kind: SumKind
    value: Optional[Bracket] = None


@dataclass(frozen=True)
class SupResult:
    value: Bracket
    sign: Optional[Sign]


@dataclass(frozen=True)
class TailCertificate:
    """Facts about the terms beyond index ``N`` of a countable family.

    ``pos_tail(N)`` and ``neg_tail(N)`` bound ``sum_{i>N} a_i^+`` and
    ``sum_{i>N} a_i^-``.  They may return a single upper bound or a
    ``(lower, upper)`` pair; two-sided bounds let brackets shrink from below
    as well.  ``sup_tail(N)`` optionally encloses ``sup_{i>N} a_i``.
    A divergence flag overrides the corresponding bound map.
    ``pos_infinitely_often`` declares that infinitely many terms are > 0 and
    ``sup_attained`` whether ``sup a_i`` is reached by some term.
    """

    pos_tail: Optional[TailBound] = None
    neg_tail: Optional[TailBound] = None
    sup_tail: Optional[Callable[[int], tuple]] = None
    pos_divergent: bool = False
    neg_divergent: bool = False
    pos_infinitely_often: Optional[bool] = None
    sup_attained: Optional[bool] = None

    @staticmethod
    def _pair(bound, N: int) -> tuple:
        raw = bound(N)
        lo, hi = (0.0, raw) if np.isscalar(raw) else raw
        lo, hi = float(lo), float(hi)
        if not (0.0 <= lo <= hi):
            raise InvalidFamily(f"tail bound at N={N} is not a nonnegative enclosure: {(lo, hi)}")
        return lo, hi

    def pos_bounds(self, N: int) -> Optional[tuple]:
        if self.pos_divergent:
            return (INF, INF)
        if self.pos_tail is None:
            return None
        return self._pair(self.pos_tail, N)

    def neg_bounds(self, N: int) -> Optional[tuple]:
        if self.neg_divergent:
            return (INF, INF)
        if self.neg_tail is None:
            return None
        return self._pair(self.neg_tail, N)


@dataclass(frozen=True, eq=False)
class ScalarFamily:
    """A finite list of terms or a countable generator ``i -> a_i``.

    ``generator`` is vectorised: it receives an integer array of indices and
    returns the matching terms.  Countable indices run over ``start, start+1,
    ...``; finite families are indexed ``start, ..., start + len - 1``.
    """

    terms: Optional[np.ndarray] = None
    generator: Optional[Callable[[np.ndarray], np.ndarray]] = None
    tail: Optional[TailCertificate] = None
    start: int = 1
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if (self.terms is None) == (self.generator is None):
            raise InvalidFamily("give exactly one of terms or generator")
        if self.terms is not None:
            arr = np.array(self.terms, dtype=float).reshape(-1)
            _validate_terms(arr)
            object.__setattr__(self, "terms", arr)

    @classmethod
    def finite(cls, terms: Sequence[float], name: str = "", start: int = 1) -> "ScalarFamily":
        return cls(terms=np.asarray(terms, dtype=float), name=name, start=start)

    @classmethod
    def countable(cls, generator, tail: Optional[TailCertificate] = None,
                  name: str = "", start: int = 1) -> "ScalarFamily":
        return cls(generator=generator, tail=tail, name=name, start=start)

    @property
    def is_finite(self) -> bool:
        return self.terms is not None

    def __len__(self) -> int:
        if not self.is_finite:
            raise TypeError("countable family has no length")
        return len(self.terms)

    def indices(self, count: int) -> np.ndarray:
        return np.arange(self.start, self.start + count, dtype=np.int64)

    def head(self, count: int) -> np.ndarray:
        """The first ``count`` terms (all terms for a finite family)."""
        if self.is_finite:
            return self.terms[:count]
        cached = self._cache.get("head")
        if cached is not None and len(cached) >= count:
            return cached[:count]
        vals = np.asarray(self.generator(self.indices(count)), dtype=float).reshape(-1)
        if len(vals) != count:
            raise InvalidFamily("generator returned the wrong number of terms")
        _validate_terms(vals)
        self._cache["head"] = vals
        return vals


def _validate_terms(arr: np.ndarray) -> None:
    if np.isnan(arr).any():
        raise InvalidFamily("family term is NaN")
    if (arr == -INF).any():
        raise InvalidFamily("family term equals -inf")


def finite_subset(indices) -> tuple:
    """Validate a nonempty finite index set and return it as a sorted tuple."""
    idx = tuple(int(i) for i in indices)
    if not idx:
        raise InvalidFamily("finite subsets are nonempty")
    if len(set(idx)) != len(idx):
        raise InvalidFamily(f"duplicate index in {idx}")
    return tuple(sorted(idx))


# -- part sums -----------------------------------------------------------------

def _finite_part(terms: np.ndarray, positive: bool) -> float:
    part = np.maximum(terms, 0.0) if positive else np.maximum(-terms, 0.0)
    if positive and (part == INF).any():
        return INF
    return math.fsum(part)


def _countable_part(family: ScalarFamily, positive: bool, tol: float, budget: int) -> Bracket:
    tail = family.tail
    bounds = None if tail is None else (tail.pos_bounds if positive else tail.neg_bounds)
    if bounds is not None and bounds(family.start)[0] == INF:
        return Bracket.exact(INF)
    N = min(_START_TERMS, budget)
    best = None
    while True:
        head = family.head(N)
        if positive and (head == INF).any():
            return Bracket.exact(INF)
        part = np.maximum(head, 0.0) if positive else np.maximum(-head, 0.0)
        if bounds is None:
            if N >= budget:
                raise UnknownBudgetExceeded(
                    f"no tail certificate for {family.name or 'family'}; scanned {N} terms")
            N = min(2 * N, budget)
            continue
        s = math.fsum(part)
        # terms come out of a few rounded operations each
        slack = 16 * _EPS * s
        tlo, thi = bounds(family.start + N - 1)
        best = Bracket(max(s + tlo - slack, 0.0), s + thi + slack)
        if best.width <= tol:
            return best
        if N >= budget:
            raise UnknownBudgetExceeded(
                f"tail bound did not reach width {tol} within {budget} terms", best)
        N = min(2 * N, budget)


def positive_part_sum(family: ScalarFamily, tol: float = DEFAULT_TOL,
                      budget: int = DEFAULT_BUDGET) -> Bracket:
    """Enclosure of ``sum_i a_i^+`` (exact for finite families)."""
    if family.is_finite:
        return Bracket.exact(_finite_part(family.terms, True))
    return _countable_part(family, True, tol, budget)


def negative_part_sum(family: ScalarFamily, tol: float = DEFAULT_TOL,
                      budget: int = DEFAULT_BUDGET) -> Bracket:
    """Enclosure of ``sum_i a_i^-``; +inf terms contribute nothing."""
    if family.is_finite:
        return Bracket.exact(_finite_part(family.terms, False))
    return _countable_part(family, False, tol, budget)


# -- supremum ------------------------------------------------------------------

def _sign_of(b: Bracket) -> Optional[Sign]:
    if b.lo == 0.0 and b.hi == 0.0:
        return Sign.ZERO
    if b.lo >= 0.0:
        return Sign.NONNEGATIVE
    if b.hi <= 0.0:
        return Sign.NONPOSITIVE
    return None


def _countable_sup(family: ScalarFamily, N: int) -> Bracket:
    head = family.head(N)
    m = float(head.max())
    tail = family.tail
    last = family.start + N - 1
    if tail is not None and tail.sup_tail is not None:
        slo, shi = tail.sup_tail(last)
        return Bracket(max(m, slo), max(m, shi))
    if tail is not None:
        pos = tail.pos_bounds(last)
        if pos is not None:
            # every later term is at most the positive mass beyond N
            return Bracket(m, max(m, pos[1]))
    return Bracket(m, INF)


def sup_scalar(family: ScalarFamily, tol: float = DEFAULT_TOL,
               budget: int = DEFAULT_BUDGET) -> SupResult:
    """Enclosure of ``sup_i a_i`` together with a certified sign verdict."""
    if family.is_finite:
        if len(family.terms) == 0:
            raise InvalidFamily("empty family")
        v = Bracket.exact(float(family.terms.max()))
        return SupResult(v, _sign_of(v))
    N = min(_START_TERMS, budget)
    while True:
        b = _countable_sup(family, N)
        sign = _sign_of(b)
        if sign is not None and (b.width <= tol or sign is Sign.NONNEGATIVE and b.hi == INF):
            return SupResult(b, sign)
        if N >= budget:
            if sign is None:
                raise UnknownBudgetExceeded("sign of the supremum not certified", b)
            return SupResult(b, sign)
        N = min(2 * N, budget)


# -- robust sum ----------------------------------------------------------------

def robust_sum_scalar(family: ScalarFamily, tol: float = DEFAULT_TOL,
                      budget: int = DEFAULT_BUDGET) -> Bracket:
    """Robust sum of the family as a bracket (exact for finite families)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if family.is_finite:
        terms = family.terms
        if len(terms) == 0:
            raise InvalidFamily("empty family")
        if (terms == INF).any():
            return Bracket.exact(INF)
        top = float(terms.max())
        if top >= 0:
            return Bracket.exact(_finite_part(terms, True))
        return Bracket.exact(top)
    tail = family.tail
    if tail is not None and tail.pos_divergent:
        return Bracket.exact(INF)
    if tail is None:
        # only a +inf term can be decided without a certificate
        N = min(_START_TERMS, budget)
        while True:
            if (family.head(N) == INF).any():
                return Bracket.exact(INF)
            if N >= budget:
                raise UnknownBudgetExceeded(
                    f"no tail certificate for {family.name or 'family'}; scanned {N} terms")
            N = min(2 * N, budget)
    sup = sup_scalar(family, tol, budget)
    if sup.sign is Sign.NONPOSITIVE:
        return sup.value
    return positive_part_sum(family, tol, budget)


def is_finite_robust_sum(family: ScalarFamily, tol: float = DEFAULT_TOL,
                         budget: int = DEFAULT_BUDGET) -> Finiteness:
    try:
        pos = positive_part_sum(family, tol, budget)
    except UnknownBudgetExceeded as exc:
        if exc.bracket is not None and exc.bracket.hi < INF:
            return Finiteness.FINITE
        return Finiteness.UNKNOWN
    return Finiteness.INFINITE if pos.lo == INF else Finiteness.FINITE


def infinite_sum_classify(family: ScalarFamily, tol: float = DEFAULT_TOL,
                          budget: int = DEFAULT_BUDGET) -> SumClassification:
    """Classify the unconditional sum ``sum_i a_i`` over finite subsets.

    With both part sums finite the sum exists and equals their difference; a
    finite positive part with a divergent negative part gives -inf; a
    divergent positive part gives +inf when the negative part is finite and
    no limit at all when both diverge.
    """
    try:
        pos = positive_part_sum(family, tol, budget)
        neg = negative_part_sum(family, tol, budget)
    except UnknownBudgetExceeded:
        return SumClassification(SumKind.UNKNOWN)
    if pos.lo == INF:
        if neg.lo == INF:
            return SumClassification(SumKind.UNDEFINED)
        return SumClassification(SumKind.PLUS_INFINITY_UNCONDITIONAL, Bracket.exact(INF))
    if neg.lo == INF:
        return SumClassification(SumKind.MINUS_INFINITY, Bracket.exact(-INF))
    if family.is_finite:
        return SumClassification(SumKind.EXISTS_FINITE, Bracket.exact(math.fsum(family.terms)))
    return SumClassification(SumKind.EXISTS_FINITE, Bracket(pos.lo - neg.hi, pos.hi - neg.lo))


def brute_force_robust_sum(family: ScalarFamily) -> float:
    """Maximum of the subset sums over every nonempty subset (testing oracle)."""
    if not family.is_finite:
        raise SizeLimit("brute force needs a finite family")
    terms = family.terms
    if len(terms) > kernels.MAX_ENUM:
        raise SizeLimit(f"brute force limited to {kernels.MAX_ENUM} terms, got {len(terms)}")
    if len(terms) == 0:
        raise InvalidFamily("empty family")
    if (terms == INF).any():
        return INF
    _, mask = kernels.max_subset_sum(terms)
    # recompute the winning subset with a correctly rounded sum
    return math.fsum(terms[list(kernels.mask_to_indices(mask))])


# -- named families ------------------------------------------------------------

def _zeta2_tail(m: int) -> tuple:
    """Enclosure of ``sum_{k>m} 1/k^2`` from the Euler-Maclaurin expansion."""
    if m <= 0:
        return (math.pi**2 / 6 - 1e-15, math.pi**2 / 6 + 1e-15)
    base = 1.0 / m - 0.5 / m**2
    return (base * (1 - 1e-15), (base + 1.0 / (6 * m**3)) * (1 + 1e-15))


def example1() -> ScalarFamily:
    """``a_i = 1/i^2`` for even ``i`` and ``-1/i`` for odd ``i``, ``i >= 1``."""

    def gen(i):
        i = i.astype(float)
        return np.where(i % 2 == 0, 1.0 / i**2, -1.0 / i)

    def pos_tail(N):
        # even i > N are i = 2k with k > N // 2, contributing 1/(4k^2)
        lo, hi = _zeta2_tail(N // 2)
        return (0.25 * lo, 0.25 * hi)

    def sup_tail(N):
        nxt = N + 1 if (N + 1) % 2 == 0 else N + 2
        v = 1.0 / nxt**2
        return (v, v)

    cert = TailCertificate(pos_tail=pos_tail, neg_divergent=True, sup_tail=sup_tail,
                           pos_infinitely_often=True, sup_attained=True)
    return ScalarFamily.countable(gen, cert, name="example1")


def alternating() -> ScalarFamily:
    """``a_i = (-1)^i``."""
    cert = TailCertificate(pos_divergent=True, neg_divergent=True,
                           sup_tail=lambda N: (1.0, 1.0), pos_infinitely_often=True,
                           sup_attained=True)
    return ScalarFamily.countable(lambda i: np.where(i % 2 == 0, 1.0, -1.0), cert,
                                  name="alternating")


def alternating_harmonic() -> ScalarFamily:
    """``a_i = (-1)^i / i``."""

    def sup_tail(N):
        nxt = N + 1 if (N + 1) % 2 == 0 else N + 2
        return (1.0 / nxt, 1.0 / nxt)

    cert = TailCertificate(pos_divergent=True, neg_divergent=True, sup_tail=sup_tail,
                           pos_infinitely_often=True, sup_attained=True)
    return ScalarFamily.countable(lambda i: np.where(i % 2 == 0, 1.0, -1.0) / i, cert,
                                  name="alternating_harmonic")


def geometric(r: float) -> ScalarFamily:
    """``a_i = r^i`` for ``i >= 1`` and ``0 < |r| < 1``."""
    r = float(r)
    if not 0 < abs(r) < 1:
        raise InvalidFamily("geometric ratio must satisfy 0 < |r| < 1")
    q = abs(r)

    def mass(first):
        # sum of q^i over i >= first with i of the same parity as first (r < 0)
        # or over all i >= first (r > 0)
        v = q**first / (1 - q) if r > 0 else q**first / (1 - q * q)
        return (v * (1 - 4 * _EPS), v * (1 + 4 * _EPS))

    def first_with(N, even):
        i = N + 1
        return i if (i % 2 == 0) == even else i + 1

    if r > 0:
        pos_tail = lambda N: mass(N + 1)
        neg_tail = lambda N: 0.0
        sup_tail = lambda N: (r ** (N + 1), r ** (N + 1))
    else:
        pos_tail = lambda N: mass(first_with(N, True))
        neg_tail = lambda N: mass(first_with(N, False))
        sup_tail = lambda N: (q ** first_with(N, True),) * 2
    cert = TailCertificate(pos_tail=pos_tail, neg_tail=neg_tail, sup_tail=sup_tail,
                           pos_infinitely_often=True, sup_attained=True)
    return ScalarFamily.countable(lambda i: r ** i.astype(float), cert, name=f"geometric({r:g})")


def shifted_harmonic() -> ScalarFamily:
    """``a_i = -1 - 1/i``; the supremum -1 is approached but never reached."""
    cert = TailCertificate(pos_tail=lambda N: 0.0, neg_divergent=True,
                           sup_tail=lambda N: (-1.0, -1.0), pos_infinitely_often=False,
                           sup_attained=False)
    return ScalarFamily.countable(lambda i: -1.0 - 1.0 / i, cert, name="shifted_harmonic")


def negative_harmonic() -> ScalarFamily:
    """``a_i = -1/i``; supremum 0, not attained."""
    cert = TailCertificate(pos_tail=lambda N: 0.0, neg_divergent=True,
                           sup_tail=lambda N: (0.0, 0.0), pos_infinitely_often=False,
                           sup_attained=False)
    return ScalarFamily.countable(lambda i: -1.0 / i, cert, name="negative_harmonic")


_BUILTINS = {
    "example1": example1,
    "alternating": alternating,
    "alternating_harmonic": alternating_harmonic,
    "shifted_harmonic": shifted_harmonic,
    "negative_harmonic": negative_harmonic,
    "geometric": geometric,
}

_NAME_RE = re.compile(r"^\s*([a-z_0-9]+)\s*(?:\(\s*([^)]*)\s*\))?\s*$")


def parse_builtin(text: str) -> tuple:
    m = _NAME_RE.match(text)
    if not m or m.group(1) not in _BUILTINS:
        raise KeyError(f"unknown builtin family {text!r}")
    name, arg = m.group(1), m.group(2)
    if name == "geometric":
        if arg is None:
            raise KeyError("geometric needs a ratio, e.g. geometric(0.5)")
        return name, (float(arg),)
    if arg:
        raise KeyError(f"builtin {name} takes no argument")
    return name, ()


def builtin(formula: str, tail: Optional[str] = "same") -> ScalarFamily:
    """A named family; ``tail=None`` drops the certificate, any other name
    must agree with ``formula``."""
    name, args = parse_builtin(formula)
    fam = _BUILTINS[name](*args)
    if tail is None:
        return ScalarFamily.countable(fam.generator, None, name=fam.name)
    if tail != "same" and parse_builtin(tail) != (name, args):
        raise KeyError(f"tail certificate {tail!r} does not describe {formula!r}")
    return fam


BUILTIN_NAMES = tuple(sorted(_BUILTINS))
