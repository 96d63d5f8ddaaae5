"""Function atoms, indexed families of atoms and their robust sums.

A family ``(f_i)`` induces ``f(x) = sup_J sum_{i in J} f_i(x)``, evaluated
pointwise with :func:`robust_sum_scalar` on the scalar family
``(f_i(x))_i``.  Countable families ship a pointwise tail certificate so that
the evaluation returns a bracket rather than a guess.
"""

from __future__ import annotations

import math
import threading
from typing import Callable, Optional, Sequence

import numpy as np

from .bracket import INF, Bracket
from .errors import DimensionMismatch, InvalidFamily, PreconditionViolated
from .scalar import (DEFAULT_BUDGET, DEFAULT_TOL, ScalarFamily, TailCertificate,
                     _zeta2_tail, builtin, robust_sum_scalar)

_EPS = np.finfo(float).eps


def _vec(values, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float)).reshape(-1)
    if not np.isfinite(arr).all():
        raise InvalidFamily(f"{name} must have finite entries")
    return arr


def _point(x, dim: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1)
    if arr.shape[0] != dim:
        raise DimensionMismatch(f"expected a point of dimension {dim}, got {arr.shape[0]}")
    return arr


class Atom:
    """Base class of the five supported proper convex lsc atoms."""

    convex = True
    has_closed_form_conjugate = True
    kind = "atom"

    dim: int

    def __call__(self, x) -> float:
        return float(self.values_many(_point(x, self.dim)[None, :])[0])

    def values_many(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def subgradient(self, x) -> np.ndarray:
        raise NotImplementedError

    @property
    def nonnegative(self) -> bool:
        raise NotImplementedError

    def affine_data(self) -> Optional[tuple]:
        """``(a, t)`` when the atom equals ``<a, .> - t``, else None."""
        return None

    def to_json(self) -> dict:
        raise NotImplementedError


class Affine(Atom):
    """``x -> <a, x> - t``."""

    kind = "affine"

    def __init__(self, a, t):
        self.a = _vec(a, "a")
        self.t = float(t)
        if not math.isfinite(self.t):
            raise InvalidFamily("t must be finite")
        self.dim = self.a.shape[0]

    def values_many(self, X):
        return X @ self.a - self.t

    def subgradient(self, x):
        return self.a.copy()

    @property
    def nonnegative(self):
        return not self.a.any() and self.t <= 0

    def affine_data(self):
        return self.a, self.t

    def to_json(self):
        return {"kind": self.kind, "a": self.a.tolist(), "t": self.t}

    def __repr__(self):
        return f"Affine(a={self.a.tolist()}, t={self.t!r})"


class Constant(Atom):
    """The constant function ``c`` on a space of dimension ``dim``."""

    kind = "constant"

    def __init__(self, c, dim: int = 1):
        self.c = float(c)
        if not math.isfinite(self.c):
            raise InvalidFamily("constant must be finite")
        self.dim = int(dim)

    def values_many(self, X):
        return np.full(X.shape[0], self.c)

    def subgradient(self, x):
        return np.zeros(self.dim)

    @property
    def nonnegative(self):
        return self.c >= 0

    def affine_data(self):
        return np.zeros(self.dim), -self.c

    def to_json(self):
        return {"kind": self.kind, "c": self.c, "dim": self.dim}

    def __repr__(self):
        return f"Constant({self.c!r}, dim={self.dim})"


class DiagonalQuadratic(Atom):
    """``x -> sum_j q_j x_j^2 + <a, x> - t`` with ``q >= 0``."""

    kind = "diagonal_quadratic"

    def __init__(self, q, a, t):
        self.q = _vec(q, "q")
        self.a = _vec(a, "a")
        self.t = float(t)
        if self.q.shape != self.a.shape:
            raise DimensionMismatch("q and a must have the same length")
        if (self.q < 0).any():
            raise InvalidFamily("quadratic weights must be nonnegative")
        self.dim = self.a.shape[0]

    def values_many(self, X):
        return (X * X) @ self.q + X @ self.a - self.t

    def subgradient(self, x):
        x = _point(x, self.dim)
        return 2 * self.q * x + self.a

    def minimum(self) -> float:
        free = self.q == 0
        if (self.a[free] != 0).any():
            return -INF
        pos = ~free
        return float(-np.sum(self.a[pos] ** 2 / (4 * self.q[pos])) - self.t)

    @property
    def nonnegative(self):
        return self.minimum() >= 0

    def affine_data(self):
        if self.q.any():
            return None
        return self.a, self.t

    def to_json(self):
        return {"kind": self.kind, "q": self.q.tolist(), "a": self.a.tolist(), "t": self.t}

    def __repr__(self):
        return f"DiagonalQuadratic(q={self.q.tolist()}, a={self.a.tolist()}, t={self.t!r})"


class _Residual(Atom):
    def __init__(self, a, b, p):
        self.a = _vec(a, "a")
        self.b = float(b)
        self.p = float(p)
        if not math.isfinite(self.b):
            raise InvalidFamily("b must be finite")
        if not self.p >= 1:
            raise InvalidFamily("exponent p must be >= 1")
        self.dim = self.a.shape[0]

    @property
    def nonnegative(self):
        return True

    def residual(self, x) -> float:
        return float(_point(x, self.dim) @ self.a - self.b)

    def to_json(self):
        return {"kind": self.kind, "a": self.a.tolist(), "b": self.b, "p": self.p}

    def __repr__(self):
        return f"{type(self).__name__}(a={self.a.tolist()}, b={self.b!r}, p={self.p!r})"


class PowerResidual(_Residual):
    """``x -> |<a, x> - b|^p``."""

    kind = "power"

    def values_many(self, X):
        return np.abs(X @ self.a - self.b) ** self.p

    def subgradient(self, x):
        r = self.residual(x)
        if r == 0:
            return np.zeros(self.dim)
        return self.p * abs(r) ** (self.p - 1) * math.copysign(1.0, r) * self.a


class HingeResidual(_Residual):
    """``x -> max(<a, x> - b, 0)^p``."""

    kind = "hinge"

    def values_many(self, X):
        return np.maximum(X @ self.a - self.b, 0.0) ** self.p

    def subgradient(self, x):
        r = self.residual(x)
        if r <= 0:
            return np.zeros(self.dim)
        return self.p * r ** (self.p - 1) * self.a


def eval_atom(atom: Atom, x) -> float:
    """Value of an atom at ``x``; never -inf."""
    return atom(x)


# -- families ------------------------------------------------------------------

class FunctionFamily:
    """An indexed family of atoms on ``R^dim``.

    Indices are the labels ``start, start + 1, ...``.  Subclasses provide
    ``values`` (vectorised over indices) and, for countable families, a
    pointwise tail certificate.
    """

    dim: int
    is_finite: bool
    name: str = ""
    start: int = 1
    all_nonnegative: bool = False
    all_affine: bool = False
    all_constant: bool = False
    domain_sample: Optional[np.ndarray] = None
    descriptor: Optional[dict] = None
    # {coordinate: value} when dom f lies in the affine set x_j = value
    pinned: Optional[dict] = None

    def atom(self, i: int) -> Atom:
        raise NotImplementedError

    def values(self, x, idx: np.ndarray) -> np.ndarray:
        x = _point(x, self.dim)
        return np.array([self.atom(int(i))(x) for i in idx], dtype=float)

    def pointwise_tail(self, x) -> Optional[TailCertificate]:
        return None

    def labels(self, count: int) -> np.ndarray:
        return np.arange(self.start, self.start + count, dtype=np.int64)

    def scalar_family(self, x) -> ScalarFamily:
        x = _point(x, self.dim)
        if self.is_finite:
            return ScalarFamily.finite(self.values(x, self.labels(len(self))), start=self.start)
        return ScalarFamily.countable(lambda idx: self.values(x, idx), self.pointwise_tail(x),
                                      name=self.name, start=self.start)

    def subgradients(self, x, idx: np.ndarray) -> np.ndarray:
        x = _point(x, self.dim)
        return np.array([self.atom(int(i)).subgradient(x) for i in idx]).reshape(len(idx), self.dim)


class FiniteFamily(FunctionFamily):
    is_finite = True

    def __init__(self, atoms: Sequence[Atom], name: str = ""):
        atoms = list(atoms)
        if not atoms:
            raise InvalidFamily("a family needs at least one atom")
        dims = {a.dim for a in atoms}
        if len(dims) != 1:
            raise DimensionMismatch(f"atoms of mixed dimensions {sorted(dims)}")
        self.atoms = atoms
        self.dim = dims.pop()
        self.name = name
        self.all_nonnegative = all(a.nonnegative for a in atoms)
        aff = [a.affine_data() for a in atoms]
        self.all_affine = all(d is not None for d in aff)
        self.all_constant = self.all_affine and not any(d[0].any() for d in aff)
        if self.all_affine:
            self.A = np.array([d[0] for d in aff], dtype=float).reshape(len(atoms), self.dim)
            self.T = np.array([d[1] for d in aff], dtype=float)

    def __len__(self):
        return len(self.atoms)

    def atom(self, i):
        if not self.start <= i < self.start + len(self.atoms):
            raise IndexError(i)
        return self.atoms[i - self.start]

    def values(self, x, idx):
        x = _point(x, self.dim)
        return np.array([self.atoms[int(i) - self.start](x) for i in idx], dtype=float)

    def values_matrix(self, X: np.ndarray) -> np.ndarray:
        """``F[k, j] = f_j(X[k])`` for all atoms."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.all_affine:
            return X @ self.A.T - self.T
        return np.column_stack([a.values_many(X) for a in self.atoms])

    @classmethod
    def affine(cls, rows, name: str = "") -> "FiniteFamily":
        """From rows ``[a_1, ..., a_n, t]`` meaning ``<a, x> - t``."""
        rows = [list(map(float, r)) for r in rows]
        return cls([Affine(r[:-1], r[-1]) for r in rows], name=name)

    @classmethod
    def hinge(cls, rows, p: float = 1.0, name: str = "") -> "FiniteFamily":
        """From rows ``[a_1, ..., a_n, b]`` meaning ``max(<a, x> - b, 0)^p``."""
        return cls([HingeResidual(r[:-1], r[-1], p) for r in rows], name=name)

    @classmethod
    def power(cls, rows, p: float = 2.0, name: str = "") -> "FiniteFamily":
        """From rows ``[a_1, ..., a_n, b]`` meaning ``|<a, x> - b|^p``."""
        return cls([PowerResidual(r[:-1], r[-1], p) for r in rows], name=name)

    @classmethod
    def constants(cls, values, dim: int = 1, name: str = "") -> "FiniteFamily":
        return cls([Constant(c, dim) for c in values], name=name)


class CountableFamily(FunctionFamily):
    """A countable family from an arbitrary atom generator.

    Without a pointwise tail certificate every evaluation ends in Unknown
    once the term budget is spent.
    """

    is_finite = False

    def __init__(self, atom_fn: Callable[[int], Atom], dim: int,
                 tail_fn: Optional[Callable] = None, nonnegative: bool = False,
                 name: str = ""):
        self._atom_fn = atom_fn
        self.dim = int(dim)
        self._tail_fn = tail_fn
        self.all_nonnegative = bool(nonnegative)
        self.name = name

    def atom(self, i):
        return self._atom_fn(int(i))

    def pointwise_tail(self, x):
        return None if self._tail_fn is None else self._tail_fn(_point(x, self.dim))


def _power_tail(scale: float, ratio: float, p: float, divergent: bool) -> TailCertificate:
    """Tail facts for terms ``scale * ratio**(i p)``, ``i >= 1``."""
    if divergent:
        return TailCertificate(pos_divergent=True, neg_tail=lambda N: 0.0,
                               pos_infinitely_often=True)
    if scale == 0:
        return TailCertificate(pos_tail=lambda N: 0.0, neg_tail=lambda N: 0.0,
                               sup_tail=lambda N: (0.0, 0.0), pos_infinitely_often=False,
                               sup_attained=True)
    g = ratio ** p

    def pos_tail(N):
        v = scale * g ** (N + 1) / (1 - g)
        return (v * (1 - 8 * _EPS), v * (1 + 8 * _EPS))

    def sup_tail(N):
        v = scale * g ** (N + 1)
        return (v * (1 - 4 * _EPS), v * (1 + 4 * _EPS))

    return TailCertificate(pos_tail=pos_tail, neg_tail=lambda N: 0.0, sup_tail=sup_tail,
                           pos_infinitely_often=True, sup_attained=True)


class GeometricCloud(FunctionFamily):
    """Residuals ``|x_1 + x_2 t_i - s_i|^p`` of the cloud ``t_i = s_i = 2^-i``.

    Off the line ``x_1 = 0`` the residuals tend to ``|x_1|`` and the robust
    sum is +inf; on it the terms are ``|x_2 - 1|^p 2^{-ip}``.
    """

    is_finite = False
    all_nonnegative = True
    name = "geometric_cloud"

    def __init__(self, p: float = 2.0):
        if not p >= 1:
            raise InvalidFamily("exponent p must be >= 1")
        self.p = float(p)
        self.dim = 2
        self.domain_sample = np.array([0.0, 1.0])
        self.pinned = {0: 0.0}
        self.descriptor = {"kind": "named", "name": self.name, "params": {"p": self.p}}

    def atom(self, i):
        t = 2.0 ** -i
        return PowerResidual([1.0, t], t, self.p)

    def points(self, idx):
        t = 2.0 ** -np.asarray(idx, dtype=float)
        return t, t

    def values(self, x, idx):
        x = _point(x, 2)
        t, s = self.points(idx)
        return np.abs(x[0] + x[1] * t - s) ** self.p

    def subgradients(self, x, idx):
        x = _point(x, 2)
        t, s = self.points(idx)
        r = x[0] + x[1] * t - s
        if self.p == 1:
            w = np.sign(r)
        else:
            w = self.p * np.abs(r) ** (self.p - 1) * np.sign(r)
        return np.column_stack([w, w * t])

    def pointwise_tail(self, x):
        x = _point(x, 2)
        c = abs(x[1] - 1.0)
        return _power_tail(c ** self.p, 0.5, self.p, divergent=x[0] != 0)


class GeometricResiduals(FunctionFamily):
    """One-dimensional residuals ``|x 2^-i|^p``."""

    is_finite = False
    all_nonnegative = True
    name = "geometric_residuals"

    def __init__(self, p: float = 2.0):
        self.p = float(p)
        self.dim = 1
        self.domain_sample = np.array([0.0])
        self.descriptor = {"kind": "named", "name": self.name, "params": {"p": self.p}}

    def atom(self, i):
        return PowerResidual([2.0 ** -i], 0.0, self.p)

    def values(self, x, idx):
        x = _point(x, 1)
        return np.abs(x[0] * 2.0 ** -np.asarray(idx, dtype=float)) ** self.p

    def subgradients(self, x, idx):
        x = _point(x, 1)
        a = 2.0 ** -np.asarray(idx, dtype=float)
        r = x[0] * a
        return (self.p * np.abs(r) ** (self.p - 1) * np.sign(r) * a)[:, None]

    def pointwise_tail(self, x):
        x = _point(x, 1)
        return _power_tail(abs(x[0]) ** self.p, 0.5, self.p, divergent=False)


class CountableConstants(FunctionFamily):
    """Constant atoms ``f_i = c_i`` where ``(c_i)`` is a scalar family.

    In the affine notation ``f_i = <0, .> - t_i`` this is ``t_i = -c_i``.
    """

    is_finite = False
    all_affine = True
    all_constant = True

    def __init__(self, constants: ScalarFamily, dim: int = 1, name: str = "",
                 theta_exact: Optional[float] = None):
        if constants.is_finite:
            raise InvalidFamily("use FiniteFamily.constants for finitely many constants")
        self.constants = constants
        # declared exact value of sum^R c_i, when known in closed form
        self.theta_exact = theta_exact
        self.dim = int(dim)
        self.name = name or constants.name
        self.start = constants.start
        head = constants.head(64)
        self.all_nonnegative = bool(
            (head >= 0).all() and constants.tail is not None
            and constants.tail.neg_tail is not None and constants.tail.neg_bounds(64)[1] == 0)
        self.domain_sample = np.zeros(self.dim)

    def atom(self, i):
        return Constant(float(self.constants.generator(np.array([i]))[0]), self.dim)

    def values(self, x, idx):
        _point(x, self.dim)
        return np.asarray(self.constants.generator(np.asarray(idx)), dtype=float)

    def subgradients(self, x, idx):
        return np.zeros((len(idx), self.dim))

    def pointwise_tail(self, x):
        return self.constants.tail


def geometric_constants(dim: int = 1) -> CountableConstants:
    """``f_i = 2^-i`` for ``i >= 1``: ``f = 1`` and the dual value is not attained."""
    fam = CountableConstants(builtin("geometric(0.5)"), dim, name="geometric_constants",
                             theta_exact=1.0)
    fam.descriptor = {"kind": "named", "name": "geometric_constants", "params": {"dim": dim}}
    return fam


def harmonic_mix(dim: int = 1) -> CountableConstants:
    """Constants following the sign pattern ``1/i^2`` (even), ``-1/i`` (odd)."""
    fam = CountableConstants(builtin("example1"), dim, name="harmonic_mix")
    fam.descriptor = {"kind": "named", "name": "harmonic_mix", "params": {"dim": dim}}
    return fam


class HarmonicSystem(FunctionFamily):
    """Hinge residuals of ``-x <= -1`` (index 1) and ``x <= -1/k`` (index k + 1).

    The system is inconsistent; ``dom f = (-inf, 0]`` for ``p > 1``.
    """

    is_finite = False
    all_nonnegative = True
    name = "harmonic_system"

    def __init__(self, p: float = 2.0):
        if not p >= 1:
            raise InvalidFamily("exponent p must be >= 1")
        self.p = float(p)
        self.dim = 1
        self.domain_sample = np.array([-1.0])
        self.descriptor = {"kind": "named", "name": self.name, "params": {"p": self.p}}

    def row(self, i):
        if i == 1:
            return -1.0, -1.0
        return 1.0, -1.0 / (i - 1)

    def atom(self, i):
        a, b = self.row(int(i))
        return HingeResidual([a], b, self.p)

    def _rows(self, idx):
        idx = np.asarray(idx, dtype=float)
        first = idx == 1
        a = np.where(first, -1.0, 1.0)
        b = np.where(first, -1.0, -1.0 / np.where(first, 2.0, idx - 1))
        return a, b

    def values(self, x, idx):
        x = _point(x, 1)
        a, b = self._rows(idx)
        return np.maximum(a * x[0] - b, 0.0) ** self.p

    def subgradients(self, x, idx):
        x = _point(x, 1)
        a, b = self._rows(idx)
        r = a * x[0] - b
        g = np.where(r > 0, self.p * np.maximum(r, 0.0) ** (self.p - 1) * a, 0.0)
        return g[:, None]

    def pointwise_tail(self, x):
        x0 = float(_point(x, 1)[0])
        if x0 > 0 or self.p == 1 and x0 == 0:
            return TailCertificate(pos_divergent=True, neg_tail=lambda N: 0.0)
        p = self.p

        def pos_tail(N):
            m = N - 1  # the terms beyond label N are max(x + 1/j, 0)^p, j > m
            if x0 < 0 and m >= 1.0 / -x0:
                return (0.0, 0.0)
            if m < 1:
                return (0.0, INF)
            if x0 == 0 and p == 2:
                return _zeta2_tail(m)
            # sum_{j>m} j^-p lies between the integrals from m+1 and from m
            lo = (m + 1) ** (1 - p) / (p - 1) if x0 == 0 else 0.0
            return (lo * (1 - 1e-15), m ** (1 - p) / (p - 1) * (1 + 1e-15))

        return TailCertificate(pos_tail=pos_tail, neg_tail=lambda N: 0.0,
                               pos_infinitely_often=x0 == 0)


NAMED_FAMILIES = {
    "geometric_cloud": GeometricCloud,
    "geometric_residuals": GeometricResiduals,
    "geometric_constants": geometric_constants,
    "harmonic_mix": harmonic_mix,
    "harmonic_system": HarmonicSystem,
}


def named_family(name: str, **params) -> FunctionFamily:
    if name not in NAMED_FAMILIES:
        raise KeyError(f"unknown named family {name!r}")
    return NAMED_FAMILIES[name](**params)


# -- robust sum of a family ----------------------------------------------------

class RobustSumFunction:
    """``f = sum^R f_i`` with a thread-safe evaluation memo.

    The memo is keyed by ``(x, tol)``; reads take no lock and insertion is
    serialised, so results never depend on the cache state.
    """

    def __init__(self, family: FunctionFamily, budget: int = DEFAULT_BUDGET, cache: bool = True):
        self.family = family
        self.budget = budget
        self.dim = family.dim
        self._cache = {} if cache else None
        self._lock = threading.Lock()
        self.memo = {}  # free-form per-function store used by other modules
        if family.domain_sample is not None:
            if self(family.domain_sample).lo == INF:
                raise InvalidFamily("declared domain sample is outside dom f")

    def __call__(self, x, tol: float = DEFAULT_TOL) -> Bracket:
        x = _point(x, self.dim)
        key = (x.tobytes(), tol)
        if self._cache is not None:
            hit = self._cache.get(key)
            if hit is not None:
                return hit
        val = robust_sum_scalar(self.family.scalar_family(x), tol, self.budget)
        if self._cache is not None:
            with self._lock:
                self._cache.setdefault(key, val)
        return val

    def eval_many(self, X, tol: float = DEFAULT_TOL) -> np.ndarray:
        """Point values (bracket upper ends) at the rows of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        fam = self.family
        if fam.is_finite:
            F = fam.values_matrix(X)
            top = F.max(axis=1)
            pos = np.where(F > 0, F, 0.0).sum(axis=1)
            return np.where(top >= 0, pos, top)
        return np.array([self(x, tol).hi for x in X])


def as_function(f) -> RobustSumFunction:
    if isinstance(f, RobustSumFunction):
        return f
    if isinstance(f, FunctionFamily):
        return RobustSumFunction(f)
    if isinstance(f, Atom):
        return RobustSumFunction(FiniteFamily([f]))
    raise TypeError(f"cannot build a robust sum from {type(f).__name__}")


def robust_sum_eval(f, x, tol: float = DEFAULT_TOL) -> Bracket:
    """``f(x)`` as a bracket; +inf means ``x`` lies outside ``dom f``."""
    return as_function(f)(x, tol)


def robust_lp_norm(residuals, x, p: float, tol: float = DEFAULT_TOL) -> Bracket:
    """``(sum^R |h_i(x)|^p)^(1/p)`` for power (or hinge) residual atoms."""
    fn = as_function(residuals)
    fam = fn.family
    exps = set()
    if fam.is_finite:
        for a in fam.atoms:
            if not isinstance(a, (PowerResidual, HingeResidual)):
                raise PreconditionViolated("robust L_p norm needs residual atoms")
            exps.add(a.p)
    else:
        exps.add(getattr(fam, "p", None))
    if exps != {float(p)}:
        raise PreconditionViolated(f"residual exponents {sorted(map(str, exps))} differ from p={p}")
    val = fn(x, tol)
    return val.map_increasing(lambda v: v ** (1.0 / p) if v != INF else INF)


def nonneg_infinite_sum_eval(f, x, tol: float = DEFAULT_TOL) -> Bracket:
    """Infinite sum of a nonnegative family, which coincides with the robust sum."""
    fn = as_function(f)
    if not fn.family.all_nonnegative:
        raise PreconditionViolated("every atom must be nonnegative")
    return fn(x, tol)
