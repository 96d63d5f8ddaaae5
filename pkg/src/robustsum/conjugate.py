"""Conjugates, the dual value function and duality-gap certificates.

For a family ``(f_i)`` with robust sum ``f`` and a dual point ``x*``:

* the primal value of the robust problem is ``-f*(x*)``;
* the optimistic dual value is ``-phi(x*)`` where ``phi(x*)`` is the infimum
  of ``sum_{i in J} f_i*(x_i*)`` over finite ``J`` and decompositions
  ``sum_{i in J} x_i* = x*``;
* weak duality reads ``f*(x*) <= phi(x*)``.

``f*`` is computed from the primal side by a cutting-plane scheme, never from
the dual data, so the two sides of every gap report are independent.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog, minimize

from . import kernels
from .bracket import INF, Bracket
from .errors import (BudgetExceeded, InconclusiveGrowth, PreconditionViolated, SizeLimit,
                     Unsupported, UnknownBudgetExceeded)
from .families import (Affine, Atom, Constant, CountableConstants, DiagonalQuadratic,
                       FiniteFamily, FunctionFamily, HingeResidual, PowerResidual,
                       RobustSumFunction, as_function)
from .scalar import DEFAULT_TOL, Sign, robust_sum_scalar, sup_scalar

TOL_EQ = 1e-9
SOLVER_TOL = 1e-9
_EPS = np.finfo(float).eps


class Tri(enum.Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


def _close(u, v, tol=TOL_EQ) -> bool:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return bool(np.all(np.abs(u - v) <= tol * np.maximum(1.0, np.abs(v))))


# -- closed-form conjugates of atoms ----------------------------------------------

class AtomConjugate:
    """Conjugate of an atom, written as ``y = base + D @ lam`` with ``lam`` in a box.

    On that set the conjugate equals ``const + lin @ lam + extra(lam)``; it is
    +inf elsewhere.  ``extra`` is zero for piecewise-linear conjugates.
    """

    def __init__(self, atom: Atom, base, D, bounds, const, lin, extra=None, extra_grad=None,
                 quad=None):
        self.atom = atom
        # ``extra(lam) = sum_j c_j (lam_j - s_j)^2`` when quad = (c, s), c > 0
        self.quad = None if quad is None else tuple(np.asarray(v, dtype=float) for v in quad)
        self.base = np.asarray(base, dtype=float)
        self.D = np.asarray(D, dtype=float).reshape(self.base.shape[0], -1)
        self.bounds = list(bounds)
        self.const = float(const)
        self.lin = np.asarray(lin, dtype=float).reshape(-1)
        self.extra = extra
        self.extra_grad = extra_grad

    @property
    def nparams(self) -> int:
        return self.D.shape[1]

    @property
    def piecewise_linear(self) -> bool:
        return self.extra is None

    def value_params(self, lam) -> float:
        lam = np.asarray(lam, dtype=float)
        v = self.const + float(self.lin @ lam)
        if self.extra is not None:
            v += self.extra(lam)
        return v

    def params_of(self, y) -> Optional[np.ndarray]:
        """Parameters representing ``y`` or None when ``y`` is outside the domain."""
        y = np.asarray(y, dtype=float).reshape(-1)
        scale = max(1.0, float(np.abs(y).max(initial=0.0)))
        if self.nparams == 0:
            return np.zeros(0) if np.all(np.abs(y - self.base) <= TOL_EQ * scale) else None
        lam, *_ = np.linalg.lstsq(self.D, y - self.base, rcond=None)
        if np.abs(self.base + self.D @ lam - y).max() > TOL_EQ * scale:
            return None
        for j, (lo, hi) in enumerate(self.bounds):
            if lo is not None and lam[j] < lo:
                if lam[j] < lo - TOL_EQ * scale:
                    return None
                lam[j] = lo
            if hi is not None and lam[j] > hi:
                if lam[j] > hi + TOL_EQ * scale:
                    return None
                lam[j] = hi
        return lam

    def __call__(self, y) -> float:
        lam = self.params_of(y)
        return INF if lam is None else self.value_params(lam)


def _power_coeff(p: float) -> float:
    # sup_s (l s - |s|^p) = kappa |l|^q with q = p / (p - 1)
    return (1.0 - 1.0 / p) * p ** (-1.0 / (p - 1.0))


def conjugate_atom(atom: Atom) -> AtomConjugate:
    """Closed-form Fenchel conjugate of a supported atom."""
    n = atom.dim
    if isinstance(atom, Affine):
        return AtomConjugate(atom, atom.a, np.zeros((n, 0)), [], atom.t, [])
    if isinstance(atom, Constant):
        return AtomConjugate(atom, np.zeros(n), np.zeros((n, 0)), [], -atom.c, [])
    if isinstance(atom, DiagonalQuadratic):
        free = atom.q > 0
        base = np.where(free, 0.0, atom.a)
        D = np.eye(n)[:, free]
        af, qf = atom.a[free], atom.q[free]
        extra = (lambda lam: float(np.sum((lam - af) ** 2 / (4 * qf)))) if free.any() else None
        grad = (lambda lam: (lam - af) / (2 * qf)) if free.any() else None
        return AtomConjugate(atom, base, D, [(None, None)] * int(free.sum()), atom.t,
                             np.zeros(int(free.sum())), extra, grad,
                             quad=(1 / (4 * qf), af) if free.any() else None)
    if isinstance(atom, (PowerResidual, HingeResidual)):
        a, b, p = atom.a, atom.b, atom.p
        if not a.any():
            c = atom(np.zeros(n))
            return AtomConjugate(atom, np.zeros(n), np.zeros((n, 0)), [], -c, [])
        hinge = isinstance(atom, HingeResidual)
        if p == 1:
            bounds = [(0.0, 1.0)] if hinge else [(-1.0, 1.0)]
            return AtomConjugate(atom, np.zeros(n), a[:, None], bounds, 0.0, [b])
        kappa = _power_coeff(p)
        q = p / (p - 1.0)
        bounds = [(0.0, None)] if hinge else [(None, None)]
        extra = lambda lam: kappa * float(np.abs(lam[0]) ** q)
        grad = lambda lam: np.array([kappa * q * abs(lam[0]) ** (q - 1) * math.copysign(1.0, lam[0])])
        quad = ([kappa], [0.0]) if q == 2 and not hinge else None
        return AtomConjugate(atom, np.zeros(n), a[:, None], bounds, 0.0, [b], extra, grad, quad)
    raise Unsupported(f"no closed-form conjugate for {type(atom).__name__}")


# -- decompositions and the per-subset infimal convolution ---------------------------

@dataclass(frozen=True, eq=False)
class Decomposition:
    """A finite ``J`` with dual parts ``x_i*`` summing to ``x*`` and their conjugate sum."""

    J: tuple
    parts: np.ndarray
    value: float

    def __post_init__(self):
        object.__setattr__(self, "parts", np.asarray(self.parts, dtype=float).reshape(len(self.J), -1))
        if self.value == -INF:
            raise ValueError("decomposition value is never -inf")

    def total(self) -> np.ndarray:
        return self.parts.sum(axis=0)

    def to_json(self) -> dict:
        return {"J": list(self.J), "parts": self.parts.tolist(), "value": self.value}


def inf_convolution(conjs: Sequence[AtomConjugate], xstar) -> tuple:
    """``min sum_i g_i(y_i)`` over ``sum_i y_i = x*``; returns ``(value, parts)``.

    ``parts`` is None when no decomposition lies in the domain.
    """
    xstar = np.asarray(xstar, dtype=float)
    n = xstar.shape[0]
    ks = [c.nparams for c in conjs]
    K = sum(ks)
    base = np.sum([c.base for c in conjs], axis=0)
    rhs = xstar - base
    if K == 0:
        if _close(base, xstar):
            return math.fsum(c.const for c in conjs), np.array([c.base for c in conjs])
        return INF, None
    if K > 30:
        raise SizeLimit("per-subset search limited to 30 dual parameters")
    D = np.hstack([c.D for c in conjs])
    bounds = [b for c in conjs for b in c.bounds]
    lin = np.concatenate([c.lin for c in conjs])
    linear = all(c.piecewise_linear for c in conjs)
    if not linear and all(c.quad is not None for c in conjs):
        out = _quadratic_inf_conv(conjs, ks, D, rhs, lin)
        if out is not None:
            return out
    res = linprog(lin if linear else np.zeros(K), A_eq=D, b_eq=rhs, bounds=bounds, method="highs")
    if res.status == 2:
        return INF, None
    if res.status != 0:
        raise Unsupported(f"per-subset linear program failed: {res.message}")
    lam = res.x
    if not linear:
        lam = _smooth_inf_conv(conjs, ks, D, rhs, bounds, lam)
    offsets = np.cumsum([0] + ks)
    parts = np.array([c.base + c.D @ lam[offsets[j]:offsets[j + 1]] for j, c in enumerate(conjs)])
    value = math.fsum(c.value_params(lam[offsets[j]:offsets[j + 1]]) for j, c in enumerate(conjs))
    return value, parts


def _quadratic_inf_conv(conjs, ks, D, rhs, lin):
    """Closed-form KKT solution when every conjugate is a free diagonal quadratic.

    Minimises ``lin @ lam + sum c (lam - s)^2`` subject to ``D lam = rhs``;
    returns None when the constraint is inconsistent.
    """
    c = np.concatenate([q.quad[0] for q in conjs])
    sh = np.concatenate([q.quad[1] for q in conjs])
    # lam = sh + (D^T nu - lin) / (2 c)
    W = D / (2 * c)
    M = W @ D.T
    r = rhs - D @ sh + W @ lin
    nu, *_ = np.linalg.lstsq(M, r, rcond=None)
    lam = sh + (D.T @ nu - lin) / (2 * c)
    if np.abs(D @ lam - rhs).max(initial=0.0) > TOL_EQ * max(1.0, float(np.abs(rhs).max(initial=0.0))):
        return INF, None
    offsets = np.cumsum([0] + ks)
    parts = np.array([q.base + q.D @ lam[offsets[j]:offsets[j + 1]] for j, q in enumerate(conjs)])
    value = math.fsum(q.value_params(lam[offsets[j]:offsets[j + 1]]) for j, q in enumerate(conjs))
    return value, parts


def _smooth_inf_conv(conjs, ks, D, rhs, bounds, lam0):
    offsets = np.cumsum([0] + ks)

    def obj(lam):
        return sum(c.value_params(lam[offsets[j]:offsets[j + 1]]) for j, c in enumerate(conjs))

    def grad(lam):
        g = []
        for j, c in enumerate(conjs):
            part = lam[offsets[j]:offsets[j + 1]]
            gj = c.lin.copy()
            if c.extra_grad is not None:
                gj = gj + c.extra_grad(part)
            g.append(gj)
        return np.concatenate(g)

    cons = {"type": "eq", "fun": lambda lam: D @ lam - rhs, "jac": lambda lam: D}
    res = minimize(obj, lam0, jac=grad, bounds=bounds, constraints=[cons], method="SLSQP",
                   options={"ftol": 1e-15, "maxiter": 500})
    lam = res.x if np.abs(D @ res.x - rhs).max() <= TOL_EQ else lam0
    if obj(lam) > obj(lam0):
        lam = lam0
    return lam


# -- enumeration helpers --------------------------------------------------------------

def _affine_table(family: FiniteFamily) -> dict:
    """Cached subset sums ``A(J)``, ``T(J)`` and cardinalities of a finite affine family."""
    cache = family.__dict__.setdefault("_affine_table", {})
    if cache:
        return cache
    m = len(family)
    if m > kernels.MAX_ENUM:
        raise SizeLimit(f"subset tables limited to {kernels.MAX_ENUM} atoms")
    A, T = family.A, family.T
    integral = (np.all(A == np.round(A)) and np.all(T == np.round(T))
                and np.abs(A).max(initial=0) * m < 2**52 and np.abs(T).max(initial=0) * m < 2**52)
    if integral:
        cache["A"] = kernels.subset_table(np.round(A).astype(np.int64))
        cache["T"] = kernels.subset_table(np.round(T).astype(np.int64)).astype(float)
    else:
        cache["A"] = kernels.subset_table(A)
        cache["T"] = kernels.subset_table(T)
    cache["integral"] = bool(integral)
    cache["card"] = kernels.popcounts(m)
    return cache


def _matching_masks(family: FiniteFamily, xstar, max_card: int) -> np.ndarray:
    tab = _affine_table(family)
    xstar = np.asarray(xstar, dtype=float)
    if tab["integral"]:
        if not np.all(xstar == np.round(xstar)):
            return np.zeros(0, dtype=np.int64)
        ok = np.all(tab["A"] == np.round(xstar).astype(np.int64), axis=1)
    else:
        ok = np.all(np.abs(tab["A"] - xstar) <= TOL_EQ * np.maximum(1.0, np.abs(xstar)), axis=1)
    ok &= tab["card"] <= max_card
    return np.nonzero(ok)[0] + 1


def _labels(family: FunctionFamily, mask: int) -> tuple:
    return tuple(family.start + i for i in kernels.mask_to_indices(mask))


def _subset_value(family: FiniteFamily, J: tuple) -> float:
    return math.fsum(family.T[i - family.start] for i in J)


def _subset_key(J: tuple) -> tuple:
    """Order on index sets: fewer indices first, then lexicographic."""
    return (len(J), J)


def _lex_best(cands):
    """Smallest value, ties broken by :func:`_subset_key`."""
    return min(cands, key=lambda c: (c[0], _subset_key(c[1])))


# -- phi -----------------------------------------------------------------------------

@dataclass
class PhiResult:
    """Enclosure of ``phi(x*)`` with the best decomposition found.

    ``attained`` says whether the infimum is reached by some decomposition
    (None when undecided).  ``complete`` is True when the search covered
    every candidate or the value was derived analytically.  ``card_lower``
    is a certified lower bound on the best value over ``|J| <= max_card``.
    """

    value: Bracket
    best: Optional[Decomposition]
    attained: Optional[bool]
    complete: bool
    max_card: int
    card_lower: Optional[float] = None
    note: str = ""

    @property
    def unknown(self) -> bool:
        return not self.complete


def phi_eval(family, xstar, max_card: Optional[int] = None, budget: int = 200_000) -> PhiResult:
    """``phi(x*)`` over ``|J| <= max_card`` (all ``J`` for finite families by default)."""
    fn = as_function(family)
    fam = fn.family
    xstar = np.atleast_1d(np.asarray(xstar, dtype=float))
    K = max_card if max_card is not None else (len(fam) if fam.is_finite else 30)
    key = ("phi", xstar.tobytes(), K, budget)
    hit = fn.memo.get(key)
    if hit is not None:
        return hit
    if isinstance(fam, CountableConstants):
        res = _phi_constants(fam, xstar, K)
    elif fam.is_finite and fam.all_affine and len(fam) <= kernels.MAX_ENUM:
        res = _phi_finite_affine(fam, xstar, K)
    else:
        res = _phi_search(fam, xstar, K, budget)
    fn.memo[key] = res
    return res


def _phi_finite_affine(fam: FiniteFamily, xstar, K: int) -> PhiResult:
    masks = _matching_masks(fam, xstar, K)
    complete = K >= len(fam)
    if len(masks) == 0:
        return PhiResult(Bracket.exact(INF), None, None, True, K, card_lower=INF)
    T = _affine_table(fam)["T"][masks - 1]
    tmin = T.min()
    cands = [(_subset_value(fam, _labels(fam, int(mk))), _labels(fam, int(mk)))
             for mk in masks[T <= tmin + 4 * _EPS * max(1.0, abs(tmin)) * len(fam)]]
    value, J = _lex_best(cands)
    parts = np.array([fam.A[i - fam.start] for i in J])
    best = Decomposition(J, parts, value)
    lo = value if complete else -INF
    return PhiResult(Bracket(lo, value), best, True if complete else None, complete, K,
                     card_lower=value)


COUNTABLE_WINDOW = 8  # leading indices searched for countable non-constant families


def _candidate_subsets(fam: FunctionFamily, K: int, window: int):
    labels = list(range(fam.start, fam.start + window))
    for k in range(1, min(K, window) + 1):
        for J in itertools.combinations(labels, k):
            yield J


def per_subset(fam: FunctionFamily, J: tuple, xstar) -> tuple:
    """Best decomposition of ``x*`` over the fixed index set ``J``."""
    conjs = [conjugate_atom(fam.atom(i)) for i in J]
    return inf_convolution(conjs, xstar)


def _phi_search(fam: FunctionFamily, xstar, K: int, budget: int) -> PhiResult:
    window = len(fam) if fam.is_finite else min(COUNTABLE_WINDOW, K + 4)
    best_val, best_J, best_parts = INF, None, None
    count = 0
    exhausted = True
    linear_only = True
    for J in _candidate_subsets(fam, K, window):
        count += 1
        if count > budget:
            exhausted = False
            break
        conjs = [conjugate_atom(fam.atom(i)) for i in J]
        linear_only &= all(c.piecewise_linear for c in conjs)
        if sum(c.nparams for c in conjs) > 30:
            exhausted = False
            continue
        val, parts = inf_convolution(conjs, xstar)
        if val < best_val or (val == best_val and best_J is not None
                                and _subset_key(J) < _subset_key(best_J)):
            best_val, best_J, best_parts = val, J, parts
    complete = exhausted and fam.is_finite and K >= len(fam)
    best = Decomposition(best_J, best_parts, best_val) if best_J is not None else None
    if best_val == INF:
        lo = INF if complete else -INF
        return PhiResult(Bracket(lo, INF), None, None, complete, K,
                         card_lower=INF if complete else None)
    slack = 0.0 if linear_only else SOLVER_TOL * (1 + abs(best_val))
    lo = best_val - slack - SOLVER_TOL * (1 + abs(best_val)) if complete else -INF
    return PhiResult(Bracket(lo, best_val), best, None, complete, K,
                     note="" if complete else f"searched subsets of the first {window} indices")


def _theta(fam: CountableConstants) -> tuple:
    """``theta = sum^R c_i`` and whether some finite ``J`` attains it."""
    c = fam.constants
    exact = getattr(fam, "theta_exact", None)
    theta = Bracket.exact(exact) if exact is not None else robust_sum_scalar(c)
    tail = c.tail
    attained = None
    if tail is not None:
        sign = sup_scalar(c).sign
        if sign is Sign.NONPOSITIVE:
            attained = tail.sup_attained
        elif tail.pos_infinitely_often is not None:
            attained = not tail.pos_infinitely_often
    return theta, attained


def _top_window(fam: CountableConstants, K: int) -> tuple:
    """Labels and values of the ``K`` largest constants within a certified window."""
    c = fam.constants
    W = 64
    while True:
        head = c.head(W)
        order = np.argsort(-head, kind="stable")[:K]
        tail = c.tail
        s_hi = INF
        if tail is not None and tail.sup_tail is not None:
            s_hi = tail.sup_tail(c.start + W - 1)[1]
        elif tail is not None and tail.pos_bounds(c.start + W - 1) is not None:
            s_hi = tail.pos_bounds(c.start + W - 1)[1]
        if s_hi <= head[order[-1]] or W >= 4096:
            return order, head, s_hi, W
        W *= 2


def _phi_constants(fam: CountableConstants, xstar, K: int) -> PhiResult:
    n = fam.dim
    if not _close(xstar, np.zeros(n)):
        return PhiResult(Bracket.exact(INF), None, None, True, K, card_lower=INF,
                         note="all conjugates live at 0")
    theta, attained = _theta(fam)
    order, head, s_hi, W = _top_window(fam, K)
    vals = head[order]
    pos = vals > 0
    chosen = order[pos] if pos.any() else order[:1]
    J = tuple(sorted(int(fam.start + i) for i in chosen))
    value = -math.fsum(head[i - fam.start] for i in J)
    best = Decomposition(J, np.zeros((len(J), n)), value)
    # any J with |J| <= K: each term beyond the window is <= s_hi
    pool = np.concatenate([vals, np.full(K, s_hi)]) if s_hi < INF else None
    card_lower = None
    if pool is not None:
        top = np.sort(pool)[::-1][:K]
        card_lower = -math.fsum(np.maximum(top, 0.0)) if top[0] >= 0 else -float(top[0])
    return PhiResult(Bracket(-theta.hi, -theta.lo), best, attained, True, K,
                     card_lower=card_lower, note="analytic: phi(0) = -theta")


# -- numeric conjugate of f ----------------------------------------------------------

_TRUNC_TERMS = 4096


def _support_cut(fn: RobustSumFunction, x: np.ndarray) -> tuple:
    """``(v, s, fx)`` with ``f(z) >= v + <s, z - x>`` for all ``z`` and ``fx = f(x)``."""
    fam = fn.family
    if fam.is_finite:
        if fam.all_affine:
            vals = fam.A @ x - fam.T
        else:
            vals = fam.values(x, fam.labels(len(fam)))
        active = np.nonzero(vals > 0)[0] if (vals > 0).any() else [int(np.argmax(vals))]
        labels = np.asarray(active) + fam.start
        s = (fam.A[active].sum(axis=0) if fam.all_affine
             else fam.subgradients(x, labels).sum(axis=0))
        fx = fn(x)
        return fx.lo, s, fx
    if isinstance(fam, CountableConstants):
        fx = fn(x)
        return fx.lo, np.zeros(fam.dim), fx
    if fam.all_nonnegative:
        labels = fam.labels(_TRUNC_TERMS)
        vals = fam.values(x, labels)
        pos = vals > 0
        s = fam.subgradients(x, labels[pos]).sum(axis=0) if pos.any() else np.zeros(fam.dim)
        v = math.fsum(vals) * (1 - 8 * _EPS)
        return v, s, fn(x)
    raise Unsupported("numeric conjugation needs a finite, constant or nonnegative family")


@dataclass
class ConjugateResult:
    value: Bracket
    argmax: Optional[np.ndarray]
    iterations: int
    escaped: bool = False
    note: str = ""


def _model_lp(cuts_x, cuts_u, cuts_d, box):
    """Maximise ``min_k u_k + <d_k, z - x_k>`` over ``z`` (optionally in a box)."""
    n = cuts_d.shape[1]
    A = np.hstack([-cuts_d, np.ones((len(cuts_u), 1))])
    b = cuts_u - np.einsum("kj,kj->k", cuts_d, cuts_x)
    c = np.zeros(n + 1)
    c[-1] = -1.0
    if box is None:
        bounds = [(None, None)] * (n + 1)
    else:
        center, R = box
        bounds = [(center[j] - R, center[j] + R) for j in range(n)] + [(None, None)]
    res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    if res.status == 3:
        return None, INF
    if res.status != 0:
        raise InconclusiveGrowth(f"cutting-plane model failed: {res.message}")
    return res.x[:n], -res.fun


def _model_max_1d(cuts_x, cuts_u, cuts_d):
    """Exact maximiser of ``min_k u_k + d_k (z - x_k)`` on the line.

    The model is ``min(P, N)`` with ``P`` the nondecreasing lines and ``N``
    the decreasing ones; bisection on the sign of ``P - N`` locates the
    crossing and the returned value bounds the model maximum from above.
    """
    x, u, d = cuts_x[:, 0], cuts_u, cuts_d[:, 0]
    up, down = d >= 0, d < 0
    if not up.any():
        return None, INF
    if not down.any():
        flat = d == 0
        if not flat.any():
            return None, INF
        ub = float(np.min(u[flat]))
        rising = d > 0
        z = float(x.max())
        if rising.any():
            z = max(z, float(np.max(x[rising] + (ub - u[rising]) / d[rising])))
        return np.array([z]), ub + 4 * _EPS * (abs(ub) + 1.0)

    def P(z):
        return float(np.min(u[up] + d[up] * (z - x[up])))

    def N(z):
        return float(np.min(u[down] + d[down] * (z - x[down])))

    lo, hi = float(x.min()), float(x.max())
    step = max(1.0, hi - lo)
    while P(lo) > N(lo):
        lo -= step
        step *= 2
        if step > 1e300:
            return None, INF
    step = max(1.0, hi - lo)
    while P(hi) < N(hi):
        hi += step
        step *= 2
        if step > 1e300:
            return None, INF
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if P(mid) <= N(mid):
            lo = mid
        else:
            hi = mid
    ub = max(P(lo), N(hi), min(P(hi), N(lo)))
    ub += 4 * _EPS * (abs(ub) + float(np.max(np.abs(u))) + 1.0)
    z = lo if P(lo) >= N(hi) else hi
    return np.array([z]), ub


def conjugate_numeric(f, xstar, radius: float = 4.0, resolution: int = 5, tol: float = 1e-10,
                      max_iter: int = 300, max_radius: float = 1e9,
                      escape_radius: float = 1e4) -> ConjugateResult:
    """Enclosure of ``f*(x*) = sup_x <x*, x> - f(x)`` from primal evaluations.

    Grid seeds are followed by cutting-plane (Kelley) steps on the concave
    function ``g = <x*, .> - f``.  The lower end is the best value of ``g``
    seen at a point of ``dom f``; the upper end is the maximum of the
    cutting-plane model, which over-estimates ``g`` everywhere.  When the
    model stays unbounded, boxes of growing radius are tried and +inf is
    declared once ``g`` keeps growing at the box boundary up to
    ``escape_radius`` with non-decaying increments.
    """
    fn = as_function(f)
    y = np.atleast_1d(np.asarray(xstar, dtype=float))
    n = fn.dim
    if y.shape[0] != n:
        raise PreconditionViolated("dual point has the wrong dimension")
    key = ("conj", y.tobytes(), radius, resolution, tol)
    hit = fn.memo.get(key)
    if hit is not None:
        return hit
    full_center = (np.zeros(n) if fn.family.domain_sample is None
                   else np.asarray(fn.family.domain_sample, dtype=float))
    # coordinates that are constant on dom f drop out of the search
    pinned = getattr(fn.family, "pinned", None) or {}
    free = np.array([j for j in range(n) if j not in pinned], dtype=int)
    for j, v in pinned.items():
        full_center[j] = v
    center = full_center[free]
    xs, us, ds = [], [], []
    best_lo, best_x = -INF, None

    def add(z):
        nonlocal best_lo, best_x
        x = full_center.copy()
        x[free] = z
        v, s, fx = _support_cut(fn, x)
        gx = float(y @ x)
        xs.append(np.asarray(z, dtype=float))
        us.append(gx - v)
        ds.append((y - s)[free])
        if fx.hi < INF and gx - fx.hi > best_lo:
            best_lo, best_x = gx - fx.hi, x
        return gx - fx.hi if fx.hi < INF else -INF

    if free.size == 0:
        add(center)
        res = ConjugateResult(Bracket(best_lo, max(best_lo, us[0])), best_x, 0,
                              note="dom f is a single point")
        fn.memo[key] = res
        return res
    nf = free.size
    axis = np.linspace(-radius, radius, resolution)
    for offs in itertools.product(axis, repeat=nf) if nf <= 3 else [np.zeros(nf)]:
        add(center + np.asarray(offs))
    add(center.copy())

    R = radius
    boundary = []
    it = 0
    while it < max_iter:
        it += 1
        X, U, Dd = np.array(xs), np.array(us), np.array(ds)
        z, ub = _model_max_1d(X, U, Dd) if nf == 1 else _model_lp(X, U, Dd, None)
        if z is not None:
            if ub - best_lo <= tol * max(1.0, abs(best_lo)):
                res = ConjugateResult(Bracket(best_lo, max(ub, best_lo)), best_x, it)
                fn.memo[key] = res
                return res
            add(z)
            continue
        # unbounded model: look inside a box and watch the boundary values
        z, _ = _model_lp(X, U, Dd, (center, R))
        gz = add(z)
        if np.abs(z - center).max() >= R * (1 - 1e-9):
            boundary.append(gz)
            if len(boundary) >= 4 and R >= escape_radius:
                inc = np.diff(boundary[-4:])
                if np.all(inc > 0) and inc[2] >= inc[1] >= inc[0] * 0.999:
                    res = ConjugateResult(Bracket.exact(INF), None, it, escaped=True,
                                          note=f"g grows along the boundary up to radius {R:g}")
                    fn.memo[key] = res
                    return res
            R *= 4
            if R > max_radius:
                raise InconclusiveGrowth(f"no bound for f* at {y.tolist()} up to radius {max_radius:g}")
    X, U, Dd = np.array(xs), np.array(us), np.array(ds)
    z, ub = _model_lp(X, U, Dd, None)
    if z is None:
        raise InconclusiveGrowth(f"cutting planes did not settle f* at {y.tolist()}")
    res = ConjugateResult(Bracket(best_lo, max(ub, best_lo)), best_x, it,
                          note="iteration cap reached")
    fn.memo[key] = res
    return res


# -- gap reports ---------------------------------------------------------------------

@dataclass
class GapReport:
    xstar: np.ndarray
    fstar: Bracket
    phi: PhiResult
    zero_gap: Tri
    strong_gap: Tri
    witness: Optional[Decomposition] = None
    certificates: dict = field(default_factory=dict)

    @property
    def primal(self) -> Bracket:
        """``inf(RP) = -f*(x*)``."""
        return -self.fstar

    @property
    def dual(self) -> Bracket:
        """``sup(RD) = -phi(x*)``."""
        return -self.phi.value

    def to_json(self) -> dict:
        return {
            "xstar": self.xstar.tolist(),
            "primal_lo": self.primal.lo, "primal_hi": self.primal.hi,
            "dual_lo": self.dual.lo, "dual_hi": self.dual.hi,
            "zero_gap": self.zero_gap.value,
            "strong_gap": self.strong_gap.value,
            "witness": None if self.witness is None else self.witness.to_json(),
            "certificates": self.certificates,
        }


def gap_report(family, xstar, max_card: Optional[int] = None, tol: float = 1e-9,
               budget: int = 200_000) -> GapReport:
    """Primal and dual values at ``x*`` with zero-gap and strong-gap verdicts."""
    fn = as_function(family)
    y = np.atleast_1d(np.asarray(xstar, dtype=float))
    certs = {}
    try:
        conj = conjugate_numeric(fn, y)
        fstar = conj.value
        certs["fstar"] = "escape to +inf" if conj.escaped else "cutting-plane enclosure"
    except InconclusiveGrowth as exc:
        fstar = Bracket(-INF, INF)
        certs["fstar"] = f"inconclusive: {exc}"
    phi = phi_eval(fn, y, max_card, budget)
    certs["phi"] = "exhaustive" if phi.complete else f"partial search ({phi.note})"
    # weak duality: phi >= f*, so f*.lo is also a lower bound on phi
    phi_lo = max(phi.value.lo, fstar.lo)
    if fstar.lo == INF:
        zero = Tri.YES
        certs["zero_gap"] = "f* = +inf forces phi = +inf"
    elif phi_lo == INF and fstar.hi < INF:
        zero = Tri.NO
        certs["zero_gap"] = "phi = +inf while f* is finite"
    elif phi.value.hi - fstar.lo <= tol * max(1.0, abs(fstar.lo)):
        zero = Tri.YES
        certs["zero_gap"] = "phi.hi - f*.lo within tol"
    elif phi_lo - fstar.hi > tol * max(1.0, abs(fstar.hi)):
        zero = Tri.NO
        certs["zero_gap"] = "phi.lo - f*.hi exceeds tol"
    else:
        zero = Tri.UNKNOWN
    strong, witness = Tri.UNKNOWN, None
    fam = fn.family
    K = phi.max_card
    if zero is Tri.NO:
        strong = Tri.NO
        certs["strong_gap"] = "no zero duality gap"
    elif fstar.lo == INF:
        strong = Tri.YES
        j = fam.start
        witness = Decomposition((j,), y[None, :], INF)
        certs["strong_gap"] = "f* = +inf: every decomposition attains"
    else:
        excluded = (not fam.is_finite and phi.attained is False and phi.card_lower is not None
                    and phi.card_lower - fstar.hi > 0)
        if excluded:
            strong = Tri.NO
            certs["strong_gap"] = {"attainment": "excluded up to max_card", "max_card": K,
                                   "resolution": phi.card_lower - fstar.hi}
        elif (phi.best is not None and phi.attained is not False
              and phi.best.value - fstar.lo <= tol * max(1.0, abs(fstar.lo))):
            strong = Tri.YES
            witness = phi.best
            certs["strong_gap"] = "witness decomposition attains f*"
        elif fam.is_finite and fam.all_affine and phi.complete and zero is not Tri.UNKNOWN:
            strong = Tri.NO
            certs["strong_gap"] = "exhaustive enumeration"
    return GapReport(y, fstar, phi, zero, strong, witness, certs)


def weak_duality_check(report: GapReport, tol: float = 1e-9) -> bool:
    """False only when ``sup(RD) <= inf(RP)`` is violated beyond ``tol``."""
    fstar, phi = report.fstar, report.phi.value
    if fstar.hi == -INF:
        return False
    # dual <= primal  <=>  f* <= phi
    return fstar.lo <= phi.hi + tol * max(1.0, abs(phi.hi) if phi.hi < INF else 1.0)


# -- the epigraph union set -----------------------------------------------------------

class EpiUnionSet:
    """The union over finite ``J`` of the Minkowski sums of ``epi f_i*``."""

    def __init__(self, family):
        self.fn = as_function(family)
        fam = self.fn.family
        self.family = fam
        if fam.is_finite and fam.all_affine:
            self.mode = "finite_affine"
        elif isinstance(fam, CountableConstants):
            self.mode = "countable_constants"
        elif fam.is_finite:
            self.mode = "finite"
        else:
            self.mode = "other"

    def generators(self) -> tuple:
        """Distinct ``A(J)`` with the smallest ``T(J)`` over subsets sharing it."""
        if self.mode != "finite_affine":
            raise Unsupported("generators are listed for finite affine families only")
        cache = self.fn.memo.get("generators")
        if cache is None:
            tab = _affine_table(self.family)
            A, T = tab["A"].astype(float), tab["T"]
            keys, inv = np.unique(np.round(A / TOL_EQ).astype(np.int64) if not tab["integral"]
                                  else tab["A"], axis=0, return_inverse=True)
            inv = np.asarray(inv).reshape(-1)
            tmin = np.full(len(keys), INF)
            np.minimum.at(tmin, inv, T)
            rep = np.zeros((len(keys), A.shape[1]))
            rep[inv] = A
            cache = (rep, tmin)
            self.fn.memo["generators"] = cache
        return cache


@dataclass
class Certificate:
    verdict: str  # "member", "member_up_to", "not_member", "unknown"
    witness: Optional[dict] = None
    reason: str = ""
    eta_floor: Optional[float] = None

    @property
    def is_member(self) -> bool:
        return self.verdict in ("member", "member_up_to")

    @property
    def is_not_member(self) -> bool:
        return self.verdict == "not_member"

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "witness": self.witness, "reason": self.reason,
                "eta_floor": self.eta_floor}


def epi_union_membership(A: EpiUnionSet, point, max_card: Optional[int] = None,
                         budget: int = 200_000) -> Certificate:
    """Is ``(y*, r)`` in the union of the sums of ``epi f_i*``?"""
    y = np.atleast_1d(np.asarray(point[0], dtype=float))
    r = float(point[1])
    fam = A.family
    if A.mode == "countable_constants":
        return _epi_constants(fam, y, r, max_card or 30)
    phi = phi_eval(A.fn, y, max_card, budget)
    best = phi.best
    if best is not None and best.value <= r:
        k = len(best.J)
        conjs = [conjugate_atom(fam.atom(i)) for i in best.J]
        vals = [c(p) for c, p in zip(conjs, best.parts)]
        extra = (r - math.fsum(vals)) / k
        rs = [v + extra for v in vals]
        return Certificate("member", {"J": list(best.J), "parts": best.parts.tolist(), "r": rs})
    if phi.complete and phi.attained is not False and (phi.value.lo > r or phi.value.lo == INF):
        return Certificate("not_member", reason="every decomposition has conjugate sum above r")
    return Certificate("unknown", reason="search budget exhausted")


def _epi_constants(fam: CountableConstants, y, r: float, K: int) -> Certificate:
    if not _close(y, np.zeros(fam.dim)):
        return Certificate("not_member", reason="every part of a constant family is 0")
    theta, attained = _theta(fam)
    order, head, _, _ = _top_window(fam, K)
    acc, J = 0.0, []
    for i in order:
        if head[i] <= 0 and J:
            break
        J.append(int(i + fam.start))
        acc = math.fsum(head[j - fam.start] for j in J)
        if -acc <= r:
            Js = tuple(sorted(J))
            vals = [-head[j - fam.start] for j in Js]
            extra = (r - math.fsum(vals)) / len(Js)
            return Certificate("member", {"J": list(Js), "parts": np.zeros((len(Js), fam.dim)).tolist(),
                                          "r": [v + extra for v in vals]})
    # membership needs sum_J c >= -r; the supremum of those sums is theta
    if -r > theta.hi or (-r >= theta.hi and theta.is_exact and attained is False):
        return Certificate("not_member", reason="-r is not below the unattained supremum theta")
    return Certificate("unknown", reason=f"no subset of size <= {K} found")


class Verdict3(enum.Enum):
    HOLDS = "holds"
    FAILS = "fails"
    UNKNOWN = "unknown"


def hull_fiber_min(A: EpiUnionSet, xstar) -> float:
    """``min {r : (x*, r) in cl co A}`` for a finite affine family (+inf if the fiber is empty)."""
    gens, tmin = A.generators()
    y = np.atleast_1d(np.asarray(xstar, dtype=float))
    m = len(tmin)
    A_eq = np.vstack([gens.T, np.ones((1, m))])
    b_eq = np.concatenate([y, [1.0]])
    res = linprog(tmin, A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * m, method="highs")
    if res.status == 2:
        return INF
    if res.status != 0:
        raise Unsupported(f"hull program failed: {res.message}")
    return float(res.fun)


def closed_convex_regarding(A: EpiUnionSet, xstar, tol: float = 1e-9) -> Verdict3:
    """Does ``({x*} x R) n cl co A`` equal ``({x*} x R) n A``?"""
    y = np.atleast_1d(np.asarray(xstar, dtype=float))
    if A.mode == "finite_affine":
        r_min = hull_fiber_min(A, y)
        if r_min == INF:
            return Verdict3.HOLDS
        masks = _matching_masks(A.family, y, len(A.family))
        if len(masks) == 0:
            return Verdict3.FAILS
        tbest = _affine_table(A.family)["T"][masks - 1].min()
        return Verdict3.HOLDS if tbest <= r_min + tol * max(1.0, abs(r_min)) else Verdict3.FAILS
    if A.mode == "countable_constants":
        if not _close(y, np.zeros(A.family.dim)):
            return Verdict3.HOLDS
        _, attained = _theta(A.family)
        if attained is None:
            return Verdict3.UNKNOWN
        return Verdict3.HOLDS if attained else Verdict3.FAILS
    return Verdict3.UNKNOWN


def is_closed_convex(A: EpiUnionSet) -> bool:
    """Whether ``A`` is closed and convex (finite affine families).

    Here ``A`` is a finite union of vertical closed half-lines, so it is
    always closed, and it is convex exactly when all of them share one
    abscissa.
    """
    if A.mode != "finite_affine":
        raise Unsupported("exact closedness test needs a finite affine family")
    gens, _ = A.generators()
    return len(gens) == 1


def lemma7_check(family, dual_samples, tol: float = 1e-6, primal_grid=None) -> "CheckResult":
    """Compare ``epi f*`` with ``cl co A`` and ``phi*`` with ``f`` on samples.

    ``f*`` comes from :func:`conjugate_numeric`; the hull side from the
    generators of ``A``.  Also checks the sandwich
    ``strict-epi phi  subset  A  subset  epi phi`` at each dual sample.
    """
    fn = as_function(family)
    A = EpiUnionSet(fn)
    if A.mode != "finite_affine":
        raise PreconditionViolated("the exact check needs a finite affine family")
    if fn.dim > 2:
        raise PreconditionViolated("the exact check is limited to n <= 2")
    failures = []
    for y in dual_samples:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        fs = conjugate_numeric(fn, y).value
        r_min = hull_fiber_min(A, y)
        if (fs.lo == INF) != (r_min == INF):
            failures.append(("epi", y.tolist(), fs.to_json(), r_min))
        elif r_min < INF and not (fs.lo - tol <= r_min <= fs.hi + tol):
            failures.append(("epi", y.tolist(), fs.to_json(), r_min))
        phi = phi_eval(fn, y).value.lo
        if phi < INF:
            for r, expect_in in ((phi + 0.5, True), (phi + 1e-7, True), (phi - 1e-7, False)):
                got = epi_union_membership(A, (y, r)).is_member
                if got != expect_in:
                    failures.append(("sandwich", y.tolist(), r))
            if not epi_union_membership(A, (y, phi)).is_member:
                failures.append(("sandwich", y.tolist(), phi))
        elif epi_union_membership(A, (y, 0.0)).is_member:
            failures.append(("sandwich", y.tolist(), 0.0))
    gens, tmin = A.generators()
    if primal_grid is None:
        axis = np.linspace(-2, 2, 9)
        primal_grid = [np.array(p) for p in itertools.product(axis, repeat=fn.dim)]
    for x in primal_grid:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        phistar = float(np.max(gens @ x - tmin))
        fx = fn(x)
        if not fx.contains(phistar, tol):
            failures.append(("phi*", x.tolist(), phistar, fx.to_json()))
    return CheckResult(not failures, failures)


@dataclass
class CheckResult:
    ok: bool
    failures: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    def __bool__(self):
        return self.ok


def convexity_witness_nonneg(family, samples: int = 50, seed: int = 0,
                             tol: float = 1e-9) -> CheckResult:
    """Midpoints of members of ``A`` are members, for nonnegative families.

    Two members built on ``J`` and ``K`` are written over ``L = J u K`` by
    padding with ``(0, 0)``, which lies in every ``epi f_i*`` when
    ``f_i >= 0``; the midpoint is then a sum over ``L`` of points of the
    convex sets ``epi f_i*``.
    """
    fn = as_function(family)
    fam = fn.family
    if not fam.all_nonnegative:
        raise PreconditionViolated("every atom must be nonnegative")
    rng = np.random.default_rng(seed)
    failures = []
    if isinstance(fam, CountableConstants):
        A = EpiUnionSet(fn)
        theta, _ = _theta(fam)
        for _ in range(samples):
            r1, r2 = -theta.lo + rng.exponential(size=2)
            cert = epi_union_membership(A, (np.zeros(fam.dim), 0.5 * (r1 + r2)))
            if not cert.is_member:
                failures.append(("midpoint", r1, r2))
        return CheckResult(not failures, failures, {"mode": "analytic"})
    if not fam.is_finite:
        raise Unsupported("convexity sampling needs a finite family or constants")
    m = len(fam)
    conjs = {i: conjugate_atom(fam.atom(i)) for i in fam.labels(m)}

    def random_member():
        k = int(rng.integers(1, m + 1))
        J = tuple(sorted(rng.choice(fam.labels(m), size=k, replace=False).tolist()))
        pts = {}
        for i in J:
            c = conjs[i]
            lam = np.array([rng.uniform(lo if lo is not None else -2, hi if hi is not None else 2)
                            for lo, hi in c.bounds])
            yi = c.base + c.D @ lam
            pts[i] = (yi, c.value_params(lam) + rng.exponential())
        return pts

    for _ in range(samples):
        P, Q = random_member(), random_member()
        L = sorted(set(P) | set(Q))
        zero = (np.zeros(fam.dim), 0.0)
        for i in L:
            yp, rp = P.get(i, zero)
            yq, rq = Q.get(i, zero)
            ym, rm = 0.5 * (yp + yq), 0.5 * (rp + rq)
            if conjs[i](ym) > rm + tol * max(1.0, abs(rm)):
                failures.append(("midpoint", i, ym.tolist(), rm))
    # midpoint convexity of phi on sampled dual points
    if fam.dim == 1 and m <= 12:
        pts = np.linspace(-1.5, 1.5, 7)
        vals = {float(p): phi_eval(fn, [p]).value.hi for p in pts}
        for a, b in itertools.combinations(pts, 2):
            mid = phi_eval(fn, [0.5 * (a + b)]).value.lo
            bound = 0.5 * (vals[float(a)] + vals[float(b)])
            if bound < INF and mid > bound + 1e-7 * max(1.0, abs(bound)):
                failures.append(("phi", float(a), float(b), mid, bound))
    return CheckResult(not failures, failures, {"mode": "sampled", "samples": samples})
