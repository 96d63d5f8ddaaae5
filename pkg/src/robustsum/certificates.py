"""Membership oracles for the multifunctions around a robust sum, and graders.

Every oracle answers a single membership query with a :class:`Certificate`;
sets are never materialised.  The quantities involved all reduce to

    f(x) - <x*, x> + sum_{i in J} f_i*(x_i*)

which splits as ``alpha_J + sum_i eps_i`` with ``alpha_J = f(x) - sum_J
f_i(x) >= 0`` and ``eps_i = f_i(x) + f_i*(x_i*) - <x_i*, x> >= 0``.  Member
witnesses carry such a split and are re-checked from scratch before being
returned.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import kernels
from .bracket import INF, Bracket
from .conjugate import (TOL_EQ, Certificate, CountableConstants, EpiUnionSet, Tri, _affine_table,
                        _close, _labels, _subset_key, conjugate_atom, conjugate_numeric,
                        epi_union_membership, gap_report, per_subset, phi_eval)
from .errors import InconclusiveGrowth, PreconditionViolated, Unsupported
from .families import Atom, FiniteFamily, RobustSumFunction, as_function

TOL = 1e-9


def _tol(scale: float, tol: float = TOL) -> float:
    return tol * max(1.0, abs(scale)) if math.isfinite(scale) else tol


@dataclass(frozen=True)
class EpsSplit:
    """``alpha + sum(eps_i) = eps + eta`` with every entry nonnegative."""

    alpha: float
    eps_i: tuple
    eta: float = 0.0

    def to_json(self) -> dict:
        return {"alpha": self.alpha, "eps_i": list(self.eps_i), "eta": self.eta}


def default_schedule(eps: float, steps: int = 20) -> list:
    """``eta_k = 2^-k max(eps, 1)`` for ``k = 1..steps``."""
    return [2.0 ** -k * max(eps, 1.0) for k in range(1, steps + 1)]


def _epi(fn: RobustSumFunction) -> EpiUnionSet:
    A = fn.memo.get("epi")
    if A is None:
        A = EpiUnionSet(fn)
        fn.memo["epi"] = A
    return A


def _atom_values(fn: RobustSumFunction, J: Sequence[int], x) -> np.ndarray:
    fam = fn.family
    return fam.values(x, np.asarray(J, dtype=np.int64))


def _make_witness(fn, x, xstar, J, parts, eps, eta) -> Optional[dict]:
    """Build an explicit split for ``(J, parts)`` or None if it does not fit."""
    fam = fn.family
    x = np.atleast_1d(np.asarray(x, dtype=float))
    parts = np.asarray(parts, dtype=float).reshape(len(J), -1)
    fx = fn(x).hi
    vals = _atom_values(fn, J, x)
    e = []
    for i, part, v in zip(J, parts, vals):
        ci = conjugate_atom(fam.atom(i))(part)
        if ci == INF:
            return None
        e.append(max(v + ci - float(part @ x), 0.0))
    alpha = eps + eta - math.fsum(e)
    need = fx - math.fsum(vals)
    if alpha < max(need, 0.0) - _tol(fx):
        return None
    alpha = max(alpha, max(need, 0.0))
    split = EpsSplit(alpha, tuple(e), eta)
    return {"J": list(J), "parts": parts.tolist(), "split": split.to_json()}


def verify_witness(f, x, xstar, eps: float, witness: dict, tol: float = TOL) -> bool:
    """Re-check a membership witness by direct evaluation."""
    fn = as_function(f)
    fam = fn.family
    x = np.atleast_1d(np.asarray(x, dtype=float))
    J = list(witness["J"])
    parts = np.asarray(witness["parts"], dtype=float).reshape(len(J), -1)
    sp = witness["split"]
    alpha, eps_i, eta = float(sp["alpha"]), list(sp["eps_i"]), float(sp["eta"])
    if xstar is not None and not _close(parts.sum(axis=0), np.atleast_1d(xstar)):
        return False
    if alpha < -tol or any(v < -tol for v in eps_i) or eta < 0:
        return False
    if abs(alpha + math.fsum(eps_i) - (eps + eta)) > _tol(eps + eta, tol):
        return False
    fx = robust_value(fn, x)
    vals = [fam.atom(i)(x) for i in J]
    if fx.hi == INF or fx.lo > math.fsum(vals) + alpha + _tol(fx.lo, tol):
        return False
    for i, part, v, e in zip(J, parts, vals, eps_i):
        ci = conjugate_atom(fam.atom(i))(part)
        if v + ci - float(part @ x) > e + _tol(v, tol):
            return False
    return True


def robust_value(fn: RobustSumFunction, x) -> Bracket:
    return fn(np.atleast_1d(np.asarray(x, dtype=float)))


# -- epsilon-subdifferential -----------------------------------------------------------

def eps_subdiff_membership(h, x, xstar, eps: float, tol: float = TOL) -> Certificate:
    """Is ``x* in d_eps h(x)``, i.e. ``h(x) + h*(x*) <= <x*, x> + eps``?

    Equivalently ``x`` lies in ``M^eps h(x*)``, the ``eps``-argmin of
    ``h - <x*, .>``.
    """
    if eps < 0:
        raise PreconditionViolated("eps must be nonnegative")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(xstar, dtype=float))
    if isinstance(h, Atom):
        hx = Bracket.exact(h(x))
        hs = Bracket.exact(conjugate_atom(h)(y))
    else:
        fn = as_function(h)
        hx = fn(x)
        if hx.lo == INF:
            return Certificate("not_member", reason="x is outside dom h")
        try:
            hs = conjugate_numeric(fn, y).value
        except InconclusiveGrowth as exc:
            return Certificate("unknown", reason=str(exc))
    if hx.lo == INF:
        return Certificate("not_member", reason="x is outside dom h")
    if hs.lo == INF:
        return Certificate("not_member", reason="h*(x*) = +inf, so M^eps h(x*) is empty")
    ip = float(y @ x)
    slack = _tol(hx.hi)
    if hx.hi + hs.hi - ip <= eps + slack:
        return Certificate("member", {"h_x": hx.hi, "h_star": hs.hi, "pairing": ip})
    if hx.lo + hs.lo - ip > eps + slack:
        return Certificate("not_member", reason="h(x) + h*(x*) - <x*, x> exceeds eps")
    return Certificate("unknown", reason="conjugate bracket straddles the threshold")


def M_eps_membership(f, xstar, x, eps: float, tol: float = TOL) -> Certificate:
    """``x in M^eps f(x*)``; the inverse of :func:`eps_subdiff_membership`."""
    return eps_subdiff_membership(f, x, xstar, eps, tol)


# -- S^alpha and T^alpha -----------------------------------------------------------------

def S_alpha(f, x, alpha: float, max_card: Optional[int] = None, window: int = 16,
            tol: float = 1e-12) -> list:
    """Index sets ``J`` (``|J| <= max_card``) with ``f(x) <= sum_J f_i(x) + alpha``.

    Exact for finite families; countable families are scanned over the first
    ``window`` indices.  Sets are returned ordered by size, then
    lexicographically.
    """
    if alpha < 0:
        raise PreconditionViolated("alpha must be nonnegative")
    fn = as_function(f)
    fam = fn.family
    x = np.atleast_1d(np.asarray(x, dtype=float))
    fx = fn(x)
    if fx.lo == INF:
        return []
    m = len(fam) if fam.is_finite else window
    K = m if max_card is None else min(max_card, m)
    vals = fam.values(x, fam.labels(m))
    if (vals == INF).any():
        return []
    sums = kernels.subset_table(vals)
    card = kernels.popcounts(m)
    ok = (sums + alpha >= fx.hi - _tol(fx.hi, tol)) & (card <= K)
    out = [_labels(fam, int(mk)) for mk in np.nonzero(ok)[0] + 1]
    return sorted(out, key=_subset_key)


def T_alpha_membership(f, J, x, alpha: float, tol: float = 1e-12) -> bool:
    """``x in T^alpha(J)``, the inverse relation of :func:`S_alpha`."""
    fn = as_function(f)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    fx = fn(x)
    if fx.hi == INF:
        return False
    return fx.hi <= math.fsum(_atom_values(fn, list(J), x)) + alpha + _tol(fx.hi, tol)


# -- N^eps and Pi^eps --------------------------------------------------------------------

def _decomp_threshold_search(fn, xstar, r_member: float, r_not: float, max_card):
    """Look for a decomposition of ``x*`` with conjugate sum ``<= r_member``.

    Returns ``(certificate_from_epi, definitive_no)``.
    """
    A = _epi(fn)
    cert = epi_union_membership(A, (xstar, r_member), max_card)
    if cert.is_member:
        return cert, False
    if r_not == r_member:
        return cert, cert.is_not_member
    return cert, epi_union_membership(A, (xstar, r_not), max_card).is_not_member


def N_eps_membership(f, xstar, x, eps: float, eta_steps: int = 20,
                     max_card: Optional[int] = None, tol: float = TOL) -> Certificate:
    """Is ``x in N^eps f(x*)``?

    For finite affine families the intersection over ``eta > 0`` collapses
    (finitely many subsets, closed inequalities) and the answer is exact.
    Otherwise each ``eta`` of the schedule is tried; a definite failure at
    some ``eta`` gives NotMember and success throughout gives MemberUpTo the
    last ``eta``.
    """
    if eps < 0:
        raise PreconditionViolated("eps must be nonnegative")
    fn = as_function(f)
    fam = fn.family
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(xstar, dtype=float))
    fx = fn(x)
    if fx.lo == INF:
        return Certificate("not_member", reason="x is outside dom f")
    if fx.hi == INF:
        return Certificate("unknown", reason="f(x) bracket is unbounded")
    ip = float(y @ x)
    exact = fam.is_finite and fam.all_affine
    etas = [0.0] if exact else [0.0] + default_schedule(eps, eta_steps)[::-1]
    eta_floor = None
    for eta in etas:
        tau = eps + eta
        slack = _tol(fx.hi, tol)
        cert, definitive = _decomp_threshold_search(
            fn, y, tau + slack - fx.hi + ip, tau + slack - fx.lo + ip, max_card)
        if cert.is_member:
            w = _make_witness(fn, x, y, cert.witness["J"], cert.witness["parts"], eps, eta)
            if w is None or not verify_witness(fn, x, y, eps, w):
                return Certificate("unknown", reason="witness failed re-verification")
            if eta == 0.0:
                return Certificate("member", w, eta_floor=0.0)
            eta_floor = eta
            last = w
            continue
        if eta == 0.0 and not exact:
            continue
        if definitive:
            return Certificate("not_member",
                               reason=f"no decomposition fits at eta={eta:.3g}")
        return Certificate("unknown", reason=f"search inconclusive at eta={eta:.3g}")
    return Certificate("member_up_to", last, eta_floor=eta_floor)


def _per_subset_cached(fn, J, y):
    key = ("perJ", J, y.tobytes())
    hit = fn.memo.get(key)
    if hit is None:
        fam = fn.family
        if fam.is_finite and fam.all_affine:
            idx = [i - fam.start for i in J]
            if _close(fam.A[idx].sum(axis=0), y):
                hit = (math.fsum(fam.T[idx]), fam.A[idx])
            else:
                hit = (INF, None)
        else:
            hit = per_subset(fam, J, y)
        fn.memo[key] = hit
    return hit


def _search_eq6(fn, x, y, eps, eta, max_card, tol, exact_sum: bool):
    """Search ``(alpha, J, eps_i, parts)`` with ``J in S^alpha(x)`` as in the
    subdifferential formula; returns ``(witness, complete)``."""
    fam = fn.family
    fx = fn(x)
    tau = eps + eta
    slack = _tol(fx.hi, tol)
    ip = float(y @ x)
    best = None
    for J in S_alpha(fn, x, tau + 2 * slack, max_card, tol=tol):
        val, parts = _per_subset_cached(fn, J, y)
        if parts is None or val == INF:
            continue
        if fx.hi - ip + val <= tau + slack:
            if best is None or (val, _subset_key(J)) < (best[0], _subset_key(best[1])):
                best = (val, J, parts)
    if best is None:
        return None
    return _make_witness(fn, x, y, best[1], best[2], eps, eta)


def Pi_eps_membership(f, x, xstar, eps: float, eta_steps: int = 20,
                      max_card: Optional[int] = None, tol: float = TOL) -> Certificate:
    """Is ``x* in Pi^eps f(x)``?

    Finite families are searched directly: for each ``eta``, every
    ``J in S^{eps+eta}(x)`` is paired with the best parts ``x_i*`` summing to
    ``x*``, and the remaining budget is split among the ``eps_i``.  Other
    families use the inverse relation with ``N^eps``.
    """
    if eps < 0:
        raise PreconditionViolated("eps must be nonnegative")
    fn = as_function(f)
    fam = fn.family
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(xstar, dtype=float))
    if not fam.is_finite or len(fam) > kernels.MAX_ENUM:
        return N_eps_membership(fn, y, x, eps, eta_steps, max_card, tol)
    fx = fn(x)
    if fx.lo == INF:
        return Certificate("not_member", reason="x is outside dom f")
    exact = fam.all_affine
    complete = max_card is None or max_card >= len(fam)
    etas = [0.0] if exact else [0.0] + default_schedule(eps, eta_steps)[::-1]
    last = None
    for eta in etas:
        w = _search_eq6(fn, x, y, eps, eta, max_card, tol, exact_sum=False)
        if w is not None:
            if not verify_witness(fn, x, y, eps, w):
                return Certificate("unknown", reason="witness failed re-verification")
            if eta == 0.0:
                return Certificate("member", w, eta_floor=0.0)
            last = w
            continue
        if eta == 0.0 and not exact:
            continue
        if complete:
            return Certificate("not_member", reason=f"no subset fits at eta={eta:.3g}")
        return Certificate("unknown", reason="subset budget below |I|")
    return Certificate("member_up_to", last, eta_floor=etas[-1])


# -- exact-sum variants -------------------------------------------------------------------

def B_eps_membership(f, xstar, J, parts, x, eps: float, tol: float = TOL) -> Certificate:
    """Is ``x in B^eps_(J, parts) f(x*)`` (split with ``eta = 0``)?

    The best split is explicit: each ``eps_i`` is set to its smallest
    admissible value and the remainder goes to ``alpha``.
    """
    if eps < 0:
        raise PreconditionViolated("eps must be nonnegative")
    fn = as_function(f)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(xstar, dtype=float))
    J = tuple(J)
    parts = np.asarray(parts, dtype=float).reshape(len(J), -1)
    if not _close(parts.sum(axis=0), y):
        return Certificate("not_member", reason="parts do not sum to x*")
    fx = fn(x)
    if fx.lo == INF:
        return Certificate("not_member", reason="x is outside dom f")
    fam = fn.family
    vals = _atom_values(fn, J, x)
    conj = [conjugate_atom(fam.atom(i))(p) for i, p in zip(J, parts)]
    if any(c == INF for c in conj):
        return Certificate("not_member", reason="a part lies outside dom f_i*")
    total_hi = fx.hi - float(y @ x) + math.fsum(conj)
    total_lo = fx.lo - float(y @ x) + math.fsum(conj)
    slack = _tol(fx.hi, tol)
    if total_hi <= eps + slack:
        w = _make_witness(fn, x, y, J, parts, eps, 0.0)
        if w is not None and verify_witness(fn, x, y, eps, w):
            return Certificate("member", w, eta_floor=0.0)
        return Certificate("unknown", reason="witness failed re-verification")
    if total_lo > eps + slack:
        return Certificate("not_member", reason="alpha_J + sum eps_i exceeds eps")
    return Certificate("unknown", reason="f(x) bracket straddles the threshold")


def Ns_Pis_membership(f, x, xstar, eps: float, max_card: Optional[int] = None,
                      tol: float = TOL) -> Certificate:
    """Is ``x* in Pi_s^eps f(x)`` (equivalently ``x in N_s^eps f(x*)``)?

    This is the union of ``B^eps`` over all ``(J, parts)``, i.e. the search
    of :func:`Pi_eps_membership` with ``eta = 0`` and no intersection.
    """
    if eps < 0:
        raise PreconditionViolated("eps must be nonnegative")
    fn = as_function(f)
    fam = fn.family
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(xstar, dtype=float))
    fx = fn(x)
    if fx.lo == INF:
        return Certificate("not_member", reason="x is outside dom f")
    if fam.is_finite and len(fam) <= kernels.MAX_ENUM:
        w = _search_eq6(fn, x, y, eps, 0.0, max_card, tol, exact_sum=True)
        if w is not None:
            if verify_witness(fn, x, y, eps, w):
                return Certificate("member", w, eta_floor=0.0)
            return Certificate("unknown", reason="witness failed re-verification")
        if max_card is None or max_card >= len(fam):
            return Certificate("not_member", reason="exhaustive subset search")
        return Certificate("unknown", reason="subset budget below |I|")
    ip = float(y @ x)
    slack = _tol(fx.hi, tol)
    cert, definitive = _decomp_threshold_search(fn, y, eps + slack - fx.hi + ip,
                                                eps + slack - fx.lo + ip, max_card)
    if cert.is_member:
        w = _make_witness(fn, x, y, cert.witness["J"], cert.witness["parts"], eps, 0.0)
        if w is not None and verify_witness(fn, x, y, eps, w):
            return Certificate("member", w, eta_floor=0.0)
        return Certificate("unknown", reason="witness failed re-verification")
    if definitive:
        return Certificate("not_member", reason="no attained decomposition fits")
    return Certificate("unknown", reason=cert.reason)


def Ns_membership(f, xstar, x, eps: float, max_card: Optional[int] = None,
                  tol: float = TOL) -> Certificate:
    """``x in N_s^eps f(x*)``: the inverse relation of :func:`Ns_Pis_membership`."""
    return Ns_Pis_membership(f, x, xstar, eps, max_card, tol)


# -- theorem graders ---------------------------------------------------------------------

@dataclass
class GraderResult:
    status: str  # "consistent", "counterexample" or "unknown"
    premise: str
    detail: dict = field(default_factory=dict)

    @property
    def consistent(self) -> bool:
        return self.status == "consistent"

    def to_json(self) -> dict:
        return {"status": self.status, "premise": self.premise, "detail": self.detail}


def _pts(sample) -> list:
    return [np.atleast_1d(np.asarray(p, dtype=float)) for p in sample]


def _finish(counter, unknown, premise: Tri, detail) -> GraderResult:
    detail = dict(detail, counterexamples=counter[:10], unknown_queries=unknown)
    if counter:
        return GraderResult("counterexample", premise.value, detail)
    if premise is Tri.UNKNOWN:
        return GraderResult("unknown", premise.value, detail)
    return GraderResult("consistent", premise.value, detail)


def theorem1_verify(f, xstar, eps_grid: Iterable[float], x_sample, max_card=None) -> GraderResult:
    """Zero gap at ``x*`` iff ``M^eps f(x*) = N^eps f(x*)`` for every ``eps``.

    Checks ``N subset M`` everywhere, equality when the gap is zero, and
    records points of ``M \\ N`` (the contrapositive) when it is not.
    """
    fn = as_function(f)
    y = np.atleast_1d(np.asarray(xstar, dtype=float))
    rep = gap_report(fn, y, max_card)
    counter, gap_pts, unknown = [], [], 0
    for eps in eps_grid:
        for x in _pts(x_sample):
            m = M_eps_membership(fn, y, x, eps)
            n = N_eps_membership(fn, y, x, eps, max_card=max_card)
            if n.is_member and m.is_not_member:
                counter.append({"eps": eps, "x": x.tolist(), "issue": "N not inside M"})
            if m.verdict == "unknown" or n.verdict == "unknown":
                unknown += 1
                continue
            if m.is_member and n.is_not_member:
                gap_pts.append({"eps": eps, "x": x.tolist()})
                if rep.zero_gap is Tri.YES:
                    counter.append({"eps": eps, "x": x.tolist(), "issue": "M \\ N nonempty at zero gap"})
    detail = {"zero_gap": rep.zero_gap.value, "points_in_M_not_N": gap_pts[:10],
              "contrapositive_confirmed": bool(gap_pts) if rep.zero_gap is Tri.NO else None}
    return _finish(counter, unknown, rep.zero_gap, detail)


def _premise_over(fn, xstar_sample, attr, max_card) -> tuple:
    verdicts = [getattr(gap_report(fn, y, max_card), attr) for y in _pts(xstar_sample)]
    if all(v is Tri.YES for v in verdicts):
        return Tri.YES, verdicts
    if any(v is Tri.NO for v in verdicts):
        return Tri.NO, verdicts
    return Tri.UNKNOWN, verdicts


def _subdiff_grader(fn, x_sample, eps_grid, xstar_sample, member_fn, premise, label):
    counter, witnesses, unknown = [], [], 0
    for x in _pts(x_sample):
        for eps in eps_grid:
            for y in _pts(xstar_sample):
                d = eps_subdiff_membership(fn, x, y, eps)
                p = member_fn(x, y, eps)
                if p.is_member and d.is_not_member:
                    counter.append({"x": x.tolist(), "xstar": y.tolist(), "eps": eps,
                                    "issue": f"{label} not inside d_eps f"})
                if d.verdict == "unknown" or p.verdict == "unknown":
                    unknown += 1
                    continue
                if d.is_member and p.is_not_member:
                    witnesses.append({"x": x.tolist(), "xstar": y.tolist(), "eps": eps})
                    if premise is Tri.YES:
                        counter.append({"x": x.tolist(), "xstar": y.tolist(), "eps": eps,
                                        "issue": f"d_eps f larger than {label} under the premise"})
    return counter, witnesses, unknown


def theorem2_verify(f, x_sample, eps_grid, xstar_sample, max_card=None) -> GraderResult:
    """Stable zero gap iff ``d_eps f(x) = Pi^eps f(x)`` for all ``x`` and ``eps``."""
    fn = as_function(f)
    premise, _ = _premise_over(fn, xstar_sample, "zero_gap", max_card)
    counter, wit, unknown = _subdiff_grader(
        fn, x_sample, list(eps_grid), xstar_sample,
        lambda x, y, e: Pi_eps_membership(fn, x, y, e, max_card=max_card), premise, "Pi^eps")
    return _finish(counter, unknown, premise, {"stable_zero_gap": premise.value,
                                               "points_in_d_not_Pi": wit[:10]})


def theorem4_verify(f, x_sample, eps_grid, xstar_sample, max_card=None) -> GraderResult:
    """Stable strong gap iff ``d_eps f(x) = Pi_s^eps f(x)`` for all ``x`` and ``eps``."""
    fn = as_function(f)
    premise, _ = _premise_over(fn, xstar_sample, "strong_gap", max_card)
    counter, wit, unknown = _subdiff_grader(
        fn, x_sample, list(eps_grid), xstar_sample,
        lambda x, y, e: Ns_Pis_membership(fn, x, y, e, max_card=max_card), premise, "Pi_s^eps")
    return _finish(counter, unknown, premise, {"stable_strong_gap": premise.value,
                                               "points_in_d_not_Pis": wit[:10]})


def _candidates(fn, y, max_card) -> list:
    """Decompositions ``(J, parts)`` to test against ``M^eps f(x*)``."""
    fam = fn.family
    out = []
    if isinstance(fam, CountableConstants):
        K = max_card or 30
        head = fam.constants.head(max(64, K))
        order = np.argsort(-head, kind="stable")
        for k in range(1, K + 1):
            J = tuple(sorted(int(i + fam.start) for i in order[:k]))
            out.append((J, np.zeros((k, fam.dim))))
        return out
    if not fam.is_finite:
        raise Unsupported("candidate enumeration needs a finite family or constants")
    m = len(fam)
    K = m if max_card is None else min(max_card, m)
    for k in range(1, K + 1):
        for J in itertools.combinations(fam.labels(m).tolist(), k):
            J = tuple(J)
            if fam.all_affine:
                out.append((J, fam.A[[i - fam.start for i in J]]))
            else:
                val, parts = _per_subset_cached(fn, J, y)
                if parts is not None:
                    out.append((J, parts))
    return out


def theorem3_verify(f, xstar, eps_grid, x_sample, max_card=None) -> GraderResult:
    """Strong gap at ``x*`` iff some ``(J, parts)`` has ``M^eps f(x*) = B^eps`` for all ``eps``.

    With a strong-gap witness the equality is checked on the grid.  Without
    one, each candidate ``(J, parts)`` up to ``max_card`` must be refuted by
    some ``(eps, x)`` with ``x in M^eps \\ B^eps``; the grid is augmented with
    small ``eps`` so that near-attaining candidates are caught.
    """
    fn = as_function(f)
    y = np.atleast_1d(np.asarray(xstar, dtype=float))
    rep = gap_report(fn, y, max_card)
    eps_list = sorted(set(float(e) for e in eps_grid))
    positive = [e for e in eps_list if e > 0]
    if positive:
        eps_list = sorted(set(eps_list) | {positive[0] * 2.0 ** -k for k in range(1, 60, 4)})
    xs = _pts(x_sample)
    counter, unknown = [], 0
    M = {}
    for eps in eps_list:
        for j, x in enumerate(xs):
            M[(eps, j)] = M_eps_membership(fn, y, x, eps)

    def compare(J, parts, stop_on_refute):
        nonlocal unknown
        refuted = None
        for eps in eps_list:
            for j, x in enumerate(xs):
                m = M[(eps, j)]
                b = B_eps_membership(fn, y, J, parts, x, eps)
                if stop_on_refute and m.is_member and not b.is_not_member:
                    # residuals below the default tolerance still separate B from M
                    b = B_eps_membership(fn, y, J, parts, x, eps, tol=0.0)
                if b.is_member and m.is_not_member:
                    counter.append({"J": list(J), "eps": eps, "x": x.tolist(),
                                    "issue": "B not inside M"})
                if m.is_member and b.is_not_member and refuted is None:
                    refuted = {"eps": eps, "x": x.tolist()}
                    if stop_on_refute:
                        return refuted
                if "unknown" in (m.verdict, b.verdict):
                    unknown += 1
        return refuted

    detail = {"strong_gap": rep.strong_gap.value}
    if rep.strong_gap is Tri.YES:
        w = rep.witness
        if w.value == INF:
            detail["witness"] = "trivial: f*(x*) = +inf"
            return _finish(counter, unknown, Tri.YES, detail)
        refuted = compare(w.J, w.parts, stop_on_refute=False)
        if refuted is not None:
            counter.append({"J": list(w.J), **refuted, "issue": "witness does not equalize M and B"})
        detail["witness"] = w.to_json()
        return _finish(counter, unknown, Tri.YES, detail)
    cands = _candidates(fn, y, max_card)
    unrefuted = []
    for J, parts in cands:
        if compare(J, parts, stop_on_refute=True) is None:
            unrefuted.append(list(J))
    detail.update(candidates=len(cands), unrefuted=unrefuted[:10],
                  max_card=max_card or (len(fn.family) if fn.family.is_finite else 30))
    if rep.strong_gap is Tri.NO and unrefuted:
        return GraderResult("unknown", rep.strong_gap.value,
                            dict(detail, counterexamples=counter[:10], unknown_queries=unknown,
                                 note="some candidates agree with M on the sampled grid"))
    return _finish(counter, unknown, rep.strong_gap, detail)


# -- closure comparison for nonnegative families ------------------------------------------

def _interval_of(pred, grid, tol) -> Optional[tuple]:
    """Endpoints of the set ``{y : pred(y)}`` (an interval) sampled on ``grid``.

    ``pred`` returns True, False or None (unknown).  Endpoints are refined by
    bisection between neighbouring grid points.  Returns None when a verdict
    needed for the refinement is unknown.
    """
    flags = [pred(g) for g in grid]
    if any(v is None for v in flags):
        return None
    idx = [k for k, v in enumerate(flags) if v]
    if not idx:
        return ()
    lo_k, hi_k = idx[0], idx[-1]
    if idx != list(range(lo_k, hi_k + 1)):
        return None

    def refine(inside, outside):
        for _ in range(80):
            if abs(outside - inside) <= tol * 0.25:
                break
            mid = 0.5 * (inside + outside)
            v = pred(mid)
            if v is None:
                return None
            inside, outside = (mid, outside) if v else (inside, mid)
        return inside

    lo = grid[lo_k] if lo_k == 0 else refine(grid[lo_k], grid[lo_k - 1])
    hi = grid[hi_k] if hi_k == len(grid) - 1 else refine(grid[hi_k], grid[hi_k + 1])
    if lo is None or hi is None:
        return None
    return (lo, hi)


def lemma10_theorem6_check(f, x, eps: float, window=(-2.0, 2.0), resolution: int = 81,
                           tol: float = 1e-6) -> GraderResult:
    """Compare ``d_eps f(x)`` with the closures of ``Pi_s^eps f(x)`` and ``Pi^eps f(x)``.

    Applies to one-dimensional families of nonnegative convex atoms, for
    which ``A`` is convex.  All three sets are intervals; their endpoints
    inside ``window`` are located by sampling and bisection and compared
    within ``tol`` (the Hausdorff distance of two intervals is the larger
    endpoint gap).
    """
    fn = as_function(f)
    fam = fn.family
    if not fam.all_nonnegative:
        raise PreconditionViolated("the closure identity is stated for nonnegative atoms")
    if fam.dim != 1:
        raise Unsupported("interval comparison is implemented for one-dimensional families")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    grid = np.linspace(window[0], window[1], resolution)

    def as_pred(cert_fn):
        def pred(yv):
            c = cert_fn(np.array([yv]))
            if c.verdict == "unknown":
                return None
            return c.is_member
        return pred

    d = _interval_of(as_pred(lambda y: eps_subdiff_membership(fn, x, y, eps)), grid, tol)
    ps = _interval_of(as_pred(lambda y: Ns_Pis_membership(fn, x, y, eps)), grid, tol)
    # the eta schedule must reach well below tol, or MemberUpTo widens Pi^eps
    steps = max(20, int(math.ceil(-math.log2(tol * 1e-3))))
    pi = _interval_of(as_pred(lambda y: Pi_eps_membership(fn, x, y, eps, steps)), grid, tol)
    detail = {"x": x.tolist(), "eps": eps, "subdiff": d, "pi_s_closure": ps, "pi": pi}
    if d is None or ps is None or pi is None:
        return GraderResult("unknown", "nonnegative", dict(detail, note="inconclusive sampling"))

    def dist(a, b):
        if a == () or b == ():
            return 0.0 if a == b else INF
        return max(abs(a[0] - b[0]), abs(a[1] - b[1]))

    detail["hausdorff_subdiff_pis"] = dist(d, ps)
    detail["hausdorff_pi_pis"] = dist(pi, ps)
    if ps != ():
        ends = [Ns_Pis_membership(fn, x, np.array([v]), eps).is_member for v in ps]
        detail["pi_s_closed"] = all(ends)
    counter = []
    if dist(d, ps) > tol:
        counter.append({"issue": "d_eps f differs from the closure of Pi_s^eps"})
    if dist(pi, ps) > tol:
        counter.append({"issue": "Pi^eps differs from the closure of Pi_s^eps"})
    return _finish(counter, 0, Tri.YES, detail)
