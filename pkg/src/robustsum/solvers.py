"""Robust regression over point clouds and best approximate solutions of
inequality systems.

Both problems minimise a robust sum of nonnegative residual atoms, which
equals the ordinary (possibly infinite) sum.  Descent works on the sum of
the first ``N`` terms; the remainder is bounded by the family's tail
certificate and the reported objective is always a fresh certified bracket.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .bracket import INF, Bracket
from .errors import EmptyDomain, InvalidFamily, NoConvergence, PreconditionViolated
from .families import (FiniteFamily, FunctionFamily, GeometricCloud, HarmonicSystem,
                       RobustSumFunction, as_function, named_family)

PROBES = (1e-9, 1e-6, 1e-3, 1.0)
TRUNCATION = 256


@dataclass
class PointCloud:
    """Finite ``(t_i, s_i)`` pairs, or the name of a countable generator."""

    points: Optional[Sequence[Sequence[float]]] = None
    generator: Optional[str] = None

    def __post_init__(self):
        if (self.points is None) == (self.generator is None):
            raise InvalidFamily("give either points or a generator name")

    def family(self, p: float) -> FunctionFamily:
        if self.generator is not None:
            return named_family(self.generator, p=p)
        rows = [[1.0, float(t), float(s)] for t, s in self.points]
        return FiniteFamily.power(rows, p, name="cloud")


@dataclass
class LinearSystem:
    """Rows ``(a_i, b_i)`` of ``<a_i, x> <= b_i``, or a generator name."""

    rows: Optional[Sequence[Sequence[float]]] = None
    generator: Optional[str] = None

    def __post_init__(self):
        if (self.rows is None) == (self.generator is None):
            raise InvalidFamily("give either rows or a generator name")

    def family(self, p: float) -> FunctionFamily:
        if self.generator is not None:
            return named_family(self.generator, p=p)
        return FiniteFamily.hinge([list(a) + [b] for a, b in self.rows], p, name="system")


@dataclass
class SolveResult:
    x_opt: np.ndarray
    objective: Bracket
    iterations: int
    domain_notes: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    norm: Optional[Bracket] = None

    def to_json(self) -> dict:
        out = {"x_opt": [float(v) for v in self.x_opt],
               "objective": self.objective.to_json(),
               "iterations": self.iterations,
               "domain_notes": self.domain_notes}
        if self.norm is not None:
            out["norm"] = self.norm.to_json()
        return out


def _n_terms(fam: FunctionFamily, N: Optional[int]) -> int:
    if fam.is_finite:
        return len(fam)
    return TRUNCATION if N is None else int(N)


def _truncated(fam: FunctionFamily, x, N: int) -> float:
    tail = fam.pointwise_tail(x)
    if tail is not None and tail.pos_divergent:
        return INF
    vals = fam.values(x, fam.labels(N))
    return math.fsum(vals) if np.isfinite(vals).all() else INF


def subgradient_of_truncation(family, x, N: Optional[int] = None) -> tuple:
    """Subgradient of ``sum_{i<=N} f_i`` at ``x`` and a bound on the omitted tail.

    Finite families use every atom and report a zero error bound.
    """
    fam = as_function(family).family
    if not fam.all_nonnegative:
        raise PreconditionViolated("truncation needs nonnegative atoms")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = _n_terms(fam, N)
    g = fam.subgradients(x, fam.labels(n))
    grad = np.array([math.fsum(col) for col in np.asarray(g, dtype=float).T])
    if fam.is_finite:
        return grad, 0.0
    tail = fam.pointwise_tail(x)
    bounds = tail.pos_bounds(n) if tail is not None else None
    return grad, (INF if bounds is None else bounds[1])


def _detect_domain(fn: RobustSumFunction, x0: np.ndarray) -> tuple:
    """Pin coordinates whose every perturbation leaves ``dom f``.

    Returns ``(pinned, lower, upper, notes)``; a one-sided divergence turns
    into a bound at the start value.
    """
    n = len(x0)
    pinned, lower, upper, notes = {}, np.full(n, -INF), np.full(n, INF), []
    for j in range(n):
        side = {}
        for sgn in (1.0, -1.0):
            bad = True
            for d in PROBES:
                y = x0.copy()
                y[j] += sgn * d
                if fn(y).lo != INF:
                    bad = False
                    break
            side[sgn] = bad
        if side[1.0] and side[-1.0]:
            pinned[j] = float(x0[j])
            notes.append({"coordinate": j + 1, "pinned": float(x0[j]),
                          "reason": "every sampled perturbation diverges"})
        elif side[1.0]:
            upper[j] = x0[j]
            notes.append({"coordinate": j + 1, "upper_bound": float(x0[j]),
                          "reason": "increasing this coordinate diverges"})
        elif side[-1.0]:
            lower[j] = x0[j]
            notes.append({"coordinate": j + 1, "lower_bound": float(x0[j]),
                          "reason": "decreasing this coordinate diverges"})
    return pinned, lower, upper, notes


def _start(fn: RobustSumFunction, init) -> np.ndarray:
    fam = fn.family
    cands = []
    if init is not None:
        cands.append(np.atleast_1d(np.asarray(init, dtype=float)))
    if fam.domain_sample is not None:
        cands.append(np.asarray(fam.domain_sample, dtype=float))
    cands.append(np.zeros(fam.dim))
    rng = np.random.default_rng(0)
    cands.extend(rng.normal(size=(16, fam.dim)))
    for c in cands:
        if fn(c).lo != INF:
            return c.astype(float).copy()
    raise EmptyDomain("no sampled point has a finite objective")


def minimize_robust_sum(family, p: float, init=None, step: str = "auto", max_iter: int = 20000,
                        tol: float = 1e-8, xtol: float = 1e-6, N: Optional[int] = None,
                        optimum: Optional[float] = None, trace: bool = False) -> SolveResult:
    """Projected (sub)gradient descent on the truncated robust sum.

    ``step`` is ``"auto"`` (Armijo backtracking for ``p > 1``, diminishing
    steps for ``p = 1``), ``"diminishing"`` (``c / sqrt(k)``, ``c`` halved
    whenever the objective rises) or ``"polyak"`` (needs ``optimum``).
    """
    fn = as_function(family)
    fam = fn.family
    if not fam.all_nonnegative:
        raise PreconditionViolated("solvers need nonnegative residual atoms")
    x = _start(fn, init)
    pinned, lower, upper, notes = _detect_domain(fn, x)
    n = _n_terms(fam, N)

    def project(y):
        y = np.clip(y, lower, upper)
        for j, v in pinned.items():
            y[j] = v
        return y

    def F(y):
        return _truncated(fam, y, n)

    def grad(y):
        g = subgradient_of_truncation(fam, y, n)[0]
        for j in pinned:
            g[j] = 0.0
        return g

    rule = step
    if rule == "auto":
        rule = "armijo" if p > 1 else "diminishing"
    if rule == "polyak" and optimum is None:
        raise PreconditionViolated("the Polyak step needs the optimal value")

    fx = F(x)
    best_x, best_f = x.copy(), fx
    hist = [(0, fx)] if trace else []
    c, t = 1.0, 1.0
    stall = 0
    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        g = grad(x)
        gn = float(np.linalg.norm(g))
        if gn == 0.0:
            converged = True
            break
        if rule == "armijo":
            t = min(t * 2.0, 1e6)
            while True:
                y = project(x - t * g)
                fy = F(y)
                if fy <= fx - 1e-4 * float(g @ (x - y)) and fy <= fx:
                    break
                t *= 0.5
                if t < 1e-30:
                    y, fy = x, fx
                    break
            moved = float(np.linalg.norm(y - x))
            dec = fx - fy
            x, fx = y, fy
            if moved <= 1e-16 * max(1.0, float(np.linalg.norm(x))) or gn <= 1e-13 or \
                    (dec <= 0.0 and gn <= 1e-10):
                converged = True
                break
        else:
            if rule == "polyak":
                a = max(fx - optimum, 0.0) / gn ** 2
            else:
                a = c / math.sqrt(k) / gn
            y = project(x - a * g)
            fy = F(y)
            if fy > fx and rule == "diminishing":
                c *= 0.5
            x, fx = y, fy
        if fx < best_f - tol * max(1.0, abs(best_f)) * 1e-3:
            stall = 0
        else:
            stall += 1
        if fx < best_f:
            best_x, best_f = x.copy(), fx
        if trace:
            hist.append((k, fx))
        if rule != "armijo" and (stall >= 500 or (optimum is not None and best_f - optimum <= tol)):
            converged = True
            break
    if not converged:
        raise NoConvergence(f"no convergence within {max_iter} iterations")
    obj = fn(best_x)
    return SolveResult(best_x, obj, k, notes, hist)


def robust_regression(cloud: Union[PointCloud, FunctionFamily], p: float = 2.0, **opts) -> SolveResult:
    """Best regression line ``s = x_1 + x_2 t`` in robust ``L_p`` over a cloud."""
    fam = cloud.family(p) if isinstance(cloud, PointCloud) else cloud
    return minimize_robust_sum(fam, p, **opts)


def best_approx_solution(system: Union[LinearSystem, FunctionFamily], p: float = 2.0,
                         **opts) -> SolveResult:
    """Minimise the robust ``L_p`` violation of ``<a_i, x> <= b_i``.

    The objective is the ``p``-th power; ``norm`` holds its ``1/p`` power.
    """
    fam = system.family(p) if isinstance(system, LinearSystem) else system
    res = minimize_robust_sum(fam, p, **opts)
    res.norm = res.objective.map_increasing(lambda v: v ** (1.0 / p) if v != INF else INF)
    return res
