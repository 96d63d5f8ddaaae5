"""Acceptance criteria, one check each.

Every check prints a single ``PASS``/``FAIL`` line with its measured time;
the lines are repeated in the pytest terminal summary.  Run this file
directly to print only those lines.
"""

import collections
import math
import time

import numpy as np
import pytest

from robustsum import (EpiUnionSet, FiniteFamily, LinearSystem, PointCloud, RobustSumFunction,
                       ScalarFamily, best_approx_solution, brute_force_robust_sum, builtin,
                       closed_convex_regarding, conjugate_numeric, convexity_witness_nonneg,
                       gap_report, infinite_sum_classify, is_finite_robust_sum, lemma7_check,
                       named_family, phi_eval, positive_part_sum, robust_regression,
                       robust_sum_scalar, sup_scalar, weak_duality_check)
from robustsum import certificates as C
from robustsum.conjugate import Tri, Verdict3
from robustsum.instances import build_family, load_instance
from robustsum.scalar import Finiteness, SumKind

import oracles

INF = math.inf
LINES = []
CHECKS = {}


def criterion(number, title, budget):
    def wrap(fn):
        CHECKS[number] = (title, budget, fn)
        return fn
    return wrap


def fixture_fn(name):
    return RobustSumFunction(build_family(load_instance(name)[0]["family"]))


@criterion(1, "robust sum and classification of the example1 family", 1.0)
def check_example1():
    ref = float(oracles.example1_value())
    fam = builtin("example1")
    b = robust_sum_scalar(fam, tol=1e-8)
    kind = infinite_sum_classify(fam, tol=1e-8).kind
    ok = ref - 1e-8 <= b.lo and b.hi <= ref + 1e-8 and kind is SumKind.MINUS_INFINITY
    return ok, f"bracket=[{b.lo:.12f}, {b.hi:.12f}] ref={ref:.12f} kind={kind.value}"


@criterion(2, "alternating families are +inf and undefined", 1.0)
def check_remark():
    out = []
    for name in ("alternating", "alternating_harmonic"):
        fam = builtin(name)
        out.append((robust_sum_scalar(fam).lo, infinite_sum_classify(fam).kind))
    ok = all(v == INF and k is SumKind.UNDEFINED for v, k in out)
    return ok, " ".join(f"{v}/{k.value}" for v, k in out)


@criterion(3, "robust sum identities on 1000 random finite families", 10.0)
def check_identities():
    rng = np.random.default_rng(20)
    bad = collections.Counter()
    for _ in range(1000):
        m = int(rng.integers(1, 13))
        a = rng.normal(size=m) * 10.0 ** rng.uniform(-3, 3, size=m)
        if rng.random() < 0.15:
            a[rng.integers(m)] = INF
        fam = ScalarFamily.finite(a)
        r = robust_sum_scalar(fam).lo
        brute = brute_force_robust_sum(fam)
        pos = positive_part_sum(fam).lo
        sup = sup_scalar(fam).value.lo
        bad["dichotomy"] += r != brute
        bad["positive_part"] += max(r, 0.0) != pos
        bad["sign"] += not ((sup >= 0) == (r >= 0) == (r == pos))
        bad["sup_bound"] += not sup <= r
        bad["finiteness"] += (is_finite_robust_sum(fam) is Finiteness.FINITE) != (pos < INF)
    return sum(bad.values()) == 0, f"violations={dict(bad)}"


@criterion(4, "weak duality on 500 random affine families", 30.0)
def check_weak_duality():
    rng = np.random.default_rng(4)
    bad = reports = 0
    for _ in range(500):
        n, m = int(rng.integers(1, 4)), int(rng.integers(1, 6))
        rows = np.column_stack([rng.integers(-3, 4, size=(m, n)),
                                rng.integers(-3, 4, size=m)]).astype(float)
        fn = RobustSumFunction(FiniteFamily.affine(rows))
        J = np.sort(rng.choice(m, size=int(rng.integers(1, m + 1)), replace=False))
        y = rows[J, :n].sum(axis=0)
        dec_value = math.fsum(rows[J, n])
        fs = conjugate_numeric(fn, y).value
        bad += not (-dec_value <= -fs.lo + 1e-9)
        y_rand = rng.integers(-4, 5, size=n).astype(float)
        bad += not weak_duality_check(gap_report(fn, y_rand), tol=1e-9)
        reports += 1
    return bad == 0, f"decompositions=500 reports={reports} violations={bad}"


@criterion(5, "gap dichotomy on affine_pair", 5.0)
def check_affine_pair():
    fn = fixture_fn("affine_pair")
    r1, r2 = gap_report(fn, [1.0]), gap_report(fn, [2.0])
    grid = [[v] for v in np.linspace(-1, 1, 41)]
    th = C.theorem1_verify(fn, [1.0], [0.5], grid)
    in_M = [x for x in grid if C.M_eps_membership(fn, [1.0], x, 0.5).is_member]
    in_N = [x for x in grid if C.N_eps_membership(fn, [1.0], x, 0.5).is_member]
    ok = (r1.fstar.lo >= -1e-6 and r1.fstar.hi <= 1e-6 and r1.phi.value.lo == INF
          and r1.zero_gap is Tri.NO
          and abs(r2.fstar.lo) <= 1e-6 and abs(r2.fstar.hi) <= 1e-6
          and r2.phi.value.lo == r2.phi.value.hi == 0.0
          and r2.strong_gap is Tri.YES and r2.witness.J == (2,)
          and th.status == "consistent" and th.detail["contrapositive_confirmed"]
          and len(in_M) > 0 and not in_N)
    return ok, (f"f*(1)=[{r1.fstar.lo:.2e},{r1.fstar.hi:.2e}] phi(1)={r1.phi.value.lo} "
                f"zero_gap(1)={r1.zero_gap.value} strong(2)={r2.strong_gap.value} "
                f"J={r2.witness.J} |M|={len(in_M)} |N|={len(in_N)} theorem1={th.status}")


@criterion(6, "zero but not strong gap on geometric_constants", 5.0)
def check_constants():
    g = fixture_fn("geometric_constants")
    rep = gap_report(g, [0.0], max_card=30)
    phi = phi_eval(g, [0.0], max_card=30)
    res = rep.certificates["strong_gap"]["resolution"] if rep.strong_gap is Tri.NO else None
    ccr = closed_convex_regarding(EpiUnionSet(g), [0.0])
    ok = (abs(rep.fstar.lo + 1) <= 1e-9 and abs(rep.fstar.hi + 1) <= 1e-9
          and abs(phi.value.lo + 1) <= 1e-9 and abs(phi.value.hi + 1) <= 1e-9
          and rep.zero_gap is Tri.YES and rep.strong_gap is Tri.NO
          and res is not None and abs(res - 2.0 ** -30) <= 1e-12
          and ccr is Verdict3.FAILS)
    mismatches = []
    pair = fixture_fn("affine_pair")
    for fn, ys in ((pair, np.linspace(-1, 3, 17)), (g, [-0.5, 0.0, 0.5])):
        A = EpiUnionSet(fn)
        for y in ys:
            strong = gap_report(fn, [y]).strong_gap is Tri.YES
            holds = closed_convex_regarding(A, [y]) is Verdict3.HOLDS
            if strong != holds:
                mismatches.append(float(y))
    ok = ok and not mismatches
    return ok, (f"f*(0)=[{rep.fstar.lo:.12f},{rep.fstar.hi:.12f}] phi(0)={phi.value.lo} "
                f"strong={rep.strong_gap.value} resolution={res} ccr={ccr.value} "
                f"theorem5_mismatches={mismatches}")


@criterion(7, "containment chain on 1000 random queries", 60.0)
def check_containment():
    rng = np.random.default_rng(7)
    names = ["affine_pair", "geometric_constants", "inconsistent_1d", "hinge_pair",
             "geometric_cloud"]
    fns = {n: fixture_fn(n) for n in names}
    grid = np.round(np.arange(-2, 2.01, 0.25), 2)
    verdicts, violations = collections.Counter(), []
    for q in range(1000):
        name = names[q % len(names)]
        fn = fns[name]
        x, y = rng.choice(grid, size=fn.dim), rng.choice(grid, size=fn.dim)
        eps = float(rng.choice([0.0, 0.125, 0.25, 0.5, 1.0]))
        if name == "geometric_cloud":
            x[0] = rng.choice([0.0, 0.0, 0.5])
        s = C.Ns_Pis_membership(fn, x, y, eps)
        p = C.Pi_eps_membership(fn, x, y, eps)
        d = C.eps_subdiff_membership(fn, x, y, eps)
        n = C.N_eps_membership(fn, y, x, eps)
        m = C.M_eps_membership(fn, y, x, eps)
        for a, b, lab in ((s, p, "Pis<Pi"), (p, d, "Pi<subdiff"), (n, m, "N<M")):
            if a.is_member and b.is_not_member:
                violations.append((name, x.tolist(), y.tolist(), eps, lab))
        for c in (s, p, d, n, m):
            verdicts[c.verdict] += 1
    return not violations, f"violations={len(violations)} verdicts={dict(verdicts)}"


@criterion(8, "epi f* equals cl co A on affine_pair", 5.0)
def check_lemma7():
    fn = fixture_fn("affine_pair")
    res = lemma7_check(fn, [[v] for v in np.linspace(-1, 3, 101)], tol=1e-6)
    return res.ok, f"samples=101 failures={len(res.failures)}"


@criterion(9, "robust regression on point clouds", 10.0)
def check_regression():
    g = robust_regression(PointCloud(generator="geometric_cloud"), 2)
    f = robust_regression(PointCloud(points=[(0, 0), (1, 1)]), 2)
    pinned = any(n.get("coordinate") == 1 and "pinned" in n for n in g.domain_notes)
    ok = (np.abs(g.x_opt - [0, 1]).max() <= 1e-6 and g.objective.hi <= 1e-10 and pinned
          and np.abs(f.x_opt - [0, 1]).max() <= 1e-9)
    return ok, (f"cloud x={g.x_opt.tolist()} obj={g.objective.hi:.2e} pinned={pinned} "
                f"finite x={f.x_opt.tolist()}")


@criterion(10, "best approximate solution of inconsistent_1d", 5.0)
def check_approx():
    r = best_approx_solution(fixture_fn("inconsistent_1d").family, 2)
    xg, _ = oracles.grid_argmin(lambda x: max(x, 0.0) ** 2 + max(1 - x, 0.0) ** 2,
                                -2.0, 2.0, 1e-6)
    ok = (abs(r.x_opt[0] - 0.5) <= 1e-6 and abs(r.norm.mid - math.sqrt(0.5)) <= 1e-6
          and abs(r.x_opt[0] - xg) <= 1e-6)
    return ok, f"x={r.x_opt[0]:.9f} norm={r.norm.mid:.9f} grid_oracle={xg:.9f}"


@criterion(11, "nonnegative convexity and closure checks on hinge_pair", 10.0)
def check_hinge_pair():
    fn = fixture_fn("hinge_pair")
    conv = convexity_witness_nonneg(fn)
    lem = C.lemma10_theorem6_check(fn, [0.5], 0.25, tol=1e-6)
    ok = conv.ok and lem.status == "consistent" and lem.detail["hausdorff_subdiff_pis"] <= 1e-6
    return ok, (f"midpoints_ok={conv.ok} lemma10={lem.status} "
                f"subdiff={tuple(map(float, lem.detail['subdiff']))} "
                f"hausdorff={float(lem.detail['hausdorff_subdiff_pis']):.1e}")


@criterion(12, "byte-identical CLI reports across two runs", 120.0)
def check_determinism(tmp_dir=None):
    import tempfile
    from pathlib import Path

    from cli_runs import run_all
    with tempfile.TemporaryDirectory() as d:
        a = run_all(Path(d) / "a")
        b = run_all(Path(d) / "b")
    same = a.keys() == b.keys() and all(a[k][0] == b[k][0] for k in a)
    return same, f"reports={len(a)} identical={same}"


def evaluate(number):
    title, budget, fn = CHECKS[number]
    t0 = time.perf_counter()
    ok, detail = fn()
    dt = time.perf_counter() - t0
    ok = bool(ok) and dt < budget
    line = (f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {title} "
            f"({dt:.2f}s, budget {budget:g}s) {detail}")
    LINES.append(line)
    print(line)
    return ok, line


@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number):
    ok, line = evaluate(number)
    assert ok, line


if __name__ == "__main__":
    for k in sorted(CHECKS):
        evaluate(k)
