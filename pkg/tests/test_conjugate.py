import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robustsum import (Affine, Constant, DiagonalQuadratic, EpiUnionSet, FiniteFamily,
                       HingeResidual, PowerResidual, RobustSumFunction, closed_convex_regarding,
                       conjugate_atom, conjugate_numeric, convexity_witness_nonneg,
                       epi_union_membership, gap_report, is_closed_convex, lemma7_check,
                       named_family, phi_eval, weak_duality_check)
from robustsum.conjugate import GapReport, PhiResult, Tri, Verdict3, hull_fiber_min
from robustsum.bracket import Bracket
from robustsum.families import CountableConstants
from robustsum.scalar import ScalarFamily, TailCertificate

import oracles

INF = math.inf
AFFINE_PAIR = [[0, 0], [2, 0]]


@pytest.fixture(scope="module")
def pair():
    return RobustSumFunction(FiniteFamily.affine(AFFINE_PAIR))


@pytest.fixture(scope="module")
def geo():
    return RobustSumFunction(named_family("geometric_constants"))


def one_then_zero():
    """Constants c_1 = 1, c_i = 0 for i >= 2, so t_1 = -1 and the rest vanish."""
    cert = TailCertificate(pos_tail=lambda N: 0.0, neg_tail=lambda N: 0.0,
                           sup_tail=lambda N: (0.0, 0.0), pos_infinitely_often=False,
                           sup_attained=True)
    sf = ScalarFamily.countable(lambda i: np.where(i == 1, 1.0, 0.0), cert)
    return CountableConstants(sf)


def grid_conjugate(atom, y, lo=-60.0, hi=60.0, n=240001):
    xs = np.linspace(lo, hi, n)
    return float(np.max(y * xs - atom.values_many(xs[:, None])))


# -- atom conjugates ---------------------------------------------------------------------

def test_atom_conjugate_examples():
    c = conjugate_atom(Affine([2.0], 5.0))
    assert c([2.0]) == 5.0 and c([1.0]) == INF
    assert conjugate_atom(Constant(1.0))([0.0]) == -1.0
    sq = conjugate_atom(PowerResidual([1.0], 0.0, 2))
    for y in (-3.0, 0.0, 1.0, 2.5):
        assert sq([y]) == pytest.approx(y * y / 4, abs=1e-15)


@pytest.mark.parametrize("atom", [
    PowerResidual([1.0], 0.5, 2), PowerResidual([2.0], -1.0, 1.5), PowerResidual([1.0], 0.0, 3),
    PowerResidual([1.0], 1.0, 1), HingeResidual([1.0], 1.0, 1), HingeResidual([-1.0], 0.0, 2),
    DiagonalQuadratic([0.5], [1.0], 0.25),
])
@pytest.mark.parametrize("y", [-0.75, 0.0, 0.5, 1.0])
def test_atom_conjugate_matches_grid(atom, y):
    got = conjugate_atom(atom)([y])
    ref = grid_conjugate(atom, y)
    if got == INF:
        # off the conjugate domain the grid value keeps growing with the window
        assert grid_conjugate(atom, y, -600, 600, 24001) > ref + 1
    else:
        assert got == pytest.approx(ref, abs=2e-6)


# -- conjugate of f ----------------------------------------------------------------------

def test_conjugate_numeric_examples(pair):
    assert conjugate_numeric(pair, [1.0]).value.contains(0.0, 1e-9)
    assert conjugate_numeric(pair, [3.0]).value.lo == INF
    ones = RobustSumFunction(FiniteFamily.constants([1.0]))
    assert conjugate_numeric(ones, [0.0]).value.contains(-1.0, 1e-9)


@given(st.lists(st.tuples(st.integers(-2, 2), st.integers(-2, 2)), min_size=1, max_size=4),
       st.integers(-5, 5))
def test_conjugate_numeric_matches_affine_oracle(rows, y):
    """For finite affine families f* is the lower convex envelope of phi."""
    rows = [list(r) for r in rows]
    fn = RobustSumFunction(FiniteFamily.affine(rows))
    pts = [(sum(rows[i][0] for i in J), sum(rows[i][1] for i in J))
           for J in oracles.subsets(len(rows))]
    ref = lower_envelope(pts, y)
    got = conjugate_numeric(fn, [float(y)]).value
    if ref == INF:
        assert got.lo == INF
    else:
        assert got.contains(ref, 1e-7)


def lower_envelope(pts, y):
    best = INF
    for a1, t1 in pts:
        for a2, t2 in pts:
            if a1 <= y <= a2:
                v = t1 if a1 == a2 else t1 + (t2 - t1) * (y - a1) / (a2 - a1)
                best = min(best, v)
    return best


# -- phi and gap reports -----------------------------------------------------------------

def test_phi_examples(pair, geo):
    r = phi_eval(pair, [2.0])
    assert r.value.lo == r.value.hi == 0.0 and r.best.J == (2,)
    assert phi_eval(pair, [1.0]).value.lo == INF
    r = phi_eval(pair, [0.0])
    assert r.value.hi == 0.0 and r.best.J == (1,)
    r = phi_eval(geo, [0.0])
    assert r.value.contains(-1.0, 1e-12) and r.attained is False


@pytest.mark.parametrize("fam", [
    FiniteFamily.hinge([[1, 1], [-1, 0]], 2),
    FiniteFamily([PowerResidual([1.0], 0.0, 2), Affine([1.0], 1.0)]),
])
@pytest.mark.parametrize("y", [-0.5, 0.0, 0.5])
def test_phi_below_singleton_decomposition(fam, y):
    r = phi_eval(fam, [y])
    for i in range(1, len(fam) + 1):
        assert r.value.hi <= conjugate_atom(fam.atom(i))([y]) + 1e-12


def test_gap_examples(pair, geo):
    r = gap_report(pair, [1.0])
    assert r.zero_gap is Tri.NO and r.dual.hi == -INF
    assert r.primal.contains(0.0, 1e-9)
    r = gap_report(geo, [0.0])
    assert r.fstar.contains(-1.0, 1e-9) and r.phi.value.contains(-1.0, 1e-9)
    assert r.zero_gap is Tri.YES and r.strong_gap is Tri.NO
    r = gap_report(pair, [2.0])
    assert r.zero_gap is Tri.YES and r.strong_gap is Tri.YES and r.witness.J == (2,)
    for y in (0.0, 1.0, 2.0):
        assert weak_duality_check(gap_report(pair, [y]))
    assert weak_duality_check(gap_report(geo, [0.0]))


def test_weak_duality_accepts_minus_inf_dual():
    phi = PhiResult(Bracket.exact(INF), None, None, True, 1)
    rep = GapReport(np.zeros(1), Bracket.exact(0.0), phi, Tri.NO, Tri.NO)
    assert weak_duality_check(rep)


@given(st.integers(1, 3), st.integers(1, 5), st.data())
def test_weak_duality_fuzz(n, m, data):
    ints = st.integers(-3, 3)
    rows = [[data.draw(ints) for _ in range(n + 1)] for _ in range(m)]
    J = data.draw(st.sets(st.integers(0, m - 1), min_size=1))
    y = [sum(rows[i][j] for i in J) for j in range(n)]
    dec = sum(rows[i][n] for i in J)
    fs = conjugate_numeric(RobustSumFunction(FiniteFamily.affine(rows)), y).value
    assert -dec <= -fs.lo + 1e-9


# -- the epigraph union set --------------------------------------------------------------

def test_epi_membership_examples(pair, geo):
    A = EpiUnionSet(pair)
    assert epi_union_membership(A, ([2.0], 0.0)).verdict == "member"
    assert epi_union_membership(A, ([1.0], 5.0)).verdict == "not_member"
    assert epi_union_membership(A, ([0.0], 1.0)).is_member
    G = EpiUnionSet(geo)
    assert epi_union_membership(G, ([0.0], -1.0)).verdict == "not_member"
    cert = epi_union_membership(G, ([0.0], -1 + 2.0 ** -30), max_card=30)
    assert cert.verdict == "member" and cert.witness["J"] == list(range(1, 31))


def test_closed_convex_regarding_examples(pair, geo):
    assert closed_convex_regarding(EpiUnionSet(pair), [1.0]) is Verdict3.FAILS
    assert closed_convex_regarding(EpiUnionSet(geo), [0.0]) is Verdict3.FAILS
    assert closed_convex_regarding(EpiUnionSet(one_then_zero()), [0.0]) is Verdict3.HOLDS
    assert gap_report(one_then_zero(), [0.0]).strong_gap is Tri.YES


@given(st.lists(st.tuples(st.integers(-2, 2), st.integers(-2, 2)), min_size=1, max_size=5),
       st.integers(-8, 8))
def test_strong_gap_iff_closed_convex_regarding(rows, k):
    fn = RobustSumFunction(FiniteFamily.affine([list(r) for r in rows]))
    y = [k / 2]
    strong = gap_report(fn, y).strong_gap
    ccr = closed_convex_regarding(EpiUnionSet(fn), y)
    assert (strong is Tri.YES) == (ccr is Verdict3.HOLDS)


@given(st.lists(st.tuples(st.integers(-2, 2), st.integers(-2, 2)), min_size=1, max_size=4))
def test_stable_strong_iff_closed_and_convex(rows):
    fn = RobustSumFunction(FiniteFamily.affine([list(r) for r in rows]))
    A = EpiUnionSet(fn)
    gens = sorted({float(g[0]) for g in A.generators()[0]})
    sample = gens + [(a + b) / 2 for a, b in zip(gens, gens[1:])] + [gens[0] - 1, gens[-1] + 1]
    stable = all(gap_report(fn, [y]).strong_gap is Tri.YES for y in sample)
    assert stable == is_closed_convex(A)


@given(st.lists(st.tuples(st.integers(-2, 2), st.integers(-2, 2)), min_size=1, max_size=4),
       st.integers(-10, 10))
def test_hull_of_union_is_hull_of_phi_epigraph(rows, k):
    rows = [list(r) for r in rows]
    fn = RobustSumFunction(FiniteFamily.affine(rows))
    y = k / 4
    pts = [(sum(rows[i][0] for i in J), sum(rows[i][1] for i in J))
           for J in oracles.subsets(len(rows))]
    phi_pts = [(a, oracles.affine_phi(rows, [a])) for a, _ in pts]
    ref = lower_envelope(phi_pts, y)
    got = hull_fiber_min(EpiUnionSet(fn), [y])
    assert got == ref or abs(got - ref) <= 1e-9


def test_lemma7_examples(pair):
    assert lemma7_check(pair, [[v] for v in np.linspace(-1, 3, 21)]).ok
    single = RobustSumFunction(FiniteFamily.affine([[1.5, 2.0]]))
    assert lemma7_check(single, [[v] for v in (-1.0, 1.5, 2.0)]).ok
    c = conjugate_atom(Affine([1.5], 2.0))
    for v in (-1.0, 1.5, 2.0):
        fs = conjugate_numeric(single, [v]).value
        assert fs.contains(c([v]), 1e-9) if c([v]) < INF else fs.lo == INF


def test_convexity_witness_examples(geo):
    assert convexity_witness_nonneg(FiniteFamily.hinge([[1, 1], [-1, 0]], 1)).ok
    assert convexity_witness_nonneg(FiniteFamily.hinge([[1, 1]], 1)).ok
    assert convexity_witness_nonneg(geo).ok


def test_lsc_hull_of_phi_at_constants(geo):
    # phi is -1 on {0} and +inf elsewhere; its lsc hull at 0 is -1 = f*(0)
    assert phi_eval(geo, [0.0]).value.contains(conjugate_numeric(geo, [0.0]).value.mid, 1e-9)
    assert phi_eval(geo, [1e-3]).value.lo == INF
