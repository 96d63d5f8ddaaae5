import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustsum import (FiniteFamily, RobustSumFunction, gap_report, named_family)
from robustsum import certificates as C
from robustsum.conjugate import Tri
from robustsum.errors import PreconditionViolated
from robustsum.instances import build_family, load_instance

AFFINE_PAIR = [[0, 0], [2, 0]]
FIXTURES = ["affine_pair", "geometric_constants", "inconsistent_1d", "hinge_pair"]
GRID = [k / 4 for k in range(-8, 9)]
EPS = [0.0, 0.125, 0.25, 0.5, 1.0]


@pytest.fixture(scope="module")
def pair():
    return RobustSumFunction(FiniteFamily.affine(AFFINE_PAIR))


_FNS = {}


def fixture_fn(name):
    if name not in _FNS:
        _FNS[name] = RobustSumFunction(build_family(load_instance(name)[0]["family"]))
    return _FNS[name]


queries = st.tuples(st.sampled_from(FIXTURES), st.sampled_from(GRID), st.sampled_from(GRID),
                    st.sampled_from(EPS))


# -- examples ----------------------------------------------------------------------------

def test_subdiff_examples(pair):
    assert C.eps_subdiff_membership(pair, [0.3], [1.0], 0.5).verdict == "member"
    assert C.eps_subdiff_membership(pair, [0.6], [1.0], 0.5).verdict == "not_member"
    assert C.M_eps_membership(pair, [1.0], [0.3], 0.5).verdict == "member"
    # 0 is a global minimiser of f
    assert C.eps_subdiff_membership(pair, [-1.0], [0.0], 0.0).is_member


@pytest.mark.parametrize("eps", [0.0, 0.5, 3.0])
@pytest.mark.parametrize("x", [-2.0, 0.0, 1.5])
def test_affine_atom_subdiff_is_its_slope(eps, x):
    atom = FiniteFamily.affine([[2.0, 1.0]]).atom(1)
    assert C.eps_subdiff_membership(atom, [x], [2.0], eps).is_member
    assert C.eps_subdiff_membership(atom, [x], [1.5], eps).verdict == "not_member"


def test_S_and_T_examples(pair):
    assert C.S_alpha(pair, [1.0], 0.0) == [(2,), (1, 2)]
    assert C.S_alpha(pair, [1.0], 100.0) == [(1,), (2,), (1, 2)]
    cloud = named_family("geometric_cloud")
    assert C.S_alpha(cloud, [0.5, 1.0], 1.0) == []
    assert C.T_alpha_membership(pair, (2,), [1.0], 0.0)
    assert not C.T_alpha_membership(pair, (1,), [1.0], 0.0)
    assert not C.T_alpha_membership(cloud, (1,), [0.5, 1.0], 5.0)
    with pytest.raises(PreconditionViolated):
        C.S_alpha(pair, [1.0], -1.0)


def test_N_examples(pair):
    for x in (-1.0, 0.0, 0.3, 2.0):
        assert C.N_eps_membership(pair, [1.0], [x], 0.5).verdict == "not_member"
    assert C.N_eps_membership(pair, [2.0], [0.0], 0.0).verdict == "member"
    cloud = named_family("geometric_cloud")
    assert C.N_eps_membership(cloud, [0.0, 0.0], [0.5, 1.0], 1.0).verdict == "not_member"


def test_Pi_examples_transpose_N(pair):
    assert C.Pi_eps_membership(pair, [0.3], [1.0], 0.5).verdict == "not_member"
    assert C.Pi_eps_membership(pair, [0.0], [2.0], 0.0).verdict == "member"


def test_B_examples(pair):
    assert C.B_eps_membership(pair, [2.0], (2,), [[2.0]], [1.0], 0.0).verdict == "member"
    assert C.B_eps_membership(pair, [2.0], (2,), [[2.0]], [-1.0], 0.0).verdict == "not_member"
    assert C.B_eps_membership(pair, [2.0], (2,), [[1.0]], [1.0], 0.0).verdict == "not_member"
    # large eps: every x of M^eps f(2) is in B^eps with the strong witness
    for x in (-1.0, 0.0, 1.0):
        if C.M_eps_membership(pair, [2.0], [x], 3.0).is_member:
            assert C.B_eps_membership(pair, [2.0], (2,), [[2.0]], [x], 3.0).is_member


def test_Pis_examples(pair):
    assert C.Ns_Pis_membership(pair, [1.0], [2.0], 0.0).verdict == "member"
    for y in (0.0, 1.0, 3.0):
        assert C.Ns_Pis_membership(pair, [1.0], [y], 0.0).verdict == "not_member"
    cloud = named_family("geometric_cloud")
    assert C.Ns_Pis_membership(cloud, [0.5, 1.0], [0.0, 0.0], 1.0).verdict == "not_member"


def test_theorem_graders_on_affine_pair(pair):
    grid = [[v] for v in np.linspace(-1, 1, 9)]
    r = C.theorem1_verify(pair, [1.0], [0.0, 0.5], grid)
    assert r.status == "consistent" and r.premise == "no"
    assert C.theorem1_verify(pair, [2.0], [0.0, 0.5], grid).status == "consistent"
    assert C.theorem3_verify(pair, [2.0], [0.0, 0.5], grid).status == "consistent"
    assert C.theorem3_verify(pair, [1.0], [0.0, 0.5], grid).status == "consistent"


def test_theorem3_on_geometric_constants():
    g = named_family("geometric_constants")
    r = C.theorem3_verify(g, [0.0], [0.0, 0.5], [[0.0], [1.0]])
    assert r.status == "consistent" and r.premise == "no"


def test_singleton_family_all_theorems_consistent():
    s = FiniteFamily.affine([[1, 0]])
    xs, ys = [[0.0], [1.0]], [[0.0], [1.0], [2.0]]
    for y in ([0.0], [1.0]):
        assert C.theorem1_verify(s, y, [0, 0.5], xs).status == "consistent"
        assert C.theorem3_verify(s, y, [0, 0.5], xs).status == "consistent"
    assert C.theorem2_verify(s, xs, [0, 0.5], ys).status == "consistent"
    assert C.theorem4_verify(s, xs, [0, 0.5], ys).status == "consistent"


@pytest.mark.parametrize("fam, x", [
    (FiniteFamily.hinge([[1, 1], [-1, 0]], 1), 0.5),
    (FiniteFamily.hinge([[1, 1]], 1), 1.5),
    (named_family("geometric_constants"), 0.5),
])
def test_lemma10_examples(fam, x):
    r = C.lemma10_theorem6_check(fam, [x], 0.25)
    assert r.status == "consistent"
    assert r.detail["hausdorff_subdiff_pis"] <= 1e-6


def test_hinge_pair_intervals_match_closed_form():
    # f = max(x-1,0) + max(-x,0); at x = 0.5, f = 0 and d_eps f(0.5) = [-2 eps, 2 eps]
    r = C.lemma10_theorem6_check(FiniteFamily.hinge([[1, 1], [-1, 0]], 1), [0.5], 0.25)
    lo, hi = r.detail["subdiff"]
    assert abs(lo + 0.5) <= 1e-6 and abs(hi - 0.5) <= 1e-6


# -- invariants --------------------------------------------------------------------------

@settings(max_examples=40)
@given(queries)
def test_containment_chain(q):
    name, x, y, eps = q
    fn = fixture_fn(name)
    s = C.Ns_Pis_membership(fn, [x], [y], eps)
    p = C.Pi_eps_membership(fn, [x], [y], eps)
    d = C.eps_subdiff_membership(fn, [x], [y], eps)
    n = C.N_eps_membership(fn, [y], [x], eps)
    m = C.M_eps_membership(fn, [y], [x], eps)
    assert not (s.is_member and p.is_not_member)
    assert not (p.is_member and d.is_not_member)
    assert not (n.is_member and m.is_not_member)


@settings(max_examples=40)
@given(queries)
def test_inverse_coherence(q):
    name, x, y, eps = q
    fn = fixture_fn(name)
    assert C.Pi_eps_membership(fn, [x], [y], eps).verdict == \
        C.N_eps_membership(fn, [y], [x], eps).verdict
    assert C.Ns_Pis_membership(fn, [x], [y], eps).verdict == \
        C.Ns_membership(fn, [y], [x], eps).verdict
    assert C.eps_subdiff_membership(fn, [x], [y], eps).verdict == \
        C.M_eps_membership(fn, [y], [x], eps).verdict


@settings(max_examples=40)
@given(queries, st.sampled_from(EPS))
def test_monotone_in_eps(q, extra):
    name, x, y, eps = q
    fn = fixture_fn(name)
    if C.eps_subdiff_membership(fn, [x], [y], eps).is_member:
        assert not C.eps_subdiff_membership(fn, [x], [y], eps + extra).is_not_member
    for J in C.S_alpha(fn, [x], eps, max_card=2):
        assert C.T_alpha_membership(fn, J, [x], eps + extra)


@settings(max_examples=40)
@given(queries)
def test_member_witnesses_reverify(q):
    name, x, y, eps = q
    fn = fixture_fn(name)
    for cert in (C.N_eps_membership(fn, [y], [x], eps), C.Ns_Pis_membership(fn, [x], [y], eps)):
        if cert.is_member and cert.witness and "split" in cert.witness:
            eta = cert.witness["split"]["eta"]
            assert C.verify_witness(fn, [x], [y], eps, cert.witness)
            assert eta <= max(eps, 1.0) / 2


def test_schedule():
    s = C.default_schedule(0.5)
    assert len(s) == 20 and s[0] == 0.5 and s[-1] == 2.0 ** -20
    assert C.default_schedule(3.0)[0] == 1.5


def test_pi_members_lie_in_subdiff_on_cloud():
    cloud = RobustSumFunction(named_family("geometric_cloud"))
    for y in ([0.0, 0.0], [0.1, -0.2], [1.0, 1.0]):
        p = C.Pi_eps_membership(cloud, [0.0, 1.0], y, 0.25)
        if p.is_member:
            assert C.eps_subdiff_membership(cloud, [0.0, 1.0], y, 0.25).is_member
