import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robustsum import (Affine, Constant, DiagonalQuadratic, FiniteFamily, HingeResidual,
                       PowerResidual, RobustSumFunction, named_family, nonneg_infinite_sum_eval,
                       robust_lp_norm, robust_sum_eval)
from robustsum.errors import DimensionMismatch, InvalidFamily, PreconditionViolated
from robustsum.families import eval_atom

import oracles

INF = math.inf
AFFINE_PAIR = [[0, 0], [2, 0]]


def test_atom_values():
    assert eval_atom(Affine([2.0], 0.0), [3.0]) == 6.0
    assert eval_atom(HingeResidual([1.0], 1.0, 1), [0.0]) == 0.0
    assert eval_atom(PowerResidual([1.0], 0.0, 2), [-2.0]) == 4.0
    assert eval_atom(Constant(1.5), [7.0]) == 1.5
    assert eval_atom(DiagonalQuadratic([1.0], [0.0], 0.0), [3.0]) == 9.0


def test_atom_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        eval_atom(Affine([1.0, 2.0], 0.0), [1.0])
    with pytest.raises(DimensionMismatch):
        FiniteFamily([Affine([1.0], 0.0), Affine([1.0, 1.0], 0.0)])


def test_nonnegative_flags():
    assert PowerResidual([1.0], 0.0, 2).nonnegative
    assert HingeResidual([1.0], 0.0, 1).nonnegative
    assert Constant(0.5).nonnegative and not Constant(-0.5).nonnegative
    assert not Affine([1.0], 0.0).nonnegative


def test_affine_pair_value():
    fn = RobustSumFunction(FiniteFamily.affine(AFFINE_PAIR))
    assert fn([1.0]).lo == 2.0 == oracles.affine_f(AFFINE_PAIR, [1.0])


def test_geometric_constants_are_one_everywhere():
    fn = RobustSumFunction(named_family("geometric_constants"))
    for x in (-3.0, 0.0, 11.0):
        assert fn([x]).contains(1.0, 1e-9)


def test_geometric_cloud_values():
    fn = RobustSumFunction(named_family("geometric_cloud"))
    assert fn([0.0, 1.0]).contains(0.0, 1e-12)
    assert nonneg_infinite_sum_eval(fn, [0.0, 0.5]).contains(1 / 12, 1e-9)
    assert fn([0.1, 1.0]).lo == INF


def test_lp_norm_examples():
    assert robust_lp_norm(named_family("geometric_residuals", p=2), [1.0], 2).contains(
        math.sqrt(1 / 3), 1e-9)
    zero = FiniteFamily.power([[1.0, 0.0], [2.0, 0.0]], 2)
    assert robust_lp_norm(zero, [0.0], 2).lo == 0.0
    three_four = FiniteFamily.power([[0.0, -3.0], [0.0, 4.0]], 2)
    assert robust_lp_norm(three_four, [0.0], 2).contains(5.0, 1e-15)


def test_lp_norm_rejects_mixed_exponents():
    fam = FiniteFamily([PowerResidual([1.0], 0.0, 2), PowerResidual([1.0], 0.0, 3)])
    with pytest.raises(PreconditionViolated):
        robust_lp_norm(fam, [1.0], 2)


def test_nonneg_sum_examples_and_precondition():
    assert nonneg_infinite_sum_eval(FiniteFamily.constants([0.0, 0.0]), [1.0]).lo == 0.0
    sq = FiniteFamily.power([[1.0, 0.0], [1.0, 1.0]], 2)
    assert nonneg_infinite_sum_eval(sq, [0.0]).lo == 1.0
    with pytest.raises(PreconditionViolated):
        nonneg_infinite_sum_eval(FiniteFamily.affine(AFFINE_PAIR), [0.0])


def test_invalid_exponent():
    with pytest.raises(InvalidFamily):
        named_family("geometric_cloud", p=0.5)


def test_cloud_partial_sums_converge_into_bracket():
    fn = RobustSumFunction(named_family("geometric_cloud"))
    x = [0.0, 0.3]
    b = fn(x)
    partial = math.fsum((0.7 * 2.0 ** -i) ** 2 for i in range(1, 80))
    assert b.contains(partial, 1e-12)


rows = st.lists(st.tuples(st.integers(-3, 3), st.integers(-3, 3)), min_size=1, max_size=6)
pts = st.integers(-40, 40).map(lambda k: k / 8)


@given(rows, pts)
def test_pointwise_consistency_affine(rs, x):
    fam = FiniteFamily.affine([list(r) for r in rs])
    assert robust_sum_eval(fam, [x]).lo == oracles.affine_f([list(r) for r in rs], [x])


@given(rows, pts, pts)
def test_midpoint_convexity(rs, x, y):
    fam = FiniteFamily.hinge([list(r) for r in rs], 2)
    fn = RobustSumFunction(fam)
    mid = fn([(x + y) / 2]).hi
    assert mid <= (fn([x]).lo + fn([y]).lo) / 2 + 2e-9


@given(rows, pts, st.integers(-5, 5).map(lambda k: k / 2))
def test_norm_scaling(rs, x, lam):
    base = FiniteFamily.power([list(r) for r in rs], 2)
    scaled = FiniteFamily.power([[lam * a, lam * b] for a, b in rs], 2)
    lhs = robust_lp_norm(scaled, [x], 2).lo
    rhs = abs(lam) * robust_lp_norm(base, [x], 2).lo
    assert lhs == pytest.approx(rhs, rel=1e-15, abs=1e-300)
