import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robustsum import kernels
from robustsum.errors import SizeLimit


def reference_table(values):
    m = len(values)
    rows = []
    for mask in range(1, 1 << m):
        rows.append(sum(values[i] for i in range(m) if mask >> i & 1))
    return np.array(rows)


@given(st.lists(st.integers(-50, 50), min_size=1, max_size=10))
def test_integer_table_is_exact(backend, vals):
    got = kernels.subset_table(np.array(vals, dtype=np.int64))
    assert got.dtype.kind == "i"
    assert np.array_equal(got, reference_table(vals))


@given(st.lists(st.integers(-64, 64).map(lambda k: k / 4), min_size=1, max_size=12))
def test_max_subset_sum_matches_enumeration(backend, vals):
    best, mask = kernels.max_subset_sum(vals)
    table = reference_table(vals)
    assert best == table.max()
    assert mask == int(np.argmax(table)) + 1


def test_matrix_table_rows(backend):
    vals = np.array([[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]])
    got = kernels.subset_table(vals)
    for mask in range(1, 8):
        idx = [i for i in range(3) if mask >> i & 1]
        assert np.array_equal(got[mask - 1], vals[idx].sum(axis=0))


def test_backends_agree_at_twenty_terms(monkeypatch):
    from robustsum import _backend
    rng = np.random.default_rng(3)
    vals = rng.integers(-9, 10, size=20).astype(float) / 2
    out = {}
    for flag in (True, False):
        monkeypatch.setattr(_backend, "USE_NUMBA", flag)
        out[flag] = kernels.max_subset_sum(vals)
    assert out[True] == out[False]
    assert out[True][0] == vals[vals > 0].sum()


def test_size_limit(backend):
    with pytest.raises(SizeLimit):
        kernels.subset_table(np.ones(kernels.MAX_ENUM + 1))


def test_popcounts_and_masks():
    pc = kernels.popcounts(4)
    assert list(pc) == [bin(m).count("1") for m in range(1, 16)]
    assert kernels.mask_to_indices(0b1011) == (0, 1, 3)
    assert kernels.mask_to_indices(0b101, labels=[7, 8, 9]) == (7, 9)


def test_pure_numpy_flag(monkeypatch):
    from robustsum import _backend
    monkeypatch.setenv("ROBUSTSUM_PURE_NUMPY", "1")
    assert _backend.env_flag("ROBUSTSUM_PURE_NUMPY")
    monkeypatch.setenv("ROBUSTSUM_PURE_NUMPY", "0")
    assert not _backend.env_flag("ROBUSTSUM_PURE_NUMPY")
