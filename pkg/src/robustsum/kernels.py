"""Subset-enumeration kernels.

Each kernel has two implementations with identical results on exactly
representable data: a compiled loop (numba) and a chunked numpy version that
encodes subsets as rows of a 0/1 matrix.  Subsets are encoded as bit masks,
bit ``i`` standing for the ``i``-th element, and results are reported for
masks ``1 .. 2**m - 1`` in increasing order.
"""

from __future__ import annotations

import numpy as np

from . import _backend
from ._backend import njit, prange
from .errors import SizeLimit

MAX_ENUM = 20
_CHUNK = 1 << 14


def _check_size(m: int) -> None:
    if m > MAX_ENUM:
        raise SizeLimit(f"subset enumeration limited to {MAX_ENUM} elements, got {m}")


@njit(parallel=True)
def _table_numba(values, out):
    m = values.shape[0]
    d = values.shape[1]
    total = out.shape[0]
    for r in prange(total):
        mask = r + 1
        for j in range(d):
            acc = values[0, j] * 0
            for i in range(m):
                if (mask >> i) & 1:
                    acc += values[i, j]
            out[r, j] = acc


@njit(parallel=True)
def _max_numba(values, nchunks):
    m = values.shape[0]
    total = (1 << m) - 1
    size = (total + nchunks - 1) // nchunks
    best_vals = np.full(nchunks, -np.inf)
    best_masks = np.zeros(nchunks, dtype=np.int64)
    for c in prange(nchunks):
        lo = c * size + 1
        hi = min(lo + size, total + 1)
        bv = -np.inf
        bm = 0
        for mask in range(lo, hi):
            acc = 0.0
            for i in range(m):
                if (mask >> i) & 1:
                    acc += values[i]
            if acc > bv:
                bv = acc
                bm = mask
        best_vals[c] = bv
        best_masks[c] = bm
    bv = -np.inf
    bm = 0
    for c in range(nchunks):
        if best_vals[c] > bv:
            bv = best_vals[c]
            bm = best_masks[c]
    return bv, bm


def _bits(lo: int, hi: int, m: int, dtype) -> np.ndarray:
    masks = np.arange(lo, hi, dtype=np.int64)
    return ((masks[:, None] >> np.arange(m, dtype=np.int64)) & 1).astype(dtype)


def _sequential_matmul(bits: np.ndarray, values: np.ndarray) -> np.ndarray:
    # accumulate element by element so the rounding matches the loop kernel
    out = np.zeros((bits.shape[0], values.shape[1]), dtype=values.dtype)
    for i in range(values.shape[0]):
        out += bits[:, i : i + 1] * values[i]
    return out


def _table_numpy(values: np.ndarray) -> np.ndarray:
    m = values.shape[0]
    total = (1 << m) - 1
    out = np.empty((total, values.shape[1]), dtype=values.dtype)
    for lo in range(1, total + 1, _CHUNK):
        hi = min(lo + _CHUNK, total + 1)
        out[lo - 1 : hi - 1] = _sequential_matmul(_bits(lo, hi, m, values.dtype), values)
    return out


def subset_table(values) -> np.ndarray:
    """Return the sums of the rows of ``values`` over every nonempty subset.

    ``values`` has shape ``(m,)`` or ``(m, d)``; row ``r`` of the result is
    the subset with mask ``r + 1``.  Integer input stays integer, which gives
    an exact path for integral data.
    """
    arr = np.asarray(values)
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr[:, None]
    if arr.dtype.kind in "iub":
        arr = arr.astype(np.int64)
    else:
        arr = arr.astype(np.float64)
    m = arr.shape[0]
    _check_size(m)
    if m == 0:
        out = np.empty((0, arr.shape[1]), dtype=arr.dtype)
    elif _backend.USE_NUMBA:
        out = np.empty(((1 << m) - 1, arr.shape[1]), dtype=arr.dtype)
        _table_numba(np.ascontiguousarray(arr), out)
    else:
        out = _table_numpy(arr)
    return out[:, 0] if squeeze else out


def max_subset_sum(values) -> tuple[float, int]:
    """Maximum subset sum over nonempty subsets and the smallest mask attaining it."""
    arr = np.ascontiguousarray(values, dtype=np.float64)
    m = arr.shape[0]
    _check_size(m)
    if m == 0:
        raise ValueError("empty family has no nonempty subset")
    if _backend.USE_NUMBA:
        nchunks = min(64, (1 << m) - 1)
        best, mask = _max_numba(arr, nchunks)
        return float(best), int(mask)
    best, best_mask = -np.inf, 0
    total = (1 << m) - 1
    for lo in range(1, total + 1, _CHUNK):
        hi = min(lo + _CHUNK, total + 1)
        sums = _sequential_matmul(_bits(lo, hi, m, np.float64), arr[:, None])[:, 0]
        k = int(np.argmax(sums))
        if sums[k] > best:
            best, best_mask = float(sums[k]), lo + k
    return best, best_mask


def popcounts(m: int) -> np.ndarray:
    """Cardinality of each mask ``1 .. 2**m - 1``."""
    _check_size(m)
    masks = np.arange(1, 1 << m, dtype=np.int64)
    counts = np.zeros_like(masks)
    for i in range(m):
        counts += (masks >> i) & 1
    return counts


def mask_to_indices(mask: int, labels=None) -> tuple:
    idx = [i for i in range(mask.bit_length()) if (mask >> i) & 1]
    if labels is None:
        return tuple(idx)
    return tuple(labels[i] for i in idx)
