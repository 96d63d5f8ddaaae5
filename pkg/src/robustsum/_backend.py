"""Selection between the numba-compiled kernels and the numpy fallback.

Set ``ROBUSTSUM_PURE_NUMPY=1`` to force the numpy code path.  The number of
threads used by parallel kernels is capped by ``ROBUSTSUM_THREADS``.
"""

import os

_TRUTHY = {"1", "true", "yes", "on"}


def env_flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in _TRUTHY


# The TBB layer shipped with some distributions is too old for numba and
# only produces a warning; OpenMP is thread safe and widely available.
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and not env_flag("ROBUSTSUM_PURE_NUMPY")

NUMBA_OPTS = {"cache": True, "nogil": True}


def _apply_thread_cap():
    raw = os.environ.get("ROBUSTSUM_THREADS", "").strip()
    if not raw or numba is None:
        return
    try:
        requested = int(raw)
    except ValueError:
        return
    if requested >= 1:
        numba.set_num_threads(min(requested, numba.config.NUMBA_NUM_THREADS))


def njit(func=None, *, parallel=False):
    """``numba.njit`` with project defaults, or the identity without numba."""

    def wrap(f):
        if numba is None:
            return f
        return numba.njit(f, parallel=parallel, **NUMBA_OPTS)

    return wrap(func) if func is not None else wrap


if numba is not None:
    prange = numba.prange
else:  # pragma: no cover
    prange = range


if USE_NUMBA:
    _apply_thread_cap()
