"""Time the subset-sum kernels with numba against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 12 16 20] [--repeat 3]

Both backends are run in the same process by toggling the backend flag; the
results are checked for equality before timings are reported.
"""

import argparse
import time

import numpy as np

from robustsum import _backend, kernels


def best_time(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[12, 16, 18, 20])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _backend.numba is None:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(args.seed)
    saved = _backend.USE_NUMBA
    print(f"{'m':>3} {'kernel':<15} {'numba [s]':>11} {'numpy [s]':>11} {'speedup':>8}")
    try:
        for m in args.sizes:
            vals = rng.normal(size=m)
            for name, fn in (("subset_table", kernels.subset_table),
                             ("max_subset_sum", kernels.max_subset_sum)):
                _backend.USE_NUMBA = True
                fn(vals)  # compile outside the timed region
                t_nb, r_nb = best_time(lambda: fn(vals), args.repeat)
                _backend.USE_NUMBA = False
                t_np, r_np = best_time(lambda: fn(vals), args.repeat)
                if name == "subset_table":
                    assert np.array_equal(r_nb, r_np)
                else:
                    assert r_nb[1] == r_np[1] and r_nb[0] == r_np[0]
                print(f"{m:>3} {name:<15} {t_nb:>11.5f} {t_np:>11.5f} {t_np / t_nb:>8.2f}")
    finally:
        _backend.USE_NUMBA = saved


if __name__ == "__main__":
    main()
