"""Compare the numba and pure-numpy kernels on representative workloads.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from staggered_did import kernels
from staggered_did.design import DesignCounts
from staggered_did.estimator import compute_weights


def best_of(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def workloads(rng):
    N, T, R = 150, 3, 1000
    Y = rng.standard_normal((N, T))
    codes = rng.permutation(np.repeat(np.arange(T + 1), [0, 75, 60, 15]))
    idx = rng.integers(0, N, size=(R, N))
    yield ("b1 bootstrap, N=150, 1000 reps",
           lambda: kernels._b1_numba(Y, codes, idx), lambda: kernels._b1_numpy(Y, codes, idx))

    counts = np.array([2, 2, 2, 2, 2])
    size = DesignCounts(tuple(counts)).support_size()
    first = np.repeat(np.arange(5), counts)
    yield (f"multiset enumeration, {size} rows",
           lambda: kernels._multiset_numba(first, size), lambda: kernels._multiset_numpy(counts))

    Ypot = rng.standard_normal((10, 4, 5))
    w = compute_weights(4, counts / 10)
    C = kernels._multiset_numba(first, size)
    yield (f"estimates over {size} assignments",
           lambda: kernels._taus_numba(Ypot, w.g, w.denom, C),
           lambda: kernels._taus_numpy(Ypot, w.g, w.denom, C))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'workload':<40} {'numba (s)':>10} {'numpy (s)':>10} {'speedup':>8}")
    for name, fast, slow in workloads(rng):
        t_fast = best_of(fast, args.repeat)
        t_slow = best_of(slow, args.repeat)
        print(f"{name:<40} {t_fast:>10.4f} {t_slow:>10.4f} {t_slow / t_fast:>7.1f}x")


if __name__ == "__main__":
    main()
