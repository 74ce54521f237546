"""Time the Monte-Carlo moment kernels on every available backend.

    python benchmarks/bench_kernels.py [--samples 2000] [--repeat 5]
"""
import argparse
import time

import numpy as np

from cfxl import kernels

# (M, K, N_r, N_s) problem sizes, smallest first
SIZES = [(2, 2, 4, 1), (4, 3, 4, 2), (9, 6, 16, 4)]


def _inputs(M, K, nr, ns, n, rng):
    H = rng.standard_normal((n, M, K, nr, ns)) + 1j * rng.standard_normal((n, M, K, nr, ns))
    D = rng.random((M, K)) < 0.6
    D[0] = True
    pbar = np.broadcast_to(0.1 * np.eye(ns), (K, ns, ns)).astype(complex)
    return H, D, pbar


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    backends = kernels.available_backends()
    print(f"{'size':>16} " + " ".join(f"{b + ' mr':>12} {b + ' T':>12}" for b in backends))
    for size in SIZES:
        H, D, pbar = _inputs(*size, args.samples, rng)
        A, B = H[:, 0, 0], H[:, -1, -1]
        ref = kernels.mr_moment_sums(H, D, pbar, backend="python")
        cells = []
        for b in backends:
            got = kernels.mr_moment_sums(H, D, pbar, backend=b)
            assert all(np.allclose(x, y) for x, y in zip(got, ref)), b
            t_mr = _best(lambda: kernels.mr_moment_sums(H, D, pbar, backend=b), args.repeat)
            t_t = _best(lambda: kernels.fourth_moment_sum(A, B, A, B, pbar[0], backend=b), args.repeat)
            cells.append(f"{t_mr * 1e3:10.2f}ms {t_t * 1e3:10.2f}ms")
        print(f"{str(size):>16} " + " ".join(cells))


if __name__ == "__main__":
    main()
