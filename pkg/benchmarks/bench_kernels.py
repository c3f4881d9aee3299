"""Compare the compiled kernels against the pure-Python fallback.

Times the two hot paths on decode-shaped workloads: candidate score fusion
(one call per hypothesis per step) and the alignment DP fill. Run after an
editable install:

    python3 benchmarks/bench_kernels.py
"""

import random
import time

import numpy as np

from ctxbias import _pykernels

try:
    from ctxbias import _ckernels
except ImportError:
    _ckernels = None


def bench(label, fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    print(f"  {label:<28s} {best * 1e3:9.2f} ms")
    return best


def fusion_workload(kernels, d=5000, steps=50, beam=16):
    rng = np.random.default_rng(7)
    row = np.log(rng.random(d + 1) + 1e-9)
    fst_comp = 2.0 * rng.integers(0, 6, size=d + 1).astype(np.float64)
    lv = np.log(rng.random(d + 1) + 1e-9)

    def run():
        for _ in range(steps * beam):
            kernels.fuse_scores(-3.5, row, fst_comp, -7.1, lv, 1.0, 0.3)

    return run


def levenshtein_workload(kernels, n=400, m=420):
    rng = random.Random(7)
    a = [rng.randrange(50) for _ in range(n)]
    b = [rng.randrange(50) for _ in range(m)]

    def run():
        kernels.levenshtein_fill(a, b)

    return run


def main():
    d, steps, beam = 5000, 50, 16
    print(f"score fusion: D={d}, {steps} steps x {beam} beam entries")
    t_py = bench("pure python (numpy)", fusion_workload(_pykernels, d, steps, beam))
    if _ckernels is not None:
        t_c = bench("compiled", fusion_workload(_ckernels, d, steps, beam))
        print(f"  speedup: {t_py / t_c:.2f}x")

    n, m = 400, 420
    print(f"alignment DP fill: {n} x {m} tokens")
    t_py = bench("pure python", levenshtein_workload(_pykernels, n, m))
    if _ckernels is not None:
        t_c = bench("compiled", levenshtein_workload(_ckernels, n, m))
        print(f"  speedup: {t_py / t_c:.2f}x")

    if _ckernels is None:
        print("compiled kernels not built; only the fallback was timed")


if __name__ == "__main__":
    main()
