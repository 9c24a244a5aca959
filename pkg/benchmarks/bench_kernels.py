"""Compare the compiled kernels against the numpy fallback.

Times the three hot kernels on realistic shapes with both backends and
prints one row per (kernel, size). Run from the repository root:

    python3 benchmarks/bench_kernels.py [--repeats 5]

The compiled extension must be built (pip install does this); otherwise
only the fallback column is reported.
"""

import argparse
import time

import numpy as np

from scopeq._kernels import pyfallback

try:
    from scopeq._kernels import _core
except ImportError:
    _core = None


def _best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _cases():
    rng = np.random.default_rng(0)
    for n, k, d in [(10_000, 10, 16), (100_000, 10, 16), (50_000, 40, 64)]:
        pts = np.ascontiguousarray(rng.normal(size=(n, d)))
        ctr = np.ascontiguousarray(rng.normal(size=(k, d)) * 3)
        yield f"soft_assign n={n} k={k} d={d}", lambda impl, p=pts, c=ctr: impl.soft_assign_batch(p, c, 16.0, 1e-12)
        yield f"lloyd_iter  n={n} k={k} d={d}", lambda impl, p=pts, c=ctr: impl.lloyd_iteration(p, c)
    for n, d in [(64, 32), (256, 64), (512, 128)]:
        z1 = np.ascontiguousarray(rng.normal(size=(n, d)))
        z2 = np.ascontiguousarray(rng.normal(size=(n, d)))
        yield f"nt_xent     n={n} d={d}", lambda impl, a=z1, b=z2: impl.nt_xent_loss_grad(a, b, 0.5)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5, help="best-of timing repeats")
    args = ap.parse_args()

    header = f"{'kernel':34s} {'python':>10s} {'compiled':>10s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for name, run in _cases():
        t_py = _best_of(lambda: run(pyfallback), args.repeats)
        if _core is None:
            print(f"{name:34s} {t_py * 1e3:9.2f}ms {'n/a':>10s} {'':>8s}")
            continue
        t_c = _best_of(lambda: run(_core), args.repeats)
        print(f"{name:34s} {t_py * 1e3:9.2f}ms {t_c * 1e3:9.2f}ms {t_py / t_c:7.2f}x")
    if _core is None:
        print("\ncompiled extension not built; fallback timings only")


if __name__ == "__main__":
    main()
