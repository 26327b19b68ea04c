"""Benchmark the compiled kernels against the pure-numpy fallback.

Usage: ``python -m symsplit.bench [--n 500 --k 8 --sweeps 40 --repeats 5]``.
Times the row projection and the projected-gradient inner loop on a
synthetic well-conditioned instance for every available backend and prints
the per-call medians plus the speedup of the compiled core.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from .kernels import available_backends


def _time_call(fn, repeats):
    best = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best.append(time.perf_counter() - t0)
    return float(np.median(best))


def run_bench(n=500, k=8, sweeps=40, repeats=5, seed=0):
    rng = np.random.default_rng(seed)
    tau = 1.0
    y0 = rng.uniform(0.0, 1.0, size=(n, k))
    m = rng.standard_normal((k, k))
    a = m @ m.T + (n / 10.0) * np.eye(k)
    b = rng.standard_normal((n, k))
    alpha = 1.0 / float(np.linalg.eigvalsh(a)[-1])
    w = rng.standard_normal((n, k))

    backends = available_backends()
    results = {}
    for name, mod in backends.items():
        mod.gp_rows(y0, a, b, tau, alpha, sweeps, 0.0)  # warm up
        t_gp = _time_call(lambda: mod.gp_rows(y0, a, b, tau, alpha, sweeps, 0.0),
                          repeats)
        t_proj = _time_call(lambda: mod.project_rows(w, tau), repeats)
        results[name] = (t_gp, t_proj)

    print(f"kernel benchmark: n={n} k={k} sweeps={sweeps} repeats={repeats}")
    print(f"{'backend':<10} {'gp_rows [ms]':>14} {'project_rows [ms]':>19}")
    for name, (t_gp, t_proj) in results.items():
        print(f"{name:<10} {t_gp * 1e3:>14.3f} {t_proj * 1e3:>19.3f}")
    if "cython" in results and "python" in results:
        speed = results["python"][0] / results["cython"][0]
        print(f"compiled gp_rows speedup over numpy fallback: {speed:.1f}x")
    else:
        print("compiled extension not built; only the numpy fallback was timed")
    return results


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--k", type=int, default=8)
    ap.add_argument("--sweeps", type=int, default=40)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args(argv)
    run_bench(n=args.n, k=args.k, sweeps=args.sweeps, repeats=args.repeats)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
