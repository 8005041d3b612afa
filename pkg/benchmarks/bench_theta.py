"""Theta-sum throughput: numba kernel against the numpy fallback.

Usage: python benchmarks/bench_theta.py [--n 20000] [--repeat 5]

Uses the genus-3 (family B) Jacobian period matrix so the lattice has a
few hundred points.  The first numba call compiles (or loads the cache) and
is timed separately.
"""
import argparse
import time

import numpy as np

from prymlab import Curve, CurveSpec, ThetaContext, compute_periods
from prymlab._accel import USE_NUMBA


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000, help="number of arguments")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    B = compute_periods(Curve(CurveSpec("B", (1, 2, 3, 4)))).B
    rng = np.random.default_rng(0)
    z = rng.normal(size=(args.n, B.shape[0])) + 1j * rng.normal(size=(args.n, B.shape[0]))

    fast = ThetaContext(B, use_numba=True)
    slow = ThetaContext(B, use_numba=False)
    print(f"g = {B.shape[0]}, lattice points = {len(fast.points)}, arguments = {args.n}")
    if not USE_NUMBA:
        print("numba disabled; timing the numpy path only")

    t0 = time.perf_counter()
    fast.log_derivatives(z[:2])
    print(f"first numba call: {time.perf_counter() - t0:.3f} s")

    for method, label in (("log_theta", "theta"), ("log_derivatives", "theta + derivatives")):
        tn = best_of(lambda: getattr(slow, method)(z), args.repeat)
        tf = best_of(lambda: getattr(fast, method)(z), args.repeat)
        print(f"{label:22s} numpy {tn:.4f} s  numba {tf:.4f} s  speedup {tn / tf:.1f}x")

    a = fast.log_theta(z[:200])
    b = slow.log_theta(z[:200])
    print(f"max |log theta| difference between paths: {np.max(np.abs(a - b)):.2e}")


if __name__ == "__main__":
    main()
