#!/usr/bin/env python3
"""Benchmark the jitted kernels against the pure-numpy fallback.

Each mode runs in a subprocess so the IMUTELEOP_PURE_NUMPY flag is applied
at import time, exactly as a user would experience it.

    python benchmarks/bench_kernels.py
"""

import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, time
import numpy as np
from imuteleop import kernels

rng = np.random.default_rng(0)
results = {"numba_enabled": kernels.NUMBA_ENABLED}

xs = rng.normal(0.0, 1.0, 1_000_000)
kernels.sliding_median(xs[:1000], 2)  # warm the JIT cache before timing
t0 = time.perf_counter()
kernels.sliding_median(xs, 2)
results["sliding_median_1e6_n2_s"] = time.perf_counter() - t0

q0 = np.array([1.0, 0.0, 0.0, 0.0])
gyros = rng.normal(0.0, 0.5, (200_000, 3))
accels = rng.normal(0.0, 0.5, (200_000, 3)) + np.array([0.0, 0.0, 9.81])
dts = np.full(200_000, 0.01)
kernels.madgwick_batch(q0, gyros[:100], accels[:100], 0.1, dts[:100], 0.5)
t0 = time.perf_counter()
kernels.madgwick_batch(q0, gyros, accels, 0.1, dts, 0.5)
results["madgwick_2e5_steps_s"] = time.perf_counter() - t0

tilts = rng.normal(0.0, 0.3, 1_000_000)
ok = np.ones(1_000_000, dtype=np.bool_)
omega = rng.normal(0.0, 0.5, 1_000_000)
d = np.full(1_000_000, 0.01)
kernels.complementary_scan(0.0, omega[:100], tilts[:100], ok[:100], 0.98, d[:100])
t0 = time.perf_counter()
kernels.complementary_scan(0.0, omega, tilts, ok, 0.98, d)
results["complementary_1e6_steps_s"] = time.perf_counter() - t0

print(json.dumps(results))
"""


def run_mode(pure_numpy: bool) -> dict:
    env = dict(os.environ)
    env["IMUTELEOP_PURE_NUMPY"] = "1" if pure_numpy else "0"
    out = subprocess.run(
        [sys.executable, "-c", WORKLOAD], env=env, capture_output=True, text=True, check=True
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> None:
    print("running numba path ...")
    jit = run_mode(pure_numpy=False)
    print("running pure-numpy path ...")
    pure = run_mode(pure_numpy=True)

    if not jit["numba_enabled"]:
        print("warning: numba unavailable; both rows are the fallback path")

    names = [k for k in jit if k != "numba_enabled"]
    width = max(len(n) for n in names)
    print(f"\n{'kernel':<{width}}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}")
    for name in names:
        a, b = jit[name], pure[name]
        print(f"{name:<{width}}  {a:>9.4f}s  {b:>9.4f}s  {b / a:>7.1f}x")


if __name__ == "__main__":
    main()
