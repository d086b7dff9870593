#!/usr/bin/env python3
"""Benchmark the RK4 scan kernels: numba JIT vs pure-numpy fallback.

Times the closed loop of the bundled 4-agent scenario and a few synthetic
dense systems.  Run as ``python3 benchmarks/bench_kernels.py``;  pass
``--steps`` to change the horizon.
"""

import argparse
import time

import numpy as np

from netsync import assemble_network, bundled_scenario_path, load_scenario
from netsync._kernels import rk4_scan_numba, rk4_scan_numpy


def time_kernel(kernel, a, x0, n_steps, repeats=3):
    out = np.empty((n_steps + 1, a.shape[0]))
    kernel(a, x0, 1e-3, min(10, n_steps), out, 1e9)  # warm-up / compile
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        status = kernel(a, x0, 1e-3, n_steps, out, 1e9)
        best = min(best, time.perf_counter() - t0)
        assert status == -1
    return best


def benchmark(name, a, n_steps):
    rng = np.random.default_rng(0)
    x0 = rng.uniform(-1.0, 1.0, size=a.shape[0])
    t_numpy = time_kernel(rk4_scan_numpy, a, x0, n_steps)
    row = f"{name:24s} n={a.shape[0]:4d} steps={n_steps}  numpy {t_numpy * 1e3:9.1f} ms"
    if rk4_scan_numba is not None:
        t_numba = time_kernel(rk4_scan_numba, a, x0, n_steps)
        row += f"  numba {t_numba * 1e3:9.1f} ms  speedup {t_numpy / t_numba:5.1f}x"
    else:
        row += "  numba unavailable"
    print(row)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=20000)
    args = parser.parse_args()

    s = load_scenario(bundled_scenario_path("case1"))
    net = assemble_network(s)
    benchmark("bundled 4-agent loop", net.A_cl, args.steps)

    rng = np.random.default_rng(1)
    for n in (50, 150):
        a = rng.standard_normal((n, n)) * 0.2 - np.eye(n)
        benchmark(f"synthetic stable {n}", np.ascontiguousarray(a), args.steps)


if __name__ == "__main__":
    main()
