#!/usr/bin/env python3
"""Benchmark the numba-compiled kernels against the pure-Python fallback.

The two paths run identical code (the jitted flavour is the same function
compiled), so this measures speedup only.  Results are asserted equal.

Usage: python benchmarks/bench_kernels.py [--scale N]
"""

import argparse
import time

from irsa_aoi import kernels
from irsa_aoi.model import irsa_config, parse_lambda, sa_config
from irsa_aoi.sim import estimate_plr, simulate_aoi_irsa, simulate_aoi_sa

X3 = parse_lambda("3:1.0")


def workloads(scale):
    plr_cfg = irsa_config(2000, 200, 2.56e-4, X3)  # load ~ 0.5
    aoi_cfg = irsa_config(200, 50, 2e-3, X3)
    sa_cfg = sa_config(100, 0.01)
    return [
        ("estimate_plr (m=200, G~0.5)",
         lambda: estimate_plr(plr_cfg, 5_000 * scale, seed=1)),
        ("simulate_aoi_irsa (n=200, m=50)",
         lambda: simulate_aoi_irsa(aoi_cfg, 10_000 * scale, seed=2)),
        ("simulate_aoi_sa (n=100)",
         lambda: simulate_aoi_sa(sa_cfg, 400_000 * scale, seed=3)),
    ]


def run(kernel_set, fn):
    with kernels.use(kernel_set):
        start = time.perf_counter()
        result = fn()
        return time.perf_counter() - start, result


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scale", type=int, default=1,
                        help="multiply every workload size by this factor")
    args = parser.parse_args()

    if kernels.JIT_KERNELS is None:
        print("numba is not available; nothing to compare")
        return

    # compile outside the timed region
    for _, fn in workloads(1):
        run(kernels.JIT_KERNELS, fn)

    print(f"{'workload':<36} {'numba':>10} {'python':>10} {'speedup':>9}")
    for name, fn in workloads(args.scale):
        t_jit, r_jit = run(kernels.JIT_KERNELS, fn)
        t_py, r_py = run(kernels.PY_KERNELS, fn)
        assert r_jit == r_py, f"paths disagree on {name}"
        print(f"{name:<36} {t_jit:>9.3f}s {t_py:>9.3f}s {t_py / t_jit:>8.1f}x")


if __name__ == "__main__":
    main()
