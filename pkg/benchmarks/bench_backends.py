#!/usr/bin/env python3
"""Timing comparison of the compiled and plain-Python kernel paths.

Runs each trajectory kernel on a representative workload under both
backends and prints per-call wall times. The first numba call includes JIT
compilation, so a warmup call precedes timing.

Usage: python benchmarks/bench_backends.py [--horizon T]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from eqprice import kernels
from eqprice.backend import NUMBA_AVAILABLE, active_backend, set_backend
from eqprice.features import apply_feature_map_batch
from eqprice.market import CostSpec, equilibrium_price_batch


def workload_fixed(T):
    suppliers = (CostSpec.quadratic(0.2), CostSpec.quadratic(0.45), CostSpec.quadratic(0.9))
    fam, p1, p2 = kernels.encode_suppliers(suppliers)
    return (fam, p1, p2, 1.0, T, 0.06912, 0.12)


def workload_demand(T):
    rng = np.random.Generator(np.random.Philox(key=1))
    suppliers = (CostSpec.quadratic(0.5), CostSpec.quadratic(1.0))
    fam, p1, p2 = kernels.encode_suppliers(suppliers)
    demands = rng.uniform(0.5, 1.5, T)
    mus = np.array([0.5, 1.0])
    ints = np.zeros(2)
    p_stars = equilibrium_price_batch(mus, ints, demands)
    tot_eq = np.zeros(T)
    cost_eq = np.zeros(T)
    for mu in mus:
        x = p_stars / mu
        cost_eq += 0.5 * mu * x * x
        tot_eq += x
    gamma = 1.0 / math.sqrt(T)
    n_cells = math.ceil(1.0 / gamma)
    return (fam, p1, p2, demands, p_stars, cost_eq, p_stars * tot_eq,
            0.5, gamma, n_cells, gamma)


def workload_contextual(T):
    rng = np.random.Generator(np.random.Philox(key=2))
    truth = np.array([1.5, 1.5, 1.0])
    phi = np.vstack([truth] + [truth * rng.uniform(0.6, 1.4, 3) for _ in range(7)])
    thetas = rng.uniform(0.5, 1.5, (T, 3))
    feats = apply_feature_map_batch("identity", thetas)
    member_u = phi @ feats.T
    u_true = feats @ truth
    demands = rng.uniform(0.5, 1.5, T)
    p_stars = demands / u_true
    K = max(2, math.ceil((T / math.log(8)) ** (1 / 3)))
    gamma = math.sqrt(K * T / (math.log(8) + math.log(20.0)))
    uniforms = rng.uniform(0.0, 1.0, T)
    log_w0 = np.full(8, -math.log(8))
    return (member_u, log_w0, 2.0 / 81.0, u_true, demands, p_stars,
            np.linspace(0.0, 1.0, K), gamma, uniforms)


def time_call(fn, args, repeats=3):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--horizon", type=int, default=100_000)
    args = parser.parse_args()
    T = args.horizon

    jobs = [
        ("fixed_trajectory", kernels.fixed_trajectory, workload_fixed(T)),
        ("demand_trajectory", kernels.demand_trajectory, workload_demand(T)),
        ("contextual_trajectory", kernels.contextual_trajectory, workload_contextual(T)),
    ]
    backends = ["numpy"] + (["numba"] if NUMBA_AVAILABLE else [])
    previous = active_backend()
    print(f"horizon T = {T}")
    print(f"{'kernel':<24}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    try:
        for name, fn, wl in jobs:
            times = {}
            for b in backends:
                set_backend(b)
                if b == "numba":
                    fn(*wl)  # warmup: compilation happens here
                times[b] = time_call(fn, wl)
            row = f"{name:<24}" + "".join(f"{times[b]:>11.4f}s" for b in backends)
            if "numba" in times:
                row += f"{times['numpy'] / times['numba']:>9.1f}x"
            print(row)
    finally:
        set_backend(previous)
    if not NUMBA_AVAILABLE:
        print("numba not installed: plain-Python path only")


if __name__ == "__main__":
    main()
