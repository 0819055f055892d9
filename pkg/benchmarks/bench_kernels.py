#!/usr/bin/env python3
"""Benchmark the physics substep kernel backends.

Runs identical 40-substep control windows through every importable
backend (compiled Cython and the pure-Python reference), reports
steps/second and the speedup, and verifies the results agree bit-for-bit.

Usage: python benchmarks/bench_kernels.py [--steps N]
"""

import argparse
import time

import numpy as np

from multigait import kernels
from multigait.core import RngStream, standing_pose
from multigait.sim import SUBSTEPS_PER_CONTROL, PHYSICS_DT, SimConfig, reset


def bench(module, args, n_calls):
    module.run_substeps(*args)  # warm up
    start = time.perf_counter()
    for _ in range(n_calls):
        module.run_substeps(*args)
    elapsed = time.perf_counter() - start
    return elapsed / n_calls


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=500,
                        help="control steps per backend (pure backend uses steps/10)")
    cli = parser.parse_args()

    config = SimConfig()
    state = reset("nominal", config=config)
    rng = RngStream(7).child("bench")
    action = standing_pose() + rng.normal(0.0, 0.1, 12)
    args = (state.base_position, state.base_orientation, state.base_lin_vel,
            state.base_ang_vel, state.joint_pos, state.joint_vel, action,
            SUBSTEPS_PER_CONTROL, PHYSICS_DT, config.pack())

    backends = kernels.backends()
    print(f"active backend: {kernels.BACKEND}")
    results = {}
    for name, module in backends.items():
        n_calls = cli.steps if name == "compiled" else max(cli.steps // 10, 10)
        per_call = bench(module, args, n_calls)
        results[name] = per_call
        print(f"{name:>9}: {per_call * 1e3:8.3f} ms / control step "
              f"({1.0 / per_call:10.0f} steps/s, {n_calls} calls)")

    if len(backends) == 2:
        print(f"  speedup: {results['pure'] / results['compiled']:.1f}x compiled over pure")
        outs = {name: module.run_substeps(*args) for name, module in backends.items()}
        pure, fast = outs["pure"], outs["compiled"]
        identical = all(np.array_equal(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
                        for a, b in zip(pure, fast))
        print(f"  bit-identical results: {identical}")
        if not identical:
            raise SystemExit(1)
    else:
        print("  (compiled kernel not built; only the pure backend was timed)")


if __name__ == "__main__":
    main()
