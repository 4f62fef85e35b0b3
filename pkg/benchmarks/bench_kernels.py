"""Time the compiled and pure-Python trajectory kernels on the same workload.

Usage::

    python benchmarks/bench_kernels.py [--trials 200] [--repeat 3]

Both backends receive identical inputs; the script checks that their outputs
match before reporting trajectories per second and the speed-up.
"""
import argparse
import math
import time

import numpy as np

from pointer_collapse.kernels import available, get_backend
from pointer_collapse.noise import NoiseMode

WORKLOADS = {
    # name: (mode, tau_r, dt, substeps, max_steps)
    "frozen": (NoiseMode.FROZEN, 0.0, 0.02, 1, 20000),
    "poisson": (NoiseMode.POISSON_RESAMPLE, 0.5, 0.05, 1, 4000),
    "per_step": (NoiseMode.PER_STEP, 0.0, 10.0, 100, 8000),
}


def run(backend, workload, trials):
    mode, tau_r, dt, substeps, max_steps = WORKLOADS[workload]
    theta0 = np.repeat(math.pi * np.arange(1, 12) / 12, trials)
    streams = np.arange(theta0.size, dtype=np.uint64)
    kern = get_backend(backend)
    start = time.perf_counter()
    out = kern.simulate_outcomes(theta0, streams, 1, 1.0, 1.0, mode.code, tau_r, dt, substeps, max_steps, 1e-6)
    return time.perf_counter() - start, theta0.size, out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=200, help="trajectories per grid point")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    backends = available()
    print(f"{'workload':<10}{'backend':<10}{'traj/s':>12}{'speed-up':>10}")
    for workload in WORKLOADS:
        best, outputs = {}, {}
        for backend in backends:
            times = []
            for _ in range(args.repeat):
                elapsed, n, out = run(backend, workload, args.trials)
                times.append(elapsed)
            best[backend] = n / min(times)
            outputs[backend] = out
        if len(outputs) == 2:
            a, b = outputs.values()
            assert all(np.array_equal(x, y) for x, y in zip(a, b)), "backends disagree"
        for backend in backends:
            ratio = best[backend] / best["python"]
            print(f"{workload:<10}{backend:<10}{best[backend]:>12.0f}{ratio:>9.1f}x")


if __name__ == "__main__":
    main()
