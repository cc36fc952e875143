"""Benchmark the Monte Carlo shot kernel: compiled core vs numpy fallback.

Runs the full protocol sampling loop at several shot counts through each
available backend and reports wall time and throughput.

    python benchmarks/bench_shots.py [--max-shots 1000000]
"""

import argparse
import time

import numpy as np

from nopasim import _kernels
from nopasim.protocol import ProtocolConfig, run_protocol


def time_backend(config, backend, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        run_protocol(config, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--max-shots", type=int, default=1_000_000)
    args = parser.parse_args()

    backends = _kernels.available_backends()
    print(f"available backends: {', '.join(backends)}")
    print(f"{'shots':>10}  " + "".join(f"{b:>14}" for b in backends) + f"{'speedup':>10}")

    shots = 1000
    while shots <= args.max_shots:
        config = ProtocolConfig(R=0.5, r1=1.0, r2=1.0, seed=1, shots=shots)
        times = [time_backend(config, b) for b in backends]
        row = f"{shots:>10}  " + "".join(f"{t * 1e3:>12.2f}ms" for t in times)
        if len(times) == 2 and times[1] > 0:
            row += f"{times[0] / times[1]:>9.1f}x"
        print(row)
        shots *= 10

    # sanity: identical outcome streams across backends
    if len(backends) == 2:
        config = ProtocolConfig(R=0.5, r1=1.0, r2=1.0, seed=1, shots=10_000)
        a = run_protocol(config, backend="python")
        b = run_protocol(config, backend="cython")
        dev = float(np.abs(a.shot_means - b.shot_means).max())
        same = np.array_equal(a.outcomes, b.outcomes)
        print(f"\noutcome streams identical: {same}; max mean deviation {dev:.2e}")


if __name__ == "__main__":
    main()
