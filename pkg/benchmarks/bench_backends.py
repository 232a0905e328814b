"""Time the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_backends.py [--repeat 3]

Each workload runs once untimed (compilation, caches), then ``--repeat``
times; the best wall time is reported.
"""
import argparse
import time

from mannmix import _accel
from mannmix.bounds import inequality_worst_gaps
from mannmix.core import MannConfig, run_mann
from mannmix.examples import golden_problem, kepler_problem
from mannmix.montecarlo import run_replications
from mannmix.noise import NoiseSpec, generate_noise_sequence


def workloads():
    golden, kepler = golden_problem(), kepler_problem()
    return {
        "noise 1e6": lambda: generate_noise_sequence(NoiseSpec(), 10**6),
        "golden trace 1e5": lambda: run_mann(golden.problem, golden.config, golden.noise),
        "kepler ensemble M=100": lambda: run_replications(
            kepler.problem, kepler.config, kepler.noise, 100, threads=1),
        "inequality scan n<=2000": lambda: inequality_worst_gaps(0.5, 0.5, 2000),
        "golden trace 1e4, M=50 loop": lambda: [
            run_mann(golden.problem, MannConfig(0.25, 1.3, golden.config.N, 10**4), golden.noise.with_stream(k))
            for k in range(50)],
    }


def best_time(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    print(f"{'workload':<30}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for name, fn in workloads().items():
        _accel.USE_NUMBA = True
        fast = best_time(fn, args.repeat)
        _accel.USE_NUMBA = False
        slow = best_time(fn, args.repeat)
        _accel.USE_NUMBA = True
        print(f"{name:<30}{fast:>12.4f}{slow:>12.4f}{slow / fast:>9.1f}x")


if __name__ == "__main__":
    main()
