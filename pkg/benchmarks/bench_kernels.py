#!/usr/bin/env python3
"""Benchmark the compiled kernels against their pure-Python twins.

Generates synthetic deployment-scale interval data and times the three hot
kernels under both implementations. Run after an editable install:

    python3 benchmarks/bench_kernels.py --vms 200000 --repeat 5
"""
import argparse
import random
import time
from array import array

from gridiron._kernels import _pure

try:
    from gridiron._kernels import _speedups
except ImportError:
    _speedups = None


def make_intervals(n, horizon, seed):
    rng = random.Random(seed)
    creates = array("q")
    deletes = array("q")
    for _ in range(n):
        c = rng.randint(0, horizon - 1)
        creates.append(c)
        deletes.append(c + rng.randint(1, horizon // 4))
    order = sorted(range(n), key=lambda i: creates[i])
    return (array("q", (creates[i] for i in order)),
            array("q", (deletes[i] for i in order)))


def make_deltas(creates, deletes):
    ticks = array("q")
    values = array("d")
    for c, d in zip(creates, deletes):
        ticks.append(c)
        values.append(2.0)
        ticks.append(d)
        values.append(-2.0)
    return ticks, values


def best_of(repeat, fn, *args):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--vms", type=int, default=200_000)
    parser.add_argument("--horizon", type=int, default=8640)
    parser.add_argument("--cap", type=int, default=30)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    creates, deletes = make_intervals(args.vms, args.horizon, args.seed)
    ticks, values = make_deltas(creates, deletes)

    cases = [
        ("peak_alive", lambda impl: (impl.peak_alive, creates, deletes)),
        ("rolling_split", lambda impl: (impl.rolling_split, creates, deletes,
                                        args.cap)),
        ("tick_deltas_to_series", lambda impl: (impl.tick_deltas_to_series,
                                                ticks, values,
                                                args.horizon + 1)),
    ]

    print(f"{args.vms} intervals, horizon {args.horizon}, cap {args.cap}, "
          f"best of {args.repeat}")
    header = f"{'kernel':<24} {'pure (s)':>10} {'compiled (s)':>13} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, setup in cases:
        fn, *fargs = setup(_pure)
        pure_t, pure_out = best_of(args.repeat, fn, *fargs)
        if _speedups is None:
            print(f"{name:<24} {pure_t:>10.4f} {'(not built)':>13} {'-':>8}")
            continue
        fn, *fargs = setup(_speedups)
        fast_t, fast_out = best_of(args.repeat, fn, *fargs)
        if pure_out != fast_out:
            raise SystemExit(f"{name}: implementations disagree")
        print(f"{name:<24} {pure_t:>10.4f} {fast_t:>13.4f} "
              f"{pure_t / fast_t:>7.1f}x")


if __name__ == "__main__":
    main()
