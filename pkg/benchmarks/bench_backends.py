#!/usr/bin/env python3
"""Compare the compiled kernel against the pure-Python fallback.

Both backends produce bit-identical output; this script measures the speed
gap on the two hot loops (game rounds and buffered-tree inserts).

Usage: python benchmarks/bench_backends.py [--rounds N] [--inserts N]
"""

import argparse
import time

import numpy as np

from ballrec._kernel import pure
from ballrec.dists import make_skyscraper, make_uniform
from ballrec.rng import derive_stream

try:
    from ballrec._kernel import _core
except ImportError:
    _core = None


def bench_game(mod, m, n, dist, strat, rounds):
    counts = np.zeros(n, dtype=np.int64)
    counts[0] = m
    picks = np.zeros(n, dtype=np.int64)
    recycled = np.zeros(n, dtype=np.int64)
    batches = np.zeros(32, dtype=np.int64)
    in_l = np.zeros(n, dtype=np.uint8)
    t0 = time.perf_counter()
    mod.run_game(counts, dist.cdf, dist.weights_array, strat, 0, in_l, 0,
                 12345, 0, rounds, 32, picks, recycled, batches)
    return time.perf_counter() - t0


def bench_btree(mod, inserts):
    t0 = time.perf_counter()
    mod.run_btree(2, 2500, 160, inserts, inserts, 0, 0.0, 1000.0,
                  derive_stream(1, 0), derive_stream(1, 1), None)
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rounds", type=int, default=200_000)
    ap.add_argument("--inserts", type=int, default=200_000)
    args = ap.parse_args()

    workloads = [
        ("game fullest-bin m=100 n=10 uniform",
         lambda mod: bench_game(mod, 100, 10, make_uniform(10), 0, args.rounds),
         args.rounds, "rounds"),
        ("game random-ball m=100 n=10 uniform",
         lambda mod: bench_game(mod, 100, 10, make_uniform(10), 2, args.rounds),
         args.rounds, "rounds"),
        ("game least-full m=32 n=1024 skyscraper",
         lambda mod: bench_game(mod, 32, 1024, make_skyscraper(1024), 3,
                                args.rounds // 4),
         args.rounds // 4, "rounds"),
        ("btree random-ball buffer=2500 B=160 uniform keys",
         lambda mod: bench_btree(mod, args.inserts),
         args.inserts, "inserts"),
    ]

    print(f"{'workload':<50} {'pure':>10} {'compiled':>10} {'speedup':>8}")
    for name, fn, units, unit_name in workloads:
        t_pure = fn(pure)
        line = f"{name:<50} {units / t_pure:>8.0f}/s"
        if _core is not None:
            t_core = fn(_core)
            line += f" {units / t_core:>8.0f}/s {t_pure / t_core:>7.1f}x"
        else:
            line += "  (compiled backend unavailable)"
        print(line)


if __name__ == "__main__":
    main()
