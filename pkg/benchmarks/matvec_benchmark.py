"""Benchmark the banded matvec: numba kernel against the numpy gather path.

Run from a checkout:

    python3 benchmarks/matvec_benchmark.py --N 4096 --W 64 --reps 30

The numba backend honors BANDLAB_NUMBA=0, in which case both columns report
the numpy path (the comparison is then a no-op by construction).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from bandlab.ensemble import EntryDistribution, sample_matrix
from bandlab.kernels import NUMBA_OK, backend_name, gather_matvec, gather_matvec_numpy
from bandlab.lattice import build_profile


def _time(fn, reps):
    best = float("inf")
    for _ in range(reps):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench(d, N, W, reps, seed):
    profile = build_profile(d, N, W, "box")
    dist = EntryDistribution(kind="gaussian", complex_entries=True)
    sample = sample_matrix(profile, dist, seed)
    values, perm = sample.gather_tables()
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal(sample.size) + 1j * rng.standard_normal(sample.size)
    out = np.empty_like(psi)

    gather_matvec(values, perm, psi, out)        # compile before timing
    t_backend = _time(lambda: gather_matvec(values, perm, psi, out), reps)
    t_numpy = _time(lambda: gather_matvec_numpy(values, perm, psi), reps)

    diff = float(np.abs(gather_matvec(values, perm, psi)
                        - gather_matvec_numpy(values, perm, psi)).max())
    size = sample.size
    n_off = values.shape[0]
    flops = 8.0 * n_off * size          # complex multiply-add per entry
    print(f"d={d} N={N} W={W}: {n_off} offsets x {size} sites, "
          f"backend={backend_name()}")
    print(f"  {'backend':7s} {t_backend * 1e3:9.3f} ms  "
          f"{flops / t_backend / 1e9:7.2f} Gflop/s")
    print(f"  {'numpy':7s} {t_numpy * 1e3:9.3f} ms  "
          f"{flops / t_numpy / 1e9:7.2f} Gflop/s")
    if NUMBA_OK:
        print(f"  speedup x{t_numpy / t_backend:.2f}, max |difference| = {diff:.3e}")
    else:
        print("  numba unavailable or disabled; both rows are the numpy path")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=1)
    ap.add_argument("--N", type=int, default=4096)
    ap.add_argument("--W", type=int, default=64)
    ap.add_argument("--reps", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    bench(args.d, args.N, args.W, args.reps, args.seed)


if __name__ == "__main__":
    main()
