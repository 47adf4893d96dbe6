"""Timing comparison of the compiled and numpy lanes of the UCB kernel.

Run as a script:

    python benchmarks/bench_kernels.py [--grid 512] [--ellipsoids 3] [--dim 10]

Both lanes are timed on identical inputs and cross-checked for agreement
first; if the compiled extension is unavailable only the numpy lane runs.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from pricing_lab import kernels
from pricing_lab import _kernels_py

try:
    from pricing_lab import _kernels as _compiled
except ImportError:
    _compiled = None


def make_inputs(d, n_ell, grid, rng):
    cols = np.ascontiguousarray(rng.standard_normal((d, grid)))
    centers = np.ascontiguousarray(rng.standard_normal((n_ell, d)))
    chols = np.empty((n_ell, d, d))
    is_ball = np.zeros(n_ell, dtype=np.uint8)
    for e in range(n_ell):
        a = rng.standard_normal((d, d))
        chols[e] = np.linalg.cholesky(a @ a.T + d * np.eye(d))
    is_ball[-1] = 1
    chols[-1] = np.eye(d)
    radii = np.abs(rng.standard_normal(n_ell)) + 0.1
    return cols, centers, np.ascontiguousarray(chols), radii, is_ball


def bench(fn, args, repeats=200):
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=int, default=512)
    ap.add_argument("--ellipsoids", type=int, default=3)
    ap.add_argument("--dim", type=int, default=10)
    ap.add_argument("--repeats", type=int, default=200)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    inputs = make_inputs(args.dim, args.ellipsoids, args.grid, rng)

    print("active backend: %s" % kernels.BACKEND)
    idx_py, val_py = _kernels_py.ucb_argmax(*inputs)
    t_py = bench(_kernels_py.ucb_argmax, inputs, args.repeats)
    print("numpy lane:    %8.1f us/call  (idx=%d, val=%.12g)"
          % (t_py * 1e6, idx_py, val_py))

    if _compiled is None:
        print("compiled lane: not built")
        return
    idx_c, val_c = _compiled.ucb_argmax(*inputs)
    if idx_c != idx_py or abs(val_c - val_py) > 1e-9 * max(1.0, abs(val_py)):
        raise SystemExit("lane disagreement: py=(%d, %.17g) c=(%d, %.17g)"
                         % (idx_py, val_py, idx_c, val_c))
    t_c = bench(_compiled.ucb_argmax, inputs, args.repeats)
    print("compiled lane: %8.1f us/call  (idx=%d, val=%.12g)"
          % (t_c * 1e6, idx_c, val_c))
    print("speedup: %.2fx" % (t_py / t_c))


if __name__ == "__main__":
    main()
