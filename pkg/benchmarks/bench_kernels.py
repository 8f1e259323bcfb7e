#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback lane.

Times the hot per-step operations on a representative masked ball grid.
The numpy lane is what you get with ACFLOW_NUMBA=0; here both lanes are
timed in-process by calling the implementations directly.
"""
import argparse
import time

import numpy as np

from acflow import _kernels as K
from acflow.field import build_grid
from acflow.potential import make_triangle_potential


def time_it(fn, reps):
    fn()                      # warm up (jit compile on the numba lane)
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps * 1e3


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--R", type=float, default=8.0)
    ap.add_argument("--h", type=float, default=0.1)
    ap.add_argument("--reps", type=int, default=100)
    args = ap.parse_args()

    spec = make_triangle_potential()
    grid = build_grid(2, args.R, args.h)
    rng = np.random.default_rng(0)
    vals = rng.standard_normal((grid.num_nodes, 2)) * 0.4
    nbc = grid.neighbors_clamped
    inv_h2 = 1.0 / (grid.h * grid.h)
    pts = grid.coords * 0.5 + 0.01
    lo = grid.box_lo.astype(float)

    cases = {
        "laplacian": (
            lambda: K.laplacian_np(vals, nbc, inv_h2),
            lambda: K.laplacian_nb(vals, nbc, inv_h2) if K._HAVE_NUMBA else None),
        "flow_step": (
            lambda: K.flow_step_np(vals, nbc, spec.exps, spec.coeffs, 1e-3,
                                   inv_h2, spec.M),
            lambda: K.flow_step_nb(vals, nbc, spec.exps, spec.coeffs, 1e-3,
                                   inv_h2, spec.M) if K._HAVE_NUMBA else None),
        "energy_parts": (
            lambda: K.energy_parts_np(vals, nbc, spec.exps, spec.coeffs, inv_h2),
            lambda: K.energy_parts_nb(vals, nbc, spec.exps, spec.coeffs,
                                      inv_h2) if K._HAVE_NUMBA else None),
        "residual_inf": (
            lambda: K.residual_inf_np(vals, nbc, spec.exps, spec.coeffs, inv_h2),
            lambda: K.residual_inf_nb(vals, nbc, spec.exps, spec.coeffs,
                                      inv_h2) if K._HAVE_NUMBA else None),
        "interp": (
            lambda: K.interp_np(vals, pts, grid.idmap, grid.box_shape, lo, grid.h),
            lambda: K.interp_nb(vals, pts, grid.idmap, grid.box_shape, lo,
                                grid.h) if K._HAVE_NUMBA else None),
    }

    print(f"grid: R={args.R} h={args.h} nodes={grid.num_nodes} "
          f"(numba lane {'available' if K._HAVE_NUMBA else 'NOT available'})")
    print(f"{'kernel':<14} {'numpy ms':>10} {'numba ms':>10} {'speedup':>9}")
    for name, (np_fn, nb_fn) in cases.items():
        t_np = time_it(np_fn, args.reps)
        if K._HAVE_NUMBA:
            t_nb = time_it(nb_fn, args.reps)
            print(f"{name:<14} {t_np:>10.3f} {t_nb:>10.3f} {t_np / t_nb:>8.1f}x")
        else:
            print(f"{name:<14} {t_np:>10.3f} {'-':>10} {'-':>9}")

    # numerical agreement between the lanes
    a, _, pa = K.flow_step_np(vals, nbc, spec.exps, spec.coeffs, 1e-3, inv_h2, spec.M)
    if K._HAVE_NUMBA:
        b, _, pb = K.flow_step_nb(vals, nbc, spec.exps, spec.coeffs, 1e-3,
                                  inv_h2, spec.M)
        print(f"\nlane agreement: step {np.max(np.abs(a - b)):.2e}, "
              f"energy {abs(pa.sum() - pb.sum()):.2e}")


if __name__ == "__main__":
    main()
