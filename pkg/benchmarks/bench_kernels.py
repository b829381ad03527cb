"""Timing comparison of the numba kernels against the pure-numpy fallback.

Run:  python benchmarks/bench_kernels.py [--quick]

Covers the three hot paths: polynomial field evaluation, the soundness
sampling scan, and Schur complement formation.  The numpy numbers are what
you get with SOSPDIFF_BACKEND=numpy.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from sospdiff._accel import kernels_numpy

try:
    from sospdiff._accel import kernels_numba
except ImportError:
    kernels_numba = None

from sospdiff.objective import box_integral_weights
from sospdiff.pdiff import pack_polys
from sospdiff.polyring import monomial_basis
from sospdiff.semialg import Box, SemiAlgebraicSet, parse_polynomial
from sospdiff.sosprog import assemble


def timer(fn, *args, repeat=3):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_eval(quick: bool):
    bowtie = parse_polynomial("0.1 - x1^4 - x2^4 + 10*x1^2 - x2^2", ["x1", "x2"])
    exps, coeffs, offsets = pack_polys([bowtie])
    n = 200_000 if quick else 1_000_000
    rng = np.random.default_rng(0)
    pts = rng.uniform(-3, 3, size=(n, 2))
    rows = []
    t_np = timer(kernels_numpy.eval_poly_min, pts, exps, coeffs, offsets)
    rows.append(("field evaluation", n, t_np, None))
    if kernels_numba:
        kernels_numba.eval_poly_min(pts[:10], exps, coeffs, offsets)
        t_nb = timer(kernels_numba.eval_poly_min, pts, exps, coeffs, offsets)
        rows[-1] = ("field evaluation", n, t_np, t_nb)
    return rows


def bench_soundness(quick: bool):
    a = parse_polynomial("4 - x1^2 - x2^2", ["x1", "x2"])
    c = parse_polynomial("2.89 - 1.29*x1^2 - 1.29*x2^2", ["x1", "x2"])
    ae, ac, ao = pack_polys([a])
    ce, cc_, co = pack_polys([c])
    res = 100 if quick else 200
    axes = np.linspace(-2.1, 2.1, res)
    xs, ys = np.meshgrid(axes, axes, indexing="ij")
    pts = np.stack([xs.ravel(), ys.ravel()], axis=1)
    rng = np.random.default_rng(1)
    z = rng.uniform(-0.35, 0.35, size=(200 if quick else 1000, 2))
    args = (pts, ae, ac, ao, ce, cc_, co, z)
    rows = []
    t_np = timer(kernels_numpy.soundness_scan, *args, repeat=1)
    rows.append((f"soundness scan {res}^2 x {z.shape[0]}z", pts.shape[0], t_np, None))
    if kernels_numba:
        kernels_numba.soundness_scan(pts[:5], *args[1:])
        t_nb = timer(kernels_numba.soundness_scan, *args)
        rows[-1] = (rows[-1][0], pts.shape[0], t_np, t_nb)
    return rows


def bench_schur(quick: bool):
    deg_c = 6 if quick else 10
    a = parse_polynomial("4 - x1^2 - x2^2", ["x1", "x2"])
    b = parse_polynomial("0.25 - x1^2 - x2^2", ["x1", "x2"])
    B = SemiAlgebraicSet(2, (b,))
    obj = box_integral_weights(
        Box((-1.0, -1.0), (1.0, 1.0)), monomial_basis(2, deg_c)
    )
    prob = assemble(a, B, deg_c, 2, obj)
    blk = prob.blocks[0]
    rng = np.random.default_rng(2)
    G = rng.normal(size=(blk.dim, blk.dim))
    W = G @ G.T + blk.dim * np.eye(blk.dim)
    M = np.zeros((prob.m, prob.m))
    label = f"schur m={prob.m} gram={blk.dim}"

    def run(mod):
        M.fill(0.0)
        mod.schur_block(M, blk.present_rows, blk.row_ptr, blk.rows, blk.rr, blk.cc, blk.wv, W)

    rows = []
    t_np = timer(run, kernels_numpy, repeat=1)
    rows.append((label, prob.m, t_np, None))
    if kernels_numba:
        run(kernels_numba)
        t_nb = timer(run, kernels_numba)
        rows[-1] = (label, prob.m, t_np, t_nb)
    return rows


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller sizes")
    args = parser.parse_args()

    rows = []
    rows += bench_eval(args.quick)
    rows += bench_soundness(args.quick)
    rows += bench_schur(args.quick)

    print(f"{'kernel':38s} {'n':>9s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for name, n, t_np, t_nb in rows:
        if t_nb is None:
            print(f"{name:38s} {n:9d} {t_np:9.3f}s {'n/a':>10s} {'':>8s}")
        else:
            print(
                f"{name:38s} {n:9d} {t_np:9.3f}s {t_nb:9.3f}s {t_np / t_nb:7.1f}x"
            )
    if kernels_numba is None:
        print("numba not importable; only the numpy fallback was timed")


if __name__ == "__main__":
    main()
