"""Pure-numpy reference implementations of the hot kernels.

Semantics are the contract; kernels_numba must match these bit-for-bit on
the same inputs up to float addition order.

Packed polynomial convention: a family of k polynomials over n variables is
(exps (t, n) int64, coeffs (t,) float64, offsets (k+1,) int64) where the
rows offsets[p]:offsets[p+1] belong to polynomial p.

Sparse symmetric constraint convention: triplets (rows, rr, cc, vv) with
rr <= cc describe per-row matrices A_i holding vv at (rr, cc) and (cc, rr).
The weighted value wv = vv * (2 - (rr == cc)) folds the off-diagonal
double count so that <A_i, X> = sum of wv * X[rr, cc] over row i's triplets.
"""

from __future__ import annotations

import numpy as np


def eval_poly(pts: np.ndarray, exps: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Evaluate one polynomial at each point; pts is (N, n)."""
    vals = np.zeros(pts.shape[0])
    for t in range(coeffs.shape[0]):
        term = np.full(pts.shape[0], coeffs[t])
        for k in range(exps.shape[1]):
            e = exps[t, k]
            if e:
                term *= pts[:, k] ** e
        vals += term
    return vals


def eval_poly_min(
    pts: np.ndarray, exps: np.ndarray, coeffs: np.ndarray, offsets: np.ndarray
) -> np.ndarray:
    """Pointwise min over a packed family of polynomials."""
    best = np.full(pts.shape[0], np.inf)
    for p in range(offsets.shape[0] - 1):
        sl = slice(offsets[p], offsets[p + 1])
        np.minimum(best, eval_poly(pts, exps[sl], coeffs[sl]), out=best)
    return best


def soundness_scan(
    pts: np.ndarray,
    a_exps: np.ndarray,
    a_coeffs: np.ndarray,
    a_offsets: np.ndarray,
    c_exps: np.ndarray,
    c_coeffs: np.ndarray,
    c_offsets: np.ndarray,
    z_pool: np.ndarray,
):
    """Scan grid points against the z-sample pool.

    Returns (in_c, in_brute, margins) where margins[p] is the worst
    min_i a_i(x_p + z) over the pool, computed exactly for points with
    min_i c_i >= 0 and only up to sign for the remaining candidates.
    Points in neither candidate class keep margin +inf.
    """
    n_pts = pts.shape[0]
    cmin = eval_poly_min(pts, c_exps, c_coeffs, c_offsets)
    in_c = cmin >= 0.0
    amin_at_x = eval_poly_min(pts, a_exps, a_coeffs, a_offsets)
    in_a = amin_at_x >= 0.0
    candidates = in_c | in_a
    margins = np.full(n_pts, np.inf)
    idx = np.nonzero(candidates)[0]
    if idx.shape[0]:
        sub = pts[idx]
        m = np.full(idx.shape[0], np.inf)
        for zi in range(z_pool.shape[0]):
            vals = eval_poly_min(sub + z_pool[zi], a_exps, a_coeffs, a_offsets)
            np.minimum(m, vals, out=m)
        margins[idx] = m
    in_brute = in_a & (margins >= 0.0)
    return in_c, in_brute, margins


def schur_block(
    M: np.ndarray,
    present_rows: np.ndarray,
    row_ptr: np.ndarray,
    trip_rows: np.ndarray,
    rr: np.ndarray,
    cc: np.ndarray,
    wv: np.ndarray,
    W: np.ndarray,
) -> None:
    """Accumulate tr(A_i W A_j W) for one PSD block into M.

    present_rows lists the distinct constraint rows with entries in this
    block; row_ptr groups the triplet arrays (trip_rows, rr, cc, wv) by
    those rows.  The upper triangle of M is guaranteed correct afterwards
    (this implementation happens to fill both triangles).
    """
    for ia in range(present_rows.shape[0]):
        sl = slice(row_ptr[ia], row_ptr[ia + 1])
        scaled = W[:, rr[sl]] * wv[sl]
        P = scaled @ W[:, cc[sl]].T
        U = 0.5 * (P + P.T)
        vals = wv * U[rr, cc]
        contrib = np.bincount(trip_rows, weights=vals, minlength=M.shape[0])
        M[present_rows[ia]] += contrib


def apply_constraints(
    rows: np.ndarray,
    rr: np.ndarray,
    cc: np.ndarray,
    wv: np.ndarray,
    X: np.ndarray,
    m: int,
) -> np.ndarray:
    """out[i] = <A_i, X> for one block."""
    return np.bincount(rows, weights=wv * X[rr, cc], minlength=m)


def adjoint_constraints(
    rows: np.ndarray,
    rr: np.ndarray,
    cc: np.ndarray,
    vv: np.ndarray,
    y: np.ndarray,
    dim: int,
) -> np.ndarray:
    """sum_i y_i A_i for one block, as a dense symmetric matrix."""
    out = np.zeros((dim, dim))
    vals = vv * y[rows]
    np.add.at(out, (rr, cc), vals)
    off = rr != cc
    np.add.at(out, (cc[off], rr[off]), vals[off])
    return out
