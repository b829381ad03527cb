"""Numba-compiled hot loops; same contracts as kernels_numpy.

Polynomial evaluation precomputes per-variable power tables instead of
calling pow term by term, which is what makes the grid scans cheap.

schur_block here fills only the upper triangle (i <= j); the solver mirrors
it afterwards, which also holds for the numpy variant (its lower triangle
is simply already correct before mirroring).
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _fill_powers(x, pw, max_e):
    for k in range(x.shape[0]):
        pw[k, 0] = 1.0
        v = x[k]
        for d in range(1, max_e + 1):
            pw[k, d] = pw[k, d - 1] * v


@njit(cache=True, inline="always")
def _eval_tabled(pw, exps, coeffs, lo, hi):
    v = 0.0
    for t in range(lo, hi):
        term = coeffs[t]
        for k in range(exps.shape[1]):
            e = exps[t, k]
            if e:
                term *= pw[k, e]
        v += term
    return v


@njit(cache=True, inline="always")
def _eval_min_tabled(pw, exps, coeffs, offsets):
    best = np.inf
    for p in range(offsets.shape[0] - 1):
        v = _eval_tabled(pw, exps, coeffs, offsets[p], offsets[p + 1])
        if v < best:
            best = v
    return best


@njit(cache=True)
def eval_poly(pts, exps, coeffs):
    n_pts = pts.shape[0]
    out = np.empty(n_pts)
    max_e = int(exps.max()) if exps.size else 0
    pw = np.empty((pts.shape[1], max_e + 1))
    for i in range(n_pts):
        _fill_powers(pts[i], pw, max_e)
        out[i] = _eval_tabled(pw, exps, coeffs, 0, coeffs.shape[0])
    return out


@njit(cache=True)
def eval_poly_min(pts, exps, coeffs, offsets):
    n_pts = pts.shape[0]
    out = np.empty(n_pts)
    max_e = int(exps.max()) if exps.size else 0
    pw = np.empty((pts.shape[1], max_e + 1))
    for i in range(n_pts):
        _fill_powers(pts[i], pw, max_e)
        out[i] = _eval_min_tabled(pw, exps, coeffs, offsets)
    return out


@njit(cache=True)
def soundness_scan(
    pts, a_exps, a_coeffs, a_offsets, c_exps, c_coeffs, c_offsets, z_pool
):
    n_pts = pts.shape[0]
    n_dim = pts.shape[1]
    n_z = z_pool.shape[0]
    in_c = np.zeros(n_pts, dtype=np.bool_)
    in_brute = np.zeros(n_pts, dtype=np.bool_)
    margins = np.full(n_pts, np.inf)
    max_ea = int(a_exps.max()) if a_exps.size else 0
    max_ec = int(c_exps.max()) if c_exps.size else 0
    max_e = max(max_ea, max_ec)
    pw = np.empty((n_dim, max_e + 1))
    xz = np.empty(n_dim)
    for i in range(n_pts):
        x = pts[i]
        _fill_powers(x, pw, max_e)
        cmin = _eval_min_tabled(pw, c_exps, c_coeffs, c_offsets)
        inside_c = cmin >= 0.0
        inside_a = _eval_min_tabled(pw, a_exps, a_coeffs, a_offsets) >= 0.0
        if not (inside_c or inside_a):
            continue
        in_c[i] = inside_c
        m = np.inf
        for zi in range(n_z):
            for k in range(n_dim):
                xz[k] = x[k] + z_pool[zi, k]
            _fill_powers(xz, pw, max_ea)
            v = _eval_min_tabled(pw, a_exps, a_coeffs, a_offsets)
            if v < m:
                m = v
                if m < 0.0 and not inside_c:
                    break  # brute membership already settled, margin unused
        margins[i] = m
        if inside_a and m >= 0.0:
            in_brute[i] = True
    return in_c, in_brute, margins


@njit(cache=True, fastmath=True)
def schur_block(M, present_rows, row_ptr, trip_rows, rr, cc, wv, W):
    # Outer loops over row pairs so each triplet tile is streamed once per
    # pair, not once per entry; W rows stay cache resident.  The outer tile
    # is unrolled by two for instruction-level parallelism on the gathers.
    n_rows = present_rows.shape[0]
    for ia in range(n_rows):
        i = present_rows[ia]
        lo_i = row_ptr[ia]
        hi_i = row_ptr[ia + 1]
        for jb in range(ia, n_rows):
            lo_j = row_ptr[jb]
            hi_j = row_ptr[jb + 1]
            total = 0.0
            t = lo_i
            while t + 1 < hi_i:
                ra = rr[t]
                ca = cc[t]
                rb = rr[t + 1]
                cb = cc[t + 1]
                Wra = W[ra]
                Wca = W[ca]
                Wrb = W[rb]
                Wcb = W[cb]
                acc_a = 0.0
                acc_b = 0.0
                for t2 in range(lo_j, hi_j):
                    r2 = rr[t2]
                    c2 = cc[t2]
                    w2 = wv[t2]
                    acc_a += w2 * (Wra[r2] * Wca[c2] + Wra[c2] * Wca[r2])
                    acc_b += w2 * (Wrb[r2] * Wcb[c2] + Wrb[c2] * Wcb[r2])
                total += wv[t] * acc_a + wv[t + 1] * acc_b
                t += 2
            if t < hi_i:
                r = rr[t]
                c = cc[t]
                Wr = W[r]
                Wc = W[c]
                acc = 0.0
                for t2 in range(lo_j, hi_j):
                    r2 = rr[t2]
                    c2 = cc[t2]
                    acc += wv[t2] * (Wr[r2] * Wc[c2] + Wr[c2] * Wc[r2])
                total += wv[t] * acc
            M[i, present_rows[jb]] += 0.5 * total


@njit(cache=True)
def apply_constraints(rows, rr, cc, wv, X, m):
    out = np.zeros(m)
    for t in range(rows.shape[0]):
        out[rows[t]] += wv[t] * X[rr[t], cc[t]]
    return out


@njit(cache=True)
def adjoint_constraints(rows, rr, cc, vv, y, dim):
    out = np.zeros((dim, dim))
    for t in range(rows.shape[0]):
        val = vv[t] * y[rows[t]]
        r = rr[t]
        c = cc[t]
        out[r, c] += val
        if r != c:
            out[c, r] += val
    return out
