"""Numba and numpy kernel backends must agree on identical inputs."""

import importlib

import numpy as np
import pytest

from sospdiff._accel import kernels_numpy

try:
    from sospdiff._accel import kernels_numba

    BACKENDS = [("numpy", kernels_numpy), ("numba", kernels_numba)]
except ImportError:  # pragma: no cover
    kernels_numba = None
    BACKENDS = [("numpy", kernels_numpy)]


def random_packed_family(rng, n_polys=3, nvars=3, max_terms=6, max_e=4):
    exps, coeffs, offsets = [], [], [0]
    for _ in range(n_polys):
        t = rng.integers(1, max_terms + 1)
        exps.append(rng.integers(0, max_e + 1, size=(t, nvars)))
        coeffs.append(rng.normal(size=t))
        offsets.append(offsets[-1] + t)
    return (
        np.concatenate(exps).astype(np.int64),
        np.concatenate(coeffs),
        np.array(offsets, dtype=np.int64),
    )


@pytest.fixture(scope="module")
def rng():
    return np.random.default_rng(123)


def test_backend_dispatch_valid():
    import sospdiff._accel as accel

    assert accel.BACKEND in ("numba", "numpy")


@pytest.mark.skipif(kernels_numba is None, reason="numba unavailable")
class TestBackendAgreement:
    def test_eval_poly(self, rng):
        exps = rng.integers(0, 5, size=(7, 3)).astype(np.int64)
        coeffs = rng.normal(size=7)
        pts = rng.uniform(-2, 2, size=(40, 3))
        a = kernels_numpy.eval_poly(pts, exps, coeffs)
        b = kernels_numba.eval_poly(pts, exps, coeffs)
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)

    def test_eval_poly_min(self, rng):
        exps, coeffs, offsets = random_packed_family(rng)
        pts = rng.uniform(-1.5, 1.5, size=(60, 3))
        a = kernels_numpy.eval_poly_min(pts, exps, coeffs, offsets)
        b = kernels_numba.eval_poly_min(pts, exps, coeffs, offsets)
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)

    def test_soundness_scan(self, rng):
        a_exps, a_coeffs, a_off = random_packed_family(rng, n_polys=2, nvars=2)
        # include a generous constant so some points are inside
        a_coeffs[0] = abs(a_coeffs[0]) + 3.0
        c_exps, c_coeffs, c_off = random_packed_family(rng, n_polys=1, nvars=2)
        pts = rng.uniform(-1, 1, size=(50, 2))
        z = rng.uniform(-0.2, 0.2, size=(20, 2))
        out_np = kernels_numpy.soundness_scan(
            pts, a_exps, a_coeffs, a_off, c_exps, c_coeffs, c_off, z
        )
        out_nb = kernels_numba.soundness_scan(
            pts, a_exps, a_coeffs, a_off, c_exps, c_coeffs, c_off, z
        )
        np.testing.assert_array_equal(out_np[0], out_nb[0])
        np.testing.assert_array_equal(out_np[1], out_nb[1])
        # margins agree exactly where the scan must be exact (in-C points)
        mask = out_np[0]
        np.testing.assert_allclose(out_np[2][mask], out_nb[2][mask], rtol=1e-13)

    def _random_block(self, rng, dim=8, m=12, nnz=30):
        rr = rng.integers(0, dim, size=nnz)
        cc = rng.integers(0, dim, size=nnz)
        swap = rr > cc
        rr[swap], cc[swap] = cc[swap], rr[swap]
        rows = rng.integers(0, m, size=nnz)
        vv = rng.normal(size=nnz)
        order = np.lexsort((cc, rr, rows))
        rows, rr, cc, vv = rows[order], rr[order], cc[order], vv[order]
        wv = vv * np.where(rr == cc, 1.0, 2.0)
        present, start = np.unique(rows, return_index=True)
        row_ptr = np.append(start, nnz)
        G = rng.normal(size=(dim, dim))
        W = G @ G.T + dim * np.eye(dim)
        return (
            rows.astype(np.int64),
            rr.astype(np.int64),
            cc.astype(np.int64),
            vv,
            wv,
            present.astype(np.int64),
            row_ptr.astype(np.int64),
            W,
            m,
        )

    def test_schur_block_upper_triangle(self, rng):
        rows, rr, cc, vv, wv, present, row_ptr, W, m = self._random_block(rng)
        M1 = np.zeros((m, m))
        M2 = np.zeros((m, m))
        kernels_numpy.schur_block(M1, present, row_ptr, rows, rr, cc, wv, W)
        kernels_numba.schur_block(M2, present, row_ptr, rows, rr, cc, wv, W)
        iu = np.triu_indices(m)
        np.testing.assert_allclose(M1[iu], M2[iu], rtol=1e-11, atol=1e-11)

    def test_schur_block_matches_dense_oracle(self, rng):
        rows, rr, cc, vv, wv, present, row_ptr, W, m = self._random_block(
            rng, dim=5, m=6, nnz=12
        )
        dense = [np.zeros((5, 5)) for _ in range(m)]
        for t in range(rows.shape[0]):
            dense[rows[t]][rr[t], cc[t]] += vv[t]
            if rr[t] != cc[t]:
                dense[rows[t]][cc[t], rr[t]] += vv[t]
        M = np.zeros((m, m))
        kernels_numpy.schur_block(M, present, row_ptr, rows, rr, cc, wv, W)
        for i in range(m):
            for j in range(i, m):
                oracle = np.trace(dense[i] @ W @ dense[j] @ W)
                assert M[i, j] == pytest.approx(oracle, rel=1e-10, abs=1e-10)

    def test_apply_and_adjoint(self, rng):
        rows, rr, cc, vv, wv, present, row_ptr, W, m = self._random_block(rng)
        X = W.copy()
        a1 = kernels_numpy.apply_constraints(rows, rr, cc, wv, X, m)
        a2 = kernels_numba.apply_constraints(rows, rr, cc, wv, X, m)
        np.testing.assert_allclose(a1, a2, rtol=1e-13)
        y = rng.normal(size=m)
        b1 = kernels_numpy.adjoint_constraints(rows, rr, cc, vv, y, X.shape[0])
        b2 = kernels_numba.adjoint_constraints(rows, rr, cc, vv, y, X.shape[0])
        np.testing.assert_allclose(b1, b2, rtol=1e-13)
        np.testing.assert_allclose(b1, b1.T)

    def test_apply_adjoint_duality(self, rng):
        # <A(X), y> must equal <X, A*(y)>.
        rows, rr, cc, vv, wv, present, row_ptr, W, m = self._random_block(rng)
        X = W.copy()
        y = rng.normal(size=m)
        lhs = kernels_numpy.apply_constraints(rows, rr, cc, wv, X, m) @ y
        rhs = np.tensordot(X, kernels_numpy.adjoint_constraints(rows, rr, cc, vv, y, X.shape[0]))
        assert lhs == pytest.approx(rhs, rel=1e-12)
