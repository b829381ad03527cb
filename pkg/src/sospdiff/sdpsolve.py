"""Primal-dual interior-point solver for the assembled coefficient SDPs.

Problem form (see sosprog.SdpProblem):

    minimize    free_cost @ u
    subject to  sum_k <A_{i,k}, X_k> + (F u)_i = rhs_i,   i = 1..m
                X_k  positive semidefinite,  u free.

The method is infeasible-start path following with Nesterov-Todd scaling
and a Mehrotra predictor-corrector step.  Per iteration:

  1. NT scaling per block from Cholesky factors of X and S and one SVD;
     in the scaled frame both variables equal the diagonal of singular
     values, so the linearized complementarity is a cheap Lyapunov solve.
  2. Schur complement M[i,j] = sum_k tr(A_i W_k A_j W_k), built by the
     sparse-triplet kernel; free variables stay in the KKT system and are
     eliminated through the Cholesky factor of M (no PSD splitting).
  3. Predictor, adaptive centering sigma = (mu_aff/mu)^3, corrector with
     the second-order cross term, fraction-to-boundary step.

Certificates of primal infeasibility (a Farkas direction in y) and of
dual infeasibility (an improving primal ray) are tested every iteration,
which is how the infeasible / unbounded statuses are detected.

Determinism: fixed initialization, no randomized pivoting, single threaded;
identical inputs give identical iterates.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg.lapack import dpstrf

from . import _accel
from .semialg import ToleranceSet
from .sosprog import BlockTriplets, SdpProblem

_INFEAS_RATIO = 1e-7
_STALL_LIMIT = 4


@dataclass
class PreprocessRecord:
    """What preprocessing did to the equality rows."""

    m_before: int
    m_after: int
    kept: np.ndarray
    dropped: np.ndarray
    method: str  # "structural" | "factorization"
    inconsistent: bool = False


@dataclass
class SdpSolution:
    free_vars: np.ndarray
    block_matrices: list[np.ndarray]
    dual_vector: np.ndarray
    dual_slacks: list[np.ndarray]
    status: str  # optimal | max-iterations | infeasible-detected | unbounded-detected | numerical-failure
    iterations: int
    final_gap: float
    primal_residual: float
    dual_residual: float
    primal_objective: float
    dual_objective: float
    wall_time: float
    preprocess: PreprocessRecord | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _row_gram(prob: SdpProblem) -> np.ndarray:
    """Gram matrix of the constraint rows under the Frobenius inner product."""
    R = np.zeros((prob.m, prob.m))
    eye_cache = {}
    for blk in prob.blocks:
        if blk.dim not in eye_cache:
            eye_cache[blk.dim] = np.eye(blk.dim)
        _accel.schur_block(
            R, blk.present_rows, blk.row_ptr, blk.rows, blk.rr, blk.cc, blk.wv,
            eye_cache[blk.dim],
        )
    for i in range(1, prob.m):
        R[i, :i] = R[:i, i]
    if prob.n_free:
        R += prob.F @ prob.F.T
    return R


def _structurally_independent(prob: SdpProblem) -> bool:
    """True when every row owns a coordinate no other row touches."""
    owner: dict = {}
    shared: set = set()
    for k, blk in enumerate(prob.blocks):
        for t in range(blk.rows.shape[0]):
            key = (k, int(blk.rr[t]), int(blk.cc[t]))
            row = int(blk.rows[t])
            if key in owner and owner[key] != row:
                shared.add(key)
            owner[key] = row
    private = np.zeros(prob.m, dtype=bool)
    for k, blk in enumerate(prob.blocks):
        for t in range(blk.rows.shape[0]):
            key = (k, int(blk.rr[t]), int(blk.cc[t]))
            if key not in shared:
                private[blk.rows[t]] = True
    if prob.n_free:
        col_rows = [np.nonzero(prob.F[:, c])[0] for c in range(prob.n_free)]
        for rows in col_rows:
            if rows.shape[0] == 1:
                private[rows[0]] = True
    return bool(private.all())


def preprocess(prob: SdpProblem) -> tuple[SdpProblem, PreprocessRecord]:
    """Drop numerically dependent equality rows.

    Rank detection runs a pivoted Cholesky on the row Gram matrix after
    normalizing rows to unit length; a row is dependent when its remaining
    pivot falls below (1e-10)^2, i.e. its residual against the span of the
    kept rows is below 1e-10 times its own norm.  Right-hand sides of
    dropped rows are checked for consistency against the kept combination.

    Rows of the assembled SOS problems each own a private Gram entry, which
    is detected structurally and skips the factorization entirely.
    """
    all_rows = np.arange(prob.m)
    if _structurally_independent(prob):
        rec = PreprocessRecord(prob.m, prob.m, all_rows, np.array([], dtype=int), "structural")
        return prob, rec

    R = _row_gram(prob)
    norms = np.sqrt(np.maximum(np.diag(R), 0.0))
    scale = np.where(norms > 0, norms, 1.0)
    Rn = R / scale[:, None] / scale[None, :]
    c_fact, piv, rank, info = dpstrf(Rn, tol=1e-20, lower=0)
    piv = piv - 1  # LAPACK is 1-based
    kept = np.sort(piv[:rank])
    dropped = np.sort(piv[rank:])

    inconsistent = False
    if dropped.shape[0]:
        kept_perm = piv[:rank]
        U = np.triu(c_fact)[:rank, :rank]
        bn = prob.rhs / scale
        for d in dropped:
            rhsv = Rn[kept_perm, d]
            lam = sla.solve_triangular(
                U, sla.solve_triangular(U, rhsv, trans="T", lower=False), lower=False
            )
            if abs(bn[d] - lam @ bn[kept_perm]) > 1e-8 * (1.0 + np.abs(bn).max()):
                inconsistent = True
                break

    rec = PreprocessRecord(prob.m, kept.shape[0], kept, dropped, "factorization", inconsistent)
    if dropped.shape[0] == 0:
        return prob, rec

    remap = -np.ones(prob.m, dtype=np.int64)
    remap[kept] = np.arange(kept.shape[0])
    new_blocks = []
    for blk in prob.blocks:
        mask = remap[blk.rows] >= 0
        new_blocks.append(
            BlockTriplets(
                blk.dim,
                remap[blk.rows[mask]],
                blk.rr[mask].copy(),
                blk.cc[mask].copy(),
                blk.vv[mask].copy(),
            )
        )
    reduced = SdpProblem(
        m=kept.shape[0],
        blocks=new_blocks,
        gram_blocks=prob.gram_blocks,
        F=prob.F[kept].copy(),
        rhs=prob.rhs[kept].copy(),
        free_cost=prob.free_cost.copy(),
        free_monomials=prob.free_monomials,
        row_monomials=tuple(prob.row_monomials[i] for i in kept) if prob.row_monomials else (),
        meta=dict(prob.meta),
    )
    return reduced, rec


class _NTScaling:
    """Per-block NT scaling data: W = G G^T with G^-1 X G^-T = G^T S G = diag(lam)."""

    __slots__ = ("G", "Ginv", "W", "lam")

    def __init__(self, X: np.ndarray, S: np.ndarray):
        Lx = np.linalg.cholesky(X)
        Ls = np.linalg.cholesky(S)
        U, sig, Vt = np.linalg.svd(Ls.T @ Lx)
        if sig.min() <= 0:
            raise np.linalg.LinAlgError("NT scaling lost positive definiteness")
        V = Vt.T
        isq = 1.0 / np.sqrt(sig)
        self.G = Lx @ (V * isq[None, :])
        Lxinv = sla.solve_triangular(Lx, np.eye(X.shape[0]), lower=True, check_finite=False)
        self.Ginv = (V * np.sqrt(sig)[None, :]).T @ Lxinv
        self.W = self.G @ self.G.T
        self.lam = sig


def _max_step(lam: np.ndarray, delta_scaled: np.ndarray) -> float:
    """Largest alpha with diag(lam) + alpha * delta_scaled >= 0."""
    isq = 1.0 / np.sqrt(lam)
    H = delta_scaled * isq[:, None] * isq[None, :]
    emin = np.linalg.eigvalsh(H)[0]
    if emin >= 0.0:
        return np.inf
    return 1.0 / (-emin)


def solve(
    prob: SdpProblem,
    tol: ToleranceSet | None = None,
    max_iters: int = 200,
    debug: bool = False,
    skip_preprocess: bool = False,
    trace: bool = False,
) -> SdpSolution:
    """Run the interior-point method; never raises on numerical trouble,
    the best iterate comes back with an honest status instead."""
    t0 = time.perf_counter()
    tol = tol or ToleranceSet()
    if skip_preprocess:
        red, rec = prob, PreprocessRecord(
            prob.m, prob.m, np.arange(prob.m), np.array([], dtype=int), "skipped"
        )
    else:
        red, rec = preprocess(prob)
    if rec.inconsistent:
        return SdpSolution(
            free_vars=np.zeros(prob.n_free),
            block_matrices=[np.eye(b.dim) for b in prob.blocks],
            dual_vector=np.zeros(prob.m),
            dual_slacks=[np.eye(b.dim) for b in prob.blocks],
            status="infeasible-detected",
            iterations=0,
            final_gap=np.inf,
            primal_residual=np.inf,
            dual_residual=np.inf,
            primal_objective=np.nan,
            dual_objective=np.nan,
            wall_time=time.perf_counter() - t0,
            preprocess=rec,
        )

    m = red.m
    nf = red.n_free

    # Row equilibration: scale every equality to unit Frobenius norm.  The
    # primal is unchanged; duals are mapped back on exit.  This keeps the
    # Schur complement well conditioned far longer as mu shrinks.
    fro2 = np.zeros(m)
    for blk in red.blocks:
        fro2 += np.bincount(blk.rows, weights=blk.wv * blk.vv, minlength=m)
    if nf:
        fro2 += (red.F**2).sum(axis=1)
    row_scale = np.sqrt(np.maximum(fro2, 1e-300))
    row_scale = np.where(row_scale > 0, row_scale, 1.0)
    blocks_s = []
    for blk in red.blocks:
        blocks_s.append(
            BlockTriplets(
                blk.dim,
                blk.rows.copy(),
                blk.rr.copy(),
                blk.cc.copy(),
                blk.vv / row_scale[blk.rows],
            )
        )
    F_s = red.F / row_scale[:, None] if nf else red.F
    b = red.rhs / row_scale
    cu = red.free_cost
    dims = red.block_dims
    total_dim = sum(dims)
    norm_b = 1.0 + np.abs(b).max(initial=0.0)
    norm_c = 1.0 + (np.abs(cu).max() if nf else 0.0)
    max_row_norm = 1.0

    # A deliberately generous cold start: keeping the first iterates deep in
    # the cone lets the path approach degenerate optimal faces centrally
    # instead of stalling against them.
    xi_p = 100.0 * max(
        10.0, np.sqrt(max(dims, default=1)), np.abs(b).max(initial=0.0) / max_row_norm
    )
    xi_d = 100.0 * max(10.0, np.sqrt(max(dims, default=1)), norm_c)

    X = [xi_p * np.eye(d) for d in dims]
    S = [xi_d * np.eye(d) for d in dims]
    y = np.zeros(m)
    u = np.zeros(nf)

    M = np.empty((m, m))
    best = None
    best_score = np.inf
    status = "max-iterations"
    iterations = 0
    stalls = 0
    no_improve = 0
    feas_p = feas_d = rel_gap = np.inf

    def apply_all(mats: list[np.ndarray]) -> np.ndarray:
        out = np.zeros(m)
        for blk, Xk in zip(blocks_s, mats):
            out += _accel.apply_constraints(blk.rows, blk.rr, blk.cc, blk.wv, Xk, m)
        return out

    def adjoint_all(vec: np.ndarray) -> list[np.ndarray]:
        return [
            _accel.adjoint_constraints(blk.rows, blk.rr, blk.cc, blk.vv, vec, blk.dim)
            for blk in blocks_s
        ]

    for it in range(max_iters):
        iterations = it
        AX = apply_all(X)
        Fu = F_s @ u if nf else 0.0
        r_p = b - AX - Fu
        ATy = adjoint_all(y)
        R_d = [-Sk - Ak for Sk, Ak in zip(S, ATy)]
        r_f = cu - F_s.T @ y if nf else np.zeros(0)
        pobj = float(cu @ u) if nf else 0.0
        dobj = float(b @ y)
        mu = sum(np.tensordot(Xk, Sk) for Xk, Sk in zip(X, S)) / max(total_dim, 1)

        feas_p = np.abs(r_p).max(initial=0.0) / norm_b
        feas_d = max(
            max((np.abs(Rk).max(initial=0.0) for Rk in R_d), default=0.0),
            np.abs(r_f).max(initial=0.0),
        ) / norm_c
        rel_gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        mu_rel = mu * total_dim / (1.0 + abs(pobj) + abs(dobj))

        if debug and feas_p < 1e-6 and feas_d < 1e-6:
            scale = 1.0 + abs(pobj) + abs(dobj)
            assert pobj - dobj >= -mu * total_dim - 1e-6 * scale, (
                "weak duality violated beyond numerical slack"
            )

        if trace:
            extra = getattr(solve, "_trace_extra", "")
            print(
                f"  it={it:3d} mu={mu:9.2e} feas_p={feas_p:8.1e} "
                f"feas_d={feas_d:8.1e} gap={rel_gap:8.1e} pobj={pobj:+.8e}{extra}"
            )

        score = max(feas_p, feas_d, min(rel_gap, mu_rel))
        if score < best_score:
            best_score = score
            no_improve = 0
            best = ([Xk.copy() for Xk in X], [Sk.copy() for Sk in S], y.copy(), u.copy(),
                    pobj, dobj, feas_p, feas_d, rel_gap)
        else:
            no_improve += 1
            # Degenerate optimal faces stall here; the endgame can also blow
            # up outright once the Schur system is beyond double precision.
            diverged = feas_p > max(100.0 * best_score, 1e-5) and best_score < 1e-6
            if no_improve >= 6 or diverged:
                status = "numerical-failure" if best_score > 1e-4 else "max-iterations"
                break

        # Feasibility thresholds stay at 1e-8 relative regardless of the gap
        # tolerance; sdp_gap only governs the duality-gap part of the test.
        if feas_p <= 1e-8 and feas_d <= 1e-8 and (
            rel_gap <= tol.sdp_gap or mu_rel <= tol.sdp_gap
        ):
            status = "optimal"
            break

        # Farkas certificate for primal infeasibility: A*(y) <= 0, F^T y = 0, b@y > 0.
        ynorm = np.linalg.norm(y)
        if it >= 3 and ynorm > 0:
            yhat = y / ynorm
            pos = b @ yhat
            if pos > 1e-10 * norm_b:
                dres = max(
                    (np.linalg.eigvalsh(Ak).max() for Ak in adjoint_all(yhat)),
                    default=0.0,
                )
                fres = np.abs(F_s.T @ yhat).max(initial=0.0) if nf else 0.0
                if max(dres, fres, 0.0) <= _INFEAS_RATIO * pos:
                    status = "infeasible-detected"
                    break
        # Improving ray for dual infeasibility (primal unbounded).
        if it >= 3 and nf:
            xnorm = max(np.linalg.norm(u), max(np.linalg.norm(Xk) for Xk in X))
            if xnorm > 0:
                negcost = (cu @ u) / xnorm
                if negcost < -1e-10 * norm_c:
                    pres = np.abs(AX / xnorm + (F_s @ (u / xnorm))).max(initial=0.0)
                    if pres <= _INFEAS_RATIO * (-negcost):
                        status = "unbounded-detected"
                        break

        try:
            nt = [_NTScaling(Xk, Sk) for Xk, Sk in zip(X, S)]
        except np.linalg.LinAlgError:
            status = "numerical-failure"
            break

        M.fill(0.0)
        for blk, sc in zip(blocks_s, nt):
            _accel.schur_block(
                M, blk.present_rows, blk.row_ptr, blk.rows, blk.rr, blk.cc, blk.wv, sc.W
            )
        for i in range(1, m):
            M[i, :i] = M[:i, i]

        chof = None
        reg = 0.0
        diag_scale = max(M.diagonal().max(initial=0.0), 1e-300)
        while chof is None:
            try:
                Mwork = M if reg == 0.0 else M + reg * diag_scale * np.eye(m)
                chof = sla.cho_factor(Mwork, lower=True, check_finite=False)
            except np.linalg.LinAlgError:
                reg = 1e-12 if reg == 0.0 else reg * 100.0
                if reg > 1e-4:
                    break
        if chof is None:
            status = "numerical-failure"
            break

        if nf:
            Z = sla.cho_solve(chof, F_s, check_finite=False)
            Mf = F_s.T @ Z
            try:
                chMf = sla.cho_factor(Mf, lower=True, check_finite=False)
            except np.linalg.LinAlgError:
                status = "numerical-failure"
                break

        def solve_aug_once(R1, R2):
            t1 = sla.cho_solve(chof, R1, check_finite=False)
            if not nf:
                return t1, np.zeros(0)
            du = sla.cho_solve(chMf, F_s.T @ t1 - R2, check_finite=False)
            return t1 - Z @ du, du

        def solve_aug(R1, R2):
            # Iterative refinement recovers the accuracy the ill-conditioned
            # Schur factorization loses as mu -> 0; stop once the augmented
            # residual is at rounding level or it no longer shrinks.
            dy_acc, du_acc = solve_aug_once(R1, R2)
            scale_r = max(np.abs(R1).max(initial=0.0), np.abs(R2).max(initial=0.0), 1e-300)
            prev = np.inf
            for _ in range(4):
                rho1 = R1 - M @ dy_acc
                if nf:
                    rho1 -= F_s @ du_acc
                    rho2 = R2 - F_s.T @ dy_acc
                else:
                    rho2 = R2
                res = max(np.abs(rho1).max(initial=0.0), np.abs(rho2).max(initial=0.0))
                if res <= 1e-15 * scale_r or res >= 0.5 * prev:
                    break
                prev = res
                e1, e2 = solve_aug_once(rho1, rho2)
                dy_acc = dy_acc + e1
                du_acc = du_acc + e2
            return dy_acc, du_acc

        WRdW = [sc.W @ Rk @ sc.W for sc, Rk in zip(nt, R_d)]
        A_wrdw = apply_all(WRdW)
        bf = b - (F_s @ u if nf else 0.0)

        # Predictor (affine scaling): scaled target D = -Lambda, so G D G^T = -X.
        dy_a, du_a = solve_aug(bf + A_wrdw, r_f)
        ATdy_a = adjoint_all(dy_a)
        dS_a = [Rk - Ak for Rk, Ak in zip(R_d, ATdy_a)]
        dX_a = [-Xk - sc.W @ dSk @ sc.W for Xk, sc, dSk in zip(X, nt, dS_a)]

        ap = ad = 1.0
        dXh_a, dSh_a = [], []
        for sc, dXk, dSk in zip(nt, dX_a, dS_a):
            dxh = sc.Ginv @ dXk @ sc.Ginv.T
            dsh = sc.G.T @ dSk @ sc.G
            dXh_a.append(dxh)
            dSh_a.append(dsh)
            ap = min(ap, _max_step(sc.lam, dxh))
            ad = min(ad, _max_step(sc.lam, dsh))

        mu_aff = sum(
            np.tensordot(Xk + ap * dXk, Sk + ad * dSk)
            for Xk, dXk, Sk, dSk in zip(X, dX_a, S, dS_a)
        ) / max(total_dim, 1)
        mu_aff = max(mu_aff, 0.0)
        sigma = min(1.0, max((mu_aff / mu) ** 3 if mu > 0 else 0.0, 1e-10))

        # Corrector with the second-order cross term in the scaled frame.
        R1 = bf - AX + A_wrdw
        GDGt_all = []
        for blk, sc, dxh, dsh in zip(blocks_s, nt, dXh_a, dSh_a):
            cross = dxh @ dsh
            Tmat = -0.5 * (cross + cross.T)
            np.fill_diagonal(Tmat, Tmat.diagonal() + sigma * mu - sc.lam**2)
            D = 2.0 * Tmat / (sc.lam[:, None] + sc.lam[None, :])
            GDGt = sc.G @ D @ sc.G.T
            GDGt_all.append(GDGt)
            R1 -= _accel.apply_constraints(blk.rows, blk.rr, blk.cc, blk.wv, GDGt, m)
        dy, du = solve_aug(R1, r_f)
        ATdy = adjoint_all(dy)
        dS = [Rk - Ak for Rk, Ak in zip(R_d, ATdy)]
        dX = [GDGt - sc.W @ dSk @ sc.W for GDGt, sc, dSk in zip(GDGt_all, nt, dS)]

        ap = ad = np.inf
        for sc, dXk, dSk in zip(nt, dX, dS):
            ap = min(ap, _max_step(sc.lam, sc.Ginv @ dXk @ sc.Ginv.T))
            ad = min(ad, _max_step(sc.lam, sc.G.T @ dSk @ sc.G))
        tau = 0.9 + 0.09 * min(1.0, min(ap, ad))
        ap = min(1.0, tau * ap)
        ad = min(1.0, tau * ad)
        if trace:
            solve._trace_extra = f" ap={ap:6.3f} ad={ad:6.3f} sig={sigma:7.1e}"

        if ap < 1e-10 and ad < 1e-10:
            stalls += 1
            if stalls >= _STALL_LIMIT:
                status = "numerical-failure"
                break
        else:
            stalls = 0

        for k in range(len(X)):
            X[k] += ap * dX[k]
            X[k] = 0.5 * (X[k] + X[k].T)
            S[k] += ad * dS[k]
            S[k] = 0.5 * (S[k] + S[k].T)
        u = u + ap * du if nf else u
        y = y + ad * dy

        iterations = it + 1
        if not np.isfinite(mu) or mu > 1e30:
            status = "numerical-failure"
            break

    if status in ("max-iterations", "numerical-failure") and best is not None:
        X, S, y, u, pobj, dobj, feas_p, feas_d, rel_gap = best
    elif status == "optimal":
        pobj = float(cu @ u) if nf else 0.0
        dobj = float(b @ y)

    y_full = np.zeros(prob.m)
    y_full[rec.kept] = y / row_scale
    return SdpSolution(
        free_vars=u,
        block_matrices=[np.asarray(Xk) for Xk in X],
        dual_vector=y_full,
        dual_slacks=[np.asarray(Sk) for Sk in S],
        status=status,
        iterations=iterations,
        final_gap=float(rel_gap),
        primal_residual=float(feas_p),
        dual_residual=float(feas_d),
        primal_objective=float(pobj),
        dual_objective=float(dobj),
        wall_time=time.perf_counter() - t0,
        preprocess=rec,
    )


def write_problem_dump(prob: SdpProblem, path) -> None:
    """Plain-text interchange dump for cross-checking with other solvers.

    Layout (one record per line, whitespace separated):

        SOSPDIFF-SDP 1
        m <rows>  free <n_free>  blocks <k>
        dims <d_1> ... <d_k>
        rhs <i> <value>                 (m lines)
        freecost <j> <value>            (n_free lines)
        F <i> <j> <value>               (nonzeros of the free-variable map)
        A <i> <block> <r> <c> <value>   (symmetric triplets, r <= c)

    <A_i, X> counts off-diagonal entries twice, matching the symmetric
    convention used throughout.
    """
    lines = ["SOSPDIFF-SDP 1"]
    lines.append(f"m {prob.m}  free {prob.n_free}  blocks {len(prob.blocks)}")
    lines.append("dims " + " ".join(str(d) for d in prob.block_dims))
    for i, v in enumerate(prob.rhs):
        lines.append(f"rhs {i} {float(v)!r}")
    for j, v in enumerate(prob.free_cost):
        lines.append(f"freecost {j} {float(v)!r}")
    if prob.n_free:
        for i, j in zip(*np.nonzero(prob.F)):
            lines.append(f"F {i} {j} {float(prob.F[i, j])!r}")
    for k, blk in enumerate(prob.blocks):
        for t in range(blk.rows.shape[0]):
            lines.append(
                f"A {blk.rows[t]} {k} {blk.rr[t]} {blk.cc[t]} {float(blk.vv[t])!r}"
            )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
