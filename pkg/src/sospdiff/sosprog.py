"""Assembly of the per-constraint SOS program into a standard-form SDP.

For one constraint a(x) of A and B = {z : b_j(z) >= 0}, the program searches
for c(x) of bounded degree and SOS multipliers s_j(x, z) such that

    a(x + z) - c(x) - sum_j s_j(x, z) b_j(z)  is SOS in (x, z),

maximizing a linear functional of c's coefficients.  SOS membership is
parametrized by Gram matrices over full monomial bases up to half the
target degree; matching coefficients monomial by monomial yields the linear
equalities of the SDP.

Everything here works in whatever coordinate frame the caller supplies;
the orchestrator rescales variables before assembly and undoes it after.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _accel
from .objective import ObjectiveFunctional
from .polyring import (
    Monomial,
    Polynomial,
    VariableSplit,
    embed,
    monomial_basis,
    mul,
    shift_compose,
)
from .semialg import SemiAlgebraicSet, ToleranceSet


class AssemblyError(ValueError):
    """Degree bookkeeping failed; the chosen degrees cannot match coefficients."""


@dataclass(frozen=True)
class GramBlock:
    """One PSD block: a Gram matrix over a monomial basis of the joint ring."""

    basis: tuple[Monomial, ...]
    role: str  # "P" | "s"
    index: int | None = None  # j for s-blocks

    @property
    def dim(self) -> int:
        return len(self.basis)


@dataclass
class BlockTriplets:
    """Sparse symmetric constraint data for one block.

    Entry t says constraint row rows[t] reads vv[t] from Gram positions
    (rr[t], cc[t]) and (cc[t], rr[t]); rr <= cc always.  wv folds the
    off-diagonal double count: wv = vv * (2 - (rr == cc)).
    """

    dim: int
    rows: np.ndarray
    rr: np.ndarray
    cc: np.ndarray
    vv: np.ndarray

    def __post_init__(self):
        order = np.lexsort((self.cc, self.rr, self.rows))
        self.rows = np.ascontiguousarray(self.rows[order], dtype=np.int64)
        self.rr = np.ascontiguousarray(self.rr[order], dtype=np.int64)
        self.cc = np.ascontiguousarray(self.cc[order], dtype=np.int64)
        self.vv = np.ascontiguousarray(self.vv[order], dtype=np.float64)
        self.wv = self.vv * np.where(self.rr == self.cc, 1.0, 2.0)
        present, start = np.unique(self.rows, return_index=True)
        self.present_rows = present.astype(np.int64)
        self.row_ptr = np.append(start, self.rows.shape[0]).astype(np.int64)


@dataclass
class SdpProblem:
    """Standard-form SDP: min free_cost @ u  s.t.  A(X) + F u = rhs, X >= 0.

    The objective lives on the free variables only; Gram entries carry no
    objective weight.
    """

    m: int
    blocks: list[BlockTriplets]
    gram_blocks: list[GramBlock]
    F: np.ndarray  # (m, n_free)
    rhs: np.ndarray  # (m,)
    free_cost: np.ndarray  # (n_free,)
    free_monomials: tuple[Monomial, ...] = ()
    row_monomials: tuple[Monomial, ...] = ()
    meta: dict = field(default_factory=dict)

    @property
    def n_free(self) -> int:
        return self.F.shape[1]

    @property
    def block_dims(self) -> list[int]:
        return [b.dim for b in self.blocks]

    def constraint_value(self, gram_matrices: Sequence[np.ndarray], u: np.ndarray) -> np.ndarray:
        """A(X) + F u, from the stored triplet data."""
        out = np.zeros(self.m)
        for blk, X in zip(self.blocks, gram_matrices):
            out += _accel.apply_constraints(blk.rows, blk.rr, blk.cc, blk.wv, X, self.m)
        if self.n_free:
            out += self.F @ u
        return out


@dataclass
class Certificate:
    """Solved Gram matrices plus the diagnostics that make them checkable.

    residual_max and min_eigenvalues are recomputed from scratch after the
    solve (reconstruct_residual); nothing here is trusted solver output.
    """

    gram_matrices: list[np.ndarray]
    c_coeffs: np.ndarray
    residual_max: float
    min_eigenvalues: list[float]
    objective_value: float
    residual_poly: Polynomial | None = None
    epsilon: float = 0.0

    def is_valid(self, tol: ToleranceSet) -> bool:
        return self.residual_max <= tol.residual_max and all(
            e >= -tol.psd_margin for e in self.min_eigenvalues
        )


def _round_up_even(d: int) -> int:
    return d if d % 2 == 0 else d + 1


def plan_degrees(a: Polynomial, B: SemiAlgebraicSet, deg_c: int, deg_s: int):
    """Degree bookkeeping: P-block degree is the max ingredient degree,
    rounded up to even; s-degrees are rounded up to even as well."""
    deg_s_eff = _round_up_even(deg_s)
    deg_b = max(p.degree for p in B.constraints)
    d_p = _round_up_even(max(a.degree, deg_c, deg_s_eff + deg_b))
    return d_p, deg_s_eff


def assemble(
    a: Polynomial,
    B: SemiAlgebraicSet,
    deg_c: int,
    deg_s: int,
    objective: ObjectiveFunctional,
) -> SdpProblem:
    """Build the coefficient-matching SDP for one constraint of A.

    a and B share the same variable count n; the joint ring has 2n
    variables ordered (x, z).  One equality row is produced per joint
    monomial of degree <= the P-block degree.
    """
    if a.nvars != B.nvars:
        raise AssemblyError("a and B must share the variable count")
    if deg_c < 0 or deg_s < 0:
        raise AssemblyError("degrees must be >= 0")
    n = a.nvars
    split = VariableSplit(n, n)
    a_shift = shift_compose(a, split)
    d_p, deg_s_eff = plan_degrees(a, B, deg_c, deg_s)
    if d_p < a_shift.degree:
        raise AssemblyError(
            f"P-block degree {d_p} cannot match a(x+z) of degree {a_shift.degree}"
        )

    row_monos = tuple(monomial_basis(2 * n, d_p))
    row_index = {mono: i for i, mono in enumerate(row_monos)}
    m = len(row_monos)

    blocks: list[BlockTriplets] = []
    gram_blocks: list[GramBlock] = []

    basis_p = tuple(monomial_basis(2 * n, d_p // 2))
    rows, rr, cc = [], [], []
    for i, mi in enumerate(basis_p):
        for j in range(i, len(basis_p)):
            gamma = tuple(x + y for x, y in zip(mi, basis_p[j]))
            rows.append(row_index[gamma])
            rr.append(i)
            cc.append(j)
    blocks.append(
        BlockTriplets(
            len(basis_p),
            np.array(rows, dtype=np.int64),
            np.array(rr, dtype=np.int64),
            np.array(cc, dtype=np.int64),
            np.ones(len(rows)),
        )
    )
    gram_blocks.append(GramBlock(basis_p, "P"))

    basis_s = tuple(monomial_basis(2 * n, deg_s_eff // 2))
    b_joint = [embed(bj, split, "z") for bj in B.constraints]
    for j, bj in enumerate(b_joint):
        acc: dict[tuple[int, int, int], float] = {}
        for i, mi in enumerate(basis_s):
            for k in range(i, len(basis_s)):
                base = tuple(x + y for x, y in zip(mi, basis_s[k]))
                for delta, coef in bj.terms.items():
                    gamma = tuple(x + y for x, y in zip(base, delta))
                    key = (row_index[gamma], i, k)
                    acc[key] = acc.get(key, 0.0) + coef
        keys = list(acc.keys())
        blocks.append(
            BlockTriplets(
                len(basis_s),
                np.array([k[0] for k in keys], dtype=np.int64),
                np.array([k[1] for k in keys], dtype=np.int64),
                np.array([k[2] for k in keys], dtype=np.int64),
                np.array([acc[k] for k in keys]),
            )
        )
        gram_blocks.append(GramBlock(basis_s, "s", j))

    free_monos = tuple(monomial_basis(n, deg_c))
    F = np.zeros((m, len(free_monos)))
    weight_map = {tuple(mo): w for mo, w in zip(objective.monomials, objective.weights)}
    free_cost = np.empty(len(free_monos))
    zpad = (0,) * n
    for col, mono in enumerate(free_monos):
        F[row_index[tuple(mono) + zpad], col] = 1.0
        try:
            free_cost[col] = -weight_map[tuple(mono)]  # solver minimizes
        except KeyError:
            raise AssemblyError(f"objective lacks a weight for monomial {mono}") from None

    rhs = np.zeros(m)
    for gamma, coef in a_shift.terms.items():
        try:
            rhs[row_index[gamma]] = coef
        except KeyError:
            raise AssemblyError(
                f"a(x+z) monomial {gamma} exceeds the P-block degree {d_p}"
            ) from None

    return SdpProblem(
        m=m,
        blocks=blocks,
        gram_blocks=gram_blocks,
        F=F,
        rhs=rhs,
        free_cost=free_cost,
        free_monomials=free_monos,
        row_monomials=row_monos,
        meta={
            "split": split,
            "a": a,
            "B": B,
            "deg_c": deg_c,
            "deg_s": deg_s_eff,
            "d_p": d_p,
        },
    )


def gram_to_polynomial(basis: Sequence[Monomial], Q: np.ndarray) -> Polynomial:
    """m(x)^T Q m(x) expanded into the joint ring."""
    nvars = len(basis[0])
    terms: dict[Monomial, float] = {}
    for i, mi in enumerate(basis):
        for j in range(i, len(basis)):
            coef = Q[i, j] * (1.0 if i == j else 2.0)
            if coef == 0.0:
                continue
            gamma = tuple(x + y for x, y in zip(mi, basis[j]))
            terms[gamma] = terms.get(gamma, 0.0) + coef
    return Polynomial(nvars, terms)


def c_polynomial(prob: SdpProblem, c_coeffs: np.ndarray) -> Polynomial:
    n = prob.meta["split"].nx
    return Polynomial(n, dict(zip(prob.free_monomials, c_coeffs)))


def repair_gram(
    prob: SdpProblem, gram_matrices: list[np.ndarray], c_coeffs: np.ndarray
) -> list[np.ndarray]:
    """Project the P-block Gram onto exact coefficient matching.

    Every equality row contains at least one P-block pair, and each pair
    belongs to exactly one row, so spreading each row's residual uniformly
    over its pairs is the least-squares correction restricted to the
    P-block.  It zeroes the matching residual while moving eigenvalues by
    at most the residual's own magnitude.
    """
    res = prob.rhs - prob.constraint_value(gram_matrices, c_coeffs)
    blk = prob.blocks[0]
    counts = np.zeros(prob.m)
    np.add.at(counts, blk.rows, np.where(blk.rr == blk.cc, 1.0, 2.0))
    out = [Q.copy() for Q in gram_matrices]
    Q0 = out[0]
    spread = res[blk.rows] / counts[blk.rows]
    for t in range(blk.rows.shape[0]):
        r, c = blk.rr[t], blk.cc[t]
        Q0[r, c] += spread[t]
        if r != c:
            Q0[c, r] += spread[t]
    return out


def reconstruct_residual(
    prob: SdpProblem,
    gram_matrices: Sequence[np.ndarray],
    c_coeffs: np.ndarray,
) -> Certificate:
    """Recompute the matched identity with polynomial arithmetic.

    Both sides are rebuilt from the original a and B polynomials, never from
    the solver's constraint data, and the Gram spectra come from a dense
    symmetric eigensolve.
    """
    for blk, Q in zip(prob.blocks, gram_matrices):
        if Q.shape != (blk.dim, blk.dim):
            raise ValueError("Gram matrix dimensions do not match the problem")
    if len(c_coeffs) != prob.n_free:
        raise ValueError("c coefficient vector has the wrong length")
    split: VariableSplit = prob.meta["split"]
    a: Polynomial = prob.meta["a"]
    B: SemiAlgebraicSet = prob.meta["B"]

    target = shift_compose(a, split)
    c_poly = c_polynomial(prob, c_coeffs)
    total = embed(c_poly, split, "x")
    for gb, Q in zip(prob.gram_blocks, gram_matrices):
        part = gram_to_polynomial(gb.basis, Q)
        if gb.role == "s":
            part = mul(part, embed(B.constraints[gb.index], split, "z"))
        total = total + part
    residual = target - total
    residual_max = max((abs(c) for c in residual.terms.values()), default=0.0)
    eigs = [float(np.linalg.eigvalsh(Q).min()) for Q in gram_matrices]
    objective_value = float(-prob.free_cost @ c_coeffs)
    return Certificate(
        gram_matrices=[np.array(Q) for Q in gram_matrices],
        c_coeffs=np.array(c_coeffs, dtype=float),
        residual_max=float(residual_max),
        min_eigenvalues=eigs,
        objective_value=objective_value,
        residual_poly=residual,
    )


@dataclass(frozen=True)
class ShrinkResult:
    c_adjusted: Polynomial
    epsilon: float
    empty: bool
    c_max_estimate: float


def _monomial_bound(exps: Monomial, ub: np.ndarray) -> float:
    v = 1.0
    for e, u in zip(exps, ub):
        if e:
            v *= u**e
    return v


def shrink_to_sound(
    cert: Certificate,
    prob: SdpProblem,
    z_abs_bound: Sequence[float],
    mode: str = "auto",
    grid_per_axis: int = 65,
) -> ShrinkResult:
    """Subtract a constant margin from c so the inequality holds exactly.

    The margin bounds the identity error over the unit region box crossed
    with B's bounding box: the reconstruction residual is summed with
    per-monomial sup bounds, and each slightly indefinite Gram block
    contributes its negative eigenvalue mass times the squared basis norm
    bound (times a sup bound of b_j over its box for the multiplier blocks).

    If the margin exceeds the (sampled) max of c over the region, the
    adjusted set is empty; that is reported, not raised.
    """
    if mode not in ("auto", "off"):
        raise ValueError("mode must be 'auto' or 'off'")
    split: VariableSplit = prob.meta["split"]
    B: SemiAlgebraicSet = prob.meta["B"]
    n = split.nx
    ub = np.concatenate([np.ones(n), np.asarray(z_abs_bound, dtype=float)])
    if ub.shape[0] != 2 * n:
        raise ValueError("z_abs_bound must have one entry per z variable")

    epsilon = 0.0
    if mode == "auto":
        if cert.residual_poly is not None:
            epsilon += sum(
                abs(c) * _monomial_bound(e, ub)
                for e, c in cert.residual_poly.terms.items()
            )
        for gb, lam in zip(prob.gram_blocks, cert.min_eigenvalues):
            neg = max(0.0, -lam)
            if neg == 0.0:
                continue
            basis_sq = sum(_monomial_bound(e, ub) ** 2 for e in gb.basis)
            factor = 1.0
            if gb.role == "s":
                bj = embed(B.constraints[gb.index], split, "z")
                factor = sum(
                    abs(c) * _monomial_bound(e, ub) for e, c in bj.terms.items()
                )
            epsilon += neg * basis_sq * factor

    c_poly = c_polynomial(prob, cert.c_coeffs)
    c_adj = c_poly - epsilon

    axes = [np.linspace(-1.0, 1.0, grid_per_axis)] * n
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    exps, coeffs = c_adj.to_arrays()
    c_max = float(_accel.eval_poly(pts, exps, coeffs).max())
    return ShrinkResult(c_adj, float(epsilon), c_max < 0.0, c_max)
