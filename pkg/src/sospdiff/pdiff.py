"""End-to-end P-difference computation.

Per constraint a_i of A: rescale variables so the region box maps to
[-1,1]^n, assemble the SOS program, solve the SDP, repair and reconstruct
the certificate, shrink c_i by the certified soundness margin, and map the
result back to original coordinates.  The per-constraint results intersect
into C = {x : min_i c_i(x) >= 0}.

A failed constraint is recorded and the remaining ones still run, but the
overall result is then marked unsound: dropping one c_i would make C an
intersection of fewer sets, which is larger, not smaller.
"""

from __future__ import annotations

import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _accel, sdpsolve, sosprog
from .objective import (
    ObjectiveFunctional,
    box_integral_weights,
    monte_carlo_weights,
    weight_discrepancy,
)
from .polyring import Polynomial, affine_substitute, monomial_basis
from .semialg import Box, ProblemSpec, SemiAlgebraicSet


@dataclass
class ConstraintStats:
    index: int
    status: str
    valid: bool
    iterations: int
    wall_time: float
    sdp_rows: int
    sdp_rows_after: int
    block_dims: list[int]
    residual_max: float = np.nan
    min_eigenvalue: float = np.nan
    epsilon: float = np.nan
    objective_scaled: float = np.nan
    objective_integral: float = np.nan
    empty: bool = False
    error: str | None = None


@dataclass
class PdiffResult:
    """One c_i per constraint of A plus everything needed to audit them."""

    c_polys: list[Polynomial | None]
    certificates: list[sosprog.Certificate | None]
    stats: list[ConstraintStats]
    empty_flags: list[bool]
    scale: tuple[float, ...]
    shift: tuple[float, ...]
    sound_slack: float
    origin_warning: bool
    objective_discrepancy: float | None
    spec: ProblemSpec

    @property
    def all_valid(self) -> bool:
        return all(s.valid for s in self.stats)

    @property
    def any_solver_failure(self) -> bool:
        return any(
            s.status
            in ("infeasible-detected", "unbounded-detected", "numerical-failure")
            or s.error is not None
            for s in self.stats
        )

    @property
    def empty(self) -> bool:
        return any(self.empty_flags)


def _region_transform(region: Box) -> tuple[np.ndarray, np.ndarray]:
    lo = np.asarray(region.lower)
    hi = np.asarray(region.upper)
    return (hi - lo) / 2.0, (hi + lo) / 2.0


def _build_objective(spec: ProblemSpec, deg_c: int):
    monos = monomial_basis(spec.set_a.nvars, deg_c)
    unit = Box((-1.0,) * spec.set_a.nvars, (1.0,) * spec.set_a.nvars)
    exact = box_integral_weights(unit, monos)
    if spec.objective_mode == "box-integral":
        return exact, None
    sampled = monte_carlo_weights(unit, spec.n_samples, spec.rng_seed, monos)
    return sampled, weight_discrepancy(exact, sampled)


def _solve_one(
    i: int,
    a_scaled: Polynomial,
    b_scaled: SemiAlgebraicSet,
    z_abs_bound: np.ndarray,
    objective: ObjectiveFunctional,
    spec: ProblemSpec,
    jacobian: float,
    dump_path=None,
):
    t_start = time.perf_counter()
    try:
        # Normalize to unit max-coefficient: {a >= 0} and {b_j >= 0} are
        # scale invariant, and O(1) data keeps the SDP well conditioned.
        # c comes back multiplied by a's factor afterwards.
        a_norm = max(abs(c) for c in a_scaled.terms.values())
        a_unit = a_scaled * (1.0 / a_norm)
        b_unit = SemiAlgebraicSet(
            b_scaled.nvars,
            tuple(
                b * (1.0 / max(abs(c) for c in b.terms.values()))
                for b in b_scaled.constraints
            ),
            b_scaled.name,
        )
        prob = sosprog.assemble(a_unit, b_unit, spec.deg_c, spec.deg_s, objective)
        if dump_path is not None:
            sdpsolve.write_problem_dump(prob, dump_path)
        sol = sdpsolve.solve(prob, spec.tolerances)
        stats = ConstraintStats(
            index=i,
            status=sol.status,
            valid=False,
            iterations=sol.iterations,
            wall_time=time.perf_counter() - t_start,
            sdp_rows=sol.preprocess.m_before if sol.preprocess else prob.m,
            sdp_rows_after=sol.preprocess.m_after if sol.preprocess else prob.m,
            block_dims=prob.block_dims,
        )
        if sol.status in ("infeasible-detected", "unbounded-detected", "numerical-failure"):
            return None, None, stats
        grams = sosprog.repair_gram(prob, sol.block_matrices, sol.free_vars)
        cert = sosprog.reconstruct_residual(prob, grams, sol.free_vars)
        stats.residual_max = cert.residual_max
        stats.min_eigenvalue = min(cert.min_eigenvalues)
        stats.objective_scaled = cert.objective_value * a_norm
        stats.objective_integral = cert.objective_value * a_norm * jacobian
        stats.valid = cert.is_valid(spec.tolerances)
        shrink = sosprog.shrink_to_sound(
            cert, prob, z_abs_bound, spec.tolerances.shrink_epsilon_mode
        )
        cert.epsilon = shrink.epsilon
        stats.epsilon = shrink.epsilon * a_norm
        stats.empty = shrink.empty
        stats.wall_time = time.perf_counter() - t_start
        return shrink.c_adjusted * a_norm, cert, stats
    except Exception as exc:  # failure isolation per constraint
        stats = ConstraintStats(
            index=i,
            status="error",
            valid=False,
            iterations=0,
            wall_time=time.perf_counter() - t_start,
            sdp_rows=0,
            sdp_rows_after=0,
            block_dims=[],
            error=f"{type(exc).__name__}: {exc}",
        )
        return None, None, stats


def compute_pdiff(spec: ProblemSpec, dump_dir=None) -> PdiffResult:
    """Run the whole pipeline for every constraint of A."""
    origin_warning = spec.warn_if_origin_outside_b()
    scale, shift = _region_transform(spec.region)
    n = spec.set_a.nvars

    a_scaled = [
        affine_substitute(a, scale, shift) for a in spec.set_a.constraints
    ]
    b_scaled = SemiAlgebraicSet(
        n,
        tuple(
            affine_substitute(b, scale, np.zeros(n)) for b in spec.set_b.constraints
        ),
        spec.set_b.name,
    )
    zb_lo = np.asarray(spec.b_box.lower) / scale
    zb_hi = np.asarray(spec.b_box.upper) / scale
    z_abs_bound = np.maximum(np.abs(zb_lo), np.abs(zb_hi))

    objective, discrepancy = _build_objective(spec, spec.deg_c)
    jacobian = float(np.prod(scale))

    tasks = []
    for i, a in enumerate(a_scaled):
        dump_path = None
        if dump_dir is not None:
            dump_path = f"{dump_dir}/sdp_constraint_{i}.txt"
        tasks.append((i, a, b_scaled, z_abs_bound, objective, spec, jacobian, dump_path))

    if len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=min(4, len(tasks))) as ex:
            outcomes = list(ex.map(lambda t: _solve_one(*t), tasks))
    else:
        outcomes = [_solve_one(*tasks[0])]

    c_polys: list[Polynomial | None] = []
    certificates = []
    stats = []
    empty_flags = []
    inv_scale = 1.0 / scale
    for c_scaled, cert, st in outcomes:
        if c_scaled is None:
            c_polys.append(None)
        else:
            c_polys.append(affine_substitute(c_scaled, inv_scale, -shift * inv_scale))
        certificates.append(cert)
        stats.append(st)
        empty_flags.append(st.empty)

    sound_slack = max(
        1e-10 * (1.0 + a.coeff_norm()) for a in spec.set_a.constraints
    )
    return PdiffResult(
        c_polys=c_polys,
        certificates=certificates,
        stats=stats,
        empty_flags=empty_flags,
        scale=tuple(float(s) for s in scale),
        shift=tuple(float(t) for t in shift),
        sound_slack=float(sound_slack),
        origin_warning=origin_warning,
        objective_discrepancy=discrepancy,
        spec=spec,
    )


def grid_points(box: Box, resolution: int) -> np.ndarray:
    """Row-major point list of a uniform grid over the box (last axis fastest)."""
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(box.lower, box.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def pack_polys(polys: Sequence[Polynomial]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Concatenate polynomials into the packed-family kernel layout."""
    arrays = [p.to_arrays() for p in polys]
    exps = np.concatenate([a[0] for a in arrays], axis=0)
    coeffs = np.concatenate([a[1] for a in arrays])
    offsets = np.zeros(len(polys) + 1, dtype=np.int64)
    np.cumsum([a[1].shape[0] for a in arrays], out=offsets[1:])
    return exps, coeffs, offsets


def scalar_field(polys: Sequence[Polynomial], box: Box, resolution: int) -> np.ndarray:
    """min over the polynomials on a uniform grid, shaped (resolution,)*dim."""
    pts = grid_points(box, resolution)
    exps, coeffs, offsets = pack_polys(polys)
    vals = _accel.eval_poly_min(pts, exps, coeffs, offsets)
    return vals.reshape((resolution,) * box.dim)


def evaluate_region(result: PdiffResult, box: Box, resolution: int) -> np.ndarray:
    """Grid of min_i c_i values; requires every constraint to have solved."""
    if any(c is None for c in result.c_polys):
        raise ValueError("result has failed constraints; no complete c available")
    if box.dim != result.spec.set_a.nvars:
        raise ValueError("grid box dimension mismatch")
    return scalar_field([c for c in result.c_polys if c is not None], box, resolution)
