"""Solver-free validation of computed inner approximations.

Everything here re-derives set membership from the polynomials alone:
no Gram matrix, residual or any other Certificate field is ever read.
That keeps the check independent of the solve path, so a bug there cannot
silently vouch for itself.

Sampling evidence, not proof: the SOS certificate is the proof object;
these scans guard against implementation errors in the pipeline around it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _accel
from .pdiff import PdiffResult, grid_points, pack_polys
from .polyring import Polynomial, evaluate
from .semialg import Box, ProblemSpec, SemiAlgebraicSet, contains


@dataclass(frozen=True)
class VerificationReport:
    n_grid: int
    n_z_samples: int
    soundness_violations: int
    worst_margin: float
    conservatism: float
    area_ratio: float
    n_in_c: int
    n_brute: int
    grid_resolution: int
    seed: int
    sound_slack: float

    @property
    def sound(self) -> bool:
        return self.soundness_violations == 0


def default_z_samples(dim: int) -> int:
    return 1000 if dim <= 2 else 200


def default_grid_resolution(dim: int) -> int:
    return 400 if dim <= 2 else 60


def draw_z_samples(
    B: SemiAlgebraicSet, b_box: Box, n: int, seed: int, max_batches: int = 10_000
) -> np.ndarray:
    """Rejection-sample n points of B inside its declared bounding box."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    exps, coeffs, offsets = pack_polys(B.constraints)
    out = np.empty((n, b_box.dim))
    got = 0
    batch = max(256, min(4 * n, 262_144))
    for _ in range(max_batches):
        pts = b_box.sample(batch, rng)
        vals = _accel.eval_poly_min(pts, exps, coeffs, offsets)
        good = pts[vals >= 0.0]
        take = min(good.shape[0], n - got)
        if take:
            out[got : got + take] = good[:take]
            got += take
        if got == n:
            return out
    raise RuntimeError(
        "could not draw enough z samples; is the bounding box far larger than B?"
    )


def brute_force_pdiff_membership(
    A: SemiAlgebraicSet,
    B: SemiAlgebraicSet,
    x: Sequence[float],
    z_samples: np.ndarray,
) -> bool:
    """x in A and a_i(x + z) >= 0 for every sampled z and every i.

    Finitely many z make this an outer approximation of true membership in
    A - B: good for catching soundness violations of C, useless for
    certifying points outside C.
    """
    if not contains(A, x, 0.0):
        return False
    x = np.asarray(x, dtype=float)
    for z in z_samples:
        pt = x + z
        for a in A.constraints:
            if evaluate(a, pt) < 0.0:
                return False
    return True


def verify_result(
    result: PdiffResult,
    spec: ProblemSpec | None = None,
    grid_resolution: int | None = None,
    n_z: int | None = None,
    seed: int = 0,
) -> VerificationReport:
    """Grid-and-sample scan of a computed result.

    Deterministic for a fixed seed (counter-based generator).  Worst margin
    is the smallest min_i a_i(x+z) seen over C-grid-points crossed with the
    z pool; violations count margins below the certified slack.
    """
    spec = spec or result.spec
    dim = spec.set_a.nvars
    grid_resolution = grid_resolution or default_grid_resolution(dim)
    n_z = n_z or default_z_samples(dim)
    c_polys = [c for c in result.c_polys if c is not None]
    if len(c_polys) != len(result.c_polys):
        raise ValueError("cannot verify a result with failed constraints")

    z_pool = draw_z_samples(spec.set_b, spec.b_box, n_z, seed)
    pts = grid_points(spec.region, grid_resolution)
    a_exps, a_coeffs, a_off = pack_polys(spec.set_a.constraints)
    c_exps, c_coeffs, c_off = pack_polys(c_polys)
    in_c, in_brute, margins = _accel.soundness_scan(
        pts, a_exps, a_coeffs, a_off, c_exps, c_coeffs, c_off, z_pool
    )

    slack = result.sound_slack
    c_margins = margins[in_c]
    violations = int(np.count_nonzero(c_margins < -slack))
    worst = float(c_margins.min()) if c_margins.shape[0] else np.inf
    n_in_c = int(np.count_nonzero(in_c))
    n_brute = int(np.count_nonzero(in_brute))
    missed = int(np.count_nonzero(in_brute & ~in_c))
    conservatism = missed / n_brute if n_brute else 0.0
    if n_brute:
        area_ratio = n_in_c / n_brute
    else:
        area_ratio = 1.0 if n_in_c == 0 else np.inf
    return VerificationReport(
        n_grid=pts.shape[0],
        n_z_samples=n_z,
        soundness_violations=violations,
        worst_margin=worst,
        conservatism=float(conservatism),
        area_ratio=float(area_ratio),
        n_in_c=n_in_c,
        n_brute=n_brute,
        grid_resolution=grid_resolution,
        seed=seed,
        sound_slack=slack,
    )
