"""Linear objective functionals on the coefficients of the candidate c(x).

The integral of c over an axis-aligned box is linear in c's coefficients
with weight w_alpha = prod_k (u_k^(a_k+1) - l_k^(a_k+1)) / (a_k + 1) per
monomial.  The sampled variant replaces the integral by an average over N
random points; both produce the same ObjectiveFunctional shape.

Random points come from a Philox counter-based generator so that weights
are reproducible bit for bit across platforms for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .polyring import Monomial
from .semialg import Box


@dataclass(frozen=True)
class ObjectiveFunctional:
    """objective(c) = sum_alpha weights[alpha] * coeff_alpha(c)."""

    monomials: tuple[Monomial, ...]
    weights: np.ndarray
    mode: str  # "box-integral" | "monte-carlo"
    n_samples: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if len(self.monomials) != self.weights.shape[0]:
            raise ValueError("weights length must match monomial list")

    def weight_of(self, exps: Monomial) -> float:
        try:
            return float(self.weights[self.monomials.index(tuple(exps))])
        except ValueError:
            raise KeyError(f"monomial {exps} not in objective") from None


def box_integral_weights(box: Box, monomials: Sequence[Monomial]) -> ObjectiveFunctional:
    """Exact monomial integrals over the box, by the product formula."""
    lo = np.asarray(box.lower)
    hi = np.asarray(box.upper)
    weights = np.empty(len(monomials))
    for i, exps in enumerate(monomials):
        if len(exps) != box.dim:
            raise ValueError("monomial arity must match box dimension")
        w = 1.0
        for k, a in enumerate(exps):
            w *= (hi[k] ** (a + 1) - lo[k] ** (a + 1)) / (a + 1)
        weights[i] = w
    return ObjectiveFunctional(tuple(map(tuple, monomials)), weights, "box-integral")


def monte_carlo_weights(
    sampler: Box | Callable[[int, np.random.Generator], np.ndarray],
    n_samples: int,
    seed: int,
    monomials: Sequence[Monomial],
) -> ObjectiveFunctional:
    """Sampled weights w_alpha = (1/N) sum_j r_j^alpha.

    The sampler is either a Box (uniform points) or a callable giving points
    for region shapes a box cannot describe.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    if isinstance(sampler, Box):
        draw = lambda n: sampler.sample(n, rng)
    else:
        draw = lambda n: np.asarray(sampler(n, rng), dtype=np.float64)
    weights = np.zeros(len(monomials))
    exps = np.array([tuple(m) for m in monomials], dtype=np.int64)
    remaining = n_samples
    chunk = 262_144
    while remaining > 0:
        take = min(chunk, remaining)
        pts = draw(take)
        if pts.ndim != 2 or pts.shape[1] != exps.shape[1]:
            raise ValueError("sampler returned points of the wrong dimension")
        for i in range(exps.shape[0]):
            term = np.ones(take)
            for k in range(exps.shape[1]):
                e = exps[i, k]
                if e:
                    term = term * pts[:, k] ** e
            weights[i] += term.sum()
        remaining -= take
    weights /= n_samples
    return ObjectiveFunctional(
        tuple(map(tuple, monomials)), weights, "monte-carlo", n_samples, seed
    )


def weight_discrepancy(a: ObjectiveFunctional, b: ObjectiveFunctional) -> float:
    """Max relative difference between two functionals on shared monomials.

    Weights with magnitude below 1e-12 on both sides are compared absolutely.
    Used to report the sampled-vs-exact gap when both are computable.
    """
    if a.monomials != b.monomials:
        raise ValueError("functionals must share the monomial list")
    worst = 0.0
    for wa, wb in zip(a.weights, b.weights):
        scale = max(abs(wa), abs(wb))
        if scale < 1e-12:
            continue
        denom = max(abs(wa), abs(wb), 1e-12)
        worst = max(worst, abs(wa - wb) / denom)
    return worst
