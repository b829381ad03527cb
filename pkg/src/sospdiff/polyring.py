"""Sparse multivariate polynomial arithmetic.

Polynomials are stored as a map from exponent tuples to float coefficients.
All operations are pure: a Polynomial is never mutated after construction,
so values can be shared freely between threads.

The coefficient zero-threshold: terms with |coeff| < COEFF_EPS are dropped
whenever a polynomial is normalized.  This keeps term maps sparse; the
threshold sits far below every certified tolerance used downstream.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Iterable, Mapping, Sequence

import numpy as np

COEFF_EPS = 1e-14

Monomial = tuple  # tuple[int, ...], one exponent per variable


class ArityError(ValueError):
    """Raised when operands disagree on the number of variables."""


@dataclass(frozen=True)
class VariableSplit:
    """Partition of a joint variable list into an x-block and a z-block.

    For the P-difference use case the two blocks describe the same space,
    so nx == nz.
    """

    nx: int
    nz: int

    def __post_init__(self):
        if self.nx <= 0 or self.nz <= 0:
            raise ValueError("block sizes must be positive")

    @property
    def nvars(self) -> int:
        return self.nx + self.nz


def _grlex_key(exps: Monomial):
    return (sum(exps), exps)


class Polynomial:
    """Element of R[x1,...,xn] with sparse float coefficients."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[Monomial, float] | None = None):
        if nvars <= 0:
            raise ValueError("nvars must be positive")
        clean: dict[Monomial, float] = {}
        if terms:
            for exps, coeff in terms.items():
                exps = tuple(int(e) for e in exps)
                if len(exps) != nvars:
                    raise ArityError(
                        f"monomial {exps} has {len(exps)} exponents, expected {nvars}"
                    )
                if any(e < 0 for e in exps):
                    raise ValueError(f"negative exponent in monomial {exps}")
                c = clean.get(exps, 0.0) + float(coeff)
                if abs(c) < COEFF_EPS:
                    clean.pop(exps, None)
                else:
                    clean[exps] = c
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):  # pragma: no cover - guard
        raise AttributeError("Polynomial is immutable")

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls(nvars)

    @classmethod
    def constant(cls, nvars: int, value: float) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars: int, index: int) -> "Polynomial":
        if not 0 <= index < nvars:
            raise ValueError("variable index out of range")
        exps = tuple(1 if k == index else 0 for k in range(nvars))
        return cls(nvars, {exps: 1.0})

    # -- basic queries -------------------------------------------------

    @property
    def degree(self) -> int:
        """Total degree; the zero polynomial has degree 0 by convention."""
        if not self.terms:
            return 0
        return max(sum(e) for e in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, exps: Sequence[int]) -> float:
        return self.terms.get(tuple(exps), 0.0)

    def coeff_norm(self) -> float:
        """Sum of absolute coefficient values."""
        return sum(abs(c) for c in self.terms.values())

    # -- arithmetic -----------------------------------------------------

    def _check_arity(self, other: "Polynomial"):
        if self.nvars != other.nvars:
            raise ArityError(f"arity mismatch: {self.nvars} vs {other.nvars}")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.nvars, other)
        self._check_arity(other)
        out = dict(self.terms)
        for exps, c in other.terms.items():
            out[exps] = out.get(exps, 0.0) + c
        return Polynomial(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.nvars, other)
        return self.__add__(-other)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Polynomial(
                self.nvars, {e: c * other for e, c in self.terms.items()}
            )
        self._check_arity(other)
        out: dict[Monomial, float] = {}
        for ea, ca in self.terms.items():
            for eb, cb in other.terms.items():
                key = tuple(a + b for a, b in zip(ea, eb))
                out[key] = out.get(key, 0.0) + ca * cb
        return Polynomial(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("exponent must be a non-negative integer")
        result = Polynomial.constant(self.nvars, 1.0)
        base = self
        k = n
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __repr__(self):
        return f"Polynomial({self.nvars}, {self.terms!r})"

    # -- evaluation and export ------------------------------------------

    def __call__(self, point: Sequence[float]) -> float:
        return evaluate(self, point)

    def sorted_terms(self) -> list[tuple[Monomial, float]]:
        """Terms in graded lexicographic order (ascending)."""
        return sorted(self.terms.items(), key=lambda kv: _grlex_key(kv[0]))

    def to_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Exponents (t, nvars) int64 and coefficients (t,) float64, grlex order.

        The zero polynomial exports a single zero-coefficient constant term so
        array consumers never see an empty term list.
        """
        items = self.sorted_terms()
        if not items:
            items = [((0,) * self.nvars, 0.0)]
        exps = np.array([e for e, _ in items], dtype=np.int64).reshape(
            len(items), self.nvars
        )
        coeffs = np.array([c for _, c in items], dtype=np.float64)
        return exps, coeffs


# -- module-level operations ---------------------------------------------


def add(p: Polynomial, q: Polynomial) -> Polynomial:
    """Termwise sum of two polynomials of equal arity."""
    return p + q


def mul(p: Polynomial, q: Polynomial) -> Polynomial:
    """Product by convolution of term maps."""
    return p * q


def evaluate(p: Polynomial, point: Sequence[float]) -> float:
    """Direct termwise evaluation: sum of coeff * prod(point**exp)."""
    point = tuple(point)
    if len(point) != p.nvars:
        raise ArityError(f"point has {len(point)} coords, expected {p.nvars}")
    total = 0.0
    for exps, coeff in p.terms.items():
        v = coeff
        for x, e in zip(point, exps):
            if e:
                v *= x**e
        total += v
    return total


def shift_compose(a: Polynomial, split: VariableSplit) -> Polynomial:
    """Expand a(x + z) over the joint (x, z) variable list.

    Works variable by variable via binomial expansion, which keeps the
    intermediate term count at O(terms * degree) per variable instead of
    the blowup of a naive symbolic substitution.
    """
    if a.nvars != split.nx:
        raise ArityError(f"polynomial has {a.nvars} vars, split.nx = {split.nx}")
    nx, nz = split.nx, split.nz
    if nx != nz:
        raise ArityError("shift_compose requires nx == nz")
    njoint = split.nvars
    terms: dict[Monomial, float] = {
        tuple(e) + (0,) * nz: c for e, c in a.terms.items()
    }
    for k in range(nx):
        out: dict[Monomial, float] = {}
        for exps, c in terms.items():
            e = exps[k]
            if e == 0:
                out[exps] = out.get(exps, 0.0) + c
                continue
            base = list(exps)
            for i in range(e + 1):
                base[k] = i
                base[nx + k] = exps[nx + k] + (e - i)
                key = tuple(base)
                out[key] = out.get(key, 0.0) + c * comb(e, i)
            base[nx + k] = exps[nx + k]
        terms = out
    return Polynomial(njoint, terms)


def embed(p: Polynomial, split: VariableSplit, block: str) -> Polynomial:
    """Lift a polynomial in one block into the joint (x, z) variable list.

    block is "x" or "z"; the other block's exponents are all zero.
    """
    if block == "x":
        if p.nvars != split.nx:
            raise ArityError(f"polynomial has {p.nvars} vars, x-block is {split.nx}")
        pad = (0,) * split.nz
        terms = {tuple(e) + pad: c for e, c in p.terms.items()}
    elif block == "z":
        if p.nvars != split.nz:
            raise ArityError(f"polynomial has {p.nvars} vars, z-block is {split.nz}")
        pad = (0,) * split.nx
        terms = {pad + tuple(e): c for e, c in p.terms.items()}
    else:
        raise ValueError("block must be 'x' or 'z'")
    return Polynomial(split.nvars, terms)


def monomial_basis(nvars: int, max_degree: int) -> list[Monomial]:
    """All monomials of total degree <= max_degree in graded lex order."""
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    out: list[Monomial] = []
    for d in range(max_degree + 1):
        out.extend(_exponents_of_degree(nvars, d))
    return out


def _exponents_of_degree(nvars: int, d: int) -> Iterable[Monomial]:
    """Exponent tuples of total degree exactly d, lexicographically ascending."""
    if nvars == 1:
        yield (d,)
        return
    for first in range(d + 1):
        for rest in _exponents_of_degree(nvars - 1, d - first):
            yield (first,) + rest


def basis_size(nvars: int, max_degree: int) -> int:
    return comb(nvars + max_degree, nvars)


def affine_substitute(
    p: Polynomial, scale: Sequence[float], shift: Sequence[float]
) -> Polynomial:
    """Compose p with the per-variable affine map x_k -> scale_k*x_k + shift_k."""
    if len(scale) != p.nvars or len(shift) != p.nvars:
        raise ArityError("scale/shift length must match nvars")
    terms: dict[Monomial, float] = dict(p.terms)
    for k in range(p.nvars):
        s, t = float(scale[k]), float(shift[k])
        if s == 1.0 and t == 0.0:
            continue
        out: dict[Monomial, float] = {}
        for exps, c in terms.items():
            e = exps[k]
            if e == 0:
                out[exps] = out.get(exps, 0.0) + c
                continue
            base = list(exps)
            for i in range(e + 1):
                base[k] = i
                key = tuple(base)
                coeff = c * comb(e, i) * (s**i) * (t ** (e - i))
                if coeff:
                    out[key] = out.get(key, 0.0) + coeff
        terms = out
    return Polynomial(p.nvars, terms)


def format_polynomial(p: Polynomial, variables: Sequence[str]) -> str:
    """Deterministic text form that the semialg parser reads back exactly.

    Terms appear in descending graded lex order; coefficients use repr so the
    float value round-trips bit for bit.
    """
    if len(variables) != p.nvars:
        raise ArityError("variable name list must match nvars")
    items = p.sorted_terms()[::-1]
    if not items:
        return "0"
    parts: list[tuple[str, str]] = []
    for exps, coeff in items:
        factors = []
        for name, e in zip(variables, exps):
            if e == 1:
                factors.append(name)
            elif e > 1:
                factors.append(f"{name}^{e}")
        mag = abs(coeff)
        if factors and mag == 1.0:
            body = "*".join(factors)
        elif factors:
            body = "*".join([repr(mag)] + factors)
        else:
            body = repr(mag)
        sign = "-" if coeff < 0 else "+"
        parts.append((sign, body))
    first_sign, first_body = parts[0]
    text = (first_sign if first_sign == "-" else "") + first_body
    for sign, body in parts[1:]:
        text += f" {sign} {body}"
    return text
