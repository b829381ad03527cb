"""Semi-algebraic sets and the polynomial expression parser.

A SemiAlgebraicSet is an intersection of polynomial inequalities
{x : p_k(x) >= 0}.  Expressions are parsed with a small recursive-descent
parser over the grammar (EBNF, whitespace insensitive):

    expr    = [ sign ] term { sign term } ;
    sign    = "+" | "-" ;
    term    = factor { "*" factor } ;
    factor  = primary { "^" uint } ;
    primary = number | identifier | "(" expr ")" ;

Numbers are decimal literals, optionally with a fraction part and an
exponent (e.g. 0.1, 25, 1e-4).  Exponents after "^" must be non-negative
integers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .polyring import ArityError, Polynomial, evaluate, format_polynomial


class ParseError(ValueError):
    """Syntax or name error, with the 0-based position in the input text."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


# -- tokenizer -------------------------------------------------------------

_OPERATORS = set("+-*^()")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _OPERATORS:
            tokens.append(("op", ch, i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            lit = text[i:j]
            try:
                float(lit)
            except ValueError:
                raise ParseError(f"malformed number {lit!r}", i) from None
            tokens.append(("num", lit, i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: Sequence[str]):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.variables = list(variables)
        self.index = {name: k for k, name in enumerate(self.variables)}
        self.nvars = len(self.variables)

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, value, at = self.peek()
        if kind != "op" or value != op:
            raise ParseError(f"expected {op!r}", at)
        return self.advance()

    def parse(self) -> Polynomial:
        poly = self.expr()
        kind, value, at = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing input {value!r}", at)
        return poly

    def expr(self) -> Polynomial:
        sign = 1.0
        kind, value, _ = self.peek()
        if kind == "op" and value in "+-":
            self.advance()
            sign = -1.0 if value == "-" else 1.0
        result = self.term() * sign
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                t = self.term()
                result = result + (t if value == "+" else -t)
            else:
                return result

    def term(self) -> Polynomial:
        result = self.factor()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value == "*":
                self.advance()
                result = result * self.factor()
            else:
                return result

    def factor(self) -> Polynomial:
        result = self.primary()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value == "^":
                self.advance()
                kind, value, at = self.advance()
                if kind != "num" or any(c in value for c in ".eE"):
                    raise ParseError("exponent must be a non-negative integer", at)
                result = result ** int(value)
            else:
                return result

    def primary(self) -> Polynomial:
        kind, value, at = self.advance()
        if kind == "num":
            return Polynomial.constant(self.nvars, float(value))
        if kind == "name":
            if value not in self.index:
                raise ParseError(f"unknown identifier {value!r}", at)
            return Polynomial.variable(self.nvars, self.index[value])
        if kind == "op" and value == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise ParseError(f"expected a number, variable or '('", at)


def parse_polynomial(text: str, variables: Sequence[str]) -> Polynomial:
    """Parse an expression string into a fully expanded Polynomial."""
    if not variables:
        raise ValueError("variable list must be non-empty")
    return _Parser(text, variables).parse()


# -- sets and problem configuration ----------------------------------------


@dataclass(frozen=True)
class SemiAlgebraicSet:
    """Intersection {x : p_k(x) >= 0 for all k}."""

    nvars: int
    constraints: tuple[Polynomial, ...]
    name: str | None = None

    def __post_init__(self):
        if not self.constraints:
            raise ValueError("constraint list must be non-empty")
        for p in self.constraints:
            if p.nvars != self.nvars:
                raise ArityError("all constraints must share nvars")

    @classmethod
    def from_strings(
        cls, exprs: Sequence[str], variables: Sequence[str], name: str | None = None
    ) -> "SemiAlgebraicSet":
        polys = tuple(parse_polynomial(e, variables) for e in exprs)
        return cls(len(variables), polys, name)


def contains(sas: SemiAlgebraicSet, point: Sequence[float], slack: float = 0.0) -> bool:
    """True iff every constraint evaluates >= -slack at the point."""
    if slack < 0:
        raise ValueError("slack must be >= 0")
    return all(evaluate(p, point) >= -slack for p in sas.constraints)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by per-variable lower/upper bounds."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("lower/upper dimension mismatch")
        if not all(l < u for l, u in zip(self.lower, self.upper)):
            raise ValueError("box requires lower < upper componentwise")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def inflate(self, factor: float) -> "Box":
        c = [(l + u) / 2 for l, u in zip(self.lower, self.upper)]
        h = [(u - l) / 2 * factor for l, u in zip(self.lower, self.upper)]
        return Box(
            tuple(ci - hi for ci, hi in zip(c, h)),
            tuple(ci + hi for ci, hi in zip(c, h)),
        )

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return lo + rng.random((n, self.dim)) * (hi - lo)


@dataclass(frozen=True)
class ToleranceSet:
    """Numerical tolerances for the solve / certification pipeline."""

    sdp_gap: float = 1e-8
    psd_margin: float = 1e-7
    residual_max: float = 1e-6
    shrink_epsilon_mode: str = "auto"  # "auto" | "off"

    def __post_init__(self):
        if min(self.sdp_gap, self.psd_margin, self.residual_max) <= 0:
            raise ValueError("tolerances must be strictly positive")
        if self.shrink_epsilon_mode not in ("auto", "off"):
            raise ValueError("shrink_epsilon_mode must be 'auto' or 'off'")


@dataclass(frozen=True)
class ProblemSpec:
    """Full configuration of one P-difference computation."""

    set_a: SemiAlgebraicSet
    set_b: SemiAlgebraicSet
    region: Box
    b_box: Box
    deg_c: int
    deg_s: int
    objective_mode: str = "box-integral"  # "box-integral" | "monte-carlo"
    n_samples: int = 100_000
    rng_seed: int = 0
    tolerances: ToleranceSet = field(default_factory=ToleranceSet)
    name: str | None = None

    def __post_init__(self):
        n = self.set_a.nvars
        if self.set_b.nvars != n:
            raise ArityError("A and B must share the variable count")
        if self.region.dim != n or self.b_box.dim != n:
            raise ArityError("region and b_box dimension must match the sets")
        if self.deg_c < 0 or self.deg_s < 0:
            raise ValueError("degrees must be >= 0")
        if self.objective_mode not in ("box-integral", "monte-carlo"):
            raise ValueError("objective_mode must be 'box-integral' or 'monte-carlo'")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")

    def warn_if_origin_outside_b(self) -> bool:
        """Warn when 0 is not in B (typical but not required). True if warned."""
        origin = (0.0,) * self.set_b.nvars
        if not contains(self.set_b, origin, 0.0):
            warnings.warn(
                "the origin is not contained in B; the P-difference is still "
                "well defined but results may be surprising",
                stacklevel=2,
            )
            return True
        return False


@dataclass(frozen=True)
class BoxCheckReport:
    """Outcome of the stochastic A-inside-box margin check."""

    n_sampled: int
    violations: int
    worst_point: tuple[float, ...] | None
    seed: int


def bounding_box_check(
    sas: SemiAlgebraicSet,
    box: Box,
    n_samples: int = 100_000,
    seed: int = 0,
) -> BoxCheckReport:
    """Rejection-sample the margin between the box and a 10% inflated copy.

    Any sampled point outside the box that satisfies every constraint is
    evidence that the box fails to contain the set.  Report-only: callers
    decide what to do with violations.
    """
    if box.dim != sas.nvars:
        raise ArityError("box dimension must match the set")
    rng = np.random.Generator(np.random.Philox(key=seed))
    inflated = box.inflate(1.1)
    lo = np.asarray(box.lower)
    hi = np.asarray(box.upper)
    found = 0
    collected = 0
    worst = None
    batch = max(1024, min(n_samples, 262_144))
    exps_coeffs = [p.to_arrays() for p in sas.constraints]
    while collected < n_samples:
        pts = inflated.sample(batch, rng)
        outside = np.any((pts < lo) | (pts > hi), axis=1)
        pts = pts[outside]
        if pts.shape[0] == 0:
            continue
        take = min(pts.shape[0], n_samples - collected)
        pts = pts[:take]
        collected += take
        inside = np.ones(take, dtype=bool)
        for exps, coeffs in exps_coeffs:
            vals = _eval_terms(pts, exps, coeffs)
            inside &= vals >= 0.0
        k = int(np.count_nonzero(inside))
        if k:
            found += k
            if worst is None:
                worst = tuple(float(v) for v in pts[inside][0])
    return BoxCheckReport(collected, found, worst, seed)


def _eval_terms(pts: np.ndarray, exps: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    vals = np.zeros(pts.shape[0])
    for t in range(coeffs.shape[0]):
        term = np.full(pts.shape[0], coeffs[t])
        for k in range(exps.shape[1]):
            e = exps[t, k]
            if e:
                term *= pts[:, k] ** e
        vals += term
    return vals


def set_to_strings(sas: SemiAlgebraicSet, variables: Sequence[str]) -> list[str]:
    return [format_polynomial(p, variables) for p in sas.constraints]
