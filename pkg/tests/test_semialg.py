import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sospdiff.polyring import Polynomial, format_polynomial
from sospdiff.semialg import (
    Box,
    ParseError,
    ProblemSpec,
    SemiAlgebraicSet,
    ToleranceSet,
    bounding_box_check,
    contains,
    parse_polynomial,
    set_to_strings,
)

V2 = ["x1", "x2"]
V3 = ["x1", "x2", "x3"]

# Defining expressions of the regression rows, kept verbatim in one place.
TABLE_ROWS = {
    "fig2": ("0.1 - x1^4 - x2^4 + 10*x1^2 - x2^2", "1 - x1^2 - x2^2", V2, 4, 2),
    "fig3": (
        "x2^4 - (x1 - 0.5)^3 - (x1 - 0.5)^4",
        "0.1 - 2*x1^2 - 16*x2^2",
        V2,
        4,
        2,
    ),
    "fig4": (
        "4 - x1^2 - x2^2",
        "0.1 - 25*x1^2*x2^2 - 0.05*(x1 + x2)^2",
        V2,
        2,
        4,
    ),
    "fig5": (
        "-(x1^2 + x2^2 + x3^2)^3 + 3*(x1^2 + x2^2 + x3^2)^2"
        " - 9*(x1^2 + x2^2 + 3) + 16*(x1^3 - 3*x1*x2^2 + 2*x3^2)",
        "0.1 - x1^2 - x2^2 - 4*x3^2",
        V3,
        6,
        2,
    ),
    "fig6": (
        "1 - x1^6 - x2^6 - x3^6 + 5*x1^4*x2*x3 - 3*x1^4*x2^2"
        " - 10*x1^2*x2^3*x3 - 3*x1^2*x2^4 + x2^5*x3",
        "0.0001 - x1^6 - x2^6 - x3^6",
        V3,
        6,
        6,
    ),
}


class TestParser:
    def test_bowtie_expression(self):
        p = parse_polynomial(TABLE_ROWS["fig2"][0], V2)
        assert p == Polynomial(
            2, {(0, 0): 0.1, (4, 0): -1.0, (0, 4): -1.0, (2, 0): 10.0, (0, 2): -1.0}
        )

    def test_cancellation_to_zero(self):
        assert parse_polynomial("x1 - x1", V2).is_zero()

    def test_parenthesized_power(self):
        p = parse_polynomial("(x1 + x2)^2", V2)
        assert p == Polynomial(2, {(2, 0): 1.0, (1, 1): 2.0, (0, 2): 1.0})

    def test_scientific_literal(self):
        p = parse_polynomial("1e-4 - x1^2", ["x1"])
        assert p.coefficient((0,)) == 1e-4

    def test_negative_exponent_rejected_with_position(self):
        with pytest.raises(ParseError) as err:
            parse_polynomial("x1^-2", ["x1"])
        assert err.value.position == 3

    def test_fractional_exponent_rejected(self):
        with pytest.raises(ParseError):
            parse_polynomial("x1^1.5", ["x1"])

    def test_unknown_identifier(self):
        with pytest.raises(ParseError, match="unknown identifier"):
            parse_polynomial("x1 + y1", V2)

    def test_trailing_garbage(self):
        with pytest.raises(ParseError):
            parse_polynomial("x1 + 2 )", V2)

    def test_double_operator(self):
        with pytest.raises(ParseError):
            parse_polynomial("x1 +* x2", V2)

    def test_malformed_number(self):
        with pytest.raises(ParseError):
            parse_polynomial("1.2.3 + x1", V2)

    @pytest.mark.parametrize("name", sorted(TABLE_ROWS))
    def test_regression_rows_parse_with_expected_degrees(self, name):
        a_text, b_text, names, deg_a, deg_b = TABLE_ROWS[name]
        a = parse_polynomial(a_text, names)
        b = parse_polynomial(b_text, names)
        assert a.degree == deg_a
        assert b.degree == deg_b

    @pytest.mark.parametrize("name", sorted(TABLE_ROWS))
    def test_round_trip_table_rows(self, name):
        a_text, b_text, names, _, _ = TABLE_ROWS[name]
        for text in (a_text, b_text):
            p = parse_polynomial(text, names)
            assert parse_polynomial(format_polynomial(p, names), names) == p


exps_st = st.tuples(st.integers(0, 5), st.integers(0, 5))
poly_st = st.dictionaries(
    exps_st, st.floats(-100, 100, allow_nan=False, allow_infinity=False), max_size=8
).map(lambda t: Polynomial(2, t))


@settings(max_examples=80, deadline=None)
@given(poly_st)
def test_print_parse_round_trip(p):
    assert parse_polynomial(format_polynomial(p, V2), V2) == p


class TestContains:
    disk = SemiAlgebraicSet.from_strings(["4 - x1^2 - x2^2"], V2, "disk")

    def test_center(self):
        assert contains(self.disk, (0.0, 0.0))

    def test_outside(self):
        assert not contains(self.disk, (3.0, 0.0), 0.0)

    def test_bowtie_origin(self):
        bowtie = SemiAlgebraicSet.from_strings([TABLE_ROWS["fig2"][0]], V2)
        assert contains(bowtie, (0.0, 0.0))

    def test_slack_monotone(self):
        pt = (2.04, 0.0)  # barely outside
        for t1, t2 in [(0.0, 0.2), (0.1, 0.5), (0.2, 2.0)]:
            if contains(self.disk, pt, t1):
                assert contains(self.disk, pt, t2)

    def test_negative_slack_rejected(self):
        with pytest.raises(ValueError):
            contains(self.disk, (0.0, 0.0), -1.0)


class TestBoundingBoxCheck:
    disk = SemiAlgebraicSet.from_strings(["4 - x1^2 - x2^2"], V2)

    def test_disk_fits_in_its_box(self):
        report = bounding_box_check(self.disk, Box((-2.1, -2.1), (2.1, 2.1)), 100_000, 0)
        assert report.violations == 0
        assert report.n_sampled == 100_000

    def test_undersized_box_caught(self):
        report = bounding_box_check(self.disk, Box((-1.0, -1.0), (1.0, 1.0)), 100_000, 0)
        assert report.violations > 0
        assert report.worst_point is not None
        assert contains(self.disk, report.worst_point)

    def test_empty_set_never_violates(self):
        empty = SemiAlgebraicSet.from_strings(["-1 - x1^2"], ["x1"])
        report = bounding_box_check(empty, Box((-1.0,), (1.0,)), 20_000, 0)
        assert report.violations == 0

    def test_deterministic(self):
        r1 = bounding_box_check(self.disk, Box((-1.5, -1.5), (1.5, 1.5)), 20_000, 3)
        r2 = bounding_box_check(self.disk, Box((-1.5, -1.5), (1.5, 1.5)), 20_000, 3)
        assert r1 == r2


class TestProblemSpec:
    def make(self, **kw):
        base = dict(
            set_a=SemiAlgebraicSet.from_strings(["4 - x1^2 - x2^2"], V2),
            set_b=SemiAlgebraicSet.from_strings(["0.25 - x1^2 - x2^2"], V2),
            region=Box((-2.1, -2.1), (2.1, 2.1)),
            b_box=Box((-0.5, -0.5), (0.5, 0.5)),
            deg_c=2,
            deg_s=2,
        )
        base.update(kw)
        return ProblemSpec(**base)

    def test_valid(self):
        spec = self.make()
        assert spec.deg_c == 2

    def test_dimension_mismatch(self):
        with pytest.raises(Exception):
            self.make(region=Box((-1.0,), (1.0,)))

    def test_negative_degree(self):
        with pytest.raises(ValueError):
            self.make(deg_c=-1)

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            self.make(objective_mode="quadrature")

    def test_origin_warning_fires(self):
        spec = self.make(
            set_b=SemiAlgebraicSet.from_strings(["0.25 - (x1 - 1)^2 - x2^2"], V2),
            b_box=Box((0.5, -0.5), (1.5, 0.5)),
        )
        with pytest.warns(UserWarning):
            assert spec.warn_if_origin_outside_b()

    def test_no_warning_when_origin_inside(self):
        spec = self.make()
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert not spec.warn_if_origin_outside_b()


class TestToleranceSet:
    def test_defaults_positive(self):
        tol = ToleranceSet()
        assert tol.sdp_gap > 0 and tol.psd_margin > 0 and tol.residual_max > 0

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            ToleranceSet(sdp_gap=0.0)

    def test_rejects_unknown_mode(self):
        with pytest.raises(ValueError):
            ToleranceSet(shrink_epsilon_mode="maybe")


def test_box_validation():
    with pytest.raises(ValueError):
        Box((0.0, 0.0), (1.0, 0.0))


def test_set_to_strings_round_trip():
    sas = SemiAlgebraicSet.from_strings([TABLE_ROWS["fig4"][1]], V2)
    texts = set_to_strings(sas, V2)
    again = SemiAlgebraicSet.from_strings(texts, V2)
    assert again.constraints == sas.constraints
