import numpy as np
import pytest

from sospdiff.objective import (
    ObjectiveFunctional,
    box_integral_weights,
    monte_carlo_weights,
    weight_discrepancy,
)
from sospdiff.polyring import monomial_basis
from sospdiff.semialg import Box


def quadrature_monomial_integral(box: Box, exps) -> float:
    """Independent oracle: tensorized 16-point Gauss-Legendre per axis."""
    nodes, weights = np.polynomial.legendre.leggauss(16)
    total = 1.0
    for (lo, hi), e in zip(zip(box.lower, box.upper), exps):
        x = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
        total *= 0.5 * (hi - lo) * float(np.sum(weights * x**e))
    return total


class TestBoxWeights:
    def test_textbook_integral(self):
        f = box_integral_weights(Box((0.0, 0.0), (1.0, 1.0)), [(2, 1)])
        assert f.weights[0] == pytest.approx(1.0 / 6.0, abs=1e-15)

    def test_odd_symmetry(self):
        f = box_integral_weights(Box((-1.0,), (1.0,)), [(1,)])
        assert f.weights[0] == pytest.approx(0.0, abs=1e-15)

    def test_against_quadrature_oracle(self):
        box = Box((-2.1, -2.1), (2.1, 2.1))
        monos = [(4, 2), (0, 0), (3, 3), (6, 0), (1, 4)]
        f = box_integral_weights(box, monos)
        for exps, w in zip(monos, f.weights):
            oracle = quadrature_monomial_integral(box, exps)
            assert w == pytest.approx(oracle, rel=1e-12, abs=1e-12)

    def test_volume_scaling_law(self):
        # Scaling the box by t scales weight_alpha by t^(|alpha| + n).
        monos = monomial_basis(2, 4)
        base = box_integral_weights(Box((-1.0, -1.0), (1.0, 1.0)), monos)
        scaled = box_integral_weights(Box((-2.0, -2.0), (2.0, 2.0)), monos)
        for exps, w1, w2 in zip(monos, base.weights, scaled.weights):
            t_pow = 2.0 ** (sum(exps) + 2)
            assert w2 == pytest.approx(w1 * t_pow, rel=1e-13, abs=1e-13)


class TestMonteCarloWeights:
    def test_single_point_at_origin(self):
        sampler = lambda n, rng: np.zeros((n, 2))
        monos = [(0, 0), (1, 0), (0, 1), (2, 0)]
        f = monte_carlo_weights(sampler, 1, 0, monos)
        np.testing.assert_array_equal(f.weights, [1.0, 0.0, 0.0, 0.0])

    def test_large_sample_matches_box_integral(self):
        box = Box((0.0, 0.0), (1.0, 1.0))
        f = monte_carlo_weights(box, 1_000_000, 42, [(2, 1)])
        assert f.weights[0] == pytest.approx(1.0 / 6.0, rel=0.01)

    def test_seed_determinism(self):
        box = Box((0.0, 0.0), (1.0, 1.0))
        monos = monomial_basis(2, 3)
        f1 = monte_carlo_weights(box, 10_000, 7, monos)
        f2 = monte_carlo_weights(box, 10_000, 7, monos)
        np.testing.assert_array_equal(f1.weights, f2.weights)

    def test_two_seeds_agree_on_positive_box(self):
        # On [0,1]^2 every monomial weight is strictly positive, so relative
        # comparison is meaningful for all degrees <= 10.
        box = Box((0.0, 0.0), (1.0, 1.0))
        monos = monomial_basis(2, 10)
        fa = monte_carlo_weights(box, 1_000_000, 1, monos)
        fb = monte_carlo_weights(box, 1_000_000, 2, monos)
        rel = np.abs(fa.weights - fb.weights) / np.abs(fa.weights)
        assert rel.max() < 0.02

    def test_root_n_convergence_rate(self):
        # Mean relative error should shrink about 10x from N=1e3 to N=1e5;
        # accept anything beyond a loose factor 10/3.
        box = Box((0.0, 0.0), (1.0, 1.0))
        monos = monomial_basis(2, 6)
        exact = box_integral_weights(box, monos)

        def mean_rel_err(n):
            f = monte_carlo_weights(box, n, 13, monos)
            return float(
                np.mean(np.abs(f.weights - exact.weights) / np.abs(exact.weights))
            )

        ratio = mean_rel_err(1_000) / mean_rel_err(100_000)
        assert ratio > 10.0 / 3.0

    def test_requires_positive_n(self):
        with pytest.raises(ValueError):
            monte_carlo_weights(Box((0.0,), (1.0,)), 0, 0, [(0,)])


def test_weight_discrepancy_reports_max_rel_gap():
    monos = ((0, 0), (2, 0))
    a = ObjectiveFunctional(monos, np.array([1.0, 1.0]), "box-integral")
    b = ObjectiveFunctional(monos, np.array([1.0, 1.01]), "monte-carlo", 10, 0)
    assert weight_discrepancy(a, b) == pytest.approx(0.01 / 1.01, rel=1e-12)


def test_weight_of_lookup():
    f = box_integral_weights(Box((0.0,), (1.0,)), [(0,), (3,)])
    assert f.weight_of((3,)) == pytest.approx(0.25)
    with pytest.raises(KeyError):
        f.weight_of((9,))
