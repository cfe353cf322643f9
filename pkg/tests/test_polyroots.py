import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from porostab.errors import DegenerateAllZero, UnsupportedDegree, ZeroLeadingCoefficient
from porostab.model import ModelParams, steady_state
from porostab.polyroots import max_growth_rate, poly_roots, routh_hurwitz


def sorted_roots(z):
    z = np.asarray(z, dtype=complex)
    return z[np.lexsort((z.imag, z.real))]


def random_real_poly(rng, degree, re_range=(-3.0, 3.0)):
    """Monic real polynomial from conjugate pairs and real roots."""
    roots = []
    while len(roots) < degree:
        if degree - len(roots) >= 2 and rng.random() < 0.5:
            z = complex(rng.uniform(*re_range), rng.uniform(0.1, 3.0))
            roots += [z, z.conjugate()]
        else:
            roots.append(complex(rng.uniform(*re_range), 0.0))
    return np.real(np.poly(roots)), np.array(roots)


class TestPolyRoots:
    def test_pure_imaginary_pair(self):
        np.testing.assert_allclose(sorted_roots(poly_roots([1, 0, 4])), [-2j, 2j], atol=1e-12)

    def test_factored_cubic(self):
        np.testing.assert_allclose(sorted_roots(poly_roots([1, -6, 11, -6])), [1, 2, 3], atol=1e-10)

    def test_construct_then_solve_degree5(self, rng):
        for _ in range(50):
            roots = rng.uniform(-2, 2, 5) + 1j * rng.uniform(-2, 2, 5)
            got = poly_roots(np.poly(roots))
            dist = np.abs(np.subtract.outer(got, roots))
            assert np.all(dist.min(axis=0) < 1e-8)

    def test_residual_bound(self, rng):
        for degree in (2, 3, 5):
            for _ in range(100):
                c = rng.normal(size=degree + 1)
                z = poly_roots(c)
                bound = np.array([np.sum(np.abs(c[::-1]) * abs(zi) ** np.arange(degree + 1)) for zi in z])
                assert np.all(np.abs(np.polyval(c, z)) <= 1e-10 * bound)

    def test_leading_zeros_stripped(self):
        np.testing.assert_allclose(sorted_roots(poly_roots([0.0, 0.0, 1, -3, 2])), [1, 2], atol=1e-12)

    def test_zero_roots_deflated(self):
        z = poly_roots([1.0, 1.0, 0.0, 0.0])
        assert np.sum(z == 0) == 2

    def test_all_zero(self):
        with pytest.raises(DegenerateAllZero):
            poly_roots([0.0, 0.0])

    def test_multiple_root(self):
        z = poly_roots(np.poly([-1, -1, -1, -1, -1]))
        assert np.abs(z + 1).max() < 1e-2


    @settings(max_examples=200, deadline=None)
    @given(st.floats(1e-6, 1e6), st.floats(-1e6, 1e6, allow_subnormal=False), st.floats(-1e6, 1e6, allow_subnormal=False))
    def test_quadratic_vieta(self, a, b, c):
        z = poly_roots([a, b, c])
        scale = abs(b / a) + 1e-300
        assert abs(z.sum() + b / a) <= 1e-12 * max(scale, abs(z).max())
        assert abs(z.prod() - c / a) <= 1e-12 * max(abs(c / a), abs(z).max() ** 2, 1e-300)

    def test_quadratic_cancellation(self):
        # x^2 + 1e8 x + 1: the small root is -1e-8 to full precision
        small = poly_roots([1.0, 1e8, 1.0]).real.max()
        assert small == pytest.approx(-1e-8, rel=1e-14)


class TestMaxGrowth:
    def test_triple_root(self):
        # a triple root is only resolved to about eps**(1/3)
        assert max_growth_rate([1, 3, 3, 1]) == pytest.approx(-1.0, abs=1e-4)

    def test_imaginary(self):
        assert max_growth_rate([1, 0, 4]) == pytest.approx(0.0, abs=1e-12)

    def test_homogeneous_quadratic_unstable(self):
        p = ModelParams(beta2=0.0, beta3=0.5)
        ss = steady_state(p)
        q = [p.rho * p.c0, -p.rho * p.c0 * ss.trace, p.rho * p.c0 * ss.det]
        assert max_growth_rate(q) > 0


class TestRouthHurwitz:
    def test_stable_cube(self):
        rep = routh_hurwitz([1, 3, 3, 1], 3)
        assert rep.all_satisfied and rep.value("C2") == 8

    def test_boundary_is_violation(self):
        rep = routh_hurwitz([1] * 6, 5)
        assert rep.value("C2") == 0 and not rep.all_satisfied and rep.first_violated == "C2"

    def test_labels(self):
        assert [k for k, _ in routh_hurwitz([1] * 6).condition_values] == ["a0", "a1", "a2", "a3", "a4", "a5", "C2", "C3", "C4"]
        assert [k for k, _ in routh_hurwitz([1] * 4).condition_values] == ["a0", "a1", "a2", "a3", "C2"]
        assert [k for k, _ in routh_hurwitz([1] * 3).condition_values] == ["a0", "a1", "a2"]

    def test_reference_homogeneous_quadratic(self, defaults):
        ss = steady_state(defaults)
        rc0 = defaults.rho * defaults.c0
        assert routh_hurwitz([rc0, -rc0 * ss.trace, rc0 * ss.det], 2).all_satisfied

    def test_errors(self):
        with pytest.raises(UnsupportedDegree):
            routh_hurwitz([1, 1, 1, 1, 1], 4)
        with pytest.raises(ZeroLeadingCoefficient):
            routh_hurwitz([0, 1, 1], 2)

    def test_agrees_with_roots(self, rng):
        checked = 0
        for degree in (2, 3, 5):
            for _ in range(1000):
                c, roots = random_real_poly(rng, degree)
                top = roots.real.max()
                if abs(top) < 1e-7:
                    continue
                assert routh_hurwitz(c, degree).all_satisfied == (top < 0)
                checked += 1
        assert checked > 2900

    @given(st.lists(st.floats(-5, 5, allow_subnormal=False), min_size=6, max_size=6), st.floats(1e-3, 1e3))
    @settings(max_examples=200, deadline=None)
    def test_scaling_invariance(self, coeffs, scale):
        if coeffs[0] == 0:
            coeffs[0] = 1.0
        a = routh_hurwitz(coeffs, 5).all_satisfied
        b = routh_hurwitz([scale * c for c in coeffs], 5).all_satisfied
        assert a == b
