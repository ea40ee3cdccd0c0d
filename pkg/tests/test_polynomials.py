from fractions import Fraction

import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from freepoisson.partitions import all_partitions, is_noncrossing
from freepoisson.polynomials import (OrthogonalPolySpec, PolyKind, linearize, poly_coeffs, poly_mul,
                                     verify_product_identity)


def nc_moments(kappa, n_max):
    """Moments from free cumulants by summing over NC(n) directly."""
    out = [Fraction(1)]
    for n in range(1, n_max + 1):
        tot = Fraction(0)
        for p in all_partitions(n):
            if is_noncrossing(p):
                term = Fraction(1)
                for b in p.blocks:
                    term *= kappa(len(b))
                tot += term
        out.append(tot)
    return out


def integrate(coeffs, moments):
    return sum(c * moments[i] for i, c in enumerate(coeffs))


def test_low_degrees():
    assert poly_coeffs(OrthogonalPolySpec("charlier", 1, 0)) == [1]
    assert poly_coeffs(OrthogonalPolySpec("tchebycheff", 2, 1)) == [0, 1]
    # x^2 - x - lam and x^2 - t
    assert poly_coeffs(OrthogonalPolySpec("charlier", 3, 2)) == [-3, -1, 1]
    assert poly_coeffs(OrthogonalPolySpec("tchebycheff", 3, 2)) == [-3, 0, 1]


def test_spec_validation():
    with pytest.raises(ValueError):
        OrthogonalPolySpec("charlier", 1, -1)
    with pytest.raises(ValueError):
        OrthogonalPolySpec("charlier", 0, 2)
    with pytest.raises(ValueError):
        PolyKind.parse("hermite")


def test_tchebycheff_matches_scaled_chebyshev_u():
    x = sympy.symbols("x")
    t = sympy.Rational(3, 2)
    for m in range(8):
        ref = sympy.expand(t ** sympy.Rational(m, 2) * sympy.chebyshevu(m, x / (2 * sympy.sqrt(t))))
        got = poly_coeffs(OrthogonalPolySpec("tchebycheff", Fraction(3, 2), m))
        coeffs = sympy.Poly(ref, x).all_coeffs()[::-1]
        assert [sympy.Rational(c.numerator, c.denominator) for c in got] == coeffs


@pytest.mark.parametrize("lam", [Fraction(1), Fraction(5, 3)])
def test_charlier_orthogonality(lam):
    mom = nc_moments(lambda k: Fraction(0) if k == 1 else lam, 10)
    polys = [poly_coeffs(OrthogonalPolySpec("charlier", lam, d)) for d in range(6)]
    for i, a in enumerate(polys):
        for j, b in enumerate(polys[: 10 - i + 1]):
            if i + j > 10:
                continue
            val = integrate(poly_mul(a, b), mom)
            assert val == (lam ** i if i == j else 0)


def test_tchebycheff_orthogonality():
    t = Fraction(2)
    mom = nc_moments(lambda k: t if k == 2 else Fraction(0), 10)
    polys = [poly_coeffs(OrthogonalPolySpec("tchebycheff", t, d)) for d in range(6)]
    for i, a in enumerate(polys):
        for j, b in enumerate(polys):
            if i + j <= 10:
                assert integrate(poly_mul(a, b), mom) == (t ** i if i == j else 0)


@pytest.mark.parametrize("kind", ["charlier", "tchebycheff"])
def test_product_identity_exact(kind):
    for m in range(7):
        for n in range(7):
            rep = verify_product_identity(m, n, Fraction(7, 5), kind)
            assert rep.max_discrepancy == 0


@given(st.integers(0, 6), st.integers(0, 6), st.floats(0.05, 5.0), st.sampled_from(["charlier", "tchebycheff"]))
def test_product_identity_float(m, n, p, kind):
    assert verify_product_identity(m, n, p, kind).ok


def test_linearize_trivial_cases():
    assert linearize(0, 4, 2, "charlier") == {4: 1}
    assert linearize(1, 1, 2, "tchebycheff") == {2: 1, 0: 2}
    assert linearize(1, 1, 2, "charlier") == {2: 1, 0: 2, 1: 1}
