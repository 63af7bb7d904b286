from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stabcert.polynomial import Polynomial, to_fraction, variables

from conftest import VARS, polynomials, small_rationals

points = st.fixed_dictionaries({v: small_rationals for v in VARS})


@settings(max_examples=200)
@given(polynomials(), polynomials(), polynomials())
def test_ring_laws(p, q, r):
    assert (p + q) + r == p + (q + r)
    assert p + q == q + p
    assert p * (q + r) == p * q + p * r
    assert (p * q) * r == p * (q * r)
    assert p - p == Polynomial.zero()
    assert p * 1 == p


@given(polynomials(), points)
def test_evaluation_is_a_ring_homomorphism(p, pt):
    q = p * p + 3 * p
    assert q.evaluate(pt) == p.evaluate(pt) ** 2 + 3 * p.evaluate(pt)


@given(polynomials())
def test_no_zero_coefficients_stored(p):
    assert all(c != 0 for c in p.terms.values())
    assert all(e >= 0 for exps in p.terms for e in exps)


@given(polynomials(), polynomials())
def test_product_rule_for_partial_derivatives(p, q):
    for x in VARS:
        assert (p * q).diff(x) == p.diff(x) * q + p * q.diff(x)


@given(polynomials(), points)
def test_compile_matches_exact_evaluation(p, pt):
    f = p.compile(VARS)
    X = np.array([[float(pt[v]) for v in VARS]])
    assert f(X)[0] == pytest.approx(float(p.evaluate(pt)), rel=1e-9, abs=1e-9)


@given(polynomials(), points)
def test_subs_then_evaluate(p, pt):
    assert p.subs(pt).constant_term() == p.evaluate(pt)
    assert p.subs(pt).is_constant()


def test_variable_order_is_canonical():
    a = Polynomial({(1, 2): 3}, ("y", "x"))
    b = Polynomial({(2, 1): 3}, ("x", "y"))
    assert a == b and hash(a) == hash(b)


def test_printing():
    x, y = variables("x", "y")
    assert str(Fraction(1, 2) * x**2 - 3 * x * y) == "1/2*x^2 - 3*x*y"
    assert str(Polynomial.zero()) == "0"


def test_degree_and_homogeneous_parts():
    x, y = variables("x", "y")
    p = x**4 - x**2 + 3 * x * y + 1
    assert p.degree() == 4
    parts = p.homogeneous_parts()
    assert parts[2] == -(x**2) + 3 * x * y
    assert parts[0] == Polynomial.const(1)
    assert sum(parts.values(), Polynomial.zero()) == p


def test_decimal_strings_are_exact_and_floats_refused():
    assert to_fraction("0.25") == Fraction(1, 4)
    with pytest.raises(TypeError):
        to_fraction(0.5)


def test_bad_exponents_rejected():
    with pytest.raises(ValueError):
        Polynomial({(-1,): 1}, ("x",))
    with pytest.raises(ValueError):
        Polynomial({(1, 1): 1}, ("x",))
