import warnings

import pytest
from hypothesis import given
from hypothesis import strategies as st

from stabcert import formula as fm
from stabcert.polynomial import Polynomial, variables

from conftest import polynomials, small_rationals

x, y = variables("x", "y")
RELS = ("<", "<=", ">", ">=", "=")


@st.composite
def formulas(draw, depth=2):
    if depth == 0 or draw(st.booleans()):
        return fm.atom(draw(polynomials(vars=("x", "y"), max_degree=2, max_terms=3)), draw(st.sampled_from(RELS)))
    kids = draw(st.lists(formulas(depth=depth - 1), min_size=2, max_size=3))
    return draw(st.sampled_from([fm.conj, fm.disj]))(*kids)


plane = st.fixed_dictionaries({"x": small_rationals, "y": small_rationals})


@given(formulas(), plane)
def test_nnf_preserves_truth(f, pt):
    assert fm.evaluate(fm.nnf(fm.negate(f)), pt) == (not fm.evaluate(f, pt))


@given(formulas())
def test_closure_idempotent(f):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", fm.NonRegularClosureWarning)
        c = fm.syntactic_closure(f)
        assert fm.syntactic_closure(c) == c


@given(formulas(), plane)
def test_interior_inside_set_inside_closure(f, pt):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", fm.NonRegularClosureWarning)
        inner, outer = fm.syntactic_interior(f), fm.syntactic_closure(f)
    if fm.evaluate(inner, pt):
        assert fm.evaluate(f, pt)
    if fm.evaluate(f, pt):
        assert fm.evaluate(outer, pt)


def test_closure_of_open_ball():
    n2 = x**2 + y**2
    assert fm.syntactic_closure(fm.atom(n2, "<", 1)) == fm.atom(n2, "<=", 1)


def test_boundary_of_open_ball_is_the_sphere():
    b = fm.syntactic_boundary(fm.atom(x**2 + y**2, "<", 1))
    on, inside = {"x": 1, "y": 0}, {"x": 0, "y": 0}
    assert fm.evaluate(b, on) and not fm.evaluate(b, inside)
    assert not fm.evaluate(b, {"x": 1, "y": 1})


def test_closure_distributes_over_or():
    f = fm.disj(fm.atom(x, ">"), fm.atom(y, ">="))
    assert fm.syntactic_closure(f) == fm.disj(fm.atom(x, ">="), fm.atom(y, ">="))


def test_not_equal_rejected():
    with pytest.raises(fm.UnsupportedFormula):
        fm.syntactic_closure(fm.atom(x, "!="))


def test_non_square_free_atom_warns():
    with pytest.warns(fm.NonRegularClosureWarning):
        fm.syntactic_closure(fm.atom(-(x**2), ">"))
    assert not fm.is_square_free(x**2)
    assert fm.is_square_free(x**2 + y**2 - 1)


def test_atoms_are_canonical():
    assert fm.atom(x, "<=", 1) == fm.atom(1 - x, ">=")
    assert str(fm.atom(x, ">=", 1)) == "x - 1 >= 0"


def test_simplify_constant_atoms():
    assert fm.simplify(fm.conj(fm.atom(Polynomial.const(1), ">"), fm.atom(x, ">"))) == fm.atom(x, ">")
    assert fm.simplify(fm.atom(Polynomial.zero(), ">")) == fm.FALSE
