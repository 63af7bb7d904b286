import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stabcert import formula as fm
from stabcert.frontend import corpus_get, corpus_list
from stabcert.frontend.runner import instances
from stabcert.polynomial import Polynomial, variables
from stabcert.simulate import EmpiricalConfig, integrate
from stabcert.system import (
    CoordinateSubspace,
    FormulaTarget,
    InputError,
    NonEquilibriumWarning,
    OdeSystem,
    Origin,
    UnsupportedNeighborhood,
    equilibrium_check,
    lie_derivative,
    neighborhood,
    translate_to_origin,
)

from conftest import VARS, moore_greitzer, pendulum, pendulum_v, polynomials, rigid_body, small_rationals

F4 = OdeSystem(VARS, tuple(Polynomial({(1, 0, 0, 0): 1, (0, 1, 1, 0): -2}, VARS) * k for k in (1, -1, 2, 1)))


@given(polynomials(), polynomials())
def test_leibniz(p, q):
    lp, lq = lie_derivative(p, F4), lie_derivative(q, F4)
    assert lie_derivative(p * q, F4) == lp * q + p * lq


@given(polynomials(), polynomials(), small_rationals)
def test_lie_derivative_is_linear(p, q, c):
    assert lie_derivative(p + c * q, F4) == lie_derivative(p, F4) + c * lie_derivative(q, F4)


def test_constant_has_zero_derivative(pend):
    assert lie_derivative(7, pend).is_zero()


def test_pendulum_with_symbolic_friction():
    th, om, a, b = variables("theta", "omega", "a", "b")
    ode = OdeSystem(("theta", "omega"), (om, -a * th - b * om), ("a", "b"))
    v = a * th**2 / 2 + ((b * th + om) ** 2 + om**2) / 4
    assert lie_derivative(v, ode) == -b / 2 * (a * th**2 + om**2)


def test_unknown_variable_rejected(pend):
    with pytest.raises(InputError):
        lie_derivative(Polynomial.var("z"), pend)


def test_parameter_overlap_rejected():
    x = Polynomial.var("x")
    with pytest.raises(InputError):
        OdeSystem(("x",), (x,), ("x",))


def _shift(ode: OdeSystem, x0, h: float, backward: bool) -> np.ndarray:
    if backward:
        ode = OdeSystem(ode.state_vars, tuple(-f for f in ode.rhs))
    return integrate(ode, x0, EmpiricalConfig(rtol=1e-12, atol=1e-14), horizon=h).states[-1]


def _fd_error(ode, p, x0, h):
    f = p.compile(ode.state_vars)
    fwd, bwd = _shift(ode, x0, h, False), _shift(ode, x0, h, True)
    fd = (f(fwd[None, :])[0] - f(bwd[None, :])[0]) / (2 * h)
    exact = float(lie_derivative(p, ode).evaluate(dict(zip(ode.state_vars, map(Fraction, x0)))))
    return abs(fd - exact)


def corpus_systems():
    out = []
    for name in corpus_list():
        kept, _ = instances(corpus_get(name))
        inst = kept[0]
        p = inst.v if inst.v is not None else Polynomial.sum_of_squares(inst.ode.state_vars)
        out.append(pytest.param(inst.ode, p, id=name))
    return out


@pytest.mark.parametrize("ode,p", corpus_systems())
def test_finite_difference_matches_lie_derivative(ode, p):
    rng = np.random.default_rng(1)
    x0 = [float(Fraction(round(c, 3)).limit_denominator(1000)) for c in rng.uniform(-0.4, 0.4, ode.dim)]
    e1, e2 = _fd_error(ode, p, x0, 0.02), _fd_error(ode, p, x0, 0.01)
    if e1 < 1e-9:
        assert e2 < 1e-8
    else:
        # central differences are second order: halving h divides the error by about 4
        assert e2 < e1 / 3


@settings(max_examples=50)
@given(st.fractions(0, 2, max_denominator=8), st.fractions(0, 2, max_denominator=8),
       st.fixed_dictionaries({v: small_rationals for v in ("x1", "x2", "x3")}))
def test_neighborhood_monotone(e1, e2, pt):
    lo, hi = sorted((e1 + Fraction(1, 100), e2 + Fraction(1, 100)))
    for target in (Origin(), CoordinateSubspace(("x2", "x3"))):
        if fm.evaluate(neighborhood(target, lo, ("x1", "x2", "x3")), pt):
            assert fm.evaluate(neighborhood(target, hi, ("x1", "x2", "x3")), pt)


def test_neighborhood_shapes():
    x1, x2, x3 = variables("x1", "x2", "x3")
    assert neighborhood(Origin(), 1, ("x1", "x2")) == fm.atom(x1**2 + x2**2, "<", 1)
    assert neighborhood(CoordinateSubspace(("x2", "x3")), Fraction(1, 2), ("x1", "x2", "x3")) == \
        fm.atom(x2**2 + x3**2, "<", Fraction(1, 4))
    with pytest.raises(UnsupportedNeighborhood):
        neighborhood(FormulaTarget(fm.atom(x1 * x2, ">=")), 1, ("x1", "x2"))
    with pytest.raises(InputError):
        neighborhood(Origin(), 0, ("x1",))


def test_translate_affine_shift():
    x = Polynomial.var("x")
    moved = translate_to_origin(OdeSystem(("x",), (-(x - 1),)), [1])
    assert moved.rhs == (-x,)


def test_translate_identity(pend):
    assert translate_to_origin(pend, [0, 0]).rhs == pend.rhs


def test_translate_non_equilibrium_warns():
    x = Polynomial.var("x")
    with pytest.warns(NonEquilibriumWarning):
        moved = translate_to_origin(OdeSystem(("x",), (x**2,)), [2])
    assert moved.rhs == (x**2 + 4 * x + 4,)
    with pytest.raises(InputError):
        translate_to_origin(OdeSystem(("x",), (x,)), [1, 2])


def test_equilibrium_check():
    x = Polynomial.var("x")
    assert equilibrium_check(moore_greitzer(), [0, 0]) is True
    assert equilibrium_check(OdeSystem(("x",), (x**2,)), [2]) is False
    th, om, a, b = variables("theta", "omega", "a", "b")
    ode = OdeSystem(("theta", "omega"), (om, -a * th - b * om), ("a", "b"))
    assert equilibrium_check(ode, [0, 0]) is True
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        res = equilibrium_check(OdeSystem(("x",), (x - a,), ("a",)), [1])
    assert isinstance(res, fm.Atom)


def test_example_lie_derivatives():
    assert lie_derivative(pendulum_v(), pendulum()) == -(Polynomial.sum_of_squares(("theta", "omega"))) / 2
    x2, x3 = variables("x2", "x3")
    v = (Fraction(1, 1) * x2**2 - (-2) * Fraction(1, 2) * x3**2) / 2  # I = (3, 2, 1)
    assert lie_derivative(v, rigid_body()).is_zero()
