from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stabcert import certify as cf
from stabcert import formula as fm
from stabcert.interval import eval_interval
from stabcert.polynomial import Polynomial, variables
from stabcert.quadform import gram_matrix, ldlt, quadratic_value

from conftest import eigen_oracle, pendulum_v, polynomials, region_points, small_rationals

th, om = variables("theta", "omega")
x, x1, x2 = variables("x", "x1", "x2")
TW = ("theta", "omega")


def test_quadratic_form_examples():
    v = pendulum_v()
    n2 = th**2 + om**2
    assert cf.check_quadratic_form(v - n2 / 4, "PSD", TW).is_proved
    assert cf.check_quadratic_form(n2 - v, "PSD", TW).is_proved
    assert cf.check_quadratic_form(x1**2 + x2**2, "PD").is_proved
    res = cf.check_quadratic_form(x1**2 - x2**2, "PSD", ("x1", "x2"))
    assert res.is_disproved
    assert (x1**2 - x2**2).evaluate(res.witness) < 0
    assert res.witness == {"x1": 0, "x2": 1}


def test_quadratic_form_rejects_other_shapes():
    assert cf.check_quadratic_form(x**2 + 1, "PSD").status is cf.Status.UNKNOWN
    assert cf.check_quadratic_form(x**4, "PSD").info["detail"]


def test_pendulum_gram_matrix_matches_hand_value():
    Q = gram_matrix(pendulum_v(), TW)
    assert Q == [[Fraction(3, 4), Fraction(1, 4)], [Fraction(1, 4), Fraction(1, 2)]]
    assert eigen_oracle(Q) == "PD"
    assert all(d > 0 for d in ldlt(Q).pivots)


@st.composite
def symmetric_matrices(draw, max_dim=4):
    n = draw(st.integers(1, max_dim))
    Q = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            Q[i][j] = Q[j][i] = draw(small_rationals)
    return Q


@given(symmetric_matrices())
def test_ldlt_witness_has_wrong_sign(Q):
    fac = ldlt(Q)
    if not fac.psd:
        assert quadratic_value(Q, fac.witness) < 0


def _form(Q, names):
    p = Polynomial.zero()
    for i, j in product(range(len(Q)), repeat=2):
        p = p + Q[i][j] * Polynomial.var(names[i]) * Polynomial.var(names[j])
    return p


def test_quadratic_form_agrees_with_eigenvalue_oracle():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 100:
        n = int(rng.integers(1, 5))
        # mix definite, semidefinite and indefinite forms
        A = rng.integers(-3, 4, size=(n, n))
        kind = checked % 3
        M = A @ A.T if kind == 0 else (A + A.T) if kind == 1 else A[:, : max(1, n - 1)] @ A[:, : max(1, n - 1)].T
        Q = [[Fraction(int(M[i, j])) for j in range(n)] for i in range(n)]
        names = tuple(f"y{i}" for i in range(n))
        q = _form(Q, names)
        if q.is_zero():
            continue
        oracle = eigen_oracle(Q)
        checked += 1
        pd = cf.check_quadratic_form(q, "PD", names)
        psd = cf.check_quadratic_form(q, "PSD", names)
        bb = cf.check_sign_bb(cf.SignCondition(q, ">=", cf.Box.cube(names, 1), names), cf.Budget(max_boxes=500))
        if oracle == "PD":
            assert pd.is_proved and psd.is_proved and not bb.is_disproved
        elif oracle == "INDEF":
            assert psd.is_disproved and pd.is_disproved and not bb.is_proved
        elif oracle == "ND":
            assert psd.is_disproved
        if psd.is_proved:
            assert oracle in ("PD", None)


def test_sign_bb_examples():
    cond = cf.SignCondition(-(th**2 + om**2) / 2, "<=", cf.Box.cube(TW, 1), TW)
    assert cf.check_sign_bb(cond).is_proved
    one = cf.check_sign_bb(cf.SignCondition(Polynomial.const(1), ">", cf.Box.cube(("x",), 1), ("x",)))
    assert one.is_proved and one.info["depth"] == 0
    bad = cf.check_sign_bb(cf.SignCondition(x**2 - Fraction(1, 2), ">=", cf.Box(("x",), ((0, 1),)), ("x",)))
    assert bad.is_disproved
    assert bad.witness["x"] ** 2 < Fraction(1, 2)


SOUNDNESS_CASES = [
    (x1**2 + x2**2 + Fraction(1, 10), ">", cf.Box.cube(("x1", "x2"), 1)),
    (x1**4 - x1 * x2 + 1, ">", cf.Box.cube(("x1", "x2"), 1)),
    (-(x1**2) - x1 * x2 - x2**2 - Fraction(1, 10), "<", cf.Ball(Fraction(1, 2))),
    (x1**2 * x2**2 + x1**2 + 1 - x2, ">=", cf.Box(("x1", "x2"), ((-1, 2), (0, 1)))),
    (3 - x1**3 - x2, ">", cf.Annulus(Fraction(1, 4), Fraction(1))),
    (x1**2 + x2**2 - x1 * x2, ">", cf.PuncturedBall(Fraction(1))),
]


@pytest.mark.parametrize("poly,rel,region", SOUNDNESS_CASES)
def test_branch_and_bound_soundness(poly, rel, region):
    cond = cf.SignCondition(poly, rel, region, ("x1", "x2"))
    res = cf.check_sign_bb(cond)
    assert res.is_proved
    for pt in region_points(cond, 10_000, seed=3):
        if isinstance(region, cf.PuncturedBall) and not any(pt.values()):
            continue
        assert cond.holds_at(pt)


@settings(max_examples=60)
@given(polynomials(vars=("x1", "x2"), max_degree=4), st.sampled_from([">=", ">", "<=", "<"]))
def test_disproved_witness_reverifies(p, rel):
    cond = cf.SignCondition(p, rel, cf.Box.cube(("x1", "x2"), 1), ("x1", "x2"))
    res = cf.check_sign_bb(cond, cf.Budget(max_depth=8, max_boxes=500))
    if res.is_disproved:
        assert not cond.holds_at(res.witness)
        assert fm.evaluate(cond.region_formula(), res.witness)
    elif res.is_proved:
        for pt in region_points(cond, 200, seed=0):
            assert cond.holds_at(pt)


@settings(max_examples=40)
@given(polynomials(vars=("x1", "x2"), max_degree=3))
def test_budget_monotone(p):
    cond = cf.SignCondition(p, ">=", cf.Box.cube(("x1", "x2"), 1), ("x1", "x2"))
    small = cf.check_sign_bb(cond, cf.Budget(max_depth=4, max_boxes=50))
    large = cf.check_sign_bb(cond, cf.Budget(max_depth=12, max_boxes=5000))
    if not small.is_unknown:
        assert small.status is large.status


@given(polynomials(vars=("x1", "x2"), max_degree=3),
       st.fixed_dictionaries({"x1": small_rationals, "x2": small_rationals}))
def test_interval_enclosure(p, pt):
    box = {k: (v - Fraction(1, 3), v + Fraction(1, 2)) for k, v in pt.items()}
    enc = eval_interval(p, box)
    assert enc.lo <= p.evaluate(pt) <= enc.hi


def test_ball_handles_tight_origin():
    q = -(x1**2) - x1 * x2 - x2**2
    assert cf.check_ball(q, "<=", Fraction(1, 2), ("x1", "x2")).is_proved
    assert cf.check_sign_bb(cf.SignCondition(q, "<=", cf.Ball(Fraction(1, 2)), ("x1", "x2"))).is_unknown


def test_punctured_positivity_examples():
    assert cf.check_punctured_positivity(pendulum_v(), 1, TW).is_proved
    bad = cf.check_punctured_positivity(Polynomial.const(1), 1, ("y",))
    assert bad.is_disproved and bad.witness == {"y": 0}
    assert cf.check_punctured_positivity(x**4, 1, ("x",)).is_proved


def test_global_examples():
    v = pendulum_v()
    n2 = th**2 + om**2
    lv = -(n2) / 2
    assert cf.check_global(cf.SignCondition(v - n2 / 4, ">=", cf.Global(), TW)).is_proved
    assert cf.check_global(cf.SignCondition(-Fraction(1, 2) * v - lv, ">=", cf.Global(), TW)).is_proved
    res = cf.check_global(cf.SignCondition(x**4 - x**2, ">=", cf.Global(), ("x",)))
    assert res.is_disproved
    w = res.witness["x"]
    assert 0 < abs(w) < 1
    assert (x**4 - x**2).evaluate(res.witness) < 0


def test_radial_unboundedness_examples():
    assert cf.check_radial_unboundedness(x1**2 + x2**2).is_proved
    res = cf.check_radial_unboundedness((x1 - x2) ** 2, ("x1", "x2"))
    assert res.is_disproved and res.witness["x1"] == res.witness["x2"]
    assert cf.check_radial_unboundedness(pendulum_v(), TW).is_proved
    assert eigen_oracle(gram_matrix(pendulum_v(), TW)) == "PD"


def test_falsify_examples():
    cond = cf.SignCondition(x**2 - Fraction(1, 2), ">=", cf.Box(("x",), ((0, 1),)), ("x",))
    w = cf.falsify(cond, 100, seed=7)
    assert w is not None and float(w["x"]) < 2**-0.5
    assert cf.falsify(cf.SignCondition(x**2, ">=", cf.Box.cube(("x",), 1), ("x",))) is None
    first = cf.falsify(cf.SignCondition(Polynomial.const(-1), ">", cf.Box.cube(("x",), 1), ("x",)))
    assert first == {"x": 0}


def test_setminus_region_excludes_target():
    cond = cf.SignCondition(x1**2, ">", cf.SetMinus(cf.Box.cube(("x1", "x2"), 1), fm.atom(x1, "=")), ("x1", "x2"))
    assert not cf.check_sign_bb(cond).is_disproved


def test_region_validation():
    with pytest.raises(ValueError):
        cf.Annulus(Fraction(1), Fraction(1, 2))
    with pytest.raises(ValueError):
        cf.Box(("x",), ((1, 0),))
    with pytest.raises(ValueError):
        cf.SignCondition(x1, ">=", cf.Global(), ("x2",))


def test_budget_env_override(monkeypatch):
    monkeypatch.setenv("STABCERT_BUDGET", "123")
    assert cf.Budget.default().max_boxes == 123
