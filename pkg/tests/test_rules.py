from fractions import Fraction

import pytest

from stabcert import formula as fm
from stabcert.certify import CheckResult
from stabcert.polynomial import Polynomial, variables
from stabcert.rules import (
    Kind,
    NonCompactTarget,
    Premise,
    StabilityProperty,
    Verdict,
    closure_normalize,
    invariance_check,
    verify_witness,
    vc_eps_stability,
    vc_exp_lyap,
    vc_exp_lyap_global,
    vc_general_lyap,
    vc_lyap,
    vc_set_lyap,
    vc_set_lyap_general,
    vc_strict_lyap,
    vc_strict_lyap_global,
)
from stabcert.simulate import cex1_system, cex2_system
from stabcert.system import CoordinateSubspace, FormulaTarget, InputError, OdeSystem, Origin, ball_target

from conftest import decay, moore_greitzer, pendulum, pendulum_v, rigid_body

x = Polynomial.var("x")
x1, x2, x3 = variables("x1", "x2", "x3")
MG_V = Fraction(13, 6) * x1**2 - Fraction(1, 3) * x1 * x2 + Fraction(2, 3) * x2**2


def _refutation_reverifies(report, v=None):
    p = report.refuted_by
    assert p is not None
    assert verify_witness(p, v)


def test_lyap_examples():
    rep = vc_lyap(pendulum(), pendulum_v())
    assert rep.certified and rep.witnesses["gamma"] == 1
    ode, v = cex2_system()
    rep = vc_lyap(ode, v)
    assert rep.verdict is Verdict.REFUTED
    assert rep.refuted_by.name == "v(0) = 0"
    _refutation_reverifies(rep)
    assert vc_lyap(decay(), x**2).certified


def test_strict_lyap_friction_dichotomy():
    assert vc_strict_lyap(pendulum(1, 1), pendulum_v(1, 1)).certified
    rep = vc_strict_lyap(pendulum(1, 0), pendulum_v(1, 0))
    assert not rep.certified
    assert vc_strict_lyap(decay(), x**2).certified


def test_exp_lyap_examples():
    rep = vc_exp_lyap(pendulum(), pendulum_v(), Fraction(1, 2), 1, Fraction(1, 4))
    assert rep.certified
    assert rep.witnesses["alpha"] == 2 and rep.witnesses["beta"] == Fraction(1, 4)
    rep = vc_exp_lyap(pendulum(), pendulum_v(), 1, 1, Fraction(1, 4))
    assert rep.verdict is Verdict.REFUTED
    assert rep.refuted_by.name == "k1^2 |x|^2 <= v"
    _refutation_reverifies(rep)
    assert pendulum_v().evaluate({"theta": 1, "omega": -1}) == Fraction(3, 4)
    assert vc_exp_lyap(decay(), x**2, 1, 1, 1).certified


@pytest.mark.parametrize("k1,k2,k3", [(Fraction(1, 2), 1, Fraction(1, 4)), (1, 1, 1), (Fraction(1, 3), 2, Fraction(1, 8))])
def test_exp_witness_algebra(k1, k2, k3):
    ode, v = (decay(), x**2) if k1 == 1 else (pendulum(), pendulum_v())
    rep = vc_exp_lyap(ode, v, k1, k2, k3)
    if rep.certified:
        w = rep.witnesses
        k1, k2 = Fraction(k1), Fraction(k2)
        assert w["alpha"] == k2 / k1 and w["beta"] == k3
        assert w["delta"] == k1 / k2 * w["gamma"]


def test_candidate_constants_validated():
    with pytest.raises(InputError):
        vc_exp_lyap(decay(), x**2, 2, 1, 1)
    with pytest.raises(InputError):
        vc_exp_lyap(decay(), x**2, 0, 1, 1)


def test_strict_lyap_global_examples():
    assert vc_strict_lyap_global(pendulum(), pendulum_v()).certified
    assert vc_strict_lyap_global(decay(), x**2).certified
    ode, v, _ = cex1_system()
    rep = vc_strict_lyap_global(ode, v)
    assert not rep.certified


def test_exp_lyap_global_examples():
    rep = vc_exp_lyap_global(pendulum(), pendulum_v(), Fraction(1, 2), 1, Fraction(1, 4))
    assert rep.certified and rep.witnesses["alpha"] == 2
    rep = vc_exp_lyap_global(pendulum(), pendulum_v(), Fraction(1, 2), 1, 10)
    assert rep.verdict is Verdict.REFUTED
    _refutation_reverifies(rep)
    assert vc_exp_lyap_global(decay(), x**2, 1, 1, 1).certified


def test_set_lyap_refuses_unbounded_target():
    with pytest.raises(NonCompactTarget):
        vc_set_lyap(rigid_body(), CoordinateSubspace(("x2", "x3")), x2**2 + x3**2)


def test_set_lyap_compact_interval():
    P = FormulaTarget(fm.atom(x**2, "<=", 1), compact=True)
    rep = vc_set_lyap(decay(), P, x**2 - 1)
    assert rep.certified


def test_set_lyap_closes_open_targets():
    P = FormulaTarget(fm.atom(x**2, "<", 1), compact=True)
    rep = vc_set_lyap(decay(), P, x**2 - 1)
    assert rep.certified
    assert rep.property.target.formula_ == fm.atom(x**2, "<=", 1)
    assert rep.notes


def test_necessary_invariance_gate_runs_first():
    y = Polynomial.var("y")
    ode = OdeSystem(("x", "y"), (Polynomial.const(1), -y))
    P = CoordinateSubspace(("x",))
    rep = vc_set_lyap(ode, P, x**2)
    assert rep.verdict is Verdict.REFUTED
    assert [p.name for p in rep.premises] == ["P -> [x'=f(x)] P"]
    _refutation_reverifies(rep)
    rep = vc_set_lyap_general(ode, P, x**2)
    assert rep.verdict is Verdict.REFUTED and len(rep.premises) == 1


def test_invariance_examples():
    assert invariance_check(rigid_body(), CoordinateSubspace(("x2", "x3"))).is_proved
    res = invariance_check(OdeSystem(("x",), (Polynomial.const(1),)), Origin())
    assert res.is_disproved
    assert invariance_check(decay(), FormulaTarget(fm.TRUE)).is_proved
    assert invariance_check(decay(), FormulaTarget(fm.atom(x**2, "<=", 1), compact=True)).is_proved


def test_closure_normalize():
    prop = StabilityProperty(Kind.SET_STAB, target=FormulaTarget(fm.atom(x**2, "<", 1)))
    closed, notes = closure_normalize(prop)
    assert closed.target.formula_ == fm.atom(x**2, "<=", 1) and notes
    again, notes = closure_normalize(closed)
    assert again == closed and not notes
    with pytest.raises(fm.UnsupportedFormula):
        closure_normalize(StabilityProperty(Kind.SET_STAB, target=FormulaTarget(fm.atom(x, "!="))))


def test_rigid_body_general_set_rule():
    schedule = [Fraction(1, 2**k) for k in range(6)]
    v1 = (x2**2 + x3**2) / 2
    rep = vc_set_lyap_general(rigid_body(), CoordinateSubspace(("x2", "x3")), v1, schedule, "equal")
    assert rep.certified
    # axis 3: v = ((I1 - I3)/I2 x1^2 + (I2 - I3)/I1 x2^2) / 2 at I = (3, 2, 1)
    v3 = (x1**2 + Fraction(1, 3) * x2**2) / 2
    rep = vc_set_lyap_general(rigid_body(), CoordinateSubspace(("x1", "x2")), v3, schedule, "equal")
    assert rep.certified


def test_intermediate_axis_not_certified():
    v = (3 * x1**2 - x3**2) / 2
    rep = vc_set_lyap_general(rigid_body(), CoordinateSubspace(("x1", "x3")), v, [Fraction(1, 2)], "equal")
    assert not rep.certified


def test_general_rule_subset_premise():
    rep = vc_general_lyap(decay(), ball_target(2, ("x",)), ball_target(1, ("x",)), x**2)
    assert rep.verdict is Verdict.REFUTED and rep.refuted_by.name == "P -> R"
    _refutation_reverifies(rep)


@pytest.mark.parametrize("a", [Fraction(1, 2), 1, 2])
@pytest.mark.parametrize("b", [0, Fraction(1, 2), 1])
def test_general_rule_subsumes_lyap_on_pendulum(a, b):
    ode, v = pendulum(a, b), pendulum_v(a, b)
    schedule = [Fraction(1, 2**k) for k in range(11)]
    assert vc_general_lyap(ode, Origin(), Origin(), v, schedule).certified == vc_lyap(ode, v, schedule).certified


def test_eps_stability():
    rep = vc_eps_stability(moore_greitzer(), Fraction(1, 10**10), MG_V)
    assert rep.certified
    with pytest.raises(InputError):
        vc_eps_stability(moore_greitzer(), 0, MG_V)


def test_eps_stability_trivial_candidate_is_not_enough():
    # a huge eps-ball still needs v >= k on its boundary and v < k at the origin
    rep = vc_eps_stability(moore_greitzer(), 10**6, 0)
    assert not rep.certified
    assert vc_eps_stability(moore_greitzer(), 10**6, x1**2 + x2**2).certified


def test_parameters_must_be_instantiated():
    a = Polynomial.var("a")
    ode = OdeSystem(("x",), (-a * x,), ("a",))
    with pytest.raises(InputError):
        vc_lyap(ode, x**2)
    assert vc_lyap(ode.instantiate({"a": 2}), x**2).certified


def test_verify_witness_rejects_non_counterexamples():
    p = Premise("x >= 0", CheckResult.disproved({"x": Fraction(1)}, "x >= 0"), fm.TRUE, fm.atom(x, ">="))
    assert not verify_witness(p)
    p = Premise("x >= 0", CheckResult.disproved({"x": Fraction(-1)}, "x >= 0"), fm.TRUE, fm.atom(x, ">="))
    assert verify_witness(p)


def test_reports_are_deterministic():
    a = vc_general_lyap(moore_greitzer(), Origin(), ball_target(Fraction(1, 10), ("x1", "x2")), MG_V)
    b = vc_general_lyap(moore_greitzer(), Origin(), ball_target(Fraction(1, 10), ("x1", "x2")), MG_V)
    assert a == b


def unsound_set_lyap(ode, P, v):
    """SLyap>= with the compactness side condition dropped. Test harness only.

    Positivity off the target is read modulo ghost variables with a Darboux
    certificate of positivity (``w' = c w``), which is how the counterexample
    encodes ``exp(-2t) > 0``.
    """
    from stabcert.system import lie_derivative

    zero = {z: 0 for z in P.zeroed}
    ghosts = [g for g, f in zip(ode.state_vars, ode.rhs) if g not in P.zeroed and f.is_zero() is False
              and (f - f.coefficient({g: 1}) * Polynomial.var(g)).is_zero()]
    transverse = Polynomial.sum_of_squares(P.zeroed)
    # v = transverse-form * product of positive ghosts
    ghost_part = Polynomial.const(1)
    for g in ghosts:
        ghost_part = ghost_part * Polynomial.var(g)
    premises = {
        "v = 0 on P": v.subs(zero).is_zero(),
        "v > 0 off P": v == transverse * ghost_part,
        "ghosts positive": all((lie_derivative(Polynomial.var(g), ode)
                                - lie_derivative(Polynomial.var(g), ode).coefficient({g: 1}) * Polynomial.var(g)).is_zero()
                               for g in ghosts),
        "Lie(v) <= 0": lie_derivative(v, ode).is_zero(),
    }
    return premises


def test_unsound_rule_accepts_first_counterexample():
    ode, v, P = cex1_system()
    premises = unsound_set_lyap(ode, P, v)
    assert all(premises.values()), premises
    with pytest.raises(NonCompactTarget):
        vc_set_lyap(ode, P, v)
    assert not vc_set_lyap_general(ode, P, v).certified


def test_set_lyap_whole_space_is_vacuous():
    rep = vc_set_lyap(decay(), FormulaTarget(fm.TRUE), x**2)
    assert rep.certified
    assert [p.result.info.get("tier") for p in rep.premises[1:]] == ["vacuous"] * 3
