import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg

from stabcert.polynomial import Polynomial, variables
from stabcert.rules import vc_exp_lyap
from stabcert.simulate import (
    EVIDENCE,
    EmpiricalConfig,
    counterexample_replay,
    cex1_system,
    dp_step,
    empirical_attractivity,
    empirical_stability,
    energy_monitor,
    exp_envelope_check,
    initial_states,
    integrate,
    vector_field,
)
from stabcert.system import CoordinateSubspace, InputError, OdeSystem, Origin

from conftest import decay, pendulum, pendulum_v, rigid_body

x = Polynomial.var("x")
x1, x2, x3 = variables("x1", "x2", "x3")
LINEAR = np.array([[0.0, 1.0], [-1.0, -1.0]])


def friction_body(al=(1, 1, 1)):
    base = rigid_body()
    return OdeSystem(base.state_vars, tuple(f - a * Polynomial.var(v) for f, a, v in zip(base.rhs, al, base.state_vars)))


def test_exponential_decay():
    tr = integrate(decay(), [1.0], horizon=10)
    assert tr.times[-1] == pytest.approx(10)
    assert abs(tr.states[-1, 0] - math.exp(-10)) < 1e-6


def test_linear_pendulum_against_matrix_exponential():
    x0 = np.array([0.1, 0.0])
    tr = integrate(pendulum(), x0, horizon=10)
    ref = np.array([scipy.linalg.expm(LINEAR * t) @ x0 for t in tr.times])
    assert np.abs(tr.states - ref).max() < 1e-8
    norms = np.linalg.norm(tr.states, axis=1)
    assert norms[-1] < norms[0] * 0.1


def test_fixed_step_order():
    f = vector_field(pendulum())
    x0 = np.array([[0.3, -0.2]])
    ref = scipy.linalg.expm(LINEAR * 2.0) @ x0[0]
    errors = []
    for n in (10, 20, 40):
        Y = x0.copy()
        for _ in range(n):
            Y, _ = dp_step(f, Y, 2.0 / n)
        errors.append(np.abs(Y[0] - ref).max())
    # a 5th-order update: halving the step shrinks the global error far more than 4x
    assert errors[1] < errors[0] / 4 and errors[2] < errors[1] / 4


def test_error_tracks_tolerance():
    x0 = np.array([0.1, 0.0])
    ref = scipy.linalg.expm(LINEAR * 10) @ x0
    errs = [np.abs(integrate(pendulum(), x0, EmpiricalConfig(rtol=r, atol=1e-14), 10).states[-1] - ref).max()
            for r in (1e-5, 1e-7, 1e-9)]
    assert errs[0] > errs[1] > errs[2]


def test_blowup_flagged():
    tr = integrate(OdeSystem(("y",), (Polynomial.var("y"),)), [1.0], EmpiricalConfig(cutoff=1e6), horizon=20)
    assert tr.blowup
    assert tr.stats["blowup_time"] < 20


def test_finite_time_blowup():
    tr = integrate(OdeSystem(("x",), (x**2,)), [1.0], horizon=5)
    assert tr.blowup and tr.stats["blowup_time"] < 1.01


def test_dimension_mismatch():
    with pytest.raises(InputError):
        integrate(pendulum(), [1.0])


def test_stability_of_pendulum():
    rep = empirical_stability(pendulum(), Origin(), EmpiricalConfig(eps_schedule=(0.5,), horizon=20))
    assert rep["label"] == EVIDENCE and rep["passed"]
    assert rep["results"][0]["delta"] >= 0.1


def test_constant_flow_keeps_delta_equal_to_eps():
    ode = OdeSystem(("x1", "x2"), (Polynomial.zero(), Polynomial.zero()))
    rep = empirical_stability(ode, Origin(), EmpiricalConfig(eps_schedule=(0.5, 0.1), horizon=5))
    for row in rep["results"]:
        assert row["delta"] == pytest.approx(row["eps"])


def test_first_counterexample_is_unstable():
    ode, _, P = cex1_system()
    rep = empirical_stability(ode, P, EmpiricalConfig(eps_schedule=(1.0,), samples=16, horizon=30))
    assert not rep["passed"] and rep["results"][0]["delta"] is None


def test_attractivity():
    cfg = EmpiricalConfig(eps_schedule=(0.1, 0.01), horizon=40)
    rep = empirical_attractivity(pendulum(), Origin(), cfg, stability_certified=True)
    assert rep["passed"]
    t_coarse, t_fine = (r["entry_time"] for r in rep["results"])
    assert t_coarse < t_fine
    assert not empirical_attractivity(pendulum(1, 0), Origin(), cfg)["passed"]
    still = OdeSystem(("x",), (Polynomial.zero(),))
    assert not empirical_attractivity(still, Origin(), cfg)["passed"]


def test_entry_time_matches_envelope_prediction():
    cfg = EmpiricalConfig(eps_schedule=(0.01,), horizon=60)
    rep = empirical_attractivity(pendulum(), Origin(), cfg, stability_certified=True)
    # |x(t)| <= alpha |x0| exp(-beta t) with alpha = 2, beta = 1/4 and |x0| <= 1/2
    bound = 4 * math.log(2 * cfg.attr_radius / 0.01)
    assert rep["results"][0]["entry_time"] <= bound


def test_envelope_examples():
    cfg = EmpiricalConfig(samples=50, horizon=30)
    assert exp_envelope_check(pendulum(), 2, Fraction(1, 4), Fraction(1, 4), cfg)["passed"]
    bad = exp_envelope_check(pendulum(), Fraction(1, 10), Fraction(1, 4), Fraction(1, 4), cfg)
    assert not bad["passed"] and bad["max_ratio"] > 1
    exact = exp_envelope_check(decay(), 1, 1, 1, cfg)
    assert exact["passed"] and exact["max_ratio"] == pytest.approx(1, abs=1e-6)


def test_certified_exponential_stability_implies_attractivity_evidence():
    rep = vc_exp_lyap(pendulum(), pendulum_v(), Fraction(1, 2), 1, Fraction(1, 4))
    assert rep.certified
    assert empirical_attractivity(pendulum(), Origin(), EmpiricalConfig(), stability_certified=True)["passed"]


def test_energy_monitor():
    E = 3 * x1**2 + 2 * x2**2 + x3**2
    cfg = EmpiricalConfig(samples=50, horizon=30)
    rep = energy_monitor(friction_body(), E, cfg, by_time=30)
    assert rep["passed"] and rep["non_increasing"] and rep["below_ratio"]
    flat = energy_monitor(rigid_body(), E, EmpiricalConfig(samples=20, horizon=10))
    assert flat["non_increasing"] and abs(flat["max_relative_increase"]) < 1e-6
    assert not flat["below_ratio"]
    assert not energy_monitor(OdeSystem(("x",), (x,)), x**2, EmpiricalConfig(horizon=2))["passed"]


def test_initial_states_are_within_delta_of_target():
    cfg = EmpiricalConfig(samples=40)
    X = initial_states(CoordinateSubspace(("x2", "x3")), ("x1", "x2", "x3"), 0.5, cfg)
    assert X.shape == (40, 3)
    assert np.all(np.hypot(X[:, 1], X[:, 2]) < 0.5)
    assert np.array_equal(X, initial_states(CoordinateSubspace(("x2", "x3")), ("x1", "x2", "x3"), 0.5, cfg))


def test_counterexample_replay():
    one = counterexample_replay("CEX1")
    assert one["premises_pass"] and one["stability_fails"] and one["shipped_rule_refuses"]
    two = counterexample_replay("cex2")
    assert two["verdict"] == "REFUTED" and two["refuted_premise"] == "v(0) = 0" and two["blowup"]
    with pytest.raises(InputError):
        counterexample_replay("CEX3")


def test_simulation_is_deterministic():
    cfg = EmpiricalConfig(eps_schedule=(0.5,), samples=12, horizon=10)
    assert empirical_stability(pendulum(), Origin(), cfg) == empirical_stability(pendulum(), Origin(), cfg)


def test_config_validation():
    with pytest.raises(InputError):
        EmpiricalConfig(horizon=0)
    with pytest.raises(InputError):
        EmpiricalConfig(eps_schedule=(0.1, -1))
