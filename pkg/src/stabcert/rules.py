"""Premise generation for the Lyapunov-style stability rules.

Each ``vc_*`` function turns a system, a target and a candidate into the
arithmetic premises of one proof rule, discharges them through
:mod:`stabcert.certify` and assembles a :class:`CertificationReport`.
Existential radii (``gamma``, ``delta``) and levels (``k``) are searched on
fixed dyadic schedules so every run is reproducible.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import certify as cf
from . import formula as fm
from .certify import Budget, CheckResult
from .formula import Formula
from .polynomial import Polynomial, to_fraction
from .quadform import gram_matrix, ldlt
from .system import (
    CoordinateSubspace,
    FormulaTarget,
    InputError,
    OdeSystem,
    Origin,
    TargetSet,
    ball_radius,
    lie_derivative,
    transverse_vars,
    validate_target,
)

GAMMA_SCHEDULE = tuple(Fraction(1, 2**k) for k in range(11))
DELTA_STEPS = 20


class NonCompactTarget(InputError):
    """Set Lyapunov rules with a fixed level need a compact target.

    Without boundedness the rule is unsound: the system ``y' = y, t' = 1,
    w' = -2w`` with ``v = y^2 w`` and target ``y = 0`` satisfies every other
    premise but is not stable.
    """


# -- properties and candidates ----------------------------------------------


class Kind(str, enum.Enum):
    STAB = "Stab"
    ATTR = "Attr"
    ASTAB = "AStab"
    EXP_STAB = "ExpStab"
    GLOBAL_ASTAB = "GlobalAStab"
    GLOBAL_EXP_STAB = "GlobalExpStab"
    SET_STAB = "SetStab"
    SET_ASTAB = "SetAStab"
    GLOBAL_SET_ASTAB = "GlobalSetAStab"
    GENERAL_STAB = "GeneralStab"
    EPS_STAB = "EpsStab"


_SET_KINDS = {Kind.SET_STAB, Kind.SET_ASTAB, Kind.GLOBAL_SET_ASTAB}


@dataclass(frozen=True)
class StabilityProperty:
    kind: Kind
    target: TargetSet | None = None
    post: TargetSet | None = None
    eps: Fraction | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind in _SET_KINDS and self.target is None:
            raise InputError(f"{self.kind.value} needs a target set")
        if self.kind is Kind.GENERAL_STAB and (self.target is None or self.post is None):
            raise InputError("GeneralStab needs a precondition and a postcondition")
        if self.kind is Kind.EPS_STAB:
            if self.eps is None:
                raise InputError("EpsStab needs a radius")
            eps = to_fraction(self.eps)
            if eps <= 0:
                raise InputError("EpsStab radius must be positive")
            object.__setattr__(self, "eps", eps)

    def describe(self) -> str:
        if self.kind is Kind.EPS_STAB:
            return f"EpsStab({self.eps})"
        if self.kind is Kind.GENERAL_STAB:
            return f"GeneralStab({_target_str(self.target)}, {_target_str(self.post)})"
        if self.target is not None:
            return f"{self.kind.value}({_target_str(self.target)})"
        return self.kind.value


def _target_str(t: TargetSet | None) -> str:
    if t is None or isinstance(t, Origin):
        return "origin"
    if isinstance(t, CoordinateSubspace):
        return " & ".join(f"{v} = 0" for v in t.zeroed)
    return str(t.formula_)


@dataclass(frozen=True)
class LyapunovCandidate:
    v: Polynomial
    k1: Fraction | None = None
    k2: Fraction | None = None
    k3: Fraction | None = None
    gamma: Fraction | None = None
    level: Fraction | None = None

    def __post_init__(self):
        object.__setattr__(self, "v", Polynomial.coerce(self.v))
        for name in ("k1", "k2", "k3", "gamma"):
            val = getattr(self, name)
            if val is not None:
                val = to_fraction(val)
                if val <= 0:
                    raise InputError(f"{name} must be positive")
                object.__setattr__(self, name, val)
        if self.level is not None:
            object.__setattr__(self, "level", to_fraction(self.level))
        if self.k1 is not None and self.k2 is not None and self.k1 > self.k2:
            raise InputError("k1 <= k2 is required; otherwise the bounds on v are unsatisfiable")


# -- reports -----------------------------------------------------------------


class Verdict(str, enum.Enum):
    CERTIFIED = "CERTIFIED"
    REFUTED = "REFUTED"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class Premise:
    """One premise ``forall x. assumption -> claim`` together with its outcome.

    ``kind == "ray"`` marks the radial-unboundedness premise, whose witness is
    a direction rather than a point. Premises without a pointwise reading
    leave ``claim`` empty and describe themselves in ``detail``.
    """

    name: str
    result: CheckResult
    assumption: Formula = fm.TRUE
    claim: Formula | None = None
    kind: str = "pointwise"
    detail: dict = field(default_factory=dict)


def verify_witness(p: Premise, poly_v: Polynomial | None = None) -> bool:
    """Exactly re-check that a Disproved premise's witness refutes it."""
    w = p.result.witness
    if not p.result.is_disproved or w is None:
        return False
    if p.kind == "ray":
        if poly_v is None:
            raise ValueError("ray witnesses need the candidate polynomial")
        t = Polynomial.var("__t")
        u = poly_v.subs({x: c * t for x, c in w.items()})
        return any(c != 0 for c in w.values()) and (u.is_constant() or u.coefficient({"__t": u.degree()}) < 0)
    if p.claim is None:
        return False
    return fm.evaluate(p.assumption, w) and not fm.evaluate(p.claim, w)


@dataclass
class CertificationReport:
    property: StabilityProperty
    rule: str
    premises: list
    witnesses: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    evidence: list = field(default_factory=list)

    @property
    def verdict(self) -> Verdict:
        if not self.premises:
            return Verdict.INCONCLUSIVE
        if any(p.result.is_disproved for p in self.premises):
            return Verdict.REFUTED
        if all(p.result.is_proved for p in self.premises):
            return Verdict.CERTIFIED
        return Verdict.INCONCLUSIVE

    @property
    def certified(self) -> bool:
        return self.verdict is Verdict.CERTIFIED

    @property
    def refuted_by(self) -> Premise | None:
        for p in self.premises:
            if p.result.is_disproved:
                return p
        return None

    def premise(self, name: str) -> Premise:
        for p in self.premises:
            if p.name == name:
                return p
        raise KeyError(name)


# -- shared premises -----------------------------------------------------------


def _require_concrete(ode: OdeSystem, *polys: Polynomial) -> None:
    if ode.param_vars:
        raise InputError(f"instantiate parameters {list(ode.param_vars)} before running a rule")
    for p in polys:
        extra = p.variables() - set(ode.state_vars)
        if extra:
            raise InputError(f"candidate mentions unknown variables {sorted(extra)}")


def _origin(ode: OdeSystem) -> dict:
    return {x: Fraction(0) for x in ode.state_vars}


def _n2(order) -> Polynomial:
    return Polynomial.sum_of_squares(order)


def _closed_ball(order, r2) -> Formula:
    return fm.atom(_n2(order), "<=", r2)


def _punctured(order, r2) -> Formula:
    return fm.conj(fm.atom(_n2(order), ">", 0), _closed_ball(order, r2))


def _at_origin(order) -> Formula:
    return fm.atom(_n2(order), "=")


def _equilibrium_premise(ode: OdeSystem, v: Polynomial | None) -> Premise:
    origin = _origin(ode)
    at0 = _at_origin(ode.state_vars)
    for x, f in zip(ode.state_vars, ode.rhs):
        if f.evaluate(origin) != 0:
            return Premise("f(0) = 0", CheckResult.disproved(origin, f"{x}' = 0 at the origin"), at0, fm.atom(f, "="))
    if v is not None and v.evaluate(origin) != 0:
        return Premise("v(0) = 0", CheckResult.disproved(origin, "v(0) = 0"), at0, fm.atom(v, "="))
    name = "f(0) = 0 & v(0) = 0" if v is not None else "f(0) = 0"
    claim = fm.conj(*(fm.atom(f, "=") for f in ode.rhs), *([fm.atom(v, "=")] if v is not None else []))
    return Premise(name, CheckResult.proved(tier="exact"), at0, claim)


def _proved_radius2(res: CheckResult, gamma2: Fraction) -> bool:
    if not res.is_proved:
        return False
    return res.info.get("all_radii", False) or res.info.get("gamma2", gamma2) >= gamma2


def _search_radius(
    checks: Sequence[tuple[str, Callable[[Fraction], CheckResult]]],
    schedule: Sequence[Fraction],
) -> tuple[Fraction | None, dict, list]:
    """First radius of the schedule at which every check is proved.

    Returns the radius (or None), the results at that radius (or at the last
    radius tried) and a compact log of the attempts.
    """
    log = []
    last = {}
    for gamma in schedule:
        g2 = gamma * gamma
        results = {name: fn(g2) for name, fn in checks}
        last = results
        log.append({"gamma": gamma, **{n: r.status.value for n, r in results.items()}})
        if all(_proved_radius2(r, g2) for r in results.values()):
            return gamma, results, log
    return None, last, log


def _schedule_premise(name: str, assumption: Callable[[Fraction], Formula], claim: Formula, found,
                      results: dict, log: list) -> Premise:
    """Fold a radius search into one premise.

    Refuted only when every schedule entry produced an exact counterexample;
    the witness is then reported against the smallest radius tried.
    Otherwise the existential is left open.
    """
    if found is not None:
        info = {}
        for r in results.values():
            info.update({k: v for k, v in r.info.items() if k in ("tier", "margin")})
        return Premise(name, CheckResult.proved(gamma=found, **info), assumption(found), claim,
                       detail={"schedule": log})
    all_failed = log and all(
        any(s == "disproved" for k, s in entry.items() if k != "gamma") for entry in log
    )
    if all_failed:
        bad = next(r for r in results.values() if r.is_disproved)
        g = log[-1]["gamma"]
        return Premise(name, bad, assumption(g), claim, detail={"schedule": log, "scope": "every schedule radius"})
    return Premise(name, CheckResult.unknown("schedule-exhausted"), assumption(log[-1]["gamma"]) if log else fm.TRUE,
                   claim, detail={"schedule": log})


# -- local rules -------------------------------------------------------------


def vc_lyap(ode: OdeSystem, v, gamma_schedule: Sequence | None = None, budget: Budget | None = None,
            strict: bool = False) -> CertificationReport:
    """Rule Lyap (non-strict) or its strict variant for the origin."""
    v = Polynomial.coerce(v)
    _require_concrete(ode, v)
    budget = budget or Budget.default()
    schedule = tuple(to_fraction(g) for g in (gamma_schedule or GAMMA_SCHEDULE))
    order = ode.state_vars
    rule = "Lyap>" if strict else "Lyap>="
    prop = StabilityProperty(Kind.ASTAB if strict else Kind.STAB)
    eq = _equilibrium_premise(ode, v)
    if eq.result.is_disproved:
        return CertificationReport(prop, rule, [eq])
    lv = lie_derivative(v, ode)
    rel = "<" if strict else "<="
    checks = [
        ("positivity", lambda g2: cf.check_punctured_positivity(v, g2, order, budget)),
        ("decrease", lambda g2: cf.check_ball(lv, rel, g2, order, budget)
         if not strict else cf.check_punctured(lv, rel, g2, order, budget)),
    ]
    found, results, log = _search_radius(checks, schedule)
    premise = _schedule_premise(
        "exists gamma: v > 0 & Lie(v) " + rel + " 0",
        lambda g: _punctured(order, g * g),
        fm.conj(fm.atom(v, ">"), fm.atom(lv, rel)),
        found, results, log,
    )
    report = CertificationReport(prop, rule, [eq, premise])
    report.notes.append(f"Lie(v) = {lv}")
    if found is not None:
        report.witnesses["gamma"] = found
    return report


def vc_strict_lyap(ode: OdeSystem, v, gamma_schedule: Sequence | None = None,
                   budget: Budget | None = None) -> CertificationReport:
    return vc_lyap(ode, v, gamma_schedule, budget, strict=True)


def vc_exp_lyap(ode: OdeSystem, v, k1, k2, k3, gamma=1, budget: Budget | None = None) -> CertificationReport:
    """Rule Lyap_E: quadratic sandwich and exponential decay on a ball."""
    cand = LyapunovCandidate(v, k1, k2, k3, gamma)
    v = cand.v
    _require_concrete(ode, v)
    budget = budget or Budget.default()
    order = ode.state_vars
    n2 = Polynomial.sum_of_squares(order)
    lv = lie_derivative(v, ode)
    conds = {
        "k1^2 |x|^2 <= v": v - cand.k1**2 * n2,
        "v <= k2^2 |x|^2": cand.k2**2 * n2 - v,
        "Lie(v) <= -2 k3 v": -(lv + 2 * cand.k3 * v),
    }
    prop = StabilityProperty(Kind.EXP_STAB)
    g2 = cand.gamma**2
    premises = []
    proved2 = g2
    for name, q in conds.items():
        res = cf.check_ball(q, ">=", g2, order, budget)
        if res.is_proved and not res.info.get("all_radii"):
            proved2 = min(proved2, res.info.get("gamma2", g2))
        premises.append(Premise(name, res, _closed_ball(order, g2), fm.atom(q, ">=")))
    report = CertificationReport(prop, "Lyap_E", premises)
    if report.certified:
        g = _sqrt_lower(proved2)
        if g < cand.gamma:
            report.notes.append(f"radius shrunk from {cand.gamma} to {g}")
        report.witnesses.update(_exp_witnesses(cand, g))
    return report


def _exp_witnesses(cand: LyapunovCandidate, gamma: Fraction | None) -> dict:
    out = {"alpha": cand.k2 / cand.k1, "beta": cand.k3}
    if gamma is not None:
        out["gamma"] = gamma
        out["delta"] = cand.k1 / cand.k2 * gamma
    return out


def _sqrt_lower(q: Fraction) -> Fraction:
    """Largest dyadic-friendly rational below sqrt(q); exact for perfect squares."""
    n, d = q.numerator, q.denominator
    r = math.isqrt(n * d)
    return Fraction(r, d)


# -- global rules ------------------------------------------------------------


def vc_strict_lyap_global(ode: OdeSystem, v, budget: Budget | None = None) -> CertificationReport:
    """Rule Lyap>^G: strict decrease everywhere plus radial unboundedness."""
    v = Polynomial.coerce(v)
    _require_concrete(ode, v)
    budget = budget or Budget.default()
    order = ode.state_vars
    prop = StabilityProperty(Kind.GLOBAL_ASTAB)
    eq = _equilibrium_premise(ode, v)
    if eq.result.is_disproved:
        return CertificationReport(prop, "Lyap>^G", [eq])
    lv = lie_derivative(v, ode)
    pos = cf.check_global(cf.SignCondition(v, ">", cf.NonZero(), order), budget)
    dec = cf.check_global(cf.SignCondition(lv, "<", cf.NonZero(), order), budget)
    rad = cf.check_radial_unboundedness(v, order, budget)
    premises = [
        eq,
        Premise("x != 0 -> v > 0", pos, fm.atom(_n2(order), ">"), fm.atom(v, ">")),
        Premise("x != 0 -> Lie(v) < 0", dec, fm.atom(_n2(order), ">"), fm.atom(lv, "<")),
        Premise("radially unbounded", rad, kind="ray", detail={"v": str(v)}),
    ]
    report = CertificationReport(prop, "Lyap>^G", premises)
    report.notes.append(f"Lie(v) = {lv}")
    return report


def vc_exp_lyap_global(ode: OdeSystem, v, k1, k2, k3, budget: Budget | None = None) -> CertificationReport:
    """Rule Lyap_E^G: the exponential sandwich everywhere."""
    cand = LyapunovCandidate(v, k1, k2, k3)
    v = cand.v
    _require_concrete(ode, v)
    budget = budget or Budget.default()
    order = ode.state_vars
    n2 = Polynomial.sum_of_squares(order)
    lv = lie_derivative(v, ode)
    conds = {
        "k1^2 |x|^2 <= v": v - cand.k1**2 * n2,
        "v <= k2^2 |x|^2": cand.k2**2 * n2 - v,
        "Lie(v) <= -2 k3 v": -(lv + 2 * cand.k3 * v),
    }
    premises = []
    for name, q in conds.items():
        res = cf.check_global(cf.SignCondition(q, ">=", cf.Global(), order), budget)
        premises.append(Premise(name, res, fm.TRUE, fm.atom(q, ">=")))
    report = CertificationReport(StabilityProperty(Kind.GLOBAL_EXP_STAB), "Lyap_E^G", premises)
    if report.certified:
        report.witnesses.update(_exp_witnesses(cand, None))
        report.witnesses["delta"] = "any"
    return report


# -- set targets ---------------------------------------------------------------


def closure_normalize(prop: StabilityProperty) -> tuple[StabilityProperty, list]:
    """Replace formula targets by their syntactic closure; returns the rewrites made."""
    notes = []

    def norm(t):
        if not isinstance(t, FormulaTarget):
            return t
        closed = fm.syntactic_closure(t.formula_)
        if closed != fm.nnf(t.formula_):
            notes.append(f"target {t.formula_} replaced by its closure {closed}")
        return FormulaTarget(closed, t.compact)

    if prop.kind in _SET_KINDS:
        prop = replace(prop, target=norm(prop.target))
    return prop, notes


def _formula_radius(f, order, budget: Budget) -> Fraction | None:
    """``r`` with the formula's solution set inside the cube ``[-r, r]^n``."""
    f = fm.nnf(f)
    if isinstance(f, fm.Const):
        return Fraction(0) if not f.value else None
    if isinstance(f, fm.Atom):
        # p = 0 lies inside both {p <= 0} and {p >= 0}; either bound works
        cands = [-f.poly] if f.rel in (">=", ">") else ([-f.poly, f.poly] if f.rel == "=" else [])
        radii = [cf.escape_radius(q, order, budget) for q in cands]
        radii = [r for r in radii if r is not None]
        return min(radii) if radii else None
    if isinstance(f, fm.And):
        radii = [r for r in (_formula_radius(a, order, budget) for a in f.args) if r is not None]
        return min(radii) if radii else None
    if isinstance(f, fm.Or):
        radii = [_formula_radius(a, order, budget) for a in f.args]
        return None if any(r is None for r in radii) else max(radii)
    return None


def _darboux_atom(ode: OdeSystem, a: fm.Atom, box: cf.Box, budget: Budget) -> bool:
    g = a.poly
    lg = lie_derivative(g, ode)
    if a.rel == "=":
        # Lie(g) = c * g with a constant c keeps g = 0 invariant
        mono, lead = next(g.items())
        c = lg.coefficient(mono) / lead
        return (lg - c * g).is_zero()
    for lam in (0, 1, 2, 4, 8, 16, 64):
        q = lg + lam * g
        if q.is_zero():
            return True
        res = cf.check_sign_bb(cf.SignCondition(q, ">=", box, ode.state_vars), budget)
        if res.is_proved:
            return True
    return False


def invariance_check(ode: OdeSystem, P: TargetSet, budget: Budget | None = None) -> CheckResult:
    """Sufficient and, for equational targets, exact test that ``P`` is invariant."""
    budget = budget or Budget.default()
    validate_target(P, ode)
    if isinstance(P, Origin):
        origin = _origin(ode)
        for x, f in zip(ode.state_vars, ode.rhs):
            if f.evaluate(origin) != 0:
                return CheckResult.disproved(origin, f"{x}' = 0 on the target", tier="exact")
        return CheckResult.proved(tier="exact")
    if isinstance(P, CoordinateSubspace):
        zero = {x: Fraction(0) for x in P.zeroed}
        free = [x for x in ode.state_vars if x not in zero]
        for x, f in zip(ode.state_vars, ode.rhs):
            if x not in zero:
                continue
            r = f.subs(zero)
            if r.is_zero():
                continue
            point = _nonzero_point(r, free)
            return CheckResult.disproved({**zero, **point}, f"{x}' = 0 on the target", residual=str(r), tier="exact")
        return CheckResult.proved(tier="exact")
    f = fm.nnf(P.formula_)
    if f == fm.TRUE or f == fm.FALSE:
        return CheckResult.proved(tier="trivial")
    atoms = [f] if isinstance(f, fm.Atom) else (list(f.args) if isinstance(f, fm.And) else None)
    if atoms is None or not all(isinstance(a, fm.Atom) and a.rel in (">=", ">", "=") for a in atoms):
        return CheckResult.unknown("unsupported-shape", detail="only conjunctions of atoms are handled")
    order = ode.state_vars
    r = _formula_radius(f, order, budget)
    if r is None:
        return CheckResult.unknown("unsupported-shape", detail="target not bounded")
    box = cf.Box.cube(order, r + 1)
    if all(_darboux_atom(ode, a, box, budget) for a in atoms):
        return CheckResult.proved(tier="darboux", box_radius=r + 1)
    return CheckResult.unknown("unsupported-shape", detail="no differential-invariant certificate found")


def _nonzero_point(p: Polynomial, free: Sequence[str]) -> dict:
    """Small integer point where the non-zero polynomial ``p`` does not vanish."""
    vals = (1, 2, -1, 3, -2, 5)
    free = list(free)
    for k in range(len(vals) ** max(len(free), 1)):
        pt = {}
        kk = k
        for x in free:
            pt[x] = Fraction(vals[kk % len(vals)])
            kk //= len(vals)
        if p.evaluate({**{x: 0 for x in p.vars}, **pt}) != 0:
            return pt
    raise AssertionError("non-zero polynomial vanished on the probe grid")


def _compact_radius(P: TargetSet, order, budget: Budget) -> Fraction:
    if isinstance(P, Origin):
        return Fraction(0)
    if isinstance(P, CoordinateSubspace):
        raise NonCompactTarget(
            f"target {_target_str(P)} is unbounded; use the general set rule "
            "(fixed-level set rules are unsound here, see the y' = y, t' = 1, w' = -2w counterexample)"
        )
    r = _formula_radius(P.formula_, order, budget)
    if r is None:
        raise NonCompactTarget(
            f"target {P.formula_} is not certified bounded"
            + (" (compactness was asserted but no enclosing box was found)" if P.compact else "")
        )
    return r


def _invariance_premise(ode: OdeSystem, P: TargetSet, budget: Budget) -> Premise:
    res = invariance_check(ode, P, budget)
    order = ode.state_vars
    claim = None
    if isinstance(P, (Origin, CoordinateSubspace)):
        zeroed = order if isinstance(P, Origin) else P.zeroed
        claim = fm.conj(*(fm.atom(f, "=") for x, f in zip(order, ode.rhs) if x in zeroed))
    return Premise("P -> [x'=f(x)] P", res, P.formula(order), claim)


def vc_set_lyap(ode: OdeSystem, P: TargetSet, v, strict: bool = False,
                budget: Budget | None = None) -> CertificationReport:
    """Rules SLyap (non-strict and strict) for a compact target.

    The off-target premises are checked inside a box around the unit
    neighbourhood of ``P`` rather than everywhere, which is all the
    derivation through the general set rule uses.
    """
    v = Polynomial.coerce(v)
    _require_concrete(ode, v)
    budget = budget or Budget.default()
    validate_target(P, ode)
    order = ode.state_vars
    rule = "SLyap>" if strict else "SLyap>="
    prop = StabilityProperty(Kind.SET_ASTAB if strict else Kind.SET_STAB, target=P)
    notes = []
    if isinstance(P, FormulaTarget):
        prop, notes = closure_normalize(prop)
        P = prop.target
    inv = _invariance_premise(ode, P, budget)
    if inv.result.is_disproved:
        return CertificationReport(prop, rule, [inv], notes=notes + ["target is not invariant, hence not stable"])
    lv = lie_derivative(v, ode)
    rel = "<" if strict else "<="
    if isinstance(P, FormulaTarget) and fm.simplify(fm.nnf(P.formula_)) == fm.TRUE:
        # the whole space: nothing lies off the target and the boundary is empty
        vacuous = CheckResult.proved(tier="vacuous")
        premises = [inv, Premise("!P -> v > 0", vacuous, fm.FALSE, fm.atom(v, ">")),
                    Premise("!P -> Lie(v) " + rel + " 0", vacuous, fm.FALSE, fm.atom(lv, rel)),
                    Premise("bdr(P) -> v <= 0", vacuous, fm.FALSE, fm.atom(v, "<="))]
        return CertificationReport(prop, rule, premises, notes=notes + ["target is the whole space"])
    radius = _compact_radius(P, order, budget)
    if isinstance(P, Origin):
        pos = cf.check_punctured(v, ">", 1, order, budget)
        dec = cf.check_punctured(lv, rel, 1, order, budget)
        region = _punctured(order, 1)
        shrunk = [r.info["gamma2"] for r in (pos, dec) if r.is_proved and r.info.get("shrunk")]
        if shrunk:
            notes.append(f"off-target premises localised to |x|^2 <= {min(shrunk)}")
        origin = _origin(ode)
        bres = CheckResult.proved(tier="exact") if v.evaluate(origin) <= 0 else \
            CheckResult.disproved(origin, "v <= 0 on bdr(P)")
        boundary = Premise("bdr(P) -> v <= 0", bres, _at_origin(order), fm.atom(v, "<="))
    else:
        box = cf.Box.cube(order, radius + 1)
        outside = cf.SetMinus(box, P.formula_)
        pos = cf.check_sign_bb(cf.SignCondition(v, ">", outside, order), budget)
        dec = cf.check_sign_bb(cf.SignCondition(lv, rel, outside, order), budget)
        region = cf.region_formula(outside, order)
        bdr = fm.syntactic_boundary(P.formula_)
        if bdr == fm.FALSE:
            bres = CheckResult.proved(tier="vacuous")
        else:
            bres = cf.check_sign_bb(cf.SignCondition(v, "<=", cf.Constrained(box, bdr), order), budget)
        boundary = Premise("bdr(P) -> v <= 0", bres, fm.conj(cf.region_formula(box, order), bdr), fm.atom(v, "<="))
    premises = [
        inv,
        Premise("!P -> v > 0", pos, region, fm.atom(v, ">")),
        Premise("!P -> Lie(v) " + rel + " 0", dec, region, fm.atom(lv, rel)),
        boundary,
    ]
    return CertificationReport(prop, rule, premises, notes=notes)


# -- transverse geometry for general rules -------------------------------------


@dataclass(frozen=True)
class _Shape:
    """``{x : |y| <= r}`` (closed) or ``{x : |y| < r}`` (open) over transverse vars ``y``."""

    transverse: tuple
    radius: Fraction
    closed: bool

    def nbhd2(self, gamma: Fraction) -> Fraction:
        return (self.radius + gamma) ** 2


def _shape(T: TargetSet, order) -> _Shape:
    if isinstance(T, (Origin, CoordinateSubspace)):
        return _Shape(transverse_vars(T, order), Fraction(0), True)
    r = ball_radius(T, order)
    if r is None:
        raise InputError(f"unsupported target shape {_target_str(T)}; use origin, subspace or a ball")
    closed = fm.nnf(T.formula_).rel == ">="
    return _Shape(tuple(order), r, closed)


def _subset(P: _Shape, R: _Shape, order) -> CheckResult:
    """Exact ``P -> R`` for transverse shapes."""
    missing = [x for x in R.transverse if x not in P.transverse]
    zero = {x: Fraction(0) for x in order}
    if missing:
        return CheckResult.disproved({**zero, missing[0]: R.radius + 1}, "P -> R", tier="exact")
    ok = P.radius < R.radius or (P.radius == R.radius and (R.closed or not P.closed))
    if ok:
        return CheckResult.proved(tier="exact")
    y = R.transverse[0]
    val = P.radius if P.closed else (P.radius + R.radius) / 2
    return CheckResult.disproved({**zero, y: val}, "P -> R", tier="exact")


def _level_on_sphere(v: Polynomial, T: tuple, r: Fraction, budget: Budget) -> tuple[Fraction | None, str]:
    """A certified lower bound ``k`` of ``v`` on ``|y| = r``."""
    if v.is_zero():
        return Fraction(0), "exact"
    if cf.is_quadratic_form(v):
        Q = gram_matrix(v, T)
        lam_f = float(np.linalg.eigvalsh(np.array([[float(c) for c in row] for row in Q])).min())
        lam = Fraction(lam_f).limit_denominator(10**6)
        n2 = Polynomial.sum_of_squares(T)
        step = Fraction(1, 10**6) + abs(lam) / 10**6
        for _ in range(40):
            if ldlt(gram_matrix(v - lam * n2, T)).psd:
                return lam * r * r, "ldlt"
            lam -= step
            step *= 2
    box = cf.Box.cube(T, r)
    sphere = fm.atom(Polynomial.sum_of_squares(T), "=", r * r)
    lb = cf.lower_bound(v, box, sphere, levels=min(4 * len(T) + 4, 14))
    return lb, "interval"


def _invariance_region_check(lv: Polynomial, R: _Shape, gamma: Fraction, budget: Budget) -> CheckResult:
    """``Lie(v) <= 0`` on ``closure(U_gamma(R)) \\ R``."""
    outer2 = R.nbhd2(gamma)
    res = cf.check_punctured(lv, "<=", outer2, R.transverse, budget)
    if res.is_proved or R.radius == 0:
        return res
    # a ball target: only the shell between R and the outer sphere matters
    inner2 = R.radius**2
    return cf.check_sign_bb(cf.SignCondition(lv, "<=", cf.Annulus(inner2, outer2), R.transverse), budget)


def _depends_only_on(p: Polynomial, T: Sequence[str]) -> bool:
    return p.variables() <= set(T)


def _general_at_eps(ode, v, lv, Pshape, Rshape, R_invariant, eps, gamma_rule, budget, order):
    """Search ``gamma <= eps``, ``k`` and ``delta <= gamma`` for one ``eps``."""
    gammas = [eps] if gamma_rule == "equal" else [eps / 2**j for j in range(11)]
    attempts = []
    for gamma in gammas:
        entry = {"gamma": gamma}
        attempts.append(entry)
        inv = _invariance_region_check(lv, Rshape, gamma, budget)
        entry["lie"] = inv.status.value
        if not _proved_radius2(inv, Rshape.nbhd2(gamma)):
            continue
        k, how = _level_on_sphere(v, Rshape.transverse, Rshape.radius + gamma, budget)
        if k is None:
            entry["level"] = "none"
            continue
        entry["k"] = k
        if not R_invariant:
            # exits from R must land in v < k; closed ball around R suffices
            rr2 = Rshape.radius**2
            if rr2 == 0:
                inside = CheckResult.proved() if v.evaluate({x: 0 for x in order}) < k else \
                    CheckResult.disproved({x: Fraction(0) for x in order}, "v < k on bdr(R)")
            else:
                inside = cf.check_sign_bb(cf.SignCondition(v - k, "<", cf.Ball(rr2), Rshape.transverse), budget)
            entry["exit"] = inside.status.value
            if not inside.is_proved:
                continue
        delta = None
        for j in range(0, DELTA_STEPS + 1):
            d = gamma / 2**j
            if _subset(_Shape(Pshape.transverse, Pshape.radius + d, False), Rshape, order).is_proved:
                delta = d
                entry["middle"] = "inside R"
                break
            if j == 0:
                continue
            near = cf.check_sign_bb(
                cf.SignCondition(v - k, "<", cf.Ball((Pshape.radius + d) ** 2), Pshape.transverse), budget
            )
            if near.is_proved:
                delta = d
                entry["middle"] = "v < k"
                break
        if delta is None:
            entry["delta"] = "none"
            continue
        entry["delta"] = delta
        return {"eps": eps, "gamma": gamma, "k": k, "delta": delta, "level_method": how}, attempts
    return None, attempts


def vc_general_lyap(ode: OdeSystem, P: TargetSet, R: TargetSet, v, eps_schedule: Sequence | None = None,
                    gamma_rule: str = "search", budget: Budget | None = None,
                    rule: str = "GLyap", prop: StabilityProperty | None = None,
                    require_invariant_P: bool = False) -> CertificationReport:
    """Rule GLyap with the invariance conjunct replaced by a Lie-derivative condition.

    ``R or v < k`` is invariant within ``closure(U_gamma(R))`` when
    ``Lie(v) <= 0`` on ``closure(U_gamma(R)) \\ R`` and either ``R`` is
    invariant or ``v < k`` on the closure of ``R``.
    """
    v = Polynomial.coerce(v)
    _require_concrete(ode, v)
    budget = budget or Budget.default()
    if gamma_rule not in ("equal", "search"):
        raise InputError("gamma_rule must be 'equal' or 'search'")
    validate_target(P, ode)
    validate_target(R, ode)
    order = ode.state_vars
    prop = prop or StabilityProperty(Kind.GENERAL_STAB, target=P, post=R)
    schedule = tuple(to_fraction(e) for e in (eps_schedule or GAMMA_SCHEDULE))
    Ps, Rs = _shape(P, order), _shape(R, order)
    premises = []
    notes = []
    if require_invariant_P:
        inv = _invariance_premise(ode, P, budget)
        premises.append(inv)
        if not inv.result.is_proved:
            if inv.result.is_disproved:
                notes.append("target is not invariant, hence not stable")
            return CertificationReport(prop, rule, premises, notes=notes)
    sub = Premise("P -> R", _subset(Ps, Rs, order), P.formula(order), R.formula(order))
    premises.append(sub)
    if not sub.result.is_proved:
        return CertificationReport(prop, rule, premises)
    lv = lie_derivative(v, ode)
    notes.append(f"Lie(v) = {lv}")
    free = sorted((v.variables() | lv.variables()) - set(Rs.transverse))
    if free:
        premises.append(Premise(
            "v independent of along-target coordinates",
            CheckResult.unknown("unsupported-shape", detail=f"v or Lie(v) depends on {free}"),
        ))
        return CertificationReport(prop, rule, premises, notes=notes)
    R_inv = invariance_check(ode, R, budget).is_proved
    notes.append("postcondition invariant" if R_inv else "postcondition not shown invariant; v < k required on it")
    per_eps = []
    failed = []
    for eps in schedule:
        w, attempts = _general_at_eps(ode, v, lv, Ps, Rs, R_inv, eps, gamma_rule, budget, order)
        if w is None:
            failed.append({"eps": eps, "attempts": attempts})
        else:
            per_eps.append(w)
    if failed:
        res = CheckResult.unknown("schedule-exhausted", failed_eps=[f["eps"] for f in failed])
    else:
        res = CheckResult.proved(tier="schedule", eps_count=len(schedule))
    premises.append(Premise(
        "forall eps exists gamma, k, delta",
        res,
        detail={
            "conjuncts": "v >= k on bdr(U_gamma(R)); U_delta(P) -> R | v < k; Lie(v) <= 0 on closure(U_gamma(R)) \\ R",
            "schedule": f"{len(schedule)} entries down to {min(schedule)}",
            "witnesses": per_eps,
            "failures": failed,
        },
    ))
    report = CertificationReport(prop, rule, premises, notes=notes)
    if per_eps:
        report.witnesses["per_eps"] = per_eps
    if report.certified:
        first = per_eps[0]
        report.witnesses.update(gamma=first["gamma"], k=first["k"], delta=first["delta"])
    return report


def vc_set_lyap_general(ode: OdeSystem, P: TargetSet, v, eps_schedule: Sequence | None = None,
                        gamma_rule: str = "equal", budget: Budget | None = None) -> CertificationReport:
    """Rule SLyap*: invariance of ``P`` plus GLyap with ``R = P``."""
    if not isinstance(P, (Origin, CoordinateSubspace)):
        raise InputError("the general set rule supports origin and coordinate-subspace targets")
    prop = StabilityProperty(Kind.SET_STAB, target=P)
    return vc_general_lyap(ode, P, P, v, eps_schedule, gamma_rule, budget, rule="SLyap*>=", prop=prop,
                           require_invariant_P=True)


def vc_eps_stability(ode: OdeSystem, eps, v, eps_schedule: Sequence | None = None,
                     gamma_rule: str = "search", budget: Budget | None = None) -> CertificationReport:
    """Origin stability up to an ``eps``-ball: GLyap from the origin into ``|x| < eps``."""
    eps = to_fraction(eps)
    if eps <= 0:
        raise InputError("eps must be positive")
    from .system import ball_target

    R = ball_target(eps, ode.state_vars)
    prop = StabilityProperty(Kind.EPS_STAB, eps=eps)
    return vc_general_lyap(ode, Origin(), R, v, eps_schedule, gamma_rule, budget, rule="GLyap", prop=prop)
