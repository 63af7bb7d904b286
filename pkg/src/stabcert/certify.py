"""Three-valued discharge of polynomial sign conditions.

Conditions ``p ~ 0`` are checked over boxes, balls, annuli, punctured balls,
box-minus-set regions and the whole space. ``Proved`` is backed by exact
interval arithmetic, exact LDL^T factorisations or a homogeneous-dominance
argument; ``Disproved`` always carries a rational point on which the
condition fails under exact evaluation.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable, Sequence, Union

import numpy as np

from . import formula as fm
from .formula import Formula
from .interval import CompiledPoly
from .polynomial import Polynomial, to_fraction
from .quadform import NotQuadraticForm, gram_matrix, ldlt

# -- results --------------------------------------------------------------


class Status(enum.Enum):
    PROVED = "proved"
    DISPROVED = "disproved"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class CheckResult:
    status: Status
    witness: dict | None = None
    violated: str | None = None
    reason: str | None = None
    info: dict = field(default_factory=dict, compare=False)

    @classmethod
    def proved(cls, **info) -> "CheckResult":
        return cls(Status.PROVED, info=info)

    @classmethod
    def disproved(cls, witness: dict, violated: str, **info) -> "CheckResult":
        return cls(Status.DISPROVED, witness=dict(witness), violated=violated, info=info)

    @classmethod
    def unknown(cls, reason: str, **info) -> "CheckResult":
        return cls(Status.UNKNOWN, reason=reason, info=info)

    @property
    def is_proved(self) -> bool:
        return self.status is Status.PROVED

    @property
    def is_disproved(self) -> bool:
        return self.status is Status.DISPROVED

    @property
    def is_unknown(self) -> bool:
        return self.status is Status.UNKNOWN


def merge(results: Iterable[CheckResult]) -> CheckResult:
    """Combine results: any Disproved wins, then any Unknown, else Proved."""
    results = list(results)
    for r in results:
        if r.is_disproved:
            return r
    for r in results:
        if r.is_unknown:
            return r
    info = {}
    for r in results:
        info.update(r.info)
    return CheckResult.proved(**info)


# -- regions and conditions ----------------------------------------------


@dataclass(frozen=True)
class Box:
    vars: tuple
    bounds: tuple

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))
        b = tuple((to_fraction(lo), to_fraction(hi)) for lo, hi in self.bounds)
        if len(b) != len(self.vars):
            raise ValueError("one interval per variable is required")
        if any(lo > hi for lo, hi in b):
            raise ValueError("box bounds must satisfy lo <= hi")
        object.__setattr__(self, "bounds", b)

    @classmethod
    def cube(cls, vars, radius) -> "Box":
        r = to_fraction(radius)
        return cls(tuple(vars), tuple((-r, r) for _ in vars))


@dataclass(frozen=True)
class Ball:
    """Closed ball ``|x|^2 <= r2`` around the origin."""

    r2: Fraction


@dataclass(frozen=True)
class Annulus:
    """Closed shell ``rmin2 <= |x|^2 <= rmax2`` around the origin."""

    rmin2: Fraction
    rmax2: Fraction

    def __post_init__(self):
        if not (0 < self.rmin2 < self.rmax2):
            raise ValueError("annulus radii must satisfy 0 < rmin2 < rmax2")


@dataclass(frozen=True)
class PuncturedBall:
    """``0 < |x|^2 <= gamma2``."""

    gamma2: Fraction


@dataclass(frozen=True)
class SetMinus:
    """Points of ``box`` that do not satisfy ``removed``."""

    box: Box
    removed: Formula


@dataclass(frozen=True)
class Constrained:
    """Points of ``box`` that satisfy ``constraint``."""

    box: Box
    constraint: Formula


@dataclass(frozen=True)
class Global:
    pass


@dataclass(frozen=True)
class NonZero:
    """Every point except the origin."""


Region = Union[Box, Ball, Annulus, PuncturedBall, SetMinus, Constrained, Global, NonZero]
_RELS = (">=", ">", "<=", "<", "=")


@dataclass(frozen=True)
class SignCondition:
    """``poly rel 0`` for every point of ``region`` (over ``vars``)."""

    poly: Polynomial
    rel: str
    region: Region
    vars: tuple

    def __post_init__(self):
        object.__setattr__(self, "poly", Polynomial.coerce(self.poly))
        object.__setattr__(self, "vars", tuple(self.vars))
        if self.rel not in _RELS:
            raise ValueError(f"relation must be one of {_RELS}")
        extra = self.poly.variables() - set(self.vars)
        if extra:
            raise ValueError(f"condition mentions {sorted(extra)} outside {self.vars}")

    def describe(self) -> str:
        return f"{self.poly} {self.rel} 0"

    def holds_at(self, point: dict) -> bool:
        return _rel_holds(self.rel, self.poly.evaluate(point))

    def region_formula(self) -> Formula:
        return region_formula(self.region, self.vars)


def _rel_holds(rel: str, value: Fraction) -> bool:
    return {
        ">=": value >= 0,
        ">": value > 0,
        "<=": value <= 0,
        "<": value < 0,
        "=": value == 0,
    }[rel]


@dataclass(frozen=True)
class Budget:
    max_depth: int = 20
    max_boxes: int = 100_000

    @classmethod
    def default(cls) -> "Budget":
        env = os.environ.get("STABCERT_BUDGET")
        return cls(max_boxes=int(env)) if env else cls()


def _sqrt_upper(q: Fraction) -> Fraction:
    """Rational upper bound on sqrt(q), exact for perfect squares."""
    n, d = q.numerator, q.denominator
    r = math.isqrt(n * d)
    if r * r == n * d:
        return Fraction(r, d)
    return Fraction(r + 1, d)


def _norm2(vars) -> Polynomial:
    return Polynomial.sum_of_squares(vars)


def region_formula(region: Region, vars: Sequence[str]) -> Formula:
    """Exact membership formula for a region."""
    n2 = _norm2(vars)
    if isinstance(region, Box):
        return fm.conj(
            *(
                fm.conj(fm.atom(Polynomial.var(v), ">=", lo), fm.atom(Polynomial.var(v), "<=", hi))
                for v, (lo, hi) in zip(region.vars, region.bounds)
            )
        )
    if isinstance(region, Ball):
        return fm.atom(n2, "<=", region.r2)
    if isinstance(region, Annulus):
        return fm.conj(fm.atom(n2, ">=", region.rmin2), fm.atom(n2, "<=", region.rmax2))
    if isinstance(region, PuncturedBall):
        return fm.conj(fm.atom(n2, ">", 0), fm.atom(n2, "<=", region.gamma2))
    if isinstance(region, SetMinus):
        return fm.conj(region_formula(region.box, vars), fm.nnf(fm.Not(region.removed)))
    if isinstance(region, Constrained):
        return fm.conj(region_formula(region.box, vars), region.constraint)
    if isinstance(region, NonZero):
        return fm.atom(n2, ">", 0)
    return fm.TRUE


def _box_and_constraint(region: Region, vars) -> tuple[Box, Formula]:
    n2 = _norm2(vars)
    if isinstance(region, Box):
        return region, fm.TRUE
    if isinstance(region, Ball):
        return Box.cube(vars, _sqrt_upper(to_fraction(region.r2))), fm.atom(n2, "<=", region.r2)
    if isinstance(region, Annulus):
        return Box.cube(vars, _sqrt_upper(to_fraction(region.rmax2))), region_formula(region, vars)
    if isinstance(region, SetMinus):
        return region.box, fm.nnf(fm.Not(region.removed))
    if isinstance(region, Constrained):
        return region.box, fm.nnf(region.constraint)
    raise ValueError(f"region {region} has no box enclosure")


# -- interval truth of formulas ------------------------------------------


def _atom_truth(a: fm.Atom, lo, hi):
    if a.rel == ">=":
        return True if lo >= 0 else (False if hi < 0 else None)
    if a.rel == ">":
        return True if lo > 0 else (False if hi <= 0 else None)
    if a.rel == "=":
        return True if lo == hi == 0 else (False if lo > 0 or hi < 0 else None)
    return True if lo > 0 or hi < 0 else (False if lo == hi == 0 else None)


class _Compiler:
    """Caches per-polynomial compiled forms along one variable order."""

    def __init__(self, order):
        self.order = tuple(order)
        self.cache = {}

    def __call__(self, p: Polynomial) -> CompiledPoly:
        c = self.cache.get(p)
        if c is None:
            c = self.cache[p] = CompiledPoly(p, self.order)
        return c


def _truth(f: Formula, box, comp: _Compiler):
    if isinstance(f, fm.Atom):
        lo, hi = comp(f.poly).eval_box(box)
        return _atom_truth(f, lo, hi)
    if isinstance(f, fm.Const):
        return f.value
    if isinstance(f, fm.And):
        vals = [_truth(a, box, comp) for a in f.args]
        if any(v is False for v in vals):
            return False
        return True if all(v is True for v in vals) else None
    if isinstance(f, fm.Or):
        vals = [_truth(a, box, comp) for a in f.args]
        if any(v is True for v in vals):
            return True
        return False if all(v is False for v in vals) else None
    return _truth(fm.nnf(f), box, comp)


_MULTIPLIERS = tuple(Fraction(x) for x in ("1", "2", "1/2", "4", "1/4", "8", "1/8"))


def _certified(lo, strict: bool) -> bool:
    return lo > 0 or (lo >= 0 and not strict)


def _ok_under(q: Polynomial, strict: bool, f: Formula, box, comp: _Compiler) -> bool:
    """Does ``q >= 0`` (``> 0``) hold on ``box`` intersected with ``f``?

    Uses interval truth of the constraint plus fixed rational multipliers, a
    cheap Positivstellensatz-style certificate for leaves cut by the boundary
    of the constraint set.
    """
    if isinstance(f, fm.Const):
        return not f.value
    if isinstance(f, fm.And):
        return any(_ok_under(q, strict, a, box, comp) for a in f.args)
    if isinstance(f, fm.Or):
        return all(_ok_under(q, strict, a, box, comp) for a in f.args)
    if isinstance(f, fm.Not):
        return _ok_under(q, strict, fm.nnf(f), box, comp)
    h = f.poly
    lo, hi = comp(h).eval_box(box)
    if _atom_truth(f, lo, hi) is False:
        return True
    if f.rel == "!=":
        return False
    lams = _MULTIPLIERS if f.rel != "=" else _MULTIPLIERS + tuple(-m for m in _MULTIPLIERS)
    for lam in lams:
        qlo, _ = comp(q - lam * h).eval_box(box)
        if f.rel == ">" and lam > 0:
            if qlo >= 0:
                return True
        elif _certified(qlo, strict):
            return True
    return False


def _split(box):
    widths = [hi - lo for lo, hi in box]
    i = max(range(len(box)), key=lambda k: (widths[k], -k))
    lo, hi = box[i]
    mid = (lo + hi) / 2
    left = box[:i] + ((lo, mid),) + box[i + 1 :]
    right = box[:i] + ((mid, hi),) + box[i + 1 :]
    return left, right


def _probe_points(box, violated: bool):
    center = tuple((lo + hi) / 2 for lo, hi in box)
    yield center
    if violated:
        for corner in product(*box):
            yield corner


@dataclass
class _BnbOutcome:
    status: Status
    margin: Fraction | None = None
    witness: tuple | None = None
    boxes: int = 0
    max_depth: int = 0
    unresolved: int = 0


def _bnb(q: Polynomial, strict: bool, order, box, constraint: Formula, budget: Budget) -> _BnbOutcome:
    """Branch and bound for ``q >= 0`` (``> 0``) on ``box`` cut by ``constraint``."""
    comp = _Compiler(order)
    cq = comp(q)
    stack = [(tuple(box), 0)]
    margin = None
    boxes = 0
    deepest = 0
    unresolved = 0
    has_constraint = constraint != fm.TRUE
    while stack:
        b, depth = stack.pop()
        boxes += 1
        deepest = max(deepest, depth)
        if boxes > budget.max_boxes:
            return _BnbOutcome(Status.UNKNOWN, boxes=boxes, max_depth=deepest, unresolved=unresolved + len(stack) + 1)
        lo, hi = cq.eval_box(b)
        if _certified(lo, strict):
            margin = lo if margin is None else min(margin, lo)
            continue
        inside = True
        if has_constraint:
            t = _truth(constraint, b, comp)
            if t is False:
                continue
            inside = t is True
            if not inside and _ok_under(q, strict, constraint, b, comp):
                continue
        violated = inside and (hi < 0 or (strict and hi <= 0))
        for pt in _probe_points(b, violated or depth >= budget.max_depth):
            val = cq.eval_point(pt)
            if (val < 0 or (strict and val == 0)) and (
                not has_constraint or fm.evaluate(constraint, dict(zip(order, pt)))
            ):
                return _BnbOutcome(Status.DISPROVED, witness=pt, boxes=boxes, max_depth=deepest)
        if depth >= budget.max_depth:
            unresolved += 1
            continue
        left, right = _split(b)
        stack.append((right, depth + 1))
        stack.append((left, depth + 1))
    if unresolved:
        return _BnbOutcome(Status.UNKNOWN, boxes=boxes, max_depth=deepest, unresolved=unresolved)
    return _BnbOutcome(Status.PROVED, margin=margin, boxes=boxes, max_depth=deepest)


def _requirements(poly: Polynomial, rel: str) -> list[tuple[Polynomial, bool]]:
    """Rewrite ``poly rel 0`` as a list of ``q >= 0`` / ``q > 0`` requirements."""
    return {
        ">=": [(poly, False)],
        ">": [(poly, True)],
        "<=": [(-poly, False)],
        "<": [(-poly, True)],
        "=": [(poly, False), (-poly, False)],
    }[rel]


def check_sign_bb(cond: SignCondition, budget: Budget | None = None) -> CheckResult:
    """Interval branch and bound over a compact region."""
    budget = budget or Budget.default()
    if isinstance(cond.region, (Global, NonZero)):
        return check_global(cond, budget)
    if isinstance(cond.region, PuncturedBall):
        return check_punctured(cond.poly, cond.rel, cond.region.gamma2, cond.vars, budget)
    box, constraint = _box_and_constraint(cond.region, cond.vars)
    order = cond.vars
    bounds = tuple(box.bounds[box.vars.index(v)] for v in order)
    results = []
    for q, strict in _requirements(cond.poly, cond.rel):
        out = _bnb(q, strict, order, bounds, constraint, budget)
        info = dict(boxes=out.boxes, depth=out.max_depth)
        if out.status is Status.DISPROVED:
            return CheckResult.disproved(dict(zip(order, out.witness)), cond.describe(), **info)
        if out.status is Status.UNKNOWN:
            results.append(CheckResult.unknown("budget-exhausted", unresolved=out.unresolved, **info))
        else:
            if out.margin is not None:
                info["margin"] = out.margin
            results.append(CheckResult.proved(**info))
    return merge(results)


# -- quadratic forms -------------------------------------------------------

_MODES = {"PSD": (1, False), "PD": (1, True), "NSD": (-1, False), "ND": (-1, True)}


def check_quadratic_form(q: Polynomial, mode: str, vars: Sequence[str] | None = None) -> CheckResult:
    """Exact (semi)definiteness of a homogeneous quadratic form."""
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {sorted(_MODES)}")
    order = tuple(vars) if vars is not None else q.vars
    sign, strict = _MODES[mode]
    try:
        Q = gram_matrix(sign * Polynomial.coerce(q), order)
    except NotQuadraticForm as exc:
        return CheckResult.unknown("unsupported-shape", detail=str(exc))
    n = len(order)
    fac = ldlt(Q)
    info = dict(pivots=[sign * d for d in fac.pivots], rank=fac.rank, tier="ldlt")
    if fac.psd and (not strict or fac.rank == n):
        return CheckResult.proved(**info)
    if not order:
        if strict:
            return CheckResult.unknown("unsupported-shape", detail="empty variable list")
        return CheckResult.proved(**info)
    w = dict(zip(order, fac.witness))
    return CheckResult.disproved(w, f"{q} is {mode}", **info)


def is_quadratic_form(p: Polynomial) -> bool:
    return not p.is_zero() and p.is_homogeneous() and p.degree() == 2


# -- homogeneous dominance -------------------------------------------------


def _faces(n: int, radius=Fraction(1)):
    """Boxes covering the boundary of the cube ``[-r, r]^n``; every ray meets it."""
    out = []
    for i in range(n):
        for s in (-radius, radius):
            out.append(tuple((s, s) if j == i else (-radius, radius) for j in range(n)))
    return out


def _sphere_bnb(q: Polynomial, strict: bool, order, budget: Budget):
    """Certify ``q >= 0`` (``> 0``) on the unit cube surface; returns outcome + margin."""
    margin = None
    boxes = 0
    for face in _faces(len(order)):
        out = _bnb(q, strict, order, face, fm.TRUE, budget)
        boxes += out.boxes
        if out.status is not Status.PROVED:
            out.boxes = boxes
            return out
        margin = out.margin if margin is None else min(margin, out.margin)
    return _BnbOutcome(Status.PROVED, margin=margin, boxes=boxes)


def _sup_abs_on_cube_surface(p: Polynomial, order) -> Fraction:
    comp = CompiledPoly(p, order)
    best = Fraction(0)
    for face in _faces(len(order)):
        for sub in _subdivide(face, 2):
            lo, hi = comp.eval_box(sub)
            best = max(best, abs(lo), abs(hi))
    return best


def _subdivide(box, levels: int):
    boxes = [box]
    for _ in range(levels):
        nxt = []
        for b in boxes:
            nxt.extend(_split(b))
        boxes = nxt
    return boxes


def _scale_into_ball(point: Sequence[Fraction], gamma2: Fraction) -> tuple:
    """Scale a non-zero point by a power of two so it lies in ``|x|^2 <= gamma2``."""
    n2 = sum(x * x for x in point)
    t = Fraction(1)
    while n2 * t * t > gamma2:
        t /= 2
    while n2 * (2 * t) ** 2 <= gamma2 and t < 1:
        t *= 2
    return tuple(x * t for x in point)


def check_punctured(
    poly: Polynomial,
    rel: str,
    gamma2,
    vars: Sequence[str],
    budget: Budget | None = None,
    samples: int = 400,
    seed: int = 0,
) -> CheckResult:
    """``poly rel 0`` on ``0 < |x|^2 <= gamma2``, without refining at the origin.

    Tier 1 handles quadratic forms exactly. Tier 2 splits ``poly`` into its
    lowest-degree homogeneous part ``p_m`` and a remainder, certifies
    ``p_m`` on the cube surface with margin ``c`` and shrinks the radius until
    the remainder is dominated. The proved radius is reported as
    ``info["gamma2"]`` and may be smaller than the requested one.
    """
    budget = budget or Budget.default()
    gamma2 = to_fraction(gamma2)
    order = tuple(vars)
    poly = Polynomial.coerce(poly)
    if rel == "=":
        return merge(
            [check_punctured(poly, ">=", gamma2, order, budget), check_punctured(poly, "<=", gamma2, order, budget)]
        )
    (q, strict), = _requirements(poly, rel)
    describe = f"{poly} {rel} 0"
    region = PuncturedBall(gamma2)

    def refute(point, **info):
        return CheckResult.disproved(dict(zip(order, point)), describe, **info)

    if q.is_zero():
        if strict:
            pt = _scale_into_ball((Fraction(1),) + (Fraction(0),) * (len(order) - 1), gamma2)
            return refute(pt, tier="zero")
        return CheckResult.proved(gamma2=gamma2, tier="zero", all_radii=True)

    if is_quadratic_form(q):
        res = check_quadratic_form(q, "PD" if strict else "PSD", order)
        if res.is_proved:
            return CheckResult.proved(gamma2=gamma2, all_radii=True, **res.info)
        if res.is_disproved:
            pt = _scale_into_ball(tuple(res.witness[v] for v in order), gamma2)
            return refute(pt, tier="ldlt")
        return res

    parts = q.homogeneous_parts()
    m = min(parts)
    low = parts[m]
    if m == 0:
        c0 = low.constant_term()
        if c0 < 0:
            w = _falsify_points(SignCondition(poly, rel, region, order), samples, seed)
            if w is not None:
                return refute(w, tier="sampling")
            return CheckResult.unknown("unsupported-shape", detail="negative value at the origin")
        margin = c0
    else:
        if m % 2 == 1:
            w = _falsify_points(SignCondition(poly, rel, region, order), samples, seed)
            if w is not None:
                return refute(w, tier="sampling")
            return CheckResult.unknown("unsupported-shape", detail=f"lowest homogeneous part has odd degree {m}")
        out = _sphere_bnb(low, True, order, budget)
        if out.status is not Status.PROVED:
            if len(parts) == 1:
                # homogeneous: the sign on the cube surface decides every radius
                out2 = _sphere_bnb(low, strict, order, budget)
                if out2.status is Status.PROVED:
                    return CheckResult.proved(gamma2=gamma2, all_radii=True, tier="homogeneous", boxes=out2.boxes)
                if out2.status is Status.DISPROVED:
                    return refute(_scale_into_ball(out2.witness, gamma2), tier="homogeneous")
            w = _falsify_points(SignCondition(poly, rel, region, order), samples, seed)
            if w is not None:
                return refute(w, tier="sampling")
            if out.status is Status.DISPROVED and len(parts) == 1:
                return refute(_scale_into_ball(out.witness, gamma2), tier="homogeneous")
            return CheckResult.unknown("budget-exhausted" if out.status is Status.UNKNOWN else "unsupported-shape",
                                       detail="lowest homogeneous part not certified definite")
        margin = out.margin
        if len(parts) == 1:
            return CheckResult.proved(gamma2=gamma2, all_radii=True, tier="homogeneous", margin=margin)

    # remainder bound: |q_j(x)| <= C_j |x|_inf^j
    consts = {j: _sup_abs_on_cube_surface(p, order) for j, p in parts.items() if j > m}
    gamma = _sqrt_upper(gamma2)
    g = gamma
    for _ in range(40):
        if sum(C * g ** (j - m) for j, C in consts.items()) < margin:
            g2 = min(g * g, gamma2)
            return CheckResult.proved(gamma2=g2, shrunk=g2 < gamma2, tier="dominance", margin=margin, lowest_degree=m)
        g /= 2
    return CheckResult.unknown("budget-exhausted", detail="radius shrink schedule exhausted")


def check_ball(
    poly: Polynomial, rel: str, gamma2, vars: Sequence[str], budget: Budget | None = None
) -> CheckResult:
    """``poly rel 0`` on the closed ball ``|x|^2 <= gamma2``.

    The origin is checked exactly; the punctured remainder goes through
    :func:`check_punctured`, falling back to branch and bound when the
    dominance argument does not apply.
    """
    order = tuple(vars)
    poly = Polynomial.coerce(poly)
    origin = {x: Fraction(0) for x in order}
    if not _rel_holds(rel, poly.constant_term()):
        return CheckResult.disproved(origin, f"{poly} {rel} 0", tier="origin")
    res = check_punctured(poly, rel, gamma2, order, budget)
    if res.is_unknown:
        bb = check_sign_bb(SignCondition(poly, rel, Ball(to_fraction(gamma2)), order), budget)
        if bb.is_proved:
            return CheckResult.proved(gamma2=to_fraction(gamma2), tier="bnb", **bb.info)
        if bb.is_disproved:
            return bb
    return res


def check_punctured_positivity(v: Polynomial, gamma2, vars: Sequence[str] | None = None,
                               budget: Budget | None = None) -> CheckResult:
    """``0 < |x|^2 <= gamma2 -> v > 0``, with ``v(0) = 0`` checked first."""
    v = Polynomial.coerce(v)
    order = tuple(vars) if vars is not None else v.vars
    origin = {x: Fraction(0) for x in order}
    if v.constant_term() != 0:
        return CheckResult.disproved(origin, "v(0) = 0", tier="origin")
    return check_punctured(v, ">", gamma2, order, budget)


# -- global conditions ------------------------------------------------------


def _augmented_gram(q: Polynomial, order):
    """Gram matrix of the homogenisation of a quadratic polynomial."""
    t = "__h"
    while t in order:
        t += "_"
    hom = Polynomial.zero()
    for e, c in q.aligned(order):
        d = sum(e)
        hom = hom + Polynomial(
            {tuple(e) + (2 - d,): c}, tuple(order) + (t,)
        )
    return gram_matrix(hom, tuple(order) + (t,)), t


def check_global(cond: SignCondition, budget: Budget | None = None) -> CheckResult:
    """``poly rel 0`` for every point of the space."""
    budget = budget or Budget.default()
    order = cond.vars
    results = []
    for q, strict in _requirements(cond.poly, cond.rel):
        res = _check_global_req(q, strict, order, budget, cond)
        if res.is_disproved:
            return res
        results.append(res)
    return merge(results)


def _check_global_req(q: Polynomial, strict: bool, order, budget: Budget, cond: SignCondition) -> CheckResult:
    describe = cond.describe()
    origin = tuple(Fraction(0) for _ in order)
    punctured = isinstance(cond.region, NonZero)

    def refute(pt, **info):
        return CheckResult.disproved(dict(zip(order, pt)), describe, **info)

    c0 = q.constant_term()
    if not punctured and (c0 < 0 or (strict and c0 == 0)):
        return refute(origin, tier="origin")
    if q.is_constant():
        if punctured and (c0 < 0 or (strict and c0 == 0)):
            return refute((Fraction(1),) + origin[1:], tier="constant")
        return CheckResult.proved(tier="constant")
    deg = q.degree()
    if punctured and is_quadratic_form(q):
        res = check_quadratic_form(q, "PD" if strict else "PSD", order)
        if res.is_disproved:
            return refute(tuple(res.witness[v] for v in order), tier="ldlt")
        return res
    if deg <= 2 and not punctured:
        Q, _ = _augmented_gram(q, order)
        fac = ldlt(Q)
        n = len(order)
        if fac.psd:
            if not strict or fac.rank == n + 1:
                return CheckResult.proved(tier="ldlt", pivots=fac.pivots)
        elif fac.witness is not None:
            w = fac.witness
            s = w[-1]
            if s != 0:
                candidates = [tuple(x / s for x in w[:-1])]
            else:
                candidates = [tuple(x * 2**k for x in w[:-1]) for k in range(64)]
            for pt in candidates:
                if not _rel_holds(">" if strict else ">=", q.evaluate(dict(zip(order, pt)))):
                    return refute(pt, tier="ldlt")
    w = _falsify_points(cond, 400, 0)
    if w is not None:
        return refute(w, tier="sampling")
    parts = q.homogeneous_parts()
    if len(parts) == 1:
        m = deg
        if m % 2 == 1:
            return CheckResult.unknown("unsupported-shape", detail="odd homogeneous form")
        out = _sphere_bnb(q, strict, order, budget)
        if out.status is Status.PROVED:
            return CheckResult.proved(tier="homogeneous", margin=out.margin)
        if out.status is Status.DISPROVED:
            return refute(out.witness, tier="homogeneous")
        return CheckResult.unknown("budget-exhausted")
    # low-degree side: q > 0 on 0 < |x|_inf <= r_lo (or q >= 0 incl. the origin)
    if c0 > 0 or punctured:
        low = check_punctured(q, ">", Fraction(1), order, budget)
    else:
        low = CheckResult.unknown("unsupported-shape")
    if not low.is_proved:
        return CheckResult.unknown("unsupported-shape", detail="lower forms not dominated near the origin")
    r_lo2 = low.info["gamma2"]
    top_deg = max(parts)
    top = parts[top_deg]
    if top_deg % 2 == 1:
        return CheckResult.unknown("unsupported-shape", detail="odd top-degree form")
    out = _sphere_bnb(top, True, order, budget)
    if out.status is not Status.PROVED:
        return CheckResult.unknown("unsupported-shape", detail="top-degree form not positive definite")
    lower = sum((_sup_abs_on_cube_surface(p, order) for j, p in parts.items() if j < top_deg), Fraction(0))
    r_hi = max(Fraction(1), lower / out.margin) + 1
    shell = _bnb(q, strict, order, tuple((-r_hi, r_hi) for _ in order),
                 fm.atom(_norm2(order), ">=", r_lo2), budget)
    if shell.status is Status.PROVED:
        return CheckResult.proved(tier="dominance", inner_radius2=r_lo2, outer_radius=r_hi)
    if shell.status is Status.DISPROVED:
        return refute(shell.witness, tier="shell")
    return CheckResult.unknown("budget-exhausted")


def escape_radius(p: Polynomial, vars: Sequence[str], budget: Budget | None = None) -> Fraction | None:
    """Rational ``r`` with ``p > 0`` whenever ``|x|_inf >= r``, if the top form allows it."""
    budget = budget or Budget.default()
    p = Polynomial.coerce(p)
    order = tuple(vars)
    if p.is_constant():
        return Fraction(1) if p.constant_term() > 0 else None
    parts = p.homogeneous_parts()
    d = max(parts)
    if d % 2 == 1:
        return None
    out = _sphere_bnb(parts[d], True, order, budget)
    if out.status is not Status.PROVED:
        return None
    lower = sum((_sup_abs_on_cube_surface(q, order) for j, q in parts.items() if j < d), Fraction(0))
    return max(Fraction(1), lower / out.margin) + 1


def lower_bound(p: Polynomial, box: Box, constraint: Formula = fm.TRUE, levels: int = 10) -> Fraction | None:
    """Interval lower bound of ``p`` over ``box`` cut by ``constraint``.

    Subdivides uniformly ``levels`` times; leaves where the constraint is
    certainly false are dropped. Returns None when every leaf is dropped.
    """
    order = box.vars
    comp = _Compiler(order)
    cp = comp(Polynomial.coerce(p))
    best = None
    for leaf in _subdivide(tuple(box.bounds), levels):
        if constraint != fm.TRUE and _truth(constraint, leaf, comp) is False:
            continue
        lo, _ = cp.eval_box(leaf)
        best = lo if best is None else min(best, lo)
    return best


def _univariate_bounded_above(u: Polynomial) -> bool:
    """Is the univariate ``u(t)`` bounded above for ``t >= 0``?"""
    if u.is_constant():
        return True
    (t,) = u.vars
    deg = u.degree()
    return u.coefficient({t: deg}) < 0


def check_radial_unboundedness(v: Polynomial, vars: Sequence[str] | None = None,
                               budget: Budget | None = None) -> CheckResult:
    """Sufficient test that every sublevel set of ``v`` is bounded.

    Proved when the top-degree form is positive on the unit cube surface;
    Disproved when a rational ray is found along which ``v`` stays bounded
    above (so some sublevel set contains the whole ray).
    """
    budget = budget or Budget.default()
    v = Polynomial.coerce(v)
    order = tuple(vars) if vars is not None else v.vars
    if v.is_constant():
        if not order:
            return CheckResult.proved(tier="trivial")
        d = (Fraction(1),) + (Fraction(0),) * (len(order) - 1)
        return CheckResult.disproved(dict(zip(order, d)), "ray with bounded v", tier="ray")
    parts = v.homogeneous_parts()
    top_deg = max(parts)
    top = parts[top_deg]
    if top_deg % 2 == 0:
        out = _sphere_bnb(top, True, order, budget)
        if out.status is Status.PROVED:
            return CheckResult.proved(tier="top-form", margin=out.margin, degree=top_deg)
    directions = []
    if is_quadratic_form(top):
        fac = ldlt(gram_matrix(top, order))
        if fac.witness is not None:
            directions.append(tuple(fac.witness))
            directions.append(tuple(-x for x in fac.witness))
    n = len(order)
    for i in range(n):
        for s in (1, -1):
            directions.append(tuple(Fraction(s) if j == i else Fraction(0) for j in range(n)))
    if n <= 4:
        for signs in product((1, 0, -1), repeat=n):
            if any(signs):
                directions.append(tuple(Fraction(s) for s in signs))
    t = "__t"
    while t in order:
        t += "_"
    T = Polynomial.var(t)
    for d in directions:
        u = v.subs({x: c * T for x, c in zip(order, d)})
        if _univariate_bounded_above(u):
            return CheckResult.disproved(dict(zip(order, d)), "ray with bounded v", tier="ray")
    return CheckResult.unknown("unsupported-shape", detail="top-degree form not certified definite")


# -- sampling ------------------------------------------------------------------

_DENOM = 1 << 16


def _rand_rational(rng, lo: Fraction, hi: Fraction) -> Fraction:
    k = int(rng.integers(0, _DENOM + 1))
    return lo + (hi - lo) * Fraction(k, _DENOM)


def _sample_candidates(cond: SignCondition, samples: int, seed: int):
    rng = np.random.default_rng(seed)
    order = cond.vars
    n = len(order)
    region = cond.region
    if isinstance(region, (Global, NonZero)):
        scales = [Fraction(2) ** k for k in range(-6, 7)]
    elif isinstance(region, PuncturedBall):
        g = _sqrt_upper(to_fraction(region.gamma2))
        scales = [g / Fraction(2) ** k for k in range(0, 12)]
    else:
        box, _ = _box_and_constraint(region, order)
        bounds = tuple(box.bounds[box.vars.index(v)] for v in order)
        yield tuple((lo + hi) / 2 for lo, hi in bounds)
        for corner in product(*bounds):
            yield corner
        for _ in range(samples):
            yield tuple(_rand_rational(rng, lo, hi) for lo, hi in bounds)
        return
    # structured points along axes and diagonals at each scale, then random ones
    for s in scales:
        for i in range(n):
            for sign in (1, -1):
                for frac in (Fraction(1), Fraction(1, 2)):
                    yield tuple(sign * s * frac if j == i else Fraction(0) for j in range(n))
    for k in range(samples):
        s = scales[k % len(scales)]
        yield tuple(_rand_rational(rng, -s, s) for _ in range(n))


def _falsify_points(cond: SignCondition, samples: int, seed: int):
    member = cond.region_formula()
    order = cond.vars
    cp = CompiledPoly(cond.poly, order)
    for pt in _sample_candidates(cond, samples, seed):
        point = dict(zip(order, pt))
        if not _rel_holds(cond.rel, cp.eval_point(pt)) and fm.evaluate(member, point):
            return pt
    return None


def falsify(cond: SignCondition, samples: int = 100, seed: int = 0) -> dict | None:
    """Deterministic pseudo-random search for an exact counterexample."""
    pt = _falsify_points(cond, samples, seed)
    return None if pt is None else dict(zip(cond.vars, pt))


def check(cond: SignCondition, budget: Budget | None = None) -> CheckResult:
    """Route a condition to the matching strategy."""
    return check_sign_bb(cond, budget)
