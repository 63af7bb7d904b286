"""Quantifier-free semialgebraic formulas and their syntactic topology.

Atoms compare one polynomial against zero. Every atom is stored in a
canonical shape (``p >= 0``, ``p > 0``, ``p = 0`` or ``p != 0``, with
equations scaled so that their leading coefficient is positive) which makes
structural equality meaningful.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Union

from .polynomial import Polynomial

RELATIONS = ("=", "!=", ">=", ">", "<=", "<")
_NEGATE = {"=": "!=", "!=": "=", ">=": "<", ">": "<=", "<=": ">", "<": ">="}


class UnsupportedFormula(ValueError):
    """The syntactic operation is not defined on this formula shape."""


class NonRegularClosureWarning(UserWarning):
    """Syntactic closure may over-approximate for a non-square-free atom."""


def _lead_positive(p: Polynomial) -> Polynomial:
    if p.is_zero():
        return p
    _, c = next(p.items())
    return p / c


@dataclass(frozen=True)
class Atom:
    poly: Polynomial
    rel: str

    def __post_init__(self):
        if self.rel not in RELATIONS:
            raise ValueError(f"unknown relation {self.rel!r}")
        p, rel = self.poly, self.rel
        if rel == "<=":
            p, rel = -p, ">="
        elif rel == "<":
            p, rel = -p, ">"
        elif rel in ("=", "!="):
            p = _lead_positive(p)
        object.__setattr__(self, "poly", p)
        object.__setattr__(self, "rel", rel)

    def holds(self, value: Fraction) -> bool:
        return {
            "=": value == 0,
            "!=": value != 0,
            ">=": value >= 0,
            ">": value > 0,
        }[self.rel]

    def __str__(self):
        return f"{self.poly} {self.rel} 0"


@dataclass(frozen=True)
class And:
    args: tuple

    def __str__(self):
        return " & ".join(_paren(a, And) for a in self.args)


@dataclass(frozen=True)
class Or:
    args: tuple

    def __str__(self):
        return " | ".join(_paren(a, Or) for a in self.args)


@dataclass(frozen=True)
class Not:
    arg: "Formula"

    def __str__(self):
        return f"!({self.arg})"


@dataclass(frozen=True)
class Const:
    value: bool

    def __str__(self):
        return "true" if self.value else "false"


TRUE = Const(True)
FALSE = Const(False)
Formula = Union[Atom, And, Or, Not, Const]


def _paren(f, parent) -> str:
    s = str(f)
    if isinstance(f, (And, Or)) and not isinstance(f, parent):
        return f"({s})"
    return s


def atom(lhs, rel: str, rhs=0) -> Atom:
    return Atom(Polynomial.coerce(lhs) - Polynomial.coerce(rhs), rel)


def conj(*args) -> Formula:
    flat = []
    for a in args:
        if isinstance(a, And):
            flat.extend(a.args)
        elif a == TRUE:
            continue
        elif a == FALSE:
            return FALSE
        else:
            flat.append(a)
    flat = list(dict.fromkeys(flat))
    if not flat:
        return TRUE
    return flat[0] if len(flat) == 1 else And(tuple(flat))


def disj(*args) -> Formula:
    flat = []
    for a in args:
        if isinstance(a, Or):
            flat.extend(a.args)
        elif a == FALSE:
            continue
        elif a == TRUE:
            return TRUE
        else:
            flat.append(a)
    flat = list(dict.fromkeys(flat))
    if not flat:
        return FALSE
    return flat[0] if len(flat) == 1 else Or(tuple(flat))


def negate(f: Formula) -> Formula:
    return Not(f)


def nnf(f: Formula) -> Formula:
    """Negation normal form: negations are absorbed into atoms."""
    if isinstance(f, Not):
        g = f.arg
        if isinstance(g, Atom):
            return Atom(g.poly, _NEGATE[g.rel])
        if isinstance(g, Not):
            return nnf(g.arg)
        if isinstance(g, And):
            return disj(*(nnf(Not(a)) for a in g.args))
        if isinstance(g, Or):
            return conj(*(nnf(Not(a)) for a in g.args))
        return Const(not g.value)
    if isinstance(f, And):
        return conj(*(nnf(a) for a in f.args))
    if isinstance(f, Or):
        return disj(*(nnf(a) for a in f.args))
    return f


def atoms(f: Formula) -> list:
    if isinstance(f, Atom):
        return [f]
    if isinstance(f, (And, Or)):
        return [a for g in f.args for a in atoms(g)]
    if isinstance(f, Not):
        return atoms(f.arg)
    return []


def free_variables(f: Formula) -> frozenset:
    out = set()
    for a in atoms(f):
        out |= a.poly.variables()
    return frozenset(out)


def evaluate(f: Formula, point: Mapping[str, object]) -> bool:
    """Exact truth value at a rational point."""
    if isinstance(f, Atom):
        return f.holds(f.poly.evaluate(point))
    if isinstance(f, And):
        return all(evaluate(a, point) for a in f.args)
    if isinstance(f, Or):
        return any(evaluate(a, point) for a in f.args)
    if isinstance(f, Not):
        return not evaluate(f.arg, point)
    return f.value


def substitute(f: Formula, mapping: Mapping[str, object]) -> Formula:
    if isinstance(f, Atom):
        p = f.poly.subs(mapping)
        if p.is_constant():
            return Const(f.holds(p.constant_term()))
        return Atom(p, f.rel)
    if isinstance(f, And):
        return conj(*(substitute(a, mapping) for a in f.args))
    if isinstance(f, Or):
        return disj(*(substitute(a, mapping) for a in f.args))
    if isinstance(f, Not):
        return nnf(Not(substitute(f.arg, mapping)))
    return f


def simplify(f: Formula) -> Formula:
    """Fold constant atoms and merge ``p >= 0 & -p >= 0`` into ``p = 0``."""
    if isinstance(f, Atom):
        if f.poly.is_constant():
            return Const(f.holds(f.poly.constant_term()))
        return f
    if isinstance(f, Or):
        return disj(*(simplify(a) for a in f.args))
    if isinstance(f, Not):
        return nnf(Not(simplify(f.arg)))
    if isinstance(f, And):
        args = [simplify(a) for a in f.args]
        ge = [a for a in args if isinstance(a, Atom) and a.rel == ">="]
        used = set()
        merged = []
        for i, a in enumerate(ge):
            for b in ge[i + 1 :]:
                if id(b) in used or id(a) in used:
                    continue
                if a.poly == -b.poly:
                    merged.append(Atom(a.poly, "="))
                    used.update((id(a), id(b)))
        rest = [a for a in args if id(a) not in used]
        return conj(*rest, *merged)
    return f


def _check_closable(f: Formula) -> None:
    for a in atoms(f):
        if a.rel == "!=":
            raise UnsupportedFormula(f"closure/boundary of a '!=' atom is not supported: {a}")
        if not is_square_free(a.poly):
            warnings.warn(
                f"atom {a} has a repeated factor; syntactic closure may over-approximate",
                NonRegularClosureWarning,
                stacklevel=3,
            )


def _relax(f: Formula, table: dict) -> Formula:
    if isinstance(f, Atom):
        rel = table.get(f.rel, f.rel)
        if rel is False:
            return FALSE
        return Atom(f.poly, rel)
    if isinstance(f, And):
        return conj(*(_relax(a, table) for a in f.args))
    if isinstance(f, Or):
        return disj(*(_relax(a, table) for a in f.args))
    return f


def syntactic_closure(f: Formula) -> Formula:
    """Replace strict atoms by their non-strict counterparts (NNF input)."""
    f = nnf(f)
    _check_closable(f)
    return _relax(f, {">": ">="})


def syntactic_interior(f: Formula) -> Formula:
    f = nnf(f)
    _check_closable(f)
    return _relax(f, {">=": ">", "=": False})


def syntactic_boundary(f: Formula) -> Formula:
    f = nnf(f)
    _check_closable(f)
    return simplify(nnf(conj(syntactic_closure(f), Not(syntactic_interior(f)))))


def is_closed_syntactically(f: Formula) -> bool:
    return all(a.rel in (">=", "=") for a in atoms(nnf(f)))


def is_square_free(p: Polynomial) -> bool:
    if p.degree() <= 1:
        return True
    import sympy

    syms = sympy.symbols(p.vars)
    expr = sum(
        sympy.Rational(c.numerator, c.denominator) * sympy.Mul(*(s**k for s, k in zip(syms, e)))
        for e, c in p.terms.items()
    )
    _, factors = sympy.sqf_list(sympy.Poly(expr, *syms))
    return all(k == 1 for _, k in factors)


def ball(names, radius2) -> Atom:
    """Open Euclidean ball ``sum x_i^2 < radius2`` around the origin."""
    return atom(Polynomial.sum_of_squares(names), "<", radius2)
