"""ODE systems, target sets and the symbolic operations on them."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Union

from . import formula as fm
from .formula import Formula
from .polynomial import Polynomial, to_fraction


class InputError(ValueError):
    """Malformed or inconsistent user input."""


class UnsupportedNeighborhood(InputError):
    """No quantifier-free closed form for the neighborhood of this target."""


class NonEquilibriumWarning(UserWarning):
    pass


@dataclass(frozen=True)
class OdeSystem:
    """Polynomial vector field ``x' = f(x) & Q`` with constant parameters."""

    state_vars: tuple
    rhs: tuple
    param_vars: tuple = ()
    domain: Formula = fm.TRUE

    def __post_init__(self):
        object.__setattr__(self, "state_vars", tuple(self.state_vars))
        object.__setattr__(self, "param_vars", tuple(self.param_vars))
        object.__setattr__(self, "rhs", tuple(Polynomial.coerce(p) for p in self.rhs))
        if len(self.rhs) != len(self.state_vars):
            raise InputError("one right-hand side is required per state variable")
        if len(set(self.state_vars)) != len(self.state_vars):
            raise InputError("duplicate state variable")
        if set(self.state_vars) & set(self.param_vars):
            raise InputError("parameters and state variables must be disjoint")
        allowed = set(self.state_vars) | set(self.param_vars)
        for x, p in zip(self.state_vars, self.rhs):
            extra = p.variables() - allowed
            if extra:
                raise InputError(f"rhs of {x}' mentions unknown variables {sorted(extra)}")
        extra = fm.free_variables(self.domain) - allowed
        if extra:
            raise InputError(f"domain mentions unknown variables {sorted(extra)}")

    @property
    def dim(self) -> int:
        return len(self.state_vars)

    def field(self) -> dict:
        return dict(zip(self.state_vars, self.rhs))

    def instantiate(self, params: Mapping[str, object]) -> "OdeSystem":
        """Substitute rational values for (some of) the parameters."""
        unknown = set(params) - set(self.param_vars)
        if unknown:
            raise InputError(f"unknown parameters {sorted(unknown)}")
        vals = {k: to_fraction(v) for k, v in params.items()}
        return OdeSystem(
            self.state_vars,
            tuple(p.subs(vals) for p in self.rhs),
            tuple(v for v in self.param_vars if v not in vals),
            fm.substitute(self.domain, vals),
        )

    def extend(self, name: str, rhs) -> "OdeSystem":
        """Append a (ghost) state variable with its own right-hand side."""
        return OdeSystem(self.state_vars + (name,), self.rhs + (Polynomial.coerce(rhs),), self.param_vars, self.domain)


# -- target sets ----------------------------------------------------------
@dataclass(frozen=True)
class Origin:
    def formula(self, state_vars: Sequence[str]) -> Formula:
        return fm.atom(Polynomial.sum_of_squares(state_vars), "=")


@dataclass(frozen=True)
class CoordinateSubspace:
    """The set where every variable in ``zeroed`` vanishes."""

    zeroed: tuple

    def __post_init__(self):
        object.__setattr__(self, "zeroed", tuple(self.zeroed))
        if not self.zeroed:
            raise InputError("coordinate subspace needs at least one zeroed variable")

    def formula(self, state_vars: Sequence[str]) -> Formula:
        return fm.conj(*(fm.atom(Polynomial.var(v), "=") for v in self.zeroed))


@dataclass(frozen=True)
class FormulaTarget:
    """Semialgebraic target; ``compact`` is an assertion made by the user."""

    formula_: Formula
    compact: bool = False

    def formula(self, state_vars: Sequence[str]) -> Formula:
        return self.formula_


TargetSet = Union[Origin, CoordinateSubspace, FormulaTarget]


def validate_target(target: TargetSet, ode: OdeSystem) -> None:
    if isinstance(target, CoordinateSubspace):
        extra = set(target.zeroed) - set(ode.state_vars)
        if extra:
            raise InputError(f"subspace variables {sorted(extra)} are not state variables")
    elif isinstance(target, FormulaTarget):
        extra = fm.free_variables(target.formula_) - set(ode.state_vars) - set(ode.param_vars)
        if extra:
            raise InputError(f"target mentions unknown variables {sorted(extra)}")


def transverse_vars(target: TargetSet, state_vars: Sequence[str]) -> tuple:
    """Variables whose squared sum is the squared distance to the target."""
    if isinstance(target, Origin):
        return tuple(state_vars)
    if isinstance(target, CoordinateSubspace):
        return tuple(v for v in state_vars if v in target.zeroed)
    raise UnsupportedNeighborhood("only origin and coordinate-subspace targets have a transverse split")


def ball_radius(target: TargetSet, state_vars: Sequence[str]) -> Fraction | None:
    """Radius ``r`` when the target is syntactically ``|x|^2 < r^2`` or ``<= r^2``.

    Only rational radii are recognised.
    """
    if not isinstance(target, FormulaTarget) or not isinstance(target.formula_, fm.Atom):
        return None
    a = target.formula_
    if a.rel not in (">", ">="):
        return None
    r2 = a.poly.constant_term()
    if a.poly != r2 - Polynomial.sum_of_squares(state_vars) or r2 <= 0:
        return None
    r = _rational_sqrt(r2)
    return r


def _rational_sqrt(q: Fraction) -> Fraction | None:
    n, d = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if n * n == q.numerator and d * d == q.denominator:
        return Fraction(n, d)
    return None


def ball_target(radius, state_vars: Sequence[str], closed: bool = False) -> FormulaTarget:
    r = to_fraction(radius)
    rel = "<=" if closed else "<"
    return FormulaTarget(fm.atom(Polynomial.sum_of_squares(state_vars), rel, r * r), compact=True)


def neighborhood(target: TargetSet, eps, state_vars: Sequence[str]) -> Formula:
    """Quantifier-free ``eps``-neighborhood for targets with a closed-form distance.

    ``eps`` may be a positive rational or a polynomial (for a symbolic radius).
    """
    if not isinstance(eps, Polynomial):
        eps = to_fraction(eps)
        if eps <= 0:
            raise InputError("neighborhood radius must be positive")
    e = Polynomial.coerce(eps)
    if isinstance(target, (Origin, CoordinateSubspace)):
        names = transverse_vars(target, state_vars)
        return fm.atom(Polynomial.sum_of_squares(names), "<", e * e)
    r = ball_radius(target, state_vars)
    if r is not None:
        return fm.atom(Polynomial.sum_of_squares(state_vars), "<", (e + r) * (e + r))
    raise UnsupportedNeighborhood(f"no closed-form neighborhood for target {target}")


# -- symbolic operations --------------------------------------------------
def lie_derivative(p, ode: OdeSystem) -> Polynomial:
    """Derivative of ``p`` along solutions of ``ode``; parameters are constants."""
    p = Polynomial.coerce(p)
    extra = p.variables() - set(ode.state_vars) - set(ode.param_vars)
    if extra:
        raise InputError(f"unknown variables {sorted(extra)} in {p}")
    out = Polynomial.zero()
    for x, f in zip(ode.state_vars, ode.rhs):
        if x in p.vars:
            out = out + p.diff(x) * f
    return out


def _point(ode: OdeSystem, x0) -> dict:
    if isinstance(x0, Mapping):
        if set(x0) != set(ode.state_vars):
            raise InputError("point must bind exactly the state variables")
        return {k: to_fraction(v) for k, v in x0.items()}
    x0 = list(x0)
    if len(x0) != ode.dim:
        raise InputError(f"point has {len(x0)} coordinates, system has {ode.dim}")
    return {k: to_fraction(v) for k, v in zip(ode.state_vars, x0)}


def equilibrium_check(ode: OdeSystem, x0) -> Union[bool, Formula]:
    """True iff ``f(x0) = 0``; with symbolic parameters left, the residual formula."""
    pt = _point(ode, x0)
    values = [p.subs(pt) for p in ode.rhs]
    if all(v.is_constant() for v in values):
        return all(v.is_zero() for v in values)
    residual = fm.simplify(fm.conj(*(fm.atom(v, "=") for v in values)))
    if isinstance(residual, fm.Const):
        return residual.value
    return residual


def translate_to_origin(ode: OdeSystem, x0) -> OdeSystem:
    """Shift coordinates so that ``x0`` moves to the origin (same variable names)."""
    pt = _point(ode, x0)
    shift = {x: Polynomial.var(x) + c for x, c in pt.items()}
    moved = OdeSystem(
        ode.state_vars,
        tuple(p.subs(shift) for p in ode.rhs),
        ode.param_vars,
        fm.substitute(ode.domain, shift),
    )
    eq = equilibrium_check(ode, pt)
    if eq is False:
        warnings.warn(f"{pt} is not an equilibrium of the system", NonEquilibriumWarning, stacklevel=2)
    return moved
