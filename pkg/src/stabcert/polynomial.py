"""Exact multivariate polynomials over the rationals.

A :class:`Polynomial` stores a sparse map from exponent vectors to
:class:`fractions.Fraction` coefficients. Variable names are interned into a
sorted tuple per polynomial so that every exponent vector has the same length
and two equal polynomials always have identical internal representations.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import product
from numbers import Rational
from typing import Callable, Iterable, Iterator, Mapping, Union

import numpy as np

Number = Union[int, Fraction]
Monomial = tuple  # tuple[int, ...] aligned with Polynomial.vars


def to_fraction(value) -> Fraction:
    """Convert ints, Fractions and decimal strings to an exact Fraction.

    Floats are rejected so that nothing inexact leaks into the exact path.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot convert {type(value).__name__} to an exact rational")


def _embed(exps: Monomial, src: tuple, dst: tuple) -> Monomial:
    if src == dst:
        return exps
    pos = {v: i for i, v in enumerate(src)}
    return tuple(exps[pos[v]] if v in pos else 0 for v in dst)


class Polynomial:
    """Immutable sparse polynomial with exact rational coefficients."""

    __slots__ = ("vars", "terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, Number] | None = None, vars: Iterable[str] = ()):
        vars = tuple(vars)
        raw = {}
        for exps, c in (terms or {}).items():
            if len(exps) != len(vars):
                raise ValueError("exponent vector length does not match variables")
            if any((not isinstance(e, int)) or e < 0 for e in exps):
                raise ValueError(f"exponents must be non-negative integers, got {exps}")
            c = to_fraction(c)
            if c:
                exps = tuple(exps)
                raw[exps] = raw.get(exps, 0) + c
        raw = {e: c for e, c in raw.items() if c}
        used = sorted({v for e in raw for v, k in zip(vars, e) if k})
        canon = tuple(used)
        self.vars: tuple = canon
        self.terms: dict = {_embed(e, vars, canon): c for e, c in raw.items()}
        self._hash = None

    # -- constructors -----------------------------------------------------
    @classmethod
    def const(cls, c: Number) -> "Polynomial":
        return cls({(): c}, ())

    @classmethod
    def var(cls, name: str) -> "Polynomial":
        return cls({(1,): 1}, (name,))

    @classmethod
    def zero(cls) -> "Polynomial":
        return cls()

    @classmethod
    def coerce(cls, value) -> "Polynomial":
        if isinstance(value, Polynomial):
            return value
        return cls.const(to_fraction(value))

    @classmethod
    def sum_of_squares(cls, names: Iterable[str]) -> "Polynomial":
        out = cls.zero()
        for n in names:
            out = out + cls.var(n) ** 2
        return out

    # -- basic queries ----------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return not self.vars

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * len(self.vars), Fraction(0))

    def variables(self) -> frozenset:
        return frozenset(self.vars)

    def degree(self) -> int:
        """Total degree; the zero polynomial has degree -1."""
        if not self.terms:
            return -1
        return max(sum(e) for e in self.terms)

    def min_degree(self) -> int:
        if not self.terms:
            return -1
        return min(sum(e) for e in self.terms)

    def degree_in(self, name: str) -> int:
        if name not in self.vars:
            return 0
        i = self.vars.index(name)
        return max(e[i] for e in self.terms)

    def is_homogeneous(self) -> bool:
        return len({sum(e) for e in self.terms}) <= 1

    def items(self) -> Iterator[tuple[dict, Fraction]]:
        """Yield ``({var: exponent}, coefficient)`` pairs in canonical order."""
        for exps in sorted(self.terms, key=lambda e: (-sum(e), [-k for k in e])):
            yield {v: k for v, k in zip(self.vars, exps) if k}, self.terms[exps]

    def coefficient(self, monomial: Mapping[str, int]) -> Fraction:
        if any(v not in self.vars for v, k in monomial.items() if k):
            return Fraction(0)
        exps = tuple(monomial.get(v, 0) for v in self.vars)
        return self.terms.get(exps, Fraction(0))

    def aligned(self, order: Iterable[str]) -> list[tuple[Monomial, Fraction]]:
        """Terms with exponent vectors laid out along ``order``."""
        order = tuple(order)
        missing = set(self.vars) - set(order)
        if missing:
            raise ValueError(f"variables {sorted(missing)} not in {order}")
        return [(_embed(e, self.vars, order), c) for e, c in self.terms.items()]

    def homogeneous_parts(self) -> dict[int, "Polynomial"]:
        parts: dict[int, dict] = {}
        for e, c in self.terms.items():
            parts.setdefault(sum(e), {})[e] = c
        return {d: Polynomial(t, self.vars) for d, t in sorted(parts.items())}

    # -- arithmetic -------------------------------------------------------
    def _binary(self, other, op) -> "Polynomial":
        other = Polynomial.coerce(other)
        vars = tuple(sorted(set(self.vars) | set(other.vars)))
        a = {_embed(e, self.vars, vars): c for e, c in self.terms.items()}
        b = {_embed(e, other.vars, vars): c for e, c in other.terms.items()}
        return op(a, b, vars)

    def __add__(self, other) -> "Polynomial":
        def add(a, b, vars):
            out = dict(a)
            for e, c in b.items():
                out[e] = out.get(e, 0) + c
            return Polynomial(out, vars)

        return self._binary(other, add)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial({e: -c for e, c in self.terms.items()}, self.vars)

    def __sub__(self, other) -> "Polynomial":
        return self + (-Polynomial.coerce(other))

    def __rsub__(self, other) -> "Polynomial":
        return Polynomial.coerce(other) - self

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return Polynomial({e: c * other for e, c in self.terms.items()}, self.vars)

        def mul(a, b, vars):
            out: dict = {}
            for ea, ca in a.items():
                for eb, cb in b.items():
                    e = tuple(x + y for x, y in zip(ea, eb))
                    out[e] = out.get(e, 0) + ca * cb
            return Polynomial(out, vars)

        return self._binary(other, mul)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Polynomial":
        other = Polynomial.coerce(other)
        if not other.is_constant() or other.is_zero():
            raise ZeroDivisionError("polynomials can only be divided by non-zero constants")
        return self * (1 / other.constant_term())

    def __pow__(self, k: int) -> "Polynomial":
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers are polynomial")
        result = Polynomial.const(1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    # -- calculus and substitution ---------------------------------------
    def diff(self, name: str) -> "Polynomial":
        if name not in self.vars:
            return Polynomial.zero()
        i = self.vars.index(name)
        out = {}
        for e, c in self.terms.items():
            if e[i]:
                ne = e[:i] + (e[i] - 1,) + e[i + 1 :]
                out[ne] = c * e[i]
        return Polynomial(out, self.vars)

    def subs(self, mapping: Mapping[str, object]) -> "Polynomial":
        """Substitute polynomials or rationals for variables, exactly."""
        repl = {v: Polynomial.coerce(p) for v, p in mapping.items() if v in self.vars}
        if not repl:
            return self
        keep = tuple(v for v in self.vars if v not in repl)
        powers: dict = {}
        out = Polynomial.zero()
        for e, c in self.terms.items():
            kept = {}
            term = Polynomial.const(c)
            for v, k in zip(self.vars, e):
                if not k:
                    continue
                if v in repl:
                    key = (v, k)
                    if key not in powers:
                        powers[key] = repl[v] ** k
                    term = term * powers[key]
                else:
                    kept[v] = k
            if kept:
                term = term * Polynomial({tuple(kept.get(v, 0) for v in keep): 1}, keep)
            out = out + term
        return out

    def evaluate(self, point: Mapping[str, object]) -> Fraction:
        """Exact value at a rational point; every variable must be bound."""
        vals = []
        for v in self.vars:
            if v not in point:
                raise KeyError(f"no value for variable {v!r}")
            vals.append(to_fraction(point[v]))
        total = Fraction(0)
        for e, c in self.terms.items():
            t = c
            for x, k in zip(vals, e):
                if k:
                    t *= x**k
            total += t
        return total

    def compile(self, order: Iterable[str]) -> Callable[[np.ndarray], np.ndarray]:
        """Vectorised float evaluator over arrays shaped ``(..., len(order))``."""
        order = tuple(order)
        terms = self.aligned(order)
        if not terms:
            return lambda X: np.zeros(np.shape(X)[:-1])
        E = np.array([e for e, _ in terms], dtype=float).reshape(len(terms), len(order))
        c = np.array([float(v) for _, v in terms])

        def f(X):
            X = np.asarray(X, dtype=float)
            return np.prod(X[..., None, :] ** E, axis=-1) @ c

        return f

    # -- comparison / printing -------------------------------------------
    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            other = Polynomial.const(other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.vars == other.vars and self.terms == other.terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.vars, frozenset(self.terms.items())))
        return self._hash

    def __repr__(self) -> str:
        return f"Polynomial({str(self)!r})"

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        pieces = []
        for mono, c in self.items():
            factors = [v if k == 1 else f"{v}^{k}" for v, k in sorted(mono.items())]
            mag = abs(c)
            if factors:
                body = "*".join(factors)
                if mag != 1:
                    body = f"{_fmt(mag)}*{body}"
            else:
                body = _fmt(mag)
            sign = "-" if c < 0 else "+"
            pieces.append((sign, body))
        head_sign, head = pieces[0]
        out = ("-" if head_sign == "-" else "") + head
        for sign, body in pieces[1:]:
            out += f" {sign} {body}"
        return out


def _fmt(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def variables(*names: str) -> tuple[Polynomial, ...]:
    return tuple(Polynomial.var(n) for n in names)


def monomials_up_to(names: tuple, degree: int) -> Iterator[tuple]:
    for e in product(range(degree + 1), repeat=len(names)):
        if sum(e) <= degree:
            yield e
