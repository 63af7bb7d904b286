"""Exact rational interval arithmetic.

Endpoints are Fractions, so every operation is exact and enclosures are
trivially outward-rounded. Internally intervals are plain ``(lo, hi)`` tuples
for speed; :class:`Interval` is a thin user-facing wrapper.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .polynomial import Polynomial, to_fraction


def iadd(a, b):
    return (a[0] + b[0], a[1] + b[1])


def imul(a, b):
    if a[0] == a[1]:
        c = a[0]
        return (c * b[0], c * b[1]) if c >= 0 else (c * b[1], c * b[0])
    if b[0] == b[1]:
        return imul(b, a)
    p = (a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    return (min(p), max(p))


def ipow(a, k: int):
    lo, hi = a
    if k == 0:
        return (Fraction(1), Fraction(1))
    if k % 2 == 1 or lo >= 0:
        return (lo**k, hi**k)
    if hi <= 0:
        return (hi**k, lo**k)
    return (Fraction(0), max(lo**k, hi**k))


def iscale(c, a):
    return (c * a[0], c * a[1]) if c >= 0 else (c * a[1], c * a[0])


class CompiledPoly:
    """A polynomial laid out along a fixed variable order for box evaluation."""

    __slots__ = ("order", "terms", "maxdeg", "const")

    def __init__(self, p: Polynomial, order: Sequence[str]):
        self.order = tuple(order)
        aligned = p.aligned(self.order)
        self.const = Fraction(0)
        self.terms = []
        for e, c in aligned:
            if any(e):
                self.terms.append((tuple((i, k) for i, k in enumerate(e) if k), c))
            else:
                self.const = c
        self.maxdeg = [0] * len(self.order)
        for idx, _ in self.terms:
            for i, k in idx:
                self.maxdeg[i] = max(self.maxdeg[i], k)

    def eval_box(self, box: Sequence[tuple]) -> tuple:
        powers = []
        for i, d in enumerate(self.maxdeg):
            powers.append({k: ipow(box[i], k) for k in range(1, d + 1)} if d else None)
        lo = hi = self.const
        for idx, c in self.terms:
            it = None
            for i, k in idx:
                pw = powers[i][k]
                it = pw if it is None else imul(it, pw)
            if c >= 0:
                lo += c * it[0]
                hi += c * it[1]
            else:
                lo += c * it[1]
                hi += c * it[0]
        return (lo, hi)

    def eval_point(self, point: Sequence[Fraction]) -> Fraction:
        total = self.const
        for idx, c in self.terms:
            t = c
            for i, k in idx:
                t *= point[i] ** k
            total += t
        return total


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", to_fraction(self.lo))
        object.__setattr__(self, "hi", to_fraction(self.hi))
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, c) -> "Interval":
        return cls(c, c)

    def _t(self):
        return (self.lo, self.hi)

    @staticmethod
    def _wrap(t) -> "Interval":
        return Interval(t[0], t[1])

    def __add__(self, other):
        other = other if isinstance(other, Interval) else Interval.point(other)
        return self._wrap(iadd(self._t(), other._t()))

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        other = other if isinstance(other, Interval) else Interval.point(other)
        return self + (-other)

    def __mul__(self, other):
        other = other if isinstance(other, Interval) else Interval.point(other)
        return self._wrap(imul(self._t(), other._t()))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        return self._wrap(ipow(self._t(), k))

    def __contains__(self, x) -> bool:
        return self.lo <= to_fraction(x) <= self.hi

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo


def eval_interval(p: Polynomial, box: dict) -> Interval:
    """Enclosure of ``p`` over a box given as ``{var: Interval | (lo, hi)}``."""
    order = tuple(box)
    bounds = []
    for v in order:
        b = box[v]
        bounds.append(b._t() if isinstance(b, Interval) else (to_fraction(b[0]), to_fraction(b[1])))
    return Interval(*CompiledPoly(p, order).eval_box(bounds))
