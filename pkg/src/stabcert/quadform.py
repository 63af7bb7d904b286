"""Exact definiteness of rational quadratic forms via pivoted LDL^T."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .polynomial import Polynomial


class NotQuadraticForm(ValueError):
    pass


def gram_matrix(q: Polynomial, order: Sequence[str]) -> list[list[Fraction]]:
    """Symmetric rational matrix ``Q`` with ``q(x) = x^T Q x``."""
    order = tuple(order)
    n = len(order)
    Q = [[Fraction(0)] * n for _ in range(n)]
    try:
        terms = q.aligned(order)
    except ValueError as exc:
        raise NotQuadraticForm(str(exc)) from None
    for e, c in terms:
        if sum(e) != 2:
            raise NotQuadraticForm(f"{q} is not a homogeneous quadratic form")
        idx = [i for i, k in enumerate(e) for _ in range(k)]
        i, j = idx
        if i == j:
            Q[i][i] += c
        else:
            Q[i][j] += c / 2
            Q[j][i] += c / 2
    return Q


def quadratic_value(Q, w) -> Fraction:
    n = len(Q)
    return sum(Q[i][j] * w[i] * w[j] for i in range(n) for j in range(n))


@dataclass
class Factorization:
    """Outcome of the symmetric pivoted elimination.

    ``pivots`` are the diagonal entries of ``D`` in elimination order.
    ``witness`` (when present) is a rational vector ``w`` with ``w^T Q w``
    negative, or zero for a rank-deficient PSD matrix.
    """

    pivots: list
    rank: int
    psd: bool
    witness: list | None
    witness_value: Fraction | None


def ldlt(Q: Sequence[Sequence[Fraction]]) -> Factorization:
    """Symmetric LDL^T with largest-diagonal pivoting, exact.

    Stops at the first certificate of indefiniteness (a negative pivot or a
    zero diagonal with non-zero off-diagonal entry) and returns a witness
    lifted back to the original coordinates.
    """
    n = len(Q)
    A = [[Fraction(x) for x in row] for row in Q]
    active = list(range(n))
    # each eliminated step: (pivot index k, {j: a_kj / d_k}) for back substitution
    steps = []
    pivots = []
    while active:
        k = max(active, key=lambda i: (A[i][i], -i))
        d = A[k][k]
        if d <= 0:
            break
        pivots.append(d)
        rest = [j for j in active if j != k]
        ratios = {j: A[k][j] / d for j in rest}
        for i in rest:
            if not ratios[i]:
                continue
            for j in rest:
                A[i][j] -= ratios[i] * A[k][j]
        steps.append((k, ratios))
        active = rest

    witness = None
    psd = True
    if active:
        neg = [i for i in active if A[i][i] < 0]
        w = [Fraction(0)] * n
        if neg:
            i = min(neg, key=lambda i: (A[i][i], i))
            w[i] = Fraction(1)
            psd = False
        else:
            off = [(i, j) for i in active for j in active if i < j and A[i][j] != 0]
            if off:
                i, j = off[0]
                w[i] = Fraction(1)
                w[j] = Fraction(-1) if A[i][j] > 0 else Fraction(1)
                psd = False
            else:
                # PSD with rank deficiency: any remaining coordinate spans the kernel
                w[active[0]] = Fraction(1)
        for k, ratios in reversed(steps):
            w[k] = -sum(r * w[j] for j, r in ratios.items())
        witness = w
    rank = len(pivots)
    value = quadratic_value(Q, witness) if witness is not None else None
    return Factorization(pivots, rank, psd, witness, value)


def definiteness(Q) -> str:
    """One of ``"PD"``, ``"PSD"``, ``"ND"``, ``"NSD"``, ``"zero"``, ``"indefinite"``."""
    n = len(Q)
    if all(Q[i][j] == 0 for i in range(n) for j in range(n)):
        return "zero"
    pos = ldlt(Q)
    if pos.psd:
        return "PD" if pos.rank == n else "PSD"
    neg = ldlt([[-x for x in row] for row in Q])
    if neg.psd:
        return "ND" if neg.rank == n else "NSD"
    return "indefinite"
