"""Derive a quadratic candidate for the Moore-Greitzer model and check eps-stability with it.

The candidate solves A^T P + P A = -I at the linearisation by plain least
squares; the rounded rational form is then handed to the certifier.
"""

import argparse
from fractions import Fraction

import numpy as np

from stabcert import Origin, Polynomial, vc_eps_stability
from stabcert.frontend import corpus_get
from stabcert.frontend.runner import instances
from stabcert.simulate import EmpiricalConfig, empirical_stability


def lstsq_candidate(ode, max_denominator):
    n = ode.dim
    origin = {x: 0 for x in ode.state_vars}
    A = np.array([[float(f.diff(x).evaluate(origin)) for x in ode.state_vars] for f in ode.rhs])
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    cols = []
    for i, j in pairs:
        E = np.zeros((n, n))
        E[i, j] = E[j, i] = 1
        cols.append((A.T @ E + E @ A).ravel())
    sol, *_ = np.linalg.lstsq(np.stack(cols, axis=1), -np.eye(n).ravel(), rcond=None)
    v = Polynomial.zero()
    for (i, j), c in zip(pairs, sol):
        c = Fraction(float(c)).limit_denominator(max_denominator)
        v = v + (c if i == j else 2 * c) * Polynomial.var(ode.state_vars[i]) * Polynomial.var(ode.state_vars[j])
    return v


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", default="1e-10")
    ap.add_argument("--max-denominator", type=int, default=1000)
    args = ap.parse_args()
    ode = instances(corpus_get("moore_greitzer_eps"))[0][0].ode
    v = lstsq_candidate(ode, args.max_denominator)
    print(f"candidate v = {v}")
    rep = vc_eps_stability(ode, Fraction(args.eps), v)
    print(f"eps-stability at eps = {args.eps}: {rep.verdict.value}")
    for p in rep.premises:
        print(f"  {p.result.status.value:<9} {p.name}")
    emp = empirical_stability(ode, Origin(), EmpiricalConfig(eps_schedule=(0.1, 0.01, 0.001)))
    for row in emp["results"]:
        print(f"  EVIDENCE eps = {row['eps']}: delta = {row['delta']}")


if __name__ == "__main__":
    main()
