"""Non-strict and strict Lyapunov rules over the damped pendulum parameter grid."""

import argparse
from fractions import Fraction

from stabcert import OdeSystem, Polynomial, vc_exp_lyap, vc_lyap, vc_strict_lyap


def pendulum(a, b):
    th, om = Polynomial.var("theta"), Polynomial.var("omega")
    ode = OdeSystem(("theta", "omega"), (om, -a * th - b * om))
    v = a * th**2 / 2 + ((b * th + om) ** 2 + om**2) / 4
    return ode, v


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--a", nargs="+", default=["1/2", "1", "2"])
    ap.add_argument("--b", nargs="+", default=["0", "1/2", "1"])
    args = ap.parse_args()
    print(f"{'a':>5} {'b':>5}  {'Lyap>=':<13} {'Lyap>':<13} Lyap_E(1/2, 1, 1/4)")
    for a in map(Fraction, args.a):
        for b in map(Fraction, args.b):
            ode, v = pendulum(a, b)
            r1, r2 = vc_lyap(ode, v), vc_strict_lyap(ode, v)
            r3 = vc_exp_lyap(ode, v, Fraction(1, 2), 1, Fraction(1, 4))
            print(f"{str(a):>5} {str(b):>5}  {r1.verdict.value:<13} {r2.verdict.value:<13} {r3.verdict.value}")


if __name__ == "__main__":
    main()
