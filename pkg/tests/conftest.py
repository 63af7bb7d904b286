from fractions import Fraction

import hypothesis.strategies as st
import pytest
from hypothesis import settings

from stabcert.polynomial import Polynomial
from stabcert.system import OdeSystem

settings.register_profile("default", deadline=None)
settings.load_profile("default")

VARS = ("x1", "x2", "x3", "x4")

small_rationals = st.fractions(min_value=-5, max_value=5, max_denominator=6)


@st.composite
def polynomials(draw, vars=VARS, max_degree=4, max_terms=6):
    n = draw(st.integers(0, max_terms))
    terms = {}
    for _ in range(n):
        deg = draw(st.integers(0, max_degree))
        exps = [0] * len(vars)
        for _ in range(deg):
            exps[draw(st.integers(0, len(vars) - 1))] += 1
        terms[tuple(exps)] = draw(small_rationals)
    return Polynomial(terms, vars)


def pendulum(a=1, b=1):
    th, om = Polynomial.var("theta"), Polynomial.var("omega")
    return OdeSystem(("theta", "omega"), (om, -Fraction(a) * th - Fraction(b) * om))


def pendulum_v(a=1, b=1):
    th, om = Polynomial.var("theta"), Polynomial.var("omega")
    a, b = Fraction(a), Fraction(b)
    return a * th**2 / 2 + ((b * th + om) ** 2 + om**2) / 4


def rigid_body(I=(3, 2, 1)):
    x1, x2, x3 = (Polynomial.var(f"x{i}") for i in (1, 2, 3))
    I1, I2, I3 = (Fraction(i) for i in I)
    return OdeSystem(("x1", "x2", "x3"), (
        (I2 - I3) / I1 * x2 * x3,
        (I3 - I1) / I2 * x3 * x1,
        (I1 - I2) / I3 * x1 * x2,
    ))


def moore_greitzer():
    x1, x2 = Polynomial.var("x1"), Polynomial.var("x2")
    return OdeSystem(("x1", "x2"), (-x2 - Fraction(3, 2) * x1**2 - Fraction(1, 2) * x1**3, 3 * x1 - x2))


def decay(n=1):
    names = tuple(f"x{i}" for i in range(1, n + 1)) if n > 1 else ("x",)
    return OdeSystem(names, tuple(-Polynomial.var(x) for x in names))


@pytest.fixture
def pend():
    return pendulum()


# -- independent oracles -------------------------------------------------------

def region_points(cond, count: int, seed: int):
    """Exact rational sample points of a compact or punctured region, by rejection."""
    import numpy as np

    from stabcert import certify as cf
    from stabcert import formula as fm

    rng = np.random.default_rng(seed)
    region, order = cond.region, cond.vars
    member = cf.region_formula(region, order)
    if isinstance(region, cf.Box):
        bounds = [region.bounds[region.vars.index(v)] for v in order]
    elif isinstance(region, (cf.SetMinus, cf.Constrained)):
        bounds = [region.box.bounds[region.box.vars.index(v)] for v in order]
    else:
        r2 = region.r2 if isinstance(region, cf.Ball) else region.rmax2 if isinstance(region, cf.Annulus) \
            else region.gamma2
        r = Fraction(int(float(r2) ** 0.5 * 1024) + 1, 1024)
        bounds = [(-r, r)] * len(order)
    out = []
    den = 1 << 12
    while len(out) < count:
        pt = {v: lo + (hi - lo) * Fraction(int(rng.integers(0, den + 1)), den) for v, (lo, hi) in zip(order, bounds)}
        if fm.evaluate(member, pt):
            out.append(pt)
    return out


def eigen_oracle(Q, margin=1e-6):
    """'PD', 'PSD', 'ND', 'NSD', 'INDEF', or None when the spectrum is within the margin of a boundary."""
    import numpy as np

    w = np.linalg.eigvalsh(np.array([[float(c) for c in row] for row in Q]))
    lo, hi = w.min(), w.max()
    if lo > margin:
        return "PD"
    if hi < -margin:
        return "ND"
    if lo < -margin and hi > margin:
        return "INDEF"
    return None


# -- acceptance summary --------------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    number, title = mark.args
    if rep.failed or rep.when == "call":
        _CRITERIA[number] = (title, "PASS" if rep.passed else "FAIL", call.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, secs = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2} {status}  {title} ({secs:.2f} s)")
