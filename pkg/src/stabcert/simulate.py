"""Numerical evidence for the stability specifications.

Everything here is floating point and is reported as EVIDENCE, never as a
certificate. Trajectories are integrated in batches with an embedded
Dormand-Prince 5(4) pair sharing one adaptive step across the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.stats import norm, qmc

from . import formula as fm
from .polynomial import Polynomial
from .system import CoordinateSubspace, InputError, OdeSystem, Origin, TargetSet, ball_radius

EVIDENCE = "EVIDENCE"

# Dormand-Prince 5(4) tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B - _B4


@dataclass(frozen=True)
class EmpiricalConfig:
    horizon: float = 50.0
    eps_schedule: tuple = (0.5, 0.1)
    delta_grid: int = 20
    bisection_steps: int = 4
    samples: int = 32
    rtol: float = 1e-9
    atol: float = 1e-12
    cutoff: float = 1e8
    seed: int = 0
    base_radius: float = 1.0
    attr_radius: float = 0.5
    tail_fraction: float = 0.2
    envelope_slack: float = 1e-6
    max_steps: int = 200_000

    def __post_init__(self):
        for name in ("horizon", "rtol", "atol", "cutoff", "base_radius", "attr_radius", "tail_fraction"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive")
        if self.samples < 1:
            raise InputError("samples must be at least 1")
        if not self.eps_schedule or any(e <= 0 for e in self.eps_schedule):
            raise InputError("eps schedule entries must be positive")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    steps: np.ndarray
    stats: dict = field(default_factory=dict)

    @property
    def blowup(self) -> bool:
        return bool(self.stats.get("blowup", False))


@dataclass
class BatchResult:
    times: np.ndarray
    states: np.ndarray  # (len(times), batch, n)
    blowup: np.ndarray
    blowup_time: np.ndarray
    exited: np.ndarray
    stats: dict


# -- integration --------------------------------------------------------------


def vector_field(ode: OdeSystem) -> Callable[[np.ndarray], np.ndarray]:
    if ode.param_vars:
        raise InputError(f"instantiate parameters {list(ode.param_vars)} before simulating")
    fs = [p.compile(ode.state_vars) for p in ode.rhs]

    def f(Y):
        return np.stack([g(Y) for g in fs], axis=-1)

    return f


def _formula_eval(f, order) -> Callable[[np.ndarray], np.ndarray] | None:
    if f == fm.TRUE:
        return None
    f = fm.nnf(f)

    def build(g):
        if isinstance(g, fm.Const):
            return lambda Y: np.full(Y.shape[0], g.value)
        if isinstance(g, fm.Atom):
            p = g.poly.compile(order)
            op = {"=": lambda v: v == 0, "!=": lambda v: v != 0, ">=": lambda v: v >= 0, ">": lambda v: v > 0}[g.rel]
            return lambda Y: op(p(Y))
        parts = [build(a) for a in g.args]
        if isinstance(g, fm.And):
            return lambda Y: np.all([h(Y) for h in parts], axis=0)
        return lambda Y: np.any([h(Y) for h in parts], axis=0)

    return build(f)


def dp_step(f: Callable[[np.ndarray], np.ndarray], Y: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """One Dormand-Prince step: the 5th-order update and the embedded error estimate."""
    K = [f(Y)]
    for i in range(1, 7):
        K.append(f(Y + h * sum(a * k for a, k in zip(_A[i], K))))
    Ynew = Y + h * sum(b * k for b, k in zip(_B, K) if b)
    err = h * sum(e * k for e, k in zip(_E, K))
    return Ynew, err


def integrate_batch(ode: OdeSystem, X0, config: EmpiricalConfig = EmpiricalConfig(),
                    monitor: Callable | None = None, horizon: float | None = None) -> BatchResult:
    """Integrate many initial states with one shared adaptive step.

    ``monitor(t, Y, alive)`` is called after every accepted step and may
    return True to stop early. Trajectories exceeding the divergence cutoff
    or leaving the domain are frozen and flagged.
    """
    f = vector_field(ode)
    inside = _formula_eval(ode.domain, ode.state_vars)
    Y = np.array(X0, dtype=float).reshape(-1, ode.dim).copy()
    m = Y.shape[0]
    T = float(horizon if horizon is not None else config.horizon)
    alive = np.ones(m, dtype=bool)
    blowup = np.zeros(m, dtype=bool)
    blow_t = np.full(m, np.inf)
    exited = np.zeros(m, dtype=bool)
    if inside is not None:
        exited = ~inside(Y)
        alive &= ~exited
    times, states = [0.0], [Y.copy()]
    t = 0.0
    h = min(1e-3, T)
    rejected = 0
    steps = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while t < T and alive.any() and steps < config.max_steps:
            h = min(h, T - t)
            Ya = Y[alive]
            Ynew, err = dp_step(f, Ya, h)
            scale = config.atol + config.rtol * np.maximum(np.abs(Ya), np.abs(Ynew))
            en = np.sqrt(np.mean((err / scale) ** 2, axis=1))
            bad = ~np.isfinite(en) | ~np.isfinite(Ynew).all(axis=1)
            enmax = float(np.max(np.where(bad, 0.0, en))) if en.size else 0.0
            if bad.any():
                # overflow inside the step: retry smaller unless already near the cutoff
                idx = np.flatnonzero(alive)[bad]
                big = np.linalg.norm(Ya[bad], axis=1) > config.cutoff / 10
                if big.all() or h <= 1e-12:
                    blowup[idx] = True
                    blow_t[idx] = t
                    alive[idx] = False
                else:
                    h /= 4
                    rejected += 1
                continue
            if enmax > 1.0:
                h *= max(0.2, 0.9 * enmax ** -0.2)
                rejected += 1
                continue
            t += h
            steps += 1
            Y[alive] = Ynew
            nrm = np.linalg.norm(Y, axis=1)
            newly = alive & (nrm > config.cutoff)
            blowup |= newly
            blow_t[newly] = t
            alive &= ~newly
            if inside is not None:
                out = alive & ~inside(Y)
                exited |= out
                alive &= ~out
            times.append(t)
            states.append(Y.copy())
            h *= min(5.0, 0.9 * enmax ** -0.2) if enmax > 0 else 5.0
            if monitor is not None and monitor(t, Y, alive):
                break
    stats = dict(steps=steps, rejected=rejected, t_end=t, truncated=steps >= config.max_steps)
    return BatchResult(np.array(times), np.array(states), blowup, blow_t, exited, stats)


def integrate(ode: OdeSystem, x0, config: EmpiricalConfig = EmpiricalConfig(),
              horizon: float | None = None) -> Trajectory:
    """One right-maximal trajectory, truncated at the horizon or on blow-up."""
    x0 = np.array([float(v) for v in x0], dtype=float)
    if x0.shape != (ode.dim,):
        raise InputError(f"initial state has {x0.size} coordinates, system has {ode.dim}")
    res = integrate_batch(ode, x0[None, :], config, horizon=horizon)
    states = res.states[:, 0, :]
    keep = np.isfinite(states).all(axis=1)
    steps = np.diff(res.times)
    stats = dict(res.stats, blowup=bool(res.blowup[0]), domain_exit=bool(res.exited[0]),
                 blowup_time=float(res.blowup_time[0]))
    return Trajectory(res.times[keep], states[keep], steps, stats)


# -- sampling -----------------------------------------------------------------


def _sphere_points(dim: int, count: int, seed: int) -> np.ndarray:
    """Deterministic low-discrepancy directions on the unit sphere."""
    if dim == 1:
        return np.array([[1.0], [-1.0]] * ((count + 1) // 2))[:count]
    u = qmc.Halton(d=dim, scramble=True, seed=seed).random(count)
    g = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass(frozen=True)
class _Geometry:
    """Distance to a target: Euclidean norm of the transverse part minus a radius."""

    transverse: np.ndarray  # boolean mask
    radius: float

    def dist(self, Y: np.ndarray) -> np.ndarray:
        return np.maximum(np.linalg.norm(Y[..., self.transverse], axis=-1) - self.radius, 0.0)


def _geometry(P: TargetSet, order) -> _Geometry:
    if isinstance(P, Origin):
        return _Geometry(np.ones(len(order), dtype=bool), 0.0)
    if isinstance(P, CoordinateSubspace):
        return _Geometry(np.array([v in P.zeroed for v in order]), 0.0)
    r = ball_radius(P, order)
    if r is None:
        raise InputError("empirical checks need an origin, coordinate-subspace or ball target")
    return _Geometry(np.ones(len(order), dtype=bool), float(r))


def initial_states(P: TargetSet, order, delta: float, config: EmpiricalConfig, count: int | None = None) -> np.ndarray:
    """Points at distance below ``delta`` from ``P``.

    Transverse parts lie on spheres of radius ``delta * {1/4, 1/2, 3/4, 1}``
    (shrunk by ``2^-20`` to stay strictly inside) plus axis extremes; the
    coordinates along the target come from a scaled Halton sequence.
    """
    count = count or config.samples
    geo = _geometry(P, order)
    m = int(geo.transverse.sum())
    n = len(order)
    inner = (geo.radius + delta) * (1 - 2.0**-20)
    pts = []
    for i in range(m):
        for s in (1.0, -1.0):
            e = np.zeros(m)
            e[i] = s * inner
            pts.append(e)
    rest = max(count - len(pts), 0)
    dirs = _sphere_points(m, max(rest, 1), config.seed)
    fractions = np.array([0.25, 0.5, 0.75, 1.0])
    for k in range(rest):
        r = geo.radius + delta * fractions[k % 4]
        pts.append(dirs[k] * min(r * (1 - 2.0**-20), inner))
    T = np.array(pts[:count]) if count < len(pts) else np.array(pts)
    X = np.zeros((T.shape[0], n))
    X[:, geo.transverse] = T
    free = ~geo.transverse
    if free.any():
        base = qmc.Halton(d=int(free.sum()), scramble=True, seed=config.seed + 1).random(T.shape[0])
        X[:, free] = (2 * base - 1) * config.base_radius
    return X


# -- empirical tests ------------------------------------------------------------


def _stays_within(ode, P, X0, eps, config) -> tuple[bool, float]:
    geo = _geometry(P, ode.state_vars)
    worst = [float(geo.dist(X0).max())]

    def monitor(t, Y, alive):
        d = geo.dist(Y)
        worst[0] = max(worst[0], float(np.nanmax(d)))
        return worst[0] >= eps

    res = integrate_batch(ode, X0, config, monitor=monitor)
    ok = worst[0] < eps and not res.blowup.any()
    return ok, worst[0]


def empirical_stability(ode: OdeSystem, P: TargetSet = Origin(), config: EmpiricalConfig = EmpiricalConfig()) -> dict:
    """For each eps, the largest tested delta whose samples stay eps-close to ``P``."""
    rows = []
    for eps in config.eps_schedule:
        eps = float(eps)
        found = None
        fail_above = None
        for j in range(config.delta_grid + 1):
            d = eps / 2**j
            ok, _ = _stays_within(ode, P, initial_states(P, ode.state_vars, d, config), eps, config)
            if ok:
                found = d
                break
            fail_above = d
        if found is not None and fail_above is not None:
            lo, hi = found, fail_above
            for _ in range(config.bisection_steps):
                mid = (lo + hi) / 2
                ok, _ = _stays_within(ode, P, initial_states(P, ode.state_vars, mid, config), eps, config)
                lo, hi = (mid, hi) if ok else (lo, mid)
            found = lo
        rows.append({"eps": eps, "delta": found})
    return {"label": EVIDENCE, "kind": "stability", "samples": config.samples, "horizon": config.horizon,
            "results": rows, "passed": all(r["delta"] is not None for r in rows)}


def empirical_attractivity(ode: OdeSystem, P: TargetSet = Origin(), config: EmpiricalConfig = EmpiricalConfig(),
                           stability_certified: bool = False) -> dict:
    """Eventual entry (stability certified) or eventually-always (otherwise) per eps."""
    geo = _geometry(P, ode.state_vars)
    X0 = initial_states(P, ode.state_vars, config.attr_radius, config)
    res = integrate_batch(ode, X0, config)
    D = geo.dist(res.states)  # (steps, batch)
    D = np.where(np.isfinite(D), D, np.inf)
    t = res.times
    rows = []
    for eps in config.eps_schedule:
        eps = float(eps)
        if stability_certified:
            hit = D < eps
            entered = hit.any(axis=0) & ~res.blowup
            first = np.where(hit.any(axis=0), t[np.argmax(hit, axis=0)], np.inf)
            passed = bool(entered.all())
            rows.append({"eps": eps, "passed": passed,
                         "entry_time": float(first.max()) if passed else None})
        else:
            tail = t >= t[-1] * (1 - config.tail_fraction)
            settled = (D[tail] < eps).all(axis=0) & ~res.blowup
            passed = bool(settled.all()) and t[-1] >= config.horizon * (1 - 1e-12)
            outside = D >= eps
            last_out = np.where(outside.any(axis=0), t[len(t) - 1 - np.argmax(outside[::-1], axis=0)], 0.0)
            rows.append({"eps": eps, "passed": passed, "entry_time": float(last_out.max()) if passed else None})
    return {"label": EVIDENCE, "kind": "attractivity",
            "mode": "eventual-entry" if stability_certified else "eventually-always",
            "results": rows, "passed": all(r["passed"] for r in rows)}


def exp_envelope_check(ode: OdeSystem, alpha, beta, delta, config: EmpiricalConfig = EmpiricalConfig(),
                       P: TargetSet = Origin()) -> dict:
    """Ghost ``y' = -2 beta y`` with ``y(0) = alpha^2 |x0|^2`` must dominate ``|x|^2``."""
    ghost = "__env"
    while ghost in ode.state_vars:
        ghost += "_"
    aug = ode.extend(ghost, -2 * Fraction(beta) * Polynomial.var(ghost))
    X0 = initial_states(P, ode.state_vars, float(delta), config)
    y0 = float(alpha) ** 2 * np.sum(X0**2, axis=1)
    res = integrate_batch(aug, np.hstack([X0, y0[:, None]]), config)
    S = res.states
    n2 = np.sum(S[..., :-1] ** 2, axis=-1)
    y = S[..., -1]
    ratio = np.where(y > 0, n2 / np.where(y > 0, y, 1), np.where(n2 > 0, np.inf, 0.0))
    worst = float(np.nanmax(ratio))
    passed = worst <= 1 + config.envelope_slack and not res.blowup.any()
    return {"label": EVIDENCE, "kind": "exp-envelope", "alpha": float(alpha), "beta": float(beta),
            "delta": float(delta), "max_ratio": worst, "passed": bool(passed), "samples": int(X0.shape[0])}


def energy_monitor(ode: OdeSystem, E, config: EmpiricalConfig = EmpiricalConfig(), radius: float = 1.0,
                   ratio: float = 1e-6, by_time: float | None = None, tol: float = 1e-6) -> dict:
    """``E`` along sampled trajectories: non-increasing, and below ``ratio * E(0)`` by ``by_time``."""
    E = Polynomial.coerce(E)
    ev = E.compile(ode.state_vars)
    X0 = initial_states(Origin(), ode.state_vars, radius, config)
    res = integrate_batch(ode, X0, config, horizon=by_time if by_time is not None else config.horizon)
    V = ev(res.states)  # (steps, batch)
    V0 = V[0]
    scale = np.maximum(np.abs(V0), 1e-300)
    rise = np.diff(V, axis=0) / scale
    max_rise = float(np.nanmax(rise)) if rise.size else 0.0
    non_increasing = max_rise <= tol and not res.blowup.any()
    final_ratio = V[-1] / scale
    below = bool(np.all(final_ratio <= ratio))
    return {"label": EVIDENCE, "kind": "energy", "energy": str(E), "samples": int(X0.shape[0]),
            "non_increasing": bool(non_increasing), "max_relative_increase": max_rise,
            "final_ratio_max": float(np.nanmax(final_ratio)), "ratio": ratio,
            "by_time": float(res.times[-1]), "below_ratio": below, "passed": bool(non_increasing and below)}


# -- counterexamples --------------------------------------------------------------


def cex1_system() -> tuple[OdeSystem, Polynomial, CoordinateSubspace]:
    """``y' = y, t' = 1`` with ghost ``w = exp(-2t)``, ``v = y^2 w`` and target ``y = 0``."""
    y, w = Polynomial.var("y"), Polynomial.var("w")
    ode = OdeSystem(("y", "t", "w"), (y, Polynomial.const(1), -2 * w))
    return ode, y * y * w, CoordinateSubspace(("y",))


def cex2_system() -> tuple[OdeSystem, Polynomial]:
    y = Polynomial.var("y")
    return OdeSystem(("y",), (y,)), Polynomial.const(1)


def counterexample_replay(cid: str, config: EmpiricalConfig | None = None) -> dict:
    """Replay one of the two known counterexamples; see the module docs for ids."""
    from .rules import NonCompactTarget, vc_lyap, vc_set_lyap
    from .system import lie_derivative

    cid = cid.upper()
    if cid == "CEX1":
        config = config or EmpiricalConfig(eps_schedule=(1.0,), samples=16, horizon=30.0)
        ode, v, P = cex1_system()
        lv = lie_derivative(v, ode)
        y, w = Polynomial.var("y"), Polynomial.var("w")
        facts = {
            "v_on_target_zero": v.subs({"y": 0}).is_zero(),
            # off the target v = y^2 * w with w = exp(-2t) > 0 along the ghost
            "v_positive_off_target": v == y * y * w,
            "lie_v_zero": lv.is_zero(),
        }
        emp = empirical_stability(ode, P, config)
        try:
            vc_set_lyap(ode, P, v)
            refused = False
        except NonCompactTarget:
            refused = True
        return {"id": "CEX1", "label": EVIDENCE, "unsound_rule_premises": facts,
                "premises_pass": all(facts.values()), "empirical_stability": emp,
                "stability_fails": not emp["passed"], "shipped_rule_refuses": refused}
    if cid == "CEX2":
        config = config or EmpiricalConfig(cutoff=1e6, horizon=20.0)
        ode, v = cex2_system()
        rep = vc_lyap(ode, v)
        tr = integrate(ode, [1.0], config)
        refused_at = rep.refuted_by.name if rep.refuted_by else None
        return {"id": "CEX2", "label": EVIDENCE, "verdict": rep.verdict.value, "refuted_premise": refused_at,
                "blowup": tr.blowup, "blowup_time": tr.stats["blowup_time"]}
    raise InputError(f"unknown counterexample id {cid!r}; expected CEX1 or CEX2")
