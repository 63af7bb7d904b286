"""Turn a parsed problem into certification runs and a report document."""

from __future__ import annotations

import enum
import hashlib
import json
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .. import formula as fm
from ..certify import Budget, CheckResult
from ..polynomial import Polynomial
from ..rules import (
    CertificationReport,
    Kind,
    NonCompactTarget,
    Verdict,
    _target_str,
    vc_eps_stability,
    vc_exp_lyap,
    vc_exp_lyap_global,
    vc_general_lyap,
    vc_lyap,
    vc_set_lyap,
    vc_set_lyap_general,
    vc_strict_lyap,
    vc_strict_lyap_global,
    verify_witness,
    Premise,
)
from ..simulate import (
    EmpiricalConfig,
    empirical_attractivity,
    empirical_stability,
    energy_monitor,
    exp_envelope_check,
)
from ..system import (
    CoordinateSubspace,
    FormulaTarget,
    InputError,
    OdeSystem,
    Origin,
    TargetSet,
    ball_target,
    translate_to_origin,
)
from .problem import ProblemFile, TargetSpec, parse_problem, to_formula, to_polynomial

SCHEMA = "stabcert-report/1"
EXIT = {Verdict.CERTIFIED: 0, Verdict.REFUTED: 1, Verdict.INCONCLUSIVE: 2}
EXIT_INPUT = 3

# conclusion of each rule, and which requested kinds it settles
CONCLUDES = {
    "Lyap>=": Kind.STAB,
    "Lyap>": Kind.ASTAB,
    "Lyap_E": Kind.EXP_STAB,
    "Lyap>^G": Kind.GLOBAL_ASTAB,
    "Lyap_E^G": Kind.GLOBAL_EXP_STAB,
    "SLyap>=": Kind.SET_STAB,
    "SLyap>": Kind.SET_ASTAB,
    "SLyap*>=": Kind.SET_STAB,
    "GLyap": Kind.GENERAL_STAB,
}
_IMPLIED = {
    Kind.STAB: {Kind.STAB},
    Kind.ASTAB: {Kind.STAB, Kind.ATTR, Kind.ASTAB},
    Kind.EXP_STAB: {Kind.STAB, Kind.ATTR, Kind.ASTAB, Kind.EXP_STAB},
    Kind.GLOBAL_ASTAB: {Kind.STAB, Kind.ATTR, Kind.ASTAB, Kind.GLOBAL_ASTAB},
    Kind.GLOBAL_EXP_STAB: {Kind.STAB, Kind.ATTR, Kind.ASTAB, Kind.EXP_STAB, Kind.GLOBAL_ASTAB, Kind.GLOBAL_EXP_STAB},
    Kind.SET_STAB: {Kind.SET_STAB},
    Kind.SET_ASTAB: {Kind.SET_STAB, Kind.SET_ASTAB},
    Kind.GENERAL_STAB: {Kind.GENERAL_STAB},
}
# what is left over when only the stability half is certified
_REMAINDER = {
    Kind.ATTR: "attractivity",
    Kind.ASTAB: "attractivity",
    Kind.EXP_STAB: "exponential convergence",
    Kind.GLOBAL_ASTAB: "global attractivity",
    Kind.GLOBAL_EXP_STAB: "global exponential convergence",
    Kind.SET_ASTAB: "attractivity",
    Kind.GLOBAL_SET_ASTAB: "global attractivity",
}
# evidence kinds that speak to each open part
_PART_EVIDENCE = {
    "attractivity": {"attractivity"},
    "global attractivity": {"attractivity"},
    "exponential convergence": {"exp-envelope"},
    "global exponential convergence": {"exp-envelope"},
}


@dataclass(frozen=True)
class RunOptions:
    """Command-line overrides; ``None`` keeps the problem file's setting."""

    budget: int | None = None
    seed: int | None = None
    horizon: float | None = None
    candidate: str | None = None
    simulate: tuple | None = None
    certify: bool = True


@dataclass
class Instance:
    params: dict
    ode: OdeSystem
    target: TargetSet
    post: TargetSet | None
    v: Polynomial | None
    consts: dict
    eps: Fraction | None


def _target(spec: TargetSpec | None, values, state) -> TargetSet | None:
    if spec is None:
        return None
    if spec.shape == "origin":
        return Origin()
    if spec.shape == "subspace":
        return CoordinateSubspace(spec.vars)
    if spec.shape == "ball":
        return ball_target(to_polynomial(spec.radius, values, ()).constant_term(), state)
    return FormulaTarget(to_formula(spec.formula, values, state), spec.compact)


def instances(problem: ProblemFile) -> tuple[list[Instance], list[dict]]:
    """Concrete instances of the parameter grid, and the grid points excluded by ``assume``."""
    sysb = problem.system
    state = sysb.state
    kept, excluded = [], []
    for values in problem.grid():
        if not fm.evaluate(to_formula(problem.assume, values, ()), {}):
            excluded.append(values)
            continue
        ode = OdeSystem(state, tuple(to_polynomial(e, values, state) for _, e in sysb.odes), (),
                        to_formula(sysb.domain, values, state))
        c = problem.candidate
        v = None if c.v is None else to_polynomial(c.v, values, state)
        if sysb.equilibrium is not None:
            x0 = [to_polynomial(e, values, ()).constant_term() for e in sysb.equilibrium]
            if any(x0):
                ode = translate_to_origin(ode, x0)
                if v is not None:
                    v = v.subs({x: Polynomial.var(x) + q for x, q in zip(state, x0)})
        consts = {k: to_polynomial(getattr(c, k), values, ()).constant_term()
                  for k in ("k1", "k2", "k3", "gamma", "level") if getattr(c, k) is not None}
        pr = problem.property
        eps = None if pr.eps is None else to_polynomial(pr.eps, values, ()).constant_term()
        kept.append(Instance(values, ode, _target(pr.target, values, state), _target(pr.post, values, state),
                             v, consts, eps))
    return kept, excluded


def _is_compact(P: TargetSet) -> bool:
    return isinstance(P, Origin) or (isinstance(P, FormulaTarget) and P.compact)


def choose_rule(problem: ProblemFile, P: TargetSet) -> str:
    pr = problem.property
    if pr.rule is not None:
        return pr.rule
    k = pr.kind
    return {
        Kind.STAB: "Lyap>=",
        Kind.ATTR: "Lyap>",
        Kind.ASTAB: "Lyap>",
        Kind.EXP_STAB: "Lyap_E",
        Kind.GLOBAL_ASTAB: "Lyap>^G",
        Kind.GLOBAL_EXP_STAB: "Lyap_E^G",
        Kind.SET_STAB: "SLyap>=" if _is_compact(P) and not isinstance(P, CoordinateSubspace) else "SLyap*>=",
        Kind.SET_ASTAB: "SLyap>" if _is_compact(P) else "SLyap*>=",
        Kind.GLOBAL_SET_ASTAB: "SLyap>" if _is_compact(P) else "SLyap*>=",
        Kind.GENERAL_STAB: "GLyap",
        Kind.EPS_STAB: "GLyap",
    }[k]


_AT_ORIGIN = {Kind.SET_STAB: Kind.STAB, Kind.SET_ASTAB: Kind.ASTAB, Kind.GLOBAL_SET_ASTAB: Kind.GLOBAL_ASTAB}


def _canonical(kind: Kind, P: TargetSet) -> Kind:
    return _AT_ORIGIN.get(kind, kind) if isinstance(P, Origin) else kind


def _scope(requested: Kind, rule: str, P: TargetSet, post: TargetSet | None = None) -> tuple[Kind, list]:
    """Kind actually concluded by ``rule`` and the parts of ``requested`` it leaves open."""
    if requested is Kind.EPS_STAB:
        if rule != "GLyap":
            raise InputError("EpsStab is concluded by GLyap only")
        return Kind.EPS_STAB, []
    requested = _canonical(requested, P)
    concluded = _canonical(CONCLUDES[rule], P)
    if concluded is Kind.GENERAL_STAB and isinstance(P, Origin) and isinstance(post or P, Origin):
        concluded = Kind.STAB
    if requested in _IMPLIED.get(concluded, {concluded}):
        return requested, []
    stability = Kind.SET_STAB if requested in _AT_ORIGIN else Kind.STAB
    if requested in _REMAINDER and stability in _IMPLIED.get(concluded, set()):
        return concluded, [_REMAINDER[requested]]
    raise InputError(f"rule {rule} does not conclude {requested.value}")


def _need(consts, *names, rule):
    missing = [n for n in names if n not in consts]
    if missing:
        raise InputError(f"rule {rule} needs candidate constants {', '.join(missing)}")
    return [consts[n] for n in names]


def certify_instance(problem: ProblemFile, inst: Instance, rule: str, budget: Budget) -> CertificationReport:
    cfg = problem.config
    v = inst.v
    if v is None:
        raise InputError("the candidate block needs `v = ...`")
    P = inst.target
    gamma_schedule = None if cfg.gamma_schedule is None else [Fraction(str(q)) for q in cfg.gamma_schedule]
    eps_schedule = None if cfg.eps_schedule is None else [Fraction(str(q)) for q in cfg.eps_schedule]
    kind = problem.property.kind
    if rule in ("Lyap>=", "Lyap>", "Lyap_E", "Lyap>^G", "Lyap_E^G") and not isinstance(P, Origin):
        raise InputError(f"rule {rule} concerns the origin; use a set rule for other targets")
    if rule == "Lyap>=":
        return vc_lyap(inst.ode, v, gamma_schedule, budget)
    if rule == "Lyap>":
        return vc_strict_lyap(inst.ode, v, gamma_schedule, budget)
    if rule == "Lyap_E":
        k1, k2, k3 = _need(inst.consts, "k1", "k2", "k3", rule=rule)
        return vc_exp_lyap(inst.ode, v, k1, k2, k3, inst.consts.get("gamma", 1), budget)
    if rule == "Lyap>^G":
        return vc_strict_lyap_global(inst.ode, v, budget)
    if rule == "Lyap_E^G":
        k1, k2, k3 = _need(inst.consts, "k1", "k2", "k3", rule=rule)
        return vc_exp_lyap_global(inst.ode, v, k1, k2, k3, budget)
    if rule in ("SLyap>=", "SLyap>"):
        return vc_set_lyap(inst.ode, P, v, strict=rule == "SLyap>", budget=budget)
    if rule == "SLyap*>=":
        return vc_set_lyap_general(inst.ode, P, v, eps_schedule, cfg.gamma_rule or "equal", budget)
    if kind is Kind.EPS_STAB:
        if inst.eps is None:
            raise InputError("EpsStab needs `eps` in the property block")
        return vc_eps_stability(inst.ode, inst.eps, v, eps_schedule, cfg.gamma_rule or "search", budget)
    post = inst.post if inst.post is not None else P
    return vc_general_lyap(inst.ode, P, post, v, eps_schedule, cfg.gamma_rule or "search", budget)


# -- evidence ---------------------------------------------------------------------


def _empirical_config(problem: ProblemFile, opts: RunOptions) -> EmpiricalConfig:
    cfg = problem.config
    kw = {}
    if cfg.sim_eps is not None:
        kw["eps_schedule"] = tuple(float(q) for q in cfg.sim_eps)
    if cfg.samples is not None:
        kw["samples"] = cfg.samples
    seed = opts.seed if opts.seed is not None else cfg.seed
    if seed is not None:
        kw["seed"] = seed
    horizon = opts.horizon if opts.horizon is not None else (None if cfg.horizon is None else float(cfg.horizon))
    if horizon is not None:
        kw["horizon"] = horizon
    return EmpiricalConfig(**kw)


def _sim_target(inst: Instance) -> TargetSet:
    return inst.target


def gather_evidence(problem: ProblemFile, inst: Instance, kinds, rep: CertificationReport | None,
                    econf: EmpiricalConfig) -> list:
    out = []
    stab_ok = rep is not None and rep.certified
    for kind in kinds:
        try:
            if kind == "stability":
                out.append(empirical_stability(inst.ode, _sim_target(inst), econf))
            elif kind == "attractivity":
                out.append(empirical_attractivity(inst.ode, _sim_target(inst), econf, stability_certified=stab_ok))
            elif kind == "envelope":
                w = rep.witnesses if rep is not None else {}
                if rep is None or not rep.certified or "alpha" not in w or "beta" not in w:
                    out.append({"label": "EVIDENCE", "kind": "exp-envelope", "skipped":
                                "needs a certified exponential rule with (alpha, beta, delta) witnesses"})
                    continue
                delta = w.get("delta")
                delta = 1 if delta in (None, "any") else delta
                out.append(exp_envelope_check(inst.ode, w["alpha"], w["beta"], delta, econf, inst.target))
            elif kind == "energy":
                if problem.config.energy is None:
                    raise InputError("energy simulation needs `energy <expression>` in the config block")
                E = to_polynomial(problem.config.energy, inst.params, inst.ode.state_vars)
                by = None if problem.config.energy_by is None else float(problem.config.energy_by)
                out.append(energy_monitor(inst.ode, E, econf, by_time=by))
        except InputError as e:
            out.append({"label": "EVIDENCE", "kind": kind, "skipped": str(e)})
    return out


# -- report document ------------------------------------------------------------------


def jsonable(x):
    """Plain JSON data; rationals become strings so they survive exactly."""
    if isinstance(x, bool) or x is None or isinstance(x, (int, str)):
        return x
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, float):
        return x if np.isfinite(x) else str(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return jsonable(float(x))
    if isinstance(x, np.ndarray):
        return [jsonable(v) for v in x.tolist()]
    if isinstance(x, enum.Enum):
        return x.value
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, set, frozenset)):
        items = [jsonable(v) for v in x]
        return sorted(items, key=str) if isinstance(x, (set, frozenset)) else items
    return str(x)


def _premise_doc(p: Premise) -> dict:
    r: CheckResult = p.result
    return {
        "name": p.name,
        "status": r.status.value,
        "kind": p.kind,
        "assumption": str(p.assumption),
        "claim": None if p.claim is None else str(p.claim),
        "witness": jsonable(r.witness),
        "violated": r.violated,
        "reason": r.reason,
        "info": jsonable(r.info),
        "detail": jsonable(p.detail),
    }


def _instance_doc(inst: Instance, rule: str, rep: CertificationReport | None, refusal: str | None,
                  certified_kind: Kind, open_parts: list, evidence: list, problem: ProblemFile) -> dict:
    if rep is not None:
        verdict = rep.verdict
    else:
        verdict = Verdict.INCONCLUSIVE
    prop = problem.property
    ran = {e["kind"] for e in evidence if "skipped" not in e}
    notes = [] if rep is None else list(rep.notes)
    if inst.ode.domain != fm.TRUE:
        notes.append("evolution domain not used by the certifier; premises are checked without it")
    doc = {
        "params": jsonable(inst.params),
        "system": {x: str(f) for x, f in zip(inst.ode.state_vars, inst.ode.rhs)},
        "candidate": None if inst.v is None else {"v": str(inst.v), **jsonable(inst.consts)},
        "property": _describe(prop.kind, inst),
        "certified_property": _describe(certified_kind, inst),
        "uncertified": [{"part": part, "label": "EVIDENCE" if _PART_EVIDENCE[part] & ran else "OPEN"}
                        for part in open_parts],
        "rule": rule,
        "verdict": verdict.value,
        "refusal": refusal,
        "premises": [] if rep is None else [_premise_doc(p) for p in rep.premises],
        "witnesses": {} if rep is None else jsonable(rep.witnesses),
        "notes": jsonable(notes),
        "evidence": jsonable(evidence),
    }
    return doc


def _describe(kind: Kind, inst: Instance) -> str:
    if kind is Kind.EPS_STAB:
        return f"EpsStab({inst.eps})"
    if kind is Kind.GENERAL_STAB:
        post = inst.post if inst.post is not None else inst.target
        return f"GeneralStab({_target_str(inst.target)}, {_target_str(post)})"
    if kind in _AT_ORIGIN:
        return f"{kind.value}({_target_str(inst.target)})"
    return kind.value


def aggregate(verdicts) -> Verdict:
    """Worst case over instances: any refutation, else any inconclusive, else certified."""
    verdicts = list(verdicts)
    if not verdicts:
        return Verdict.INCONCLUSIVE
    if Verdict.REFUTED in verdicts:
        return Verdict.REFUTED
    if Verdict.INCONCLUSIVE in verdicts:
        return Verdict.INCONCLUSIVE
    return Verdict.CERTIFIED


def run(problem: ProblemFile, opts: RunOptions = RunOptions(), source: bytes | None = None) -> dict:
    """Certify every grid instance and assemble the report document."""
    from .. import __version__

    t0 = time.perf_counter()
    if opts.candidate is not None:
        problem = problem.with_candidate(opts.candidate)
    if opts.certify and problem.candidate.external:
        raise InputError("the candidate is REQUIRED-EXTERNAL; supply one with --candidate")
    insts, excluded = instances(problem)
    if not insts:
        raise InputError("every parameter instance is excluded by the assume block")
    budget = Budget.default()
    cfg = problem.config
    if cfg.budget_depth is not None:
        budget = Budget(cfg.budget_depth, cfg.budget_boxes)
    if opts.budget is not None:
        budget = Budget(budget.max_depth, opts.budget)
    kinds = opts.simulate if opts.simulate is not None else cfg.simulate
    econf = _empirical_config(problem, opts) if kinds else None
    t_cert = t_sim = 0.0
    docs = []
    for inst in insts:
        rule = choose_rule(problem, inst.target)
        certified_kind, open_parts = _scope(problem.property.kind, rule, inst.target, inst.post)
        rep, refusal = None, None
        s = time.perf_counter()
        if opts.certify:
            try:
                rep = certify_instance(problem, inst, rule, budget)
            except NonCompactTarget as e:
                refusal = str(e)
        t_cert += time.perf_counter() - s
        s = time.perf_counter()
        evidence = gather_evidence(problem, inst, kinds, rep, econf) if kinds else []
        t_sim += time.perf_counter() - s
        docs.append(_instance_doc(inst, rule, rep, refusal, certified_kind, open_parts, evidence, problem))
    verdict = aggregate(Verdict(d["verdict"]) for d in docs) if opts.certify else None
    first = docs[0]
    return {
        "schema": SCHEMA,
        "tool": {"name": "stabcert", "version": __version__},
        "input": {"name": problem.name, "sha256": hashlib.sha256(source).hexdigest() if source is not None else None,
                  "candidate_override": opts.candidate},
        "mode": "check" if opts.certify else "simulate",
        "property": first["property"],
        "certified_property": first["certified_property"],
        "rule": first["rule"],
        "verdict": None if verdict is None else verdict.value,
        "instances": docs,
        "excluded_instances": jsonable(excluded),
        "timings": {"total_s": time.perf_counter() - t0, "certify_s": t_cert, "simulate_s": t_sim},
    }


def run_text(text: str, opts: RunOptions = RunOptions()) -> dict:
    data = text.encode("utf-8")
    return run(parse_problem(text), opts, source=data)


def exit_code(doc: dict) -> int:
    if doc["verdict"] is None:
        ev = [e for inst in doc["instances"] for e in inst["evidence"]]
        return 0 if ev and all(e.get("passed", False) for e in ev) else 2
    return EXIT[Verdict(doc["verdict"])]


def dumps(doc: dict, timings: bool = True) -> str:
    if not timings:
        doc = {k: v for k, v in doc.items() if k != "timings"}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def summary(doc: dict) -> str:
    """Human-readable rendering of a report document."""
    lines = [f"{doc['input'].get('name') or 'problem'}: {doc['property']} via {doc['rule']}"
             + (f" -> {doc['verdict']}" if doc["verdict"] else " (evidence only)")]
    if doc["certified_property"] != doc["property"] and doc["verdict"]:
        lines.append(f"  certified part: {doc['certified_property']}")
    for inst in doc["instances"]:
        params = ", ".join(f"{k}={v}" for k, v in inst["params"].items()) or "-"
        head = f"  [{params}] {inst['verdict'] if doc['verdict'] else ''}".rstrip()
        lines.append(head)
        if inst["refusal"]:
            lines.append(f"    refused: {inst['refusal']}")
        for p in inst["premises"]:
            tail = ""
            if p["status"] == "disproved":
                tail = f"  witness {p['witness']}"
            elif p["status"] == "unknown":
                tail = f"  ({p['reason']})"
            lines.append(f"    {p['status']:<9} {p['name']}{tail}")
        for part in inst["uncertified"]:
            lines.append(f"    {part['label']:<9} {part['part']} (not certified)")
        for e in inst["evidence"]:
            state = "skipped" if "skipped" in e else ("passed" if e.get("passed") else "failed")
            lines.append(f"    EVIDENCE  {e['kind']}: {state}")
    if doc["excluded_instances"]:
        lines.append(f"  {len(doc['excluded_instances'])} grid point(s) excluded by assumptions")
    return "\n".join(lines) + "\n"


# -- standalone witness verification ---------------------------------------------------


def verify_report(doc: dict) -> list[dict]:
    """Re-check every refuting witness in a report by exact rational evaluation."""
    from .problem import parse_formula

    out = []
    for idx, inst in enumerate(doc.get("instances", [])):
        state = list(inst.get("system", {}))
        for p in inst.get("premises", []):
            if p["status"] != "disproved":
                continue
            w = {k: Fraction(v) for k, v in (p.get("witness") or {}).items()}
            names = sorted(set(state) | set(w))
            assumption = parse_formula(p["assumption"], names)
            claim = None if p.get("claim") is None else parse_formula(p["claim"], names)
            prem = Premise(p["name"], CheckResult.disproved(w, p.get("violated") or ""), assumption, claim,
                           p.get("kind", "pointwise"))
            v = None
            if prem.kind == "ray":
                from .problem import parse_expression, to_polynomial as tp
                v = tp(parse_expression(inst["candidate"]["v"], state), {}, state)
            ok = verify_witness(prem, v) if w else False
            out.append({"instance": idx, "premise": p["name"], "witness": p.get("witness"), "verified": bool(ok)})
    return out
