"""Problem files: data model, parser and normalized printer.

A problem file is line oriented. The first non-comment line is the version
header, then keyword blocks follow, each opened by ``name:`` in column one
with indented entries::

    stabcert-problem v1
    name pendulum
    system:
      state theta, omega
      param a in {1/2, 1, 2}
      param b = 0
      ode theta' = omega
      ode omega' = -a*theta - b*omega
    property:
      kind Stab
      target origin
    candidate:
      v = a*theta^2/2 + ((b*theta + omega)^2 + omega^2)/4

Expressions and formulas inside entries are parsed with a small lark grammar
into sympy expressions with exact rational coefficients. Parameters may appear
in denominators; state variables may not.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache

import sympy
from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedInput, VisitError

from .. import formula as fm
from ..polynomial import Polynomial
from ..rules import Kind
from ..system import InputError

HEADER = "stabcert-problem v1"
BLOCKS = ("system", "assume", "property", "candidate", "config")
REQUIRED_EXTERNAL = "REQUIRED-EXTERNAL"
NON_POLYNOMIAL = {"sin", "cos", "tan", "exp", "log", "ln", "sqrt", "abs", "atan", "tanh", "sinh", "cosh"}
DEFAULT_GRID = (sympy.Rational(1, 2), sympy.Integer(1), sympy.Integer(2))
SIM_KINDS = ("stability", "attractivity", "envelope", "energy")
RULES = ("Lyap>=", "Lyap>", "Lyap_E", "Lyap>^G", "Lyap_E^G", "SLyap>=", "SLyap>", "SLyap*>=", "GLyap")


class ProblemError(InputError):
    """Parse or validation error, located at ``line``/``column`` (1-based) when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message, self.line, self.column = message, line, column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


# -- grammar -------------------------------------------------------------------

_GRAMMAR = r"""
?expr_start: expr
?formula_start: formula

?formula: disj
?disj: conj | disj "|" conj -> f_or
?conj: fneg | conj "&" fneg -> f_and
?fneg: "!" fneg -> f_not
     | comparison
     | "(" formula ")"
     | "true" -> f_true
     | "false" -> f_false
comparison: expr REL expr

?expr: term | expr "+" term -> add | expr "-" term -> sub
?term: factor | term "*" factor -> mul | term "/" factor -> div
?factor: power | "-" factor -> neg | "+" factor
?power: primary | primary POW factor -> pow
?primary: NUMBER -> number
        | NAME "(" [expr ("," expr)*] ")" -> call
        | NAME -> name
        | "(" expr ")"

POW: "^" | "**"
REL: "<=" | ">=" | "!=" | "=" | "<" | ">"
NAME: /[A-Za-z_][A-Za-z0-9_]*/
NUMBER: /(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?/
%ignore /[ \t]+/
"""


@lru_cache(maxsize=1)
def _parser() -> Lark:
    return Lark(_GRAMMAR, start=["expr_start", "formula_start"], parser="earley", ambiguity="resolve")


# -- formula trees over sympy expressions --------------------------------------


@dataclass(frozen=True)
class FAtom:
    expr: sympy.Expr  # expr REL 0
    rel: str


@dataclass(frozen=True)
class FAnd:
    args: tuple


@dataclass(frozen=True)
class FOr:
    args: tuple


@dataclass(frozen=True)
class FNot:
    arg: object


@dataclass(frozen=True)
class FConst:
    value: bool


FTRUE, FFALSE = FConst(True), FConst(False)


def _flatten(cls, args):
    out = []
    for a in args:
        out.extend(a.args if isinstance(a, cls) else (a,))
    return cls(tuple(out))


class _Build(Transformer):
    def __init__(self, symbols: dict, line: int, offset: int):
        super().__init__()
        self.symbols, self.line, self.offset = symbols, line, offset

    def _err(self, msg, tok):
        col = getattr(tok, "column", None)
        raise ProblemError(msg, self.line, None if col is None else col + self.offset)

    def number(self, items):
        q = Fraction(str(items[0]))
        return sympy.Rational(q.numerator, q.denominator)

    def name(self, items):
        tok = items[0]
        if str(tok) not in self.symbols:
            self._err(f"unknown identifier {str(tok)!r}", tok)
        return self.symbols[str(tok)]

    def call(self, items):
        tok = items[0]
        fn = str(tok)
        if fn in NON_POLYNOMIAL:
            self._err(
                f"non-polynomial function {fn}(...) is not supported; introduce a ghost state variable "
                f"whose ODE generates it (e.g. s = sin(x), c = cos(x) with s' = c*x', c' = -s*x') "
                f"or use a polynomial approximation",
                tok,
            )
        self._err(f"unknown function {fn!r}", tok)

    add = v_args(inline=True)(lambda self, a, b: a + b)
    sub = v_args(inline=True)(lambda self, a, b: a - b)
    mul = v_args(inline=True)(lambda self, a, b: a * b)
    neg = v_args(inline=True)(lambda self, a: -a)

    def div(self, items):
        a, b = items
        if b == 0:
            raise ProblemError("division by zero", self.line)
        return a / b

    def pow(self, items):
        base, tok, k = items
        if not (k.is_Integer and k >= 0):
            self._err("exponents must be non-negative integer literals", tok)
        return base ** int(k)

    def comparison(self, items):
        lhs, rel, rhs = items
        return FAtom(sympy.expand(lhs - rhs), str(rel))

    def f_and(self, items):
        return _flatten(FAnd, items)

    def f_or(self, items):
        return _flatten(FOr, items)

    def f_not(self, items):
        return FNot(items[0])

    def f_true(self, _):
        return FTRUE

    def f_false(self, _):
        return FFALSE


def _parse(text: str, start: str, symbols: dict, line: int = 1, offset: int = 0):
    try:
        tree = _parser().parse(text, start=start)
    except UnexpectedInput as e:
        col = getattr(e, "column", None)
        raise ProblemError(f"syntax error near {text.strip()!r}", line,
                           None if col in (None, -1) else col + offset) from None
    try:
        out = _Build(symbols, line, offset).transform(tree)
    except VisitError as e:
        if isinstance(e.orig_exc, ProblemError):
            raise e.orig_exc from None
        raise
    if start == "formula_start" and isinstance(out, sympy.Expr):
        raise ProblemError("expected a formula, found an expression", line, offset + 1)
    if start == "expr_start" and not isinstance(out, sympy.Expr):
        raise ProblemError("expected an expression", line, offset + 1)
    return sympy.expand(out) if start == "expr_start" else out


def _symbols(names) -> dict:
    return {n: sympy.Symbol(n) for n in names}


def parse_expression(text: str, names) -> sympy.Expr:
    """Parse an expression over ``names`` into an expanded sympy expression."""
    return _parse(text, "expr_start", _symbols(names))


def parse_formula(text: str, names=None) -> Formula:
    """Parse a closed polynomial formula straight into :mod:`stabcert.formula`.

    With ``names`` omitted every identifier is accepted as a variable.
    """
    if names is None:
        names = set(re.findall(r"[A-Za-z_][A-Za-z0-9_]*", text)) - {"true", "false"}
    tree = _parse(text, "formula_start", _symbols(names))
    return to_formula(tree, {}, tuple(sorted(names)))


# -- conversion to the exact core ------------------------------------------------


def _rational(e) -> Fraction:
    e = sympy.nsimplify(e) if not e.is_Rational else e
    if not e.is_Rational:
        raise InputError(f"{e} does not evaluate to a rational constant")
    return Fraction(int(e.p), int(e.q))


def to_polynomial(e: sympy.Expr, values: dict, names) -> Polynomial:
    """Substitute parameter ``values`` and expand into a :class:`Polynomial` over ``names``."""
    e = sympy.expand(e.subs({sympy.Symbol(k): sympy.Rational(v.numerator, v.denominator)
                             for k, v in values.items()}))
    if e.has(sympy.zoo, sympy.nan, sympy.oo):
        raise InputError("parameter values make a denominator vanish")
    gens = [sympy.Symbol(n) for n in names]
    if not gens:
        return Polynomial.const(_rational(e))
    try:
        p = sympy.Poly(e, *gens, domain="QQ")
    except (sympy.PolynomialError, sympy.polys.polyerrors.CoercionFailed) as err:
        raise InputError(f"{e} is not a polynomial with rational coefficients in {list(names)}") from err
    return Polynomial({m: Fraction(int(c.p), int(c.q)) for m, c in p.terms()}, tuple(names))


def to_formula(f, values: dict, names) -> Formula:
    if isinstance(f, FConst):
        return fm.TRUE if f.value else fm.FALSE
    if isinstance(f, FAtom):
        p = to_polynomial(f.expr, values, names)
        if p.is_constant():
            return fm.TRUE if fm.Atom(p, f.rel).holds(p.constant_term()) else fm.FALSE
        return fm.atom(p, f.rel)
    if isinstance(f, FAnd):
        return fm.conj(*(to_formula(a, values, names) for a in f.args))
    if isinstance(f, FOr):
        return fm.disj(*(to_formula(a, values, names) for a in f.args))
    return fm.simplify(fm.negate(to_formula(f.arg, values, names)))


Formula = fm.Formula


# -- data model -----------------------------------------------------------------


@dataclass(frozen=True)
class ParamDecl:
    """One parameter (or a tuple of them) with a finite set of rational values."""

    names: tuple
    values: tuple  # tuple of tuples, one entry per grid point

    @property
    def fixed(self) -> bool:
        return len(self.values) == 1


@dataclass(frozen=True)
class TargetSpec:
    shape: str = "origin"  # origin | subspace | formula | ball
    vars: tuple = ()
    formula: object = None
    radius: object = None
    compact: bool = False


@dataclass(frozen=True)
class SystemBlock:
    state: tuple
    params: tuple = ()
    odes: tuple = ()  # (name, expr) in state order
    domain: object = FTRUE
    equilibrium: tuple | None = None

    @property
    def param_names(self) -> tuple:
        return tuple(n for d in self.params for n in d.names)


@dataclass(frozen=True)
class PropertyBlock:
    kind: Kind
    target: TargetSpec = TargetSpec()
    post: TargetSpec | None = None
    eps: object = None
    rule: str | None = None


@dataclass(frozen=True)
class CandidateBlock:
    v: object = None
    external: bool = False
    k1: object = None
    k2: object = None
    k3: object = None
    gamma: object = None
    level: object = None


@dataclass(frozen=True)
class ConfigBlock:
    gamma_schedule: tuple | None = None
    eps_schedule: tuple | None = None
    gamma_rule: str | None = None
    budget_depth: int | None = None
    budget_boxes: int | None = None
    seed: int | None = None
    horizon: object = None
    samples: int | None = None
    simulate: tuple = ()
    sim_eps: tuple | None = None
    energy: object = None
    energy_by: object = None


@dataclass(frozen=True)
class ProblemFile:
    system: SystemBlock
    property: PropertyBlock
    candidate: CandidateBlock = CandidateBlock()
    assume: object = FTRUE
    config: ConfigBlock = ConfigBlock()
    name: str = ""
    description: str = ""

    def grid(self) -> list[dict]:
        """All parameter instantiations as ``{name: Fraction}`` maps (assumptions not applied)."""
        decls = self.system.params
        out = []
        for combo in itertools.product(*(d.values for d in decls)):
            point = {}
            for d, vals in zip(decls, combo):
                point.update({n: _rational(v) for n, v in zip(d.names, vals)})
            out.append(point)
        return out

    def with_candidate(self, v: str) -> "ProblemFile":
        names = self.system.state + self.system.param_names
        return replace(self, candidate=replace(self.candidate, v=parse_expression(v, names), external=False))


# -- line-oriented block parser ---------------------------------------------------


@dataclass
class _Line:
    no: int
    indent: int
    text: str


def _lines(text: str) -> list[_Line]:
    out = []
    for i, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].rstrip()
        if not body.strip():
            continue
        if "\t" in body[: len(body) - len(body.lstrip())]:
            raise ProblemError("tabs are not allowed in indentation", i, 1)
        out.append(_Line(i, len(body) - len(body.lstrip()), body.strip()))
    return out


def _split_key(ln: _Line) -> tuple[str, str, int]:
    """Return ``(key, rest, column of rest)``."""
    key, _, rest = ln.text.partition(" ")
    stripped = rest.lstrip()
    col = ln.indent + len(key) + 1 + (len(rest) - len(stripped))
    return key, stripped, col


def _list_items(text: str, ln: _Line, col: int) -> list[tuple[str, int]]:
    """Split a comma separated list at top-level commas, keeping columns."""
    items, depth, start = [], 0, 0
    for i, ch in enumerate(text + ","):
        if ch in "({":
            depth += 1
        elif ch in ")}":
            depth -= 1
        elif ch == "," and depth == 0:
            piece = text[start:i]
            lead = len(piece) - len(piece.lstrip())
            if not piece.strip():
                raise ProblemError("empty list entry", ln.no, col + start + 1)
            items.append((piece.strip(), col + start + lead))
            start = i + 1
    return items


class _Parser:
    def __init__(self, text: str):
        self.lines = _lines(text)
        self.state: tuple = ()
        self.params: tuple = ()

    def expr(self, text, ln, col, names=None):
        names = names if names is not None else self.state + self.params
        return _check_denominators(_parse(text, "expr_start", _symbols(names), ln.no, col), self.state, ln, col)

    def formula(self, text, ln, col, names=None):
        names = names if names is not None else self.state + self.params
        f = _parse(text, "formula_start", _symbols(names), ln.no, col)
        for a in _atoms(f):
            _check_denominators(a.expr, self.state, ln, col)
        return f

    def const(self, text, ln, col):
        return self.expr(text, ln, col, names=self.params)

    def rational(self, text, ln, col):
        e = self.expr(text, ln, col, names=())
        return _rational(e)

    def run(self) -> ProblemFile:
        if not self.lines or self.lines[0].text != HEADER or self.lines[0].indent:
            no = self.lines[0].no if self.lines else 1
            raise ProblemError(f"first line must be the header {HEADER!r}", no, 1)
        blocks, top = {}, {}
        current = None
        for ln in self.lines[1:]:
            if ln.indent == 0:
                if ln.text.endswith(":") and " " not in ln.text:
                    name = ln.text[:-1]
                    if name not in BLOCKS:
                        raise ProblemError(f"unknown block {name!r}; expected one of {', '.join(BLOCKS)}", ln.no, 1)
                    if name in blocks:
                        raise ProblemError(f"duplicate block {name!r}", ln.no, 1)
                    if name != "system" and "system" not in blocks:
                        raise ProblemError("the system block must come first", ln.no, 1)
                    blocks[name] = current = []
                    continue
                key, rest, _ = _split_key(ln)
                if key not in ("name", "description"):
                    raise ProblemError(f"unexpected top-level line {ln.text!r}", ln.no, 1)
                top[key] = rest
                current = None
                continue
            if current is None:
                raise ProblemError("indented line outside of a block", ln.no, ln.indent + 1)
            current.append(ln)
        if "system" not in blocks:
            raise ProblemError("missing system block")
        system = self.system(blocks["system"])
        if "property" not in blocks:
            raise ProblemError("missing property block")
        assume = FTRUE
        if "assume" in blocks:
            parts = [self.formula(ln.text, ln, ln.indent, names=self.params) for ln in blocks["assume"]]
            assume = parts[0] if len(parts) == 1 else _flatten(FAnd, parts)
        prop = self.property(blocks["property"])
        cand = self.candidate(blocks.get("candidate", []))
        cfg = self.config(blocks.get("config", []))
        return ProblemFile(system, prop, cand, assume, cfg, top.get("name", ""), top.get("description", ""))

    # -- blocks ------------------------------------------------------------
    def system(self, lines) -> SystemBlock:
        state, params, odes, domain, eq = None, [], {}, FTRUE, None
        deferred = []
        for ln in lines:
            key, rest, col = _split_key(ln)
            if key == "state":
                if state is not None:
                    raise ProblemError("state declared twice", ln.no, ln.indent + 1)
                state = tuple(n for n, _ in _list_items(rest, ln, col))
                _check_names(state, ln, col)
            elif key == "param":
                params.append(self.param(rest, ln, col))
            else:
                deferred.append(ln)
        if state is None:
            raise ProblemError("system block needs a 'state' line", lines[0].no if lines else None)
        self.state = state
        self.params = tuple(n for d in params for n in d.names)
        seen = set(state)
        for n in self.params:
            if n in seen:
                raise ProblemError(f"{n!r} declared twice")
            seen.add(n)
        for ln in deferred:
            key, rest, col = _split_key(ln)
            if key == "ode":
                lhs, eq_sign, rhs = rest.partition("=")
                var = lhs.strip()
                if not eq_sign or not var.endswith("'"):
                    raise ProblemError("expected `ode x' = expression`", ln.no, col + 1)
                var = var[:-1].strip()
                if var not in state:
                    raise ProblemError(f"{var!r} is not a state variable", ln.no, col + 1)
                if var in odes:
                    raise ProblemError(f"second ODE for {var!r}", ln.no, col + 1)
                odes[var] = self.expr(rhs, ln, col + len(lhs) + 1)
            elif key == "domain":
                domain = self.formula(rest, ln, col)
            elif key == "equilibrium":
                eq = tuple(self.const(t, ln, c) for t, c in _list_items(rest, ln, col))
                if len(eq) != len(state):
                    raise ProblemError("equilibrium needs one coordinate per state variable", ln.no, col + 1)
            else:
                raise ProblemError(f"unknown system entry {key!r}", ln.no, ln.indent + 1)
        missing = [x for x in state if x not in odes]
        if missing:
            raise ProblemError(f"no ODE for {missing}", lines[-1].no)
        return SystemBlock(state, tuple(params), tuple((x, odes[x]) for x in state), domain, eq)

    def param(self, rest, ln, col) -> ParamDecl:
        if rest.startswith("("):
            close = rest.find(")")
            names = tuple(n for n, _ in _list_items(rest[1:close], ln, col + 1))
            rest2 = rest[close + 1:].strip()
        else:
            head = rest.split()[0] if rest.split() else ""
            names = (head,)
            rest2 = rest[len(head):].strip()
        _check_names(names, ln, col)
        off = col + len(rest) - len(rest2)
        if not rest2 and len(names) == 1:
            # a bare parameter ranges over the default grid
            return ParamDecl(names, tuple((v,) for v in DEFAULT_GRID))
        if rest2.startswith("="):
            body = rest2[1:].strip()
            pieces = [(body, off + len(rest2) - len(body))]
            vals = [self._param_value(pieces, names, ln)]
        elif rest2.startswith("in") and rest2[2:].strip().startswith("{") and rest2.endswith("}"):
            inner = rest2[2:].strip()[1:-1]
            start = off + rest2.index("{") + 1
            vals = [self._param_value([(t, c)], names, ln) for t, c in _list_items(inner, ln, start)]
            if not vals:
                raise ProblemError("empty parameter grid", ln.no, start + 1)
        else:
            raise ProblemError("expected `param a = value` or `param a in {v1, v2}`", ln.no, col + 1)
        return ParamDecl(names, tuple(vals))

    def _param_value(self, pieces, names, ln) -> tuple:
        text, col = pieces[0]
        if len(names) > 1:
            if not (text.startswith("(") and text.endswith(")")):
                raise ProblemError(f"expected a tuple of {len(names)} values", ln.no, col + 1)
            items = _list_items(text[1:-1], ln, col + 1)
            if len(items) != len(names):
                raise ProblemError(f"expected {len(names)} values", ln.no, col + 1)
        else:
            items = [(text, col)]
        return tuple(sympy.Rational(*_ratio(self.rational(t, ln, c))) for t, c in items)

    def property(self, lines) -> PropertyBlock:
        kw = {}
        compact = False
        for ln in lines:
            key, rest, col = _split_key(ln)
            if key == "kind":
                try:
                    kw["kind"] = Kind(rest)
                except ValueError:
                    raise ProblemError(f"unknown property kind {rest!r}; expected one of "
                                       f"{', '.join(k.value for k in Kind)}", ln.no, col + 1) from None
            elif key in ("target", "post"):
                kw[key] = self.target(rest, ln, col)
            elif key == "eps":
                kw["eps"] = self.const(rest, ln, col)
            elif key == "rule":
                if rest not in RULES:
                    raise ProblemError(f"unknown rule {rest!r}; expected one of {', '.join(RULES)}", ln.no, col + 1)
                kw["rule"] = rest
            elif key == "compact":
                compact = True
            else:
                raise ProblemError(f"unknown property entry {key!r}", ln.no, ln.indent + 1)
        if "kind" not in kw:
            raise ProblemError("property block needs a 'kind' line", lines[0].no if lines else None)
        if compact:
            t = kw.get("target", TargetSpec())
            if t.shape != "formula":
                raise ProblemError("'compact' only applies to formula targets", lines[0].no)
            kw["target"] = replace(t, compact=True)
        return PropertyBlock(**kw)

    def target(self, rest, ln, col) -> TargetSpec:
        shape, _, body = rest.partition(" ")
        bcol = col + len(shape) + 1 + (len(body) - len(body.lstrip()))
        body = body.strip()
        if shape == "origin" and not body:
            return TargetSpec("origin")
        if shape == "subspace":
            names = tuple(n for n, _ in _list_items(body, ln, bcol))
            for n in names:
                if n not in self.state:
                    raise ProblemError(f"{n!r} is not a state variable", ln.no, bcol + 1)
            return TargetSpec("subspace", vars=names)
        if shape == "formula":
            return TargetSpec("formula", formula=self.formula(body, ln, bcol, names=self.state + self.params))
        if shape == "ball":
            return TargetSpec("ball", radius=self.const(body, ln, bcol))
        raise ProblemError("expected target origin | subspace x, y | formula F | ball r", ln.no, col + 1)

    def candidate(self, lines) -> CandidateBlock:
        kw = {}
        for ln in lines:
            key, rest, col = _split_key(ln)
            if key not in ("v", "k1", "k2", "k3", "gamma", "level"):
                raise ProblemError(f"unknown candidate entry {key!r}", ln.no, ln.indent + 1)
            if key in kw or (key == "v" and "external" in kw):
                raise ProblemError(f"{key} given twice", ln.no, ln.indent + 1)
            if key == "v" and rest == REQUIRED_EXTERNAL:
                kw["external"] = True
                continue
            if not rest.startswith("="):
                raise ProblemError(f"expected `{key} = expression`", ln.no, col + 1)
            body = rest[1:].lstrip()
            bcol = col + len(rest) - len(body)
            kw[key] = self.expr(body, ln, bcol) if key == "v" else self.const(body, ln, bcol)
        return CandidateBlock(**kw)

    def config(self, lines) -> ConfigBlock:
        kw = {}
        for ln in lines:
            key, rest, col = _split_key(ln)
            if key in ("gamma_schedule", "eps_schedule", "sim_eps"):
                kw[key] = tuple(sympy.Rational(*_ratio(self.rational(t, ln, c))) for t, c in _list_items(rest, ln, col))
                if any(q <= 0 for q in kw[key]):
                    raise ProblemError(f"{key} entries must be positive", ln.no, col + 1)
            elif key == "gamma_rule":
                if rest not in ("equal", "search"):
                    raise ProblemError("gamma_rule is 'equal' or 'search'", ln.no, col + 1)
                kw[key] = rest
            elif key == "budget":
                parts = rest.split()
                if len(parts) != 4 or parts[0] != "depth" or parts[2] != "boxes":
                    raise ProblemError("expected `budget depth D boxes B`", ln.no, col + 1)
                kw["budget_depth"], kw["budget_boxes"] = _posint(parts[1], ln, col), _posint(parts[3], ln, col)
            elif key in ("seed", "samples"):
                kw[key] = _posint(rest, ln, col, allow_zero=key == "seed")
            elif key in ("horizon", "energy_by"):
                kw[key] = sympy.Rational(*_ratio(self.rational(rest, ln, col)))
            elif key == "simulate":
                kinds = tuple(k for k, _ in _list_items(rest, ln, col))
                bad = [k for k in kinds if k not in SIM_KINDS]
                if bad:
                    raise ProblemError(f"unknown simulation kind {bad[0]!r}; expected {', '.join(SIM_KINDS)}", ln.no, col + 1)
                kw[key] = kinds
            elif key == "energy":
                kw[key] = self.expr(rest, ln, col)
            else:
                raise ProblemError(f"unknown config entry {key!r}", ln.no, ln.indent + 1)
        return ConfigBlock(**kw)


def _ratio(q: Fraction) -> tuple[int, int]:
    return q.numerator, q.denominator


def _posint(text, ln, col, allow_zero=False) -> int:
    try:
        k = int(text)
    except ValueError:
        raise ProblemError(f"expected an integer, found {text!r}", ln.no, col + 1) from None
    if k < 0 or (k == 0 and not allow_zero):
        raise ProblemError("expected a positive integer", ln.no, col + 1)
    return k


def _check_names(names, ln, col):
    for n in names:
        if not n.isidentifier() or n in ("true", "false"):
            raise ProblemError(f"invalid identifier {n!r}", ln.no, col + 1)
        if n in NON_POLYNOMIAL:
            raise ProblemError(f"{n!r} is reserved", ln.no, col + 1)
    if len(set(names)) != len(names):
        raise ProblemError("duplicate identifier", ln.no, col + 1)


def _check_denominators(e, state, ln, col):
    den = sympy.fraction(sympy.together(e))[1]
    bad = den.free_symbols & {sympy.Symbol(s) for s in state}
    if bad:
        raise ProblemError(f"division by an expression in state variables {sorted(map(str, bad))} "
                           f"is not polynomial", ln.no, col + 1)
    return e


def _atoms(f):
    if isinstance(f, FAtom):
        yield f
    elif isinstance(f, (FAnd, FOr)):
        for a in f.args:
            yield from _atoms(a)
    elif isinstance(f, FNot):
        yield from _atoms(f.arg)


def parse_problem(text: str) -> ProblemFile:
    """Parse a problem file; raises :class:`ProblemError` with a location on bad input."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return _Parser(text).run()


# -- printer -------------------------------------------------------------------


def print_expr(e) -> str:
    return sympy.sstr(sympy.expand(e), order="lex").replace("**", "^")


def print_formula(f) -> str:
    if isinstance(f, FConst):
        return "true" if f.value else "false"
    if isinstance(f, FAtom):
        return f"{print_expr(f.expr)} {f.rel} 0"
    if isinstance(f, FNot):
        return f"!({print_formula(f.arg)})"
    if isinstance(f, FAnd):
        return " & ".join(f"({print_formula(a)})" if isinstance(a, FOr) else print_formula(a) for a in f.args)
    return " | ".join(print_formula(a) for a in f.args)


def _print_target(t: TargetSpec) -> str:
    if t.shape == "origin":
        return "origin"
    if t.shape == "subspace":
        return "subspace " + ", ".join(t.vars)
    if t.shape == "ball":
        return "ball " + print_expr(t.radius)
    return "formula " + print_formula(t.formula)


def _q(x) -> str:
    return str(sympy.Rational(x))


def print_problem(p: ProblemFile) -> str:
    """Normalized text; ``parse_problem(print_problem(p)) == p``."""
    out = [HEADER]
    if p.name:
        out.append(f"name {p.name}")
    if p.description:
        out.append(f"description {p.description}")
    s = p.system
    out += ["system:", "  state " + ", ".join(s.state)]
    for d in s.params:
        head = d.names[0] if len(d.names) == 1 else "(" + ", ".join(d.names) + ")"
        vals = [_q(v[0]) if len(d.names) == 1 else "(" + ", ".join(map(_q, v)) + ")" for v in d.values]
        out.append(f"  param {head} = {vals[0]}" if d.fixed else f"  param {head} in {{{', '.join(vals)}}}")
    for x, e in s.odes:
        out.append(f"  ode {x}' = {print_expr(e)}")
    if s.domain != FTRUE:
        out.append("  domain " + print_formula(s.domain))
    if s.equilibrium is not None:
        out.append("  equilibrium " + ", ".join(print_expr(e) for e in s.equilibrium))
    if p.assume != FTRUE:
        out += ["assume:", "  " + print_formula(p.assume)]
    pr = p.property
    out += ["property:", f"  kind {pr.kind.value}", "  target " + _print_target(pr.target)]
    if pr.target.compact:
        out.append("  compact")
    if pr.post is not None:
        out.append("  post " + _print_target(pr.post))
    if pr.eps is not None:
        out.append("  eps " + print_expr(pr.eps))
    if pr.rule is not None:
        out.append("  rule " + pr.rule)
    c = p.candidate
    lines = []
    if c.external:
        lines.append(f"  v {REQUIRED_EXTERNAL}")
    elif c.v is not None:
        lines.append("  v = " + print_expr(c.v))
    for k in ("k1", "k2", "k3", "gamma", "level"):
        if getattr(c, k) is not None:
            lines.append(f"  {k} = {print_expr(getattr(c, k))}")
    if lines:
        out += ["candidate:"] + lines
    g = p.config
    lines = []
    for k in ("gamma_schedule", "eps_schedule"):
        if getattr(g, k) is not None:
            lines.append(f"  {k} " + ", ".join(map(_q, getattr(g, k))))
    if g.gamma_rule is not None:
        lines.append(f"  gamma_rule {g.gamma_rule}")
    if g.budget_depth is not None:
        lines.append(f"  budget depth {g.budget_depth} boxes {g.budget_boxes}")
    for k in ("seed", "samples"):
        if getattr(g, k) is not None:
            lines.append(f"  {k} {getattr(g, k)}")
    if g.horizon is not None:
        lines.append(f"  horizon {_q(g.horizon)}")
    if g.simulate:
        lines.append("  simulate " + ", ".join(g.simulate))
    if g.sim_eps is not None:
        lines.append("  sim_eps " + ", ".join(map(_q, g.sim_eps)))
    if g.energy is not None:
        lines.append("  energy " + print_expr(g.energy))
    if g.energy_by is not None:
        lines.append(f"  energy_by {_q(g.energy_by)}")
    if lines:
        out += ["config:"] + lines
    return "\n".join(out) + "\n"


__all__ = [
    "HEADER", "ProblemError", "ProblemFile", "SystemBlock", "PropertyBlock", "CandidateBlock", "ConfigBlock",
    "ParamDecl", "TargetSpec", "FAtom", "FAnd", "FOr", "FNot", "FConst", "parse_problem", "print_problem",
    "parse_expression", "parse_formula", "print_expr", "print_formula", "to_polynomial", "to_formula",
]
