"""``stabcert`` command line: check, simulate, verify-witness, corpus."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..system import InputError
from .corpus import corpus_list, corpus_text
from .problem import SIM_KINDS, parse_problem
from .runner import EXIT_INPUT, RunOptions, dumps, exit_code, run, summary, verify_report


def _read(source: str) -> str:
    if source.startswith("corpus:"):
        return corpus_text(source.split(":", 1)[1])
    try:
        return Path(source).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read {source}: {e.strerror}") from None


def _emit(doc: dict, args) -> None:
    text = dumps(doc) if args.json else summary(doc)
    if args.output:
        Path(args.output).write_text(dumps(doc), encoding="utf-8")
    sys.stdout.write(text)


def _cmd_check(args) -> int:
    text = _read(args.problem)
    opts = RunOptions(budget=args.budget, seed=args.seed, horizon=args.horizon, candidate=args.candidate,
                      simulate=() if args.no_simulate else None)
    doc = run(parse_problem(text), opts, source=text.encode("utf-8"))
    _emit(doc, args)
    return exit_code(doc)


def _cmd_simulate(args) -> int:
    text = _read(args.problem)
    problem = parse_problem(text)
    kinds = tuple(args.kinds) if args.kinds else (problem.config.simulate or ("stability",))
    opts = RunOptions(seed=args.seed, horizon=args.horizon, candidate=args.candidate, simulate=kinds, certify=False)
    doc = run(problem, opts, source=text.encode("utf-8"))
    _emit(doc, args)
    return exit_code(doc)


def _cmd_verify(args) -> int:
    try:
        doc = json.loads(Path(args.report).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"cannot load report {args.report}: {e}") from None
    rows = verify_report(doc)
    for r in rows:
        mark = "ok" if r["verified"] else "FAILED"
        print(f"instance {r['instance']}: {r['premise']}: witness {r['witness']} {mark}")
    if not rows:
        print("no refuting witnesses in report")
    return 0 if all(r["verified"] for r in rows) else 1


def _cmd_corpus(args) -> int:
    if args.name is None:
        for n in corpus_list():
            print(n)
    else:
        sys.stdout.write(corpus_text(args.name))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stabcert", description="Lyapunov stability certificates for polynomial ODEs.")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p, certify=True):
        p.add_argument("problem", help="problem file, or corpus:NAME")
        p.add_argument("--seed", type=int, help="sampling seed for simulations")
        p.add_argument("--horizon", type=float, help="simulation horizon")
        p.add_argument("--json", action="store_true", help="print the JSON report instead of a summary")
        p.add_argument("-o", "--output", help="also write the JSON report to this file")
        p.add_argument("--candidate", help="Lyapunov candidate expression replacing the file's v")
        if certify:
            p.add_argument("--budget", type=int, help="branch-and-bound box budget per check")
            p.add_argument("--no-simulate", action="store_true", help="skip configured simulations")

    common(sub.add_parser("check", help="certify the property of a problem file"))
    p = sub.add_parser("simulate", help="numerical evidence only")
    common(p, certify=False)
    p.add_argument("--kinds", nargs="+", choices=SIM_KINDS)
    p = sub.add_parser("verify-witness", help="re-check refuting witnesses of a JSON report exactly")
    p.add_argument("report")
    p = sub.add_parser("corpus", help="list shipped case studies, or print one")
    p.add_argument("name", nargs="?")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"check": _cmd_check, "simulate": _cmd_simulate, "verify-witness": _cmd_verify,
               "corpus": _cmd_corpus}[args.verb]
    try:
        return handler(args)
    except InputError as e:
        print(f"stabcert: error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
