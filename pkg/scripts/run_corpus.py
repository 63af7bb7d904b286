"""Run every shipped case study and print one summary line each.

    python3 scripts/run_corpus.py [--no-simulate] [--out DIR]
"""

import argparse
import time
from pathlib import Path

from stabcert.frontend import RunOptions, corpus_list, corpus_text, dumps, exit_code, run_text
from stabcert.system import InputError

MG_CANDIDATE = "13/6*x1^2 - 1/3*x1*x2 + 2/3*x2^2"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--no-simulate", action="store_true")
    ap.add_argument("--out", type=Path, help="directory for the JSON reports")
    args = ap.parse_args()
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
    for name in corpus_list():
        opts = RunOptions(simulate=() if args.no_simulate else None,
                          candidate=MG_CANDIDATE if name == "moore_greitzer_eps" else None)
        t0 = time.perf_counter()
        try:
            doc = run_text(corpus_text(name), opts)
        except InputError as e:
            print(f"{name:<24} input error: {e}")
            continue
        ev = [e for inst in doc["instances"] for e in inst["evidence"]]
        ev_str = ", ".join(f"{e['kind']}={'pass' if e.get('passed') else 'fail'}" for e in ev) or "-"
        print(f"{name:<24} {doc['verdict']:<13} exit {exit_code(doc)}  rule {doc['rule']:<9} "
              f"instances {len(doc['instances'])}  evidence [{ev_str}]  {time.perf_counter() - t0:.2f} s")
        if args.out:
            (args.out / f"{name}.json").write_text(dumps(doc))


if __name__ == "__main__":
    main()
