"""Replay the two counterexamples to careless Lyapunov rules."""

import json

from stabcert.simulate import counterexample_replay


def main():
    for cid in ("CEX1", "CEX2"):
        print(json.dumps(counterexample_replay(cid), indent=2, default=str))


if __name__ == "__main__":
    main()
