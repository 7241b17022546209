#!/usr/bin/env python3
"""Randomized audit: executor vs the naive reference interpreter.

Generates (store, statement) pairs, runs both implementations, and compares
final stores exactly.  Any mismatch is printed with a reproducible seed.
"""

from __future__ import annotations

import argparse
import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from generators import gen_statement, gen_store  # noqa: E402
from oracle import run_statement, stores_eq  # noqa: E402

from entevo import (  # noqa: E402
    MachineState,
    execute,
    parse_statement,
    state_from_plain,
    state_to_plain,
)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-n", "--pairs", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-entities", type=int, default=50)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    t0 = time.perf_counter()
    mismatches = 0
    for i in range(args.pairs):
        store = gen_store(rng, max_entities=args.max_entities)
        desc, text = gen_statement(rng, store)
        engine = state_to_plain(
            execute(parse_statement(text), MachineState(ds=state_from_plain(store))).final_state.ds
        )
        reference = run_statement(desc, store)
        if not stores_eq(engine, reference):
            mismatches += 1
            print(f"mismatch #{mismatches} at pair {i}: {text}")
    elapsed = time.perf_counter() - t0
    print(
        f"{args.pairs} pairs, seed {args.seed}: "
        f"{mismatches} mismatches in {elapsed:.1f}s"
    )
    return 1 if mismatches else 0


if __name__ == "__main__":
    raise SystemExit(main())
