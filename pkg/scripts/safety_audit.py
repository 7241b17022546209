#!/usr/bin/env python3
"""Desk-scale audit: safety verdicts vs exhaustive order enumeration.

Samples move/copy statements with at most four matching sources, executes
them under every source-loop permutation (and both target-loop directions),
and checks that the dry-run verdict agrees with observed order-independence.
"""

from __future__ import annotations

import argparse
import itertools
import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from generators import gen_move_copy, gen_store  # noqa: E402

from entevo import MachineState, check_safety, execute, parse_statement, state_from_plain  # noqa: E402
from entevo.migrate import split_conditions  # noqa: E402
from entevo.safety import Verdict  # noqa: E402
from entevo.store import QueryPredicate, foreach_keys  # noqa: E402


def orders_agree(stmt, ds) -> bool:
    src_conds, _ = split_conditions(stmt)
    keys = foreach_keys(MachineState(ds=ds), QueryPredicate(stmt.source.kind, src_conds))
    baseline = None
    for perm in itertools.permutations(keys):
        for flip in (False, True):

            def order(ks, depth, perm=perm, flip=flip):
                if depth == 0:
                    present = set(ks)
                    return [k for k in perm if k in present]
                return list(reversed(ks)) if flip else list(ks)

            final = execute(stmt, MachineState(ds=ds), key_order=order).final_state.ds
            if baseline is None:
                baseline = final
            elif final != baseline:
                return False
    return True


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-n", "--statements", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    t0 = time.perf_counter()
    total = unsafe = disagreements = 0
    while total < args.statements:
        store = gen_store(rng, max_entities=8)
        desc, text = gen_move_copy(rng, store, safety_corpus=True)
        stmt = parse_statement(text)
        ds = state_from_plain(store)
        src_conds, _ = split_conditions(stmt)
        if len(foreach_keys(MachineState(ds=ds), QueryPredicate(stmt.source.kind, src_conds))) > 4:
            continue
        total += 1
        truth = orders_agree(stmt, ds)
        verdict = check_safety(stmt, ds).verdict
        if not truth:
            unsafe += 1
        if (verdict is Verdict.SAFE) != truth:
            disagreements += 1
            print(f"disagreement: {text} (verdict {verdict.value}, orders agree: {truth})")
    elapsed = time.perf_counter() - t0
    print(
        f"{total} statements, seed {args.seed}: {unsafe} order-dependent, "
        f"{disagreements} disagreements in {elapsed:.1f}s"
    )
    return 1 if disagreements else 0


if __name__ == "__main__":
    raise SystemExit(main())
