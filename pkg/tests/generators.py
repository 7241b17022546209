"""Seeded random stores and statements for the equivalence/safety suites.

Everything is produced in plain form: stores as ``{(kind, id): props}`` and
statements as description dicts (the oracle's input format) paired with the
statement text (the engine's input).  Using one description to derive both
keeps the two execution paths honest: the text goes through the real lexer
and parser, the description through the naive interpreter.
"""

from __future__ import annotations

import json
import random

KINDS = ["user", "blogpost", "comment"]
PROP_POOL = [
    "title",
    "content",
    "author",
    "date",
    "likes",
    "url",
    "email",
    "login",
    "name",
    "status",
    "rating",
    "city",
]
JOIN_POOL = ["name", "author", "login", "owner"]
STRING_POOL = ["Gerhard", "Meike", "Uta", "alpha", "beta", "x"]


def gen_scalar(rng: random.Random):
    pick = rng.random()
    if pick < 0.40:
        return rng.choice(STRING_POOL)
    if pick < 0.70:
        return rng.randint(-3, 9)
    if pick < 0.85:
        return rng.choice([0.5, -0.25, 2.0, 3.75])
    return rng.choice([True, False])


def gen_value(rng: random.Random):
    pick = rng.random()
    if pick < 0.75:
        return gen_scalar(rng)
    if pick < 0.90:
        return [gen_scalar(rng) for _ in range(rng.randint(1, 3))]
    return {rng.choice(PROP_POOL): gen_scalar(rng) for _ in range(rng.randint(1, 2))}


def gen_store(rng: random.Random, max_entities: int = 50) -> dict:
    store: dict = {}
    for _ in range(rng.randint(0, max_entities)):
        kind = rng.choice(KINDS)
        ident = rng.randint(1, 9) if rng.random() < 0.7 else rng.choice(["a", "b", "c"])
        if (kind, ident) in store:
            continue
        props = {
            name: gen_value(rng)
            for name in rng.sample(PROP_POOL, rng.randint(1, 5))
        }
        if rng.random() < 0.85:
            props["version"] = rng.choice([1, 1, 1, 2])
        store[(kind, ident)] = props
    return store


def _literal(value) -> str:
    if type(value) is bool:
        return "true" if value else "false"
    if type(value) is str:
        return json.dumps(value, ensure_ascii=False)
    if type(value) is float:
        text = repr(value)
        return text if ("." in text or "e" in text or "E" in text) else text + ".0"
    return str(value)


def _gen_conds(rng: random.Random, n: int) -> list:
    conds = []
    for _ in range(n):
        if rng.random() < 0.5:
            conds.append(("version", rng.choice([1, 2])))
        else:
            conds.append((rng.choice(PROP_POOL), gen_scalar(rng)))
    return conds


def _pick_kind(rng: random.Random, store: dict) -> str:
    present = sorted({k for k, _ in store})
    if present and rng.random() < 0.85:
        return rng.choice(present)
    return rng.choice(KINDS)


def _pick_prop(rng: random.Random, store: dict, kind: str) -> str:
    held = sorted(
        {name for (k, _), props in store.items() if k == kind for name in props}
        - {"version"}
    )
    if held and rng.random() < 0.7:
        return rng.choice(held)
    return rng.choice(PROP_POOL)


def gen_adr(rng: random.Random, store: dict) -> tuple[dict, str]:
    op = rng.choice(["add", "delete", "rename"])
    kind = _pick_kind(rng, store)
    prop = _pick_prop(rng, store, kind)
    conds = _gen_conds(rng, rng.randint(0, 2))
    desc = {"op": op, "kind": kind, "prop": prop, "conds": conds}
    text = f"{op} {kind}.{prop}"
    if op == "add":
        desc["value"] = gen_scalar(rng)
        text += f" = {_literal(desc['value'])}"
    elif op == "rename":
        desc["new_name"] = rng.choice([p for p in PROP_POOL if p != prop])
        text += f" to {desc['new_name']}"
    if conds:
        text += " where " + " and ".join(f"{kind}.{n} = {_literal(v)}" for n, v in conds)
    return desc, text


def gen_move_copy(
    rng: random.Random, store: dict, *, safety_corpus: bool = False
) -> tuple[dict, str]:
    """Random move/copy.

    With ``safety_corpus`` the statement stays in the class where the
    dry-run verdict coincides exactly with exhaustive order-independence:
    distinct kinds, and the join never lands on the migrated property or the
    version counter.  Without it, anything valid goes (including same-kind
    cross products), which is what the executor/oracle equivalence wants.
    """
    op = rng.choice(["move", "copy"])
    c1 = _pick_kind(rng, store)
    if safety_corpus or rng.random() < 0.9:
        c2 = rng.choice([k for k in KINDS if k != c1])
    else:
        c2 = c1
    prop = _pick_prop(rng, store, c1)
    join = None
    join_p = 0.5 if safety_corpus else 0.75
    if c1 != c2 and rng.random() < join_p:
        src_attr = rng.choice(JOIN_POOL)
        tgt_attr = rng.choice([a for a in JOIN_POOL if not safety_corpus or a != prop])
        join = (src_attr, tgt_attr)
    if c1 == c2:
        conds = _gen_conds(rng, rng.randint(0, 1))
        source_conds = target_conds = conds
        cond_texts = [f"{c1}.{n} = {_literal(v)}" for n, v in conds]
    else:
        source_conds = _gen_conds(rng, rng.randint(0, 1))
        target_conds = _gen_conds(rng, rng.randint(0, 1))
        cond_texts = [f"{c1}.{n} = {_literal(v)}" for n, v in source_conds]
        cond_texts += [f"{c2}.{n} = {_literal(v)}" for n, v in target_conds]
    desc = {
        "op": op,
        "source_kind": c1,
        "target_kind": c2,
        "prop": prop,
        "join": join,
        "source_conds": source_conds,
        "target_conds": target_conds,
    }
    parts = []
    if join is not None:
        parts.append(f"{c1}.{join[0]} = {c2}.{join[1]}")
    parts.extend(cond_texts)
    text = f"{op} {c1}.{prop} to {c2}"
    if parts:
        text += " where " + " and ".join(parts)
    return desc, text


def gen_statement(rng: random.Random, store: dict) -> tuple[dict, str]:
    if rng.random() < 0.6:
        return gen_adr(rng, store)
    return gen_move_copy(rng, store)


def is_fully_version_guarded(desc: dict) -> bool:
    """True when every kind the statement writes carries a version guard.

    Such statements skip already-migrated entities on a re-run, which is what
    makes interrupted executions recoverable.
    """
    if desc["op"] in ("add", "delete", "rename"):
        return any(n == "version" for n, _ in desc["conds"])
    target_guarded = any(n == "version" for n, _ in desc["target_conds"])
    if desc["op"] == "copy":
        return target_guarded
    return target_guarded and any(n == "version" for n, _ in desc["source_conds"])


def shuffle_order(seed: int):
    """Deterministic permutation hook usable by both engine and oracle."""

    def order(keys, depth):
        keys = list(keys)
        random.Random(seed * 1000003 + depth * 101 + len(keys)).shuffle(keys)
        return keys

    return order
