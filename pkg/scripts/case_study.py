#!/usr/bin/env python3
"""Walk the blogging case study end to end, printing before/after tables.

Each step builds a small store, runs one evolution statement through the full
pipeline (parse, safety check, execute), and prints the affected entities so
the version bookkeeping is visible.
"""

from __future__ import annotations

from entevo import (
    MachineState,
    check_safety,
    execute,
    parse_statement,
    state_from_plain,
    state_to_plain,
)
from entevo.safety import explain_report


def show(title: str, store: dict) -> None:
    print(f"  {title}:")
    for (kind, ident), props in sorted(store.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
        print(f"    ({kind}, {ident})")
        for name in sorted(props):
            print(f"      {name:<10} {props[name]!r}")


def step(text: str, store: dict) -> dict:
    print(f"\n== {text}")
    stmt = parse_statement(text)
    ds = state_from_plain(store)
    report = check_safety(stmt, ds)
    print(f"  safety: {explain_report(report)}")
    result = execute(stmt, MachineState(ds=ds))
    show("before", store)
    after = state_to_plain(result.final_state.ds)
    show("after", after)
    for w in result.warnings:
        print(f"  warning: {w}")
    print(
        f"  matched {result.entities_matched}, written {result.entities_written}"
        + (f", sources modified {result.source_entities_modified}"
           if result.source_entities_modified else "")
    )
    return after


def main() -> None:
    blogpost = {
        "title": "NoSQL Data Modeling Techniques",
        "content": "NoSQL databases are often schema-less",
        "author": "Gerhard",
        "version": 1,
    }
    user = {
        "name": "Gerhard",
        "email": "gerhard@acm.org",
        "status": "professional",
        "url": "http://bigdata.org",
        "version": 1,
    }

    step("add blogpost.likes = 0", {("blogpost", 331175): dict(blogpost)})
    step(
        "delete blogpost.url",
        {("blogpost", 331175): {**blogpost, "url": "www.mypage.com"}},
    )
    step(
        "rename blogpost.text to content",
        {("blogpost", 331175): {k: v for k, v in blogpost.items() if k != "content"}
         | {"text": blogpost["content"]}},
    )
    step(
        "move user.url to blogpost where user.name = blogpost.author",
        {("user", 1234): dict(user), ("blogpost", 331175): dict(blogpost)},
    )
    step(
        "copy user.email to blogpost where user.name = blogpost.author",
        {
            ("user", 1234): {k: v for k, v in user.items() if k != "url"},
            ("blogpost", 331175): dict(blogpost),
        },
    )

    # the canonical unsafe statement: two users race for the same blogposts
    print("\n== copy user.url to blogpost  (cross product)")
    ds = state_from_plain(
        {
            ("user", 1): {"url": "http://a", "version": 1},
            ("user", 2): {"url": "http://b", "version": 1},
            ("blogpost", 1): {"version": 1},
        }
    )
    report = check_safety(parse_statement("copy user.url to blogpost"), ds)
    print(explain_report(report))


if __name__ == "__main__":
    main()
