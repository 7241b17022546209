"""Command-line interface for running migrations against store files.

Commands:

* ``exec STATEMENT``  -- safety-check, execute, and rewrite the store.
* ``check STATEMENT`` -- safety verdict only, store untouched.
* ``get KIND [name=value ...]`` -- print matching entities; with ``--rules``
  each entity passes through the lazy on-load transform first and spawned
  persists are written back.
* ``check-lazy --rules FILE`` -- empirical idempotence check of a rule set.
* ``fmt STATEMENT``   -- print the canonical form of a statement.
* ``dump``            -- print the store in normalized form.

Exit codes: 0 success, 2 parse/usage error, 3 unsafe or non-idempotent,
4 I/O error (including a store locked by another process).

Store rewrites are atomic (temp file plus rename), and an advisory lock file
next to the store rejects concurrent invocations on the same store.
"""

from __future__ import annotations

import argparse
import fcntl
import json
import sys
from pathlib import Path

from .language import (
    StatementSyntaxError,
    StatementValidationError,
    parse_statement,
    format_statement,
    validate_statement,
    _lex,
)
from .lazy import RulesError, check_idempotent, load_rules, load_with_rules
from .migrate import execute
from .model import Atomic, EntevoError
from .safety import Verdict, check_safety, explain_report
from .store import (
    MachineState,
    QueryPredicate,
    StoreParseError,
    dump_store,
    format_entity_line,
    format_store_text,
    load_store,
    query,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_UNSAFE = 3
EXIT_IO = 4


class _Locked(Exception):
    pass


class _StoreLock:
    """Advisory per-store lock; a second holder is rejected, not queued."""

    def __init__(self, store_path: Path):
        self.path = Path(str(store_path) + ".lock")
        self.fh = None

    def __enter__(self):
        self.fh = open(self.path, "w")
        try:
            fcntl.flock(self.fh.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError:
            self.fh.close()
            self.fh = None
            raise _Locked(f"store {self.path.name[: -len('.lock')]} is in use by another process")
        return self

    def __exit__(self, *exc):
        if self.fh is not None:
            fcntl.flock(self.fh.fileno(), fcntl.LOCK_UN)
            self.fh.close()
        return False


def _parse_filter(text: str) -> tuple[str, Atomic]:
    name, sep, raw = text.partition("=")
    if not sep or not name:
        raise StatementSyntaxError(f"filter must look like name=value: {text!r}", 1, 1)
    tokens = _lex(raw)
    if len(tokens) == 2 and tokens[0].type in ("string", "int", "float", "bool"):
        return name, Atomic(tokens[0].value)
    if len(tokens) == 2 and tokens[0].type in ("ident", "kw"):
        return name, Atomic(tokens[0].text)  # bare word: a string value
    raise StatementSyntaxError(f"cannot read filter value {raw!r}", 1, 1)


def _emit(doc: dict, output: str) -> None:
    if output == "json":
        print(json.dumps(doc, ensure_ascii=False, sort_keys=True))
    else:
        for line in doc.get("text_lines", []):
            print(line)


def _cmd_exec(args) -> int:
    stmt = parse_statement(args.statement)
    ds = load_store(args.store)
    report = check_safety(stmt, ds)
    if report.verdict is Verdict.UNSAFE and not args.force:
        print(explain_report(report), file=sys.stderr)
        print("refusing to execute; re-run with --force to override", file=sys.stderr)
        return EXIT_UNSAFE
    result = execute(
        stmt, MachineState(ds=ds), safety_waived=report.verdict is Verdict.UNSAFE
    )
    if not args.dry_run:
        dump_store(result.final_state.ds, args.store)
    lines = []
    if result.safety_waived:
        lines.append("warning: executed despite an unsafe verdict (--force)")
    for w in result.warnings:
        lines.append(f"warning: {w}")
    summary = f"matched {result.entities_matched}, written {result.entities_written}"
    if result.source_entities_modified:
        summary += f", sources modified {result.source_entities_modified}"
    if args.dry_run:
        summary += " (dry run, store unchanged)"
    lines.append(summary)
    _emit(
        {
            "command": "exec",
            "statement": format_statement(stmt),
            "safety": report.to_json_dict(),
            "matched": result.entities_matched,
            "written": result.entities_written,
            "sources_modified": result.source_entities_modified,
            "warnings": list(result.warnings),
            "forced": result.safety_waived,
            "dry_run": bool(args.dry_run),
            "text_lines": lines,
        },
        args.output,
    )
    return EXIT_OK


def _cmd_check(args) -> int:
    stmt = parse_statement(args.statement)
    ds = load_store(args.store)
    report = check_safety(stmt, ds)
    doc = report.to_json_dict()
    doc.update(
        {
            "command": "check",
            "statement": format_statement(stmt),
            "text_lines": explain_report(report).splitlines(),
        }
    )
    _emit(doc, args.output)
    return EXIT_OK if report.is_safe() else EXIT_UNSAFE


def _cmd_get(args) -> int:
    ds = load_store(args.store)
    atoms = tuple(_parse_filter(f) for f in args.filter)
    st, keys = query(MachineState(ds=ds), QueryPredicate(args.kind, atoms))
    if args.rules:
        rules = load_rules(args.rules)
        for key in keys:
            st = load_with_rules(st, key, rules)
        if st.ds != ds:
            dump_store(st.ds, args.store)
    for key in keys:
        print(format_entity_line(key, st.app[key]))
    return EXIT_OK


def _cmd_check_lazy(args) -> int:
    ds = load_store(args.store)
    rules = load_rules(args.rules)
    witnesses = check_idempotent(rules, ds)
    if args.output == "json":
        print(
            json.dumps(
                {
                    "command": "check-lazy",
                    "idempotent": not witnesses,
                    "witnesses": [
                        {
                            "key": {"kind": w.key.kind, "id": w.key.id},
                            "first": w.first,
                            "second": w.second,
                        }
                        for w in witnesses
                    ],
                },
                ensure_ascii=False,
                sort_keys=True,
            )
        )
    else:
        if not witnesses:
            print("idempotent: second application changed nothing")
        for w in witnesses:
            print(f"not idempotent at {w.key!r}:")
            _print_diff(w.first, w.second)
    return EXIT_OK if not witnesses else EXIT_UNSAFE


def _print_diff(first: dict, second: dict) -> None:
    for part in ("entity", "store"):
        a, b = first[part], second[part]
        if a == b:
            continue
        for name in sorted(set(a) | set(b)):
            if a.get(name) != b.get(name):
                print(
                    f"  {part}.{name}: {json.dumps(a.get(name), ensure_ascii=False)}"
                    f" -> {json.dumps(b.get(name), ensure_ascii=False)}"
                )


def _cmd_fmt(args) -> int:
    stmt = parse_statement(args.statement)
    for d in validate_statement(stmt):
        if d.severity == "warning":
            print(f"warning: {d.message}", file=sys.stderr)
    print(format_statement(stmt))
    return EXIT_OK


def _cmd_dump(args) -> int:
    ds = load_store(args.store)
    sys.stdout.write(format_store_text(ds))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entevo", description="schema evolution for schema-less entity stores"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, store=True):
        if store:
            p.add_argument("--store", required=True, help="store file (JSON lines)")
        p.add_argument("--output", choices=("text", "json"), default="text")

    p = sub.add_parser("exec", help="safety-check and execute a statement")
    common(p)
    p.add_argument("statement")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--force", action="store_true", help="execute even if unsafe")
    mode.add_argument(
        "--dry-run", action="store_true", help="execute in memory, leave the store file unchanged"
    )
    p.set_defaults(fn=_cmd_exec, needs_lock=True)

    p = sub.add_parser("check", help="report the safety verdict without executing")
    common(p)
    p.add_argument("statement")
    p.set_defaults(fn=_cmd_check, needs_lock=True)

    p = sub.add_parser("get", help="print matching entities (optionally lazily migrated)")
    common(p)
    p.add_argument("kind")
    p.add_argument("filter", nargs="*", help="equality filters, name=value")
    p.add_argument("--rules", help="lazy rules file applied to each loaded entity")
    p.set_defaults(fn=_cmd_get, needs_lock=True)

    p = sub.add_parser("check-lazy", help="check a lazy rule set for idempotence")
    common(p)
    p.add_argument("--rules", required=True)
    p.set_defaults(fn=_cmd_check_lazy, needs_lock=True)

    p = sub.add_parser("fmt", help="print the canonical form of a statement")
    common(p, store=False)
    p.add_argument("statement")
    p.set_defaults(fn=_cmd_fmt, needs_lock=False)

    p = sub.add_parser("dump", help="print the store in normalized form")
    common(p)
    p.set_defaults(fn=_cmd_dump, needs_lock=True)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.needs_lock:
            with _StoreLock(Path(args.store)):
                return args.fn(args)
        return args.fn(args)
    except (StatementSyntaxError, StatementValidationError, StoreParseError, RulesError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except _Locked as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except EntevoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
