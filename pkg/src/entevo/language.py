"""The declarative evolution language: parsing, validation, formatting.

One statement per parse.  The grammar:

    statement   = add | delete | rename | move | copy
    add         = "add" property "=" literal [selection]
    delete      = "delete" property [selection]
    rename      = "rename" property "to" IDENT [selection]
    move        = "move" property "to" IDENT [complexcond]
    copy        = "copy" property "to" IDENT [complexcond]
    selection   = "where" conds
    complexcond = "where" (joincond | conds | joincond "and" conds)
    joincond    = property "=" property
    conds       = cond {"and" cond}
    cond        = property "=" literal
    property    = IDENT "." IDENT

Lexical rules: identifiers are ``[A-Za-z_][A-Za-z0-9_]*``; the lowercase
keywords ``add delete rename move copy to where and true false`` are reserved;
string literals are double-quoted with JSON escapes; numbers are JSON-style
(a decimal point or exponent makes a float, otherwise a 64-bit integer, and a
leading ``+`` or ``-`` sign is accepted); whitespace is insignificant.

``add`` accepts only scalar literals (no list or nested initializers).
Statements naming the reserved ``version`` property as the evolved property
are rejected, since executing them would make the version bump ill-defined.
A move/copy without a join condition pairs every source with every target;
it parses, but validation attaches a cross-product warning because such
migrations need a safety check before running.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Union

from .model import VERSION, Atomic, EntevoError


class StatementSyntaxError(EntevoError):
    """Lexical or grammatical error, with a 1-based source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Diagnostic:
    """One validation finding; severity is ``error`` or ``warning``.

    Position is 1-based and present when the statement came from text.
    """

    code: str
    message: str
    severity: str = "error"
    line: int | None = None
    col: int | None = None


class StatementValidationError(EntevoError):
    """A parsed statement violates a structural rule."""

    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(d.message for d in diagnostics))
        self.diagnostics = diagnostics


# --- AST --------------------------------------------------------------------


@dataclass(frozen=True)
class PropertyRef:
    kind: str
    name: str
    # source position, ignored by equality so programmatic and reparsed
    # statements compare structurally
    pos: tuple[int, int] | None = field(default=None, compare=False, repr=False)

    def __str__(self) -> str:
        return f"{self.kind}.{self.name}"


@dataclass(frozen=True)
class EqCond:
    prop: PropertyRef
    value: Atomic


@dataclass(frozen=True)
class JoinCond:
    left: PropertyRef
    right: PropertyRef


@dataclass(frozen=True)
class Add:
    target: PropertyRef
    value: Atomic
    conds: tuple[EqCond, ...] = ()


@dataclass(frozen=True)
class Delete:
    target: PropertyRef
    conds: tuple[EqCond, ...] = ()


@dataclass(frozen=True)
class Rename:
    target: PropertyRef
    new_name: str
    conds: tuple[EqCond, ...] = ()


@dataclass(frozen=True)
class Move:
    source: PropertyRef
    target_kind: str
    join: JoinCond | None = None
    conds: tuple[EqCond, ...] = ()


@dataclass(frozen=True)
class Copy:
    source: PropertyRef
    target_kind: str
    join: JoinCond | None = None
    conds: tuple[EqCond, ...] = ()


Statement = Union[Add, Delete, Rename, Move, Copy]

KEYWORDS = frozenset({"add", "delete", "rename", "move", "copy", "to", "where", "and"})

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<string>"(?:\\.|[^"\\])*")
  | (?P<number>[+-]?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<dot>\.)
  | (?P<eq>=)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    type: str  # one of: kw, ident, string, int, float, bool, dot, eq, eof
    text: str
    value: object
    line: int
    col: int


def _lex(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line, col = 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise StatementSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        raw = m.group()
        if kind == "ws":
            pass
        elif kind == "string":
            try:
                value = json.loads(raw)
            except ValueError:
                raise StatementSyntaxError(f"bad string literal {raw}", line, col) from None
            tokens.append(Token("string", raw, value, line, col))
        elif kind == "number":
            if "." in raw or "e" in raw or "E" in raw:
                tokens.append(Token("float", raw, float(raw), line, col))
            else:
                tokens.append(Token("int", raw, int(raw), line, col))
        elif kind == "ident":
            if raw in ("true", "false"):
                tokens.append(Token("bool", raw, raw == "true", line, col))
            elif raw in KEYWORDS:
                tokens.append(Token("kw", raw, raw, line, col))
            else:
                tokens.append(Token("ident", raw, raw, line, col))
        else:
            tokens.append(Token(kind, raw, raw, line, col))
        for ch in raw:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        pos = m.end()
    tokens.append(Token("eof", "", None, line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.i + ahead, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        if tok.type != "eof":
            self.i += 1
        return tok

    def fail(self, expected: str) -> StatementSyntaxError:
        tok = self.peek()
        got = "end of input" if tok.type == "eof" else repr(tok.text)
        return StatementSyntaxError(f"expected {expected}, got {got}", tok.line, tok.col)

    def expect_kw(self, word: str) -> Token:
        tok = self.peek()
        if tok.type == "kw" and tok.value == word:
            return self.advance()
        raise self.fail(f"keyword {word!r}")

    def expect(self, ttype: str, what: str) -> Token:
        tok = self.peek()
        if tok.type == ttype:
            return self.advance()
        raise self.fail(what)

    def identifier(self, what: str) -> str:
        return self.expect("ident", what).value  # keywords are reserved

    def property_ref(self) -> PropertyRef:
        start = self.peek()
        kind = self.identifier("a kind name")
        self.expect("dot", "'.'")
        name = self.identifier("a property name")
        return PropertyRef(kind, name, pos=(start.line, start.col))

    def literal(self) -> Atomic:
        tok = self.peek()
        if tok.type in ("string", "int", "float", "bool"):
            self.advance()
            return Atomic(tok.value)
        raise self.fail("a literal value")

    def at_property(self) -> bool:
        return self.peek().type == "ident" and self.peek(1).type == "dot"

    def eq_cond(self) -> EqCond:
        prop = self.property_ref()
        self.expect("eq", "'='")
        return EqCond(prop, self.literal())

    def selection(self) -> tuple[EqCond, ...]:
        if self.peek().type != "kw" or self.peek().value != "where":
            return ()
        self.advance()
        conds = [self.eq_cond()]
        while self.peek().type == "kw" and self.peek().value == "and":
            self.advance()
            conds.append(self.eq_cond())
        return tuple(conds)

    def complex_cond(self) -> tuple[JoinCond | None, tuple[EqCond, ...]]:
        if self.peek().type != "kw" or self.peek().value != "where":
            return None, ()
        self.advance()
        join: JoinCond | None = None
        conds: list[EqCond] = []
        first = True
        while True:
            prop = self.property_ref()
            self.expect("eq", "'='")
            if self.at_property():
                if not first:
                    tok = self.peek()
                    raise StatementSyntaxError(
                        "a join condition must come before value conditions",
                        tok.line,
                        tok.col,
                    )
                join = JoinCond(prop, self.property_ref())
            else:
                conds.append(EqCond(prop, self.literal()))
            first = False
            if self.peek().type == "kw" and self.peek().value == "and":
                self.advance()
                continue
            return join, tuple(conds)

    def statement(self) -> Statement:
        tok = self.peek()
        if tok.type != "kw" or tok.value not in ("add", "delete", "rename", "move", "copy"):
            raise self.fail("one of add, delete, rename, move, copy")
        op = self.advance().value
        prop = self.property_ref()
        if op == "add":
            self.expect("eq", "'='")
            value = self.literal()
            stmt: Statement = Add(prop, value, self.selection())
        elif op == "delete":
            stmt = Delete(prop, self.selection())
        elif op == "rename":
            self.expect_kw("to")
            stmt = Rename(prop, self.identifier("a property name"), self.selection())
        else:
            self.expect_kw("to")
            kind = self.identifier("a kind name")
            join, conds = self.complex_cond()
            stmt = Move(prop, kind, join, conds) if op == "move" else Copy(prop, kind, join, conds)
        end = self.peek()
        if end.type != "eof":
            raise StatementSyntaxError(
                f"unexpected trailing input {end.text!r}", end.line, end.col
            )
        return stmt


def validate_statement(stmt: Statement) -> list[Diagnostic]:
    """Structural checks beyond the grammar; returns diagnostics as data."""
    diags: list[Diagnostic] = []

    def add(code: str, message: str, at: PropertyRef | None, severity: str = "error"):
        line, col = at.pos if at is not None and at.pos is not None else (None, None)
        diags.append(Diagnostic(code, message, severity, line, col))

    def check_version(name: str, role: str, at: PropertyRef):
        if name == VERSION:
            add("reserved-property", f"reserved property {VERSION!r} cannot be the {role}", at)

    if isinstance(stmt, (Add, Delete, Rename)):
        check_version(stmt.target.name, "evolved property", stmt.target)
        if isinstance(stmt, Rename):
            check_version(stmt.new_name, "new name", stmt.target)
        for cond in stmt.conds:
            if cond.prop.kind != stmt.target.kind:
                add(
                    "selection-kind-mismatch",
                    f"selection condition on {cond.prop} does not match "
                    f"kind {stmt.target.kind!r}",
                    cond.prop,
                )
    else:
        check_version(stmt.source.name, "moved/copied property", stmt.source)
        kinds = {stmt.source.kind, stmt.target_kind}
        for cond in stmt.conds:
            if cond.prop.kind not in kinds:
                add(
                    "selection-kind-mismatch",
                    f"condition on {cond.prop} names neither "
                    f"{stmt.source.kind!r} nor {stmt.target_kind!r}",
                    cond.prop,
                )
        join = stmt.join
        if join is not None:
            if join.left.kind == join.right.kind:
                add("join-same-kind", "join must span two kinds", join.left)
            elif {join.left.kind, join.right.kind} != kinds:
                add(
                    "join-kind-mismatch",
                    f"join {join.left} = {join.right} must relate "
                    f"{stmt.source.kind!r} and {stmt.target_kind!r}",
                    join.left,
                )
        else:
            add(
                "cross-product",
                "cross-product migration: safety check required",
                stmt.source,
                severity="warning",
            )
    return diags


def parse_statement(text: str) -> Statement:
    """Parse and validate one statement; raises on any error diagnostic."""
    stmt = _Parser(_lex(text)).statement()
    errors = [d for d in validate_statement(stmt) if d.severity == "error"]
    if errors:
        raise StatementValidationError(errors)
    return stmt


def format_literal(value: Atomic) -> str:
    v = value.value
    if type(v) is bool:
        return "true" if v else "false"
    if type(v) is str:
        return json.dumps(v, ensure_ascii=False)
    if type(v) is float:
        if not math.isfinite(v):
            raise EntevoError(f"non-finite float {v!r} has no literal form")
        text = repr(v)
        # keep the float/int token distinction through a round-trip
        return text if ("." in text or "e" in text or "E" in text) else text + ".0"
    return str(v)


def format_statement(stmt: Statement) -> str:
    """Canonical text: parsing it back yields a structurally equal statement."""

    def conds_text(conds: tuple[EqCond, ...]) -> list[str]:
        return [f"{c.prop} = {format_literal(c.value)}" for c in conds]

    if isinstance(stmt, Add):
        head = f"add {stmt.target} = {format_literal(stmt.value)}"
        parts = conds_text(stmt.conds)
    elif isinstance(stmt, Delete):
        head = f"delete {stmt.target}"
        parts = conds_text(stmt.conds)
    elif isinstance(stmt, Rename):
        head = f"rename {stmt.target} to {stmt.new_name}"
        parts = conds_text(stmt.conds)
    else:
        op = "move" if isinstance(stmt, Move) else "copy"
        head = f"{op} {stmt.source} to {stmt.target_kind}"
        parts = []
        if stmt.join is not None:
            parts.append(f"{stmt.join.left} = {stmt.join.right}")
        parts.extend(conds_text(stmt.conds))
    if parts:
        return head + " where " + " and ".join(parts)
    return head
