"""Eager migration: executes evolution statements against a machine state.

Each statement runs as a batch over the store: a query loads the matching
entities into the application state, every matched entity is transformed,
its ``version`` counter is incremented (a missing counter counts as 0), and
the entity is persisted back.  Move and copy run a nested loop: for each
source entity, the matching targets are re-queried, with the join condition
instantiated from the source's current join-attribute value, and re-loaded
into the application state before being written.

Degenerate cases execute literally instead of being skipped, so the executor
stays step-for-step equivalent to a naive reference interpretation of the
batch bodies:

* renaming a property the entity does not hold writes an undefined value,
  i.e. removes any existing property under the new name;
* moving/copying a property the source does not hold removes it from the
  matched targets;
* a move whose source matches zero targets still strips and version-bumps
  the source.

The first two append a warning to the result so front-ends can surface them.

Tests can override iteration order through ``key_order`` (applied to every
loop's sorted key snapshot) and interrupt execution after a fixed number of
persists through ``put_limit``; both default to off.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .language import (
    Add,
    Copy,
    Delete,
    Move,
    Rename,
    Statement,
    StatementValidationError,
    validate_statement,
)
from .model import (
    UNDEFINED,
    VERSION,
    Atomic,
    EntityKey,
    PropertyMap,
)
from .store import (
    MachineState,
    QueryPredicate,
    foreach_keys,
    get_property,
    put,
    query,
    remove_property,
    set_property,
)

#: Reorders a loop's key snapshot; depth 0 is the (outer) entity loop,
#: depth 1 the target loop of move/copy.
KeyOrder = Callable[[Sequence[EntityKey], int], Sequence[EntityKey]]


@dataclass(frozen=True)
class PutRecord:
    """One persisted entity: which loop wrote it and the version transition."""

    key: EntityKey
    role: str  # "entity" (add/delete/rename), "target", or "source"
    old_version: int | None  # version previously persisted, if any
    new_version: int | None


@dataclass(frozen=True)
class MigrationResult:
    entities_matched: int
    entities_written: int
    source_entities_modified: int
    final_state: MachineState
    interrupted: bool = False
    safety_waived: bool = False
    warnings: tuple[str, ...] = ()
    log: tuple[PutRecord, ...] = ()


class _Interrupted(Exception):
    pass


class _Run:
    """Mutable execution context threading the state through the loops."""

    def __init__(self, st: MachineState, key_order: KeyOrder | None, put_limit: int | None):
        self.st = st
        self.key_order = key_order
        self.put_limit = put_limit
        self.log: list[PutRecord] = []
        self.warnings: list[str] = []
        self.target_puts = 0
        self.source_puts = 0

    def order(self, keys: Sequence[EntityKey], depth: int) -> Sequence[EntityKey]:
        if self.key_order is None:
            return keys
        reordered = list(self.key_order(keys, depth))
        if sorted(reordered, key=EntityKey.sort_key) != sorted(keys, key=EntityKey.sort_key):
            raise ValueError("key_order must permute the snapshot, not change it")
        return reordered

    def warn(self, message: str) -> None:
        if message not in self.warnings:
            self.warnings.append(message)

    def bump_version(self, key: EntityKey) -> None:
        old = get_property(self.st, key, VERSION)
        new = old.value + 1 if isinstance(old, Atomic) else 1
        self.st = set_property(self.st, key, VERSION, Atomic(new))

    def put(self, key: EntityKey, role: str) -> None:
        if self.put_limit is not None and len(self.log) >= self.put_limit:
            raise _Interrupted
        self.log.append(
            PutRecord(
                key,
                role,
                _stored_version(self.st.ds.get(key)),
                _stored_version(self.st.app.get(key)),
            )
        )
        self.st = put(self.st, key)
        if role == "source":
            self.source_puts += 1
        else:
            self.target_puts += 1


def _stored_version(props: PropertyMap | None) -> int | None:
    if props is None:
        return None
    v = props.get(VERSION)
    return v.value if isinstance(v, Atomic) else None


def split_conditions(stmt: Move | Copy) -> tuple[tuple, tuple]:
    """Route move/copy value conditions to the source and target loops.

    Conditions name the kind they constrain; with identical source and target
    kinds the syntax cannot distinguish the two loops, so every condition
    applies to both.
    """
    src = tuple(
        (c.prop.name, c.value) for c in stmt.conds if c.prop.kind == stmt.source.kind
    )
    tgt = tuple(
        (c.prop.name, c.value) for c in stmt.conds if c.prop.kind == stmt.target_kind
    )
    return src, tgt


def join_attributes(stmt: Move | Copy) -> tuple[str, str] | None:
    """Normalize the join to (source-side attribute, target-side attribute)."""
    join = stmt.join
    if join is None:
        return None
    if join.left.kind == stmt.source.kind:
        return join.left.name, join.right.name
    return join.right.name, join.left.name


def execute(
    stmt: Statement,
    st: MachineState,
    *,
    key_order: KeyOrder | None = None,
    put_limit: int | None = None,
    safety_waived: bool = False,
) -> MigrationResult:
    """Run one statement; the caller is responsible for any safety check."""
    errors = [d for d in validate_statement(stmt) if d.severity == "error"]
    if errors:
        raise StatementValidationError(errors)
    run = _Run(st, key_order, put_limit)
    matched = len(_initial_matches(stmt, st))
    interrupted = False
    try:
        if isinstance(stmt, (Add, Delete, Rename)):
            _exec_single_kind(stmt, run)
        else:
            _exec_move_copy(stmt, run)
    except _Interrupted:
        interrupted = True
    return MigrationResult(
        entities_matched=matched,
        entities_written=run.target_puts,
        source_entities_modified=run.source_puts,
        final_state=run.st,
        interrupted=interrupted,
        safety_waived=safety_waived,
        warnings=tuple(run.warnings),
        log=tuple(run.log),
    )


def _initial_matches(stmt: Statement, st: MachineState) -> tuple[EntityKey, ...]:
    if isinstance(stmt, (Add, Delete, Rename)):
        pred = QueryPredicate(stmt.target.kind, tuple((c.prop.name, c.value) for c in stmt.conds))
    else:
        src, _ = split_conditions(stmt)
        pred = QueryPredicate(stmt.source.kind, src)
    return foreach_keys(st, pred)


def _exec_single_kind(stmt: Add | Delete | Rename, run: _Run) -> None:
    pred = QueryPredicate(stmt.target.kind, tuple((c.prop.name, c.value) for c in stmt.conds))
    run.st, keys = query(run.st, pred)
    name = stmt.target.name
    for e in run.order(keys, 0):
        if isinstance(stmt, Add):
            run.st = set_property(run.st, e, name, stmt.value)
        elif isinstance(stmt, Delete):
            run.st = remove_property(run.st, e, name)
        else:
            value = get_property(run.st, e, name)
            if value is UNDEFINED:
                run.warn(
                    f"rename: {e!r} has no property {name!r}; "
                    f"any existing {stmt.new_name!r} was removed"
                )
            run.st = set_property(run.st, e, stmt.new_name, value)
            run.st = remove_property(run.st, e, name)
        run.bump_version(e)
        run.put(e, "entity")


def _exec_move_copy(stmt: Move | Copy, run: _Run) -> None:
    name = stmt.source.name
    src_conds, tgt_conds = split_conditions(stmt)
    join = join_attributes(stmt)
    run.st, outer = query(run.st, QueryPredicate(stmt.source.kind, src_conds))
    for e in run.order(outer, 0):
        atoms = tgt_conds
        inner: Sequence[EntityKey] = ()
        runnable = True
        if join is not None:
            join_value = get_property(run.st, e, join[0])
            if not isinstance(join_value, Atomic):
                runnable = False  # undefined or non-atomic operand: no targets
            else:
                atoms = tgt_conds + ((join[1], join_value),)
        if runnable:
            run.st, inner = query(run.st, QueryPredicate(stmt.target_kind, atoms))
        for f in run.order(inner, 1):
            value = get_property(run.st, e, name)
            if value is UNDEFINED:
                op = "move" if isinstance(stmt, Move) else "copy"
                run.warn(
                    f"{op}: source {e!r} has no property {name!r}; "
                    f"targets receive a removal instead of a value"
                )
            run.st = set_property(run.st, f, name, value)
            run.bump_version(f)
            run.put(f, "target")
        if isinstance(stmt, Move):
            run.bump_version(e)
            run.st = remove_property(run.st, e, name)
            run.put(e, "source")
