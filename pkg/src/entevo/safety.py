"""Pre-execution safety analysis: is a migration order-independent?

A migration is safe when its outcome does not depend on the order in which
entities are processed.  Add, delete, and rename touch each matched entity
exactly once and never read other entities, so they are trivially safe.

Move and copy can write the same target from several sources.  The check
simulates every (source, target) write pair against an immutable snapshot of
the store, recording the value each write would carry for the migrated
property.  A second write to the same target property carrying a different
value means the final store depends on which source is processed last: the
statement is unsafe, and the pair of writes is reported as a witness.  Writes
of equal values are harmless re-writes, and the version counter is excluded:
a target matched by several sources advances its version deterministically.

For a move, the source-side removal is also tracked, as a write of
UNDEFINED.  This catches the overlap case where source and target kinds
coincide and an entity would both receive a value and lose it.

The simulation visits at most (source matches) x (target matches) write
pairs and never mutates the store it inspects.  Because source values and
target sets are taken from the untouched snapshot, the verdict itself is
independent of any iteration order.  A same-kind move/copy that chains values
through intermediate writes can also be flagged through the removal tracking
above; value conditions on re-written properties of the target side are
evaluated against the snapshot, which errs on the conservative side.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

from .language import (
    Add,
    Delete,
    Move,
    Rename,
    Statement,
    StatementValidationError,
    validate_statement,
)
from .migrate import join_attributes, split_conditions
from .model import (
    UNDEFINED,
    Atomic,
    EntityKey,
    MemoryState,
    PropertyValue,
    _Undefined,
    value_equals,
    value_to_plain,
)
from .store import QueryPredicate, eval_predicate


class Verdict(enum.Enum):
    TRIVIALLY_SAFE = "trivially-safe"
    SAFE = "safe"
    UNSAFE = "unsafe"


@dataclass(frozen=True)
class ConflictWitness:
    """Two simulated writes to one target property with different values."""

    target_key: EntityKey
    prop: str
    first_value: PropertyValue | _Undefined
    second_value: PropertyValue | _Undefined
    first_source: EntityKey
    second_source: EntityKey


@dataclass(frozen=True)
class SafetyReport:
    verdict: Verdict
    conflicts: tuple[ConflictWitness, ...] = ()
    simulated_writes: int = 0  # target-side writes visited by the dry run

    def is_safe(self) -> bool:
        return self.verdict is not Verdict.UNSAFE

    def to_json_dict(self) -> dict:
        def plain(value):
            return None if value is UNDEFINED else value_to_plain(value)

        return {
            "verdict": self.verdict.value,
            "simulated_writes": self.simulated_writes,
            "conflicts": [
                {
                    "target": {"kind": w.target_key.kind, "id": w.target_key.id},
                    "property": w.prop,
                    "first_value": plain(w.first_value),
                    "second_value": plain(w.second_value),
                    "first_source": {"kind": w.first_source.kind, "id": w.first_source.id},
                    "second_source": {"kind": w.second_source.kind, "id": w.second_source.id},
                }
                for w in self.conflicts
            ],
        }


def check_safety(stmt: Statement, ds: MemoryState) -> SafetyReport:
    """Decide safety by dry run; the input store is never modified."""
    errors = [d for d in validate_statement(stmt) if d.severity == "error"]
    if errors:
        raise StatementValidationError(errors)
    if isinstance(stmt, (Add, Delete, Rename)):
        return SafetyReport(Verdict.TRIVIALLY_SAFE)

    name = stmt.source.name
    src_conds, tgt_conds = split_conditions(stmt)
    join = join_attributes(stmt)
    source_pred = QueryPredicate(stmt.source.kind, src_conds)
    sources = [k for k in ds if eval_predicate(k, ds[k], source_pred)]
    sources.sort(key=EntityKey.sort_key)

    writes: dict[EntityKey, tuple[PropertyValue | _Undefined, EntityKey]] = {}
    conflicts: list[ConflictWitness] = []
    simulated = 0

    def record(target: EntityKey, value, source: EntityKey) -> None:
        prior = writes.get(target)
        if prior is None:
            writes[target] = (value, source)
        elif not value_equals(prior[0], value):
            conflicts.append(
                ConflictWitness(target, name, prior[0], value, prior[1], source)
            )

    for e in sources:
        value = ds[e].get(name, UNDEFINED)
        atoms = tgt_conds
        targets: list[EntityKey] = []
        runnable = True
        if join is not None:
            join_value = ds[e].get(join[0])
            if not isinstance(join_value, Atomic):
                runnable = False
            else:
                atoms = tgt_conds + ((join[1], join_value),)
        if runnable:
            target_pred = QueryPredicate(stmt.target_kind, atoms)
            targets = [k for k in ds if eval_predicate(k, ds[k], target_pred)]
            targets.sort(key=EntityKey.sort_key)
        for f in targets:
            simulated += 1
            record(f, value, e)
        if isinstance(stmt, Move):
            record(e, UNDEFINED, e)

    verdict = Verdict.UNSAFE if conflicts else Verdict.SAFE
    return SafetyReport(verdict, tuple(conflicts), simulated)


def _show(value: PropertyValue | _Undefined) -> str:
    if value is UNDEFINED:
        return "<removed>"
    return json.dumps(value_to_plain(value), ensure_ascii=False)


def explain_report(report: SafetyReport) -> str:
    """Human-readable summary; unsafe reports list every witness."""
    if report.verdict is Verdict.TRIVIALLY_SAFE:
        return "trivially safe: single-kind operation, order-independent by construction"
    if report.verdict is Verdict.SAFE:
        return f"safe: {report.simulated_writes} simulated writes, no conflicts"
    lines = [
        f"unsafe: {len(report.conflicts)} conflicting write(s) detected "
        f"in {report.simulated_writes} simulated writes"
    ]
    for w in report.conflicts:
        lines.append(
            f"  target {w.target_key!r} property {w.prop!r}: "
            f"{_show(w.first_value)} from {w.first_source!r} "
            f"vs {_show(w.second_value)} from {w.second_source!r}"
        )
    return "\n".join(lines)
