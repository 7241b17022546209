"""Executable store semantics: entity manipulation, queries, persistence.

A machine state pairs two memory states: ``ds``, the persisted data-store
side, and ``app``, the in-application working set.  Creation and property
manipulation touch only ``app``; ``put``/``delete_entity`` touch only ``ds``;
``get_by_key`` and ``query`` copy entities from ``ds`` into ``app``.  All
operations are pure and return a new ``MachineState``; because the underlying
values are immutable, the two sides can never alias each other's contents.

Queries are conjunctions of equality atoms over one kind.  An atom is true
when the named property holds an equal atomic value, or is multi-valued and
contains the value; it is false when the name is absent, the value is nested,
or the types mismatch.

Persistence uses a line-oriented UTF-8 format, one JSON object per entity:
``{"kind": str, "id": str|int, "props": {...}}``.  JSON null is rejected
everywhere, and ``version`` must be a non-negative integer wherever present.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .model import (
    EMPTY_PROPS,
    EMPTY_STATE,
    UNDEFINED,
    Atomic,
    EntevoError,
    EntityKey,
    InvalidValueError,
    MemoryState,
    MultiValued,
    Nested,
    PropertyMap,
    PropertyValue,
    _Undefined,
    apply_substitution,
    map_update,
    value_equals,
    value_from_plain,
)


class NoSuchEntityError(EntevoError):
    """An operation addressed a key missing from the required state side."""

    def __init__(self, key: EntityKey, side: str):
        super().__init__(f"no entity {key!r} in {side} state")
        self.key = key
        self.side = side


class StoreParseError(EntevoError):
    """A store file line failed to parse or violated the format."""

    def __init__(self, message: str, line_no: int | None = None):
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(prefix + message)
        self.line_no = line_no


class DuplicateKeyError(StoreParseError):
    """Two store file lines carry the same entity key."""

    def __init__(self, key: EntityKey, line_no: int):
        super().__init__(f"duplicate entity key {key!r}", line_no)
        self.key = key


@dataclass(frozen=True)
class MachineState:
    """Pair of data-store state (``ds``) and application state (``app``)."""

    ds: MemoryState = EMPTY_STATE
    app: MemoryState = EMPTY_STATE


@dataclass(frozen=True)
class QueryPredicate:
    """Conjunctive equality query over one kind.

    ``atoms`` pairs property names with atomic values; an empty tuple matches
    every entity of the kind.
    """

    kind: str
    atoms: tuple[tuple[str, Atomic], ...] = ()


# --- creation and manipulation (application side only) ---------------------


def new_entity(st: MachineState, key: EntityKey) -> MachineState:
    """Create an empty entity in the application state (create-or-replace)."""
    return MachineState(st.ds, apply_substitution(st.app, [(key, EMPTY_PROPS)]))


def new_entity_with(st: MachineState, key: EntityKey, props: PropertyMap) -> MachineState:
    """Create an entity with initial properties in the application state."""
    return MachineState(st.ds, apply_substitution(st.app, [(key, props)]))


def set_property(
    st: MachineState,
    key: EntityKey,
    name: str,
    value: PropertyValue | EntityKey | _Undefined,
) -> MachineState:
    """Set (or, with UNDEFINED, remove) a property on an app-side entity.

    Passing another app-side entity key as ``value`` stores a nested snapshot
    of that entity's properties at call time; later changes to either entity
    do not propagate to the other.
    """
    if key not in st.app:
        raise NoSuchEntityError(key, "application")
    if isinstance(value, EntityKey):
        if value not in st.app:
            raise NoSuchEntityError(value, "application")
        value = Nested(st.app[value])
    props = map_update(st.app[key], name, value)
    return MachineState(st.ds, apply_substitution(st.app, [(key, props)]))


def remove_property(st: MachineState, key: EntityKey, name: str) -> MachineState:
    """Remove a property from an app-side entity (absent name: no-op)."""
    if key not in st.app:
        raise NoSuchEntityError(key, "application")
    props = map_update(st.app[key], name, UNDEFINED)
    return MachineState(st.ds, apply_substitution(st.app, [(key, props)]))


def get_property(st: MachineState, key: EntityKey, name: str) -> PropertyValue | _Undefined:
    """Read a property from an app-side entity; UNDEFINED when unmapped."""
    if key not in st.app:
        raise NoSuchEntityError(key, "application")
    return st.app[key].get(name, UNDEFINED)


def has_property(st: MachineState, key: EntityKey, name: str) -> bool:
    """True iff the app-side entity maps the given name."""
    if key not in st.app:
        raise NoSuchEntityError(key, "application")
    return name in st.app[key]


# --- persistence side -------------------------------------------------------


def put(st: MachineState, key: EntityKey) -> MachineState:
    """Persist the app-side entity into ds, replacing any prior entry."""
    if key not in st.app:
        raise NoSuchEntityError(key, "application")
    return MachineState(apply_substitution(st.ds, [(key, st.app[key])]), st.app)


def delete_entity(st: MachineState, key: EntityKey) -> MachineState:
    """Remove the key from ds; the application state is untouched."""
    return MachineState(apply_substitution(st.ds, [(key, UNDEFINED)]), st.app)


def get_by_key(st: MachineState, key: EntityKey) -> MachineState:
    """Load one entity from ds into the application state."""
    if key not in st.ds:
        raise NoSuchEntityError(key, "data store")
    return MachineState(st.ds, apply_substitution(st.app, [(key, st.ds[key])]))


# --- queries ----------------------------------------------------------------


def eval_atom(props: PropertyMap, name: str, value: Atomic) -> bool:
    """Equality atom on one entity; absent names and nested values are false."""
    held = props.get(name)
    if held is None:
        return False
    if isinstance(held, Atomic):
        return value_equals(held, value)
    if isinstance(held, MultiValued):
        return any(value_equals(item, value) for item in held.items)
    return False


def eval_predicate(key: EntityKey, props: PropertyMap, pred: QueryPredicate) -> bool:
    """Kind check plus the conjunction of all atoms."""
    if key.kind != pred.kind:
        return False
    return all(eval_atom(props, name, value) for name, value in pred.atoms)


def query(st: MachineState, pred: QueryPredicate) -> tuple[MachineState, tuple[EntityKey, ...]]:
    """Load every matching ds entity into the application state.

    Returns the updated state and the matched keys, sorted by kind then id
    (integer ids before string ids).
    """
    matches = [(k, st.ds[k]) for k in st.ds if eval_predicate(k, st.ds[k], pred)]
    matches.sort(key=lambda kv: kv[0].sort_key())
    app = apply_substitution(st.app, matches)
    return MachineState(st.ds, app), tuple(k for k, _ in matches)


def foreach_keys(st: MachineState, pred: QueryPredicate) -> tuple[EntityKey, ...]:
    """Snapshot of the keys a query would match, in deterministic order.

    The snapshot is taken against the current ds; entities inserted later do
    not join an iteration that started from this snapshot.
    """
    keys = [k for k in st.ds if eval_predicate(k, st.ds[k], pred)]
    keys.sort(key=EntityKey.sort_key)
    return tuple(keys)


# --- store files ------------------------------------------------------------

_LINE_FIELDS = {"kind", "id", "props"}


def _reject_constant(token: str):
    raise ValueError(f"non-finite number {token} is not allowed")


def _value_from_json(obj: object, line_no: int, where: str) -> PropertyValue:
    if obj is None:
        raise StoreParseError(f"null is not allowed ({where})", line_no)
    if isinstance(obj, list):
        for item in obj:
            if item is None or isinstance(item, (list, dict)):
                raise StoreParseError(
                    f"lists may only contain scalars ({where})", line_no
                )
        if not obj:
            raise StoreParseError(f"empty list is not a value ({where})", line_no)
    try:
        return value_from_plain(obj)
    except InvalidValueError as exc:
        raise StoreParseError(f"{exc} ({where})", line_no) from None


def _props_from_json(obj: object, line_no: int) -> PropertyMap:
    if not isinstance(obj, dict):
        raise StoreParseError("props must be a JSON object", line_no)

    def build(d: dict, path: str) -> PropertyMap:
        out = {}
        for name, raw in d.items():
            where = f"property {path}{name}"
            if isinstance(raw, dict):
                value: PropertyValue = Nested(build(raw, f"{path}{name}."))
            else:
                value = _value_from_json(raw, line_no, where)
            out[name] = value
        try:
            return PropertyMap(out)
        except InvalidValueError as exc:
            raise StoreParseError(str(exc), line_no) from None

    return build(obj, "")


def parse_store_line(line: str, line_no: int) -> tuple[EntityKey, PropertyMap]:
    try:
        obj = json.loads(line, parse_constant=_reject_constant)
    except ValueError as exc:
        raise StoreParseError(f"invalid JSON: {exc}", line_no) from None
    if not isinstance(obj, dict) or set(obj) != _LINE_FIELDS:
        raise StoreParseError(
            'entity line must be an object with exactly "kind", "id", "props"', line_no
        )
    kind, ident = obj["kind"], obj["id"]
    if type(kind) is not str or not kind:
        raise StoreParseError("kind must be a non-empty string", line_no)
    if type(ident) is bool or type(ident) not in (str, int):
        raise StoreParseError("id must be a string or integer", line_no)
    try:
        key = EntityKey(kind, ident)
    except InvalidValueError as exc:
        raise StoreParseError(str(exc), line_no) from None
    return key, _props_from_json(obj["props"], line_no)


def parse_store_text(text: str) -> MemoryState:
    entries: dict[EntityKey, PropertyMap] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        key, props = parse_store_line(line, line_no)
        if key in entries:
            raise DuplicateKeyError(key, line_no)
        entries[key] = props
    return MemoryState(entries)


def _plain_sorted(props: PropertyMap) -> dict:
    out = {}
    for name in sorted(props):
        value = props[name]
        if isinstance(value, Nested):
            out[name] = _plain_sorted(value.props)
        elif isinstance(value, MultiValued):
            out[name] = [item.value for item in value.items]
        else:
            out[name] = value.value
    return out


def format_entity_line(key: EntityKey, props: PropertyMap) -> str:
    return json.dumps(
        {"kind": key.kind, "id": key.id, "props": _plain_sorted(props)},
        ensure_ascii=False,
        separators=(",", ":"),
        allow_nan=False,
    )


def format_store_text(ds: MemoryState) -> str:
    lines = [format_entity_line(k, ds[k]) for k in ds.sorted_keys()]
    return "".join(line + "\n" for line in lines)


def load_store(path: str | Path) -> MemoryState:
    return parse_store_text(Path(path).read_text(encoding="utf-8"))


def dump_store(ds: MemoryState, path: str | Path) -> None:
    """Write the store atomically: temp file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(format_store_text(ds))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
