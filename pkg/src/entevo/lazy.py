"""Lazy migration: declarative on-load and on-save rules.

Instead of migrating a whole store in one batch, entities can be transformed
one at a time as the application loads them.  A rule set is plain data, bound
to one entity kind, with three parts:

* ``also_load`` renames: when the loaded entity still carries the old
  property name, its value is copied to the new name and the old name is
  removed (in the application state only; the store keeps the old shape
  until the entity is next saved).
* ``on_load`` guarded actions: each rule has a conjunction of
  has/lacks-property guards and a list of actions, run in order when the
  guard holds.  Actions can set properties (from another property, from a
  constant, or from the entity's own id), remove properties, and spawn a
  sibling entity that inherits the loaded entity's id, optionally persisting
  it immediately.
* ``ignore_save`` names: dropped from the persisted copy whenever the entity
  is saved through ``save_with_rules``; the application-side copy keeps them.

Rule sets load from a JSON document; see ``parse_rules`` for the schema.

A lazy migration should be idempotent, so that re-applying it (after a retry,
or because an already-migrated entity is loaded again) changes nothing.
``check_idempotent`` tests this empirically per store: it applies the load
transform twice in sequence and reports every entity where the second
application still changed something.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from .model import (
    EMPTY_STATE,
    UNDEFINED,
    VERSION,
    Atomic,
    EntevoError,
    EntityKey,
    MemoryState,
    apply_substitution,
    map_update,
    props_to_plain,
)
from .store import (
    MachineState,
    NoSuchEntityError,
    get_by_key,
    get_property,
    has_property,
    new_entity,
    put,
    remove_property,
    set_property,
)


class RulesError(EntevoError):
    """A rules document is malformed or violates a rule-set invariant."""


@dataclass(frozen=True)
class AlsoLoad:
    target: str
    source: str


@dataclass(frozen=True)
class Guard:
    """Single has/lacks test on a property name."""

    name: str
    present: bool


@dataclass(frozen=True)
class SetFromProperty:
    target: str
    source: str


@dataclass(frozen=True)
class SetConstant:
    target: str
    value: Atomic


@dataclass(frozen=True)
class SetFromId:
    target: str


@dataclass(frozen=True)
class Remove:
    name: str


@dataclass(frozen=True)
class Spawn:
    """Create a sibling entity keyed (kind, id of the loaded entity).

    Assignments read from the loaded entity and write to the spawned one;
    nested spawns are not allowed.  With ``persist`` the spawned entity is
    put into the data store immediately (create-or-replace).
    """

    kind: str
    assignments: tuple["Action", ...] = ()
    persist: bool = False


Action = Union[SetFromProperty, SetConstant, SetFromId, Remove, Spawn]


@dataclass(frozen=True)
class GuardedAction:
    guards: tuple[Guard, ...]
    actions: tuple[Action, ...]


@dataclass(frozen=True)
class LazyRuleSet:
    kind: str
    also_load: tuple[AlsoLoad, ...] = ()
    ignore_save: tuple[str, ...] = ()
    on_load: tuple[GuardedAction, ...] = ()

    def __post_init__(self):
        targets = [r.target for r in self.also_load]
        if len(set(targets)) != len(targets):
            raise RulesError("also_load targets must be distinct")
        if len(set(self.ignore_save)) != len(self.ignore_save):
            raise RulesError("ignore_save names must be distinct")
        for name in _all_rule_names(self):
            if name == VERSION:
                raise RulesError(f"rules must not touch the reserved property {VERSION!r}")
        for rule in self.on_load:
            if not rule.actions:
                raise RulesError("a guarded rule must have at least one action")
            for action in rule.actions:
                if isinstance(action, Spawn):
                    if any(isinstance(a, Spawn) for a in action.assignments):
                        raise RulesError("spawn assignments cannot spawn again")


def _all_rule_names(rules: LazyRuleSet):
    for r in rules.also_load:
        yield r.target
        yield r.source
    yield from rules.ignore_save
    for rule in rules.on_load:
        for g in rule.guards:
            yield g.name
        stack = list(rule.actions)
        while stack:
            action = stack.pop()
            if isinstance(action, (SetFromProperty,)):
                yield action.target
                yield action.source
            elif isinstance(action, (SetConstant, SetFromId)):
                yield action.target
            elif isinstance(action, Remove):
                yield action.name
            elif isinstance(action, Spawn):
                stack.extend(action.assignments)


# --- JSON rules documents ----------------------------------------------------
#
# {"kind": str,
#  "alsoLoad":   [{"target": str, "source": str}, ...],
#  "ignoreSave": [str, ...],
#  "onLoad":     [{"if": [{"has": str} | {"lacks": str}, ...],
#                  "do": [{"set": str, "fromProperty": str}
#                         | {"set": str, "const": scalar}
#                         | {"set": str, "fromId": true}
#                         | {"remove": str}
#                         | {"spawn": {"kind": str, "assign": [...],
#                                      "persist": bool}}, ...]}, ...]}


def _parse_action(obj: object, where: str) -> Action:
    if not isinstance(obj, dict):
        raise RulesError(f"{where}: action must be an object")
    if "set" in obj:
        target = _req_str(obj, "set", where)
        if "fromProperty" in obj:
            return SetFromProperty(target, _req_str(obj, "fromProperty", where))
        if "fromId" in obj:
            if obj["fromId"] is not True:
                raise RulesError(f'{where}: "fromId" must be true')
            return SetFromId(target)
        if "const" in obj:
            const = obj["const"]
            if const is None or type(const) not in (str, int, float, bool):
                raise RulesError(f'{where}: "const" must be a scalar')
            return SetConstant(target, Atomic(const))
        raise RulesError(f'{where}: "set" needs "fromProperty", "fromId", or "const"')
    if "remove" in obj:
        return Remove(_req_str(obj, "remove", where))
    if "spawn" in obj:
        spec = obj["spawn"]
        if not isinstance(spec, dict):
            raise RulesError(f'{where}: "spawn" must be an object')
        assignments = tuple(
            _parse_action(a, f"{where}.assign") for a in spec.get("assign", [])
        )
        persist = spec.get("persist", False)
        if not isinstance(persist, bool):
            raise RulesError(f'{where}: "persist" must be a boolean')
        return Spawn(_req_str(spec, "kind", where), assignments, persist)
    raise RulesError(f"{where}: unknown action {sorted(obj)!r}")


def _req_str(obj: dict, key: str, where: str) -> str:
    value = obj.get(key)
    if not isinstance(value, str) or not value:
        raise RulesError(f"{where}: {key!r} must be a non-empty string")
    return value


def parse_rules(doc: object) -> LazyRuleSet:
    if not isinstance(doc, dict):
        raise RulesError("rules document must be a JSON object")
    unknown = set(doc) - {"kind", "alsoLoad", "ignoreSave", "onLoad"}
    if unknown:
        raise RulesError(f"unknown rules fields: {sorted(unknown)}")
    kind = _req_str(doc, "kind", "rules")
    also = []
    for i, entry in enumerate(doc.get("alsoLoad", [])):
        if not isinstance(entry, dict):
            raise RulesError(f"alsoLoad[{i}] must be an object")
        also.append(
            AlsoLoad(_req_str(entry, "target", f"alsoLoad[{i}]"), _req_str(entry, "source", f"alsoLoad[{i}]"))
        )
    ignore = []
    for i, name in enumerate(doc.get("ignoreSave", [])):
        if not isinstance(name, str) or not name:
            raise RulesError(f"ignoreSave[{i}] must be a non-empty string")
        ignore.append(name)
    rules = []
    for i, entry in enumerate(doc.get("onLoad", [])):
        where = f"onLoad[{i}]"
        if not isinstance(entry, dict):
            raise RulesError(f"{where} must be an object")
        guards = []
        for j, g in enumerate(entry.get("if", [])):
            gw = f"{where}.if[{j}]"
            if not isinstance(g, dict) or len(g) != 1:
                raise RulesError(f'{gw}: guard must be {{"has": name}} or {{"lacks": name}}')
            if "has" in g:
                guards.append(Guard(_req_str(g, "has", gw), present=True))
            elif "lacks" in g:
                guards.append(Guard(_req_str(g, "lacks", gw), present=False))
            else:
                raise RulesError(f'{gw}: guard must be {{"has": name}} or {{"lacks": name}}')
        actions = tuple(_parse_action(a, f"{where}.do[{j}]") for j, a in enumerate(entry.get("do", [])))
        rules.append(GuardedAction(tuple(guards), actions))
    return LazyRuleSet(kind, tuple(also), tuple(ignore), tuple(rules))


def load_rules(path: str | Path) -> LazyRuleSet:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except ValueError as exc:
        raise RulesError(f"rules file is not valid JSON: {exc}") from None
    return parse_rules(doc)


# --- applying rules -----------------------------------------------------------


def _check_kind(key: EntityKey, rules: LazyRuleSet) -> None:
    if key.kind != rules.kind:
        raise RulesError(
            f"rule set is for kind {rules.kind!r}, entity {key!r} is {key.kind!r}"
        )


def _run_action(st: MachineState, loaded: EntityKey, target: EntityKey, action: Action) -> MachineState:
    if isinstance(action, SetFromProperty):
        return set_property(st, target, action.target, get_property(st, loaded, action.source))
    if isinstance(action, SetConstant):
        return set_property(st, target, action.target, action.value)
    if isinstance(action, SetFromId):
        return set_property(st, target, action.target, Atomic(loaded.id))
    if isinstance(action, Remove):
        return remove_property(st, target, action.name)
    if isinstance(action, Spawn):
        spawned = EntityKey(action.kind, loaded.id)
        st = new_entity(st, spawned)
        for assignment in action.assignments:
            st = _run_action(st, loaded, spawned, assignment)
        if action.persist:
            st = put(st, spawned)
        return st
    raise RulesError(f"unknown action {action!r}")


def apply_load_transform(st: MachineState, key: EntityKey, rules: LazyRuleSet) -> MachineState:
    """Transform an already-loaded entity in the application state."""
    _check_kind(key, rules)
    for rename in rules.also_load:
        if has_property(st, key, rename.source):
            st = set_property(st, key, rename.target, get_property(st, key, rename.source))
            st = remove_property(st, key, rename.source)
    for rule in rules.on_load:
        if all(has_property(st, key, g.name) == g.present for g in rule.guards):
            for action in rule.actions:
                st = _run_action(st, key, key, action)
    return st


def load_with_rules(st: MachineState, key: EntityKey, rules: LazyRuleSet) -> MachineState:
    """Fetch an entity and run its kind's lazy rules on the loaded copy.

    The loaded entity itself is not written back; its migrated shape reaches
    the store the next time it is saved.  Spawned entities marked persist are
    the only immediate store writes.
    """
    _check_kind(key, rules)
    st = get_by_key(st, key)
    return apply_load_transform(st, key, rules)


def save_with_rules(st: MachineState, key: EntityKey, rules: LazyRuleSet) -> MachineState:
    """Persist the entity, dropping every ignore_save property from the copy.

    The application state keeps the full entity, ignored properties included.
    """
    _check_kind(key, rules)
    if key not in st.app:
        raise NoSuchEntityError(key, "application")
    stripped = st.app[key]
    for name in rules.ignore_save:
        stripped = map_update(stripped, name, UNDEFINED)
    return MachineState(apply_substitution(st.ds, [(key, stripped)]), st.app)


@dataclass(frozen=True)
class IdempotenceWitness:
    """An entity whose second rule application still changed state."""

    key: EntityKey
    first: dict  # plain view: {"entity": props, "store": {key: props}}
    second: dict


def check_idempotent(rules: LazyRuleSet, ds: MemoryState) -> list[IdempotenceWitness]:
    """Apply the load transform twice per entity; report second-pass changes.

    Runs on scratch copies: the input store is never modified.  An empty
    result means the rule set is empirically idempotent on this store.
    Change detection compares model values (type-strict), so a pass that
    only flips a value's type is still caught.
    """
    witnesses = []
    for key in ds.sorted_keys():
        if key.kind != rules.kind:
            continue
        once = load_with_rules(MachineState(ds, EMPTY_STATE), key, rules)
        twice = apply_load_transform(once, key, rules)
        if once.app != twice.app or once.ds != twice.ds:
            witnesses.append(
                IdempotenceWitness(key, _snapshot(once, key), _snapshot(twice, key))
            )
    return witnesses


def _snapshot(st: MachineState, key: EntityKey) -> dict:
    return {
        "entity": props_to_plain(st.app[key]),
        "store": {f"({k.kind}, {k.id!r})": props_to_plain(st.ds[k]) for k in st.ds.sorted_keys()},
    }
