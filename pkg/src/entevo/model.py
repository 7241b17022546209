"""Value model and update calculus for schema-less entity stores.

Entities are addressed by a key (a kind plus an id) and carry a finite map
from property names to property values.  A value is either atomic (text,
signed 64-bit integer, 64-bit float, or boolean), an ordered list of atomics,
or a nested property map.  Absence of a property is modeled by the name being
unmapped; the distinct ``UNDEFINED`` marker is accepted by update operations
to request removal and never appears inside stored values.

Equality is exact across the model: there is no cross-type coercion, so the
integer ``0``, the float ``0.0``, the boolean ``false``, and the string
``"0"`` are four different values.  Float comparison is bitwise (``-0.0``
differs from ``0.0``) except that NaN never equals NaN.

Everything here is immutable after construction.  Updates return new values,
which makes sharing across states (and threads) safe without copying.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Union

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

#: Property name with reserved semantics: integer schema-version counter.
VERSION = "version"


class EntevoError(Exception):
    """Base class for all errors raised by this package."""


class InvalidValueError(EntevoError):
    """A value, property map, or key violates a model invariant."""


class InvalidSubstitutionError(EntevoError):
    """A substitution binds the same key more than once."""


class _Undefined:
    """Singleton removal/absence marker (never stored, only passed around)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNDEFINED"


UNDEFINED = _Undefined()

AtomicPy = Union[str, int, float, bool]


def _float_eq(a: float, b: float) -> bool:
    # bitwise-exact: distinguishes -0.0 from 0.0; NaN never equals NaN
    if math.isnan(a) or math.isnan(b):
        return False
    return a == b and math.copysign(1.0, a) == math.copysign(1.0, b)


@dataclass(frozen=True, eq=False)
class Atomic:
    """Single atomic value: str, int64, float, or bool."""

    value: AtomicPy

    def __post_init__(self):
        v = self.value
        if type(v) is bool or type(v) is str or type(v) is float:
            return
        if type(v) is int:
            if not (INT64_MIN <= v <= INT64_MAX):
                raise InvalidValueError(f"integer out of 64-bit range: {v}")
            return
        raise InvalidValueError(f"not an atomic value: {v!r} ({type(v).__name__})")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Atomic):
            return NotImplemented
        a, b = self.value, other.value
        if type(a) is not type(b):
            return False
        if type(a) is float:
            return _float_eq(a, b)
        return a == b

    def __hash__(self) -> int:
        return hash((type(self.value).__name__, repr(self.value)))

    def __repr__(self) -> str:
        return f"Atomic({self.value!r})"


@dataclass(frozen=True)
class MultiValued:
    """Ordered, non-empty list of atomics. Order and duplicates matter."""

    items: tuple[Atomic, ...]

    def __post_init__(self):
        if not self.items:
            raise InvalidValueError("multi-valued property must hold at least one item")
        for item in self.items:
            if not isinstance(item, Atomic):
                raise InvalidValueError(
                    f"multi-valued items must be atomic, got {type(item).__name__}"
                )


@dataclass(frozen=True)
class Nested:
    """A nested entity value: a full property map."""

    props: "PropertyMap"

    def __post_init__(self):
        if not isinstance(self.props, PropertyMap):
            raise InvalidValueError("nested value must wrap a PropertyMap")


PropertyValue = Union[Atomic, MultiValued, Nested]


def _check_property(name: str, value: PropertyValue) -> None:
    if type(name) is not str or not name:
        raise InvalidValueError(f"property name must be a non-empty string, got {name!r}")
    if not isinstance(value, (Atomic, MultiValued, Nested)):
        raise InvalidValueError(
            f"property {name!r} has a non-value payload: {type(value).__name__}"
        )
    if name == VERSION:
        if not (isinstance(value, Atomic) and type(value.value) is int and value.value >= 0):
            raise InvalidValueError(
                f"reserved property {VERSION!r} must be an integer >= 0, got {value!r}"
            )


class PropertyMap(Mapping):
    """Immutable finite mapping from property names to property values."""

    __slots__ = ("_props",)

    def __init__(self, props: Mapping[str, PropertyValue] | Iterable[tuple[str, PropertyValue]] = ()):
        d = dict(props)
        for name, value in d.items():
            _check_property(name, value)
        object.__setattr__(self, "_props", d)

    def __getitem__(self, name: str) -> PropertyValue:
        return self._props[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._props)

    def __len__(self) -> int:
        return len(self._props)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PropertyMap):
            return NotImplemented
        return self._props == other._props

    __hash__ = None  # mutable-dict semantics for equality; not hashable

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}: {v!r}" for n, v in self._props.items())
        return f"PropertyMap({{{inner}}})"


EMPTY_PROPS = PropertyMap()


def map_update(props: PropertyMap, name: str, value: PropertyValue | _Undefined) -> PropertyMap:
    """Create-or-replace a single property; UNDEFINED removes the name.

    Removing an absent name is a no-op.  The input map is never modified.
    """
    if type(name) is not str or not name:
        raise InvalidValueError(f"property name must be a non-empty string, got {name!r}")
    d = dict(props)
    if value is UNDEFINED:
        d.pop(name, None)
    else:
        d[name] = value
    return PropertyMap(d)


@dataclass(frozen=True)
class EntityKey:
    """Unique entity address: kind groups entities, id distinguishes them.

    Ids are either strings or 64-bit integers, and the two namespaces are
    disjoint: ``(user, 1)`` and ``(user, "1")`` are different keys.
    """

    kind: str
    id: int | str

    def __post_init__(self):
        if type(self.kind) is not str or not self.kind:
            raise InvalidValueError(f"entity kind must be a non-empty string, got {self.kind!r}")
        i = self.id
        if type(i) is str:
            return
        if type(i) is int and not isinstance(i, bool):
            if not (INT64_MIN <= i <= INT64_MAX):
                raise InvalidValueError(f"entity id out of 64-bit range: {i}")
            return
        raise InvalidValueError(f"entity id must be a string or integer, got {i!r}")

    def sort_key(self) -> tuple:
        # integer ids order before string ids within a kind
        tag = 0 if type(self.id) is int else 1
        return (self.kind, tag, self.id)

    def __repr__(self) -> str:
        return f"({self.kind}, {self.id!r})"


Substitution = Iterable[tuple[EntityKey, Union[PropertyMap, _Undefined]]]


class MemoryState(Mapping):
    """Immutable finite mapping from entity keys to property maps.

    Used both for the persisted data-store side and for the in-application
    working set.  Keys are unique; there is no stored "undefined" value, so
    applying a removal simply drops the key.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries: Mapping[EntityKey, PropertyMap] | Iterable[tuple[EntityKey, PropertyMap]] = ()):
        d = dict(entries)
        for key, props in d.items():
            if not isinstance(key, EntityKey):
                raise InvalidValueError(f"memory state key must be an EntityKey, got {key!r}")
            if not isinstance(props, PropertyMap):
                raise InvalidValueError(f"memory state value must be a PropertyMap, got {props!r}")
        object.__setattr__(self, "_entries", d)

    def __getitem__(self, key: EntityKey) -> PropertyMap:
        return self._entries[key]

    def __iter__(self) -> Iterator[EntityKey]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MemoryState):
            return NotImplemented
        return self._entries == other._entries

    __hash__ = None

    def __repr__(self) -> str:
        inner = ", ".join(f"{k!r} -> {v!r}" for k, v in self._entries.items())
        return f"MemoryState({{{inner}}})"

    def sorted_keys(self) -> list[EntityKey]:
        return sorted(self._entries, key=EntityKey.sort_key)


EMPTY_STATE = MemoryState()


def apply_substitution(ms: MemoryState, subst: Substitution) -> MemoryState:
    """Update a memory state by a substitution, create-or-replace style.

    Each ``(key, props)`` binding replaces whatever the state held for that
    key; a ``(key, UNDEFINED)`` binding removes the key.  Keys not mentioned
    are untouched.  A key bound twice in one substitution is an error.
    """
    bindings = list(subst)
    seen: set[EntityKey] = set()
    for key, _ in bindings:
        if key in seen:
            raise InvalidSubstitutionError(f"substitution binds key {key!r} more than once")
        seen.add(key)
    d = dict(ms)
    for key, value in bindings:
        if value is UNDEFINED:
            d.pop(key, None)
        else:
            if not isinstance(value, PropertyMap):
                raise InvalidValueError(
                    f"substitution value for {key!r} must be a PropertyMap or UNDEFINED"
                )
            d[key] = value
    return MemoryState(d)


def value_equals(a: PropertyValue | _Undefined, b: PropertyValue | _Undefined) -> bool:
    """Structural equality over values; also accepts the UNDEFINED marker.

    Lists compare element-wise in order; nested maps compare as unordered
    name sets with equal values; atomics compare without type coercion.
    """
    return a == b


# --- bridge to plain Python / JSON-shaped data -----------------------------
#
# Plain form: str/int/float/bool for atomics, list for multi-valued values,
# dict for nested maps.  None is rejected everywhere (no NULLs in the model).


def value_from_plain(obj: object) -> PropertyValue:
    if obj is None:
        raise InvalidValueError("null is not a value (absence is an unmapped name)")
    if type(obj) in (str, int, float, bool):
        return Atomic(obj)
    if isinstance(obj, (list, tuple)):
        items = []
        for x in obj:
            if x is None:
                raise InvalidValueError("null is not allowed inside a multi-valued property")
            items.append(Atomic(x))
        return MultiValued(tuple(items))
    if isinstance(obj, dict):
        return Nested(props_from_plain(obj))
    raise InvalidValueError(f"cannot build a value from {type(obj).__name__}")


def props_from_plain(d: Mapping[str, object]) -> PropertyMap:
    return PropertyMap({name: value_from_plain(v) for name, v in d.items()})


def value_to_plain(v: PropertyValue) -> object:
    if isinstance(v, Atomic):
        return v.value
    if isinstance(v, MultiValued):
        return [item.value for item in v.items]
    if isinstance(v, Nested):
        return props_to_plain(v.props)
    raise InvalidValueError(f"not a property value: {v!r}")


def props_to_plain(pm: PropertyMap) -> dict:
    return {name: value_to_plain(pm[name]) for name in sorted(pm)}


def state_from_plain(entries: Mapping[tuple[str, int | str], Mapping[str, object]]) -> MemoryState:
    """Build a memory state from ``{(kind, id): {name: plain value}}``."""
    return MemoryState({EntityKey(k, i): props_from_plain(p) for (k, i), p in entries.items()})


def state_to_plain(ms: MemoryState) -> dict[tuple[str, int | str], dict]:
    return {(k.kind, k.id): props_to_plain(ms[k]) for k in ms.sorted_keys()}
