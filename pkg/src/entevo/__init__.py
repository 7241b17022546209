"""Schema evolution engine for schema-less entity stores.

The package splits into:

* :mod:`entevo.model` -- immutable values, entity keys, memory states, and
  the substitution/update calculus;
* :mod:`entevo.store` -- executable store semantics (create, manipulate,
  persist, query, iterate) plus the JSON-lines file format;
* :mod:`entevo.language` -- the declarative evolution language (add, delete,
  rename, move, copy) with parser, validator, and formatter;
* :mod:`entevo.migrate` -- the eager batch executor with version tracking;
* :mod:`entevo.safety` -- pre-execution dry-run deciding order-independence;
* :mod:`entevo.lazy` -- on-load/on-save migration rules and an empirical
  idempotence check;
* :mod:`entevo.cli` -- the ``entevo`` command.
"""

from .model import (
    UNDEFINED,
    Atomic,
    EntevoError,
    EntityKey,
    MemoryState,
    MultiValued,
    Nested,
    PropertyMap,
    apply_substitution,
    map_update,
    props_from_plain,
    props_to_plain,
    state_from_plain,
    state_to_plain,
    value_equals,
)
from .store import (
    MachineState,
    QueryPredicate,
    delete_entity,
    dump_store,
    eval_atom,
    foreach_keys,
    get_by_key,
    get_property,
    has_property,
    load_store,
    new_entity,
    new_entity_with,
    put,
    query,
    remove_property,
    set_property,
)
from .language import (
    Add,
    Copy,
    Delete,
    Move,
    Rename,
    Statement,
    format_statement,
    parse_statement,
    validate_statement,
)
from .migrate import MigrationResult, execute
from .safety import SafetyReport, Verdict, check_safety, explain_report
from .lazy import (
    LazyRuleSet,
    check_idempotent,
    load_rules,
    load_with_rules,
    parse_rules,
    save_with_rules,
)

__all__ = [name for name in dir() if not name.startswith("_")]
