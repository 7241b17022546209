"""Command-line interface: exit codes, atomic rewrites, output formats."""

from __future__ import annotations

import fcntl
import json

import pytest

from entevo.cli import main
from entevo.model import state_from_plain
from entevo.store import dump_store, format_store_text, load_store

from .test_lazy import ADDRESS_SPLIT_DOC, ALSO_LOAD_DOC


@pytest.fixture
def store_path(tmp_path):
    path = tmp_path / "blog.jsonl"
    dump_store(
        state_from_plain(
            {
                ("blogpost", 331175): {
                    "title": "NoSQL Data Modeling Techniques",
                    "content": "NoSQL databases are often schema-less",
                    "author": "Gerhard",
                    "version": 1,
                },
                ("user", 1234): {
                    "name": "Gerhard",
                    "email": "gerhard@acm.org",
                    "url": "http://bigdata.org",
                    "version": 1,
                },
            }
        ),
        path,
    )
    return path


@pytest.fixture
def conflict_store_path(tmp_path):
    path = tmp_path / "conflict.jsonl"
    dump_store(
        state_from_plain(
            {
                ("user", 1): {"url": "http://a", "version": 1},
                ("user", 2): {"url": "http://b", "version": 1},
                ("blogpost", 1): {"version": 1},
            }
        ),
        path,
    )
    return path


def test_exec_add(store_path, capsys):
    code = main(["exec", "--store", str(store_path), "add blogpost.likes = 0"])
    assert code == 0
    assert "matched 1, written 1" in capsys.readouterr().out
    ds = load_store(store_path)
    post = ds[next(k for k in ds if k.kind == "blogpost")]
    assert post["likes"].value == 0 and post["version"].value == 2


def test_exec_refuses_unsafe_without_force(conflict_store_path, capsys):
    before = conflict_store_path.read_bytes()
    code = main(["exec", "--store", str(conflict_store_path), "copy user.url to blogpost"])
    assert code == 3
    err = capsys.readouterr().err
    assert "unsafe" in err and "--force" in err
    assert conflict_store_path.read_bytes() == before


def test_exec_force_overrides(conflict_store_path, capsys):
    code = main(
        ["exec", "--store", str(conflict_store_path), "--force", "copy user.url to blogpost"]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "despite an unsafe verdict" in out
    ds = load_store(conflict_store_path)
    assert any("url" in ds[k] for k in ds if k.kind == "blogpost")


def test_exec_dry_run_leaves_bytes_identical(store_path, capsys):
    before = store_path.read_bytes()
    code = main(["exec", "--store", str(store_path), "--dry-run", "add blogpost.likes = 0"])
    assert code == 0
    assert "dry run" in capsys.readouterr().out
    assert store_path.read_bytes() == before


def test_force_and_dry_run_are_mutually_exclusive(store_path):
    with pytest.raises(SystemExit) as exc:
        main(["exec", "--store", str(store_path), "--force", "--dry-run", "delete blogpost.url"])
    assert exc.value.code == 2


def test_exec_parse_error_exit_2(store_path, capsys):
    assert main(["exec", "--store", str(store_path), "add blogpost.likes"]) == 2
    assert "error" in capsys.readouterr().err


def test_exec_missing_store_exit_4(tmp_path, capsys):
    assert main(["exec", "--store", str(tmp_path / "nope.jsonl"), "delete b.url"]) == 4


def test_check_safe_and_unsafe(conflict_store_path, capsys):
    code = main(["check", "--store", str(conflict_store_path), "delete blogpost.url"])
    assert code == 0
    assert "trivially safe" in capsys.readouterr().out
    code = main(["check", "--store", str(conflict_store_path), "copy user.url to blogpost"])
    assert code == 3
    out = capsys.readouterr().out
    assert "unsafe" in out
    before = conflict_store_path.read_bytes()
    assert conflict_store_path.read_bytes() == before


def test_check_json_output_is_schema_stable(conflict_store_path, capsys):
    code = main(
        [
            "check",
            "--store",
            str(conflict_store_path),
            "--output",
            "json",
            "copy user.url to blogpost",
        ]
    )
    assert code == 3
    doc = json.loads(capsys.readouterr().out)
    assert doc == {
        "command": "check",
        "statement": "copy user.url to blogpost",
        "verdict": "unsafe",
        "simulated_writes": 2,
        "conflicts": [
            {
                "target": {"kind": "blogpost", "id": 1},
                "property": "url",
                "first_value": "http://a",
                "second_value": "http://b",
                "first_source": {"kind": "user", "id": 1},
                "second_source": {"kind": "user", "id": 2},
            }
        ],
        "text_lines": doc["text_lines"],
    }


def test_exec_json_output(store_path, capsys):
    code = main(
        ["exec", "--store", str(store_path), "--output", "json", "add blogpost.likes = 0"]
    )
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["command"] == "exec"
    assert doc["matched"] == 1 and doc["written"] == 1
    assert doc["safety"]["verdict"] == "trivially-safe"
    assert doc["dry_run"] is False and doc["forced"] is False


def test_get_with_filter(store_path, capsys):
    code = main(["get", "--store", str(store_path), "blogpost", "author=Gerhard"])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 1
    doc = json.loads(lines[0])
    assert doc["kind"] == "blogpost" and doc["id"] == 331175


def test_get_no_match_exits_zero(store_path, capsys):
    code = main(["get", "--store", str(store_path), "blogpost", "author=Nobody"])
    assert code == 0
    assert capsys.readouterr().out == ""


def test_get_typed_filters(store_path, capsys):
    code = main(["get", "--store", str(store_path), "blogpost", "version=1"])
    assert code == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 1
    # string "1" does not match integer 1
    code = main(["get", "--store", str(store_path), "blogpost", 'version="1"'])
    assert code == 0
    assert capsys.readouterr().out == ""


def test_get_bad_filter_exit_2(store_path, capsys):
    assert main(["get", "--store", str(store_path), "blogpost", "author"]) == 2


def test_get_with_rules_migrates_and_writes_back(tmp_path, capsys):
    store = tmp_path / "people.jsonl"
    dump_store(
        state_from_plain({("Person", 7): {"name": "X", "street": "s", "city": "c", "version": 1}}),
        store,
    )
    rules = tmp_path / "person.rules.json"
    rules.write_text(json.dumps(ADDRESS_SPLIT_DOC))
    code = main(["get", "--store", str(store), "Person", "--rules", str(rules)])
    assert code == 0
    printed = json.loads(capsys.readouterr().out.strip())
    assert "street" not in printed["props"] and "city" not in printed["props"]
    ds = load_store(store)
    plain_keys = {(k.kind, k.id) for k in ds}
    assert ("Address", 7) in plain_keys  # spawned persist written back


def test_get_with_also_load_rules(tmp_path, capsys):
    store = tmp_path / "people.jsonl"
    dump_store(state_from_plain({("Person", 7): {"name": "X"}}), store)
    rules = tmp_path / "rules.json"
    rules.write_text(json.dumps(ALSO_LOAD_DOC))
    before = store.read_bytes()
    code = main(["get", "--store", str(store), "Person", "--rules", str(rules)])
    assert code == 0
    printed = json.loads(capsys.readouterr().out.strip())
    assert printed["props"] == {"fullName": "X"}
    assert store.read_bytes() == before  # nothing persisted: store untouched


def test_check_lazy_idempotent(tmp_path, capsys):
    store = tmp_path / "people.jsonl"
    dump_store(state_from_plain({("Person", 1): {"name": "a"}}), store)
    rules = tmp_path / "rules.json"
    rules.write_text(json.dumps(ALSO_LOAD_DOC))
    assert main(["check-lazy", "--store", str(store), "--rules", str(rules)]) == 0
    assert "idempotent" in capsys.readouterr().out


def test_check_lazy_flags_non_idempotent(tmp_path, capsys):
    store = tmp_path / "people.jsonl"
    dump_store(state_from_plain({("Person", 1): {"a": 1, "b": 2, "c": 3}}), store)
    rules = tmp_path / "rules.json"
    rules.write_text(
        json.dumps(
            {
                "kind": "Person",
                "onLoad": [
                    {"if": [], "do": [{"set": "a", "fromProperty": "b"}, {"set": "b", "fromProperty": "c"}]}
                ],
            }
        )
    )
    assert main(["check-lazy", "--store", str(store), "--rules", str(rules)]) == 3
    out = capsys.readouterr().out
    assert "not idempotent" in out and "entity.a" in out


def test_check_lazy_empty_store(tmp_path, capsys):
    store = tmp_path / "empty.jsonl"
    store.write_text("")
    rules = tmp_path / "rules.json"
    rules.write_text(json.dumps(ALSO_LOAD_DOC))
    assert main(["check-lazy", "--store", str(store), "--rules", str(rules)]) == 0


def test_check_lazy_malformed_rules_exit_2(tmp_path, capsys):
    store = tmp_path / "empty.jsonl"
    store.write_text("")
    rules = tmp_path / "rules.json"
    rules.write_text('{"kind": "P", "unknown": 1}')
    assert main(["check-lazy", "--store", str(store), "--rules", str(rules)]) == 2


def test_fmt_canonicalizes(capsys):
    code = main(["fmt", "add   blogpost.likes =    0   where blogpost.version = 1"])
    assert code == 0
    assert capsys.readouterr().out.strip() == "add blogpost.likes = 0 where blogpost.version = 1"


def test_fmt_warns_on_cross_product(capsys):
    assert main(["fmt", "copy user.url to blogpost"]) == 0
    captured = capsys.readouterr()
    assert captured.out.strip() == "copy user.url to blogpost"
    assert "cross-product" in captured.err


def test_dump_normalizes(store_path, capsys):
    code = main(["dump", "--store", str(store_path)])
    assert code == 0
    assert capsys.readouterr().out == format_store_text(load_store(store_path))


def test_concurrent_invocations_rejected(store_path, capsys):
    lock_path = str(store_path) + ".lock"
    with open(lock_path, "w") as holder:
        fcntl.flock(holder.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
        code = main(["exec", "--store", str(store_path), "delete blogpost.url"])
    assert code == 4
    assert "in use" in capsys.readouterr().err


def test_store_parse_error_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"kind":"u","id":1,"props":{"x":null}}\n')
    assert main(["dump", "--store", str(bad)]) == 2
