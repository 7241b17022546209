"""Shared fixtures: the blogging case-study stores, in plain form."""

from __future__ import annotations

import pytest
from hypothesis import settings

from entevo import MachineState, execute, parse_statement, state_from_plain, state_to_plain

settings.register_profile("ci", deadline=None)
settings.load_profile("ci")

# Release-1 blogposts plus the later user entity, as introduced by the case
# study's narrative.  Values spelled out where the worked tables elide them.
BLOGPOST_331175 = {
    "title": "NoSQL Data Modeling Techniques",
    "content": "NoSQL databases are often schema-less",
    "author": "Gerhard",
    "version": 1,
}

USER_1234 = {
    "name": "Gerhard",
    "email": "gerhard@acm.org",
    "status": "professional",
    "url": "http://bigdata.org",
    "version": 1,
}


def run_text(text: str, store: dict, **kwargs):
    """Parse and execute a statement over a plain store; plain store out."""
    result = execute(parse_statement(text), MachineState(ds=state_from_plain(store)), **kwargs)
    return state_to_plain(result.final_state.ds), result


@pytest.fixture
def blogpost_store() -> dict:
    return {("blogpost", 331175): dict(BLOGPOST_331175)}


@pytest.fixture
def move_fixture_store() -> dict:
    return {
        ("user", 1234): dict(USER_1234),
        ("blogpost", 331175): dict(BLOGPOST_331175),
    }
