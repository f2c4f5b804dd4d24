import json

import pytest

from tempoqa.kg import load_kg


def make_kg(items, facts):
    return load_kg((json.dumps(r) for r in items), (json.dumps(r) for r in facts))


@pytest.fixture
def football_kg():
    """Small hand-built KG: one player, three clubs with dated stints."""
    items = [
        {"id": "E1", "kind": "entity", "label": "Cristiano Ronaldo",
         "aliases": ["Ronaldo"]},
        {"id": "E2", "kind": "entity", "label": "Real Madrid"},
        {"id": "E3", "kind": "entity", "label": "Juventus"},
        {"id": "E4", "kind": "entity", "label": "Manchester United"},
        {"id": "E5", "kind": "entity", "label": "Portugal"},
        {"id": "P1", "kind": "predicate", "label": "member of sports team"},
        {"id": "P2", "kind": "predicate", "label": "start time"},
        {"id": "P3", "kind": "predicate", "label": "end time"},
        {"id": "P4", "kind": "predicate", "label": "country of citizenship"},
        {"id": "T1", "kind": "timestamp", "timestamp": "2009-07-01"},
        {"id": "T2", "kind": "timestamp", "timestamp": "2018-07-10"},
        {"id": "T3", "kind": "timestamp", "timestamp": "2018-07-11"},
        {"id": "T4", "kind": "timestamp", "timestamp": "2021-08-31"},
    ]
    facts = [
        {"id": "f1", "subject": "E1", "predicate": "P1", "object": "E2",
         "qualifiers": [["P2", "T1"], ["P3", "T2"]]},
        {"id": "f2", "subject": "E1", "predicate": "P1", "object": "E3",
         "qualifiers": [["P2", "T3"], ["P3", "T4"]]},
        {"id": "f3", "subject": "E1", "predicate": "P1", "object": "E4"},
        {"id": "f4", "subject": "E1", "predicate": "P4", "object": "E5"},
    ]
    return make_kg(items, facts)
