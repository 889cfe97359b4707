from __future__ import annotations

import json

import pytest

from kgtopo.gateway import MockBackend
from kgtopo.graphs import KnowledgeGraph, Triple
from kgtopo.ontology import Ontology

# Reference ontology fixture for path-enumeration goldens. The expected
# alternate paths asserted against it were hand-verified by exhaustive walk.
BENCH_SMALL_EDGES = [
    ("individual", "medical condition", "medical_condition"),
    ("individual", "cause of death", "medical_condition"),
    ("individual", "place of birth", "city"),
    ("individual", "employer", "university_or_organization"),
    ("university_or_organization", "headquarters location", "city"),
    ("individual", "place of death", "city"),
    ("individual", "residence", "city"),
    ("individual", "part of", "organization"),
    ("individual", "member of", "organization"),
    ("individual", "languages spoken, written or signed", "language"),
    (
        "university_or_organization",
        "located in the administrative territorial entity",
        "city_or_country",
    ),
    ("city_or_country", "official language", "language"),
    ("city_or_country", "named after", "individual"),
    ("individual", "unmarried partner", "individual"),
]


@pytest.fixture
def bench_ontology() -> Ontology:
    return Ontology.from_edges(BENCH_SMALL_EDGES)


@pytest.fixture
def tiny_graph() -> KnowledgeGraph:
    return KnowledgeGraph(
        [
            Triple("John Lennon", "died_in", "United Kingdom"),
            Triple("John Lennon", "child_of", "Alfred Lennon"),
            Triple("Alfred Lennon", "citizen_of", "United Kingdom"),
            Triple("Miles Davis", "died_in", "United States"),
        ]
    )


@pytest.fixture
def triple_file(tmp_path):
    def write(name: str, rows: list[tuple[str, str, str]], header: bool = False):
        lines = []
        if header:
            lines.append("head\trelation\ttail")
        lines.extend("\t".join(row) for row in rows)
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return write


@pytest.fixture
def mock_script_file(tmp_path):
    def write(entries: list[dict], name: str = "script.json"):
        path = tmp_path / name
        path.write_text(json.dumps(entries), encoding="utf-8")
        return path

    return write


def scripted_backend(entries: list[dict] | None = None, responder=None) -> MockBackend:
    return MockBackend(entries=entries, responder=responder)
