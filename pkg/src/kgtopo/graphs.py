"""Triple store: load, index, and query knowledge graphs in TSV form.

A graph is a directed labeled multigraph of (head, relation, tail) facts.
Instances are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Literal, Optional

from .errors import (
    CategoriesNotAssignedError,
    MalformedLineError,
    UnknownNodeError,
    UnknownRelationError,
    UnsupportedError,
)

Direction = Literal["out", "in"]

_HEADER_FIELDS = ("head", "relation", "tail")


class MissingSlot(str, Enum):
    HEAD = "head"
    TAIL = "tail"


def _check_label(value: str, name: str) -> None:
    if not value:
        raise ValueError(f"{name} label must be non-empty")
    if "\t" in value or "\n" in value or "\r" in value:
        raise ValueError(f"{name} label contains a tab or newline: {value!r}")


@dataclass(frozen=True, slots=True)
class Triple:
    """One (head, relation, tail) fact. Labels are stored exactly as read."""

    head: str
    relation: str
    tail: str

    def __post_init__(self) -> None:
        _check_label(self.head, "head")
        _check_label(self.relation, "relation")
        _check_label(self.tail, "tail")


@dataclass(frozen=True, slots=True)
class QueryTask:
    """A test triplet with one missing slot.

    ``missing_slot=TAIL`` means the task is (known, relation, ?);
    ``HEAD`` means (?, relation, known). ``gold`` is present only in
    evaluation runs.
    """

    known_entity: str
    relation: str
    missing_slot: MissingSlot
    gold: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "known_entity": self.known_entity,
            "relation": self.relation,
            "missing_slot": self.missing_slot.value,
            "gold": self.gold,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QueryTask":
        return cls(
            known_entity=data["known_entity"],
            relation=data["relation"],
            missing_slot=MissingSlot(data["missing_slot"]),
            gold=data.get("gold"),
        )


class KnowledgeGraph:
    """Indexed, read-only view over a collection of triples."""

    def __init__(
        self,
        triples: Iterable[Triple],
        node_category: Optional[dict[str, str]] = None,
        category_conflicts: Optional[frozenset[str]] = None,
    ):
        self._triples: tuple[Triple, ...] = tuple(triples)
        self._by_head: dict[str, list[Triple]] = {}
        self._by_tail: dict[str, list[Triple]] = {}
        self._by_relation: dict[str, list[Triple]] = {}
        for t in self._triples:
            self._by_head.setdefault(t.head, []).append(t)
            self._by_tail.setdefault(t.tail, []).append(t)
            self._by_relation.setdefault(t.relation, []).append(t)
        self._nodes = frozenset(self._by_head) | frozenset(self._by_tail)
        self._relations = frozenset(self._by_relation)
        self.node_category = dict(node_category) if node_category is not None else None
        self.category_conflicts = category_conflicts

    @property
    def nodes(self) -> frozenset[str]:
        return self._nodes

    @property
    def relations(self) -> frozenset[str]:
        return self._relations

    @property
    def triples(self) -> tuple[Triple, ...]:
        return self._triples

    def by_head(self, node: str) -> tuple[Triple, ...]:
        return tuple(self._by_head.get(node, ()))

    def by_tail(self, node: str) -> tuple[Triple, ...]:
        return tuple(self._by_tail.get(node, ()))

    def by_relation(self, relation: str) -> tuple[Triple, ...]:
        return tuple(self._by_relation.get(relation, ()))

    def with_node_categories(
        self, node_category: dict[str, str], conflicts: frozenset[str]
    ) -> "KnowledgeGraph":
        """Return a copy of this graph carrying a node-category map."""
        clone = KnowledgeGraph.__new__(KnowledgeGraph)
        clone._triples = self._triples
        clone._by_head = self._by_head
        clone._by_tail = self._by_tail
        clone._by_relation = self._by_relation
        clone._nodes = self._nodes
        clone._relations = self._relations
        clone.node_category = dict(node_category)
        clone.category_conflicts = conflicts
        return clone

    def __len__(self) -> int:
        return len(self._triples)

    def __repr__(self) -> str:  # pragma: no cover - debugging helper
        return (
            f"KnowledgeGraph(nodes={len(self._nodes)}, "
            f"relations={len(self._relations)}, triples={len(self._triples)})"
        )


def _is_header(fields: list[str]) -> bool:
    return tuple(f.strip().lower() for f in fields) == _HEADER_FIELDS


def load_triples(
    path: str | Path, on_duplicate: Literal["keep", "dedupe"] = "dedupe"
) -> KnowledgeGraph:
    """Load a UTF-8 TSV triple file (head \\t relation \\t tail per line).

    Empty lines are ignored. A one-line ``head/relation/tail`` header is
    auto-detected (case-insensitively) and skipped. ``dedupe`` drops exact
    duplicate triples, keeping the first occurrence.

    Raises:
        MalformedLineError: a line does not have exactly 3 non-empty fields.
        OSError: the file cannot be read.
    """
    if on_duplicate not in ("keep", "dedupe"):
        raise ValueError(f"on_duplicate must be 'keep' or 'dedupe', got {on_duplicate!r}")
    triples: list[Triple] = []
    with open(path, encoding="utf-8") as handle:
        for line_number, raw in enumerate(handle, start=1):
            line = raw.rstrip("\r\n")
            if not line:
                continue
            fields = line.split("\t")
            if line_number == 1 and len(fields) == 3 and _is_header(fields):
                continue
            if len(fields) != 3:
                raise MalformedLineError(
                    line_number, f"expected 3 tab-separated fields, found {len(fields)}"
                )
            try:
                triples.append(Triple(*fields))
            except ValueError as exc:
                raise MalformedLineError(line_number, str(exc)) from exc
    if on_duplicate == "dedupe":
        triples = list(dict.fromkeys(triples))
    return KnowledgeGraph(triples)


def merge(g1: KnowledgeGraph, g2: KnowledgeGraph) -> KnowledgeGraph:
    """Dedupe-union of two graphs: node/relation sets are unions."""
    combined = dict.fromkeys(g1.triples)
    combined.update(dict.fromkeys(g2.triples))
    return KnowledgeGraph(combined)


def neighbors(
    g: KnowledgeGraph, node: str, hops: int = 1
) -> list[tuple[str, str, Direction]]:
    """1-hop neighborhood of ``node`` as (relation, other, direction) tuples.

    Outgoing triples (node, r, t) yield (r, t, "out"); incoming (h, r, node)
    yield (r, h, "in"). The result is a deterministic, lexicographically
    sorted set.
    """
    if hops != 1:
        raise UnsupportedError(f"only 1-hop neighborhoods are supported, got hops={hops}")
    if node not in g.nodes:
        raise UnknownNodeError(f"node not in graph: {node!r}")
    found: set[tuple[str, str, Direction]] = set()
    for t in g.by_head(node):
        found.add((t.relation, t.tail, "out"))
    for t in g.by_tail(node):
        found.add((t.relation, t.head, "in"))
    return sorted(found)


def sample_pairs(
    g: KnowledgeGraph, relation: str, n: int, seed: int
) -> list[tuple[str, str]]:
    """Sample up to ``n`` distinct (head, tail) pairs connected by ``relation``.

    Uniform without replacement; deterministic for a fixed seed. If fewer
    than ``n`` pairs exist, all are returned.
    """
    if relation not in g.relations:
        raise UnknownRelationError(f"relation not in graph: {relation!r}")
    pairs = sorted({(t.head, t.tail) for t in g.by_relation(relation)})
    if n >= len(pairs):
        return pairs
    rng = random.Random(seed)
    return rng.sample(pairs, n)


def inverse_relation(relation: str) -> str:
    """Inverse relation label: the word "inverse" prefixed with one space."""
    return "inverse " + relation


def nodes_by_category(g: KnowledgeGraph, category: str) -> list[str]:
    """All graph nodes assigned the given category, lexicographically sorted."""
    if g.node_category is None:
        raise CategoriesNotAssignedError(
            "graph has no node-category map; run category assignment first"
        )
    return sorted(v for v, c in g.node_category.items() if c == category)


def tasks_from_triples(
    triples: Iterable[Triple], missing_slot: MissingSlot
) -> list[QueryTask]:
    """Turn test triples into query tasks with the gold answer attached."""
    tasks = []
    for t in triples:
        if missing_slot is MissingSlot.TAIL:
            tasks.append(QueryTask(t.head, t.relation, MissingSlot.TAIL, gold=t.tail))
        else:
            tasks.append(QueryTask(t.tail, t.relation, MissingSlot.HEAD, gold=t.head))
    return tasks
