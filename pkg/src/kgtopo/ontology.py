"""Ontology induction, verification, and node-category assignment.

The ontology maps every relation to exactly one (head category, tail
category) pair. It is induced relation by relation with a completion
backend: each call sees sample pairs for one relation plus the categories
accumulated so far, so labels stay consistent across relations.
"""

from __future__ import annotations

import json
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

from .errors import (
    MissingRelationError,
    OntologyBuildError,
    OntologyInvalidError,
    ParseFailureError,
    RelationMismatchError,
    UnknownRelationError,
)
from .graphs import KnowledgeGraph, sample_pairs
from .prompts import PromptVariant, render_prompt

if TYPE_CHECKING:  # pragma: no cover
    from .gateway import CompletionBackend

_LABEL_RE = re.compile(r"[a-z0-9]+(?:_[a-z0-9]+)*")
_LIST_BLOCK = re.compile(r"\[[^\[\]]*\]")
_QUOTED = re.compile(r"'([^']*)'|\"([^\"]*)\"")


def _collapse_ws(text: str) -> str:
    return " ".join(text.split())


def normalize_category_label(label: str) -> str:
    """Lowercase a category label and join words with underscores."""
    return "_".join(label.split()).lower()


@dataclass(frozen=True, slots=True)
class CategoryAssignment:
    """One relation's induced (head, tail) category pair plus audit fields."""

    relation: str
    head_category: str
    tail_category: str
    sample_size: int
    raw_response: str


@dataclass
class Ontology:
    """Category set, relation->(head, tail) map, and the edge triplets."""

    categories: set[str]
    relation_map: dict[str, tuple[str, str]]
    edges: set[tuple[str, str, str]]

    def head_category(self, relation: str) -> str:
        return self._pair(relation)[0]

    def tail_category(self, relation: str) -> str:
        return self._pair(relation)[1]

    def _pair(self, relation: str) -> tuple[str, str]:
        try:
            return self.relation_map[relation]
        except KeyError:
            raise UnknownRelationError(f"relation not in ontology: {relation!r}") from None

    @classmethod
    def from_edges(cls, edges: Sequence[tuple[str, str, str]]) -> "Ontology":
        categories: set[str] = set()
        relation_map: dict[str, tuple[str, str]] = {}
        edge_set: set[tuple[str, str, str]] = set()
        for head_cat, relation, tail_cat in edges:
            categories.add(head_cat)
            categories.add(tail_cat)
            relation_map[relation] = (head_cat, tail_cat)
            edge_set.add((head_cat, relation, tail_cat))
        return cls(categories=categories, relation_map=relation_map, edges=edge_set)

    def to_json(self) -> str:
        doc = {
            "categories": sorted(self.categories),
            "edges": [list(e) for e in sorted(self.edges)],
        }
        return json.dumps(doc, indent=2, ensure_ascii=False, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Ontology":
        doc = json.loads(text)
        onto = cls.from_edges([tuple(e) for e in doc["edges"]])
        onto.categories.update(doc.get("categories", []))
        return onto

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Ontology":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass
class VerificationReport:
    """Structural violations found in an ontology; empty means valid."""

    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def parse_category_response(text: str) -> tuple[str, str, str]:
    """Extract (head_category, tail_category, relation) from a response.

    Finds the first bracketed 3-element quoted list, tolerating surrounding
    prose. Interior whitespace is collapsed everywhere; category items are
    additionally lowercased with spaces turned into underscores, enforcing
    the induction prompt's strict label format on sloppy responses.
    """
    for block in _LIST_BLOCK.finditer(text):
        items = [a if a else b for a, b in _QUOTED.findall(block.group(0))]
        if len(items) == 3:
            head_cat, tail_cat, relation = (_collapse_ws(item) for item in items)
            return (
                normalize_category_label(head_cat),
                normalize_category_label(tail_cat),
                relation,
            )
    raise ParseFailureError("no 3-element bracketed list found", raw=text)


def format_data_pairs(pairs: Sequence[tuple[str, str]]) -> str:
    """Render sample pairs the way the induction prompt's examples show them."""
    return "[" + ", ".join(f"'({h}, {t})'" for h, t in pairs) + "]"


def format_category_list(categories: Sequence[str]) -> str:
    return "[" + ", ".join(f"'{c}'" for c in categories) + "]"


def induce_relation_categories(
    backend: "CompletionBackend",
    relation: str,
    pairs: Sequence[tuple[str, str]],
    existing_categories: Sequence[str],
    *,
    model_id: str = "gpt-4-32k",
    temperature: float = 0.0,
    max_output_tokens: int = 2000,
    retry=None,
) -> CategoryAssignment:
    """Ask the backend for the (head, tail) category pair of one relation."""
    from .gateway import CompletionRequest, complete

    if not pairs:
        raise ValueError("pairs must be non-empty")
    prompt = render_prompt(
        PromptVariant.ONTOLOGY_INDUCTION,
        {
            "relation": relation,
            "data_pairs": format_data_pairs(pairs),
            "ontology_categories": format_category_list(existing_categories),
        },
    )
    result = complete(
        backend,
        CompletionRequest(
            model_id=model_id,
            prompt=prompt,
            temperature=temperature,
            max_output_tokens=max_output_tokens,
        ),
        retry,
    )
    head_cat, tail_cat, echoed = parse_category_response(result.text)
    if echoed != _collapse_ws(relation):
        raise RelationMismatchError(
            f"backend altered the relation: sent {relation!r}, got {echoed!r}"
        )
    return CategoryAssignment(
        relation=relation,
        head_category=head_cat,
        tail_category=tail_cat,
        sample_size=len(pairs),
        raw_response=result.text,
    )


def build_ontology(
    backend: "CompletionBackend",
    g: KnowledgeGraph,
    n_samples: int = 50,
    seed: int = 0,
    *,
    strict: bool = True,
    model_id: str = "gpt-4-32k",
    retry=None,
) -> Ontology:
    """Induce the full ontology for a graph, one relation at a time.

    Relations are processed in lexicographic order, each call seeing the
    categories accumulated so far. With ``strict`` (the default) the result
    must pass verification; pass ``strict=False`` to get the ontology back
    regardless and inspect the report yourself.
    """
    if not g.triples:
        raise ValueError("graph is empty")
    categories: set[str] = set()
    relation_map: dict[str, tuple[str, str]] = {}
    edges: set[tuple[str, str, str]] = set()
    for relation in sorted(g.relations):
        pairs = sample_pairs(g, relation, n_samples, seed)
        try:
            assignment = induce_relation_categories(
                backend, relation, pairs, sorted(categories),
                model_id=model_id, retry=retry,
            )
        except Exception as exc:
            raise OntologyBuildError(relation, exc) from exc
        categories.add(assignment.head_category)
        categories.add(assignment.tail_category)
        relation_map[relation] = (assignment.head_category, assignment.tail_category)
        edges.add((assignment.head_category, relation, assignment.tail_category))
    onto = Ontology(categories=categories, relation_map=relation_map, edges=edges)
    if strict:
        report = verify_ontology(onto)
        if not report.ok:
            raise OntologyInvalidError(report.violations)
    return onto


def verify_ontology(o: Ontology) -> VerificationReport:
    """Check the one-pair-per-relation invariant and label hygiene."""
    violations: list[str] = []
    pairs_by_relation: dict[str, set[tuple[str, str]]] = defaultdict(set)
    for head_cat, relation, tail_cat in o.edges:
        pairs_by_relation[relation].add((head_cat, tail_cat))
    for relation, pairs in sorted(pairs_by_relation.items()):
        if len(pairs) != 1:
            violations.append(
                f"relation {relation!r} has {len(pairs)} category pairs in edges"
            )
        elif relation not in o.relation_map:
            violations.append(f"relation {relation!r} in edges but not in relation map")
        elif o.relation_map[relation] != next(iter(pairs)):
            violations.append(
                f"relation {relation!r}: relation map disagrees with edges"
            )
    for relation in sorted(set(o.relation_map) - set(pairs_by_relation)):
        violations.append(f"relation {relation!r} in relation map but has no edge")
    edge_categories = {c for h, _, t in o.edges for c in (h, t)}
    for category in sorted(edge_categories - o.categories):
        violations.append(f"category {category!r} used in edges but not declared")
    for category in sorted(o.categories):
        if not _LABEL_RE.fullmatch(category):
            violations.append(
                f"category {category!r} is not lowercase_with_underscores"
            )
    return VerificationReport(violations)


def assign_node_categories(g: KnowledgeGraph, o: Ontology) -> KnowledgeGraph:
    """Assign each node the category implied by its triple slots.

    Every triple (h, r, t) votes head_category(r) for h and tail_category(r)
    for t. A node that collects more than one distinct category keeps the
    majority one (ties broken lexicographically) and is flagged as a
    conflict. Returns a new graph carrying the category map.
    """
    votes: dict[str, Counter[str]] = defaultdict(Counter)
    for t in g.triples:
        try:
            head_cat, tail_cat = o.relation_map[t.relation]
        except KeyError:
            raise MissingRelationError(
                f"relation not in ontology: {t.relation!r}"
            ) from None
        votes[t.head][head_cat] += 1
        votes[t.tail][tail_cat] += 1
    node_category: dict[str, str] = {}
    conflicts: set[str] = set()
    for node, counter in votes.items():
        best = min(counter.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        node_category[node] = best
        if len(counter) > 1:
            conflicts.add(node)
    return g.with_node_categories(node_category, frozenset(conflicts))
