"""Ontology-topology hints: missing-node category and alternate paths.

Path enumeration walks the ontology's edge triplets forward only and keeps
simple paths (no category visited twice), minus the queried relation's own
edge. Groundings replay a path's relation sequence over the instance graph.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import UnknownCategoryError, UnknownNodeError
from .graphs import KnowledgeGraph, MissingSlot
from .ontology import Ontology

ARROW = " --> "

DEFAULT_MAX_HOPS = 5
DEFAULT_MAX_PATHS = 64
DEFAULT_MAX_GROUNDED = 16


@dataclass(frozen=True, slots=True)
class OntologyPath:
    """Alternating category/relation sequence: k relations, k+1 categories."""

    categories: tuple[str, ...]
    relations: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.relations) < 1 or len(self.categories) != len(self.relations) + 1:
            raise ValueError("need k >= 1 relations and k+1 categories")

    @property
    def hops(self) -> int:
        return len(self.relations)


@dataclass(frozen=True, slots=True)
class GroundedPath:
    """Instance-graph walk whose relations instantiate an ontology path."""

    entities: tuple[str, ...]
    relations: tuple[str, ...]


@dataclass
class PathEnumeration:
    paths: list[OntologyPath]
    truncated: bool


def infer_missing_category(
    o: Ontology, relation: str, missing_slot: MissingSlot
) -> str:
    """Category of the missing node, read off the relation's ontology edge."""
    if missing_slot is MissingSlot.TAIL:
        return o.tail_category(relation)
    return o.head_category(relation)


def enumerate_ontology_paths(
    o: Ontology,
    src: str,
    dst: str,
    exclude_relation: str,
    max_hops: int = DEFAULT_MAX_HOPS,
    max_paths: int = DEFAULT_MAX_PATHS,
) -> PathEnumeration:
    """All simple forward paths src -> dst of 1..max_hops over the ontology.

    The single edge (src, exclude_relation, dst) is removed before the walk.
    Paths are ordered by length, then lexicographically by relation sequence,
    and truncated to ``max_paths`` (flagged).
    """
    if src not in o.categories:
        raise UnknownCategoryError(f"category not in ontology: {src!r}")
    if dst not in o.categories:
        raise UnknownCategoryError(f"category not in ontology: {dst!r}")
    excluded = (src, exclude_relation, dst)
    adjacency: dict[str, list[tuple[str, str]]] = {}
    for head_cat, relation, tail_cat in o.edges:
        if (head_cat, relation, tail_cat) == excluded:
            continue
        adjacency.setdefault(head_cat, []).append((relation, tail_cat))
    for targets in adjacency.values():
        targets.sort()

    found: list[OntologyPath] = []
    cats: list[str] = [src]
    rels: list[str] = []
    visited = {src}

    def walk(current: str) -> None:
        if len(rels) >= max_hops:
            return
        for relation, nxt in adjacency.get(current, ()):
            if nxt in visited:
                continue
            cats.append(nxt)
            rels.append(relation)
            if nxt == dst:
                found.append(OntologyPath(tuple(cats), tuple(rels)))
            else:
                visited.add(nxt)
                walk(nxt)
                visited.remove(nxt)
            cats.pop()
            rels.pop()

    walk(src)
    found.sort(key=lambda p: (p.hops, p.relations, p.categories))
    truncated = len(found) > max_paths
    return PathEnumeration(paths=found[:max_paths], truncated=truncated)


def format_ontology_path(p: OntologyPath) -> str:
    """Arrow notation: ``category --> relation --> ... --> category``."""
    parts = [p.categories[0]]
    for relation, category in zip(p.relations, p.categories[1:]):
        parts.append(relation)
        parts.append(category)
    return ARROW.join(parts)


def format_grounded_path(p: GroundedPath) -> str:
    parts = [p.entities[0]]
    for relation, entity in zip(p.relations, p.entities[1:]):
        parts.append(relation)
        parts.append(entity)
    return ARROW.join(parts)


def ground_paths(
    g: KnowledgeGraph,
    start: str,
    ontology_paths: Sequence[OntologyPath],
    max_grounded: int = DEFAULT_MAX_GROUNDED,
) -> list[GroundedPath]:
    """Replay each ontology path's relations over the graph from ``start``.

    Follows forward edges only and emits every complete grounding,
    breadth-first with lexicographic expansion, truncated to
    ``max_grounded`` across all paths.
    """
    if start not in g.nodes:
        raise UnknownNodeError(f"node not in graph: {start!r}")
    grounded: list[GroundedPath] = []
    for path in ontology_paths:
        frontier: list[tuple[str, ...]] = [(start,)]
        for relation in path.relations:
            nxt: list[tuple[str, ...]] = []
            for partial in frontier:
                steps = sorted(
                    {t.tail for t in g.by_head(partial[-1]) if t.relation == relation}
                )
                nxt.extend(partial + (step,) for step in steps)
            frontier = nxt
            if not frontier:
                break
        for entities in frontier:
            grounded.append(GroundedPath(entities, path.relations))
            if len(grounded) >= max_grounded:
                return grounded
    return grounded
