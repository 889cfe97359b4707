"""Prompt rendering and response parsing.

Templates live as versioned UTF-8 text assets under ``templates/`` and use
``{placeholder}`` tokens (token names may contain spaces). Rendering is pure
string substitution: identical bindings always produce identical bytes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Mapping, Sequence

from .errors import (
    MissingPlaceholderError,
    NoWinnerError,
    ParseFailureError,
    UnknownPlaceholderError,
)
from .graphs import MissingSlot, QueryTask

_PLACEHOLDER = re.compile(r"\{([^{}]+)\}")
_BRACKET_BLOCK = re.compile(r"\[[^\[\]]*\]")
_QUOTED_ITEM = re.compile(r"'([^']*)'|\"([^\"]*)\"")

MAX_RANKED_CANDIDATES = 10


class PromptVariant(str, Enum):
    """Prediction prompt variants plus the ontology-induction prompt."""

    VANILLA = "vanilla"
    ONTOLOGY = "ontology"
    ONTOLOGY_PATHS = "ontology_paths"
    ONTOLOGY_PLUS_PATHS = "ontology_plus_paths"
    NEIGHBORS = "neighbors"
    CANDIDATES = "candidates"
    CANDIDATES_ONTOLOGY = "candidates_ontology"
    CANDIDATES_ONTOLOGY_PATHS = "candidates_ontology_paths"
    CANDIDATES_ONTOLOGY_PATHS_HINT = "candidates_ontology_paths_hint"
    CANDIDATES_GRAPH_PATHS = "candidates_graph_paths"
    ONTOLOGY_INDUCTION = "ontology_induction"

    @property
    def placeholders(self) -> frozenset[str]:
        return VARIANT_PLACEHOLDERS[self]


# Declared placeholder set per variant; a unit test pins these against the
# tokens actually present in each template asset.
VARIANT_PLACEHOLDERS: dict[PromptVariant, frozenset[str]] = {
    PromptVariant.VANILLA: frozenset({"triplet"}),
    PromptVariant.ONTOLOGY: frozenset({"triplet", "type"}),
    PromptVariant.ONTOLOGY_PATHS: frozenset(
        {"triplet", "known node", "type", "ontology paths"}
    ),
    PromptVariant.ONTOLOGY_PLUS_PATHS: frozenset(
        {"triplet", "known node", "type", "ontology paths"}
    ),
    PromptVariant.NEIGHBORS: frozenset({"triplet", "known node", "neighbours"}),
    PromptVariant.CANDIDATES: frozenset({"triplet", "type", "data"}),
    PromptVariant.CANDIDATES_ONTOLOGY: frozenset({"triplet", "type", "data"}),
    PromptVariant.CANDIDATES_ONTOLOGY_PATHS: frozenset(
        {"triplet", "known node", "type", "data", "ontology paths"}
    ),
    PromptVariant.CANDIDATES_ONTOLOGY_PATHS_HINT: frozenset(
        {"triplet", "known node", "type", "data", "ontology paths"}
    ),
    PromptVariant.CANDIDATES_GRAPH_PATHS: frozenset(
        {"triplet", "type", "data", "graph paths"}
    ),
    PromptVariant.ONTOLOGY_INDUCTION: frozenset(
        {"relation", "data_pairs", "ontology_categories"}
    ),
}

# Tournament prompts are internal assets, not public variants: the batch
# round asks for one winner (or {winners} of them) instead of a ranked list.
TOURNAMENT_SINGLE = "tournament_single"
TOURNAMENT_MULTI = "tournament_multi"

# Variant names that feed on each resource; used for run-config validation.
ONTOLOGY_VARIANTS = frozenset(
    v
    for v in PromptVariant
    if v not in (PromptVariant.VANILLA, PromptVariant.NEIGHBORS, PromptVariant.ONTOLOGY_INDUCTION)
)
CANDIDATE_VARIANTS = frozenset(v for v in PromptVariant if v.value.startswith("candidates"))


@dataclass
class RankedAnswer:
    """An ordered candidate list parsed from a model response."""

    candidates: list[str]
    raw_response: str
    truncated: bool = False

    def to_dict(self) -> dict:
        return {
            "candidates": list(self.candidates),
            "raw_response": self.raw_response,
            "truncated": self.truncated,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RankedAnswer":
        return cls(
            candidates=list(data["candidates"]),
            raw_response=data.get("raw_response", ""),
            truncated=bool(data.get("truncated", False)),
        )


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    """Read a template asset by name (without the .txt suffix)."""
    ref = resources.files("kgtopo").joinpath("templates", f"{name}.txt")
    return ref.read_text(encoding="utf-8")


def template_placeholders(name: str) -> frozenset[str]:
    return frozenset(_PLACEHOLDER.findall(load_template(name)))


def render_template(name: str, bindings: Mapping[str, str]) -> str:
    """Substitute ``{placeholder}`` tokens; byte-stable for fixed inputs."""
    template = load_template(name)
    needed = frozenset(_PLACEHOLDER.findall(template))
    missing = needed - set(bindings)
    if missing:
        raise MissingPlaceholderError(
            f"template {name!r} needs bindings for: {sorted(missing)}"
        )
    extra = set(bindings) - needed
    if extra:
        raise UnknownPlaceholderError(
            f"template {name!r} has no placeholders: {sorted(extra)}"
        )
    return _PLACEHOLDER.sub(lambda m: bindings[m.group(1)], template)


def render_prompt(variant: PromptVariant, bindings: Mapping[str, str]) -> str:
    """Render a prompt variant; bindings must cover its exact placeholder set."""
    return render_template(PromptVariant(variant).value, bindings)


def render_triplet(task: QueryTask) -> str:
    """Arrow form of a query: ``known --> relation --> ?`` or the head mirror."""
    if task.missing_slot is MissingSlot.TAIL:
        return f"{task.known_entity} --> {task.relation} --> ?"
    return f"? --> {task.relation} --> {task.known_entity}"


def format_hint_list(items: Sequence[str]) -> str:
    """Bracketed, comma-separated list used for all list-valued hints."""
    return "[" + ", ".join(items) + "]"


def _extract_quoted_list(text: str) -> list[str] | None:
    """Items of the first bracketed block that contains quoted strings."""
    for block in _BRACKET_BLOCK.finditer(text):
        items = [a if a else b for a, b in _QUOTED_ITEM.findall(block.group(0))]
        if items:
            return items
    return None


def parse_ranked_answer(text: str) -> RankedAnswer:
    """Parse a ranked candidate list out of a (possibly chatty) response.

    The first bracketed list of quoted items is used; surrounding prose is
    ignored. Items beyond 10 are truncated (flagged), whitespace is trimmed,
    and exact duplicates are dropped keeping the first occurrence.
    """
    items = _extract_quoted_list(text)
    if not items:
        raise ParseFailureError("no bracketed list of quoted candidates found", raw=text)
    items = [item.strip() for item in items]
    truncated = len(items) > MAX_RANKED_CANDIDATES
    items = items[:MAX_RANKED_CANDIDATES]
    deduped = list(dict.fromkeys(items))
    return RankedAnswer(candidates=deduped, raw_response=text, truncated=truncated)


def _normalize(text: str) -> str:
    return " ".join(text.split()).casefold()


def parse_single_winner(text: str, batch: Sequence[str]) -> str:
    """Identify which batch member a tournament response picked.

    The batch member whose normalized form appears earliest in the
    normalized response wins; at equal positions the longer match wins
    (so "United Kingdom" beats "United"). Quoted list answers are covered
    by the same scan since their items are substrings of the response.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    haystack = _normalize(text)
    best: tuple[int, int, str] | None = None
    for member in batch:
        needle = _normalize(member)
        if not needle:
            continue
        pos = haystack.find(needle)
        if pos < 0:
            continue
        key = (pos, -len(needle), member)
        if best is None or key < best:
            best = key
    if best is None:
        raise NoWinnerError(f"no batch member found in response: {text!r}")
    return best[2]


def parse_multi_winners(text: str, batch: Sequence[str], limit: int) -> list[str]:
    """Batch members named in a multi-winner response, in response order.

    Response items are matched to batch members by normalized equality;
    unmatched items are dropped. At most ``limit`` winners are returned.
    """
    items = _extract_quoted_list(text)
    if not items:
        raise NoWinnerError(f"no bracketed list of winners found in response: {text!r}")
    by_norm = {}
    for member in batch:
        by_norm.setdefault(_normalize(member), member)
    winners: list[str] = []
    for item in items:
        member = by_norm.get(_normalize(item))
        if member is not None and member not in winners:
            winners.append(member)
        if len(winners) >= limit:
            break
    if not winners:
        raise NoWinnerError(f"no batch member found in response: {text!r}")
    return winners
