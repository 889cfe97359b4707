"""Per-task prediction orchestration: hints, tournament, final call, record.

Each test task is answered under one prompt variant. Candidate variants
first shrink the category-filtered pool with a batched tournament when it
exceeds one batch; the surviving shortlist goes into the final prompt.
Every prompt issued is digested into the record for auditing, and
failures are captured per record so a long run never dies midway.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import AllBatchesFailedError, ConfigError, NoWinnerError
from .gateway import (
    DEFAULT_MAX_OUTPUT_TOKENS,
    DEFAULT_MODEL_ID,
    DEFAULT_TEMPERATURE,
    CompletionBackend,
    CompletionRequest,
    ResponseCache,
    RetryPolicy,
    cached_complete,
)
from .graphs import (
    KnowledgeGraph,
    MissingSlot,
    QueryTask,
    inverse_relation,
    neighbors,
    nodes_by_category,
)
from .ontology import Ontology
from .paths import (
    enumerate_ontology_paths,
    format_grounded_path,
    format_ontology_path,
    ground_paths,
    infer_missing_category,
)
from .prompts import (
    CANDIDATE_VARIANTS,
    ONTOLOGY_VARIANTS,
    TOURNAMENT_MULTI,
    TOURNAMENT_SINGLE,
    PromptVariant,
    RankedAnswer,
    format_hint_list,
    parse_multi_winners,
    parse_ranked_answer,
    parse_single_winner,
    render_template,
    render_triplet,
)

RECORD_SCHEMA_VERSION = 1


class PredictionMode(str, Enum):
    TAIL = "tail"
    DIRECT_HEAD = "head-direct"
    INVERSE_HEAD = "head-inverse"

    def applies_to(self, slot: MissingSlot) -> bool:
        if self is PredictionMode.TAIL:
            return slot is MissingSlot.TAIL
        return slot is MissingSlot.HEAD


MODE_ORDER = (PredictionMode.TAIL, PredictionMode.DIRECT_HEAD, PredictionMode.INVERSE_HEAD)


class TournamentMode(str, Enum):
    SINGLE_WINNER = "single"
    MULTI_WINNER = "multi"


@dataclass(frozen=True, slots=True)
class TournamentConfig:
    batch_size: int = 2000
    winners_per_batch: int = 1
    shortlist_cap: int = 100
    mode: TournamentMode = TournamentMode.SINGLE_WINNER

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.winners_per_batch < 1:
            raise ValueError("winners_per_batch must be >= 1")
        if self.shortlist_cap < 1:
            raise ValueError("shortlist_cap must be >= 1")
        if self.mode is TournamentMode.SINGLE_WINNER and self.winners_per_batch != 1:
            raise ValueError("single-winner mode requires winners_per_batch == 1")


@dataclass
class PredictionRecord:
    """Audit trail for one (task, mode) prediction."""

    task: QueryTask
    variant: str
    mode: str
    hints: dict = field(default_factory=dict)
    prompt_digests: list[str] = field(default_factory=list)
    answer: Optional[RankedAnswer] = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "schema": RECORD_SCHEMA_VERSION,
            "task": self.task.to_dict(),
            "variant": self.variant,
            "mode": self.mode,
            "hints": self.hints,
            "prompt_digests": list(self.prompt_digests),
            "answer": self.answer.to_dict() if self.answer else None,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PredictionRecord":
        answer = data.get("answer")
        return cls(
            task=QueryTask.from_dict(data["task"]),
            variant=data["variant"],
            mode=data["mode"],
            hints=data.get("hints", {}),
            prompt_digests=list(data.get("prompt_digests", [])),
            answer=RankedAnswer.from_dict(answer) if answer else None,
            error=data.get("error"),
        )


def write_records(path: str | Path, records: Iterable[PredictionRecord]) -> int:
    """Write records as JSONL; returns the number written."""
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(
                json.dumps(record.to_dict(), ensure_ascii=False, sort_keys=True)
            )
            handle.write("\n")
            count += 1
    return count


def read_records(path: str | Path) -> list[PredictionRecord]:
    records = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                records.append(PredictionRecord.from_dict(json.loads(line)))
    return records


def _digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(slots=True)
class _Runtime:
    """Everything predict_one needs besides the task itself."""

    graph: KnowledgeGraph
    ontology: Optional[Ontology]
    backend: CompletionBackend
    cache: Optional[ResponseCache]
    tournament: TournamentConfig
    model_id: str = DEFAULT_MODEL_ID
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    retry: Optional[RetryPolicy] = None
    max_hops: int = 5
    max_paths: int = 64
    max_grounded: int = 16

    def request(self, prompt: str) -> CompletionRequest:
        return CompletionRequest(
            model_id=self.model_id,
            prompt=prompt,
            temperature=self.temperature,
            max_output_tokens=self.max_output_tokens,
        )


def validate_resources(
    variant: PromptVariant, g: KnowledgeGraph, o: Optional[Ontology]
) -> None:
    """Fail fast (before any backend call) when a variant lacks its inputs."""
    if variant is PromptVariant.ONTOLOGY_INDUCTION:
        raise ConfigError("ontology_induction is not a prediction variant")
    if variant in ONTOLOGY_VARIANTS and o is None:
        raise ConfigError(f"variant {variant.value} requires an ontology")
    if variant in CANDIDATE_VARIANTS and g.node_category is None:
        raise ConfigError(
            f"variant {variant.value} requires node categories; assign them first"
        )


def run_tournament(
    backend: CompletionBackend,
    cache: Optional[ResponseCache],
    task: QueryTask,
    pool: Sequence[str],
    tcfg: TournamentConfig,
    category: str,
    *,
    triplet: Optional[str] = None,
    model_id: str = DEFAULT_MODEL_ID,
    temperature: float = DEFAULT_TEMPERATURE,
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS,
    retry: Optional[RetryPolicy] = None,
) -> tuple[list[str], list[str], int, int]:
    """Shrink an oversized candidate pool to a shortlist via batch calls.

    The pool is split into contiguous batches; each batch call yields one
    winner (or ``winners_per_batch`` of them in multi-winner mode). Returns
    (shortlist, prompt digests, batch count, failed batch count). With a
    single-batch pool in single-winner mode the tournament is skipped and
    the pool itself is the shortlist.
    """
    if not pool:
        raise ValueError("pool must be non-empty")
    if triplet is None:
        triplet = render_triplet(task)
    if tcfg.mode is TournamentMode.SINGLE_WINNER and len(pool) <= tcfg.batch_size:
        return list(pool), [], 0, 0
    template = (
        TOURNAMENT_SINGLE
        if tcfg.mode is TournamentMode.SINGLE_WINNER
        else TOURNAMENT_MULTI
    )
    batches = [
        pool[i : i + tcfg.batch_size] for i in range(0, len(pool), tcfg.batch_size)
    ]
    digests: list[str] = []
    winners: list[str] = []
    failed = 0
    for batch in batches:
        bindings = {
            "triplet": triplet,
            "type": category,
            "data": format_hint_list(batch),
        }
        if tcfg.mode is TournamentMode.MULTI_WINNER:
            bindings["winners"] = str(tcfg.winners_per_batch)
        prompt = render_template(template, bindings)
        digests.append(_digest(prompt))
        request = CompletionRequest(
            model_id=model_id,
            prompt=prompt,
            temperature=temperature,
            max_output_tokens=max_output_tokens,
        )
        result = cached_complete(backend, cache, request, retry)
        try:
            if tcfg.mode is TournamentMode.SINGLE_WINNER:
                winners.append(parse_single_winner(result.text, batch))
            else:
                winners.extend(
                    parse_multi_winners(result.text, batch, tcfg.winners_per_batch)
                )
        except NoWinnerError:
            failed += 1
    if failed == len(batches):
        raise AllBatchesFailedError(
            f"all {len(batches)} tournament batches failed to parse"
        )
    shortlist = list(dict.fromkeys(winners))[: tcfg.shortlist_cap]
    return shortlist, digests, len(batches), failed


def _known_category(o: Ontology, task: QueryTask) -> str:
    # inverse of the missing slot: the category of the node we do have
    if task.missing_slot is MissingSlot.TAIL:
        return o.head_category(task.relation)
    return o.tail_category(task.relation)


def predict_one(
    g: KnowledgeGraph,
    o: Optional[Ontology],
    backend: CompletionBackend,
    cache: Optional[ResponseCache],
    task: QueryTask,
    variant: PromptVariant,
    tcfg: Optional[TournamentConfig] = None,
    mode: PredictionMode = PredictionMode.TAIL,
    *,
    model_id: str = DEFAULT_MODEL_ID,
    temperature: float = DEFAULT_TEMPERATURE,
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS,
    retry: Optional[RetryPolicy] = None,
    max_hops: int = 5,
    max_paths: int = 64,
    max_grounded: int = 16,
) -> PredictionRecord:
    """Answer one task under one variant; failures land in the record.

    Inverse head prediction rewrites the rendered triplet to
    ``known --> inverse relation --> ?`` while hint assembly keeps using
    the original relation and slot (the inverse label exists only as text).
    """
    variant = PromptVariant(variant)
    tcfg = tcfg or TournamentConfig()
    if not mode.applies_to(task.missing_slot):
        raise ValueError(f"mode {mode.value} does not apply to slot {task.missing_slot.value}")
    validate_resources(variant, g, o)
    rt = _Runtime(
        graph=g,
        ontology=o,
        backend=backend,
        cache=cache,
        tournament=tcfg,
        model_id=model_id,
        temperature=temperature,
        max_output_tokens=max_output_tokens,
        retry=retry,
        max_hops=max_hops,
        max_paths=max_paths,
        max_grounded=max_grounded,
    )
    record = PredictionRecord(task=task, variant=variant.value, mode=mode.value)
    if mode is PredictionMode.INVERSE_HEAD:
        rendered_task = QueryTask(
            task.known_entity, inverse_relation(task.relation), MissingSlot.TAIL
        )
    else:
        rendered_task = task
    triplet = render_triplet(rendered_task)
    try:
        bindings, hints, extra_digests = _assemble_hints(rt, task, variant, triplet)
        record.hints = hints
        record.prompt_digests.extend(extra_digests)
        prompt = render_template(variant.value, bindings)
        record.prompt_digests.append(_digest(prompt))
        result = cached_complete(backend, cache, rt.request(prompt), rt.retry)
        record.answer = parse_ranked_answer(result.text)
    except Exception as exc:  # noqa: BLE001 - a run must survive bad records
        record.error = f"{type(exc).__name__}: {exc}"
    return record


def _assemble_hints(
    rt: _Runtime, task: QueryTask, variant: PromptVariant, triplet: str
) -> tuple[dict, dict, list[str]]:
    """Build the variant's placeholder bindings and the audit summary."""
    g, o = rt.graph, rt.ontology
    bindings: dict[str, str] = {"triplet": triplet}
    hints: dict = {}
    digests: list[str] = []

    if variant is PromptVariant.VANILLA:
        return bindings, hints, digests

    if variant is PromptVariant.NEIGHBORS:
        known = task.known_entity
        items = []
        for relation, other, direction in neighbors(g, known):
            if direction == "out":
                items.append(f"{known} --> {relation} --> {other}")
            else:
                items.append(f"{other} --> {relation} --> {known}")
        bindings["known node"] = known
        bindings["neighbours"] = format_hint_list(items)
        hints["n_neighbors"] = len(items)
        return bindings, hints, digests

    assert o is not None  # guarded by validate_resources
    missing_category = infer_missing_category(o, task.relation, task.missing_slot)
    known_category = _known_category(o, task)
    hints["category"] = missing_category

    if variant is PromptVariant.ONTOLOGY:
        bindings["type"] = missing_category
        return bindings, hints, digests

    needs_paths = variant in (
        PromptVariant.ONTOLOGY_PATHS,
        PromptVariant.ONTOLOGY_PLUS_PATHS,
        PromptVariant.CANDIDATES_ONTOLOGY_PATHS,
        PromptVariant.CANDIDATES_ONTOLOGY_PATHS_HINT,
        PromptVariant.CANDIDATES_GRAPH_PATHS,
    )
    enumeration = None
    if needs_paths:
        enumeration = enumerate_ontology_paths(
            o,
            known_category,
            missing_category,
            exclude_relation=task.relation,
            max_hops=rt.max_hops,
            max_paths=rt.max_paths,
        )
        hints["n_paths"] = len(enumeration.paths)
        if enumeration.truncated:
            hints["paths_truncated"] = True

    if variant in (PromptVariant.ONTOLOGY_PATHS, PromptVariant.ONTOLOGY_PLUS_PATHS):
        bindings["known node"] = task.known_entity
        bindings["ontology paths"] = format_hint_list(
            [format_ontology_path(p) for p in enumeration.paths]
        )
        # The printed templates reuse one {type} token: in the paths-only
        # variant it labels the known node, everywhere a missing-type hint
        # line exists it must carry the missing node's category.
        if variant is PromptVariant.ONTOLOGY_PATHS:
            bindings["type"] = known_category
        else:
            bindings["type"] = missing_category
        return bindings, hints, digests

    # candidate variants: category-filtered pool, tournament when oversized
    pool = nodes_by_category(g, missing_category)
    hints["n_candidates"] = len(pool)
    if pool:
        shortlist, t_digests, n_batches, failed = run_tournament(
            rt.backend,
            rt.cache,
            task,
            pool,
            rt.tournament,
            missing_category,
            triplet=triplet,
            model_id=rt.model_id,
            temperature=rt.temperature,
            max_output_tokens=rt.max_output_tokens,
            retry=rt.retry,
        )
        digests.extend(t_digests)
        hints["n_batches"] = n_batches
        if failed:
            hints["failed_batches"] = failed
    else:
        shortlist = []
        hints["n_batches"] = 0
    hints["candidates"] = shortlist
    bindings["type"] = missing_category
    bindings["data"] = format_hint_list(shortlist)

    if variant in (
        PromptVariant.CANDIDATES_ONTOLOGY_PATHS,
        PromptVariant.CANDIDATES_ONTOLOGY_PATHS_HINT,
    ):
        bindings["known node"] = task.known_entity
        bindings["ontology paths"] = format_hint_list(
            [format_ontology_path(p) for p in enumeration.paths]
        )
    elif variant is PromptVariant.CANDIDATES_GRAPH_PATHS:
        grounded = ground_paths(
            g, task.known_entity, enumeration.paths, max_grounded=rt.max_grounded
        )
        hints["n_graph_paths"] = len(grounded)
        bindings["graph paths"] = format_hint_list(
            [format_grounded_path(p) for p in grounded]
        )
    return bindings, hints, digests


def run_experiment(
    g_train: KnowledgeGraph,
    o: Optional[Ontology],
    test_tasks: Sequence[QueryTask],
    variant: PromptVariant,
    modes: Iterable[PredictionMode],
    tcfg: Optional[TournamentConfig] = None,
    backend: Optional[CompletionBackend] = None,
    cache: Optional[ResponseCache] = None,
    *,
    max_in_flight: int = 1,
    model_id: str = DEFAULT_MODEL_ID,
    temperature: float = DEFAULT_TEMPERATURE,
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS,
    retry: Optional[RetryPolicy] = None,
) -> list[PredictionRecord]:
    """One record per (task, applicable mode), in deterministic order.

    The run completes regardless of per-record failures and is resumable:
    rerunning with a warm cache replays every completion without new
    backend calls.
    """
    variant = PromptVariant(variant)
    if backend is None:
        raise ValueError("a completion backend is required")
    validate_resources(variant, g_train, o)
    requested = set(PredictionMode(m) for m in modes)
    ordered = [m for m in MODE_ORDER if m in requested]
    work = [
        (task, mode)
        for task in test_tasks
        for mode in ordered
        if mode.applies_to(task.missing_slot)
    ]

    def run(item: tuple[QueryTask, PredictionMode]) -> PredictionRecord:
        task, mode = item
        return predict_one(
            g_train,
            o,
            backend,
            cache,
            task,
            variant,
            tcfg,
            mode,
            model_id=model_id,
            temperature=temperature,
            max_output_tokens=max_output_tokens,
            retry=retry,
        )

    if max_in_flight <= 1:
        return [run(item) for item in work]
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(run, work))
