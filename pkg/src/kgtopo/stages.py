"""Pipeline stages: the shared layer behind the HTTP service and the CLI.

Each stage takes a request model, touches only the files named in it, and
returns a response model. Outputs that land on disk get a sibling
``.manifest.json`` recording the config digest, input digests, seed, and
tool version.
"""

from __future__ import annotations

from functools import reduce
from pathlib import Path

from . import evaluation, manifests
from .errors import ConfigError
from .gateway import MockBackend, OpenAIChatBackend, ResponseCache, RetryPolicy
from .graphs import (
    KnowledgeGraph,
    MissingSlot,
    load_triples,
    merge,
    tasks_from_triples,
)
from .ontology import Ontology, assign_node_categories, build_ontology, verify_ontology
from .paths import enumerate_ontology_paths, format_ontology_path
from .predictor import (
    PredictionMode,
    TournamentConfig,
    TournamentMode,
    run_experiment,
    validate_resources,
    write_records,
)
from .prompts import CANDIDATE_VARIANTS, PromptVariant, render_prompt
from .service.schemas import (
    BackendConfig,
    BuildOntologyRequest,
    BuildOntologyResponse,
    EvalRequest,
    EvalResponse,
    EvalRow,
    ComparisonRow,
    IngestRequest,
    IngestResponse,
    PathsRequest,
    PathsResponse,
    PredictRequest,
    PredictResponse,
    RenderRequest,
    RenderResponse,
)


def make_backend(config: BackendConfig):
    if config.kind == "mock":
        if not config.script_path:
            raise ConfigError("mock backend needs script_path")
        return MockBackend.from_script(config.script_path)
    if not config.endpoint:
        raise ConfigError("openai backend needs an endpoint URL")
    return OpenAIChatBackend(endpoint=config.endpoint)


def load_merged_graph(paths: list[str], on_duplicate: str = "dedupe") -> KnowledgeGraph:
    graphs = [load_triples(p, on_duplicate) for p in paths]
    return reduce(merge, graphs)


def stage_ingest(req: IngestRequest) -> IngestResponse:
    g = load_triples(req.path, req.on_duplicate)
    return IngestResponse(
        nodes=len(g.nodes), relations=len(g.relations), triples=len(g.triples)
    )


def stage_build_ontology(req: BuildOntologyRequest) -> BuildOntologyResponse:
    g = load_merged_graph(req.graph_paths)
    backend = make_backend(req.backend)
    onto = build_ontology(
        backend,
        g,
        n_samples=req.samples,
        seed=req.seed,
        strict=req.strict,
        model_id=req.backend.model_id,
        retry=RetryPolicy.with_retries(req.backend.retries),
    )
    report = verify_ontology(onto)
    onto.save(req.out_path)
    manifest = manifests.write_manifest(
        req.out_path,
        config=req.model_dump(),
        inputs=list(req.graph_paths),
        seed=req.seed,
        extra={
            "backend_calls": getattr(backend, "call_count", None),
            "violations": report.violations,
        },
    )
    return BuildOntologyResponse(
        categories=len(onto.categories),
        relations=len(onto.relation_map),
        edges=len(onto.edges),
        violations=report.violations,
        out_path=str(req.out_path),
        manifest_path=str(manifest),
    )


def stage_paths(req: PathsRequest) -> PathsResponse:
    onto = Ontology.load(req.ontology_path)
    head_cat, tail_cat = onto.relation_map.get(req.relation, (None, None))
    if head_cat is None:
        raise ConfigError(f"relation not in ontology: {req.relation!r}")
    if req.slot == "tail":
        src, dst = head_cat, tail_cat
    else:
        src, dst = tail_cat, head_cat
    enumeration = enumerate_ontology_paths(
        onto, src, dst, exclude_relation=req.relation,
        max_hops=req.max_hops, max_paths=req.max_paths,
    )
    return PathsResponse(
        source_category=src,
        target_category=dst,
        paths=[format_ontology_path(p) for p in enumeration.paths],
        truncated=enumeration.truncated,
    )


def stage_render(req: RenderRequest) -> RenderResponse:
    variant = PromptVariant(req.variant)
    return RenderResponse(text=render_prompt(variant, req.bindings))


def stage_predict(req: PredictRequest) -> PredictResponse:
    variant = PromptVariant(req.variant)
    g = load_merged_graph(req.train_graph_paths)
    onto = Ontology.load(req.ontology_path) if req.ontology_path else None
    if variant in CANDIDATE_VARIANTS:
        if onto is None:
            raise ConfigError(f"variant {variant.value} requires an ontology")
        g = assign_node_categories(g, onto)
    validate_resources(variant, g, onto)  # fail before any backend call

    test_graph = load_triples(req.test_path)
    modes = [PredictionMode(m) for m in req.modes]
    tasks = []
    slots = set()
    for mode in modes:
        slots.add(MissingSlot.TAIL if mode is PredictionMode.TAIL else MissingSlot.HEAD)
    for slot in sorted(slots, key=lambda s: s.value):
        tasks.extend(tasks_from_triples(test_graph.triples, slot))
    if req.limit is not None:
        per_slot = {}
        limited = []
        for task in tasks:
            per_slot.setdefault(task.missing_slot, 0)
            if per_slot[task.missing_slot] < req.limit:
                per_slot[task.missing_slot] += 1
                limited.append(task)
        tasks = limited

    backend = make_backend(req.backend)
    cache = ResponseCache(req.cache_dir) if req.cache_dir else None
    tcfg = TournamentConfig(
        batch_size=req.tournament.batch_size,
        winners_per_batch=req.tournament.winners_per_batch,
        shortlist_cap=req.tournament.shortlist_cap,
        mode=TournamentMode(req.tournament.mode),
    )
    records = run_experiment(
        g,
        onto,
        tasks,
        variant,
        modes,
        tcfg,
        backend,
        cache,
        max_in_flight=req.max_in_flight,
        model_id=req.backend.model_id,
        temperature=req.backend.temperature,
        max_output_tokens=req.backend.max_output_tokens,
        retry=RetryPolicy.with_retries(req.backend.retries),
    )
    n = write_records(req.out_path, records)
    inputs = list(req.train_graph_paths) + [req.test_path]
    if req.ontology_path:
        inputs.append(req.ontology_path)
    manifest = manifests.write_manifest(
        req.out_path,
        config=req.model_dump(),
        inputs=inputs,
        seed=req.seed,
        extra={
            "backend_calls": getattr(backend, "call_count", None),
            "n_records": n,
            "n_errors": sum(1 for r in records if r.error),
        },
    )
    return PredictResponse(
        records=n,
        errors=sum(1 for r in records if r.error),
        backend_calls=getattr(backend, "call_count", 0) or 0,
        out_path=str(req.out_path),
        manifest_path=str(manifest),
    )


def stage_eval(req: EvalRequest) -> EvalResponse:
    from .predictor import read_records

    records = read_records(req.run_path)
    report = evaluation.evaluate_run(records)
    table = evaluation.render_report_table(report)
    rows = [EvalRow(**row) for row in report.to_dicts()]
    comparison = None
    comparison_table = None
    if req.compare_path:
        other = read_records(req.compare_path)
        cmp = evaluation.compare_head_modes(records, other)
        comparison = [
            ComparisonRow(
                k=r.k,
                direct_correct=r.direct_correct,
                inverse_correct=r.inverse_correct,
                agreement=r.agreement,
            )
            for r in cmp.rows
        ]
        comparison_table = evaluation.render_comparison_table(cmp)
    if req.csv_path:
        Path(req.csv_path).write_text(
            evaluation.report_to_csv(report), encoding="utf-8"
        )
    return EvalResponse(
        rows=rows, table=table, comparison=comparison, comparison_table=comparison_table
    )
