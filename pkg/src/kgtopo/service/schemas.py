"""Pydantic request/response models for the pipeline stages.

These are the wire contract of the HTTP service; the CLI builds the same
models and runs the stages in-process, so both entry points validate
identically.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class BackendConfig(BaseModel):
    """Which completion backend a stage should use.

    The API key is never part of a request; live backends read it from the
    KGTOPO_API_KEY (or OPENAI_API_KEY) environment variable.
    """

    kind: Literal["mock", "openai"] = "mock"
    script_path: Optional[str] = None
    endpoint: Optional[str] = None
    model_id: str = "gpt-4-32k"
    temperature: float = 0.0
    max_output_tokens: int = 2000
    retries: int = 3


class TournamentSettings(BaseModel):
    batch_size: int = 2000
    winners_per_batch: int = 1
    shortlist_cap: int = 100
    mode: Literal["single", "multi"] = "single"


class IngestRequest(BaseModel):
    path: str
    on_duplicate: Literal["keep", "dedupe"] = "dedupe"


class IngestResponse(BaseModel):
    nodes: int
    relations: int
    triples: int


class BuildOntologyRequest(BaseModel):
    graph_paths: list[str] = Field(min_length=1)
    out_path: str
    samples: int = 50
    seed: int = 0
    backend: BackendConfig = BackendConfig()
    strict: bool = False


class BuildOntologyResponse(BaseModel):
    categories: int
    relations: int
    edges: int
    violations: list[str]
    out_path: str
    manifest_path: str


class PathsRequest(BaseModel):
    ontology_path: str
    relation: str
    slot: Literal["head", "tail"] = "tail"
    max_hops: int = 5
    max_paths: int = 64


class PathsResponse(BaseModel):
    source_category: str
    target_category: str
    paths: list[str]
    truncated: bool


class RenderRequest(BaseModel):
    variant: str
    bindings: dict[str, str]


class RenderResponse(BaseModel):
    text: str


class PredictRequest(BaseModel):
    train_graph_paths: list[str] = Field(min_length=1)
    test_path: str
    out_path: str
    variant: str = "vanilla"
    modes: list[Literal["tail", "head-direct", "head-inverse"]] = ["tail"]
    ontology_path: Optional[str] = None
    cache_dir: Optional[str] = None
    backend: BackendConfig = BackendConfig()
    tournament: TournamentSettings = TournamentSettings()
    max_in_flight: int = 1
    limit: Optional[int] = None
    seed: int = 0


class PredictResponse(BaseModel):
    records: int
    errors: int
    backend_calls: int
    out_path: str
    manifest_path: str


class EvalRequest(BaseModel):
    run_path: str
    compare_path: Optional[str] = None
    csv_path: Optional[str] = None


class EvalRow(BaseModel):
    variant: str
    mode: str
    n_tasks: int
    hits1: float
    hits3: float
    hits10: float
    n_parse_failures: int


class ComparisonRow(BaseModel):
    k: int
    direct_correct: int
    inverse_correct: int
    agreement: int


class EvalResponse(BaseModel):
    rows: list[EvalRow]
    table: str
    comparison: Optional[list[ComparisonRow]] = None
    comparison_table: Optional[str] = None


class HealthResponse(BaseModel):
    status: str
    version: str
