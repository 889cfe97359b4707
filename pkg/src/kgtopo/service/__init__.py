"""FastAPI service wrapping the pipeline stages."""

from .schemas import (
    BackendConfig,
    BuildOntologyRequest,
    BuildOntologyResponse,
    EvalRequest,
    EvalResponse,
    IngestRequest,
    IngestResponse,
    PathsRequest,
    PathsResponse,
    PredictRequest,
    PredictResponse,
    RenderRequest,
    RenderResponse,
    TournamentSettings,
)

__all__ = [
    "BackendConfig",
    "BuildOntologyRequest",
    "BuildOntologyResponse",
    "EvalRequest",
    "EvalResponse",
    "IngestRequest",
    "IngestResponse",
    "PathsRequest",
    "PathsResponse",
    "PredictRequest",
    "PredictResponse",
    "RenderRequest",
    "RenderResponse",
    "TournamentSettings",
    "create_app",
]


def create_app():
    from .app import create_app as _create_app

    return _create_app()
