"""HTTP front end: one endpoint per pipeline stage.

The service is stateless; every request names its input and output files
explicitly, so stages stay independently runnable and cache-friendly.
"""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__, stages
from ..errors import KgtopoError
from .schemas import (
    BuildOntologyRequest,
    BuildOntologyResponse,
    EvalRequest,
    EvalResponse,
    HealthResponse,
    IngestRequest,
    IngestResponse,
    PathsRequest,
    PathsResponse,
    PredictRequest,
    PredictResponse,
    RenderRequest,
    RenderResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(title="kgtopo", version=__version__)

    @app.exception_handler(KgtopoError)
    async def _domain_error(request, exc: KgtopoError):
        return JSONResponse(
            status_code=400,
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    @app.exception_handler(FileNotFoundError)
    async def _missing_file(request, exc: FileNotFoundError):
        return JSONResponse(
            status_code=400,
            content={"error": "FileNotFound", "message": str(exc)},
        )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/ingest", response_model=IngestResponse)
    def ingest(req: IngestRequest) -> IngestResponse:
        return stages.stage_ingest(req)

    @app.post("/ontology/build", response_model=BuildOntologyResponse)
    def build_ontology(req: BuildOntologyRequest) -> BuildOntologyResponse:
        return stages.stage_build_ontology(req)

    @app.post("/paths", response_model=PathsResponse)
    def paths(req: PathsRequest) -> PathsResponse:
        return stages.stage_paths(req)

    @app.post("/render", response_model=RenderResponse)
    def render(req: RenderRequest) -> RenderResponse:
        return stages.stage_render(req)

    @app.post("/predict", response_model=PredictResponse)
    def predict(req: PredictRequest) -> PredictResponse:
        return stages.stage_predict(req)

    @app.post("/eval", response_model=EvalResponse)
    def evaluate(req: EvalRequest) -> EvalResponse:
        return stages.stage_eval(req)

    return app


app = create_app()
