"""``kgtopo`` command line: a thin client over the pipeline stages.

Every subcommand builds the same request model the HTTP service accepts.
By default the stage runs in-process; with ``--server URL`` the request is
POSTed to a running service instead. API keys come from the environment
(KGTOPO_API_KEY), never from flags.
"""

from __future__ import annotations

import json
import sys
from typing import Optional

import click
import requests

from . import __version__, stages
from .errors import KgtopoError
from .service.schemas import (
    BackendConfig,
    BuildOntologyRequest,
    EvalRequest,
    IngestRequest,
    PathsRequest,
    PredictRequest,
    RenderRequest,
)

VARIANT_CHOICES = [
    "vanilla",
    "ontology",
    "ontology_paths",
    "ontology_plus_paths",
    "neighbors",
    "candidates",
    "candidates_ontology",
    "candidates_ontology_paths",
    "candidates_ontology_paths_hint",
    "candidates_graph_paths",
    "ontology_induction",
]

_ENDPOINTS = {
    "ingest": "/ingest",
    "build-ontology": "/ontology/build",
    "paths": "/paths",
    "render": "/render",
    "predict": "/predict",
    "eval": "/eval",
}


def _dispatch(server: Optional[str], name: str, request, local_fn):
    """Run a stage in-process, or POST it to a remote service."""
    if not server:
        return local_fn(request).model_dump()
    url = server.rstrip("/") + _ENDPOINTS[name]
    resp = requests.post(url, json=request.model_dump(), timeout=None)
    if resp.status_code != 200:
        raise KgtopoError(f"server returned {resp.status_code}: {resp.text[:500]}")
    return resp.json()


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


server_option = click.option(
    "--server", default=None, help="Base URL of a running kgtopo service."
)


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Knowledge-graph completion pipeline."""


@main.command()
@click.argument("path", type=click.Path())
@click.option("--on-duplicate", type=click.Choice(["keep", "dedupe"]), default="dedupe")
@server_option
def ingest(path: str, on_duplicate: str, server: Optional[str]) -> None:
    """Load a TSV triple file and print its counts."""
    request = IngestRequest(path=path, on_duplicate=on_duplicate)
    try:
        out = _dispatch(server, "ingest", request, stages.stage_ingest)
    except Exception as exc:
        _fail(exc)
    click.echo(
        f"{out['nodes']:,} nodes, {out['relations']:,} relations, "
        f"{out['triples']:,} triples"
    )


def _backend_options(fn):
    fn = click.option("--backend", "backend_kind", type=click.Choice(["mock", "openai"]),
                      default="mock", show_default=True)(fn)
    fn = click.option("--mock-script", default=None,
                      help="JSON script for the mock backend.")(fn)
    fn = click.option("--endpoint", default=None,
                      help="Chat-completions URL for the openai backend.")(fn)
    fn = click.option("--model", "model_id", default="gpt-4-32k", show_default=True)(fn)
    fn = click.option("--temperature", type=float, default=0.0, show_default=True)(fn)
    fn = click.option("--max-output-tokens", type=int, default=2000, show_default=True)(fn)
    fn = click.option("--retries", type=int, default=3, show_default=True,
                      help="Retries on rate-limit/transport errors.")(fn)
    return fn


def _make_backend_config(backend_kind, mock_script, endpoint, model_id,
                         temperature, max_output_tokens, retries) -> BackendConfig:
    return BackendConfig(
        kind=backend_kind,
        script_path=mock_script,
        endpoint=endpoint,
        model_id=model_id,
        temperature=temperature,
        max_output_tokens=max_output_tokens,
        retries=retries,
    )


@main.command("build-ontology")
@click.option("--graph", "graphs", multiple=True, required=True, type=click.Path(),
              help="Triple file; repeat to merge several (dedupe union).")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--samples", type=int, default=50, show_default=True,
              help="Sample pairs shown to the backend per relation.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--strict/--no-strict", default=False,
              help="Fail instead of reporting verification violations.")
@_backend_options
@server_option
def build_ontology(graphs, out_path, samples, seed, strict, server, **backend_kwargs):
    """Induce the relation ontology for a graph via the backend."""
    request = BuildOntologyRequest(
        graph_paths=list(graphs),
        out_path=out_path,
        samples=samples,
        seed=seed,
        strict=strict,
        backend=_make_backend_config(**backend_kwargs),
    )
    try:
        out = _dispatch(server, "build-ontology", request, stages.stage_build_ontology)
    except Exception as exc:
        _fail(exc)
    click.echo(
        f"ontology: {out['categories']} categories, {out['relations']} relations, "
        f"{out['edges']} edges -> {out['out_path']}"
    )
    for violation in out["violations"]:
        click.echo(f"violation: {violation}", err=True)
    if out["violations"]:
        sys.exit(1)


@main.command()
@click.option("--ontology", "ontology_path", required=True, type=click.Path())
@click.option("--relation", required=True)
@click.option("--slot", type=click.Choice(["head", "tail"]), default="tail",
              show_default=True, help="Which slot of the triplet is missing.")
@click.option("--max-hops", type=int, default=5, show_default=True)
@click.option("--max-paths", type=int, default=64, show_default=True)
@server_option
def paths(ontology_path, relation, slot, max_hops, max_paths, server):
    """Print alternate ontology paths for a relation, one per line."""
    request = PathsRequest(
        ontology_path=ontology_path, relation=relation, slot=slot,
        max_hops=max_hops, max_paths=max_paths,
    )
    try:
        out = _dispatch(server, "paths", request, stages.stage_paths)
    except Exception as exc:
        _fail(exc)
    for line in out["paths"]:
        click.echo(line)
    if out["truncated"]:
        click.echo("(truncated)", err=True)


@main.command()
@click.option("--variant", type=click.Choice(VARIANT_CHOICES), required=True)
@click.option("--bindings", "bindings_path", required=True, type=click.Path(),
              help="JSON object mapping placeholder names to text.")
@server_option
def render(variant, bindings_path, server):
    """Render a prompt template with the given bindings."""
    try:
        with open(bindings_path, encoding="utf-8") as handle:
            bindings = json.load(handle)
        request = RenderRequest(variant=variant, bindings=bindings)
        out = _dispatch(server, "render", request, stages.stage_render)
    except Exception as exc:
        _fail(exc)
    click.echo(out["text"], nl=False)


# CLI flag -> (payload section, request field) for the predict command
_PREDICT_FIELDS = {
    "graphs": (None, "train_graph_paths"),
    "test_path": (None, "test_path"),
    "out_path": (None, "out_path"),
    "variant": (None, "variant"),
    "modes": (None, "modes"),
    "ontology_path": (None, "ontology_path"),
    "cache_dir": (None, "cache_dir"),
    "max_in_flight": (None, "max_in_flight"),
    "limit": (None, "limit"),
    "seed": (None, "seed"),
    "backend_kind": ("backend", "kind"),
    "mock_script": ("backend", "script_path"),
    "endpoint": ("backend", "endpoint"),
    "model_id": ("backend", "model_id"),
    "temperature": ("backend", "temperature"),
    "max_output_tokens": ("backend", "max_output_tokens"),
    "retries": ("backend", "retries"),
    "batch_size": ("tournament", "batch_size"),
    "winners_per_batch": ("tournament", "winners_per_batch"),
    "shortlist_cap": ("tournament", "shortlist_cap"),
    "tournament_mode": ("tournament", "mode"),
}


@main.command()
@click.option("--graph", "graphs", multiple=True, type=click.Path(),
              help="Training triple file; repeat to merge several.")
@click.option("--test", "test_path", default=None, type=click.Path())
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--variant", type=click.Choice(VARIANT_CHOICES[:-1]), default="vanilla",
              show_default=True)
@click.option("--mode", "modes", multiple=True,
              type=click.Choice(["tail", "head-direct", "head-inverse"]),
              default=("tail",), show_default=True)
@click.option("--ontology", "ontology_path", default=None, type=click.Path())
@click.option("--cache-dir", default=None, type=click.Path())
@click.option("--batch-size", type=int, default=2000, show_default=True)
@click.option("--winners-per-batch", type=int, default=1, show_default=True)
@click.option("--shortlist-cap", type=int, default=100, show_default=True)
@click.option("--tournament-mode", type=click.Choice(["single", "multi"]),
              default="single", show_default=True)
@click.option("--max-in-flight", type=int, default=1, show_default=True,
              help="Concurrent completions; 1 keeps runs bit-reproducible.")
@click.option("--limit", type=int, default=None,
              help="Only predict the first N test triplets per slot.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--config", "config_path", default=None, type=click.Path(),
              help="JSON file of PredictRequest fields; flags set on the "
                   "command line override it.")
@_backend_options
@server_option
@click.pass_context
def predict(ctx, config_path, server, **params):
    """Predict the missing node of every test triplet; write JSONL records."""
    payload: dict = {}
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as handle:
                payload.update(json.load(handle))
        except (OSError, ValueError) as exc:
            _fail(exc)
    from click.core import ParameterSource

    for param, (section, field) in _PREDICT_FIELDS.items():
        value = params[param]
        source = ctx.get_parameter_source(param)
        explicit = source is not None and source is not ParameterSource.DEFAULT
        if isinstance(value, tuple):
            value = list(value)
        target = payload if section is None else payload.setdefault(section, {})
        if explicit or field not in target:
            target[field] = value
    for required in ("train_graph_paths", "test_path", "out_path"):
        if not payload.get(required):
            _fail(KgtopoError(f"missing required setting: {required}"))
    try:
        request = PredictRequest(**payload)
        out = _dispatch(server, "predict", request, stages.stage_predict)
    except Exception as exc:
        _fail(exc)
    click.echo(
        f"{out['records']} records ({out['errors']} errors, "
        f"{out['backend_calls']} backend calls) -> {out['out_path']}"
    )


@main.command("eval")
@click.argument("run_path", type=click.Path())
@click.option("--compare", "compare_path", default=None, type=click.Path(),
              help="Second run (other head mode) to compare against.")
@click.option("--csv", "csv_path", default=None, type=click.Path())
@server_option
def eval_cmd(run_path, compare_path, csv_path, server):
    """Score a prediction run with Hits@{1,3,10}."""
    request = EvalRequest(run_path=run_path, compare_path=compare_path,
                          csv_path=csv_path)
    try:
        out = _dispatch(server, "eval", request, stages.stage_eval)
    except Exception as exc:
        _fail(exc)
    click.echo(out["table"])
    if out.get("comparison_table"):
        click.echo("")
        click.echo(out["comparison_table"])


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("kgtopo.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
