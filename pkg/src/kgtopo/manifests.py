"""Run manifests: enough provenance to reconstruct any stage output."""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path
from typing import Optional


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_digest(config: dict) -> str:
    payload = json.dumps(config, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def manifest_path(output_path: str | Path) -> Path:
    return Path(str(output_path) + ".manifest.json")


def write_manifest(
    output_path: str | Path,
    config: dict,
    inputs: list[str | Path],
    seed: Optional[int] = None,
    extra: Optional[dict] = None,
) -> Path:
    """Write ``<output>.manifest.json`` next to a stage output file."""
    from . import __version__

    doc = {
        "tool": "kgtopo",
        "version": __version__,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "config": config,
        "config_digest": config_digest(config),
        "inputs": [
            {"path": str(p), "sha256": file_digest(p)} for p in inputs
        ],
        "seed": seed,
    }
    if extra:
        doc.update(extra)
    path = manifest_path(output_path)
    path.write_text(
        json.dumps(doc, indent=2, ensure_ascii=False, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return path
