"""Pluggable chat-completion backends with caching and bounded concurrency.

Two backends ship with the package: a deterministic scripted mock for
offline runs and tests, and an OpenAI-compatible HTTP client for live
runs. Responses are cached on disk keyed by a digest of the full request,
so interrupted runs resume without repeating calls.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

import requests

from .errors import (
    AuthError,
    BackendError,
    BackendRefusedError,
    CacheIoError,
    RateLimitedError,
    TransportError,
)

DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_OUTPUT_TOKENS = 2000
DEFAULT_MODEL_ID = "gpt-4-32k"

API_KEY_ENV = "KGTOPO_API_KEY"
API_KEY_ENV_FALLBACK = "OPENAI_API_KEY"


@dataclass(frozen=True, slots=True)
class CompletionRequest:
    model_id: str
    prompt: str
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature must be in [0, 2], got {self.temperature}")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")


@dataclass(slots=True)
class CompletionResult:
    text: str
    usage: Optional[dict] = None
    latency: float = 0.0
    from_cache: bool = False


def cache_key(req: CompletionRequest) -> str:
    """Digest identifying a request; equal requests yield equal keys."""
    payload = json.dumps(
        {
            "model_id": req.model_id,
            "prompt": req.prompt,
            "temperature": req.temperature,
            "max_output_tokens": req.max_output_tokens,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class CompletionBackend(Protocol):
    def complete_once(self, req: CompletionRequest) -> str:
        """Perform one completion attempt; raise a BackendError on failure."""
        ...


class MockBackend:
    """Scripted backend: deterministic, offline, with a call log.

    Script entries are ``{"match": <text>, "response": <text>}``; an entry
    matches when its text equals the prompt or is a substring of it. The
    first matching entry wins. A ``responder`` callable may be supplied
    instead of (or as a fallback to) script entries.
    """

    def __init__(
        self,
        entries: Optional[Sequence[dict]] = None,
        responder: Optional[Callable[[CompletionRequest], str]] = None,
    ):
        self.entries = list(entries or [])
        self.responder = responder
        self.calls: list[CompletionRequest] = []
        self._lock = threading.Lock()

    @classmethod
    def from_script(cls, path: str | Path) -> "MockBackend":
        entries = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(entries, list):
            raise ValueError("mock script must be a JSON array of entries")
        return cls(entries=entries)

    @property
    def call_count(self) -> int:
        return len(self.calls)

    def complete_once(self, req: CompletionRequest) -> str:
        with self._lock:
            self.calls.append(req)
        for entry in self.entries:
            match = entry["match"]
            if match == req.prompt or match in req.prompt:
                return entry["response"]
        if self.responder is not None:
            return self.responder(req)
        raise BackendRefusedError("mock script has no entry matching the prompt")


class OpenAIChatBackend:
    """OpenAI-compatible chat-completions client (single user message)."""

    def __init__(
        self,
        endpoint: str,
        api_key: Optional[str] = None,
        timeout: float = 120.0,
        session: Optional[requests.Session] = None,
    ):
        self.endpoint = endpoint
        self.api_key = api_key if api_key is not None else resolve_api_key()
        self.timeout = timeout
        self.session = session or requests.Session()

    def complete_once(self, req: CompletionRequest) -> str:
        body = {
            "model": req.model_id,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = self.session.post(
                self.endpoint, json=body, headers=headers, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code in (401, 403):
            raise AuthError(f"backend returned {resp.status_code}")
        if resp.status_code == 429:
            raise RateLimitedError("backend returned 429")
        if resp.status_code >= 500:
            raise TransportError(f"backend returned {resp.status_code}")
        if resp.status_code >= 400:
            raise BackendRefusedError(
                f"backend returned {resp.status_code}: {resp.text[:500]}"
            )
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendRefusedError(f"malformed backend response: {exc}") from exc


def resolve_api_key() -> str:
    return os.environ.get(API_KEY_ENV) or os.environ.get(API_KEY_ENV_FALLBACK) or ""


@dataclass(slots=True)
class RetryPolicy:
    """Up to three retries of transient failures, backing off 1 s/4 s/16 s."""

    backoffs: tuple[float, ...] = (1.0, 4.0, 16.0)
    sleep: Callable[[float], None] = time.sleep

    @classmethod
    def with_retries(cls, retries: int) -> "RetryPolicy":
        """Quadrupling backoff (1 s, 4 s, 16 s, ...) capped at 60 s per wait."""
        return cls(backoffs=tuple(min(4.0**i, 60.0) for i in range(retries)))


def complete(
    backend: CompletionBackend,
    req: CompletionRequest,
    retry: Optional[RetryPolicy] = None,
) -> CompletionResult:
    """One completion with retry on rate limits and transport errors."""
    policy = retry or RetryPolicy()
    start = time.perf_counter()
    attempt = 0
    while True:
        try:
            text = backend.complete_once(req)
            return CompletionResult(text=text, latency=time.perf_counter() - start)
        except (RateLimitedError, TransportError):
            if attempt >= len(policy.backoffs):
                raise
            policy.sleep(policy.backoffs[attempt])
            attempt += 1


class ResponseCache:
    """Content-addressed directory of JSON completion records.

    Writes are atomic (temp file + rename), so concurrent writers may race
    on identical content without corrupting the store.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, req: CompletionRequest) -> Optional[str]:
        path = self._path(cache_key(req))
        if not path.exists():
            return None
        try:
            record = json.loads(path.read_text(encoding="utf-8"))
            return record["response"]
        except (OSError, ValueError, KeyError):
            return None  # unreadable record counts as a miss

    def put(self, req: CompletionRequest, response: str) -> None:
        record = {
            "request": {
                "model_id": req.model_id,
                "prompt": req.prompt,
                "temperature": req.temperature,
                "max_output_tokens": req.max_output_tokens,
            },
            "response": response,
            "timestamp": time.time(),
        }
        path = self._path(cache_key(req))
        try:
            fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                json.dump(record, handle, ensure_ascii=False)
            os.replace(tmp, path)
        except OSError as exc:
            raise CacheIoError(f"cannot write cache record: {exc}") from exc


def cached_complete(
    backend: CompletionBackend,
    cache: Optional[ResponseCache],
    req: CompletionRequest,
    retry: Optional[RetryPolicy] = None,
) -> CompletionResult:
    """Serve from cache when possible; otherwise complete and store."""
    if cache is not None:
        hit = cache.get(req)
        if hit is not None:
            return CompletionResult(text=hit, from_cache=True)
    result = complete(backend, req, retry)
    if cache is not None:
        cache.put(req, result.text)
    return result


def complete_many(
    backend: CompletionBackend,
    cache: Optional[ResponseCache],
    reqs: Sequence[CompletionRequest],
    max_in_flight: int = 1,
    retry: Optional[RetryPolicy] = None,
) -> list[CompletionResult | BackendError]:
    """Complete a batch with at most ``max_in_flight`` outstanding requests.

    Results are positionally aligned with the requests; a failing item
    yields its exception in place without aborting the rest.
    """
    if max_in_flight < 1:
        raise ValueError("max_in_flight must be >= 1")

    def run(req: CompletionRequest) -> CompletionResult | BackendError:
        try:
            return cached_complete(backend, cache, req, retry)
        except BackendError as exc:
            return exc

    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(run, reqs))
