"""Model backends: an HTTP chat-completions client, a replay backend, and a cache.

Every completion request is identified by a 256-bit fingerprint over the
request's meaning (model id, prompt text, generation parameters, sample
index) and nothing attempt-specific, so retries, cache lookups, and replay
fixtures all key on the same value. The cache is an append-only JSONL file of
fingerprint/raw-text pairs; the replay backend serves a frozen fixture of the
same shape and fails loudly on any miss, which keeps offline runs honest.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol

import httpx

from .errors import (
    AuthFailed,
    BackendError,
    MalformedResponse,
    RateLimited,
    ReplayMiss,
)
from .prompting import RenderedPrompt

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenerationParams:
    """Decoding settings carried into every request and every fingerprint."""

    sample: bool = True
    temperature: float = 0.7
    top_p: float = 0.95
    top_k: int = 5
    max_tokens: int = 512

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must lie in (0, 1]")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "sample": self.sample,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "top_k": self.top_k,
            "max_tokens": self.max_tokens,
        }


@dataclass(frozen=True)
class ModelReply:
    """One raw completion plus where it came from and how long it took."""

    raw_text: str
    model_id: str
    request_fingerprint: str
    latency_ms: int
    from_cache: bool


def fingerprint(
    prompt: RenderedPrompt,
    params: GenerationParams,
    model_id: str,
    *,
    sample_index: int = 0,
) -> str:
    """Stable 256-bit request identity as a 64-char hex string.

    Covers the model id, the exact prompt text, every generation parameter,
    and the sample index for multi-sample harvests; never covers timestamps
    or retry attempts, so a retried request keeps its identity.
    """
    payload = {
        "model_id": model_id,
        "prompt": prompt.text,
        "params": params.to_dict(),
        "sample_index": sample_index,
    }
    canon = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


class Backend(Protocol):
    def complete(
        self,
        prompt: RenderedPrompt,
        params: GenerationParams,
        model_id: str,
        *,
        sample_index: int = 0,
    ) -> ModelReply:
        ...


class HttpChatBackend:
    """Minimal client for an OpenAI-style ``/chat/completions`` endpoint.

    The prompt travels as a single user message. Transient failures (429,
    5xx, transport errors) are retried with exponential backoff; credential
    rejections fail immediately. ``send_top_k`` controls whether the top_k
    parameter goes on the wire, for endpoints that accept the extension.
    A bounded semaphore caps in-flight requests under concurrent callers.
    """

    def __init__(
        self,
        base_url: str,
        *,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_attempts: int = 4,
        backoff_base: float = 0.5,
        send_top_k: bool = False,
        max_in_flight: int = 8,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.send_top_k = send_top_k
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)
        self._gate = threading.BoundedSemaphore(max_in_flight)

    def _body(self, prompt: RenderedPrompt, params: GenerationParams, model_id: str) -> dict[str, Any]:
        body: dict[str, Any] = {
            "model": model_id,
            "messages": [{"role": "user", "content": prompt.text}],
            # The schema has no sampling switch; greedy decoding is temperature 0.
            "temperature": params.temperature if params.sample else 0.0,
            "top_p": params.top_p,
            "max_tokens": params.max_tokens,
        }
        if self.send_top_k:
            body["top_k"] = params.top_k
        return body

    def complete(
        self,
        prompt: RenderedPrompt,
        params: GenerationParams,
        model_id: str,
        *,
        sample_index: int = 0,
    ) -> ModelReply:
        fp = fingerprint(prompt, params, model_id, sample_index=sample_index)
        body = self._body(prompt, params, model_id)
        url = f"{self.base_url}/chat/completions"
        last_error: str = "no attempt made"
        last_status: int | None = None
        start = time.monotonic()
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_base * (2 ** (attempt - 1)))
            try:
                with self._gate:
                    response = self._client.post(url, json=body)
            except httpx.HTTPError as exc:
                last_error = f"transport error: {exc}"
                logger.warning("attempt %d/%d failed: %s", attempt + 1, self.max_attempts, last_error)
                continue
            last_status = response.status_code
            if response.status_code in (401, 403):
                raise AuthFailed(f"endpoint returned {response.status_code}")
            if response.status_code == 429 or response.status_code >= 500:
                last_error = f"status {response.status_code}"
                logger.warning("attempt %d/%d failed: %s", attempt + 1, self.max_attempts, last_error)
                continue
            if response.status_code != 200:
                raise BackendError(f"endpoint returned {response.status_code}: {response.text[:200]}")
            latency_ms = int((time.monotonic() - start) * 1000)
            return ModelReply(
                raw_text=_extract_content(response),
                model_id=model_id,
                request_fingerprint=fp,
                latency_ms=latency_ms,
                from_cache=False,
            )
        if last_status == 429:
            raise RateLimited(f"gave up after {self.max_attempts} attempts ({last_error})")
        raise BackendError(f"gave up after {self.max_attempts} attempts ({last_error})")

    def close(self) -> None:
        self._client.close()


def _extract_content(response: httpx.Response) -> str:
    try:
        payload = response.json()
    except (json.JSONDecodeError, ValueError) as exc:
        raise MalformedResponse(f"response body is not JSON: {exc}") from exc
    try:
        content = payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"missing choices[0].message.content: {exc!r}") from exc
    if not isinstance(content, str):
        raise MalformedResponse("message content is not a string")
    return content


class ReplayBackend:
    """Serve recorded replies from a JSONL fixture keyed by fingerprint."""

    def __init__(self, fixture_path: str | Path):
        self.fixture_path = Path(fixture_path)
        self._replies: dict[str, str] = {}
        with open(self.fixture_path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                self._replies[obj["fingerprint"]] = obj["raw_text"]

    def __len__(self) -> int:
        return len(self._replies)

    def complete(
        self,
        prompt: RenderedPrompt,
        params: GenerationParams,
        model_id: str,
        *,
        sample_index: int = 0,
    ) -> ModelReply:
        fp = fingerprint(prompt, params, model_id, sample_index=sample_index)
        if fp not in self._replies:
            raise ReplayMiss(fp)
        return ModelReply(
            raw_text=self._replies[fp],
            model_id=model_id,
            request_fingerprint=fp,
            latency_ms=0,
            from_cache=False,
        )


def write_replay_fixture(path: str | Path, entries: Iterable[Mapping[str, str]]) -> None:
    """Write fixture entries ({fingerprint, raw_text}) as JSONL."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(
                json.dumps(
                    {"fingerprint": entry["fingerprint"], "raw_text": entry["raw_text"]},
                    ensure_ascii=False,
                )
                + "\n"
            )


class ResponseCache:
    """Append-only fingerprint -> raw reply store backed by one JSONL file.

    Writers are serialized within the process; each entry is a single
    appended line, so readers never observe a torn record. Entries are never
    rewritten: the first reply recorded for a fingerprint wins.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, str] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    obj = json.loads(line)
                    self._entries.setdefault(obj["fingerprint"], obj["raw_text"])

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, fp: str) -> str | None:
        return self._entries.get(fp)

    def put(self, fp: str, raw_text: str, model_id: str = "") -> None:
        with self._lock:
            if fp in self._entries:
                return
            self._entries[fp] = raw_text
            line = json.dumps(
                {"fingerprint": fp, "model_id": model_id, "raw_text": raw_text},
                ensure_ascii=False,
            )
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")


class CachedBackend:
    """Cache layer over any backend; hits skip the wrapped backend entirely."""

    def __init__(self, inner: Backend, cache: ResponseCache):
        self.inner = inner
        self.cache = cache

    def complete(
        self,
        prompt: RenderedPrompt,
        params: GenerationParams,
        model_id: str,
        *,
        sample_index: int = 0,
    ) -> ModelReply:
        fp = fingerprint(prompt, params, model_id, sample_index=sample_index)
        hit = self.cache.get(fp)
        if hit is not None:
            return ModelReply(
                raw_text=hit,
                model_id=model_id,
                request_fingerprint=fp,
                latency_ms=0,
                from_cache=True,
            )
        reply = self.inner.complete(prompt, params, model_id, sample_index=sample_index)
        self.cache.put(fp, reply.raw_text, model_id)
        return reply
