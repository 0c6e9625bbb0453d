from __future__ import annotations

import json
import threading

import httpx
import pytest

from cotkt.backend import (
    CachedBackend,
    GenerationParams,
    HttpChatBackend,
    ModelReply,
    ReplayBackend,
    ResponseCache,
    fingerprint,
    write_replay_fixture,
)
from cotkt.errors import AuthFailed, BackendError, MalformedResponse, RateLimited, ReplayMiss
from cotkt.prompting import RenderedPrompt

PROMPT = RenderedPrompt(text="say hi", template_id="cot_extraction", item_id="item-0")
PARAMS = GenerationParams()


def chat_payload(content: str) -> dict:
    return {"choices": [{"message": {"role": "assistant", "content": content}}]}


def make_backend(handler, **kwargs) -> HttpChatBackend:
    kwargs.setdefault("backoff_base", 0.0)
    return HttpChatBackend(
        "https://api.test/v1", transport=httpx.MockTransport(handler), **kwargs
    )


class TestFingerprint:
    def test_shape_and_stability(self):
        fp = fingerprint(PROMPT, PARAMS, "m1")
        assert len(fp) == 64
        assert int(fp, 16) >= 0
        assert fp == fingerprint(PROMPT, PARAMS, "m1")

    def test_sensitive_to_every_input(self):
        base = fingerprint(PROMPT, PARAMS, "m1")
        other_prompt = RenderedPrompt(text="say bye", template_id="cot_extraction", item_id="item-0")
        assert fingerprint(other_prompt, PARAMS, "m1") != base
        assert fingerprint(PROMPT, PARAMS, "m2") != base
        assert fingerprint(PROMPT, GenerationParams(temperature=0.2), "m1") != base
        assert fingerprint(PROMPT, PARAMS, "m1", sample_index=1) != base

    def test_ignores_template_and_item_ids(self):
        relabeled = RenderedPrompt(text="say hi", template_id="confidence_inference", item_id="other")
        assert fingerprint(relabeled, PARAMS, "m1") == fingerprint(PROMPT, PARAMS, "m1")


class TestGenerationParams:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"temperature": -0.1},
            {"top_p": 0.0},
            {"top_p": 1.5},
            {"top_k": 0},
            {"max_tokens": 0},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            GenerationParams(**kwargs)

    def test_defaults(self):
        p = GenerationParams()
        assert (p.sample, p.temperature, p.top_p, p.top_k, p.max_tokens) == (
            True,
            0.7,
            0.95,
            5,
            512,
        )


class TestHttpChatBackend:
    def test_success_carries_reply_and_fingerprint(self):
        seen_bodies = []

        def handler(request: httpx.Request) -> httpx.Response:
            seen_bodies.append(json.loads(request.content))
            return httpx.Response(200, json=chat_payload("hello"))

        backend = make_backend(handler)
        reply = backend.complete(PROMPT, PARAMS, "m1")
        assert reply.raw_text == "hello"
        assert reply.model_id == "m1"
        assert reply.from_cache is False
        assert reply.request_fingerprint == fingerprint(PROMPT, PARAMS, "m1")

        body = seen_bodies[0]
        assert body["model"] == "m1"
        assert body["messages"] == [{"role": "user", "content": "say hi"}]
        assert body["temperature"] == 0.7
        assert body["top_p"] == 0.95
        assert body["max_tokens"] == 512
        assert "top_k" not in body

    def test_top_k_sent_only_when_enabled(self):
        bodies = []

        def handler(request: httpx.Request) -> httpx.Response:
            bodies.append(json.loads(request.content))
            return httpx.Response(200, json=chat_payload("ok"))

        make_backend(handler, send_top_k=True).complete(PROMPT, PARAMS, "m1")
        assert bodies[0]["top_k"] == 5

    def test_greedy_decoding_zeroes_temperature(self):
        bodies = []

        def handler(request: httpx.Request) -> httpx.Response:
            bodies.append(json.loads(request.content))
            return httpx.Response(200, json=chat_payload("ok"))

        make_backend(handler).complete(PROMPT, GenerationParams(sample=False), "m1")
        assert bodies[0]["temperature"] == 0.0

    def test_api_key_becomes_bearer_header(self):
        headers = []

        def handler(request: httpx.Request) -> httpx.Response:
            headers.append(request.headers.get("authorization"))
            return httpx.Response(200, json=chat_payload("ok"))

        make_backend(handler, api_key="sk-test").complete(PROMPT, PARAMS, "m1")
        assert headers[0] == "Bearer sk-test"

    def test_auth_failure_is_immediate(self):
        calls = []

        def handler(request: httpx.Request) -> httpx.Response:
            calls.append(1)
            return httpx.Response(401, json={"error": "bad key"})

        with pytest.raises(AuthFailed):
            make_backend(handler).complete(PROMPT, PARAMS, "m1")
        assert len(calls) == 1

    def test_rate_limit_retries_then_gives_up(self):
        calls = []

        def handler(request: httpx.Request) -> httpx.Response:
            calls.append(1)
            return httpx.Response(429)

        with pytest.raises(RateLimited):
            make_backend(handler, max_attempts=3).complete(PROMPT, PARAMS, "m1")
        assert len(calls) == 3

    def test_server_error_then_success(self):
        responses = [httpx.Response(500), httpx.Response(200, json=chat_payload("late"))]

        def handler(request: httpx.Request) -> httpx.Response:
            return responses.pop(0)

        reply = make_backend(handler).complete(PROMPT, PARAMS, "m1")
        assert reply.raw_text == "late"

    def test_transport_error_retries(self):
        state = {"calls": 0}

        def handler(request: httpx.Request) -> httpx.Response:
            state["calls"] += 1
            if state["calls"] == 1:
                raise httpx.ConnectError("refused")
            return httpx.Response(200, json=chat_payload("back"))

        assert make_backend(handler).complete(PROMPT, PARAMS, "m1").raw_text == "back"

    def test_unexpected_status_fails_fast(self):
        def handler(request: httpx.Request) -> httpx.Response:
            return httpx.Response(404, text="nope")

        with pytest.raises(BackendError, match="404"):
            make_backend(handler).complete(PROMPT, PARAMS, "m1")

    @pytest.mark.parametrize(
        "payload",
        [
            "not json at all",
            json.dumps({"choices": []}),
            json.dumps({"choices": [{"message": {}}]}),
            json.dumps({"choices": [{"message": {"content": 42}}]}),
        ],
    )
    def test_malformed_body_raises(self, payload):
        def handler(request: httpx.Request) -> httpx.Response:
            return httpx.Response(200, text=payload, headers={"content-type": "application/json"})

        with pytest.raises(MalformedResponse):
            make_backend(handler).complete(PROMPT, PARAMS, "m1")


class TestReplayBackend:
    def test_serves_fixture_and_misses_loudly(self, tmp_path):
        fp = fingerprint(PROMPT, PARAMS, "m1")
        fixture = tmp_path / "fixture.jsonl"
        write_replay_fixture(fixture, [{"fingerprint": fp, "raw_text": "recorded"}])
        backend = ReplayBackend(fixture)
        assert len(backend) == 1
        reply = backend.complete(PROMPT, PARAMS, "m1")
        assert reply.raw_text == "recorded"
        assert reply.request_fingerprint == fp

        with pytest.raises(ReplayMiss) as exc_info:
            backend.complete(PROMPT, PARAMS, "other-model")
        assert exc_info.value.fingerprint == fingerprint(PROMPT, PARAMS, "other-model")


class FlakyCountingBackend:
    """Test double that counts calls and replies with a fixed text."""

    def __init__(self, text: str = "inner reply"):
        self.calls = 0
        self.text = text

    def complete(self, prompt, params, model_id, *, sample_index=0) -> ModelReply:
        self.calls += 1
        return ModelReply(
            raw_text=self.text,
            model_id=model_id,
            request_fingerprint=fingerprint(prompt, params, model_id, sample_index=sample_index),
            latency_ms=3,
            from_cache=False,
        )


class TestResponseCache:
    def test_put_get_and_first_wins(self, tmp_path):
        cache = ResponseCache(tmp_path / "cache.jsonl")
        cache.put("f1", "first", "m1")
        cache.put("f1", "second", "m1")
        assert cache.get("f1") == "first"
        assert len(cache) == 1

    def test_persists_across_reopen(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        ResponseCache(path).put("f1", "kept", "m1")
        assert ResponseCache(path).get("f1") == "kept"

    def test_concurrent_puts_write_one_line_each(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        cache = ResponseCache(path)

        def put_many(start: int) -> None:
            for i in range(start, start + 20):
                cache.put(f"fp-{i % 10}", f"text-{i}", "m1")

        threads = [threading.Thread(target=put_many, args=(k,)) for k in (0, 10, 20)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        lines = path.read_text(encoding="utf-8").splitlines()
        fingerprints = [json.loads(line)["fingerprint"] for line in lines]
        assert sorted(fingerprints) == sorted({f"fp-{i}" for i in range(10)})


class TestCachedBackend:
    def test_second_call_is_served_from_cache(self, tmp_path):
        inner = FlakyCountingBackend()
        backend = CachedBackend(inner, ResponseCache(tmp_path / "cache.jsonl"))
        first = backend.complete(PROMPT, PARAMS, "m1")
        second = backend.complete(PROMPT, PARAMS, "m1")
        assert inner.calls == 1
        assert first.from_cache is False
        assert second.from_cache is True
        assert second.raw_text == "inner reply"
        assert second.latency_ms == 0

    def test_distinct_sample_indexes_miss_separately(self, tmp_path):
        inner = FlakyCountingBackend()
        backend = CachedBackend(inner, ResponseCache(tmp_path / "cache.jsonl"))
        backend.complete(PROMPT, PARAMS, "m1", sample_index=0)
        backend.complete(PROMPT, PARAMS, "m1", sample_index=1)
        assert inner.calls == 2
