import sys
import os
import json
import socket

import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from config import EndpointConfig
from src.errors import AuthenticationError, EndpointError, TransientEndpointError
from src.mock_endpoint import MockEndpointServer, keyword_responder, queue_responder
from src.model_client import (
    ChatCompletionClient, ResponseCache, cache_key, classify_status, parse_completion, prompt_hash, query_model,
)
from src.models import EpisodeSeed, Game
from src.prompts import Intervention, build_induction_prompt
from src.transcripts import TranscriptDoc

KEY_ENV = "RULEBENCH_TEST_KEY"


def _config(server, **overrides):
    settings = dict(base_url=server.base_url, model_name="mock-model", max_retries=2, retry_backoff=0.01,
                    timeout=5, api_key_env=KEY_ENV)
    settings.update(overrides)
    return EndpointConfig(**settings)


@pytest.fixture
def doc():
    return TranscriptDoc(game=Game.DICE, header="Game: Dice Game",
                         body_lines=["Roll 1: Player [3, 3, 3] vs Dealer [1, 2, 4] → Player wins"],
                         episode_ref=EpisodeSeed(1, 0))


@pytest.mark.asyncio
async def test_completion_round_trip(monkeypatch):
    monkeypatch.delenv(KEY_ENV, raising=False)
    server = MockEndpointServer(responder=queue_responder(["Induced Rule: Triples win."])).start()
    try:
        client = ChatCompletionClient(_config(server))
        response = await client.complete("hello there")
        assert response.text == "Induced Rule: Triples win."
        assert response.usage["total_tokens"] == response.usage["prompt_tokens"] + response.usage["completion_tokens"]
        assert not response.cached
        assert response.prompt_hash == prompt_hash("hello there")
        body = server.requests[0]
        assert body["model"] == "mock-model"
        assert body["messages"] == [{"role": "user", "content": "hello there"}]
        assert body["temperature"] == 0.0
        assert "max_tokens" not in body
    finally:
        server.stop()


@pytest.mark.asyncio
async def test_second_call_is_served_from_cache(tmp_path):
    server = MockEndpointServer().start()
    try:
        cache = ResponseCache(tmp_path / "cache.jsonl")
        client = ChatCompletionClient(_config(server), cache)
        first = await client.complete("same prompt")
        second = await client.complete("same prompt")
        assert second.cached and second.text == first.text
        assert client.upstream_calls == 1
        assert len(server.requests) == 1

        reloaded = ChatCompletionClient(_config(server), ResponseCache(tmp_path / "cache.jsonl"))
        third = await reloaded.complete("same prompt")
        assert third.cached
        assert reloaded.upstream_calls == 0
    finally:
        server.stop()


@pytest.mark.asyncio
async def test_votes_and_temperatures_are_cached_separately():
    server = MockEndpointServer().start()
    try:
        client = ChatCompletionClient(_config(server))
        await client.complete("judge me", vote_index=0)
        await client.complete("judge me", vote_index=1)
        await client.complete("judge me", vote_index=1, temperature=0.7)
        await client.complete("judge me", vote_index=1)
        assert client.upstream_calls == 3
    finally:
        server.stop()


@pytest.mark.asyncio
async def test_output_cap_is_forwarded(doc):
    server = MockEndpointServer().start()
    try:
        client = ChatCompletionClient(_config(server))
        await query_model(client, build_induction_prompt(doc, Intervention.SUMMARIZATION))
        await query_model(client, build_induction_prompt(doc, Intervention.NONE))
        assert server.requests[0]["max_tokens"] == 1000
        assert "max_tokens" not in server.requests[1]
    finally:
        server.stop()


@pytest.mark.asyncio
async def test_transient_errors_are_retried():
    server = MockEndpointServer(failures=[500, 429]).start()
    try:
        client = ChatCompletionClient(_config(server))
        response = await client.complete("retry me")
        assert response.text
        assert client.upstream_calls == 3
    finally:
        server.stop()


@pytest.mark.asyncio
async def test_retries_are_exhausted():
    server = MockEndpointServer(failures=[500, 500, 500]).start()
    try:
        client = ChatCompletionClient(_config(server, max_retries=2))
        with pytest.raises(TransientEndpointError) as excinfo:
            await client.complete("doomed")
        assert excinfo.value.status == 500
        assert len(server.requests) == 3
        assert len(client.cache) == 0
    finally:
        server.stop()


@pytest.mark.asyncio
async def test_client_errors_are_not_retried():
    server = MockEndpointServer(failures=[400]).start()
    try:
        client = ChatCompletionClient(_config(server))
        with pytest.raises(EndpointError) as excinfo:
            await client.complete("bad request")
        assert not isinstance(excinfo.value, TransientEndpointError)
        assert client.upstream_calls == 1
    finally:
        server.stop()


@pytest.mark.asyncio
async def test_missing_key_names_the_variable(monkeypatch):
    monkeypatch.delenv(KEY_ENV, raising=False)
    server = MockEndpointServer(required_key="s3cr3t").start()
    try:
        client = ChatCompletionClient(_config(server))
        with pytest.raises(AuthenticationError) as excinfo:
            await client.complete("let me in")
        assert KEY_ENV in str(excinfo.value)
        assert client.upstream_calls == 1
    finally:
        server.stop()


@pytest.mark.asyncio
async def test_key_is_sent_as_bearer_token_and_not_cached(monkeypatch, tmp_path):
    monkeypatch.setenv(KEY_ENV, "s3cr3t")
    server = MockEndpointServer(required_key="s3cr3t").start()
    try:
        client = ChatCompletionClient(_config(server), ResponseCache(tmp_path / "cache.jsonl"))
        await client.complete("let me in")
        assert "s3cr3t" not in (tmp_path / "cache.jsonl").read_text(encoding="utf-8")
        assert all("s3cr3t" not in json.dumps(body) for body in server.requests)
    finally:
        server.stop()


@pytest.mark.asyncio
async def test_unreachable_endpoint_is_transient():
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
    cfg = EndpointConfig(base_url=f"http://127.0.0.1:{port}", max_retries=0, timeout=5)
    client = ChatCompletionClient(cfg)
    with pytest.raises(TransientEndpointError):
        await client.complete("anyone?")


@pytest.mark.asyncio
async def test_keyword_responder_routes_prompts():
    server = MockEndpointServer(responder=keyword_responder([("pairs", "Induced Rule: Pairs win.")])).start()
    try:
        client = ChatCompletionClient(_config(server))
        assert (await client.complete("about pairs")).text == "Induced Rule: Pairs win."
        assert (await client.complete("about dice")).text.startswith("Induced Rule:")
    finally:
        server.stop()


def test_status_classification():
    cfg = EndpointConfig(api_key_env="MY_KEY")
    assert isinstance(classify_status(401, "", cfg), AuthenticationError)
    assert "MY_KEY" in str(classify_status(403, "", cfg))
    assert isinstance(classify_status(429, "", cfg), TransientEndpointError)
    assert isinstance(classify_status(503, "", cfg), TransientEndpointError)
    error = classify_status(404, "not here", cfg)
    assert type(error) is EndpointError and error.status == 404


def test_malformed_payloads():
    with pytest.raises(EndpointError):
        parse_completion("not json")
    with pytest.raises(EndpointError):
        parse_completion(json.dumps({"choices": []}))
    with pytest.raises(EndpointError):
        parse_completion(json.dumps({"choices": [{"message": {"content": None}}]}))
    response = parse_completion(json.dumps({"choices": [{"message": {"content": "ok"}}]}))
    assert response.text == "ok" and response.usage == {}


def test_cache_keys_separate_every_component():
    digest = prompt_hash("p")
    keys = {
        cache_key("m", digest, 0.0, 0),
        cache_key("n", digest, 0.0, 0),
        cache_key("m", prompt_hash("q"), 0.0, 0),
        cache_key("m", digest, 0.7, 0),
        cache_key("m", digest, 0.0, 1),
    }
    assert len(keys) == 5
    assert cache_key("m", digest, 0, 0) == cache_key("m", digest, 0.0, 0)


def test_cache_compaction_keeps_the_last_entry(tmp_path):
    path = tmp_path / "cache.jsonl"
    cache = ResponseCache(path)
    cache.put("k", {"text": "old"})
    cache.put("k", {"text": "new"})
    assert len(path.read_text(encoding="utf-8").splitlines()) == 2
    cache.compact()
    assert len(path.read_text(encoding="utf-8").splitlines()) == 1
    assert ResponseCache(path).get("k")["text"] == "new"
    assert "k" in cache
