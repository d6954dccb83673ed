"""
Chat-completion client for the model under test and the judge.

Requests go out as a single user message over HTTP POST; transient failures
(429, 5xx, network errors) are retried with exponential backoff and successful
completions are cached in an append-only JSONL file.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union
import asyncio
import hashlib
import json

import structlog
from tenacity import AsyncRetrying, retry_if_exception_type, stop_after_attempt, wait_exponential
from tornado.httpclient import AsyncHTTPClient, HTTPClientError, HTTPRequest

from config import EndpointConfig
from .errors import AuthenticationError, EndpointError, TransientEndpointError
from .prompts import PromptBundle
from .storage import atomic_writer, read_jsonl

logger = structlog.get_logger(__name__)

MAX_BACKOFF_SECONDS = 30.0


def prompt_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def cache_key(model_name: str, prompt_digest: str, temperature: float, vote_index: int = 0) -> str:
    material = json.dumps([model_name, prompt_digest, float(temperature), int(vote_index)], separators=(",", ":"))
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


@dataclass
class ChatResponse:
    text: str
    usage: Dict[str, Any] = field(default_factory=dict)
    cached: bool = False
    prompt_hash: str = ""


class ResponseCache:
    """Append-only JSONL cache of completions; the last entry for a key wins."""

    def __init__(self, path: Optional[Union[str, Path]] = None):
        self.path = Path(path) if path else None
        self._entries: Dict[str, Dict[str, Any]] = {}
        if self.path is not None and self.path.exists():
            for row in read_jsonl(self.path):
                self._entries[row["key"]] = row
            logger.debug("cache_loaded", path=str(self.path), entries=len(self._entries))

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def get(self, key: str) -> Optional[Dict[str, Any]]:
        return self._entries.get(key)

    def put(self, key: str, entry: Dict[str, Any]) -> None:
        row = {"key": key, **entry}
        self._entries[key] = row
        if self.path is None:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(row, ensure_ascii=False, separators=(",", ":")) + "\n")

    def compact(self) -> None:
        """Rewrite the file with one line per key."""
        if self.path is None:
            return
        with atomic_writer(self.path) as handle:
            for row in self._entries.values():
                handle.write(json.dumps(row, ensure_ascii=False, separators=(",", ":")) + "\n")


def classify_status(status: int, body: str, cfg: EndpointConfig) -> EndpointError:
    snippet = body[:200]
    if status in (401, 403):
        return AuthenticationError(
            f"{cfg.completions_url} rejected the credentials (HTTP {status}); "
            f"set the environment variable {cfg.api_key_env}",
            status=status,
        )
    if status == 429 or status >= 500:
        return TransientEndpointError(f"HTTP {status} from {cfg.completions_url}: {snippet}", status=status)
    return EndpointError(f"HTTP {status} from {cfg.completions_url}: {snippet}", status=status)


def parse_completion(body: Union[str, bytes]) -> ChatResponse:
    try:
        payload = json.loads(body)
        text = payload["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as e:
        raise EndpointError(f"Malformed completion payload: {e}") from e
    if not isinstance(text, str):
        raise EndpointError("Malformed completion payload: message content is not text")
    return ChatResponse(text=text, usage=dict(payload.get("usage") or {}))


class ChatCompletionClient:
    def __init__(self, cfg: EndpointConfig, cache: Optional[ResponseCache] = None):
        self.cfg = cfg
        self.cache = cache if cache is not None else ResponseCache()
        self.upstream_calls = 0
        self._semaphore = asyncio.Semaphore(cfg.parallelism)

    def _request(self, prompt: str, max_tokens: Optional[int], temperature: float) -> HTTPRequest:
        body: Dict[str, Any] = {
            "model": self.cfg.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
        }
        if max_tokens is not None:
            body["max_tokens"] = max_tokens
        headers = {"Content-Type": "application/json"}
        key = self.cfg.api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return HTTPRequest(
            self.cfg.completions_url,
            method="POST",
            body=json.dumps(body),
            headers=headers,
            request_timeout=self.cfg.timeout,
        )

    async def _post_once(self, request: HTTPRequest) -> ChatResponse:
        self.upstream_calls += 1
        try:
            response = await AsyncHTTPClient().fetch(request)
        except HTTPClientError as e:
            body = e.response.body.decode("utf-8", "replace") if e.response is not None and e.response.body else ""
            error = classify_status(e.code, body, self.cfg)
            logger.warning("endpoint_http_error", url=request.url, status=e.code, retryable=isinstance(error, TransientEndpointError))
            raise error from e
        except OSError as e:
            logger.warning("endpoint_unreachable", url=request.url, error=str(e))
            raise TransientEndpointError(f"{request.url} unreachable: {e}") from e
        return parse_completion(response.body)

    async def complete(
        self,
        prompt: str,
        max_tokens: Optional[int] = None,
        temperature: Optional[float] = None,
        vote_index: int = 0,
    ) -> ChatResponse:
        temperature = self.cfg.temperature if temperature is None else temperature
        max_tokens = self.cfg.max_output_tokens if max_tokens is None else max_tokens
        digest = prompt_hash(prompt)
        key = cache_key(self.cfg.model_name, digest, temperature, vote_index)
        hit = self.cache.get(key)
        if hit is not None:
            logger.debug("cache_hit", model=self.cfg.model_name, prompt_hash=digest[:12], vote_index=vote_index)
            return ChatResponse(text=hit["text"], usage=hit.get("usage", {}), cached=True, prompt_hash=digest)

        request = self._request(prompt, max_tokens, temperature)
        async with self._semaphore:
            async for attempt in AsyncRetrying(
                stop=stop_after_attempt(self.cfg.max_retries + 1),
                wait=wait_exponential(multiplier=self.cfg.retry_backoff, max=MAX_BACKOFF_SECONDS),
                retry=retry_if_exception_type(TransientEndpointError),
                reraise=True,
            ):
                with attempt:
                    response = await self._post_once(request)

        response.prompt_hash = digest
        self.cache.put(key, {
            "model": self.cfg.model_name,
            "prompt_hash": digest,
            "temperature": temperature,
            "vote_index": vote_index,
            "text": response.text,
            "usage": response.usage,
        })
        logger.info("completion_received", model=self.cfg.model_name, prompt_hash=digest[:12], usage=response.usage)
        return response


async def query_model(client: ChatCompletionClient, bundle: PromptBundle) -> ChatResponse:
    """One completion for an induction prompt; the bundle's output cap is forwarded."""
    return await client.complete(bundle.prompt_text, max_tokens=bundle.max_output_tokens)
