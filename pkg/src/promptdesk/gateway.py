"""Uniform chat-completion interface over three vendors plus a scripted
deterministic provider.

The scripted provider replays registered fixtures keyed by a stable content
hash of (system prompt, message sequence, temperature); a miss is a hard
error so tests can never silently fall through to live traffic.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Optional

import httpx
from pydantic import BaseModel, ConfigDict, model_validator

from .errors import (
    ConfigurationError,
    FixtureFileError,
    FixtureMissError,
    ProtocolError,
    ProviderError,
    ProviderTimeoutError,
)

DEFAULT_TIMEOUT_SECS = 60.0
MAX_ATTEMPTS = 3  # 1 call + 2 retries on transient failures
BACKOFF_BASE_SECS = 0.5

PIPELINE_TEMPERATURE = 0.0
INTERACTIVE_TEMPERATURE = 0.7


class Provider(str, Enum):
    OPENAI = "openai"
    ANTHROPIC = "anthropic"
    GOOGLE = "google"
    SCRIPTED = "scripted"


CREDENTIAL_ENV = {
    Provider.OPENAI: "OPENAI_API_KEY",
    Provider.ANTHROPIC: "ANTHROPIC_API_KEY",
    Provider.GOOGLE: "GOOGLE_API_KEY",
}


class ChatMessage(BaseModel):
    model_config = ConfigDict(frozen=True)

    role: str  # "user" (student) or "assistant" (bot)
    text: str

    @model_validator(mode="after")
    def _check(self) -> "ChatMessage":
        if self.role not in ("user", "assistant"):
            raise ValueError(f"unknown message role {self.role!r}")
        return self


class ChatRequest(BaseModel):
    model_config = ConfigDict(frozen=True)

    system_prompt: str
    messages: tuple[ChatMessage, ...]
    temperature: float = INTERACTIVE_TEMPERATURE
    max_output_tokens: int = 1024
    provider: Provider

    @model_validator(mode="after")
    def _check(self) -> "ChatRequest":
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.messages[-1].role != "user":
            raise ValueError("last message must have the user role")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must lie in [0, 2]")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")
        return self


class ChatResponse(BaseModel):
    model_config = ConfigDict(frozen=True)

    text: str
    provider_latency_ms: int = 0
    token_usage: Optional[dict[str, int]] = None


def fixture_key(request: ChatRequest) -> str:
    """Stable content hash over (system prompt, message sequence, temperature).

    Provider and max_output_tokens are deliberately excluded, so one fixture
    serves a request regardless of routing. Lowercase hex, identical across
    runs and machines.
    """
    canonical = json.dumps(
        {
            "system": request.system_prompt,
            "messages": [[m.role, m.text] for m in request.messages],
            "temperature": request.temperature,
        },
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class FixtureStore:
    """Scripted responses keyed by fixture_key; concurrent reads, serialized
    writes, last-write-wins on duplicate keys."""

    def __init__(self) -> None:
        self._fixtures: dict[str, str] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._fixtures)

    def register(self, key: str, response_text: str) -> None:
        if not key:
            raise ValueError("fixture key must be non-empty")
        with self._lock:
            self._fixtures[key] = response_text

    def get(self, key: str) -> Optional[str]:
        return self._fixtures.get(key)

    def load_file(self, path: str | Path) -> int:
        """Load a line-delimited fixture file ({"key": ..., "response": ...}
        per line, UTF-8). Additive; returns the number of entries loaded."""
        path = Path(path)
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise FixtureFileError(str(path), 0, f"unreadable: {exc}") from exc
        count = 0
        for line_no, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FixtureFileError(str(path), line_no, f"invalid JSON: {exc.msg}") from exc
            if (
                not isinstance(record, dict)
                or not isinstance(record.get("key"), str)
                or not record["key"]
                or not isinstance(record.get("response"), str)
            ):
                raise FixtureFileError(
                    str(path), line_no, "expected an object with string key and response"
                )
            self.register(record["key"], record["response"])
            count += 1
        return count


def write_fixture_file(path: str | Path, fixtures: Mapping[str, str]) -> None:
    """Inverse of FixtureStore.load_file, one {"key","response"} object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for key, response in fixtures.items():
            fh.write(
                json.dumps({"key": key, "response": response}, ensure_ascii=False)
                + "\n"
            )


class GatewayConfig(BaseModel):
    """Vendor endpoints and model names are configuration, not logic."""

    openai_model: str = "gpt-4o-mini"
    anthropic_model: str = "claude-sonnet-4-20250514"
    google_model: str = "gemini-2.0-flash"
    openai_base_url: str = "https://api.openai.com/v1"
    anthropic_base_url: str = "https://api.anthropic.com/v1"
    google_base_url: str = "https://generativelanguage.googleapis.com/v1beta"
    timeout_secs: float = DEFAULT_TIMEOUT_SECS

    @classmethod
    def from_env(cls, env: Mapping[str, str] | None = None) -> "GatewayConfig":
        env = os.environ if env is None else env
        timeout = float(env.get("PD_PROVIDER_TIMEOUT_SECS", DEFAULT_TIMEOUT_SECS))
        return cls(timeout_secs=timeout)


class Gateway:
    """Dispatches ChatRequests to the selected provider with bounded retries.

    Thread-safe: adapters share one connection pool and no other mutable
    state; the fixture store handles its own locking.
    """

    def __init__(
        self,
        fixtures: FixtureStore | None = None,
        config: GatewayConfig | None = None,
        env: Mapping[str, str] | None = None,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.fixtures = fixtures if fixtures is not None else FixtureStore()
        self.config = config if config is not None else GatewayConfig.from_env(env)
        self._env = env
        self._transport = transport
        self._sleep = sleep
        self._client: httpx.Client | None = None
        self._client_lock = threading.Lock()

    def _environ(self) -> Mapping[str, str]:
        return os.environ if self._env is None else self._env

    def _http(self) -> httpx.Client:
        with self._client_lock:
            if self._client is None:
                self._client = httpx.Client(transport=self._transport)
            return self._client

    def close(self) -> None:
        with self._client_lock:
            if self._client is not None:
                self._client.close()
                self._client = None

    # -- public surface -----------------------------------------------------

    def complete(self, request: ChatRequest) -> ChatResponse:
        if request.provider == Provider.SCRIPTED:
            return self._complete_scripted(request)
        return self._complete_remote(request)

    def _complete_scripted(self, request: ChatRequest) -> ChatResponse:
        key = fixture_key(request)
        text = self.fixtures.get(key)
        if text is None:
            raise FixtureMissError(key)
        return ChatResponse(text=text, provider_latency_ms=0)

    def _complete_remote(self, request: ChatRequest) -> ChatResponse:
        env_var = CREDENTIAL_ENV[request.provider]
        credential = self._environ().get(env_var)
        if not credential:
            raise ConfigurationError(
                f"{env_var} is not set; cannot call the {request.provider.value} API"
            )
        build, parse = _ADAPTERS[request.provider]
        url, headers, payload = build(self.config, credential, request)

        deadline = time.monotonic() + self.config.timeout_secs
        last_exc: Exception | None = None
        for attempt in range(MAX_ATTEMPTS):
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ProviderTimeoutError(
                    f"{request.provider.value} call exceeded the "
                    f"{self.config.timeout_secs:.0f}s deadline"
                ) from last_exc
            started = time.monotonic()
            try:
                response = self._http().post(
                    url, headers=headers, json=payload, timeout=remaining
                )
            except httpx.TimeoutException as exc:
                raise ProviderTimeoutError(
                    f"{request.provider.value} call exceeded the "
                    f"{self.config.timeout_secs:.0f}s deadline"
                ) from exc
            except httpx.HTTPError as exc:
                last_exc = exc
                self._backoff(attempt, deadline)
                continue
            latency_ms = int((time.monotonic() - started) * 1000)
            if 400 <= response.status_code < 500:
                raise ProviderError(
                    f"{request.provider.value} returned HTTP "
                    f"{response.status_code}: {response.text[:500]}"
                )
            if response.status_code >= 500:
                last_exc = ProviderError(
                    f"{request.provider.value} returned HTTP {response.status_code}"
                )
                self._backoff(attempt, deadline)
                continue
            try:
                body = response.json()
                text, usage = parse(body)
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise ProtocolError(
                    f"malformed {request.provider.value} payload: {exc}"
                ) from exc
            return ChatResponse(
                text=text, provider_latency_ms=latency_ms, token_usage=usage
            )
        raise ProviderError(
            f"{request.provider.value} call failed after {MAX_ATTEMPTS} attempts"
        ) from last_exc

    def _backoff(self, attempt: int, deadline: float) -> None:
        if attempt + 1 >= MAX_ATTEMPTS:
            return
        delay = BACKOFF_BASE_SECS * (2**attempt)
        self._sleep(min(delay, max(0.0, deadline - time.monotonic())))


# -- vendor adapters ---------------------------------------------------------

def _build_openai(cfg: GatewayConfig, credential: str, req: ChatRequest):
    messages = [{"role": "system", "content": req.system_prompt}] + [
        {"role": m.role, "content": m.text} for m in req.messages
    ]
    payload = {
        "model": cfg.openai_model,
        "messages": messages,
        "temperature": req.temperature,
        "max_tokens": req.max_output_tokens,
    }
    headers = {"Authorization": f"Bearer {credential}"}
    return f"{cfg.openai_base_url}/chat/completions", headers, payload


def _parse_openai(body: dict):
    text = body["choices"][0]["message"]["content"]
    if not isinstance(text, str):
        raise ValueError("message content is not text")
    usage = body.get("usage")
    token_usage = (
        {"input": usage["prompt_tokens"], "output": usage["completion_tokens"]}
        if usage
        else None
    )
    return text, token_usage


def _build_anthropic(cfg: GatewayConfig, credential: str, req: ChatRequest):
    payload = {
        "model": cfg.anthropic_model,
        "system": req.system_prompt,
        "messages": [{"role": m.role, "content": m.text} for m in req.messages],
        "temperature": req.temperature,
        "max_tokens": req.max_output_tokens,
    }
    headers = {"x-api-key": credential, "anthropic-version": "2023-06-01"}
    return f"{cfg.anthropic_base_url}/messages", headers, payload


def _parse_anthropic(body: dict):
    blocks = body["content"]
    text = "".join(b["text"] for b in blocks if b.get("type") == "text")
    usage = body.get("usage")
    token_usage = (
        {"input": usage["input_tokens"], "output": usage["output_tokens"]}
        if usage
        else None
    )
    return text, token_usage


def _build_google(cfg: GatewayConfig, credential: str, req: ChatRequest):
    contents = [
        {
            "role": "user" if m.role == "user" else "model",
            "parts": [{"text": m.text}],
        }
        for m in req.messages
    ]
    payload = {
        "system_instruction": {"parts": [{"text": req.system_prompt}]},
        "contents": contents,
        "generationConfig": {
            "temperature": req.temperature,
            "maxOutputTokens": req.max_output_tokens,
        },
    }
    headers = {"x-goog-api-key": credential}
    url = f"{cfg.google_base_url}/models/{cfg.google_model}:generateContent"
    return url, headers, payload


def _parse_google(body: dict):
    parts = body["candidates"][0]["content"]["parts"]
    text = "".join(p.get("text", "") for p in parts)
    meta = body.get("usageMetadata")
    token_usage = (
        {"input": meta["promptTokenCount"], "output": meta["candidatesTokenCount"]}
        if meta and "candidatesTokenCount" in meta
        else None
    )
    return text, token_usage


_ADAPTERS = {
    Provider.OPENAI: (_build_openai, _parse_openai),
    Provider.ANTHROPIC: (_build_anthropic, _parse_anthropic),
    Provider.GOOGLE: (_build_google, _parse_google),
}
