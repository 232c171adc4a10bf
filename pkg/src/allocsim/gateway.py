"""Wire client for chat-completion endpoints, with a scriptable mock.

One request shape covers every provider: a JSON body with ``model``,
``messages``, ``temperature`` and ``max_tokens``; the response must carry
generated text plus provider-reported token usage (field-name variants
are normalized at the transport edge). Token counts are never estimated
client-side.

Request bodies are serialized canonically (sorted keys, fixed
separators), so identical inputs produce identical bytes -- which is what
makes recorded sessions replayable.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Mapping, Protocol, Sequence

import requests


class GatewayError(Exception):
    """Base for all gateway failures."""


class AuthMissing(GatewayError):
    """The binding's auth environment variable is not set."""


class RetriesExhausted(GatewayError):
    """Transient transport failures persisted beyond the retry budget."""


class MalformedResponse(GatewayError):
    """The provider response lacks text or usage fields."""


class ScriptExhausted(GatewayError):
    """A mock transport ran out of scripted entries."""


class TransientTransportError(GatewayError):
    """Retryable failure: connection trouble, 429, or a 5xx status."""


@dataclass(frozen=True)
class ModelBinding:
    model_id: str
    endpoint_url: str = ""
    auth_env_var: str = ""
    max_retries: int = 2
    timeout: float = 30.0

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass(frozen=True)
class Decoding:
    temperature: float = 0.0
    max_tokens: int = 2048


@dataclass(frozen=True)
class CompletionResult:
    text: str
    tokens_in: int
    tokens_out: int
    latency: float
    attempt: int


Message = Mapping[str, str]


def build_request_body(
    binding: ModelBinding, messages: Sequence[Message], decoding: Decoding
) -> bytes:
    payload = {
        "model": binding.model_id,
        "messages": [{"role": m["role"], "content": m["content"]} for m in messages],
        "temperature": decoding.temperature,
        "max_tokens": decoding.max_tokens,
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def normalize_response(payload: Mapping[str, Any]) -> tuple[str, int, int]:
    """Extract (text, tokens_in, tokens_out) from provider response variants."""
    text: Any = payload.get("text")
    if text is None:
        choices = payload.get("choices")
        if isinstance(choices, list) and choices:
            message = choices[0].get("message", {})
            text = message.get("content")
    if text is None:
        content = payload.get("content")
        if isinstance(content, list) and content:
            text = content[0].get("text")
    if not isinstance(text, str):
        raise MalformedResponse("response carries no text field")

    usage = payload.get("usage")
    if not isinstance(usage, Mapping):
        raise MalformedResponse("response carries no usage field")
    tokens_in = usage.get("input_tokens", usage.get("prompt_tokens"))
    tokens_out = usage.get("output_tokens", usage.get("completion_tokens"))
    if not isinstance(tokens_in, int) or not isinstance(tokens_out, int):
        raise MalformedResponse("usage lacks integer token counts")
    return text, tokens_in, tokens_out


class Transport(Protocol):
    def send(self, binding: ModelBinding, body: bytes) -> Mapping[str, Any]: ...


class HttpTransport:
    """POSTs the canonical JSON body; auth comes from the environment."""

    def __init__(self, session: requests.Session | None = None):
        self.session = session or requests.Session()

    def send(self, binding: ModelBinding, body: bytes) -> Mapping[str, Any]:
        if not binding.auth_env_var or binding.auth_env_var not in os.environ:
            raise AuthMissing(f"environment variable {binding.auth_env_var!r} is not set")
        headers = {
            "Content-Type": "application/json",
            "Authorization": f"Bearer {os.environ[binding.auth_env_var]}",
        }
        try:
            response = self.session.post(
                binding.endpoint_url, data=body, headers=headers, timeout=binding.timeout
            )
        except requests.RequestException as exc:
            raise TransientTransportError(str(exc)) from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise TransientTransportError(f"status {response.status_code}")
        if response.status_code >= 400:
            raise GatewayError(f"status {response.status_code}: {response.text[:200]}")
        try:
            return response.json()
        except ValueError as exc:
            raise MalformedResponse("response body is not JSON") from exc


@dataclass
class MockEntry:
    """One scripted mock response.

    Exactly one of the behaviours applies: a normal (text, tokens) reply,
    a transient transport failure, or a structurally malformed response.
    """

    text: str = ""
    tokens_in: int = 0
    tokens_out: int = 0
    fail_transient: bool = False
    malformed: bool = False


class MockTransport:
    """Deterministic transport that replays a script of canned entries.

    Consumption order matches call initiation order (a lock serializes
    concurrent callers). Every request body is retained for inspection.
    """

    def __init__(self, script: Iterable[MockEntry]):
        self._script = list(script)
        self._index = 0
        self._lock = threading.Lock()
        self.requests: list[dict[str, Any]] = []

    def send(self, binding: ModelBinding, body: bytes) -> Mapping[str, Any]:
        with self._lock:
            self.requests.append(json.loads(body))
            if self._index >= len(self._script):
                raise ScriptExhausted(f"mock script exhausted after {self._index} calls")
            entry = self._script[self._index]
            self._index += 1
        if entry.fail_transient:
            raise TransientTransportError("scripted transient failure")
        if entry.malformed:
            return {"unexpected": "shape"}
        return {
            "text": entry.text,
            "usage": {"input_tokens": entry.tokens_in, "output_tokens": entry.tokens_out},
        }

    @property
    def remaining(self) -> int:
        return len(self._script) - self._index


def install_mock(script: Iterable[MockEntry | Mapping[str, Any]]) -> MockTransport:
    """Build a mock transport from entries or plain dicts."""
    entries = []
    for item in script:
        if isinstance(item, MockEntry):
            entries.append(item)
        else:
            entries.append(MockEntry(**item))
    return MockTransport(entries)


class RecordingTransport:
    """Wraps a transport and records request/response pairs for replay."""

    def __init__(self, inner: Transport):
        self.inner = inner
        self.records: list[dict[str, Any]] = []

    def send(self, binding: ModelBinding, body: bytes) -> Mapping[str, Any]:
        response = self.inner.send(binding, body)
        self.records.append(
            {"request": json.loads(body), "response": dict(response)}
        )
        return response

    def to_json(self) -> str:
        return json.dumps(self.records, indent=2, sort_keys=True)


class ReplayTransport:
    """Replays a recorded session; requests must match byte-for-byte."""

    def __init__(self, records: Sequence[Mapping[str, Any]]):
        self._records = list(records)
        self._index = 0
        self._lock = threading.Lock()

    @classmethod
    def from_json(cls, text: str) -> "ReplayTransport":
        return cls(json.loads(text))

    def send(self, binding: ModelBinding, body: bytes) -> Mapping[str, Any]:
        with self._lock:
            if self._index >= len(self._records):
                raise ScriptExhausted("no recorded exchanges left")
            record = self._records[self._index]
            self._index += 1
        expected = json.dumps(record["request"], sort_keys=True, separators=(",", ":")).encode()
        if expected != body:
            raise GatewayError("request does not match the recorded session")
        return record["response"]


def complete(
    binding: ModelBinding,
    messages: Sequence[Message],
    decoding: Decoding = Decoding(),
    transport: Transport | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> CompletionResult:
    """Send one chat completion, retrying transient failures with backoff.

    Raises :class:`RetriesExhausted` once transient failures outlast
    ``binding.max_retries``; malformed provider responses surface
    immediately as :class:`MalformedResponse`.
    """
    if transport is None:
        transport = HttpTransport()
    body = build_request_body(binding, messages, decoding)
    start = time.monotonic()
    last_error: Exception | None = None
    for attempt in range(1, binding.max_retries + 2):
        try:
            payload = transport.send(binding, body)
        except TransientTransportError as exc:
            last_error = exc
            if attempt <= binding.max_retries:
                sleep(min(0.05 * 2 ** (attempt - 1), 2.0))
            continue
        text, tokens_in, tokens_out = normalize_response(payload)
        return CompletionResult(
            text=text,
            tokens_in=tokens_in,
            tokens_out=tokens_out,
            latency=time.monotonic() - start,
            attempt=attempt,
        )
    raise RetriesExhausted(
        f"gave up after {binding.max_retries + 1} attempts: {last_error}"
    ) from last_error
