"""Single boundary for every language-model call.

Two interchangeable backends: an OpenAI-compatible chat-completions client
and a deterministic scripted mock. All agent-internal calls run with
temperature 0 so the whole system replays byte-identically offline.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass, field

import requests

from .errors import AuthError, NetworkError, ScriptMiss

ENV_ENDPOINT = "OPENTI_LLM_ENDPOINT"
ENV_API_KEY = "OPENTI_LLM_API_KEY"
ENV_MODEL = "OPENTI_LLM_MODEL"
ENV_OFFLINE = "OPENTI_OFFLINE"

VALID_ROLES = ("system", "user", "assistant", "tool")

# Backoff before retry k (seconds). Two retries, >= 0.3 s total wait.
RETRY_DELAYS = (0.16, 0.32)


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    messages: tuple  # ((role, content), ...)
    temperature: float = 0.0
    max_tokens: int = 1024

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        for role, content in self.messages:
            if role not in VALID_ROLES:
                raise ValueError(f"invalid role {role!r}")
            if not isinstance(content, str):
                raise ValueError("message content must be text")
        if self.messages[0][0] not in ("system", "user"):
            raise ValueError("first message role must be system or user")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError("temperature must be within [0, 1]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    @classmethod
    def of(cls, messages, model_id="default", temperature=0.0, max_tokens=1024):
        return cls(
            model_id=model_id,
            messages=tuple((r, c) for r, c in messages),
            temperature=temperature,
            max_tokens=max_tokens,
        )


@dataclass(frozen=True)
class ChatResponse:
    content: str
    finish_reason: str = "stop"  # stop | length | error
    usage: tuple = (0, 0)  # (prompt_tokens, completion_tokens)

    def __post_init__(self):
        if self.finish_reason == "stop" and self.content is None:
            raise ValueError("content must be set when finish_reason is stop")


class MockBackend:
    """Ordered (pattern, response) pairs, matched case-insensitively.

    The pattern is applied to the most recent user or tool message; tool
    observations have to be matchable or multi-step chains could never be
    scripted. First match wins. A miss raises ScriptMiss: an incomplete
    fixture must never be answered silently.
    """

    name = "mock"

    def __init__(self, scripts):
        self._scripts = tuple(
            (re.compile(pattern, re.IGNORECASE | re.DOTALL), response)
            for pattern, response in scripts
        )

    @classmethod
    def from_file(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            entries = json.load(fh)
        return cls([(e["pattern"], e["response"]) for e in entries])

    def complete(self, request: ChatRequest) -> ChatResponse:
        target = None
        for role, content in reversed(request.messages):
            if role in ("user", "tool"):
                target = content
                break
        if target is None:
            raise ScriptMiss("no user or tool message to match against")
        for pattern, response in self._scripts:
            if pattern.search(target):
                n_prompt = sum(len(c.split()) for _, c in request.messages)
                return ChatResponse(
                    content=response,
                    finish_reason="stop",
                    usage=(n_prompt, len(response.split())),
                )
        raise ScriptMiss(f"no script entry matches: {target[:120]!r}")


class RemoteBackend:
    """OpenAI-compatible chat-completions client with bounded retries."""

    name = "remote"

    def __init__(self, endpoint, api_key="", model="", timeout_s=30.0):
        if not endpoint:
            raise ValueError("remote backend requires an endpoint")
        self.endpoint = endpoint.rstrip("/")
        self.api_key = api_key
        self.model = model
        self.timeout_s = timeout_s

    @classmethod
    def from_env(cls):
        endpoint = os.environ.get(ENV_ENDPOINT, "")
        return cls(
            endpoint=endpoint,
            api_key=os.environ.get(ENV_API_KEY, ""),
            model=os.environ.get(ENV_MODEL, ""),
        )

    def complete(self, request: ChatRequest) -> ChatResponse:
        body = {
            "model": self.model or request.model_id,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_exc = None
        for attempt in range(1 + len(RETRY_DELAYS)):
            if attempt > 0:
                time.sleep(RETRY_DELAYS[attempt - 1])
            try:
                resp = requests.post(
                    self.endpoint, json=body, headers=headers, timeout=self.timeout_s
                )
            except requests.RequestException as exc:
                last_exc = exc
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"endpoint rejected credentials ({resp.status_code})")
            if resp.status_code >= 500:
                last_exc = ServiceUnavailable(resp.status_code)
                continue
            if resp.status_code != 200:
                raise NetworkError(f"unexpected status {resp.status_code}: {resp.text[:200]}")
            try:
                payload = resp.json()
                choice = payload["choices"][0]
                content = choice["message"]["content"]
            except (ValueError, KeyError, IndexError) as exc:
                raise NetworkError(f"malformed completion payload: {exc}")
            usage = payload.get("usage", {})
            return ChatResponse(
                content=content,
                finish_reason=choice.get("finish_reason", "stop"),
                usage=(
                    int(usage.get("prompt_tokens", 0)),
                    int(usage.get("completion_tokens", 0)),
                ),
            )
        raise NetworkError(f"endpoint unreachable after {len(RETRY_DELAYS)} retries: {last_exc}")


class ServiceUnavailable(Exception):
    def __init__(self, status):
        super().__init__(f"server error {status}")


def complete(request: ChatRequest, backend) -> ChatResponse:
    """Run one completion against the chosen backend."""
    return backend.complete(request)


@dataclass
class Gateway:
    """Stateless facade; safe for concurrent use once constructed."""

    backend: object
    call_count: int = field(default=0)

    def complete(self, messages, model_id="default", temperature=0.0, max_tokens=1024):
        request = ChatRequest.of(
            messages, model_id=model_id, temperature=temperature, max_tokens=max_tokens
        )
        self.call_count += 1
        return complete(request, self.backend)


def backend_from_env(mock_scripts_path=None):
    """Pick the backend: OPENTI_OFFLINE=1 forces the mock."""
    offline = os.environ.get(ENV_OFFLINE, "") == "1"
    endpoint = os.environ.get(ENV_ENDPOINT, "")
    if offline or not endpoint:
        if mock_scripts_path is None:
            mock_scripts_path = default_scripts_path()
        return MockBackend.from_file(mock_scripts_path)
    return RemoteBackend.from_env()


def default_scripts_path():
    return os.path.join(os.path.dirname(__file__), "fixtures", "mock_scripts.json")
