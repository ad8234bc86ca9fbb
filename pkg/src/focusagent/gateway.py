"""Chat-completion backends and message construction.

Two backends exist: a scripted one that replays fixture responses in order
(deterministic, used by the whole test suite) and an HTTP one speaking the
common chat-completions wire format. Both are used through ``complete``.
"""

from __future__ import annotations

import os
import re
import threading
import time
from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import httpx

from .model import (
    FocusAgentError,
    Persona,
    SessionConfig,
    StageSummary,
    Utterance,
    _require,
)

Role = Literal["system", "user", "assistant"]

API_KEY_ENV = "FOCUSAGENT_API_KEY"


class BackendTimeout(FocusAgentError):
    """The backend did not answer within the timeout, retries included."""


class TransportError(FocusAgentError):
    """The backend could not be reached or replied with garbage."""


class ScriptExhausted(FocusAgentError):
    """A scripted backend ran out of fixture responses."""


class MalformedScore(FocusAgentError):
    """An engagement reply contained no integer in [0, 10]."""


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str

    def __post_init__(self) -> None:
        _require(self.role in ("system", "user", "assistant"), f"unknown role {self.role!r}")
        if self.role in ("user", "assistant"):
            _require(bool(self.content), f"{self.role} message content must be non-empty")


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[ChatMessage, ...]
    max_words_hint: int | None = None
    temperature_hint: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "messages", tuple(self.messages))
        _require(len(self.messages) >= 1, "a request needs at least one message")
        _require(self.messages[0].role == "system", "the first message must be a system message")
        _require(self.max_words_hint is None or self.max_words_hint > 0, "max_words_hint must be positive")


@dataclass(frozen=True)
class BackendConfig:
    """How to reach a model. ``scripted`` replays ``script``; ``http`` calls ``endpoint``."""

    kind: Literal["scripted", "http"]
    endpoint: str | None = None
    model_name: str | None = None
    request_timeout_seconds: float = 60.0
    max_retries: int = 2
    script: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.script is not None:
            object.__setattr__(self, "script", tuple(self.script))
        _require(self.kind in ("scripted", "http"), f"unknown backend kind {self.kind!r}")
        _require(self.request_timeout_seconds > 0, "request_timeout_seconds must be positive")
        _require(self.max_retries >= 0, "max_retries must be non-negative")
        if self.kind == "http":
            _require(bool(self.endpoint), "http backend requires an endpoint")
            _require(bool(self.model_name), "http backend requires a model_name")
        else:
            _require(self.script is not None, "scripted backend requires a script")


@dataclass(frozen=True)
class EngagementScore:
    persona: str
    value: int

    def __post_init__(self) -> None:
        _require(0 <= self.value <= 10, "engagement value must lie in [0, 10]")


class ChatBackend:
    """Common interface; concrete backends implement ``_complete``."""

    def __init__(self) -> None:
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> str:
        with self._lock:
            self.calls += 1
        return self._complete(request)

    def _complete(self, request: ChatRequest) -> str:
        raise NotImplementedError


class ScriptedBackend(ChatBackend):
    """Replays a fixed list of responses in order, ignoring request content."""

    def __init__(self, script: Sequence[str]):
        super().__init__()
        self._script = tuple(script)
        self._cursor = 0

    def _complete(self, request: ChatRequest) -> str:
        with self._lock:
            if self._cursor >= len(self._script):
                raise ScriptExhausted(f"script of {len(self._script)} responses is exhausted")
            reply = self._script[self._cursor]
            self._cursor += 1
        return reply

    @property
    def remaining(self) -> int:
        return len(self._script) - self._cursor


class HttpBackend(ChatBackend):
    """Chat-completions over HTTP with retries and exponential backoff.

    The bearer token is read from the FOCUSAGENT_API_KEY environment
    variable when present. ``sleeper`` is injectable so tests do not wait.
    """

    def __init__(self, config: BackendConfig, sleeper: Callable[[float], None] = time.sleep):
        super().__init__()
        self._config = config
        self._sleeper = sleeper

    def _complete(self, request: ChatRequest) -> str:
        cfg = self._config
        payload: dict = {
            "model": cfg.model_name,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
        }
        if request.temperature_hint is not None:
            payload["temperature"] = request.temperature_hint
        headers = {}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        last_error: Exception | None = None
        timed_out = False
        for attempt in range(cfg.max_retries + 1):
            if attempt > 0:
                self._sleeper(2.0 ** (attempt - 1))  # 1s, 2s, 4s, ...
            try:
                response = httpx.post(
                    cfg.endpoint or "",
                    json=payload,
                    headers=headers,
                    timeout=cfg.request_timeout_seconds,
                )
                response.raise_for_status()
                body = response.json()
                return body["choices"][0]["message"]["content"]
            except httpx.TimeoutException as exc:
                last_error = exc
                timed_out = True
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                last_error = exc
                timed_out = False
        if timed_out:
            raise BackendTimeout(f"backend timed out after {cfg.max_retries + 1} attempts") from last_error
        raise TransportError(f"backend unreachable after {cfg.max_retries + 1} attempts: {last_error}") from last_error


def make_backend(config: BackendConfig, sleeper: Callable[[float], None] = time.sleep) -> ChatBackend:
    if config.kind == "scripted":
        return ScriptedBackend(config.script or ())
    return HttpBackend(config, sleeper=sleeper)


def complete(backend: ChatBackend, request: ChatRequest) -> str:
    """Single entry point for every model call the engines make."""
    return backend.complete(request)


ContextView = tuple[tuple[StageSummary, ...], tuple[Utterance, ...]]


def build_agent_messages(
    view: ContextView,
    agent: Persona | None,
    mission: str,
    config: SessionConfig,
) -> tuple[ChatMessage, ...]:
    """Map a context view into role-tagged messages from one agent's perspective.

    The system message carries the agent's identity (or the moderator mission
    when ``agent`` is None), the topic and goals, all completed-stage
    summaries, and the mission. Tail utterances spoken by the agent itself
    become assistant messages; everyone else's become user messages prefixed
    with the speaker's display name.
    """
    summaries, tail = view
    lines: list[str] = []
    if agent is None:
        lines.append("You are the moderator of a focus group discussion.")
    else:
        lines.append(
            f"You are {agent.name}, a {agent.age}-year-old {agent.occupation} "
            f"from {agent.nationality}. Personality: {agent.personality}"
        )
        lines.append("You are taking part in a focus group discussion.")
    lines.append(f"Topic: {config.topic}")
    lines.append("Goals: " + "; ".join(config.goals))
    for summary in summaries:
        lines.append(f"Summary of stage {summary.stage_index + 1}: {summary.text}")
    lines.append(mission)
    messages = [ChatMessage(role="system", content="\n".join(lines))]

    agent_id = agent.id if agent is not None else None
    for u in tail:
        if u.speaker == agent_id:
            messages.append(ChatMessage(role="assistant", content=u.text))
        else:
            name = config.speaker_name(u.speaker)
            messages.append(ChatMessage(role="user", content=f"{name}: {u.text}"))
    return tuple(messages)


_INTEGER = re.compile(r"\d+")


def parse_engagement(text: str, persona: str) -> EngagementScore:
    """Extract the first integer in [0, 10] from a model reply."""
    for match in _INTEGER.finditer(text):
        value = int(match.group())
        if 0 <= value <= 10:
            return EngagementScore(persona=persona, value=value)
    raise MalformedScore(f"no integer in [0, 10] found in {text!r}")


_SENTENCE_END = re.compile(r"[.!?][\"')\]]*$")


def truncate_to_words(text: str, limit: int) -> str:
    """Cut at the last sentence boundary within ``limit`` words, else hard cut."""
    words = text.split()
    if len(words) <= limit:
        return text
    head = words[:limit]
    for i in range(len(head), 0, -1):
        if _SENTENCE_END.search(head[i - 1]):
            return " ".join(head[:i])
    return " ".join(head)


def enforce_word_limit(backend: ChatBackend, request: ChatRequest, limit: int) -> str:
    """Complete a request, re-asking once and finally truncating to keep the
    reply at or under ``limit`` words."""
    _require(limit >= 10, "word limit below 10 is not usable")
    reply = complete(backend, request)
    if len(reply.split()) <= limit:
        return reply
    retry = ChatRequest(
        messages=request.messages
        + (
            ChatMessage(role="assistant", content=reply),
            ChatMessage(
                role="user",
                content=f"That was too long. Repeat the same message in at most {limit} words.",
            ),
        ),
        max_words_hint=limit,
        temperature_hint=request.temperature_hint,
    )
    reply = complete(backend, retry)
    if len(reply.split()) <= limit:
        return reply
    return truncate_to_words(reply, limit)
