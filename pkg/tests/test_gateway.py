from __future__ import annotations

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from focusagent.gateway import (
    BackendConfig,
    ChatMessage,
    ChatRequest,
    HttpBackend,
    MalformedScore,
    ScriptExhausted,
    ScriptedBackend,
    TransportError,
    BackendTimeout,
    build_agent_messages,
    complete,
    enforce_word_limit,
    make_backend,
    parse_engagement,
    truncate_to_words,
)
from focusagent.model import MODERATOR_ID, Utterance, ValidationError

from conftest import make_config


def req(*contents: str) -> ChatRequest:
    messages = [ChatMessage(role="system", content="mission")]
    for content in contents:
        messages.append(ChatMessage(role="user", content=content))
    return ChatRequest(messages=tuple(messages))


class TestScriptedBackend:
    def test_single_fixture_then_exhausted(self):
        backend = ScriptedBackend(["hello"])
        assert complete(backend, req()) == "hello"
        with pytest.raises(ScriptExhausted):
            complete(backend, req())

    def test_fixtures_in_order(self):
        backend = ScriptedBackend(["a", "b", "c"])
        assert [complete(backend, req()) for _ in range(3)] == ["a", "b", "c"]

    def test_determinism(self):
        script = ["one", "two", "three"]
        runs = []
        for _ in range(2):
            backend = make_backend(BackendConfig(kind="scripted", script=tuple(script)))
            runs.append([complete(backend, req()) for _ in range(3)])
        assert runs[0] == runs[1]

    def test_call_count(self):
        backend = ScriptedBackend(["x", "y"])
        complete(backend, req())
        complete(backend, req())
        assert backend.calls == 2


class TestHttpBackend:
    def _config(self, **kw):
        defaults = dict(
            kind="http",
            endpoint="http://127.0.0.1:9/v1/chat/completions",
            model_name="local-model",
            max_retries=2,
        )
        defaults.update(kw)
        return BackendConfig(**defaults)

    def test_transport_error_after_retries(self, monkeypatch):
        attempts = []

        def failing_post(url, **kwargs):
            attempts.append(url)
            raise httpx.ConnectError("refused")

        monkeypatch.setattr(httpx, "post", failing_post)
        sleeps: list[float] = []
        backend = HttpBackend(self._config(), sleeper=sleeps.append)
        with pytest.raises(TransportError):
            backend.complete(req())
        assert len(attempts) == 3  # max_retries + 1
        assert sleeps == [1.0, 2.0]  # exponential backoff from 1 s

    def test_timeout_maps_to_backend_timeout(self, monkeypatch):
        monkeypatch.setattr(
            httpx, "post", lambda url, **kw: (_ for _ in ()).throw(httpx.ReadTimeout("slow"))
        )
        backend = HttpBackend(self._config(max_retries=0), sleeper=lambda s: None)
        with pytest.raises(BackendTimeout):
            backend.complete(req())

    def test_parses_chat_completions_reply(self, monkeypatch):
        def fake_post(url, json=None, **kwargs):
            assert json["model"] == "local-model"
            assert json["messages"][0]["role"] == "system"
            request = httpx.Request("POST", url)
            return httpx.Response(
                200,
                json={"choices": [{"message": {"content": "fine"}}]},
                request=request,
            )

        monkeypatch.setattr(httpx, "post", fake_post)
        backend = HttpBackend(self._config())
        assert backend.complete(req("hi")) == "fine"

    def test_http_config_requires_endpoint(self):
        with pytest.raises(ValidationError):
            BackendConfig(kind="http", model_name="m")

    def test_bearer_token_from_environment(self, monkeypatch):
        seen = {}

        def fake_post(url, json=None, headers=None, **kwargs):
            seen.update(headers or {})
            return httpx.Response(
                200,
                json={"choices": [{"message": {"content": "ok"}}]},
                request=httpx.Request("POST", url),
            )

        monkeypatch.setattr(httpx, "post", fake_post)
        monkeypatch.setenv("FOCUSAGENT_API_KEY", "sk-test-123")
        HttpBackend(self._config()).complete(req())
        assert seen["Authorization"] == "Bearer sk-test-123"


class TestBuildAgentMessages:
    def moderator_q(self, text="What apps do you use?"):
        return Utterance(MODERATOR_ID, "insight_question", text, 0, 0.05, 0)

    def alice_a(self, text="I use app timers."):
        return Utterance("ana", "participant_response", text, 0, 0.04, 1)

    def test_empty_view_single_system_message(self):
        config = make_config()
        messages = build_agent_messages(((), ()), config.personas[0], "mission", config)
        assert len(messages) == 1
        assert messages[0].role == "system"

    def test_own_utterance_is_assistant(self):
        config = make_config()
        tail = (self.moderator_q(), self.alice_a())
        messages = build_agent_messages(((), tail), config.personas[0], "m", config)
        assert [m.role for m in messages] == ["system", "user", "assistant"]
        assert messages[1].content == "Moderator: What apps do you use?"
        assert messages[2].content == "I use app timers."

    def test_other_speaker_is_prefixed_user(self):
        config = make_config()
        tail = (self.moderator_q(), self.alice_a())
        messages = build_agent_messages(((), tail), config.personas[1], "m", config)
        assert [m.role for m in messages] == ["system", "user", "user"]
        assert messages[2].content == "Ana: I use app timers."

    def test_system_message_carries_identity_topic_goals_and_summaries(self):
        from focusagent.model import StageSummary

        config = make_config()
        view = ((StageSummary(0, "people want balance", True),), ())
        system = build_agent_messages(view, config.personas[0], "the mission", config)[0]
        for needle in ("Ana", "teacher", config.topic, config.goals[0], "people want balance", "the mission"):
            assert needle in system.content

    @given(st.data())
    def test_perspective_property(self, data):
        config = make_config()
        speakers = [MODERATOR_ID] + [p.id for p in config.personas]
        n = data.draw(st.integers(0, 8))
        tail = tuple(
            Utterance(
                data.draw(st.sampled_from(speakers)),
                "participant_response",
                f"text {i}",
                0,
                0.01,
                i,
            )
            for i in range(n)
        )
        a, b = config.personas[0], config.personas[1]
        msgs_a = build_agent_messages(((), tail), a, "m", config)
        msgs_b = build_agent_messages(((), tail), b, "m", config)
        assert len(msgs_a) == len(msgs_b) == n + 1
        for u, ma, mb in zip(tail, msgs_a[1:], msgs_b[1:]):
            assert (ma.role == "assistant") == (u.speaker == a.id)
            assert (mb.role == "assistant") == (u.speaker == b.id)
            assert ma.content.endswith(u.text) and mb.content.endswith(u.text)


class TestParseEngagement:
    def test_bare_integer(self):
        assert parse_engagement("7", "p").value == 7

    def test_first_in_range_integer(self):
        assert parse_engagement("Engagement: 8/10, eager to respond", "p").value == 8

    def test_malformed(self):
        with pytest.raises(MalformedScore):
            parse_engagement("very engaged", "p")

    def test_out_of_range_numbers_are_skipped(self):
        assert parse_engagement("level 99 intensity, say 6", "p").value == 6

    @pytest.mark.parametrize("fmt", ["{n}", "Engagement: {n}/10, eager to respond", "{n}/10"])
    @pytest.mark.parametrize("n", range(11))
    def test_round_trip_formats(self, fmt, n):
        assert parse_engagement(fmt.format(n=n), "p").value == n


class TestEnforceWordLimit:
    def words(self, n: int) -> str:
        return " ".join(f"w{i}" for i in range(n))

    def test_short_reply_unchanged(self):
        backend = ScriptedBackend([self.words(40)])
        assert enforce_word_limit(backend, req(), 60) == self.words(40)
        assert backend.calls == 1

    def test_single_reask(self):
        backend = ScriptedBackend([self.words(90), self.words(50)])
        assert enforce_word_limit(backend, req(), 60) == self.words(50)
        assert backend.calls == 2

    def test_truncation_after_two_long_replies(self):
        backend = ScriptedBackend([self.words(90), self.words(90)])
        result = enforce_word_limit(backend, req(), 60)
        assert len(result.split()) <= 60

    def test_truncates_at_sentence_boundary(self):
        long_reply = "First point here. Second point follows now. " + self.words(60)
        backend = ScriptedBackend([long_reply, long_reply])
        result = enforce_word_limit(backend, req(), 10)
        assert result == "First point here. Second point follows now."

    def test_hard_cut_without_boundary(self):
        assert truncate_to_words(self.words(30), 12) == self.words(12)

    @given(st.integers(10, 40), st.integers(1, 80), st.integers(1, 80))
    def test_output_never_exceeds_limit(self, limit, n1, n2):
        backend = ScriptedBackend([self.words(n1), self.words(n2)])
        result = enforce_word_limit(backend, req(), limit)
        assert len(result.split()) <= limit
