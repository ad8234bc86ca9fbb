"""Live moderated sessions with human participants.

The session core is pure: client events and timer checks go in, new state
and ordered server events come out. Wall-clock timestamps are always taken
from the caller, so every timing rule is testable under a virtual clock.
Stage progression in live mode depends only on wall clock and events; the
word-count time heuristic is a simulation-only device.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Literal, Sequence

from .model import (
    DiscussionPlan,
    FocusAgentError,
    MODERATOR_ID,
    SessionConfig,
    Stage,
    StageSummary,
    Transcript,
    Utterance,
    ValidationError,
    append_summary,
    append_utterance,
    new_transcript,
    next_sequence,
    speaking_stats,
    _require,
)
from .moderator import ModeratorAction, ModeratorEngine, ModeratorEvent, ModeratorState

FILE_FORMAT = "fgt.v1"

# How long the floor stays open after the closing question before the
# session shuts down.
CLOSING_GRACE_SECONDS = 30.0

_ACTION_TO_KIND = {
    "emit_stage_intro": "stage_intro",
    "prompt_inactive": "inactive_prompt",
    "emit_insight_question": "insight_question",
    "emit_reflection": "reflection_summary",
    "emit_closing_question": "closing_question",
}


class UnknownClient(FocusAgentError):
    """An utterance arrived from a connection that never joined."""


class SessionClosed(FocusAgentError):
    """The session has ended; no further events are accepted."""


class FrameError(FocusAgentError):
    """A wire frame could not be parsed."""


class EncodeError(FocusAgentError):
    pass


class DecodeError(FocusAgentError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line


class HeaderMissing(FocusAgentError):
    pass


# -- wire protocol -------------------------------------------------------------


@dataclass(frozen=True)
class ClientEvent:
    kind: Literal["join", "utterance", "leave", "ping"]
    client: str
    at: float
    display_name: str | None = None
    text: str | None = None

    def __post_init__(self) -> None:
        if self.kind == "join":
            _require(bool(self.display_name), "join events need a display_name")
        if self.kind == "utterance":
            _require(bool(self.text), "utterance events need text")


@dataclass(frozen=True)
class ServerEvent:
    kind: Literal["moderator_message", "stage_changed", "participant_echo", "session_closed", "roster"]
    at: float
    text: str | None = None
    subtitle: bool | None = None
    index: int | None = None
    title: str | None = None
    name: str | None = None
    names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.names is not None:
            object.__setattr__(self, "names", tuple(self.names))
        if self.kind == "moderator_message":
            _require(self.subtitle is True, "moderator messages always render as subtitles")


_CLIENT_FIELDS = {"join": ("display_name",), "utterance": ("text",), "leave": (), "ping": ()}
_SERVER_FIELDS = {
    "moderator_message": ("text", "subtitle"),
    "stage_changed": ("index", "title"),
    "participant_echo": ("name", "text"),
    "session_closed": (),
    "roster": ("names",),
}


def server_event_to_wire(event: ServerEvent) -> str:
    payload: dict = {"kind": event.kind, "at": event.at}
    for field_name in _SERVER_FIELDS[event.kind]:
        value = getattr(event, field_name)
        payload[field_name] = list(value) if isinstance(value, tuple) else value
    return json.dumps(payload, sort_keys=True)


def client_event_to_wire(event: ClientEvent) -> str:
    payload: dict = {"kind": event.kind, "client": event.client, "at": event.at}
    for field_name in _CLIENT_FIELDS[event.kind]:
        payload[field_name] = getattr(event, field_name)
    return json.dumps(payload, sort_keys=True)


def parse_client_frame(raw: str, client: str, at: float) -> ClientEvent:
    """Parse one inbound text frame; the server stamps connection id and time."""
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise FrameError(f"not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("kind") not in _CLIENT_FIELDS:
        raise FrameError(f"unknown client frame: {raw[:80]!r}")
    kind = payload["kind"]
    try:
        return ClientEvent(
            kind=kind,
            client=client,
            at=at,
            display_name=payload.get("display_name"),
            text=payload.get("text"),
        )
    except ValidationError as exc:
        raise FrameError(str(exc)) from exc


# -- session state --------------------------------------------------------------


@dataclass(frozen=True)
class LiveSessionState:
    moderator: ModeratorState
    transcript: Transcript
    roster: tuple[tuple[str, str], ...] = ()
    last_activity: float = 0.0
    responses_since_last_question: int = 0
    stage_deadline: float = 0.0
    zero_response_interventions: int = 0
    backend_busy: bool = False
    closed: bool = False
    silence_seconds: float = 5.0

    def roster_names(self) -> tuple[str, ...]:
        return tuple(name for _, name in self.roster)

    def display_name(self, client: str) -> str | None:
        for cid, name in self.roster:
            if cid == client:
                return name
        return None


def start_session(
    config: SessionConfig, plan: DiscussionPlan, engine: ModeratorEngine, now: float
) -> tuple[LiveSessionState, list[ServerEvent]]:
    """Open the session: emit the first stage intro and arm its deadline."""
    state = LiveSessionState(
        moderator=ModeratorState(),
        transcript=new_transcript(config, plan),
        last_activity=now,
        silence_seconds=config.silence_seconds,
    )
    return pump_transitions(state, now, engine, config)


def handle_client_event(
    state: LiveSessionState, event: ClientEvent, config: SessionConfig
) -> tuple[LiveSessionState, list[ServerEvent]]:
    """Apply one client event; returns the events to broadcast to everyone."""
    if state.closed:
        raise SessionClosed("the session has ended")

    if event.kind == "join":
        roster = tuple(entry for entry in state.roster if entry[0] != event.client)
        roster += ((event.client, event.display_name or ""),)
        state = replace(state, roster=roster, last_activity=event.at)
        return state, [ServerEvent(kind="roster", at=event.at, names=state.roster_names())]

    if event.kind == "utterance":
        name = state.display_name(event.client)
        if name is None:
            raise UnknownClient(f"client {event.client} has not joined")
        assert event.text is not None
        stage_index = min(state.moderator.current_stage, len(state.transcript.plan.stages) - 1)
        utterance = Utterance(
            speaker=_speaker_id(config, name),
            kind="human_response",
            text=event.text,
            stage_index=stage_index,
            estimated_minutes=0.0,
            sequence=next_sequence(state.transcript),
            wall_clock=event.at,
        )
        state = replace(
            state,
            transcript=append_utterance(state.transcript, utterance),
            last_activity=event.at,
            responses_since_last_question=state.responses_since_last_question + 1,
            zero_response_interventions=0,
        )
        return state, [ServerEvent(kind="participant_echo", at=event.at, name=name, text=event.text)]

    if event.kind == "leave":
        roster = tuple(entry for entry in state.roster if entry[0] != event.client)
        state = replace(state, roster=roster)
        return state, [ServerEvent(kind="roster", at=event.at, names=state.roster_names())]

    return state, []  # ping


def silence_monitor(state: LiveSessionState, now: float) -> bool:
    """True when the moderator should step in: the room has been quiet for at
    least the configured window, no backend call is in flight, and the
    session is inside a stage rather than reflecting or closing."""
    return (
        not state.closed
        and not state.backend_busy
        and state.moderator.phase == "awaiting"
        and now - state.last_activity >= state.silence_seconds
    )


def needs_intervention(state: LiveSessionState, now: float) -> bool:
    """Whether the driver should call advance_policy at this instant."""
    if state.closed:
        return False
    if silence_monitor(state, now):
        return True
    return state.moderator.phase in ("awaiting", "closing") and now >= state.stage_deadline


def advance_policy(
    state: LiveSessionState, now: float, engine: ModeratorEngine, config: SessionConfig
) -> tuple[LiveSessionState, ModeratorAction, list[ServerEvent]]:
    """Moderator intervention: called when silence_monitor fires or a deadline passes.

    Silence after an unanswered question never repeats it: a fresh question
    goes out first, and a second consecutive unanswered intervention moves
    the stage on. A passed stage deadline always closes the stage.
    """
    if state.closed:
        raise SessionClosed("the session has ended")
    phase = state.moderator.phase

    if phase == "closing":
        mod_state, action = engine.step(
            state.moderator, ModeratorEvent(kind="turn_idle"), state.transcript
        )
        state = replace(state, moderator=mod_state, closed=True)
        return state, action, [ServerEvent(kind="session_closed", at=now)]

    _require(phase == "awaiting", f"advance_policy is not valid in phase {phase}")

    if now >= state.stage_deadline:
        mod_state, action = engine.force_reflection(state.moderator, state.transcript)
    elif state.responses_since_last_question == 0 and state.zero_response_interventions >= 1:
        # Second silent intervention in a row: stop asking, move on.
        mod_state, action = engine.force_reflection(state.moderator, state.transcript)
    else:
        stats = speaking_stats(
            state.transcript, config.personas, state.moderator.current_stage
        )
        mod_state, action = engine.step(
            state.moderator, ModeratorEvent(kind="turn_idle"), state.transcript, stats
        )

    if action.kind == "emit_reflection":
        state = _apply_reflection(state, mod_state, action, now)
        return state, action, [
            ServerEvent(kind="moderator_message", at=now, text=action.text, subtitle=True)
        ]

    # A question went out (inactive prompt or insight question).
    assert action.text is not None
    zero_responses = state.responses_since_last_question == 0
    utterance = _moderator_utterance(state.transcript, action, state.moderator.current_stage, now)
    state = replace(
        state,
        moderator=mod_state,
        transcript=append_utterance(state.transcript, utterance),
        last_activity=now,
        responses_since_last_question=0,
        zero_response_interventions=state.zero_response_interventions + 1 if zero_responses else 0,
    )
    return state, action, [
        ServerEvent(kind="moderator_message", at=now, text=action.text, subtitle=True)
    ]


def pump_transitions(
    state: LiveSessionState, now: float, engine: ModeratorEngine, config: SessionConfig
) -> tuple[LiveSessionState, list[ServerEvent]]:
    """Advance through transient phases (planning, reflecting, stage_intro)
    until the session is awaiting input, closing, or done."""
    events: list[ServerEvent] = []
    while not state.closed and state.moderator.phase in ("planning", "reflecting", "stage_intro"):
        mod_state, action = engine.step(
            state.moderator, ModeratorEvent(kind="turn_idle"), state.transcript
        )
        if action.kind == "advance_stage":
            state = replace(state, moderator=mod_state)
            continue
        assert action.text is not None
        stage_index = mod_state.current_stage
        utterance = _moderator_utterance(state.transcript, action, stage_index, now)
        transcript = append_utterance(state.transcript, utterance)
        if action.kind == "emit_stage_intro":
            stage = state.transcript.plan.stages[stage_index]
            events.append(
                ServerEvent(kind="stage_changed", at=now, index=stage.index, title=stage.title)
            )
            deadline = now + stage.allocated_minutes * 60.0
        else:  # emit_closing_question
            deadline = now + CLOSING_GRACE_SECONDS
        events.append(
            ServerEvent(kind="moderator_message", at=now, text=action.text, subtitle=True)
        )
        state = replace(
            state,
            moderator=mod_state,
            transcript=transcript,
            last_activity=now,
            responses_since_last_question=0,
            stage_deadline=deadline,
        )
    return state, events


def _apply_reflection(
    state: LiveSessionState, mod_state: ModeratorState, action: ModeratorAction, now: float
) -> LiveSessionState:
    assert action.text is not None
    stage_index = state.moderator.current_stage
    utterance = _moderator_utterance(state.transcript, action, stage_index, now)
    transcript = append_utterance(state.transcript, utterance)
    transcript = append_summary(
        transcript, StageSummary(stage_index=stage_index, text=action.text, anonymized=True)
    )
    return replace(
        state,
        moderator=mod_state,
        transcript=transcript,
        last_activity=now,
        zero_response_interventions=0,
    )


def _moderator_utterance(
    transcript: Transcript, action: ModeratorAction, stage_index: int, now: float
) -> Utterance:
    assert action.text is not None
    return Utterance(
        speaker=MODERATOR_ID,
        kind=_ACTION_TO_KIND[action.kind],
        text=action.text,
        stage_index=stage_index,
        estimated_minutes=0.0,  # live mode: wall clock only
        sequence=next_sequence(transcript),
        wall_clock=now,
    )


def _speaker_id(config: SessionConfig, display_name: str) -> str:
    for persona in config.personas:
        if persona.name.casefold() == display_name.casefold():
            return persona.id
    return f"guest:{display_name}"


# -- persistence -----------------------------------------------------------------


def transcript_to_jsonl(transcript: Transcript) -> str:
    """Serialize a transcript to line-delimited records: one header line, then
    one utterance per line, then the completed-stage summaries."""
    lines = [
        json.dumps(
            {
                "record": "header",
                "format": FILE_FORMAT,
                "config_digest": transcript.config_digest,
                "plan": {
                    "stages": [
                        {
                            "index": s.index,
                            "title": s.title,
                            "objective": s.objective,
                            "allocated_minutes": s.allocated_minutes,
                        }
                        for s in transcript.plan.stages
                    ]
                },
            },
            sort_keys=True,
        )
    ]
    for u in transcript.utterances:
        lines.append(
            json.dumps(
                {
                    "record": "utterance",
                    "speaker": u.speaker,
                    "kind": u.kind,
                    "text": u.text,
                    "stage_index": u.stage_index,
                    "estimated_minutes": u.estimated_minutes,
                    "sequence": u.sequence,
                    "wall_clock": u.wall_clock,
                },
                sort_keys=True,
            )
        )
    for s in transcript.summaries:
        lines.append(
            json.dumps(
                {
                    "record": "summary",
                    "stage_index": s.stage_index,
                    "text": s.text,
                    "anonymized": s.anonymized,
                },
                sort_keys=True,
            )
        )
    return "\n".join(lines) + "\n"


def persist_transcript(transcript: Transcript, path: str | Path) -> None:
    try:
        Path(path).write_text(transcript_to_jsonl(transcript), encoding="utf-8")
    except (TypeError, ValueError, UnicodeEncodeError) as exc:
        raise EncodeError(f"transcript cannot be encoded: {exc}") from exc


def transcript_from_jsonl(raw: str, origin: str = "<string>") -> Transcript:
    """Inverse of transcript_to_jsonl; reports the failing line on bad input."""
    lines = raw.splitlines()
    if not lines:
        raise HeaderMissing(f"{origin} is empty")

    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError:
        raise HeaderMissing(f"{origin} does not start with a header line") from None
    if not isinstance(header, dict) or header.get("record") != "header":
        raise HeaderMissing(f"{origin} does not start with a header line")

    try:
        stages = tuple(
            Stage(
                index=s["index"],
                title=s["title"],
                objective=s["objective"],
                allocated_minutes=s["allocated_minutes"],
            )
            for s in header["plan"]["stages"]
        )
        transcript = Transcript(
            config_digest=header["config_digest"], plan=DiscussionPlan(stages=stages)
        )
    except (KeyError, TypeError, ValidationError) as exc:
        raise DecodeError(1, f"bad header: {exc}") from exc

    utterances: list[Utterance] = []
    summaries: list[StageSummary] = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            kind = record["record"]
            if kind == "utterance":
                utterances.append(
                    Utterance(
                        speaker=record["speaker"],
                        kind=record["kind"],
                        text=record["text"],
                        stage_index=record["stage_index"],
                        estimated_minutes=record["estimated_minutes"],
                        sequence=record["sequence"],
                        wall_clock=record["wall_clock"],
                    )
                )
            elif kind == "summary":
                summaries.append(
                    StageSummary(
                        stage_index=record["stage_index"],
                        text=record["text"],
                        anonymized=record["anonymized"],
                    )
                )
            else:
                raise DecodeError(line_no, f"unknown record type {kind!r}")
        except DecodeError:
            raise
        except (json.JSONDecodeError, KeyError, TypeError, ValidationError) as exc:
            raise DecodeError(line_no, str(exc)) from exc

    return replace(transcript, utterances=tuple(utterances), summaries=tuple(summaries))


def load_transcript(path: str | Path) -> Transcript:
    return transcript_from_jsonl(Path(path).read_text(encoding="utf-8"), origin=str(path))


def render_minutes(transcript: Transcript, config: SessionConfig | None = None) -> str:
    """Plain-text minutes of a session, stage by stage."""

    def name_of(speaker: str) -> str:
        if config is not None:
            return config.speaker_name(speaker)
        return "Moderator" if speaker == MODERATOR_ID else speaker

    summary_by_stage = {s.stage_index: s for s in transcript.summaries}
    out: list[str] = ["FOCUS GROUP MINUTES", f"config: {transcript.config_digest[:12]}", ""]
    for stage in transcript.plan.stages:
        out.append(f"== Stage {stage.index + 1}: {stage.title} ({stage.allocated_minutes:g} min)")
        for u in transcript.stage_utterances(stage.index):
            if u.kind == "reflection_summary":
                continue
            out.append(f"{name_of(u.speaker)}: {u.text}")
        summary = summary_by_stage.get(stage.index)
        if summary is not None:
            out.append(f"Summary: {summary.text}")
        out.append("")
    return "\n".join(out)

