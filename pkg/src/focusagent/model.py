"""Shared domain types for focus-group sessions and the pure helpers built on them.

Everything in this module is an immutable value or a pure function, so it is
safe to share across threads without coordination.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Literal, Mapping, Sequence

MODERATOR_ID = "moderator"

UtteranceKind = Literal[
    "stage_intro",
    "insight_question",
    "inactive_prompt",
    "participant_response",
    "human_response",
    "closing_question",
    "reflection_summary",
]

UTTERANCE_KINDS: frozenset[str] = frozenset(
    (
        "stage_intro",
        "insight_question",
        "inactive_prompt",
        "participant_response",
        "human_response",
        "closing_question",
        "reflection_summary",
    )
)


class FocusAgentError(Exception):
    """Base class for every domain error raised by this package."""


class ValidationError(FocusAgentError):
    """A value violates one of its declared invariants."""


class SequenceGap(FocusAgentError):
    """An utterance's sequence number is not the successor of the last one."""


class StageOutOfRange(FocusAgentError):
    """An utterance references a stage index outside the plan."""


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValidationError(message)


@dataclass(frozen=True)
class Persona:
    """One participant identity used to seed an agent (or expected human)."""

    id: str
    name: str
    age: int
    occupation: str
    nationality: str
    personality: str

    def __post_init__(self) -> None:
        _require(bool(self.id), "persona id must be non-empty")
        _require(bool(self.name), "persona name must be non-empty")
        _require("\n" not in self.name and "\r" not in self.name, "persona name must not contain line breaks")
        _require(self.age > 0, "persona age must be positive")


@dataclass(frozen=True)
class SessionConfig:
    """Experimenter-provided parameters for one session.

    ``topic``, ``goals``, ``total_minutes`` and ``personas`` describe the
    discussion; the remaining fields tune the engine and default to the
    values used throughout the test suite.
    """

    topic: str
    goals: tuple[str, ...]
    total_minutes: float
    personas: tuple[Persona, ...]
    engagement_threshold: float = 5.0
    words_per_minute: float = 100.0
    moderator_word_limit: int = 60
    stage_count_hint: int | None = None
    context_window: int = 12
    silence_seconds: float = 5.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "goals", tuple(self.goals))
        object.__setattr__(self, "personas", tuple(self.personas))
        _require(bool(self.topic), "topic must be non-empty")
        _require(len(self.goals) >= 1, "at least one goal is required")
        _require(self.total_minutes >= 5, "total_minutes must be at least 5")
        ids = [p.id for p in self.personas]
        _require(len(ids) == len(set(ids)), "persona ids must be unique within a session")
        _require(0 <= self.engagement_threshold <= 10, "engagement_threshold must lie in [0, 10]")
        _require(self.words_per_minute > 0, "words_per_minute must be positive")
        _require(self.moderator_word_limit > 0, "moderator_word_limit must be positive")
        _require(self.stage_count_hint is None or self.stage_count_hint > 0, "stage_count_hint must be positive")
        _require(self.context_window > 0, "context_window must be positive")
        _require(self.silence_seconds > 0, "silence_seconds must be positive")

    def persona_by_id(self, persona_id: str) -> Persona:
        for p in self.personas:
            if p.id == persona_id:
                return p
        raise KeyError(persona_id)

    def speaker_name(self, speaker: str) -> str:
        """Display name for a transcript speaker id."""
        if speaker == MODERATOR_ID:
            return "Moderator"
        try:
            return self.persona_by_id(speaker).name
        except KeyError:
            return speaker


@dataclass(frozen=True)
class Stage:
    index: int
    title: str
    objective: str
    allocated_minutes: float

    def __post_init__(self) -> None:
        _require(self.index >= 0, "stage index must be non-negative")
        _require(bool(self.title), "stage title must be non-empty")
        _require(self.allocated_minutes > 0, "allocated_minutes must be positive")


@dataclass(frozen=True)
class DiscussionPlan:
    """The moderator's schedule: ordered stages with time allocations."""

    stages: tuple[Stage, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "stages", tuple(self.stages))
        _require(len(self.stages) >= 1, "a plan needs at least one stage")
        for i, stage in enumerate(self.stages):
            _require(stage.index == i, "stage indices must be consecutive from 0")

    @property
    def total_minutes(self) -> float:
        return sum(s.allocated_minutes for s in self.stages)


@dataclass(frozen=True)
class Utterance:
    """One thing said during a session, tagged with its stage and sequence."""

    speaker: str
    kind: UtteranceKind
    text: str
    stage_index: int
    estimated_minutes: float
    sequence: int
    wall_clock: float | None = None

    def __post_init__(self) -> None:
        _require(self.kind in UTTERANCE_KINDS, f"unknown utterance kind: {self.kind!r}")
        _require(self.stage_index >= 0, "stage_index must be non-negative")
        _require(self.estimated_minutes >= 0, "estimated_minutes must be non-negative")
        _require(self.sequence >= 0, "sequence must be non-negative")


@dataclass(frozen=True)
class StageSummary:
    """End-of-stage reflection carried forward instead of verbatim context."""

    stage_index: int
    text: str
    anonymized: bool


@dataclass(frozen=True)
class SpeakingStats:
    """Per-stage utterance counts used for inactivity detection."""

    stage_index: int
    counts: Mapping[str, int]

    def __post_init__(self) -> None:
        _require(all(c >= 0 for c in self.counts.values()), "speaking counts must be non-negative")


@dataclass(frozen=True)
class Transcript:
    """Ordered, stage-tagged record of a session.

    A stage counts as completed once its summary is present; utterances for
    a completed stage are only ever surfaced through that summary.
    """

    config_digest: str
    plan: DiscussionPlan
    utterances: tuple[Utterance, ...] = ()
    summaries: tuple[StageSummary, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "utterances", tuple(self.utterances))
        object.__setattr__(self, "summaries", tuple(self.summaries))

    @property
    def current_stage(self) -> int:
        """Index of the first stage without a summary."""
        return len(self.summaries)

    def stage_utterances(self, stage_index: int) -> tuple[Utterance, ...]:
        return tuple(u for u in self.utterances if u.stage_index == stage_index)


def config_digest(config: SessionConfig) -> str:
    """Stable hex digest of a session config, used to tie transcripts to configs."""
    payload = {
        "topic": config.topic,
        "goals": list(config.goals),
        "total_minutes": config.total_minutes,
        "personas": [
            {
                "id": p.id,
                "name": p.name,
                "age": p.age,
                "occupation": p.occupation,
                "nationality": p.nationality,
                "personality": p.personality,
            }
            for p in config.personas
        ],
        "engagement_threshold": config.engagement_threshold,
        "words_per_minute": config.words_per_minute,
        "moderator_word_limit": config.moderator_word_limit,
        "stage_count_hint": config.stage_count_hint,
        "context_window": config.context_window,
        "silence_seconds": config.silence_seconds,
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def new_transcript(config: SessionConfig, plan: DiscussionPlan) -> Transcript:
    return Transcript(config_digest=config_digest(config), plan=plan)


def estimate_minutes(text: str, words_per_minute: float = 100.0) -> float:
    """Estimated speaking time: whitespace-separated word count over speaking rate.

    Tokens are maximal runs of non-whitespace, so punctuation attaches to its
    word and never changes the count.
    """
    if words_per_minute <= 0:
        raise ValidationError("words_per_minute must be positive")
    return len(text.split()) / words_per_minute


def inactive_participants(stats: SpeakingStats) -> frozenset[str]:
    """Persona ids counted as inactive in the given stage.

    A participant is inactive when it has not spoken at all, or when tripling
    its count still does not exceed the most active participant's count
    (inclusive reading, so encouragement kicks in at the boundary). When all
    counts are zero everyone is inactive.
    """
    _require(len(stats.counts) >= 1, "stats must cover at least one persona")
    peak = max(stats.counts.values())
    return frozenset(p for p, c in stats.counts.items() if c == 0 or 3 * c <= peak)


def append_utterance(transcript: Transcript, utterance: Utterance) -> Transcript:
    """Return the transcript with ``utterance`` appended, enforcing ordering."""
    expected = transcript.utterances[-1].sequence + 1 if transcript.utterances else 0
    if utterance.sequence != expected:
        raise SequenceGap(f"expected sequence {expected}, got {utterance.sequence}")
    if utterance.stage_index >= len(transcript.plan.stages):
        raise StageOutOfRange(
            f"stage_index {utterance.stage_index} outside plan of {len(transcript.plan.stages)} stages"
        )
    return replace(transcript, utterances=transcript.utterances + (utterance,))


def append_summary(transcript: Transcript, summary: StageSummary) -> Transcript:
    """Record a completed stage. Summaries must arrive in stage order."""
    _require(summary.stage_index == len(transcript.summaries), "summaries must be appended in stage order")
    return replace(transcript, summaries=transcript.summaries + (summary,))


def recent_context(
    transcript: Transcript, budget: int
) -> tuple[tuple[StageSummary, ...], tuple[Utterance, ...]]:
    """Context window for prompting: completed-stage summaries plus the tail
    of the current stage, never verbatim text from completed stages."""
    _require(budget > 0, "budget must be positive")
    current = transcript.current_stage
    tail = tuple(u for u in transcript.utterances if u.stage_index == current)
    return transcript.summaries, tail[-budget:]


def speaking_stats(
    transcript: Transcript, personas: Sequence[Persona], stage_index: int
) -> SpeakingStats:
    """Count participant utterances per persona within one stage."""
    counts = {p.id: 0 for p in personas}
    for u in transcript.utterances:
        if u.stage_index != stage_index:
            continue
        if u.kind in ("participant_response", "human_response") and u.speaker in counts:
            counts[u.speaker] += 1
    return SpeakingStats(stage_index=stage_index, counts=counts)


def next_sequence(transcript: Transcript) -> int:
    return transcript.utterances[-1].sequence + 1 if transcript.utterances else 0


def validate_transcript(transcript: Transcript) -> None:
    """Check the cross-cutting transcript invariants; raises on violation."""
    stage_count = len(transcript.plan.stages)
    last_seq = -1
    for u in transcript.utterances:
        _require(u.sequence > last_seq, "sequences must be strictly increasing")
        last_seq = u.sequence
        _require(u.stage_index < stage_count, "utterance stage out of range")
    reflections: dict[int, int] = {}
    for u in transcript.utterances:
        if u.kind == "reflection_summary":
            reflections[u.stage_index] = reflections.get(u.stage_index, 0) + 1
    for s in transcript.summaries:
        _require(reflections.get(s.stage_index, 0) == 1, "each completed stage needs exactly one reflection utterance")
