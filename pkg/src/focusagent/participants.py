"""Participant side of the simulation: engagement scoring and speaker selection.

Every persona rates its own eagerness to speak from its own perspective of
the discussion; the highest score wins the turn when it clears the session
threshold. Ties go to whoever has spoken least this stage.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .gateway import (
    ChatBackend,
    ChatRequest,
    ContextView,
    EngagementScore,
    MalformedScore,
    build_agent_messages,
    complete,
    parse_engagement,
)
from .model import FocusAgentError, Persona, SessionConfig, SpeakingStats, _require
from .prompts import DEFAULT_PROMPTS, PromptLibrary


class EmptyResponse(FocusAgentError):
    """A selected speaker produced an empty reply."""


@dataclass(frozen=True)
class SpeakerSelection:
    chosen: str | None
    scores: tuple[EngagementScore, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "scores", tuple(self.scores))


def score_all_engagement(
    personas: Sequence[Persona],
    view: ContextView,
    config: SessionConfig,
    backend: ChatBackend,
    prompts: PromptLibrary = DEFAULT_PROMPTS,
) -> tuple[EngagementScore, ...]:
    """One engagement call per persona, in persona order.

    A malformed reply is retried once; a second malformed reply scores 0 so a
    misbehaving persona cannot halt the session.
    """
    _require(len(personas) >= 1, "at least one persona is required")
    mission = prompts.render("EngagementPrompt")
    scores = []
    for persona in personas:
        request = ChatRequest(messages=build_agent_messages(view, persona, mission, config))
        try:
            scores.append(parse_engagement(complete(backend, request), persona.id))
        except MalformedScore:
            try:
                scores.append(parse_engagement(complete(backend, request), persona.id))
            except MalformedScore:
                scores.append(EngagementScore(persona=persona.id, value=0))
    return tuple(scores)


def select_speaker(
    scores: Sequence[EngagementScore],
    threshold: float,
    stats: SpeakingStats,
    persona_order: Sequence[str],
) -> SpeakerSelection:
    """Pick the max-score persona, or nobody when every score is below threshold.

    Ties break first toward fewer utterances in the current stage, then by
    persona order.
    """
    _require(len(scores) >= 1, "scores must be non-empty")
    best = max(s.value for s in scores)
    if best < threshold:
        return SpeakerSelection(chosen=None, scores=tuple(scores))
    order = {pid: i for i, pid in enumerate(persona_order)}
    top = [s.persona for s in scores if s.value == best]
    chosen = min(top, key=lambda pid: (stats.counts.get(pid, 0), order.get(pid, len(order))))
    return SpeakerSelection(chosen=chosen, scores=tuple(scores))


def participant_response(
    persona: Persona,
    view: ContextView,
    config: SessionConfig,
    backend: ChatBackend,
    prompts: PromptLibrary = DEFAULT_PROMPTS,
) -> str:
    """Generate the selected speaker's reply from its own perspective."""
    mission = prompts.render("PartResponsePrompt")
    request = ChatRequest(messages=build_agent_messages(view, persona, mission, config))
    reply = complete(backend, request)
    if not reply.strip():
        raise EmptyResponse(f"persona {persona.id} produced an empty reply")
    return reply
