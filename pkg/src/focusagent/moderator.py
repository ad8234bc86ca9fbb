"""Moderator state machine: stage planning, question selection, reflection.

The engine is a pure transition function over an immutable ``ModeratorState``;
one logical owner per session drives it. Branch order on each turn: accept a
participant response if one arrived, otherwise encourage an inactive
participant, otherwise ask a fresh insight question. Whenever the stage's
accumulated time reaches its allocation the stage is closed with a reflection.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Literal, Sequence

from .gateway import (
    ChatBackend,
    ChatMessage,
    ChatRequest,
    build_agent_messages,
    complete,
    enforce_word_limit,
)
from .model import (
    DiscussionPlan,
    FocusAgentError,
    Persona,
    SessionConfig,
    SpeakingStats,
    Stage,
    StageSummary,
    Transcript,
    Utterance,
    estimate_minutes,
    inactive_participants,
    recent_context,
    _require,
)
from .prompts import DEFAULT_PROMPTS, PromptLibrary

Phase = Literal["planning", "stage_intro", "awaiting", "reflecting", "closing", "done"]

ActionKind = Literal[
    "emit_stage_intro",
    "accept_response",
    "prompt_inactive",
    "emit_insight_question",
    "emit_reflection",
    "emit_closing_question",
    "advance_stage",
    "finish",
]

EMITTING_KINDS: frozenset[str] = frozenset(
    (
        "emit_stage_intro",
        "prompt_inactive",
        "emit_insight_question",
        "emit_reflection",
        "emit_closing_question",
    )
)

CLOSING_QUESTION = (
    "Before we finish, does anyone have any additional opinions on the topic "
    "that you did not get the chance to share earlier?"
)


class PlanInvalid(FocusAgentError):
    """The backend's stage plan could not be parsed into a usable schedule."""


class IllegalEvent(FocusAgentError):
    """An event was delivered in a phase that cannot handle it."""


@dataclass(frozen=True)
class ModeratorState:
    phase: Phase = "planning"
    current_stage: int = 0
    time_accumulated_minutes: float = 0.0
    asked_questions: tuple[str, ...] = ()
    pending_inactive: str | None = None


@dataclass(frozen=True)
class ModeratorAction:
    kind: ActionKind
    text: str | None = None
    target: str | None = None

    def __post_init__(self) -> None:
        _require(
            (self.text is not None) == (self.kind in EMITTING_KINDS),
            f"text must be present exactly for emitting kinds, got {self.kind}",
        )


@dataclass(frozen=True)
class ModeratorEvent:
    kind: Literal["participant_uttered", "turn_idle", "stage_time_checked"]
    utterance: Utterance | None = None


def normalize_question(text: str) -> str:
    """Lowercase, drop punctuation, collapse whitespace."""
    stripped = re.sub(r"[^\w\s]+", "", text.lower())
    return " ".join(stripped.split())


def is_repeat_question(candidate: str, asked: Sequence[str]) -> bool:
    return normalize_question(candidate) in asked


def anonymize_summary(text: str, personas: Sequence[Persona]) -> str:
    """Redact every word-boundary, case-insensitive persona name.

    Names become "a participant", capitalized at sentence starts. The
    operation is idempotent because the replacement contains no names.
    """
    if not personas:
        return text
    names = sorted({p.name for p in personas}, key=len, reverse=True)
    pattern = re.compile(r"\b(?:" + "|".join(re.escape(n) for n in names) + r")\b", re.IGNORECASE)

    def repl(match: re.Match[str]) -> str:
        prefix = text[: match.start()].rstrip()
        at_sentence_start = not prefix or prefix[-1] in ".!?"
        return "A participant" if at_sentence_start else "a participant"

    return pattern.sub(repl, text)


def contains_persona_name(text: str, personas: Sequence[Persona]) -> bool:
    if not personas:
        return False
    pattern = re.compile(
        r"\b(?:" + "|".join(re.escape(p.name) for p in personas) + r")\b", re.IGNORECASE
    )
    return pattern.search(text) is not None


def plan_stages(
    config: SessionConfig,
    backend: ChatBackend,
    prompts: PromptLibrary = DEFAULT_PROMPTS,
) -> DiscussionPlan:
    """Ask the backend for a schedule and rescale it to the session length.

    The reply must contain stage lines of the form "title | objective |
    minutes"; lines without a pipe are ignored as chatter. Allocations are
    scaled proportionally so they sum to ``config.total_minutes`` exactly.
    """
    hint = config.stage_count_hint
    mission = prompts.render(
        "PlanPrompt",
        topic=config.topic,
        goals="; ".join(config.goals),
        total_minutes=config.total_minutes,
        stage_count_instruction=f"Plan exactly {hint} stages." if hint else "",
    )
    reply = complete(backend, ChatRequest(messages=(ChatMessage(role="system", content=mission),)))

    parsed: list[tuple[str, str, float]] = []
    for line in reply.splitlines():
        line = line.strip()
        if not line or "|" not in line:
            continue
        parts = [part.strip() for part in line.split("|")]
        if len(parts) != 3 or not parts[0]:
            raise PlanInvalid(f"stage line not in 'title | objective | minutes' form: {line!r}")
        try:
            minutes = float(parts[2])
        except ValueError:
            raise PlanInvalid(f"unparseable minutes in stage line: {line!r}") from None
        if minutes <= 0:
            raise PlanInvalid(f"non-positive allocation in stage line: {line!r}")
        parsed.append((parts[0], parts[1], minutes))

    if not parsed:
        raise PlanInvalid("the plan reply contained no stage lines")

    raw_total = sum(minutes for _, _, minutes in parsed)
    factor = config.total_minutes / raw_total
    allocations = [minutes * factor for _, _, minutes in parsed]
    # Pin the last stage so allocations sum to total_minutes exactly.
    allocations[-1] = config.total_minutes - sum(allocations[:-1])
    if allocations[-1] <= 0:
        raise PlanInvalid("rescaled allocations left no time for the final stage")

    stages = tuple(
        Stage(index=i, title=title, objective=objective, allocated_minutes=allocations[i])
        for i, (title, objective, _) in enumerate(parsed)
    )
    return DiscussionPlan(stages=stages)


def reflect_stage(
    stage_utterances: Sequence[Utterance],
    stage: Stage,
    config: SessionConfig,
    backend: ChatBackend,
    prompts: PromptLibrary = DEFAULT_PROMPTS,
) -> StageSummary:
    """Compress one stage into an anonymized summary.

    The backend gets one re-prompt if its summary leaks a participant name;
    after that, names are redacted mechanically so the anonymity invariant
    holds unconditionally.
    """
    _require(len(stage_utterances) >= 1, "cannot reflect over an empty stage")
    mission = prompts.render("ReflectionPrompt", stage_title=stage.title)
    dialogue = "\n".join(f"{config.speaker_name(u.speaker)}: {u.text}" for u in stage_utterances)
    request = ChatRequest(
        messages=(
            ChatMessage(role="system", content=mission),
            ChatMessage(role="user", content=dialogue),
        )
    )
    summary_text = complete(backend, request)
    if contains_persona_name(summary_text, config.personas):
        retry = ChatRequest(
            messages=request.messages
            + (
                ChatMessage(role="assistant", content=summary_text),
                ChatMessage(
                    role="user",
                    content="Rewrite the summary without mentioning any participant by name.",
                ),
            )
        )
        summary_text = complete(backend, retry)
    return StageSummary(
        stage_index=stage.index,
        text=anonymize_summary(summary_text, config.personas),
        anonymized=True,
    )


class ModeratorEngine:
    """Drives one session's moderator through its phases.

    ``count_time`` is True for simulations, where stage time is estimated
    from word counts; live sessions disable it and progress on wall clock.
    """

    def __init__(
        self,
        config: SessionConfig,
        plan: DiscussionPlan,
        backend: ChatBackend,
        prompts: PromptLibrary = DEFAULT_PROMPTS,
        count_time: bool = True,
    ):
        self.config = config
        self.plan = plan
        self.backend = backend
        self.prompts = prompts
        self.count_time = count_time

    # -- transition function ------------------------------------------------

    def step(
        self,
        state: ModeratorState,
        event: ModeratorEvent,
        transcript: Transcript,
        stats: SpeakingStats | None = None,
    ) -> tuple[ModeratorState, ModeratorAction]:
        if state.phase == "done":
            raise IllegalEvent("the session is already finished")

        if event.kind == "participant_uttered":
            return self._accept(state, event)

        if state.phase in ("planning", "stage_intro"):
            return self._open_stage(state, transcript)
        if state.phase == "awaiting":
            stage = self.plan.stages[state.current_stage]
            if state.time_accumulated_minutes >= stage.allocated_minutes:
                return self._reflect(state, transcript)
            _require(stats is not None, "idle steps in a stage need speaking stats")
            assert stats is not None
            inactive = inactive_participants(stats)
            if inactive:
                return self._prompt_inactive(state, transcript, stats, inactive)
            return self._ask_insight(state, transcript)
        if state.phase == "reflecting":
            return self._leave_stage(state)
        if state.phase == "closing":
            return replace(state, phase="done"), ModeratorAction(kind="finish")
        raise IllegalEvent(f"no transition from phase {state.phase}")  # pragma: no cover

    def force_reflection(
        self, state: ModeratorState, transcript: Transcript
    ) -> tuple[ModeratorState, ModeratorAction]:
        """Close the current stage early (move-on policy, escalations)."""
        if state.phase != "awaiting":
            raise IllegalEvent(f"cannot force a reflection from phase {state.phase}")
        return self._reflect(state, transcript)

    # -- branch implementations ----------------------------------------------

    def _accept(
        self, state: ModeratorState, event: ModeratorEvent
    ) -> tuple[ModeratorState, ModeratorAction]:
        if state.phase not in ("awaiting", "closing"):
            raise IllegalEvent(f"participant_uttered is not valid in phase {state.phase}")
        utterance = event.utterance
        _require(utterance is not None, "participant_uttered events must carry the utterance")
        assert utterance is not None
        new_state = state
        if state.phase == "awaiting" and self.count_time:
            new_state = replace(
                state,
                time_accumulated_minutes=state.time_accumulated_minutes
                + estimate_minutes(utterance.text, self.config.words_per_minute),
            )
        if utterance.speaker == new_state.pending_inactive:
            new_state = replace(new_state, pending_inactive=None)
        return new_state, ModeratorAction(kind="accept_response")

    def _open_stage(
        self, state: ModeratorState, transcript: Transcript
    ) -> tuple[ModeratorState, ModeratorAction]:
        stage = self.plan.stages[state.current_stage]
        mission = self.prompts.render(
            "NewStagePrompt",
            stage_title=stage.title,
            stage_objective=stage.objective,
            allocated_minutes=round(stage.allocated_minutes, 2),
            word_limit=self.config.moderator_word_limit,
        )
        text = self._moderated_completion(transcript, mission)
        new_state = replace(
            state,
            phase="awaiting",
            time_accumulated_minutes=self._count(text),
            asked_questions=(normalize_question(text),),
            pending_inactive=None,
        )
        return new_state, ModeratorAction(kind="emit_stage_intro", text=text)

    def _prompt_inactive(
        self,
        state: ModeratorState,
        transcript: Transcript,
        stats: SpeakingStats,
        inactive: frozenset[str],
    ) -> tuple[ModeratorState, ModeratorAction]:
        target = self._pick_inactive(stats, inactive)
        mission = self.prompts.render(
            "InactivateParticipantPrompt",
            participant_name=target.name,
            word_limit=self.config.moderator_word_limit,
        )
        text = self._fresh_question(state, transcript, mission)
        if text is None:
            return self._reflect(state, transcript)
        new_state = replace(
            state,
            time_accumulated_minutes=state.time_accumulated_minutes + self._count(text),
            asked_questions=state.asked_questions + (normalize_question(text),),
            pending_inactive=target.id,
        )
        return new_state, ModeratorAction(kind="prompt_inactive", text=text, target=target.id)

    def _ask_insight(
        self, state: ModeratorState, transcript: Transcript
    ) -> tuple[ModeratorState, ModeratorAction]:
        mission = self.prompts.render(
            "InsightsPrompt", word_limit=self.config.moderator_word_limit
        )
        text = self._fresh_question(state, transcript, mission)
        if text is None:
            return self._reflect(state, transcript)
        new_state = replace(
            state,
            time_accumulated_minutes=state.time_accumulated_minutes + self._count(text),
            asked_questions=state.asked_questions + (normalize_question(text),),
        )
        return new_state, ModeratorAction(kind="emit_insight_question", text=text)

    def _reflect(
        self, state: ModeratorState, transcript: Transcript
    ) -> tuple[ModeratorState, ModeratorAction]:
        stage = self.plan.stages[state.current_stage]
        summary = reflect_stage(
            transcript.stage_utterances(stage.index), stage, self.config, self.backend, self.prompts
        )
        new_state = replace(state, phase="reflecting", pending_inactive=None)
        return new_state, ModeratorAction(kind="emit_reflection", text=summary.text)

    def _leave_stage(self, state: ModeratorState) -> tuple[ModeratorState, ModeratorAction]:
        if state.current_stage + 1 >= len(self.plan.stages):
            return (
                replace(state, phase="closing"),
                ModeratorAction(kind="emit_closing_question", text=CLOSING_QUESTION),
            )
        new_state = replace(
            state,
            phase="stage_intro",
            current_stage=state.current_stage + 1,
            time_accumulated_minutes=0.0,
            asked_questions=(),
            pending_inactive=None,
        )
        return new_state, ModeratorAction(kind="advance_stage")

    # -- helpers ---------------------------------------------------------------

    def _pick_inactive(self, stats: SpeakingStats, inactive: frozenset[str]) -> Persona:
        # Lowest speaking count wins; ties break by persona order in the config.
        candidates = [p for p in self.config.personas if p.id in inactive]
        _require(bool(candidates), "inactive set references unknown personas")
        return min(candidates, key=lambda p: stats.counts.get(p.id, 0))

    def _moderated_completion(self, transcript: Transcript, mission: str) -> str:
        view = recent_context(transcript, self.config.context_window)
        messages = build_agent_messages(view, None, mission, self.config)
        return enforce_word_limit(
            self.backend,
            ChatRequest(messages=messages, max_words_hint=self.config.moderator_word_limit),
            self.config.moderator_word_limit,
        )

    def _fresh_question(
        self, state: ModeratorState, transcript: Transcript, mission: str
    ) -> str | None:
        """One candidate, one re-ask on repeat, None when the backend insists."""
        candidate = self._moderated_completion(transcript, mission)
        if not is_repeat_question(candidate, state.asked_questions):
            return candidate
        retry_mission = mission + "\nYou already asked that; ask a different question."
        candidate = self._moderated_completion(transcript, retry_mission)
        if not is_repeat_question(candidate, state.asked_questions):
            return candidate
        return None

    def _count(self, text: str) -> float:
        if not self.count_time:
            return 0.0
        return estimate_minutes(text, self.config.words_per_minute)
