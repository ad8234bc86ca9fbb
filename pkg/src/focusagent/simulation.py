"""Full focus-group simulation: moderator and AI participants in one loop.

Given a scripted backend the run is a pure function of the fixture list, so
repeated runs serialize byte-identically. The ``seed`` parameter is recorded
for provenance and reserved for sampling backends; nothing in the scripted
or HTTP flow draws randomness of its own.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal

from .gateway import BackendConfig, ChatBackend, make_backend
from .model import (
    FocusAgentError,
    MODERATOR_ID,
    SessionConfig,
    StageSummary,
    Transcript,
    Utterance,
    UtteranceKind,
    ValidationError,
    append_summary,
    append_utterance,
    estimate_minutes,
    new_transcript,
    next_sequence,
    recent_context,
    speaking_stats,
)
from .moderator import (
    ModeratorAction,
    ModeratorEngine,
    ModeratorEvent,
    ModeratorState,
    plan_stages,
)
from .participants import participant_response, score_all_engagement, select_speaker
from .prompts import DEFAULT_PROMPTS, PromptLibrary

PASS_SENTINEL = "PASS"

_ACTION_TO_KIND: dict[str, UtteranceKind] = {
    "emit_stage_intro": "stage_intro",
    "prompt_inactive": "inactive_prompt",
    "emit_insight_question": "insight_question",
    "emit_reflection": "reflection_summary",
    "emit_closing_question": "closing_question",
}


class SimulationError(FocusAgentError):
    """Wraps an engine or backend failure with its position in the session."""

    def __init__(self, stage: int, sequence: int, cause: Exception):
        super().__init__(f"simulation failed at stage {stage}, sequence {sequence}: {cause}")
        self.stage = stage
        self.sequence = sequence


@dataclass(frozen=True)
class SimulationEvent:
    kind: Literal["stage_started", "utterance_added", "session_finished"]
    stage_index: int
    utterance: Utterance | None = None


Subscriber = Callable[[SimulationEvent], None]


@dataclass(frozen=True)
class SimulationOutcome:
    transcript: Transcript
    stage_timings: tuple[float, ...]
    backend_call_count: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "stage_timings", tuple(self.stage_timings))


def run_simulation(
    config: SessionConfig,
    backend: BackendConfig | ChatBackend,
    seed: int = 0,
    prompts: PromptLibrary = DEFAULT_PROMPTS,
    subscriber: Subscriber | None = None,
) -> SimulationOutcome:
    """Plan the session, run every stage to its allocation, close, and return
    the complete transcript plus per-stage accumulated minutes."""
    if len(config.personas) < 2:
        raise ValidationError("a simulation needs at least two personas")
    chat = make_backend(backend) if isinstance(backend, BackendConfig) else backend
    base_calls = chat.calls
    emit = subscriber if subscriber is not None else (lambda event: None)

    state = ModeratorState()
    transcript: Transcript | None = None
    try:
        plan = plan_stages(config, chat, prompts)
        engine = ModeratorEngine(config, plan, chat, prompts)
        transcript = new_transcript(config, plan)
        stage_timings = [0.0] * len(plan.stages)
        persona_order = [p.id for p in config.personas]
        idle_streak = 0

        while state.phase != "done":
            if state.phase in ("planning", "stage_intro"):
                emit(SimulationEvent(kind="stage_started", stage_index=state.current_stage))
                state, action = engine.step(
                    state, ModeratorEvent(kind="stage_time_checked"), transcript
                )
                transcript = _append_moderator(transcript, state.current_stage, action, config, emit)

            elif state.phase == "awaiting":
                stage = plan.stages[state.current_stage]
                stats = speaking_stats(transcript, config.personas, state.current_stage)
                if state.time_accumulated_minutes >= stage.allocated_minutes:
                    state, action = engine.step(
                        state, ModeratorEvent(kind="stage_time_checked"), transcript, stats
                    )
                    transcript = _finish_stage(transcript, stage.index, action, config, emit)
                    stage_timings[stage.index] = state.time_accumulated_minutes
                    idle_streak = 0
                    continue

                view = recent_context(transcript, config.context_window)
                scores = score_all_engagement(config.personas, view, config, chat, prompts)
                selection = select_speaker(
                    scores, config.engagement_threshold, stats, persona_order
                )
                if selection.chosen is not None:
                    persona = config.persona_by_id(selection.chosen)
                    text = participant_response(persona, view, config, chat, prompts)
                    utterance = Utterance(
                        speaker=persona.id,
                        kind="participant_response",
                        text=text,
                        stage_index=state.current_stage,
                        estimated_minutes=estimate_minutes(text, config.words_per_minute),
                        sequence=next_sequence(transcript),
                    )
                    transcript = append_utterance(transcript, utterance)
                    emit(
                        SimulationEvent(
                            kind="utterance_added",
                            stage_index=state.current_stage,
                            utterance=utterance,
                        )
                    )
                    state, _ = engine.step(
                        state,
                        ModeratorEvent(kind="participant_uttered", utterance=utterance),
                        transcript,
                        stats,
                    )
                    idle_streak = 0
                else:
                    idle_streak += 1
                    if idle_streak >= 2:
                        # Nobody reacted to the last question either: move on.
                        state, action = engine.force_reflection(state, transcript)
                    else:
                        state, action = engine.step(
                            state, ModeratorEvent(kind="turn_idle"), transcript, stats
                        )
                    if action.kind == "emit_reflection":
                        transcript = _finish_stage(transcript, stage.index, action, config, emit)
                        stage_timings[stage.index] = state.time_accumulated_minutes
                        idle_streak = 0
                    else:
                        transcript = _append_moderator(
                            transcript, state.current_stage, action, config, emit
                        )

            elif state.phase == "reflecting":
                state, action = engine.step(state, ModeratorEvent(kind="turn_idle"), transcript)
                if action.kind == "emit_closing_question":
                    transcript = _append_moderator(
                        transcript, state.current_stage, action, config, emit
                    )

            elif state.phase == "closing":
                view = recent_context(transcript, config.context_window)
                for persona in config.personas:
                    reply = participant_response(persona, view, config, chat, prompts)
                    if reply.strip() == PASS_SENTINEL:
                        continue
                    utterance = Utterance(
                        speaker=persona.id,
                        kind="participant_response",
                        text=reply,
                        stage_index=state.current_stage,
                        estimated_minutes=estimate_minutes(reply, config.words_per_minute),
                        sequence=next_sequence(transcript),
                    )
                    transcript = append_utterance(transcript, utterance)
                    emit(
                        SimulationEvent(
                            kind="utterance_added",
                            stage_index=state.current_stage,
                            utterance=utterance,
                        )
                    )
                    state, _ = engine.step(
                        state,
                        ModeratorEvent(kind="participant_uttered", utterance=utterance),
                        transcript,
                    )
                    view = recent_context(transcript, config.context_window)
                state, _ = engine.step(state, ModeratorEvent(kind="turn_idle"), transcript)

    except FocusAgentError as err:
        if isinstance(err, SimulationError):
            raise
        sequence = next_sequence(transcript) if transcript is not None else 0
        raise SimulationError(state.current_stage, sequence, err) from err

    emit(SimulationEvent(kind="session_finished", stage_index=len(plan.stages) - 1))
    return SimulationOutcome(
        transcript=transcript,
        stage_timings=tuple(stage_timings),
        backend_call_count=chat.calls - base_calls,
    )


def _append_moderator(
    transcript: Transcript,
    stage_index: int,
    action: ModeratorAction,
    config: SessionConfig,
    emit: Subscriber,
) -> Transcript:
    assert action.text is not None  # only emitting kinds reach this helper
    utterance = Utterance(
        speaker=MODERATOR_ID,
        kind=_ACTION_TO_KIND[action.kind],
        text=action.text,
        stage_index=stage_index,
        estimated_minutes=estimate_minutes(action.text, config.words_per_minute),
        sequence=next_sequence(transcript),
    )
    transcript = append_utterance(transcript, utterance)
    emit(SimulationEvent(kind="utterance_added", stage_index=stage_index, utterance=utterance))
    return transcript


def _finish_stage(
    transcript: Transcript,
    stage_index: int,
    action: ModeratorAction,
    config: SessionConfig,
    emit: Subscriber,
) -> Transcript:
    transcript = _append_moderator(transcript, stage_index, action, config, emit)
    return append_summary(
        transcript,
        StageSummary(stage_index=stage_index, text=action.text, anonymized=True),
    )
