from __future__ import annotations

import pytest

from focusagent.gateway import ScriptedBackend
from focusagent.model import (
    DiscussionPlan,
    MODERATOR_ID,
    Persona,
    SessionConfig,
    Stage,
    Utterance,
    append_utterance,
    estimate_minutes,
    new_transcript,
)

PERSONA_POOL = (
    Persona(id="ana", name="Ana", age=29, occupation="teacher", nationality="Spain", personality="outgoing"),
    Persona(id="ben", name="Ben", age=41, occupation="nurse", nationality="Ireland", personality="thoughtful"),
    Persona(id="chloe", name="Chloe", age=23, occupation="student", nationality="France", personality="curious"),
    Persona(id="dmitri", name="Dmitri", age=35, occupation="engineer", nationality="Georgia", personality="dry"),
)


def make_config(n_personas: int = 3, **overrides) -> SessionConfig:
    defaults = dict(
        topic="digital well-being",
        goals=("habits around screen time", "perceived effects on mental health"),
        total_minutes=15.0,
        personas=PERSONA_POOL[:n_personas],
        stage_count_hint=3,
    )
    defaults.update(overrides)
    return SessionConfig(**defaults)


def make_plan(allocations=(5.0, 5.0, 5.0)) -> DiscussionPlan:
    return DiscussionPlan(
        stages=tuple(
            Stage(index=i, title=f"Part {i + 1}", objective=f"objective {i + 1}", allocated_minutes=m)
            for i, m in enumerate(allocations)
        )
    )


def with_intro(config: SessionConfig, plan: DiscussionPlan, text: str = "Welcome, what do you all think?"):
    transcript = new_transcript(config, plan)
    intro = Utterance(
        speaker=MODERATOR_ID,
        kind="stage_intro",
        text=text,
        stage_index=0,
        estimated_minutes=estimate_minutes(text, config.words_per_minute),
        sequence=0,
    )
    return append_utterance(transcript, intro)


@pytest.fixture
def config() -> SessionConfig:
    return make_config()


@pytest.fixture
def plan() -> DiscussionPlan:
    return make_plan()


def scripted(*replies: str) -> ScriptedBackend:
    return ScriptedBackend(list(replies))
