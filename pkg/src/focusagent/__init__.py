"""AI-moderated focus groups: simulation, live sessions, and transcription evaluation."""

from .model import (
    DiscussionPlan,
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
)
from .simulation import SimulationOutcome, run_simulation

__all__ = [
    "DiscussionPlan",
    "Persona",
    "SessionConfig",
    "SpeakingStats",
    "Stage",
    "StageSummary",
    "Transcript",
    "Utterance",
    "estimate_minutes",
    "inactive_participants",
    "recent_context",
    "run_simulation",
    "SimulationOutcome",
]
