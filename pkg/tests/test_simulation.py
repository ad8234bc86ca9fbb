from __future__ import annotations

import pytest

from focusagent.gateway import BackendConfig, ScriptedBackend
from focusagent.live import transcript_to_jsonl
from focusagent.model import MODERATOR_ID, ValidationError, validate_transcript
from focusagent.moderator import normalize_question
from focusagent.scripting import build_simulation_script
from focusagent.simulation import SimulationError, SimulationEvent, run_simulation

from conftest import make_config

# Small sessions for hand-written scripts: at 2 words per minute a 4-word
# reply already fills 2 minutes.
TINY = dict(total_minutes=5.0, words_per_minute=2.0, stage_count_hint=1, n_personas=2)

FLOW_SCRIPT = [
    "Main | talk it through | 5",
    "Welcome here",                      # intro, 2 words -> 1.0 min
    "7", "3",
    "I use app timers daily",            # ana, 5 words -> 2.5 (3.5 total)
    "2", "8",
    "Me too honestly",                   # ben, 3 words -> 1.5 (5.0 total)
    "Good points all around.",           # reflection
    "Nothing else thanks",               # ana's closing reply
    "PASS",                              # ben sits out
]


def run_tiny(script, **overrides):
    config = make_config(**{**TINY, **overrides})
    return config, run_simulation(config, BackendConfig(kind="scripted", script=tuple(script)), seed=1)


class TestFullRun:
    def test_structure_and_counts(self):
        config, outcome = run_tiny(FLOW_SCRIPT)
        kinds = [u.kind for u in outcome.transcript.utterances]
        assert kinds == [
            "stage_intro",
            "participant_response",
            "participant_response",
            "reflection_summary",
            "closing_question",
            "participant_response",
        ]
        assert outcome.stage_timings == (5.0,)
        assert outcome.backend_call_count == len(FLOW_SCRIPT)
        assert len(outcome.transcript.summaries) == 1
        validate_transcript(outcome.transcript)

    def test_pass_sentinel_skips_closing_reply(self):
        _, outcome = run_tiny(FLOW_SCRIPT)
        closing_speakers = [
            u.speaker
            for u in outcome.transcript.utterances
            if u.sequence > 4 and u.kind == "participant_response"
        ]
        assert closing_speakers == ["ana"]

    def test_single_persona_rejected(self):
        config = make_config(n_personas=1)
        with pytest.raises(ValidationError):
            run_simulation(config, BackendConfig(kind="scripted", script=("x",)))

    def test_two_stage_plan_shape(self):
        config = make_config(
            total_minutes=6.0, words_per_minute=2.0, stage_count_hint=2, n_personas=2
        )
        script = build_simulation_script(config, response_words=4, intro_words=2)
        outcome = run_simulation(config, ScriptedBackend(script))
        kinds = [u.kind for u in outcome.transcript.utterances]
        assert kinds.count("reflection_summary") == 2
        assert kinds.count("closing_question") == 1
        assert kinds.index("closing_question") > kinds.index("reflection_summary")

    def test_determinism_byte_identical(self):
        config = make_config()
        script = tuple(build_simulation_script(config))
        serialized = [
            transcript_to_jsonl(
                run_simulation(config, BackendConfig(kind="scripted", script=script), seed=42).transcript
            )
            for _ in range(2)
        ]
        assert serialized[0] == serialized[1]

    def test_stage_ordering_invariants(self):
        config = make_config()
        script = build_simulation_script(config)
        outcome = run_simulation(config, ScriptedBackend(script))
        transcript = outcome.transcript
        for stage in transcript.plan.stages:
            stage_utts = transcript.stage_utterances(stage.index)
            assert stage_utts[0].kind == "stage_intro"
            reflections = [k for k, u in enumerate(stage_utts) if u.kind == "reflection_summary"]
            assert len(reflections) == 1
            # Only the final stage carries the closing epilogue after its reflection.
            after = stage_utts[reflections[0] + 1 :]
            if stage.index < len(transcript.plan.stages) - 1:
                assert after == ()
            else:
                assert after[0].kind == "closing_question"

    def test_timing_bounds(self):
        config = make_config(total_minutes=30.0, stage_count_hint=3)
        script = build_simulation_script(config)
        outcome = run_simulation(config, ScriptedBackend(script))
        transcript = outcome.transcript
        for stage in transcript.plan.stages:
            timing = outcome.stage_timings[stage.index]
            assert timing >= stage.allocated_minutes
            stage_utts = transcript.stage_utterances(stage.index)
            reflection_at = [k for k, u in enumerate(stage_utts) if u.kind == "reflection_summary"][0]
            last_counted = stage_utts[reflection_at - 1]
            assert timing - stage.allocated_minutes <= last_counted.estimated_minutes + 1e-12

    def test_subscriber_sees_every_event(self):
        config = make_config(**TINY)
        events: list[SimulationEvent] = []
        run_simulation(config, ScriptedBackend(FLOW_SCRIPT), subscriber=events.append)
        assert events[0].kind == "stage_started"
        assert events[-1].kind == "session_finished"
        added = [e for e in events if e.kind == "utterance_added"]
        assert len(added) == 6

    def test_errors_carry_stage_and_sequence(self):
        config = make_config(**TINY)
        with pytest.raises(SimulationError) as err:
            run_simulation(config, ScriptedBackend(FLOW_SCRIPT[:4]))
        assert err.value.stage == 0
        assert err.value.sequence >= 1
        assert "stage 0" in str(err.value)


class TestIdleEscalation:
    # Two turns in a row with nobody willing to speak: the moderator asks
    # once after the first, then moves the stage on after the second.
    SCRIPT = [
        "Main | talk | 5",
        "Welcome here",                # 1.0 min
        "2", "2",                      # nobody speaks -> idle 1
        "Ana what do you think",       # inactive prompt (everyone at zero)
        "2", "2",                      # nobody again -> idle 2 -> forced reflection
        "Quiet group overall.",        # reflection
        "PASS", "PASS",
    ]

    def test_forced_progress_after_two_silent_turns(self):
        config, outcome = run_tiny(self.SCRIPT)
        kinds = [u.kind for u in outcome.transcript.utterances]
        assert kinds == [
            "stage_intro",
            "inactive_prompt",
            "reflection_summary",
            "closing_question",
        ]
        assert outcome.backend_call_count == len(self.SCRIPT)
        # The stage was cut short: accumulated time below allocation is
        # expected when the room goes quiet twice in a row.
        assert outcome.stage_timings[0] < 5.0

    def test_inactive_prompt_targets_first_persona_on_all_zero(self):
        _, outcome = run_tiny(self.SCRIPT)
        prompt = [u for u in outcome.transcript.utterances if u.kind == "inactive_prompt"]
        assert prompt[0].text == "Ana what do you think"


class TestRepeatGuardEndToEnd:
    SCRIPT = [
        "Main | talk | 5",
        "Welcome here",                # intro, 1.0
        "7", "3",
        "Timers help",                 # ana, 1.0 (2.0)
        "2", "2",                      # idle -> ben inactive (zero count)
        "Ben your view?",              # inactive prompt, 1.5 (3.5)
        "2", "8",
        "Less screens",                # ben, 1.0 (4.5)
        "2", "2",                      # idle -> nobody inactive -> insight
        "Welcome here",                # repeat of the intro question
        "Welcome here",                # re-ask comes back identical
        "A short exchange happened.",  # forced reflection
        "PASS", "PASS",
    ]

    def test_no_duplicate_normalized_question_and_session_completes(self):
        config, outcome = run_tiny(self.SCRIPT)
        questions = [
            normalize_question(u.text)
            for u in outcome.transcript.utterances
            if u.speaker == MODERATOR_ID
            and u.kind in ("stage_intro", "insight_question", "inactive_prompt")
        ]
        assert len(questions) == len(set(questions))
        kinds = [u.kind for u in outcome.transcript.utterances]
        assert "insight_question" not in kinds  # the repeat was swallowed
        assert kinds[-1] == "closing_question"
        assert outcome.backend_call_count == len(self.SCRIPT)
