from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from focusagent.live import (
    DecodeError,
    HeaderMissing,
    load_transcript,
    persist_transcript,
    render_minutes,
    transcript_from_jsonl,
    transcript_to_jsonl,
)
from focusagent.model import (
    DiscussionPlan,
    MODERATOR_ID,
    Stage,
    StageSummary,
    Transcript,
    Utterance,
)

from conftest import make_config, make_plan, with_intro

SPEAKERS = ["ana", "ben", "chloe", MODERATOR_ID]
TEXT = st.text(min_size=0, max_size=40)


@st.composite
def transcripts(draw) -> Transcript:
    n_stages = draw(st.integers(1, 4))
    plan = DiscussionPlan(
        stages=tuple(
            Stage(
                index=i,
                title=draw(st.text(min_size=1, max_size=12)),
                objective=draw(TEXT),
                allocated_minutes=draw(st.floats(0.5, 30, allow_nan=False)),
            )
            for i in range(n_stages)
        )
    )
    completed = draw(st.integers(0, n_stages))
    utterances: list[Utterance] = []
    summaries: list[StageSummary] = []
    seq = 0
    for stage in range(completed):
        for _ in range(draw(st.integers(0, 3))):
            utterances.append(
                Utterance(
                    speaker=draw(st.sampled_from(SPEAKERS)),
                    kind=draw(st.sampled_from(["participant_response", "human_response", "insight_question"])),
                    text=draw(TEXT),
                    stage_index=stage,
                    estimated_minutes=draw(st.floats(0, 5, allow_nan=False)),
                    sequence=seq,
                    wall_clock=draw(st.none() | st.floats(0, 1e9, allow_nan=False)),
                )
            )
            seq += 1
        utterances.append(
            Utterance(MODERATOR_ID, "reflection_summary", draw(TEXT), stage, 0.0, seq)
        )
        seq += 1
        summaries.append(StageSummary(stage_index=stage, text=draw(TEXT), anonymized=draw(st.booleans())))
    if completed < n_stages:
        for _ in range(draw(st.integers(0, 3))):
            utterances.append(
                Utterance("ana", "participant_response", draw(TEXT), completed, 0.01, seq)
            )
            seq += 1
    return Transcript(
        config_digest="d" * 64,
        plan=plan,
        utterances=tuple(utterances),
        summaries=tuple(summaries),
    )


class TestRoundTrip:
    def test_small_round_trip(self, tmp_path, config, plan):
        transcript = with_intro(config, plan)
        target = tmp_path / "run.fgt.jsonl"
        persist_transcript(transcript, target)
        assert load_transcript(target) == transcript

    @settings(max_examples=60)
    @given(transcripts())
    def test_string_round_trip(self, transcript):
        assert transcript_from_jsonl(transcript_to_jsonl(transcript)) == transcript

    def test_truncated_final_line_reports_line_number(self, tmp_path, config, plan):
        target = tmp_path / "run.fgt.jsonl"
        persist_transcript(with_intro(config, plan), target)
        content = target.read_text(encoding="utf-8").rstrip("\n")
        target.write_text(content[:-8], encoding="utf-8")
        with pytest.raises(DecodeError) as err:
            load_transcript(target)
        assert err.value.line == 2
        assert "line 2" in str(err.value)

    def test_missing_header(self, tmp_path):
        target = tmp_path / "bad.fgt.jsonl"
        target.write_text('{"record": "utterance"}\n', encoding="utf-8")
        with pytest.raises(HeaderMissing):
            load_transcript(target)

    def test_empty_file(self, tmp_path):
        target = tmp_path / "empty.fgt.jsonl"
        target.write_text("", encoding="utf-8")
        with pytest.raises(HeaderMissing):
            load_transcript(target)

    def test_unknown_record_type(self, tmp_path, config, plan):
        target = tmp_path / "run.fgt.jsonl"
        persist_transcript(with_intro(config, plan), target)
        with target.open("a", encoding="utf-8") as handle:
            handle.write('{"record": "banana"}\n')
        with pytest.raises(DecodeError) as err:
            load_transcript(target)
        assert err.value.line == 3


class TestMinutes:
    def test_render_contains_stages_and_speakers(self, config, plan):
        transcript = with_intro(config, plan)
        text = render_minutes(transcript, config)
        assert "Stage 1: Part 1" in text
        assert "Moderator: Welcome, what do you all think?" in text


class TestRecentContextProperty:
    @settings(max_examples=60)
    @given(transcripts())
    def test_tail_never_contains_completed_stage_utterances(self, transcript):
        from focusagent.model import recent_context

        summaries, tail = recent_context(transcript, 12)
        assert summaries == transcript.summaries
        completed = {s.stage_index for s in transcript.summaries}
        assert all(u.stage_index not in completed for u in tail)
        assert len(tail) <= 12
