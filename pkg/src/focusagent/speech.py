"""Evaluation toolkit for the multi-speaker transcription pipeline.

Covers the desk-scale algorithms: text normalization, word error rate from a
minimum-edit alignment, voiceprint retrieval by cosine similarity, micro-F1,
and energy-threshold voice activity detection. Heavy models (ASR inference,
embedding networks) stay outside: embeddings and transcripts are ingested
from files so any external model can feed this module.
"""

from __future__ import annotations

import json
import re
import wave
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import FocusAgentError, _require

DEFAULT_TAU = 0.25
DEFAULT_EMBEDDING_DIM = 192  # typical speaker-embedding width; files may use any
DEFAULT_FRAME_SECONDS = 0.030
DEFAULT_MIN_SILENCE_SECONDS = 0.3
DEFAULT_MAX_SEGMENT_SECONDS = 30.0
DEFAULT_HANGOVER_SECONDS = 0.1
DEFAULT_ENERGY_RATIO = 3.0


class EmptyReference(FocusAgentError):
    pass


class DimensionMismatch(FocusAgentError):
    pass


class ZeroVector(FocusAgentError):
    pass


class LengthMismatch(FocusAgentError):
    pass


class UnsupportedRate(FocusAgentError):
    pass


@dataclass(frozen=True)
class WERResult:
    substitutions: int
    deletions: int
    insertions: int
    reference_length: int
    rate: float

    def __post_init__(self) -> None:
        _require(self.reference_length >= 1, "reference_length must be at least 1")
        _require(
            min(self.substitutions, self.deletions, self.insertions) >= 0,
            "error counts must be non-negative",
        )


@dataclass(frozen=True)
class Voiceprint:
    persona: str
    embedding: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "embedding", tuple(float(x) for x in self.embedding))
        if not any(self.embedding):
            raise ZeroVector(f"voiceprint for {self.persona} is all-zero")


@dataclass(frozen=True)
class AudioSegment:
    start_seconds: float
    end_seconds: float
    source: str | None = None

    def __post_init__(self) -> None:
        _require(0 <= self.start_seconds < self.end_seconds, "segment must have start < end")


def normalize_tokens(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace, drop empties."""
    stripped = re.sub(r"[^\w\s]+", "", text.lower())
    return stripped.split()


def wer(reference: Sequence[str], hypothesis: Sequence[str]) -> WERResult:
    """Word error rate from a minimum-edit alignment with unit costs.

    Among cost-equal alignments the backtrace prefers match, then
    substitution, then deletion, then insertion, so the S/D/I decomposition
    is deterministic. The rate is (S+D+I)/N with N the reference length and
    can exceed 1.0 for insertion-heavy hypotheses.
    """
    n, m = len(reference), len(hypothesis)
    if n == 0:
        raise EmptyReference("the reference must contain at least one token")

    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dp[i][0] = i
    for j in range(1, m + 1):
        dp[0][j] = j
    for i in range(1, n + 1):
        row, prev = dp[i], dp[i - 1]
        ref_token = reference[i - 1]
        for j in range(1, m + 1):
            cost = 0 if ref_token == hypothesis[j - 1] else 1
            row[j] = min(prev[j - 1] + cost, prev[j] + 1, row[j - 1] + 1)

    subs = dels = ins = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and reference[i - 1] == hypothesis[j - 1] and dp[i][j] == dp[i - 1][j - 1]:
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and dp[i][j] == dp[i - 1][j - 1] + 1:
            subs += 1
            i, j = i - 1, j - 1
        elif i > 0 and dp[i][j] == dp[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1

    return WERResult(
        substitutions=subs,
        deletions=dels,
        insertions=ins,
        reference_length=n,
        rate=(subs + dels + ins) / n,
    )


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("cosine similarity is undefined for all-zero vectors")
    return float(np.dot(a, b) / (norm_a * norm_b))


def rank_speaker(
    query: Sequence[float], voiceprints: Sequence[Voiceprint]
) -> tuple[str, float]:
    """Most similar enrolled speaker by cosine, regardless of any threshold.

    Ties break by voiceprint order. Cosine makes the ranking invariant under
    positive scaling of the query or of any voiceprint.
    """
    _require(len(voiceprints) >= 1, "at least one voiceprint is required")
    q = np.asarray(query, dtype=np.float64)
    dimension = len(voiceprints[0].embedding)
    if q.shape != (dimension,):
        raise DimensionMismatch(f"query has dimension {q.shape}, voiceprints have {dimension}")

    best_persona = voiceprints[0].persona
    best_similarity = -2.0
    for print_ in voiceprints:
        if len(print_.embedding) != dimension:
            raise DimensionMismatch("voiceprints disagree on embedding dimension")
        similarity = cosine_similarity(q, np.asarray(print_.embedding, dtype=np.float64))
        if similarity > best_similarity:
            best_persona, best_similarity = print_.persona, similarity
    return best_persona, best_similarity


def match_speaker(
    query: Sequence[float], voiceprints: Sequence[Voiceprint], tau: float = DEFAULT_TAU
) -> str | None:
    """Nearest enrolled speaker, or None (unknown) when no similarity reaches ``tau``."""
    _require(-1.0 <= tau <= 1.0, "tau must lie in [-1, 1]")
    persona, similarity = rank_speaker(query, voiceprints)
    return persona if similarity >= tau else None


def micro_f1(predicted: Sequence[str], truth: Sequence[str]) -> float:
    """Micro-averaged F1 over per-class TP/FP/FN counts.

    With exactly one predicted label per segment this equals accuracy.
    """
    if len(predicted) != len(truth):
        raise LengthMismatch(f"{len(predicted)} predictions vs {len(truth)} truth labels")
    _require(len(predicted) >= 1, "micro_f1 needs at least one pair")

    labels = set(predicted) | set(truth)
    tp = fp = fn = 0
    for label in labels:
        for p, t in zip(predicted, truth):
            if p == label and t == label:
                tp += 1
            elif p == label and t != label:
                fp += 1
            elif p != label and t == label:
                fn += 1
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def energy_vad(
    samples: Sequence[float] | np.ndarray,
    sample_rate: int,
    frame_seconds: float = DEFAULT_FRAME_SECONDS,
    energy_ratio: float = DEFAULT_ENERGY_RATIO,
    min_silence_seconds: float = DEFAULT_MIN_SILENCE_SECONDS,
    max_segment_seconds: float = DEFAULT_MAX_SEGMENT_SECONDS,
    hangover_seconds: float = DEFAULT_HANGOVER_SECONDS,
    source: str | None = None,
) -> list[AudioSegment]:
    """Energy-threshold voice activity detection over 30 ms frames.

    A frame is voiced when its RMS exceeds the noise floor (10th-percentile
    frame RMS) times ``energy_ratio``. Voiced runs separated by less than
    ``min_silence_seconds`` merge; overlong segments split at their quietest
    interior frame; each segment gets a hangover pad clamped to its
    neighbors, the signal bounds, and the segment length cap.
    """
    if sample_rate < 8000:
        raise UnsupportedRate(f"sample rate {sample_rate} below 8 kHz is not supported")
    signal = np.asarray(samples, dtype=np.float64)
    if signal.size == 0:
        return []

    frame_len = max(1, int(round(frame_seconds * sample_rate)))
    n_frames = int(np.ceil(signal.size / frame_len))
    padded = np.zeros(n_frames * frame_len)
    padded[: signal.size] = signal
    frames = padded.reshape(n_frames, frame_len)
    rms = np.sqrt(np.mean(frames**2, axis=1))

    noise_floor = float(np.percentile(rms, 10))
    threshold = noise_floor * energy_ratio
    voiced = rms > threshold
    if not voiced.any():
        return []

    # Voiced frame runs -> (start_frame, end_frame) half-open intervals.
    runs: list[list[int]] = []
    start = None
    for idx, flag in enumerate(voiced):
        if flag and start is None:
            start = idx
        elif not flag and start is not None:
            runs.append([start, idx])
            start = None
    if start is not None:
        runs.append([start, n_frames])

    # Merge runs whose silent gap is shorter than min_silence_seconds.
    gap_frames = min_silence_seconds * sample_rate / frame_len
    merged = [runs[0]]
    for run in runs[1:]:
        if run[0] - merged[-1][1] < gap_frames:
            merged[-1][1] = run[1]
        else:
            merged.append(run)

    # Split overlong runs at their quietest interior frame.
    max_frames = max(1, int(max_segment_seconds * sample_rate / frame_len))
    final: list[tuple[int, int]] = []
    pending = [(s, e) for s, e in merged]
    while pending:
        s, e = pending.pop(0)
        if e - s <= max_frames:
            final.append((s, e))
            continue
        interior = rms[s + 1 : e - 1]
        cut = s + 1 + int(np.argmin(interior)) if interior.size else s + max_frames
        pending.insert(0, (cut, e))
        pending.insert(0, (s, cut))
    final.sort()

    duration = signal.size / sample_rate
    segments: list[AudioSegment] = []
    prev_end = 0.0
    for k, (s, e) in enumerate(final):
        start_t = s * frame_len / sample_rate - hangover_seconds
        end_t = e * frame_len / sample_rate + hangover_seconds
        start_t = max(start_t, prev_end, 0.0)
        next_start = final[k + 1][0] * frame_len / sample_rate if k + 1 < len(final) else duration
        end_t = min(end_t, next_start, duration)
        if end_t - start_t > max_segment_seconds:
            end_t = start_t + max_segment_seconds
        segments.append(AudioSegment(start_seconds=start_t, end_seconds=end_t, source=source))
        prev_end = end_t
    return segments


# -- file interfaces --------------------------------------------------------------


def read_wav_mono16(path: str | Path) -> tuple[np.ndarray, int]:
    """Read a 16-bit mono WAV into float samples in [-1, 1] plus its rate."""
    with wave.open(str(path), "rb") as handle:
        if handle.getnchannels() != 1 or handle.getsampwidth() != 2:
            raise UnsupportedRate(f"{path} must be 16-bit mono WAV")
        rate = handle.getframerate()
        raw = handle.readframes(handle.getnframes())
    samples = np.frombuffer(raw, dtype=np.int16).astype(np.float64) / 32768.0
    return samples, rate


def load_embeddings_file(path: str | Path) -> list[tuple[float, ...]]:
    """One embedding per line: decimal numbers separated by spaces."""
    embeddings = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        embeddings.append(tuple(float(x) for x in line.split()))
    return embeddings


def load_voiceprints_file(path: str | Path) -> list[Voiceprint]:
    """One enrolled speaker per line: persona_id<TAB>space-separated vector."""
    prints = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        persona, _, vector = line.partition("\t")
        prints.append(Voiceprint(persona=persona, embedding=tuple(float(x) for x in vector.split())))
    return prints


def load_labels_file(path: str | Path) -> list[str]:
    return [line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]


@dataclass(frozen=True)
class DiarizationRecord:
    segment: int
    predicted: str | None
    truth: str | None
    similarity: float


def diarize_embeddings(
    embeddings: Sequence[Sequence[float]],
    voiceprints: Sequence[Voiceprint],
    tau: float = DEFAULT_TAU,
    truth: Sequence[str] | None = None,
) -> tuple[list[DiarizationRecord], float | None]:
    """Label every segment embedding against the enrolled voiceprints.

    Returns per-segment records and, when truth labels are given, the
    micro-F1 of the predictions (unknowns count as the literal label
    "unknown").
    """
    if truth is not None and len(truth) != len(embeddings):
        raise LengthMismatch(f"{len(embeddings)} embeddings vs {len(truth)} truth labels")
    _require(-1.0 <= tau <= 1.0, "tau must lie in [-1, 1]")
    records = []
    for k, embedding in enumerate(embeddings):
        persona, similarity = rank_speaker(embedding, voiceprints)
        predicted = persona if similarity >= tau else None
        records.append(
            DiarizationRecord(
                segment=k,
                predicted=predicted,
                truth=truth[k] if truth is not None else None,
                similarity=similarity,
            )
        )
    score = None
    if truth is not None and records:
        predicted_labels = [r.predicted if r.predicted is not None else "unknown" for r in records]
        score = micro_f1(predicted_labels, list(truth))
    return records, score


def write_diarization_report(
    path: str | Path,
    records: Sequence[DiarizationRecord],
    summary: dict | None = None,
) -> None:
    """Line-delimited report: one record per segment plus one summary record."""
    lines = [
        json.dumps(
            {
                "record": "segment",
                "segment": r.segment,
                "predicted": r.predicted,
                "truth": r.truth,
                "similarity": r.similarity,
            },
            sort_keys=True,
        )
        for r in records
    ]
    if summary is not None:
        lines.append(json.dumps({"record": "summary", **summary}, sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
