"""Pydantic request/response models for the HTTP service.

These mirror the core dataclasses at the wire boundary; ``to_*`` converters
produce the immutable domain values the engines consume.
"""

from __future__ import annotations

import re

from pydantic import BaseModel, Field

from ..gateway import BackendConfig
from ..model import Persona, SessionConfig
from ..speech import Voiceprint


def _slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-") or "persona"


class PersonaModel(BaseModel):
    id: str | None = None
    name: str
    age: int
    occupation: str = ""
    nationality: str = ""
    personality: str = ""

    def to_persona(self) -> Persona:
        return Persona(
            id=self.id or _slug(self.name),
            name=self.name,
            age=self.age,
            occupation=self.occupation,
            nationality=self.nationality,
            personality=self.personality,
        )


class SessionConfigModel(BaseModel):
    topic: str
    goals: list[str]
    total_minutes: float
    personas: list[PersonaModel]
    engagement_threshold: float = 5.0
    words_per_minute: float = 100.0
    moderator_word_limit: int = 60
    stage_count_hint: int | None = None
    context_window: int = 12
    silence_seconds: float = 5.0

    def to_config(self) -> SessionConfig:
        return SessionConfig(
            topic=self.topic,
            goals=tuple(self.goals),
            total_minutes=self.total_minutes,
            personas=tuple(p.to_persona() for p in self.personas),
            engagement_threshold=self.engagement_threshold,
            words_per_minute=self.words_per_minute,
            moderator_word_limit=self.moderator_word_limit,
            stage_count_hint=self.stage_count_hint,
            context_window=self.context_window,
            silence_seconds=self.silence_seconds,
        )


class BackendModel(BaseModel):
    kind: str = "scripted"
    endpoint: str | None = None
    model_name: str | None = None
    request_timeout_seconds: float = 60.0
    max_retries: int = 2
    script: list[str] | None = None

    def to_backend_config(self) -> BackendConfig:
        return BackendConfig(
            kind=self.kind,  # type: ignore[arg-type]
            endpoint=self.endpoint,
            model_name=self.model_name,
            request_timeout_seconds=self.request_timeout_seconds,
            max_retries=self.max_retries,
            script=tuple(self.script) if self.script is not None else None,
        )


class StageModel(BaseModel):
    index: int
    title: str
    objective: str
    allocated_minutes: float


class PlanRequest(BaseModel):
    config: SessionConfigModel
    backend: BackendModel


class PlanResponse(BaseModel):
    stages: list[StageModel]


class SimulateRequest(BaseModel):
    config: SessionConfigModel
    backend: BackendModel
    seed: int = 0


class SimulateResponse(BaseModel):
    transcript_jsonl: str
    stage_timings: list[float]
    backend_call_count: int


class WerRequest(BaseModel):
    reference: str
    hypothesis: str


class WerResponse(BaseModel):
    substitutions: int
    deletions: int
    insertions: int
    reference_length: int
    rate: float


class VoiceprintModel(BaseModel):
    persona: str
    embedding: list[float]

    def to_voiceprint(self) -> Voiceprint:
        return Voiceprint(persona=self.persona, embedding=tuple(self.embedding))


class DiarizeRequest(BaseModel):
    voiceprints: list[VoiceprintModel]
    embeddings: list[list[float]]
    tau: float = Field(default=0.25, ge=-1.0, le=1.0)
    truth: list[str] | None = None


class DiarizeRecordModel(BaseModel):
    segment: int
    predicted: str | None
    truth: str | None
    similarity: float


class DiarizeResponse(BaseModel):
    records: list[DiarizeRecordModel]
    micro_f1: float | None


class ExportRequest(BaseModel):
    transcript_jsonl: str


class ExportResponse(BaseModel):
    text: str
