"""HTTP and WebSocket surface wrapping the core package.

The batch endpoints (plan, simulate, eval, export) are stateless wrappers
around the engines; the ``/ws`` endpoint attaches clients to the per-process
live session when the server was started with one configured.
"""

from __future__ import annotations

import asyncio
import contextlib
from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from ..live import render_minutes, transcript_from_jsonl, transcript_to_jsonl
from ..model import FocusAgentError
from ..moderator import plan_stages
from ..gateway import make_backend
from ..simulation import run_simulation
from ..speech import diarize_embeddings, normalize_tokens, wer
from .schemas import (
    DiarizeRecordModel,
    DiarizeRequest,
    DiarizeResponse,
    ExportRequest,
    ExportResponse,
    PlanRequest,
    PlanResponse,
    SimulateRequest,
    SimulateResponse,
    StageModel,
    WerRequest,
    WerResponse,
)
from .session import LiveSessionDriver, LiveSettings


def create_app(live: LiveSettings | None = None) -> FastAPI:
    driver = LiveSessionDriver(live) if live is not None else None

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if driver is not None:
            await driver.start()
        yield
        if driver is not None:
            await driver.stop()

    app = FastAPI(title="focusagent", lifespan=lifespan)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "live_session": driver is not None}

    @app.post("/plan", response_model=PlanResponse)
    def plan(request: PlanRequest) -> PlanResponse:
        with _domain_errors():
            config = request.config.to_config()
            backend = make_backend(request.backend.to_backend_config())
            result = plan_stages(config, backend)
        return PlanResponse(
            stages=[
                StageModel(
                    index=s.index,
                    title=s.title,
                    objective=s.objective,
                    allocated_minutes=s.allocated_minutes,
                )
                for s in result.stages
            ]
        )

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(request: SimulateRequest) -> SimulateResponse:
        with _domain_errors():
            config = request.config.to_config()
            outcome = run_simulation(config, request.backend.to_backend_config(), request.seed)
        return SimulateResponse(
            transcript_jsonl=transcript_to_jsonl(outcome.transcript),
            stage_timings=list(outcome.stage_timings),
            backend_call_count=outcome.backend_call_count,
        )

    @app.post("/eval/wer", response_model=WerResponse)
    def eval_wer(request: WerRequest) -> WerResponse:
        with _domain_errors():
            result = wer(normalize_tokens(request.reference), normalize_tokens(request.hypothesis))
        return WerResponse(
            substitutions=result.substitutions,
            deletions=result.deletions,
            insertions=result.insertions,
            reference_length=result.reference_length,
            rate=result.rate,
        )

    @app.post("/eval/diarize", response_model=DiarizeResponse)
    def eval_diarize(request: DiarizeRequest) -> DiarizeResponse:
        with _domain_errors():
            records, score = diarize_embeddings(
                request.embeddings,
                [v.to_voiceprint() for v in request.voiceprints],
                tau=request.tau,
                truth=request.truth,
            )
        return DiarizeResponse(
            records=[
                DiarizeRecordModel(
                    segment=r.segment,
                    predicted=r.predicted,
                    truth=r.truth,
                    similarity=r.similarity,
                )
                for r in records
            ],
            micro_f1=score,
        )

    @app.post("/export", response_model=ExportResponse)
    def export(request: ExportRequest) -> ExportResponse:
        with _domain_errors():
            transcript = transcript_from_jsonl(request.transcript_jsonl)
        return ExportResponse(text=render_minutes(transcript))

    @app.websocket("/ws")
    async def ws(websocket: WebSocket) -> None:
        if driver is None:
            await websocket.close(code=1013)
            return
        await websocket.accept()
        client_id, outbox = driver.register()
        loop = asyncio.get_running_loop()

        async def pump_outbox() -> None:
            while True:
                await websocket.send_text(await outbox.get())

        sender = loop.create_task(pump_outbox())
        try:
            while True:
                raw = await websocket.receive_text()
                await driver.submit_frame(client_id, raw)
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await sender
            driver.unregister(client_id)
            await driver.submit_leave(client_id)

    return app


@contextlib.contextmanager
def _domain_errors():
    try:
        yield
    except FocusAgentError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
