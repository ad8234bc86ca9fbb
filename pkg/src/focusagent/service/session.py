"""Async glue between WebSocket connections and the pure live-session core.

All client frames and timer ticks are funneled into one queue consumed by a
single driver task, which serializes every engine mutation. Broadcasts fan
out through per-client queues, preserving send order per client. At most one
backend call is in flight at a time.
"""

from __future__ import annotations

import asyncio
import contextlib
import itertools
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

from ..gateway import BackendConfig, make_backend
from ..live import (
    FrameError,
    LiveSessionState,
    SessionClosed,
    UnknownClient,
    advance_policy,
    handle_client_event,
    needs_intervention,
    parse_client_frame,
    persist_transcript,
    pump_transitions,
    server_event_to_wire,
    start_session,
)
from ..model import FocusAgentError, SessionConfig
from ..moderator import ModeratorEngine, plan_stages
from ..prompts import DEFAULT_PROMPTS, PromptLibrary


@dataclass
class LiveSettings:
    config: SessionConfig
    backend: BackendConfig
    out_path: str | Path | None = None
    prompts: PromptLibrary | None = None
    clock: Callable[[], float] = time.time
    tick_seconds: float = 0.25


class LiveSessionDriver:
    """Owns one live session per server process."""

    def __init__(self, settings: LiveSettings):
        self.settings = settings
        self.state: LiveSessionState | None = None
        self._engine: ModeratorEngine | None = None
        self._backend = make_backend(settings.backend)
        self._queue: asyncio.Queue = asyncio.Queue()
        self._clients: dict[str, asyncio.Queue] = {}
        self._ids = itertools.count(1)
        self._tasks: list[asyncio.Task] = []
        self._closed = asyncio.Event()

    # -- connection management (called from websocket handlers) -----------------

    def register(self) -> tuple[str, asyncio.Queue]:
        client_id = f"c{next(self._ids)}"
        outbox: asyncio.Queue = asyncio.Queue()
        self._clients[client_id] = outbox
        return client_id, outbox

    def unregister(self, client_id: str) -> None:
        self._clients.pop(client_id, None)

    async def submit_frame(self, client_id: str, raw: str) -> None:
        await self._queue.put(("frame", client_id, raw))

    async def submit_leave(self, client_id: str) -> None:
        await self._queue.put(("frame", client_id, '{"kind": "leave"}'))

    # -- lifecycle ----------------------------------------------------------------

    async def start(self) -> None:
        self._tasks = [
            asyncio.create_task(self._consume()),
            asyncio.create_task(self._tick()),
        ]

    async def stop(self) -> None:
        for task in self._tasks:
            task.cancel()
        for task in self._tasks:
            with contextlib.suppress(asyncio.CancelledError, Exception):
                await task
        self._persist()

    async def _tick(self) -> None:
        while not self._closed.is_set():
            await asyncio.sleep(self.settings.tick_seconds)
            await self._queue.put(("tick",))

    async def _consume(self) -> None:
        while True:
            item = await self._queue.get()
            try:
                if item[0] == "frame":
                    await self._on_frame(item[1], item[2])
                else:
                    await self._on_tick()
            except (FrameError, UnknownClient, SessionClosed):
                continue  # bad or late frames are dropped
            except FocusAgentError:
                continue

    # -- event processing -----------------------------------------------------------

    async def _on_frame(self, client_id: str, raw: str) -> None:
        now = self.settings.clock()
        event = parse_client_frame(raw, client_id, now)
        opening_events: list = []
        if self.state is None:
            if event.kind != "join":
                return  # nothing to do before the first participant arrives
            opening_events = await self._start_session(now)
        assert self.state is not None
        state, events = handle_client_event(self.state, event, self.settings.config)
        self.state = state
        # The joiner's roster goes out before the opening stage banner.
        self._broadcast(events + opening_events)

    async def _start_session(self, now: float) -> list:
        prompts = self.settings.prompts or DEFAULT_PROMPTS
        config = self.settings.config

        def boot():
            plan = plan_stages(config, self._backend, prompts)
            engine = ModeratorEngine(config, plan, self._backend, prompts, count_time=False)
            return engine, start_session(config, plan, engine, now)

        engine, (state, events) = await asyncio.to_thread(boot)
        self._engine = engine
        self.state = state
        return events

    async def _on_tick(self) -> None:
        if self.state is None or self._engine is None or self.state.closed:
            return
        now = self.settings.clock()
        if not needs_intervention(self.state, now):
            return
        state = self.state
        engine = self._engine
        config = self.settings.config
        self.state = state = self._busy(state, True)

        def intervene():
            new_state, action, events = advance_policy(self._busy(state, False), now, engine, config)
            if not new_state.closed:
                new_state, more = pump_transitions(new_state, now, engine, config)
                events = events + more
            return new_state, events

        try:
            new_state, events = await asyncio.to_thread(intervene)
        except FocusAgentError:
            self.state = self._busy(state, False)
            raise
        self.state = new_state
        self._broadcast(events)
        if new_state.closed:
            self._persist()
            self._closed.set()

    # -- helpers -----------------------------------------------------------------------

    @staticmethod
    def _busy(state: LiveSessionState, flag: bool) -> LiveSessionState:
        return replace(state, backend_busy=flag)

    def _broadcast(self, events) -> None:
        for event in events:
            wire = server_event_to_wire(event)
            for outbox in self._clients.values():
                outbox.put_nowait(wire)

    def _persist(self) -> None:
        if self.state is not None and self.settings.out_path is not None:
            persist_transcript(self.state.transcript, self.settings.out_path)
