"""WebSocket chat backend around one facilitation pipeline.

Concurrency layout: per-connection receive loops only validate and enqueue;
one consumer task ingests utterances and schedules bot work; one bot worker
runs execution cycles strictly one at a time (provider calls pushed off the
event loop); one broadcaster task sends every outbound frame to every client,
so all clients observe the identical order. Message ids are allocated on the
event loop only, hence strictly increasing in broadcast order.
"""

from __future__ import annotations

import asyncio
import json
import logging
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .core import SessionConfig
from .llm import LLMGateway, Provider, RetryPolicy, ScriptedProvider
from .persistence import SessionLog
from .pipeline import SessionPipeline

log = logging.getLogger(__name__)

WIRE_TYPES = {
    "login",
    "login_ok",
    "login_denied",
    "user_message",
    "bot_message",
    "system",
    "roster",
}


class ChatRuntime:
    """All mutable server state; lives on the event loop."""

    def __init__(self, pipeline: SessionPipeline, config: SessionConfig):
        self.pipeline = pipeline
        self.config = config
        self.clients: dict[str, WebSocket] = {}
        self.inbound: asyncio.Queue[tuple[str, str]] = asyncio.Queue()
        self.bot_jobs: asyncio.Queue[tuple[str, object]] = asyncio.Queue()
        self.outbound: asyncio.Queue[dict] = asyncio.Queue()
        self.tasks: list[asyncio.Task] = []

    # frames carry exactly these five fields, nothing else ever
    def frame(self, type_: str, sender: str, text: str) -> dict:
        return {
            "type": type_,
            "sender": sender,
            "text": text,
            "id": self.pipeline.allocate_id(),
            "ts": self.pipeline.clock(),
        }

    def broadcast(self, frame: dict) -> None:
        self.outbound.put_nowait(frame)

    def roster_frame(self) -> dict:
        names = [self.config.bot_name] + list(self.clients)
        return self.frame("roster", "system", json.dumps(names))

    async def consumer(self) -> None:
        while True:
            sender, text = await self.inbound.get()
            result = self.pipeline.add_human(sender, text)
            utt = result.utterance
            self.broadcast(
                {
                    "type": "user_message",
                    "sender": utt.sender,
                    "text": utt.text,
                    "id": utt.id,
                    "ts": utt.timestamp,
                }
            )
            if result.is_ping:
                self.bot_jobs.put_nowait(("ping", utt))
            elif result.cycle_due:
                self.bot_jobs.put_nowait(("cycle", None))

    async def bot_worker(self) -> None:
        while True:
            kind, payload = await self.bot_jobs.get()
            ping = payload if kind == "ping" else None
            try:
                outcome = await asyncio.to_thread(self.pipeline.run_cycle, ping)
            except Exception:
                log.exception("execution cycle failed; bot stays silent")
                continue
            if outcome.response:
                utt = self.pipeline.commit_bot_message(outcome.response)
                self.broadcast(
                    {
                        "type": "bot_message",
                        "sender": utt.sender,
                        "text": utt.text,
                        "id": utt.id,
                        "ts": utt.timestamp,
                    }
                )

    async def broadcaster(self) -> None:
        while True:
            frame = await self.outbound.get()
            data = json.dumps(frame, sort_keys=True)
            for name, ws in list(self.clients.items()):
                try:
                    await ws.send_text(data)
                except Exception:
                    log.info("dropping unreachable client %s", name)
                    self.clients.pop(name, None)

    def start(self) -> None:
        self.tasks = [
            asyncio.create_task(self.consumer(), name="chat-consumer"),
            asyncio.create_task(self.bot_worker(), name="chat-bot"),
            asyncio.create_task(self.broadcaster(), name="chat-broadcast"),
        ]

    async def stop(self) -> None:
        for task in self.tasks:
            task.cancel()
        for task in self.tasks:
            try:
                await task
            except (asyncio.CancelledError, Exception):
                pass


def _valid_name(name: str, config: SessionConfig) -> bool:
    name = name.strip()
    if not name:
        return False
    lowered = name.lower()
    return lowered not in (config.bot_name.lower(), "system")


async def _send_frame(ws: WebSocket, frame: dict) -> None:
    await ws.send_text(json.dumps(frame, sort_keys=True))


def create_app(
    config: SessionConfig,
    provider: Provider | None = None,
    *,
    log_path: str | None = None,
    ui_dir: str | None = None,
    retry: RetryPolicy | None = None,
) -> FastAPI:
    """Wire a FastAPI app around one chat session.

    Sub-topic generation runs at startup, so a live provider is contacted
    before the first client connects.
    """
    session_log = SessionLog(log_path) if log_path else None
    gateway = LLMGateway(
        provider or ScriptedProvider(),
        retry=retry,
        record_hook=(session_log.append_llm if session_log else None),
    )
    pipeline = SessionPipeline(config, gateway, session_log=session_log)
    runtime = ChatRuntime(pipeline, config)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        await asyncio.to_thread(pipeline.initialize)
        runtime.start()
        try:
            yield
        finally:
            await runtime.stop()
            if session_log is not None:
                session_log.close()

    app = FastAPI(lifespan=lifespan)
    app.state.runtime = runtime

    @app.get("/healthz")
    async def healthz() -> dict:
        return {"status": "ok"}

    @app.get("/session")
    async def session() -> dict:
        return {
            "topic": config.topic,
            "bot_name": config.bot_name,
            "bot_keyword": config.bot_keyword,
            "participant_count": config.participant_count,
            "n_exe": config.n_exe,
            "n_sw": config.n_sw,
            "n_lw": config.n_lw,
            "subtopics": [t.title for t in (pipeline.subtopics or [])],
            "roster": [config.bot_name] + list(runtime.clients),
        }

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        name: str | None = None
        try:
            # login phase: loop until this socket owns a valid, free name
            while name is None:
                raw = await ws.receive_text()
                try:
                    data = json.loads(raw)
                except json.JSONDecodeError:
                    await _send_frame(ws, runtime.frame("system", "system", "malformed frame dropped"))
                    continue
                if not isinstance(data, dict) or data.get("type") != "login":
                    await _send_frame(
                        ws, runtime.frame("system", "system", "login required first")
                    )
                    continue
                candidate = str(data.get("sender", "")).strip()
                if not _valid_name(candidate, config):
                    await _send_frame(
                        ws, runtime.frame("login_denied", "", "invalid name")
                    )
                    continue
                if candidate in runtime.clients:
                    await _send_frame(
                        ws, runtime.frame("login_denied", "", "name already taken")
                    )
                    continue
                name = candidate
                await _send_frame(ws, runtime.frame("login_ok", name, ""))
                runtime.clients[name] = ws
                pipeline.register_participant(name)
                runtime.broadcast(runtime.roster_frame())

            # chat phase
            while True:
                raw = await ws.receive_text()
                try:
                    data = json.loads(raw)
                except json.JSONDecodeError:
                    await _send_frame(ws, runtime.frame("system", "system", "malformed frame dropped"))
                    continue
                if not isinstance(data, dict):
                    continue
                msg_type = data.get("type")
                if msg_type == "user_message":
                    text = str(data.get("text", ""))
                    if text.strip():
                        # sender comes from the connection, never from the frame
                        runtime.inbound.put_nowait((name, text))
                elif msg_type == "login":
                    await _send_frame(
                        ws, runtime.frame("system", "system", "already logged in")
                    )
                # unknown types are ignored
        except WebSocketDisconnect:
            pass
        finally:
            if name is not None and runtime.clients.get(name) is ws:
                del runtime.clients[name]
                runtime.broadcast(runtime.roster_frame())

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
