"""HTTP service: sessions, messages, artifacts, tool catalog, trace stream.

The trace channel is server-sent events; a subscriber first receives every
event recorded so far (ids are the per-session sequence numbers), then live
events as dispatches append them. Artifacts are served read-only from the
session workspace, with names jailed to that directory.
"""

from __future__ import annotations

import json
import os
import queue
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, StreamingResponse
from pydantic import BaseModel

from .dispatch import Dispatcher
from .gateway import Gateway, backend_from_env
from .session import SessionState
from .toolkit import build_default_registry, hints

CONTENT_TYPES = {
    ".svg": "image/svg+xml",
    ".json": "application/json",
    ".csv": "text/csv",
    ".osm": "application/xml",
    ".jsonl": "application/x-ndjson",
    ".txt": "text/plain",
}


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8716
    workspace: str = "workspace"
    offline: bool = True
    max_query: int = 3
    cors_origins: tuple = ("*",)
    mock_scripts: str = None  # path; defaults to the bundled demo scripts

    def __post_init__(self):
        if not 0 < self.port < 65536:
            raise ValueError("port must be within (0, 65536)")


class MessageIn(BaseModel):
    text: str


@dataclass
class SessionRuntime:
    state: SessionState
    subscribers: list = field(default_factory=list)


def _artifact_payload(session_id, ref):
    if ref.kind == "link":
        uri = ref.path
    else:
        uri = f"/api/artifacts/{session_id}/{os.path.basename(ref.path)}"
    return {"kind": ref.kind, "uri": uri, "label": ref.label}


def create_app(config: ServiceConfig = None) -> FastAPI:
    config = config or ServiceConfig()
    os.makedirs(config.workspace, exist_ok=True)
    if config.offline:
        os.environ.setdefault("OPENTI_OFFLINE", "1")

    registry = build_default_registry()
    gateway = Gateway(backend_from_env(config.mock_scripts))
    dispatcher = Dispatcher(registry, gateway, max_query=config.max_query)
    dispatcher.offline = config.offline
    sessions: dict[str, SessionRuntime] = {}

    app = FastAPI(title="traffic intelligence service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(config.cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.config = config
    app.state.registry = registry

    def runtime(session_id) -> SessionRuntime:
        if session_id not in sessions:
            raise HTTPException(status_code=404, detail="unknown session")
        return sessions[session_id]

    @app.post("/api/sessions")
    def create_session():
        state = SessionState(config.workspace)
        rt = SessionRuntime(state=state)

        def fanout(event):
            for q_ in list(rt.subscribers):
                q_.put(event)

        state.add_listener(fanout)
        sessions[state.session_id] = rt
        return {"session_id": state.session_id}

    @app.post("/api/sessions/{session_id}/messages")
    def post_message(session_id: str, message: MessageIn):
        rt = runtime(session_id)
        if not message.text.strip():
            raise HTTPException(status_code=422, detail="empty message")
        outcome = dispatcher.dispatch(rt.state, message.text)
        return {
            "reply": outcome.reply,
            "outcome": outcome.status,
            "matched_tool": outcome.matched_tool,
            "attachments": [
                _artifact_payload(session_id, ref) for ref in outcome.attachments
            ],
        }

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        rt = runtime(session_id)
        return {
            "session_id": session_id,
            "transcript": [
                {"speaker": speaker, "text": text} for speaker, text in rt.state.transcript
            ],
            "trace": [event.to_json() for event in rt.state.trace],
            "artifacts": [
                _artifact_payload(session_id, ref) for ref in rt.state.artifacts
            ],
        }

    @app.get("/api/sessions/{session_id}/stream")
    def stream(session_id: str, limit: int = 0):
        """SSE trace channel; `limit` > 0 closes after that many events."""
        rt = runtime(session_id)

        def generate():
            q_ = queue.Queue()
            rt.subscribers.append(q_)
            sent = 0
            try:
                for event in list(rt.state.trace):  # replay, then live
                    yield _sse(event)
                    sent += 1
                    if limit and sent >= limit:
                        return
                idle = 0.0
                while idle < 30.0:
                    try:
                        event = q_.get(timeout=0.25)
                    except queue.Empty:
                        idle += 0.25
                        yield ": ping\n\n"
                        continue
                    idle = 0.0
                    yield _sse(event)
                    sent += 1
                    if limit and sent >= limit:
                        return
            finally:
                if q_ in rt.subscribers:
                    rt.subscribers.remove(q_)

        def _sse(event):
            payload = json.dumps(event.to_json(), sort_keys=True)
            return f"id: {event.timestamp}\nevent: trace\ndata: {payload}\n\n"

        return StreamingResponse(generate(), media_type="text/event-stream")

    @app.get("/api/tools")
    def tools():
        return [
            {
                "name": d.name,
                "description": d.description,
                "params": [
                    {
                        "name": p.name,
                        "kind": p.kind,
                        "required": p.required,
                        "doc": p.doc,
                        "values": list(p.values),
                    }
                    for p in d.params
                ],
            }
            for d in registry.catalog()
        ]

    @app.get("/api/hints")
    def get_hints():
        return hints(registry)

    @app.get("/api/artifacts/{session_id}/{name}")
    def artifact(session_id: str, name: str):
        rt = runtime(session_id)
        base = os.path.realpath(rt.state.artifact_dir)
        path = os.path.realpath(os.path.join(base, name))
        if not path.startswith(base + os.sep):
            raise HTTPException(status_code=400, detail="bad artifact name")
        if not os.path.isfile(path):
            raise HTTPException(status_code=404, detail="no such artifact")
        ext = os.path.splitext(path)[1].lower()
        return FileResponse(path, media_type=CONTENT_TYPES.get(ext, "application/octet-stream"))

    return app


def serve(config: ServiceConfig = None):
    """Run the service until interrupted."""
    import errno

    import uvicorn

    from .errors import BindError

    config = config or ServiceConfig()
    app = create_app(config)
    try:
        uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    except OSError as exc:
        if exc.errno in (errno.EADDRINUSE, errno.EACCES):
            raise BindError(f"cannot bind {config.host}:{config.port}: {exc}")
        raise
