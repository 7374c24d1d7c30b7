"""Conversation sessions: transcript, append-only trace, artifact store.

Workspace layout: <root>/sessions/<id>/artifacts/ holds every file a tool
produced for that session; the trace is persisted to trace.jsonl, one event
per line, as it happens.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field

TRACE_KINDS = ("thought", "action", "observation", "error")


@dataclass(frozen=True)
class TraceEvent:
    kind: str
    text: str
    tool_name: str = ""
    timestamp: int = 0  # monotonic per-session counter

    def __post_init__(self):
        if self.kind not in TRACE_KINDS:
            raise ValueError(f"bad trace kind {self.kind!r}")
        if self.kind == "action" and not self.tool_name:
            raise ValueError("action events must name their tool")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "text": self.text,
            "tool_name": self.tool_name,
            "timestamp": self.timestamp,
        }


@dataclass(frozen=True)
class ArtifactRef:
    kind: str  # image | file | link | table
    path: str  # filesystem path, or URL for kind == link
    label: str


class SessionState:
    def __init__(self, workspace_root, session_id=None):
        self.session_id = session_id or uuid.uuid4().hex[:12]
        self.root = os.path.join(workspace_root, "sessions", self.session_id)
        self.artifact_dir = os.path.join(self.root, "artifacts")
        os.makedirs(self.artifact_dir, exist_ok=True)
        self.transcript = []  # [(speaker in {user, agent}, text)]
        self.trace = []
        self.artifacts = []
        self.lock = threading.Lock()  # one dispatch at a time per session
        self._trace_path = os.path.join(self.root, "trace.jsonl")
        self._listeners = []

    # -- transcript ---------------------------------------------------------

    def say(self, speaker, text):
        if speaker not in ("user", "agent"):
            raise ValueError("speaker must be user or agent")
        self.transcript.append((speaker, text))

    # -- trace ---------------------------------------------------------------

    def emit(self, kind, text, tool_name="") -> TraceEvent:
        event = TraceEvent(
            kind=kind, text=text, tool_name=tool_name, timestamp=len(self.trace)
        )
        self.trace.append(event)
        with open(self._trace_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event.to_json(), sort_keys=True) + "\n")
        for listener in list(self._listeners):
            listener(event)
        return event

    def add_listener(self, fn):
        self._listeners.append(fn)

    def remove_listener(self, fn):
        if fn in self._listeners:
            self._listeners.remove(fn)

    # -- artifacts --------------------------------------------------------------

    def add_artifact(self, ref: ArtifactRef):
        if ref.kind != "link" and not os.path.exists(ref.path):
            raise ValueError(f"artifact path does not exist: {ref.path}")
        self.artifacts.append(ref)
        return ref
