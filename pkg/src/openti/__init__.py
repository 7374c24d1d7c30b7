"""Open traffic intelligence: a tool-augmented traffic analysis agent.

A language model (or its deterministic offline mock) routes conversational
requests to registered tools covering map acquisition, network processing,
demand generation and calibration, mesoscopic simulation and signal-control
training, and an evaluation harness measures how reliably it does so.
"""

__version__ = "0.1.0"

from .actions import AgentAction, parse_action, serialize_action
from .descriptors import ParamSpec, ToolDescriptor, extract_params
from .dispatch import DispatchOutcome, Dispatcher
from .errors import OpenTiError
from .gateway import ChatRequest, ChatResponse, Gateway, MockBackend, RemoteBackend
from .geo import BBox
from .prompts import render_system_prompt
from .registry import ToolContext, ToolRegistry, ToolResult
from .session import SessionState, TraceEvent

__all__ = [
    "AgentAction",
    "BBox",
    "ChatRequest",
    "ChatResponse",
    "DispatchOutcome",
    "Dispatcher",
    "Gateway",
    "MockBackend",
    "OpenTiError",
    "ParamSpec",
    "RemoteBackend",
    "SessionState",
    "ToolContext",
    "ToolDescriptor",
    "ToolRegistry",
    "ToolResult",
    "TraceEvent",
    "extract_params",
    "parse_action",
    "render_system_prompt",
    "serialize_action",
    "__version__",
]
