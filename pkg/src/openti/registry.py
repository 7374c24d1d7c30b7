"""Tool registry: names -> (descriptor, handler).

Handlers have the signature handler(params: dict, ctx: ToolContext) ->
ToolResult. The registry is built once at startup and treated as immutable
afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .descriptors import ToolDescriptor
from .errors import DuplicateName


@dataclass
class ToolResult:
    text: str
    artifacts: list = field(default_factory=list)  # [(kind, path_or_url, label)]

    def __post_init__(self):
        if not self.text:
            raise ValueError("tool result text must be non-empty")


@dataclass
class ToolContext:
    workspace: str  # session artifact directory; tools write here
    offline: bool = True
    seed: int = 0
    gateway: object = None  # optional, for tools that add a model gloss

    def resolve(self, path: str) -> str:
        """Relative tool paths are resolved against the session workspace."""
        import os

        if os.path.isabs(path):
            return path
        return os.path.join(self.workspace, path)


class ToolRegistry:
    def __init__(self):
        self._tools = {}

    def register(self, descriptor: ToolDescriptor, handler):
        if descriptor.name in self._tools:
            raise DuplicateName(f"tool {descriptor.name!r} already registered")
        if not callable(handler):
            raise ValueError("handler must be callable")
        self._tools[descriptor.name] = (descriptor, handler)
        return descriptor.name

    def __contains__(self, name):
        return name in self._tools

    def __len__(self):
        return len(self._tools)

    def get(self, name):
        return self._tools[name]

    def descriptor(self, name) -> ToolDescriptor:
        return self._tools[name][0]

    def catalog(self):
        """Descriptors in registration order."""
        return [d for d, _ in self._tools.values()]

    def names(self):
        return list(self._tools.keys())
