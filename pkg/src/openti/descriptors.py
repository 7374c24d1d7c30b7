"""Tool descriptors: the five prompt components plus a parameter schema.

Each registered tool carries Description, Format Restriction, Example,
Reflection and Emphasis. Every field can be removed independently, which is
what the prompt-ablation harness exercises.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .actions import AgentAction
from .errors import MissingParams, TypeMismatch

PROMPT_FIELDS = (
    ("description", "Description"),
    ("format_restriction", "Format Restriction"),
    ("example", "Example"),
    ("reflection", "Reflection"),
    ("emphasis", "Emphasis"),
)
PROMPT_FIELD_NAMES = tuple(label for _, label in PROMPT_FIELDS)

PARAM_KINDS = ("text", "bbox", "path", "integer", "real", "enum")


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str
    required: bool = True
    doc: str = ""
    values: tuple = ()  # enum members, when kind == "enum"

    def __post_init__(self):
        if self.kind not in PARAM_KINDS:
            raise ValueError(f"unknown parameter kind {self.kind!r}")
        if self.kind == "enum" and not self.values:
            raise ValueError("enum parameter needs values")


@dataclass(frozen=True)
class ToolDescriptor:
    name: str
    description: str
    format_restriction: str = ""
    example: str = ""
    reflection: str = ""
    emphasis: str = ""
    params: tuple = ()

    def __post_init__(self):
        if not self.name or not self.name.replace("_", "").isalnum():
            raise ValueError(f"tool name must be an identifier, got {self.name!r}")
        if not self.description.strip():
            raise ValueError(f"tool {self.name}: description must be non-empty")
        for p in self.params:
            if p.required and not p.doc.strip():
                raise ValueError(
                    f"tool {self.name}: required param {p.name!r} needs a doc line"
                )

    def prompt_field(self, label: str) -> str:
        for attr, lab in PROMPT_FIELDS:
            if lab == label:
                return getattr(self, attr)
        raise KeyError(label)


def _coerce(param: ParamSpec, value):
    kind = param.kind
    if kind == "text" or kind == "path":
        if isinstance(value, str):
            return value
        if isinstance(value, (int, float)):
            return str(value)
        raise TypeMismatch(param.name, kind, value)
    if kind == "integer":
        if isinstance(value, bool):
            raise TypeMismatch(param.name, kind, value)
        if isinstance(value, int):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if isinstance(value, str):
            try:
                return int(value.strip())
            except ValueError:
                raise TypeMismatch(param.name, kind, value)
        raise TypeMismatch(param.name, kind, value)
    if kind == "real":
        if isinstance(value, bool):
            raise TypeMismatch(param.name, kind, value)
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value.strip())
            except ValueError:
                raise TypeMismatch(param.name, kind, value)
        raise TypeMismatch(param.name, kind, value)
    if kind == "enum":
        if value in param.values:
            return value
        raise TypeMismatch(param.name, f"one of {param.values}", value)
    if kind == "bbox":
        seq = value
        if isinstance(seq, str):
            # Tolerate "[a, b, c, d]" or "a, b, c, d" emitted as text.
            import json as _json

            try:
                seq = _json.loads(seq)
            except ValueError:
                try:
                    seq = [float(v) for v in seq.strip("[]() ").split(",")]
                except ValueError:
                    raise TypeMismatch(param.name, "bbox of 4 reals", value)
        if not isinstance(seq, (list, tuple)) or len(seq) != 4:
            raise TypeMismatch(param.name, "bbox of 4 reals", value)
        try:
            vals = [float(v) for v in seq]
        except (TypeError, ValueError):
            raise TypeMismatch(param.name, "bbox of 4 reals", value)
        from .geo import BBox

        try:
            BBox(*vals)
        except ValueError as exc:
            raise TypeMismatch(param.name, f"valid bbox ({exc})", value)
        return vals
    raise TypeMismatch(param.name, kind, value)


def extract_params(descriptor: ToolDescriptor, action: AgentAction) -> dict:
    """Validate and coerce a tool call's arguments against the schema.

    Unknown arguments are dropped; missing required ones are reported
    together so the dispatcher can ask for all of them in one turn.
    """
    if action.kind != "tool_call" or action.tool_name != descriptor.name:
        raise ValueError("action does not target this descriptor")
    out = {}
    missing = []
    for param in descriptor.params:
        if param.name not in action.arguments:
            if param.required:
                missing.append(param.name)
            continue
        out[param.name] = _coerce(param, action.arguments[param.name])
    if missing:
        raise MissingParams(missing)
    return out
