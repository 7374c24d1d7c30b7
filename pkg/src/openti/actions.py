"""Parsing model completions into structured agent actions.

The wire grammar between the model and the dispatcher is a single JSON
object: {"action": <tool>, "action_input": {...}} to call a tool, or
{"action": "final", "answer": <text>} to finish. Everything around the
object is tolerated and ignored. Parsing is total: bad input becomes a
parse_failure value, never an exception.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

TOOL_CALL = "tool_call"
FINAL_ANSWER = "final_answer"
PARSE_FAILURE = "parse_failure"


@dataclass(frozen=True)
class AgentAction:
    kind: str
    tool_name: str = ""
    arguments: dict = field(default_factory=dict)
    answer: str = ""
    raw: str = ""

    def __post_init__(self):
        if self.kind == TOOL_CALL and not self.tool_name:
            raise ValueError("tool_call requires a tool name")
        if self.kind == FINAL_ANSWER and self.tool_name:
            raise ValueError("final_answer must not carry a tool name")


def _candidate_objects(text: str):
    """Yield JSON objects decoded from every '{' offset, first-to-last."""
    decoder = json.JSONDecoder()
    idx = text.find("{")
    while idx != -1:
        try:
            obj, _ = decoder.raw_decode(text, idx)
        except ValueError:
            pass
        else:
            if isinstance(obj, dict):
                yield obj
        idx = text.find("{", idx + 1)


def parse_action(completion: str) -> AgentAction:
    """Extract the first well-formed action object embedded in the text."""
    text = completion if isinstance(completion, str) else str(completion)
    for obj in _candidate_objects(text):
        action = obj.get("action")
        if not isinstance(action, str) or not action:
            continue
        if action == "final":
            answer = obj.get("answer")
            if isinstance(answer, str):
                return AgentAction(kind=FINAL_ANSWER, answer=answer, raw=text)
            continue
        args = obj.get("action_input")
        if isinstance(args, dict):
            return AgentAction(kind=TOOL_CALL, tool_name=action, arguments=args, raw=text)
    return AgentAction(kind=PARSE_FAILURE, raw=text)


def serialize_action(action: AgentAction) -> str:
    """Inverse of parse_action on the action grammar."""
    if action.kind == TOOL_CALL:
        return json.dumps(
            {"action": action.tool_name, "action_input": action.arguments},
            sort_keys=True,
        )
    if action.kind == FINAL_ANSWER:
        return json.dumps({"action": "final", "answer": action.answer}, sort_keys=True)
    return action.raw


def looks_like_action_attempt(text: str) -> bool:
    """Heuristic separating a malformed call attempt from plain prose."""
    return '"action"' in text or "'action'" in text or ("{" in text and "}" in text)
