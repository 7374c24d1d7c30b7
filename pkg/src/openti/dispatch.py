"""The execution loop between user message, model and tools.

One dispatch: render the system prompt, ask the model, parse its action,
validate parameters, run the handler, feed the observation back, and repeat
until the model finishes or a retry budget runs out. Every failure mode maps
to one of four outcome statuses; nothing escapes as an exception.

Outcome taxonomy:
  ok          - a tool ran (or a final answer was given) and satisfied the task
  no_api_call - the model answered without ever calling a tool it should have
  mismatch    - the model called the wrong tool(s) and repair did not help
  error_raise - malformed calls, bad parameters or a failing handler
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import prompts
from .actions import (
    FINAL_ANSWER,
    PARSE_FAILURE,
    TOOL_CALL,
    looks_like_action_attempt,
    parse_action,
)
from .descriptors import extract_params
from .errors import MissingParams, NetworkError, OpenTiError, ScriptMiss, TypeMismatch
from .registry import ToolContext
from .session import ArtifactRef, SessionState

STATUS_OK = "ok"
STATUS_NO_API_CALL = "no_api_call"
STATUS_MISMATCH = "mismatch"
STATUS_ERROR_RAISE = "error_raise"

QUERY_FAILED = "Query failed: the request could not be completed with the available tools."


@dataclass
class DispatchOutcome:
    status: str
    reply: str
    matched_tool: str = ""
    retries_used: int = 0
    tools_used: tuple = ()
    arguments: dict = field(default_factory=dict)
    attachments: tuple = ()  # ArtifactRef

    def __post_init__(self):
        if self.status == STATUS_OK and not self.reply:
            raise ValueError("ok outcomes must carry a reply")


class Dispatcher:
    def __init__(self, registry, gateway, max_query=3, ablation_mask=frozenset()):
        if max_query < 1:
            raise ValueError("max_query must be >= 1")
        self.registry = registry
        self.gateway = gateway
        self.max_query = max_query
        self.ablation_mask = frozenset(ablation_mask)
        self.offline = True

    def system_prompt(self) -> str:
        return prompts.render_system_prompt(self.registry.catalog(), self.ablation_mask)

    def _context(self, session: SessionState) -> ToolContext:
        return ToolContext(
            workspace=session.artifact_dir, offline=self.offline, gateway=self.gateway
        )

    def dispatch(self, session, msg, max_query=None, expected_tool=None) -> DispatchOutcome:
        """Run one user message through the full loop. Thread-safe per session."""
        with session.lock:
            return self._dispatch_locked(session, msg, max_query, expected_tool)

    def _dispatch_locked(self, session, msg, max_query, expected_tool):
        if len(self.registry) == 0:
            raise ValueError("registry must not be empty")
        max_query = self.max_query if max_query is None else max_query
        if max_query < 1:
            raise ValueError("max_query must be >= 1")

        session.say("user", msg)
        messages = [("system", self.system_prompt())]
        for speaker, text in session.transcript[:-1]:
            messages.append(("user" if speaker == "user" else "assistant", text))
        messages.append(("user", msg))

        budget = 1 + 2 * max_query  # hard cap on model calls per dispatch
        calls = 0
        parse_repairs = 0
        tool_repairs = 0
        param_asks = 0
        response_retries = 0
        steps = 0
        tools_used = []
        last_args = {}
        last_result = None
        attachments = []

        def retries():
            return max(parse_repairs, tool_repairs, param_asks, response_retries)

        def finish(status, reply, matched=""):
            reply = reply or QUERY_FAILED
            session.say("agent", reply)
            return DispatchOutcome(
                status=status,
                reply=reply,
                matched_tool=matched,
                retries_used=retries(),
                tools_used=tuple(tools_used),
                arguments=dict(last_args),
                attachments=tuple(attachments),
            )

        def wrap_up_ok():
            # Model went quiet after a successful tool: reply from handler result.
            reply = last_result.text if last_result else QUERY_FAILED
            matched = tools_used[-1] if tools_used else ""
            if expected_tool is not None and expected_tool not in tools_used:
                return finish(STATUS_MISMATCH, reply, matched)
            return finish(STATUS_OK, reply, matched)

        while True:
            if calls >= budget:
                if tools_used:
                    return wrap_up_ok()
                return finish(STATUS_ERROR_RAISE, QUERY_FAILED)
            try:
                response = self.gateway.complete(messages)
            except ScriptMiss as exc:
                if tools_used:
                    # No scripted continuation: the handler result is the reply.
                    return wrap_up_ok()
                session.emit("error", f"model backend: {exc}")
                return finish(STATUS_ERROR_RAISE, QUERY_FAILED)
            except (NetworkError, OpenTiError) as exc:
                session.emit("error", f"model backend: {exc}")
                return finish(STATUS_ERROR_RAISE, QUERY_FAILED)
            calls += 1
            completion = response.content
            session.emit("thought", completion)
            messages.append(("assistant", completion))
            action = parse_action(completion)

            if action.kind == PARSE_FAILURE:
                attempted = looks_like_action_attempt(completion)
                if parse_repairs < 1 and calls < budget:
                    parse_repairs += 1
                    messages.append(("user", prompts.REPAIR_GRAMMAR))
                    continue
                if attempted:
                    session.emit("error", "unparseable action after repair")
                    return finish(STATUS_ERROR_RAISE, QUERY_FAILED)
                # Plain prose: the model answered without any API call.
                return finish(STATUS_NO_API_CALL, completion)

            if action.kind == FINAL_ANSWER:
                if expected_tool is None:
                    matched = tools_used[-1] if tools_used else ""
                    return finish(STATUS_OK, action.answer or QUERY_FAILED, matched)
                if expected_tool in tools_used:
                    return finish(STATUS_OK, action.answer or last_result.text, expected_tool)
                if not tools_used:
                    return finish(STATUS_NO_API_CALL, action.answer)
                if response_retries < max_query and calls < budget:
                    response_retries += 1
                    messages.append(("user", prompts.task_unfinished()))
                    continue
                return finish(STATUS_MISMATCH, action.answer, tools_used[-1])

            # tool_call
            name = action.tool_name
            if name not in self.registry:
                if tool_repairs < 1 and calls < budget:
                    tool_repairs += 1
                    messages.append(
                        ("user", prompts.repair_unknown_tool(name, self.registry.names()))
                    )
                    continue
                session.emit("error", f"unknown tool {name!r} after repair")
                return finish(STATUS_MISMATCH, QUERY_FAILED)

            descriptor, handler = self.registry.get(name)
            try:
                params = extract_params(descriptor, action)
            except MissingParams as exc:
                if param_asks < max_query and calls < budget:
                    param_asks += 1
                    messages.append(("user", prompts.alert_required_info(name, exc.missing)))
                    continue
                session.emit("error", f"{name}: {exc}")
                return finish(STATUS_ERROR_RAISE, QUERY_FAILED, name)
            except TypeMismatch as exc:
                session.emit("error", f"{name}: {exc}")
                return finish(STATUS_ERROR_RAISE, QUERY_FAILED, name)

            session.emit("action", f"{name}({params})", tool_name=name)
            last_args = params
            try:
                result = handler(params, self._context(session))
            except OpenTiError as exc:
                session.emit("error", f"{name} failed: {exc}", tool_name=name)
                if response_retries < max_query and calls < budget:
                    response_retries += 1
                    messages.append(("user", prompts.retry_after_error(name, str(exc))))
                    continue
                return finish(STATUS_ERROR_RAISE, QUERY_FAILED, name)

            session.emit("observation", result.text, tool_name=name)
            tools_used.append(name)
            last_result = result
            for kind, path, label in result.artifacts:
                ref = ArtifactRef(kind=kind, path=path, label=label)
                session.add_artifact(ref)
                attachments.append(ref)
            steps += 1
            if steps >= 2 * max_query:
                return wrap_up_ok()
            # The tool name is withheld so scripted mocks match on content,
            # not on an echo of the call they just produced.
            messages.append(("tool", f"Observation: {result.text}"))
