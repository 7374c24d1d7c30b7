"""Meta-control: a language agent (or a deterministic surrogate) picks
signal phases step by step.

The pivotal agent distills the user's free-text control policy into a
PolicyBrief once; the control agent then receives the brief plus the current
observation every decision step and must answer `PHASE: <k>` with a one-line
reason. Unparseable or out-of-range answers fall back to keeping the current
phase, so an invalid phase can never reach the simulator.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field

from .errors import ExtractionFailure
from .sim import SimDriver, TscAction

PHASE_PATTERN = re.compile(r"PHASE:\s*(-?\d+)")


@dataclass(frozen=True)
class PolicyBrief:
    objective: str
    constraints: tuple = ()
    action_space_doc: str = ""

    def __post_init__(self):
        if not self.objective.strip():
            raise ValueError("objective must be non-empty")


@dataclass(frozen=True)
class ZeroStepResult:
    action: TscAction
    explanation: str
    fallback_used: bool

    def __post_init__(self):
        if not self.fallback_used and not self.explanation.strip():
            raise ValueError("explanation required unless the fallback fired")


def action_space_doc(intersection) -> str:
    """Generated from the phase table, never inferred by the model."""
    lines = []
    for idx, phase in enumerate(intersection.phases):
        moves = ", ".join(f"link {a}->link {b}" for a, b in phase)
        lines.append(f"Phase {idx}: serves {moves or 'nothing'}")
    return "\n".join(lines)


def describe_policy(user_text: str, gateway, intersection) -> PolicyBrief:
    """One model call extracting objective + constraints into the brief."""
    if not user_text or not user_text.strip():
        raise ValueError("user_text must be non-empty")
    doc = action_space_doc(intersection)
    prompt = (
        "Extract the traffic signal control policy from the request below. "
        'Answer with one JSON object {"objective": <text>, "constraints": [<text>, ...]} '
        "and nothing else.\nRequest: " + user_text
    )
    for attempt in range(2):
        response = gateway.complete([("user", prompt)])
        try:
            payload = json.loads(_first_object(response.content))
            objective = payload["objective"]
            constraints = tuple(payload.get("constraints", ()))
            if isinstance(objective, str) and objective.strip():
                return PolicyBrief(
                    objective=objective,
                    constraints=constraints,
                    action_space_doc=doc,
                )
        except (ValueError, KeyError, TypeError):
            pass
        prompt = (
            "The previous answer was not a valid JSON object. "
            'Answer exactly {"objective": <text>, "constraints": []}.\nRequest: '
            + user_text
        )
    raise ExtractionFailure(f"could not extract a policy from {user_text!r}")


def _first_object(text: str) -> str:
    start = text.find("{")
    if start == -1:
        raise ValueError("no object")
    decoder = json.JSONDecoder()
    while start != -1:
        try:
            _, end = decoder.raw_decode(text, start)
            return text[start:end]
        except ValueError:
            start = text.find("{", start + 1)
    raise ValueError("no object")


def _control_prompt(brief: PolicyBrief, obs) -> str:
    queues = ", ".join(
        f"approach link {link}: {q} queued"
        for link, q in zip(obs.approach_links, obs.queue_per_approach)
    )
    constraints = "; ".join(brief.constraints) if brief.constraints else "none"
    return (
        f"Policy objective: {brief.objective}\n"
        f"Constraints: {constraints}\n"
        f"{brief.action_space_doc}\n"
        f"Observation at t={obs.sim_time_s}s: current phase {obs.current_phase}; {queues}.\n"
        f"Choose the next phase. Answer exactly `PHASE: <k>` followed by a "
        f"one-sentence reason."
    )


class LlmControlAgent:
    """Control agent backed by the gateway (mock or remote)."""

    def __init__(self, gateway):
        self.gateway = gateway

    def ask(self, prompt: str, obs) -> str:
        return self.gateway.complete([("user", prompt)]).content


class GreedySurrogate:
    """Deterministic max-pressure stand-in: pick the phase serving the
    largest total queue, ties to the lowest index."""

    def __init__(self, metas):
        self.metas = metas

    def ask(self, prompt: str, obs) -> str:
        meta = self.metas[obs.intersection_id]
        queues = dict(zip(obs.approach_links, obs.queue_per_approach))
        served = [
            sum(queues.get(link, 0) for link in meta.phase_serves[p])
            for p in range(meta.n_phases)
        ]
        best = max(served)
        phase = served.index(best)
        return f"PHASE: {phase} — serves {best} queued vehicles, the current maximum"


def zero_step(obs, brief: PolicyBrief, agent, n_phases=None) -> ZeroStepResult:
    """One decision: prompt, parse `PHASE: <k>`, one repair, else keep phase."""
    n_phases = obs.n_phases if n_phases is None else n_phases
    prompt = _control_prompt(brief, obs)
    for attempt in range(2):
        reply = agent.ask(prompt, obs)
        match = PHASE_PATTERN.search(reply)
        if match:
            phase = int(match.group(1))
            if 0 <= phase < n_phases:
                return ZeroStepResult(
                    action=TscAction(phase_index=phase),
                    explanation=reply.strip(),
                    fallback_used=False,
                )
        prompt = (
            f"Your answer could not be interpreted. Answer exactly `PHASE: <k>` "
            f"with 0 <= k < {n_phases}, then one sentence of reasoning.\n"
            + _control_prompt(brief, obs)
        )
    return ZeroStepResult(
        action=TscAction(phase_index=obs.current_phase),
        explanation="",
        fallback_used=True,
    )


class ChatZeroController:
    """Adapter exposing zero_step through the controller protocol."""

    def __init__(self, metas, brief: PolicyBrief, agent, log=None):
        self.metas = metas
        self.brief = brief
        self.agent = agent
        self.log = log if log is not None else []
        self.fallbacks = 0
        self.steps = 0

    def act(self, obs) -> TscAction:
        result = zero_step(obs, self.brief, self.agent)
        self.steps += 1
        if result.fallback_used:
            self.fallbacks += 1
        self.log.append(
            {
                "t": obs.sim_time_s,
                "intersection": obs.intersection_id,
                "obs": list(obs.queue_per_approach),
                "action": result.action.phase_index,
                "explanation": result.explanation,
                "fallback": result.fallback_used,
            }
        )
        return result.action


def run_chatzero(scenario, brief: PolicyBrief, agent, out_dir=None):
    """Drive a full run with the control agent in the loop.

    Returns (MetricsReport, explanation log, fallback_rate) and optionally
    persists chatzero_log.jsonl, one record per decision step.
    """
    from .tsc import intersection_metas

    metas = intersection_metas(scenario.network)
    controller = ChatZeroController(metas, brief, agent)
    driver = SimDriver(scenario)
    while not driver.done:
        actions = {}
        for obs in driver.observations():
            actions[obs.intersection_id] = controller.act(obs)
        driver.apply_actions(actions)
        driver.advance_interval()
    _, metrics = driver.finish()
    fallback_rate = controller.fallbacks / controller.steps if controller.steps else 0.0
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, "chatzero_log.jsonl")
        with open(path, "w", encoding="utf-8") as fh:
            for record in controller.log:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
    return metrics, controller.log, fallback_rate
