"""System-prompt rendering from the tool catalog.

The prompt is strictly line-structured: each of the five per-tool fields
occupies its own labeled block, so removing a field for an ablation run
deletes whole lines and never rewrites the rest. That makes the
"masked prompt is a sub-document of the fuller prompt" property hold by
construction.
"""

from __future__ import annotations

from .descriptors import PROMPT_FIELDS, PROMPT_FIELD_NAMES

ACTION_GRAMMAR = (
    "Reply with exactly one JSON object and nothing else.\n"
    'To use a tool: {"action": "<tool name>", "action_input": {<parameters>}}\n'
    'When the task is complete: {"action": "final", "answer": "<your reply>"}'
)

HEADER = (
    "You are a traffic analysis assistant. You can acquire maps, process road "
    "networks, generate and calibrate travel demand, run simulations and train "
    "signal control policies with the tools listed below."
)


def render_system_prompt(catalog, ablation_mask=frozenset()) -> str:
    """Render the catalog into one prompt, omitting masked field blocks.

    ablation_mask holds field labels ("Emphasis", "Example", ...). Masked
    fields are absent verbatim, including their labels.
    """
    if not catalog:
        raise ValueError("catalog must be non-empty")
    unknown = set(ablation_mask) - set(PROMPT_FIELD_NAMES)
    if unknown:
        raise ValueError(f"unknown prompt fields in mask: {sorted(unknown)}")

    lines = [HEADER, "", ACTION_GRAMMAR, ""]
    for tool in catalog:
        lines.append(f"### Tool: {tool.name}")
        if tool.params:
            rendered = []
            for p in tool.params:
                kind = p.kind if p.kind != "enum" else "one of " + "|".join(p.values)
                req = "required" if p.required else "optional"
                rendered.append(f"{p.name} ({kind}, {req}): {p.doc}")
            lines.append("Parameters: " + "; ".join(rendered))
        else:
            lines.append("Parameters: none")
        for attr, label in PROMPT_FIELDS:
            if label in ablation_mask:
                continue
            value = getattr(tool, attr)
            if value:
                lines.append(f"[{label}] {value}")
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"


REPAIR_GRAMMAR = (
    "Your last reply did not contain a well-formed action object. "
    + ACTION_GRAMMAR
)


def repair_unknown_tool(name, catalog_names) -> str:
    return (
        f"There is no tool named {name!r}. Choose one of: "
        + ", ".join(catalog_names)
        + ". "
        + ACTION_GRAMMAR
    )


def alert_required_info(tool_name, missing) -> str:
    return (
        f"The call to {tool_name} is missing required information: "
        + ", ".join(missing)
        + ". Re-emit the action object with every required parameter filled in."
    )


def retry_after_error(tool_name, error_text) -> str:
    return (
        f"The tool {tool_name} failed: {error_text}. "
        "Correct the call or choose a different tool. " + ACTION_GRAMMAR
    )


def task_unfinished() -> str:
    return (
        "The request is not accomplished yet; the tools used so far do not "
        "complete it. Pick the appropriate tool and emit the action object."
    )
