import pytest
from hypothesis import given
from hypothesis import strategies as st

from openti.actions import AgentAction
from openti.descriptors import (
    PROMPT_FIELD_NAMES,
    ParamSpec,
    ToolDescriptor,
    extract_params,
)
from openti.errors import DuplicateName, MissingParams, TypeMismatch
from openti.prompts import render_system_prompt
from openti.registry import ToolRegistry, ToolResult
from openti.toolkit import build_default_registry


def sample_descriptor(name="queryAreaRange"):
    return ToolDescriptor(
        name=name,
        description="Answers with the coordinate range of a place.",
        format_restriction="Output is [min_long, min_lat, max_long, max_lat].",
        example='"Where is X" returns the 4-value array.',
        reflection="Answer from the tool result and stop.",
        emphasis="Use the dedicated location tool.",
        params=(ParamSpec("place", "text", True, "place to look up"),),
    )


def noop_handler(params, ctx):
    return ToolResult(text="done")


class TestRegistry:
    def test_register_increments_catalog(self):
        registry = ToolRegistry()
        assert len(registry) == 0
        registry.register(sample_descriptor(), noop_handler)
        assert len(registry) == 1

    def test_duplicate_name_rejected(self):
        registry = ToolRegistry()
        registry.register(sample_descriptor(), noop_handler)
        with pytest.raises(DuplicateName):
            registry.register(sample_descriptor(), noop_handler)

    def test_empty_description_rejected(self):
        with pytest.raises(ValueError):
            ToolDescriptor(name="x", description="   ")

    def test_required_param_needs_doc(self):
        with pytest.raises(ValueError):
            ToolDescriptor(
                name="x",
                description="d",
                params=(ParamSpec("p", "text", True, ""),),
            )


class TestRenderPrompt:
    def test_all_five_labels_once_per_tool(self):
        prompt = render_system_prompt([sample_descriptor()])
        for label in PROMPT_FIELD_NAMES:
            assert prompt.count(f"[{label}]") == 1

    def test_mask_removes_label_verbatim(self):
        prompt = render_system_prompt([sample_descriptor()], {"Emphasis"})
        assert "[Emphasis]" not in prompt
        assert "[Description]" in prompt

    def test_mask_all_five_leaves_names_and_grammar(self):
        prompt = render_system_prompt([sample_descriptor()], set(PROMPT_FIELD_NAMES))
        assert "queryAreaRange" in prompt
        assert '"action"' in prompt
        for label in PROMPT_FIELD_NAMES:
            assert f"[{label}]" not in prompt

    def test_empty_catalog_rejected(self):
        with pytest.raises(ValueError):
            render_system_prompt([])

    def test_unknown_mask_name_rejected(self):
        with pytest.raises(ValueError):
            render_system_prompt([sample_descriptor()], {"Sarcasm"})

    @given(
        st.sets(st.sampled_from(PROMPT_FIELD_NAMES)),
        st.sets(st.sampled_from(PROMPT_FIELD_NAMES)),
    )
    def test_wider_mask_yields_subdocument(self, smaller, extra):
        larger = smaller | extra
        catalog = build_default_registry().catalog()
        lines_small = render_system_prompt(catalog, smaller).splitlines()
        lines_large = render_system_prompt(catalog, larger).splitlines()
        # every line of the more-masked prompt appears, in order, in the other
        it = iter(lines_small)
        assert all(line in it for line in lines_large)


class TestExtractParams:
    def test_bbox_accepted(self):
        desc = ToolDescriptor(
            name="showOnMap",
            description="d",
            params=(ParamSpec("bbox", "bbox", True, "area"),),
        )
        action = AgentAction(
            kind="tool_call",
            tool_name="showOnMap",
            arguments={"bbox": [-111.9431, 33.4154, -111.9239, 33.4280]},
        )
        params = extract_params(desc, action)
        assert params["bbox"] == [-111.9431, 33.4154, -111.9239, 33.4280]

    def test_bbox_wrong_arity(self):
        desc = ToolDescriptor(
            name="showOnMap",
            description="d",
            params=(ParamSpec("bbox", "bbox", True, "area"),),
        )
        action = AgentAction(
            kind="tool_call", tool_name="showOnMap", arguments={"bbox": [33.4, -111.9]}
        )
        with pytest.raises(TypeMismatch):
            extract_params(desc, action)

    def test_missing_required_param_listed(self):
        desc = sample_descriptor()
        action = AgentAction(kind="tool_call", tool_name=desc.name, arguments={})
        with pytest.raises(MissingParams) as excinfo:
            extract_params(desc, action)
        assert excinfo.value.missing == ["place"]

    def test_integer_coercion_from_string(self):
        desc = ToolDescriptor(
            name="t",
            description="d",
            params=(ParamSpec("n", "integer", True, "count"),),
        )
        action = AgentAction(kind="tool_call", tool_name="t", arguments={"n": "12"})
        assert extract_params(desc, action)["n"] == 12

    def test_enum_rejects_unknown_value(self):
        desc = ToolDescriptor(
            name="t",
            description="d",
            params=(ParamSpec("mode", "enum", True, "mode", values=("drive", "bike")),),
        )
        action = AgentAction(kind="tool_call", tool_name="t", arguments={"mode": "fly"})
        with pytest.raises(TypeMismatch):
            extract_params(desc, action)

    def test_unknown_arguments_dropped(self):
        desc = sample_descriptor()
        action = AgentAction(
            kind="tool_call",
            tool_name=desc.name,
            arguments={"place": "Tempe", "verbose": True},
        )
        assert extract_params(desc, action) == {"place": "Tempe"}
