"""Gateway behavior: templates, scripted backend, retries, structured output."""

import json

import pytest

from equipcopilot.llm import (
    GatewayConfig,
    LLMGateway,
    PromptRegistry,
    PromptTemplate,
    ReflectionVerdict,
    ScriptExhaustedError,
    StructuredOutputError,
    TemplateError,
    TransportError,
    scripted_backend,
)

NO_SLEEP = lambda _: None


def gateway(backend, **config):
    return LLMGateway(backend, config=GatewayConfig(**config), sleep=NO_SLEEP)


# ----------------------------------------------------------------------
# registry and rendering


def test_default_registry_has_all_templates():
    registry = PromptRegistry.default()
    assert registry.ids() == sorted(
        [
            "ROUTE_INTENT",
            "EXTRACT_REQUIREMENTS",
            "GROUP_REQUIREMENTS",
            "SELECT_OPERATION",
            "SELECT_SUBTYPE",
            "SELECT_EQUIPMENT",
            "REFLECT_SUITABILITY",
            "GENERAL_ANSWER",
        ]
    )


def test_unknown_template_rejected():
    backend = scripted_backend([])
    with pytest.raises(TemplateError, match="NOPE"):
        gateway(backend).complete("NOPE", {})


def test_missing_placeholder_fails_before_any_call():
    backend = scripted_backend([("GENERAL_ANSWER", "hello")])
    with pytest.raises(TemplateError, match="user_text"):
        gateway(backend).complete("GENERAL_ANSWER", {})
    assert backend.calls == []


def test_json_braces_in_template_are_not_placeholders():
    template = PromptTemplate("T", 'Reply {"intent": "general"} for {user_text}.')
    rendered = template.render({"user_text": "hi"})
    assert '{"intent": "general"}' in rendered
    assert "hi" in rendered


# ----------------------------------------------------------------------
# scripted backend contract


def test_script_single_entry():
    backend = scripted_backend([("SELECT_OPERATION", '{"operation_id": "handling"}')])
    reply = gateway(backend).complete_structured(
        "SELECT_OPERATION",
        {"equipment_class": "robot", "requirements_text": "-", "operations_text": "-", "correction": ""},
    )
    assert reply == {"operation_id": "handling"}
    assert backend.unconsumed == []


def test_script_mismatch_is_exhaustion():
    backend = scripted_backend([("SELECT_OPERATION", "x")])
    with pytest.raises(ScriptExhaustedError):
        gateway(backend).complete("GENERAL_ANSWER", {"user_text": "hi"})


def test_script_fifo_order_for_identical_matchers():
    backend = scripted_backend([("GENERAL_ANSWER", "first"), ("GENERAL_ANSWER", "second")])
    g = gateway(backend)
    assert g.complete("GENERAL_ANSWER", {"user_text": "a"}) == "first"
    assert g.complete("GENERAL_ANSWER", {"user_text": "b"}) == "second"


def test_script_substring_matcher():
    backend = scripted_backend(
        [
            (("GENERAL_ANSWER", "feeders"), "about feeders"),
            (("GENERAL_ANSWER", None), "fallback"),
        ]
    )
    g = gateway(backend)
    assert g.complete("GENERAL_ANSWER", {"user_text": "tell me about feeders"}) == "about feeders"
    assert g.complete("GENERAL_ANSWER", {"user_text": "anything"}) == "fallback"


# ----------------------------------------------------------------------
# complete


def test_context_passages_labeled_and_embedded():
    # The scripted response echoes the rendered prompt back.
    backend = scripted_backend([("GENERAL_ANSWER", lambda req: req.prompt)])
    exchanges = []
    reply = gateway(backend).complete(
        "GENERAL_ANSWER",
        {"user_text": "what is a bowl feeder?"},
        context=[("feeders.md#00001", "A bowl feeder conveys parts up a spiral track.")],
        sink=exchanges.append,
    )
    assert "A bowl feeder conveys parts up a spiral track." in reply
    assert "[source: feeders.md#00001]" in reply
    assert len(exchanges) == 1
    assert exchanges[0].attempt == 1


def test_transport_retry_succeeds_on_third_attempt():
    backend = scripted_backend(
        [
            ("GENERAL_ANSWER", TransportError("down")),
            ("GENERAL_ANSWER", TransportError("still down")),
            ("GENERAL_ANSWER", "recovered"),
        ]
    )
    exchanges = []
    reply = gateway(backend, transport_retries=3).complete(
        "GENERAL_ANSWER", {"user_text": "hi"}, sink=exchanges.append
    )
    assert reply == "recovered"
    assert exchanges[0].transport_attempts == 3


def test_transport_exhaustion_raises():
    backend = scripted_backend([("GENERAL_ANSWER", TransportError("down"))] * 3)
    with pytest.raises(TransportError):
        gateway(backend, transport_retries=3).complete("GENERAL_ANSWER", {"user_text": "hi"})


# ----------------------------------------------------------------------
# complete_structured


def test_structured_parses_requirement_groups():
    payload = {
        "groups": [
            {
                "equipment_class": "feeder",
                "requirements": [{"key": "part_size_max", "comparator": ">=", "value": 25, "unit": "mm"}],
            }
        ]
    }
    backend = scripted_backend([("GROUP_REQUIREMENTS", json.dumps(payload))])
    parsed = gateway(backend).complete_structured(
        "GROUP_REQUIREMENTS", {"requirements_json": "[]"}
    )
    assert parsed == payload


def test_structured_retry_after_invalid_json():
    backend = scripted_backend(
        [
            ("ROUTE_INTENT", "not json"),
            ("ROUTE_INTENT", '{"intent": "selection"}'),
        ]
    )
    exchanges = []
    parsed = gateway(backend).complete_structured(
        "ROUTE_INTENT", {"user_text": "select a feeder"}, sink=exchanges.append
    )
    assert parsed == {"intent": "selection"}
    assert [e.attempt for e in exchanges] == [1, 2]
    assert "could not be used" in exchanges[1].rendered_prompt


def test_structured_retry_after_schema_violation():
    backend = scripted_backend(
        [
            ("ROUTE_INTENT", '{"intent": "maybe"}'),
            ("ROUTE_INTENT", '{"intent": "general"}'),
        ]
    )
    parsed = gateway(backend).complete_structured("ROUTE_INTENT", {"user_text": "hi"})
    assert parsed == {"intent": "general"}


def test_structured_accepts_fenced_json():
    backend = scripted_backend([("ROUTE_INTENT", '```json\n{"intent": "general"}\n```')])
    parsed = gateway(backend).complete_structured("ROUTE_INTENT", {"user_text": "hi"})
    assert parsed == {"intent": "general"}


def test_structured_requires_schema():
    backend = scripted_backend([])
    with pytest.raises(TemplateError, match="no output schema"):
        gateway(backend).complete_structured("GENERAL_ANSWER", {"user_text": "hi"})


def test_structured_exhaustion_carries_attempts():
    backend = scripted_backend([("ROUTE_INTENT", "junk")] * 3)
    with pytest.raises(StructuredOutputError) as err:
        gateway(backend, max_parse_retries=2).complete_structured(
            "ROUTE_INTENT", {"user_text": "hi"}
        )
    assert err.value.attempts == ["junk", "junk", "junk"]


def test_postparse_value_error_retries():
    backend = scripted_backend(
        [
            ("ROUTE_INTENT", '{"intent": "general"}'),
            ("ROUTE_INTENT", '{"intent": "selection"}'),
        ]
    )

    def postparse(parsed):
        if parsed["intent"] == "general":
            raise ValueError("wanted selection")
        return parsed["intent"]

    result = gateway(backend).complete_structured(
        "ROUTE_INTENT", {"user_text": "hi"}, postparse=postparse
    )
    assert result == "selection"


# ----------------------------------------------------------------------
# prompt budget


def test_budget_truncates_context_last_first():
    backend = scripted_backend([("GENERAL_ANSWER", lambda req: req.prompt)])
    exchanges = []
    long_a = "A" * 300
    long_b = "B" * 300
    g = gateway(backend, prompt_budget=900)
    reply = g.complete(
        "GENERAL_ANSWER",
        {"user_text": "short question"},
        context=[("c-a", long_a), ("c-b", long_b)],
        sink=exchanges.append,
    )
    assert len(exchanges[0].rendered_prompt) <= 900
    assert exchanges[0].truncated_context == ["c-b"]
    assert long_a in reply and long_b not in reply


# ----------------------------------------------------------------------
# determinism and verdicts


def test_determinism_excluding_latency():
    def run():
        backend = scripted_backend(
            [("ROUTE_INTENT", '{"intent": "general"}'), ("GENERAL_ANSWER", "hello")]
        )
        exchanges = []
        g = gateway(backend)
        g.complete_structured("ROUTE_INTENT", {"user_text": "q"}, sink=exchanges.append)
        g.complete("GENERAL_ANSWER", {"user_text": "q"}, sink=exchanges.append)
        stripped = []
        for e in exchanges:
            d = e.to_dict()
            d.pop("latency")
            stripped.append(d)
        return stripped

    assert run() == run()


def test_reflection_verdict_invariant():
    with pytest.raises(ValueError):
        ReflectionVerdict(suitable=False)
    verdict = ReflectionVerdict(suitable=False, missing_information=("payload",))
    assert verdict.missing_information == ("payload",)
    assert ReflectionVerdict(suitable=True).to_dict()["suitable"] is True
