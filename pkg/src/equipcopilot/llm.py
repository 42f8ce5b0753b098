"""LLM access: prompt templates, structured output with retry, test backends.

Every call goes through a template from the registry. Templates with an
output schema force the model to answer in JSON, which is validated and
re-prompted on failure; free-text templates pass the completion through.
The scripted backend makes whole conversations reproducible in tests, and
the live backend speaks the OpenAI-compatible chat-completions protocol.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import jsonschema

TEMPLATE_IDS = (
    "ROUTE_INTENT",
    "EXTRACT_REQUIREMENTS",
    "GROUP_REQUIREMENTS",
    "SELECT_OPERATION",
    "SELECT_SUBTYPE",
    "SELECT_EQUIPMENT",
    "REFLECT_SUITABILITY",
    "GENERAL_ANSWER",
)

_PLACEHOLDER = re.compile(r"\{([a-z_][a-z0-9_]*)\}")


class LLMError(Exception):
    """Base class for gateway failures."""


class TemplateError(LLMError):
    """Unknown template or unbound placeholder."""


class TransportError(LLMError):
    """The completion backend could not be reached. Retryable."""


class StructuredOutputError(LLMError):
    """The model never produced schema-valid output within the retry budget."""

    def __init__(self, message: str, attempts: Sequence[str] = ()):
        super().__init__(message)
        self.attempts = list(attempts)


class ScriptExhaustedError(LLMError):
    """A scripted backend received a call it has no entry for."""


@dataclass(frozen=True)
class PromptTemplate:
    """A pre-prompt: fixed instruction text with named placeholders."""

    id: str
    system_text: str
    output_schema: Mapping[str, Any] | None = None

    def placeholders(self) -> set[str]:
        return set(_PLACEHOLDER.findall(self.system_text))

    def render(self, variables: Mapping[str, Any]) -> str:
        missing = self.placeholders() - set(variables)
        if missing:
            raise TemplateError(
                f"template {self.id}: unbound placeholders {sorted(missing)}"
            )
        return _PLACEHOLDER.sub(lambda m: str(variables[m.group(1)]), self.system_text)


class PromptRegistry:
    """Lookup table of prompt templates, normally loaded from package data."""

    def __init__(self, templates: Sequence[PromptTemplate]):
        self._templates = {t.id: t for t in templates}

    def get(self, template_id: str) -> PromptTemplate:
        template = self._templates.get(template_id)
        if template is None:
            raise TemplateError(f"unknown template {template_id!r}")
        return template

    def ids(self) -> list[str]:
        return sorted(self._templates)

    @classmethod
    def from_file(cls, path: str | Path) -> "PromptRegistry":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        templates = [
            PromptTemplate(
                id=entry["id"],
                system_text=entry["system_text"],
                output_schema=entry.get("output_schema"),
            )
            for entry in raw["templates"]
        ]
        return cls(templates)

    @classmethod
    def default(cls) -> "PromptRegistry":
        from importlib.resources import files

        return cls.from_file(files("equipcopilot").joinpath("data/prompts.json"))  # type: ignore[arg-type]


@dataclass
class LLMExchange:
    """Trace record of one logical model call.

    ``attempt`` counts parse attempts (1-based) for structured templates;
    ``transport_attempts`` counts how many times the backend had to be
    called before this attempt got a response through.
    """

    template_id: str
    rendered_prompt: str
    raw_response: str
    parsed: Any | None
    latency: float
    attempt: int
    transport_attempts: int = 1
    truncated_context: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "template_id": self.template_id,
            "rendered_prompt": self.rendered_prompt,
            "raw_response": self.raw_response,
            "parsed": self.parsed,
            "latency": self.latency,
            "attempt": self.attempt,
            "transport_attempts": self.transport_attempts,
            "truncated_context": list(self.truncated_context),
        }


@dataclass(frozen=True)
class ReflectionVerdict:
    """Self-evaluation of a selection: suitable, or what is missing."""

    suitable: bool
    missing_information: tuple[str, ...] = ()
    rationale: str = ""

    def __post_init__(self) -> None:
        if not self.suitable and not self.missing_information and not self.rationale:
            raise ValueError("an unsuitable verdict needs missing information or a rationale")

    def to_dict(self) -> dict[str, Any]:
        return {
            "suitable": self.suitable,
            "missing_information": list(self.missing_information),
            "rationale": self.rationale,
        }


@dataclass(frozen=True)
class BackendRequest:
    """What a backend sees for one call."""

    template_id: str
    prompt: str
    temperature: float


ScriptResponse = "str | Exception | Callable[[BackendRequest], str]"


@dataclass
class ScriptEntry:
    """One scripted reply: matches a template id (plus optional prompt substring)."""

    template_id: str
    response: Any  # str, Exception to raise, or callable(request) -> str
    contains: str | None = None
    consumed: bool = False

    def matches(self, request: BackendRequest) -> bool:
        if self.template_id != request.template_id:
            return False
        return self.contains is None or self.contains in request.prompt


class ScriptedBackend:
    """Deterministic backend that plays back a fixed script.

    Each call consumes the first unconsumed entry whose matcher matches;
    a call with no matching entry raises ScriptExhaustedError, which is a
    test-failure signal, not a recoverable condition.
    """

    name = "scripted"

    def __init__(self, entries: Sequence[ScriptEntry]):
        self.entries = list(entries)
        self.calls: list[BackendRequest] = []

    def complete(self, request: BackendRequest) -> str:
        self.calls.append(request)
        for entry in self.entries:
            if not entry.consumed and entry.matches(request):
                entry.consumed = True
                response = entry.response
                if isinstance(response, Exception):
                    raise response
                if callable(response):
                    return response(request)
                return str(response)
        raise ScriptExhaustedError(
            f"no scripted response for template {request.template_id!r} "
            f"(call #{len(self.calls)})"
        )

    @property
    def unconsumed(self) -> list[ScriptEntry]:
        return [e for e in self.entries if not e.consumed]


def scripted_backend(
    script: Sequence[tuple[str | tuple[str, str | None], Any]],
) -> ScriptedBackend:
    """Build a scripted backend from (matcher, response) pairs.

    A matcher is either a template id or a (template_id, prompt-substring)
    pair; the response is a string, an exception to raise, or a callable
    receiving the BackendRequest.
    """
    entries = []
    for matcher, response in script:
        if isinstance(matcher, str):
            entries.append(ScriptEntry(template_id=matcher, response=response))
        else:
            template_id, contains = matcher
            entries.append(ScriptEntry(template_id=template_id, response=response, contains=contains))
    return ScriptedBackend(entries)


def script_entries_from_raw(raw_entries: Sequence[Mapping[str, Any]]) -> list[ScriptEntry]:
    """Parse script entries from their JSON form.

    Each entry carries ``template_id``, an optional ``contains`` matcher,
    and either ``response`` (string; the marker ``<<TRANSPORT_ERROR>>``
    raises a transport failure) or ``response_json`` (object, serialized).
    """
    entries = []
    for raw in raw_entries:
        if "response_json" in raw:
            response: Any = json.dumps(raw["response_json"])
        else:
            response = raw["response"]
            if response == "<<TRANSPORT_ERROR>>":
                response = TransportError("scripted transport failure")
        entries.append(
            ScriptEntry(
                template_id=raw["template_id"],
                response=response,
                contains=raw.get("contains"),
            )
        )
    return entries


def load_script(path: str | Path) -> ScriptedBackend:
    """Load a replay script (a JSON array of entries) into a backend."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    backend = ScriptedBackend(script_entries_from_raw(raw))
    backend.name = "replay"  # type: ignore[misc]
    return backend


class LiveBackend:
    """OpenAI-compatible chat-completions client."""

    name = "live"

    def __init__(
        self,
        api_base: str,
        api_key: str = "",
        model: str = "gpt-4o",
        timeout: float = 60.0,
    ):
        self.api_base = api_base.rstrip("/")
        self.api_key = api_key
        self.model = model
        self.timeout = timeout

    def complete(self, request: BackendRequest) -> str:
        import httpx

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "messages": [{"role": "system", "content": request.prompt}],
            "temperature": request.temperature,
        }
        try:
            response = httpx.post(
                f"{self.api_base}/chat/completions",
                json=body,
                headers=headers,
                timeout=self.timeout,
            )
            response.raise_for_status()
            payload = response.json()
            return payload["choices"][0]["message"]["content"]
        except Exception as exc:
            raise TransportError(f"chat completion against {self.api_base} failed: {exc}") from exc


@dataclass(frozen=True)
class GatewayConfig:
    """Retry and rendering limits for the gateway."""

    max_parse_retries: int = 2
    transport_retries: int = 3
    backoff_base: float = 0.2
    prompt_budget: int = 16000
    temperature: float = 0.0
    answer_temperature: float = 0.0


_RETRY_SUFFIX = (
    "\n\nYour previous reply could not be used: {error}\n"
    "Reply again with only valid JSON matching the required schema."
)

_FENCE = re.compile(r"^```(?:json)?\s*|\s*```$")


def _strip_fences(text: str) -> str:
    return _FENCE.sub("", text.strip())


class LLMGateway:
    """Template-driven access to a completion backend.

    ``sink`` callbacks receive one LLMExchange per backend round-trip, in
    call order, which is how sessions build their traces.
    """

    def __init__(
        self,
        backend: Any,
        registry: PromptRegistry | None = None,
        config: GatewayConfig | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.backend = backend
        self.registry = registry or PromptRegistry.default()
        self.config = config or GatewayConfig()
        self._sleep = sleep

    # ------------------------------------------------------------------
    # rendering

    def _render(
        self,
        template: PromptTemplate,
        variables: Mapping[str, Any],
        context: Sequence[tuple[str, str]],
    ) -> tuple[str, list[str]]:
        """Render the prompt with labeled context passages under the budget.

        Context passages are appended verbatim, each labeled with its
        source chunk id. When the rendered prompt would exceed the
        character budget, passages are dropped last-first and their ids
        reported back.
        """
        base = template.render(variables)
        kept = list(context)
        dropped: list[str] = []

        def assemble(passages: Sequence[tuple[str, str]]) -> str:
            if not passages:
                return base
            blocks = [f"[source: {chunk_id}]\n{text}" for chunk_id, text in passages]
            return base + "\n\nContext passages:\n\n" + "\n\n".join(blocks)

        prompt = assemble(kept)
        while kept and len(prompt) > self.config.prompt_budget:
            chunk_id, _ = kept.pop()
            dropped.append(chunk_id)
            prompt = assemble(kept)
        return prompt, dropped

    def _call_backend(self, template_id: str, prompt: str, temperature: float) -> tuple[str, int]:
        """Call the backend with bounded retries on transport errors."""
        request = BackendRequest(template_id=template_id, prompt=prompt, temperature=temperature)
        last_error: TransportError | None = None
        for attempt in range(1, self.config.transport_retries + 1):
            try:
                return self.backend.complete(request), attempt
            except TransportError as exc:
                last_error = exc
                if attempt < self.config.transport_retries:
                    self._sleep(self.config.backoff_base * (2 ** (attempt - 1)))
        raise TransportError(
            f"backend failed after {self.config.transport_retries} attempts: {last_error}"
        ) from last_error

    def _temperature_for(self, template: PromptTemplate) -> float:
        if template.output_schema is None:
            return self.config.answer_temperature
        return self.config.temperature

    # ------------------------------------------------------------------
    # public operations

    def complete(
        self,
        template_id: str,
        variables: Mapping[str, Any] | None = None,
        context: Sequence[tuple[str, str]] = (),
        sink: Callable[[LLMExchange], None] | None = None,
    ) -> str:
        """Free-text completion for a template."""
        template = self.registry.get(template_id)
        prompt, dropped = self._render(template, variables or {}, context)
        started = time.perf_counter()
        text, transport_attempts = self._call_backend(template_id, prompt, self._temperature_for(template))
        exchange = LLMExchange(
            template_id=template_id,
            rendered_prompt=prompt,
            raw_response=text,
            parsed=None,
            latency=time.perf_counter() - started,
            attempt=1,
            transport_attempts=transport_attempts,
            truncated_context=dropped,
        )
        if sink:
            sink(exchange)
        return text

    def complete_structured(
        self,
        template_id: str,
        variables: Mapping[str, Any] | None = None,
        context: Sequence[tuple[str, str]] = (),
        sink: Callable[[LLMExchange], None] | None = None,
        postparse: Callable[[Any], Any] | None = None,
    ) -> Any:
        """JSON completion validated against the template's output schema.

        A reply that fails to parse or validate triggers a re-prompt with
        the error appended, up to max_parse_retries times; exhaustion
        raises StructuredOutputError carrying every raw attempt. An
        optional ``postparse`` callable converts the schema-valid JSON to
        a domain value; a ValueError from it counts as a validation
        failure and re-prompts too.
        """
        template = self.registry.get(template_id)
        if template.output_schema is None:
            raise TemplateError(f"template {template_id} has no output schema")
        base_prompt, dropped = self._render(template, variables or {}, context)
        prompt = base_prompt
        raw_attempts: list[str] = []
        max_attempts = self.config.max_parse_retries + 1
        for attempt in range(1, max_attempts + 1):
            started = time.perf_counter()
            text, transport_attempts = self._call_backend(
                template_id, prompt, self._temperature_for(template)
            )
            raw_attempts.append(text)
            parsed: Any | None = None
            result: Any | None = None
            error: str | None = None
            try:
                parsed = json.loads(_strip_fences(text))
                jsonschema.validate(parsed, template.output_schema)
                result = postparse(parsed) if postparse else parsed
            except json.JSONDecodeError as exc:
                parsed = None
                error = f"not valid JSON: {exc}"
            except jsonschema.ValidationError as exc:
                parsed = None
                error = f"schema violation: {exc.message}"
            except ValueError as exc:
                error = f"invalid content: {exc}"
            exchange = LLMExchange(
                template_id=template_id,
                rendered_prompt=prompt,
                raw_response=text,
                parsed=parsed,
                latency=time.perf_counter() - started,
                attempt=attempt,
                transport_attempts=transport_attempts,
                truncated_context=dropped if attempt == 1 else [],
            )
            if sink:
                sink(exchange)
            if error is None:
                return result
            prompt = base_prompt + _RETRY_SUFFIX.format(error=error)
        raise StructuredOutputError(
            f"template {template_id}: no schema-valid output in {max_attempts} attempts",
            attempts=raw_attempts,
        )
