"""The copilot's state machine: routing, selection pipeline, reflection, answers.

Each user turn drives the machine until it blocks on user input again
(a clarification question) or reaches Done (an answer). Every model call,
retrieval, catalog query, and phase transition is appended to the session
trace, so a finished session can be audited step by step.

The selection pipeline runs per requirement group. When one message needs
several equipment classes, each pipeline phase processes all still-open
groups in declaration order before the machine advances, which keeps the
transition table closed while still giving every group the full
operation -> subtype -> equipment -> reflection treatment. An unsuitable
reflection triggers a clarification question and, on the user's reply, a
restart at operation determination; after ``max_iterations`` passes the
machine emits a best-effort answer instead of looping.
"""

from __future__ import annotations

import enum
import json
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from equipcopilot.catalog import (
    AnnotatedRecord,
    Catalog,
    ElementaryOperation,
    Requirement,
    RequirementGroup,
    satisfaction_ratio,
)
from equipcopilot.llm import LLMExchange, LLMGateway, ReflectionVerdict, StructuredOutputError
from equipcopilot.retrieval import RetrievalResult, VectorIndex


class Phase(enum.Enum):
    """Phases of the copilot state machine."""

    AWAITING_INPUT = "AwaitingInput"
    ROUTING_INTENT = "RoutingIntent"
    EXTRACTING_REQUIREMENTS = "ExtractingRequirements"
    GROUPING_REQUIREMENTS = "GroupingRequirements"
    DETERMINING_OPERATION = "DeterminingOperation"
    SELECTING_SUBTYPE = "SelectingSubtype"
    SELECTING_EQUIPMENT = "SelectingEquipment"
    EVALUATING_SELECTION = "EvaluatingSelection"
    AWAITING_CLARIFICATION = "AwaitingClarification"
    RETRIEVING_KNOWLEDGE = "RetrievingKnowledge"
    GENERATING_ANSWER = "GeneratingAnswer"
    DONE = "Done"


TRACE_KINDS = ("llm_exchange", "retrieval", "catalog_query", "transition", "user_message", "answer")

#: Trigger recorded when a failed turn resets the session; such resets are
#: an error escape hatch, not a transition-table edge.
ERROR_RESET_TRIGGER = "error_reset"

FALLBACK_REPLY = (
    "I am sorry, I could not complete that request because the language model "
    "did not produce usable output. The session has been reset; please try again."
)

BEST_EFFORT_CAVEAT = (
    "Note: no fully suitable selection could be confirmed within the iteration "
    "budget; the following is a best-effort proposal."
)


class TurnStateError(Exception):
    """A turn was attempted in a phase that does not accept user input."""


@dataclass
class TraceEvent:
    """One auditable step of a session."""

    sequence_no: int
    timestamp: str
    phase: str
    kind: str
    payload: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {
            "sequence_no": self.sequence_no,
            "timestamp": self.timestamp,
            "phase": self.phase,
            "kind": self.kind,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "TraceEvent":
        return cls(
            sequence_no=raw["sequence_no"],
            timestamp=raw["timestamp"],
            phase=raw["phase"],
            kind=raw["kind"],
            payload=dict(raw["payload"]),
        )


class TransitionTable:
    """The closed edge set of the state machine, loadable from JSON."""

    def __init__(self, edges: Sequence[Mapping[str, str]]):
        self.edges: list[dict[str, str]] = [dict(e) for e in edges]
        self._pairs = {(e["from"], e["to"]) for e in self.edges}

    def triples(self) -> set[tuple[str, str, str]]:
        return {(e["from"], e["event"], e["to"]) for e in self.edges}

    def allows(self, source: Phase, target: Phase) -> bool:
        return (source.value, target.value) in self._pairs

    def to_dict(self) -> dict[str, Any]:
        return {"edges": [dict(e) for e in self.edges]}

    @classmethod
    def from_file(cls, path: str | Path) -> "TransitionTable":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(raw["edges"])

    @classmethod
    def default(cls) -> "TransitionTable":
        from importlib.resources import files

        return cls.from_file(files("equipcopilot").joinpath("data/transition_table.json"))  # type: ignore[arg-type]


def transition_table() -> set[tuple[str, str, str]]:
    """The default edge set as (from, event, to) triples."""
    return TransitionTable.default().triples()


@dataclass
class GroupProgress:
    """Pipeline bookkeeping for one requirement group."""

    operation: ElementaryOperation | None = None
    subtype: str | None = None
    selection: list[AnnotatedRecord] = field(default_factory=list)
    verdict: ReflectionVerdict | None = None
    blocked_reason: str | None = None
    resolved: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "operation_id": self.operation.id if self.operation else None,
            "subtype": self.subtype,
            "selection": [_selection_entry(a) for a in self.selection],
            "verdict": self.verdict.to_dict() if self.verdict else None,
            "blocked_reason": self.blocked_reason,
            "resolved": self.resolved,
        }


def _selection_entry(annotated: AnnotatedRecord) -> dict[str, Any]:
    entry = annotated.to_dict()
    entry["record"] = annotated.record.to_dict()
    entry["satisfaction_ratio"] = satisfaction_ratio(annotated)
    return entry


@dataclass
class SessionState:
    """Everything a session carries between turns, including its full trace."""

    session_id: str
    phase: Phase = Phase.AWAITING_INPUT
    history: list[tuple[str, str]] = field(default_factory=list)
    requirements: list[Requirement] = field(default_factory=list)
    groups: list[RequirementGroup] = field(default_factory=list)
    group_progress: list[GroupProgress] = field(default_factory=list)
    selected_operation: ElementaryOperation | None = None
    selected_subtype: str | None = None
    selected_equipment: list[AnnotatedRecord] = field(default_factory=list)
    verdicts: list[ReflectionVerdict] = field(default_factory=list)
    iteration: int = 0
    trace: list[TraceEvent] = field(default_factory=list)

    def to_snapshot(self) -> dict[str, Any]:
        """JSON-ready, read-only view of the whole session."""
        return {
            "session_id": self.session_id,
            "phase": self.phase.value,
            "history": [[role, text] for role, text in self.history],
            "requirements": [r.to_dict() for r in self.requirements],
            "groups": [g.to_dict() for g in self.groups],
            "group_progress": [gp.to_dict() for gp in self.group_progress],
            "selected_operation": (
                {
                    "id": self.selected_operation.id,
                    "name": self.selected_operation.name,
                    "applicable_class": self.selected_operation.applicable_class.value,
                }
                if self.selected_operation
                else None
            ),
            "selected_subtype": self.selected_subtype,
            "selected_equipment": [_selection_entry(a) for a in self.selected_equipment],
            "verdicts": [v.to_dict() for v in self.verdicts],
            "iteration": self.iteration,
            "trace": [ev.to_dict() for ev in self.trace],
        }


def export_trace_jsonl(state: SessionState) -> str:
    """Serialize the trace as JSON lines, one event per line."""
    return "".join(json.dumps(ev.to_dict(), sort_keys=True) + "\n" for ev in state.trace)


def import_trace_jsonl(text: str) -> list[TraceEvent]:
    return [TraceEvent.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]


class _Recorder:
    """Appends trace events with monotonically increasing sequence numbers."""

    def __init__(self, state: SessionState, clock: Callable[[], float] = time.time):
        self.state = state
        self._clock = clock

    def emit(self, kind: str, payload: dict[str, Any], phase: Phase | None = None) -> TraceEvent:
        stamp = datetime.fromtimestamp(self._clock(), tz=timezone.utc).isoformat()
        event = TraceEvent(
            sequence_no=len(self.state.trace),
            timestamp=stamp,
            phase=(phase or self.state.phase).value,
            kind=kind,
            payload=payload,
        )
        self.state.trace.append(event)
        return event

    def llm_sink(self) -> Callable[[LLMExchange], None]:
        return lambda exchange: self.emit("llm_exchange", exchange.to_dict())


@dataclass(frozen=True)
class OrchestratorConfig:
    max_iterations: int = 3
    top_k: int = 3
    max_candidates: int = 5


class Orchestrator:
    """Drives sessions against a gateway, a catalog snapshot, and an index."""

    def __init__(
        self,
        gateway: LLMGateway,
        catalog: Catalog | Callable[[], Catalog],
        index: VectorIndex | None = None,
        config: OrchestratorConfig | None = None,
        transitions: TransitionTable | None = None,
    ):
        self.gateway = gateway
        self._catalog_source = catalog
        self.index = index
        self.config = config or OrchestratorConfig()
        self.transitions = transitions or TransitionTable.default()

    def _catalog(self) -> Catalog:
        if callable(self._catalog_source):
            return self._catalog_source()
        return self._catalog_source

    def new_state(self, session_id: str | None = None) -> SessionState:
        return SessionState(session_id=session_id or uuid.uuid4().hex)

    # ------------------------------------------------------------------
    # turn driver

    def handle_turn(self, state: SessionState, user_text: str) -> tuple[SessionState, str]:
        """Run the machine until it blocks on user input or reaches Done."""
        if state.phase not in (Phase.AWAITING_INPUT, Phase.AWAITING_CLARIFICATION):
            raise TurnStateError(f"session is in phase {state.phase.value} and cannot take a turn")
        catalog = self._catalog()  # one snapshot for the whole turn
        rec = _Recorder(state)
        rec.emit("user_message", {"text": user_text})
        state.history.append(("user", user_text))
        try:
            if state.phase is Phase.AWAITING_INPUT:
                self._transition(state, rec, Phase.ROUTING_INTENT, "user_message")
                intent, warning = self.route_intent(state, rec, user_text)
                if intent == "general":
                    reply = self._general_path(state, rec, user_text, warning)
                else:
                    reply = self._selection_path(state, rec, catalog, user_text)
            else:
                # Clarification reply: augment requirements, restart the pipeline.
                self._extract_requirements(state, rec, user_text, augment_open_groups=True)
                self._transition(state, rec, Phase.DETERMINING_OPERATION, "user_message")
                state.iteration += 1
                reply = self._selection_pass(state, rec, catalog)
        except StructuredOutputError as exc:
            reply = FALLBACK_REPLY
            rec.emit(
                "transition",
                {
                    "from": state.phase.value,
                    "to": Phase.AWAITING_INPUT.value,
                    "trigger": ERROR_RESET_TRIGGER,
                    "error": str(exc),
                },
            )
            state.phase = Phase.AWAITING_INPUT
        state.history.append(("assistant", reply))
        return state, reply

    def _transition(
        self,
        state: SessionState,
        rec: _Recorder,
        target: Phase,
        trigger: str,
        extra: dict[str, Any] | None = None,
    ) -> None:
        if not self.transitions.allows(state.phase, target):
            raise RuntimeError(
                f"illegal transition {state.phase.value} -> {target.value} ({trigger})"
            )
        payload = {"from": state.phase.value, "to": target.value, "trigger": trigger}
        if extra:
            payload.update(extra)
        rec.emit("transition", payload)
        state.phase = target

    # ------------------------------------------------------------------
    # general path

    def _general_path(
        self, state: SessionState, rec: _Recorder, user_text: str, warning: str | None = None
    ) -> str:
        self._transition(
            state,
            rec,
            Phase.RETRIEVING_KNOWLEDGE,
            "intent_general",
            extra={"warning": warning} if warning else None,
        )
        results = self._retrieve(rec, user_text)
        self._transition(state, rec, Phase.GENERATING_ANSWER, "knowledge_retrieved")
        context = [(r.chunk.id, r.chunk.text) for r in results]
        reply = self.gateway.complete(
            "GENERAL_ANSWER", {"user_text": user_text}, context=context, sink=rec.llm_sink()
        )
        self._transition(state, rec, Phase.DONE, "answer_emitted")
        rec.emit("answer", {"kind": "general", "text": reply, "context_chunks": [r.chunk.id for r in results]})
        return reply

    def _retrieve(self, rec: _Recorder, query: str) -> list[RetrievalResult]:
        if self.index is None:
            return []
        results = self.index.retrieve(query, k=self.config.top_k)
        for rank, result in enumerate(results, start=1):
            rec.emit(
                "retrieval",
                {
                    "query": query,
                    "rank": rank,
                    "chunk_id": result.chunk.id,
                    "doc_id": result.chunk.doc_id,
                    "score": result.score,
                },
            )
        return results

    # ------------------------------------------------------------------
    # selection path

    def _selection_path(self, state: SessionState, rec: _Recorder, catalog: Catalog, user_text: str) -> str:
        self._transition(state, rec, Phase.EXTRACTING_REQUIREMENTS, "intent_selection")
        self._extract_requirements(state, rec, user_text, augment_open_groups=False)
        self._transition(state, rec, Phase.GROUPING_REQUIREMENTS, "requirements_extracted")
        self._group_requirements(state, rec)
        self._transition(state, rec, Phase.DETERMINING_OPERATION, "requirements_grouped")
        state.iteration = 1
        return self._selection_pass(state, rec, catalog)

    def route_intent(
        self, state: SessionState, rec: _Recorder, user_text: str
    ) -> tuple[str, str | None]:
        """Classify the turn as general or selection.

        Unparseable routing output defaults to general, with the failure
        carried as a warning into the following transition event.
        """
        try:
            parsed = self.gateway.complete_structured(
                "ROUTE_INTENT", {"user_text": user_text}, sink=rec.llm_sink()
            )
            return parsed["intent"], None
        except StructuredOutputError as exc:
            return "general", f"intent classification failed, defaulting to general: {exc}"

    def _extract_requirements(
        self, state: SessionState, rec: _Recorder, user_text: str, augment_open_groups: bool
    ) -> list[Requirement]:
        def postparse(parsed: Any) -> list[Requirement]:
            return [Requirement.from_dict(r) for r in parsed["requirements"]]

        extracted = self.gateway.complete_structured(
            "EXTRACT_REQUIREMENTS",
            {"user_text": user_text},
            sink=rec.llm_sink(),
            postparse=postparse,
        )
        state.requirements.extend(extracted)
        if augment_open_groups and extracted:
            for i, group in enumerate(state.groups):
                if not state.group_progress[i].resolved:
                    state.groups[i] = RequirementGroup(
                        equipment_class=group.equipment_class,
                        requirements=group.requirements + tuple(extracted),
                    )
        return extracted

    def _group_requirements(self, state: SessionState, rec: _Recorder) -> None:
        def postparse(parsed: Any) -> list[RequirementGroup]:
            return [RequirementGroup.from_dict(g) for g in parsed["groups"]]

        groups = self.gateway.complete_structured(
            "GROUP_REQUIREMENTS",
            {"requirements_json": json.dumps([r.to_dict() for r in state.requirements])},
            sink=rec.llm_sink(),
            postparse=postparse,
        )
        state.groups = groups
        state.group_progress = [GroupProgress() for _ in groups]

    def _selection_pass(self, state: SessionState, rec: _Recorder, catalog: Catalog) -> str:
        """One full pipeline pass over all unresolved groups."""
        pending = [
            (i, state.groups[i], state.group_progress[i])
            for i in range(len(state.groups))
            if not state.group_progress[i].resolved
        ]
        for _, group, progress in pending:
            progress.blocked_reason = None
            self.determine_operation(state, rec, catalog, group, progress)
        self._transition(state, rec, Phase.SELECTING_SUBTYPE, "operation_determined")
        for _, group, progress in pending:
            if progress.blocked_reason is None:
                self.select_subtype(state, rec, catalog, group, progress)
        self._transition(state, rec, Phase.SELECTING_EQUIPMENT, "subtype_selected")
        for _, group, progress in pending:
            if progress.blocked_reason is None:
                self.select_equipment(state, rec, catalog, group, progress)
        self._transition(state, rec, Phase.EVALUATING_SELECTION, "equipment_selected")
        unsuitable: list[tuple[RequirementGroup, GroupProgress]] = []
        for _, group, progress in pending:
            verdict = self.evaluate_selection(state, rec, group, progress)
            progress.verdict = verdict
            state.verdicts.append(verdict)
            if verdict.suitable:
                progress.resolved = True
            else:
                unsuitable.append((group, progress))
        if not unsuitable:
            self._transition(state, rec, Phase.GENERATING_ANSWER, "verdict_suitable")
            return self.generate_answer(state, rec, best_effort=False)
        if state.iteration < self.config.max_iterations:
            self._transition(state, rec, Phase.AWAITING_CLARIFICATION, "verdict_unsuitable")
            question = self._clarification_question(unsuitable)
            rec.emit(
                "answer",
                {
                    "kind": "clarification",
                    "text": question,
                    "missing_information": [
                        item for _, p in unsuitable for item in (p.verdict.missing_information if p.verdict else ())
                    ],
                },
            )
            return question
        self._transition(state, rec, Phase.GENERATING_ANSWER, "iteration_cap")
        return self.generate_answer(state, rec, best_effort=True)

    # ------------------------------------------------------------------
    # pipeline steps

    def _choose_from_list(
        self,
        rec: _Recorder,
        template_id: str,
        variables: dict[str, Any],
        context: Sequence[tuple[str, str]],
        extract: Callable[[Any], Any],
        validate: Callable[[Any], Any | None],
        describe_allowed: str,
    ) -> Any:
        """Structured choice with one corrective re-prompt for out-of-list answers."""
        variables = dict(variables)
        variables.setdefault("correction", "")
        for corrective in (False, True):
            parsed = self.gateway.complete_structured(
                template_id, variables, context=context, sink=rec.llm_sink()
            )
            choice = extract(parsed)
            valid = validate(choice)
            if valid is not None:
                return valid
            if corrective:
                break
            variables["correction"] = (
                f"\nYour previous answer {choice!r} was not in the allowed list. "
                f"Choose strictly from: {describe_allowed}.\n"
            )
        raise StructuredOutputError(
            f"template {template_id}: answer outside the allowed list after corrective re-prompt"
        )

    def determine_operation(
        self,
        state: SessionState,
        rec: _Recorder,
        catalog: Catalog,
        group: RequirementGroup,
        progress: GroupProgress,
    ) -> ElementaryOperation | None:
        """Pick the elementary operation for a group from the catalog taxonomy."""
        operations = catalog.list_operations(group.equipment_class)
        rec.emit(
            "catalog_query",
            {
                "op": "list_operations",
                "equipment_class": group.equipment_class.value,
                "result": [op.id for op in operations],
            },
        )
        if not operations:
            progress.blocked_reason = (
                f"no elementary operations known for class {group.equipment_class.value}"
            )
            return None
        by_id = {op.id: op for op in operations}
        chosen: ElementaryOperation = self._choose_from_list(
            rec,
            "SELECT_OPERATION",
            {
                "equipment_class": group.equipment_class.value,
                "requirements_text": _requirements_text(group.requirements),
                "operations_text": "\n".join(f"- {op.id}: {op.name} ({op.description})" for op in operations),
            },
            context=(),
            extract=lambda parsed: parsed["operation_id"],
            validate=lambda op_id: by_id.get(str(op_id)),
            describe_allowed=", ".join(sorted(by_id)),
        )
        progress.operation = chosen
        state.selected_operation = chosen
        return chosen

    def select_subtype(
        self,
        state: SessionState,
        rec: _Recorder,
        catalog: Catalog,
        group: RequirementGroup,
        progress: GroupProgress,
    ) -> str | None:
        """Pick a subtype under the chosen operation, grounded by retrieval context."""
        assert progress.operation is not None
        subtypes = catalog.distinct_subtypes(group.equipment_class, progress.operation.id)
        rec.emit(
            "catalog_query",
            {
                "op": "distinct_subtypes",
                "equipment_class": group.equipment_class.value,
                "operation_id": progress.operation.id,
                "result": subtypes,
            },
        )
        if not subtypes:
            progress.blocked_reason = (
                f"no catalog records for operation {progress.operation.name} "
                f"in class {group.equipment_class.value}"
            )
            return None
        if len(subtypes) == 1:
            # A singleton list needs no model call; the answer is forced.
            progress.subtype = subtypes[0]
            state.selected_subtype = subtypes[0]
            return subtypes[0]
        query = " ".join(
            [group.equipment_class.value, progress.operation.name]
            + [r.describe() for r in group.requirements]
        )
        results = self._retrieve(rec, query)
        by_norm = {s.strip().lower(): s for s in subtypes}
        chosen: str = self._choose_from_list(
            rec,
            "SELECT_SUBTYPE",
            {
                "equipment_class": group.equipment_class.value,
                "operation_name": progress.operation.name,
                "requirements_text": _requirements_text(group.requirements),
                "subtypes_text": "\n".join(f"- {s}" for s in subtypes),
            },
            context=[(r.chunk.id, r.chunk.text) for r in results],
            extract=lambda parsed: parsed["subtype"],
            validate=lambda s: by_norm.get(str(s).strip().lower()),
            describe_allowed=", ".join(subtypes),
        )
        progress.subtype = chosen
        state.selected_subtype = chosen
        return chosen

    def select_equipment(
        self,
        state: SessionState,
        rec: _Recorder,
        catalog: Catalog,
        group: RequirementGroup,
        progress: GroupProgress,
    ) -> list[AnnotatedRecord]:
        """Pick concrete records from the constraint-annotated candidate list."""
        assert progress.subtype is not None
        candidates = catalog.query_equipment(
            group.equipment_class, progress.subtype, list(group.requirements)
        )
        rec.emit(
            "catalog_query",
            {
                "op": "query_equipment",
                "equipment_class": group.equipment_class.value,
                "subtype": progress.subtype,
                "requirements": [r.to_dict() for r in group.requirements],
                "result": [a.to_dict() for a in candidates],
            },
        )
        if not candidates:
            progress.blocked_reason = "no catalog match for subtype"
            progress.selection = []
            return []
        shortlist = candidates[: self.config.max_candidates]
        by_id = {a.record.id: a for a in shortlist}
        rank = {a.record.id: i for i, a in enumerate(shortlist)}

        def validate(record_ids: Any) -> list[AnnotatedRecord] | None:
            if not isinstance(record_ids, list) or not record_ids:
                return None
            if any(str(rid) not in by_id for rid in record_ids):
                return None
            unique = list(dict.fromkeys(str(rid) for rid in record_ids))
            return sorted((by_id[rid] for rid in unique), key=lambda a: rank[a.record.id])

        chosen: list[AnnotatedRecord] = self._choose_from_list(
            rec,
            "SELECT_EQUIPMENT",
            {
                "equipment_class": group.equipment_class.value,
                "subtype": progress.subtype,
                "requirements_text": _requirements_text(group.requirements),
                "candidates_text": _candidates_text(shortlist),
            },
            context=(),
            extract=lambda parsed: parsed["record_ids"],
            validate=validate,
            describe_allowed=", ".join(a.record.id for a in shortlist),
        )
        progress.selection = chosen
        state.selected_equipment = [
            a for gp in state.group_progress for a in gp.selection
        ]
        return chosen

    def evaluate_selection(
        self,
        state: SessionState,
        rec: _Recorder,
        group: RequirementGroup,
        progress: GroupProgress,
    ) -> ReflectionVerdict:
        """Reflect on a group's selection; blocked groups short-circuit to unsuitable."""
        if progress.blocked_reason is not None:
            return ReflectionVerdict(
                suitable=False,
                missing_information=(progress.blocked_reason,),
                rationale="selection could not be completed",
            )

        def postparse(parsed: Any) -> ReflectionVerdict:
            missing = tuple(str(m) for m in parsed.get("missing_information", ()))
            rationale = str(parsed.get("rationale", ""))
            if not parsed["suitable"] and not missing and not rationale:
                rationale = "no rationale given"
            return ReflectionVerdict(
                suitable=bool(parsed["suitable"]),
                missing_information=missing,
                rationale=rationale,
            )

        try:
            return self.gateway.complete_structured(
                "REFLECT_SUITABILITY",
                {
                    "equipment_class": group.equipment_class.value,
                    "requirements_text": _requirements_text(group.requirements),
                    "selection_text": _candidates_text(progress.selection),
                },
                sink=rec.llm_sink(),
                postparse=postparse,
            )
        except StructuredOutputError:
            return ReflectionVerdict(suitable=False, rationale="reflection unavailable")

    # ------------------------------------------------------------------
    # answers

    def generate_answer(self, state: SessionState, rec: _Recorder, best_effort: bool) -> str:
        """Render the selection summary, mirror it into the state, and finish."""
        lines: list[str] = []
        selected: list[dict[str, Any]] = []
        merged: list[AnnotatedRecord] = []
        for i, group in enumerate(state.groups):
            progress = state.group_progress[i]
            if progress.selection:
                for annotated in progress.selection:
                    record = annotated.record
                    total = len(group.requirements)
                    sat = len(annotated.satisfied)
                    detail = ""
                    if total:
                        names = ", ".join(
                            group.requirements[j].key for j in sorted(annotated.satisfied)
                        )
                        detail = f" (satisfied {sat}/{total} requirements{': ' + names if names else ''})"
                    lines.append(
                        f"Brand: {record.brand} Type: {record.subtype.title()} "
                        f"Model: {record.model}{detail}"
                    )
                    selected.append(_selection_entry(annotated))
                    merged.append(annotated)
            else:
                reason = progress.blocked_reason or "no selection"
                lines.append(
                    f"No {group.equipment_class.value} equipment could be proposed ({reason})."
                )
        state.selected_equipment = merged
        parts = []
        if best_effort:
            parts.append(BEST_EFFORT_CAVEAT)
        if any(gp.selection for gp in state.group_progress):
            parts.append("Recommended equipment:")
        parts.extend(lines)
        reply = "\n".join(parts) if parts else "No equipment could be proposed."
        self._transition(state, rec, Phase.DONE, "answer_emitted")
        rec.emit(
            "answer",
            {
                "kind": "best_effort" if best_effort else "selection",
                "text": reply,
                "selected": selected,
                "caveat": best_effort,
            },
        )
        return reply

    def _clarification_question(
        self, unsuitable: Sequence[tuple[RequirementGroup, GroupProgress]]
    ) -> str:
        asks = []
        for group, progress in unsuitable:
            verdict = progress.verdict
            items = list(verdict.missing_information) if verdict else []
            if not items and verdict and verdict.rationale:
                items = [verdict.rationale]
            if not items:
                items = ["any further constraints that matter"]
            asks.append(f"for the {group.equipment_class.value} selection: " + "; ".join(items))
        return (
            "The current selection does not look suitable yet. Could you clarify "
            + " and ".join(asks)
            + "?"
        )


def _requirements_text(requirements: Sequence[Requirement]) -> str:
    if not requirements:
        return "(none stated)"
    return "\n".join(f"- {r.describe()}" for r in requirements)


def _candidates_text(candidates: Sequence[AnnotatedRecord]) -> str:
    if not candidates:
        return "(none)"
    lines = []
    for a in candidates:
        lines.append(
            f"- {a.record.id}: {a.record.brand} {a.record.model} ({a.record.subtype}); "
            f"satisfied={sorted(a.satisfied)} unsatisfied={sorted(a.unsatisfied)} "
            f"unknown={sorted(a.unknown)}"
        )
    return "\n".join(lines)
