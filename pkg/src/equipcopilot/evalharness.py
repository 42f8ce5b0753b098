"""Replay selection-prompt suites against the copilot and score the outcomes.

Each case carries the prompt, the expected equipment class and subtype,
and a list of machine-checkable requirements. A completed run is scored at
one of four levels: Wrong, ClassOnly (right class, wrong subtype or too
few requirements met), SubtypeMost (right subtype, most requirements met),
or FullySuitable (right subtype, every requirement met). Scoring reads the
machine-readable session trace, not the natural-language reply, and
re-evaluates the case's requirements against the selected records, so it
does not depend on what the model happened to extract.
"""

from __future__ import annotations

import argparse
import enum
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from equipcopilot.catalog import (
    AnnotatedRecord,
    Catalog,
    EquipmentClass,
    EquipmentRecord,
    Requirement,
    evaluate_requirement,
    load_catalog,
    satisfaction_ratio,
)
from equipcopilot.config import packaged_data
from equipcopilot.llm import LLMGateway, ScriptedBackend, script_entries_from_raw
from equipcopilot.orchestrator import Orchestrator, OrchestratorConfig, Phase


class SuiteError(Exception):
    """The suite file is malformed."""


@dataclass(frozen=True)
class EvalCase:
    """One scored selection prompt."""

    case_id: str
    prompt: str
    expected_class: EquipmentClass
    expected_subtype: str | None = None
    checkable_requirements: tuple[Requirement, ...] = ()
    notes: str = ""


class SuitabilityLevel(enum.IntEnum):
    """Outcome grade for one case, ordered worst to best."""

    WRONG = 0
    CLASS_ONLY = 1
    SUBTYPE_MOST = 2
    FULLY_SUITABLE = 3

    @property
    def label(self) -> str:
        return {
            SuitabilityLevel.WRONG: "Wrong",
            SuitabilityLevel.CLASS_ONLY: "ClassOnly",
            SuitabilityLevel.SUBTYPE_MOST: "SubtypeMost",
            SuitabilityLevel.FULLY_SUITABLE: "FullySuitable",
        }[self]


LEVEL_LABELS = [level.label for level in SuitabilityLevel]


@dataclass
class CaseResult:
    case_id: str
    level: SuitabilityLevel
    selected_record_ids: list[str] = field(default_factory=list)
    satisfied_ratio: float = 0.0
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "case_id": self.case_id,
            "level": self.level.label,
            "selected_record_ids": list(self.selected_record_ids),
            "satisfied_ratio": self.satisfied_ratio,
            "error": self.error,
        }


@dataclass
class EvalReport:
    results: list[CaseResult]

    @property
    def total(self) -> int:
        return len(self.results)

    @property
    def aggregate(self) -> dict[str, int]:
        counts = {label: 0 for label in LEVEL_LABELS}
        for result in self.results:
            counts[result.level.label] += 1
        return counts

    @property
    def subtype_most_or_better(self) -> int:
        return sum(1 for r in self.results if r.level >= SuitabilityLevel.SUBTYPE_MOST)

    def to_json(self) -> str:
        doc = {
            "total": self.total,
            "aggregate": self.aggregate,
            "subtype_most_or_better": self.subtype_most_or_better,
            "cases": [r.to_dict() for r in sorted(self.results, key=lambda r: r.case_id)],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def render_table(self) -> str:
        lines = [f"{'case':28} {'level':14} {'ratio':>6}  selected"]
        lines.append("-" * 76)
        for result in sorted(self.results, key=lambda r: r.case_id):
            selected = ", ".join(result.selected_record_ids) or "-"
            if result.error:
                selected += f"  [{result.error}]"
            lines.append(
                f"{result.case_id:28} {result.level.label:14} {result.satisfied_ratio:6.2f}  {selected}"
            )
        lines.append("-" * 76)
        counts = self.aggregate
        lines.append(
            "totals: "
            + ", ".join(f"{label}: {counts[label]}" for label in LEVEL_LABELS)
            + f" (of {self.total})"
        )
        lines.append(
            f"{self.subtype_most_or_better}/{self.total} suggestions reached SubtypeMost or better"
        )
        return "\n".join(lines)


def load_suite(path: str | Path) -> list[EvalCase]:
    """Load a suite file; case ids must be unique."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SuiteError(f"cannot load suite {path}: {exc}") from exc
    cases: list[EvalCase] = []
    seen: set[str] = set()
    for i, entry in enumerate(raw.get("cases", [])):
        try:
            case = EvalCase(
                case_id=str(entry["case_id"]),
                prompt=str(entry["prompt"]),
                expected_class=EquipmentClass.parse(entry["expected_class"]),
                expected_subtype=entry.get("expected_subtype"),
                checkable_requirements=tuple(
                    Requirement.from_dict(r) for r in entry.get("checkable_requirements", [])
                ),
                notes=str(entry.get("notes", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SuiteError(f"cases[{i}]: {exc}") from exc
        if case.case_id in seen:
            raise SuiteError(f"duplicate case_id {case.case_id!r}")
        seen.add(case.case_id)
        cases.append(case)
    return cases


def load_scripts(path: str | Path) -> dict[str, list[Mapping[str, Any]]]:
    """Scripts file: a mapping of case_id to scripted backend entries."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise SuiteError("scripts file must map case ids to script entries")
    return raw


def annotate_for_case(case: EvalCase, record: EquipmentRecord) -> AnnotatedRecord:
    """Re-evaluate the case's checkable requirements against one record."""
    sat, unsat, unk = set(), set(), set()
    for i, req in enumerate(case.checkable_requirements):
        verdict = evaluate_requirement(req, record)
        {"satisfied": sat, "unsatisfied": unsat, "unknown": unk}[verdict].add(i)
    return AnnotatedRecord(record, frozenset(sat), frozenset(unsat), frozenset(unk))


def score_case(case: EvalCase, selection: Sequence[AnnotatedRecord]) -> SuitabilityLevel:
    """Grade a selection; the best level across selected records wins."""
    best = SuitabilityLevel.WRONG
    for annotated in selection:
        record = annotated.record
        if record.equipment_class is not case.expected_class:
            continue
        subtype_match = case.expected_subtype is None or (
            record.subtype.strip().lower() == case.expected_subtype.strip().lower()
        )
        ratio = satisfaction_ratio(annotated)
        if subtype_match and ratio == 1.0:
            level = SuitabilityLevel.FULLY_SUITABLE
        elif subtype_match and ratio > 0.5:
            level = SuitabilityLevel.SUBTYPE_MOST
        else:
            level = SuitabilityLevel.CLASS_ONLY
        best = max(best, level)
    return best


def _selection_from_trace(trace: Sequence[Mapping[str, Any]]) -> list[str] | None:
    """Record ids from the last selection-type answer event, if any."""
    for event in reversed(trace):
        if event.get("kind") == "answer" and event.get("payload", {}).get("kind") in (
            "selection",
            "best_effort",
        ):
            return [entry["record_id"] for entry in event["payload"].get("selected", [])]
    return None


class InProcessTarget:
    """Runs cases directly against a fresh orchestrator per case."""

    name = "inprocess"

    def __init__(self, catalog: Catalog, config: OrchestratorConfig | None = None):
        self.catalog = catalog
        self.config = config or OrchestratorConfig()

    def run_case(self, case: EvalCase, script: Sequence[Mapping[str, Any]] | None) -> tuple[list[str], str | None]:
        if script is None:
            return [], "no script provided for in-process run"
        backend = ScriptedBackend(script_entries_from_raw(script))
        orchestrator = Orchestrator(
            LLMGateway(backend), catalog=self.catalog, index=None, config=self.config
        )
        state = orchestrator.new_state()
        try:
            orchestrator.handle_turn(state, case.prompt)
        except Exception as exc:
            return [], f"run failed: {exc}"
        if state.phase is not Phase.DONE:
            return [], f"session did not complete (phase {state.phase.value})"
        ids = _selection_from_trace([ev.to_dict() for ev in state.trace])
        if ids is None:
            return [], "no selection answer in trace"
        return ids, None


class HttpTarget:
    """Runs cases against a live service endpoint."""

    def __init__(self, base_url: str, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.name = base_url

    def run_case(self, case: EvalCase, script: Sequence[Mapping[str, Any]] | None) -> tuple[list[str], str | None]:
        import httpx

        try:
            with httpx.Client(base_url=self.base_url, timeout=self.timeout) as client:
                created = client.post("/sessions")
                created.raise_for_status()
                session_id = created.json()["session_id"]
                sent = client.post(f"/sessions/{session_id}/messages", json={"text": case.prompt})
                sent.raise_for_status()
                snap = client.get(f"/sessions/{session_id}/state")
                snap.raise_for_status()
                snapshot = snap.json()
        except Exception as exc:
            return [], f"transport failure: {exc}"
        if snapshot.get("phase") != Phase.DONE.value:
            return [], f"session did not complete (phase {snapshot.get('phase')})"
        ids = _selection_from_trace(snapshot.get("trace", []))
        if ids is None:
            return [], "no selection answer in trace"
        return ids, None


def run_suite(
    suite: Sequence[EvalCase],
    target: InProcessTarget | HttpTarget,
    scripts: Mapping[str, Sequence[Mapping[str, Any]]] | None = None,
    catalog: Catalog | None = None,
) -> EvalReport:
    """Run every case through one fresh session and assemble the report.

    A per-case failure scores Wrong with an error note; the suite continues.
    """
    if catalog is None:
        catalog = target.catalog if isinstance(target, InProcessTarget) else load_catalog(packaged_data("catalog.json"))
    results: list[CaseResult] = []
    for case in sorted(suite, key=lambda c: c.case_id):
        script = scripts.get(case.case_id) if scripts else None
        record_ids, error = target.run_case(case, script)
        if error is not None:
            results.append(CaseResult(case.case_id, SuitabilityLevel.WRONG, [], 0.0, error))
            continue
        annotated = []
        missing = []
        for record_id in record_ids:
            record = catalog.get_record(record_id)
            if record is None:
                missing.append(record_id)
            else:
                annotated.append(annotate_for_case(case, record))
        level = score_case(case, annotated)
        best_ratio = max((satisfaction_ratio(a) for a in annotated), default=0.0)
        note = f"unknown record ids: {', '.join(missing)}" if missing else None
        results.append(CaseResult(case.case_id, level, list(record_ids), best_ratio, note))
    return EvalReport(results)


def default_suite_path() -> Path:
    return packaged_data("eval/suite.json")


def default_scripts_path() -> Path:
    return packaged_data("eval/scripts.json")


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="eval", description="Equipment-selection evaluation harness")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a suite and write a report")
    run.add_argument("--suite", required=True, help="path to the suite JSON")
    run.add_argument("--target", default="inprocess", help="'inprocess' or a service base URL")
    run.add_argument("--script", help="path to per-case backend scripts (in-process runs)")
    run.add_argument("--catalog", help="catalog JSON to resolve and score records against")
    run.add_argument("--out", required=True, help="where to write the JSON report")
    run.add_argument(
        "--allow-wrong",
        action="store_true",
        help="exit 0 even when some cases score Wrong",
    )
    args = parser.parse_args(argv)

    suite = load_suite(args.suite)
    catalog_path = args.catalog or packaged_data("catalog.json")
    catalog = load_catalog(catalog_path)
    scripts = load_scripts(args.script) if args.script else None
    if args.target == "inprocess":
        target: InProcessTarget | HttpTarget = InProcessTarget(catalog)
    else:
        target = HttpTarget(args.target)
    report = run_suite(suite, target, scripts=scripts, catalog=catalog)

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(report.to_json(), encoding="utf-8")
    print(report.render_table())
    print(f"report written to {out_path}")
    if report.aggregate["Wrong"] and not args.allow_wrong:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
