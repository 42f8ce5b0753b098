"""Structured equipment knowledge: records, operation taxonomy, constraint queries.

The catalog holds equipment records (robots, feeders, vision systems) with
typed attributes, plus the elementary-operation taxonomy that classifies
them. Queries filter a class (optionally a subtype) and annotate every
record against a list of requirements as satisfied / unsatisfied / unknown.

A catalog is immutable once constructed; reloading means building a new
instance and swapping the reference, so concurrent readers always see a
consistent snapshot.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

#: Unit symbols accepted on numeric attributes and requirements. Units are
#: compared for exact equality during query evaluation; there is no
#: conversion, so a requirement in the wrong unit evaluates as unknown.
CANONICAL_UNITS = frozenset({"mm", "g", "s", "mp", "fps", "kg"})


class CatalogError(Exception):
    """Base class for catalog failures."""


class CatalogParseError(CatalogError):
    """A catalog document could not be parsed or validated.

    Carries the offending section ("operations" / "equipment") and entry
    index when the failure is tied to a specific entry.
    """

    def __init__(self, message: str, *, section: str | None = None, entry_index: int | None = None):
        self.section = section
        self.entry_index = entry_index
        if section is not None and entry_index is not None:
            message = f"{section}[{entry_index}]: {message}"
        super().__init__(message)


class ReferentialIntegrityError(CatalogError):
    """A record references a missing or class-mismatched elementary operation."""


class QueryError(CatalogError):
    """A query was asked with an ill-formed requirement."""


class EquipmentClass(enum.Enum):
    """The three supported equipment classes. Closed set."""

    ROBOT = "robot"
    FEEDER = "feeder"
    VISION = "vision"

    @classmethod
    def parse(cls, raw: str) -> "EquipmentClass":
        try:
            return cls(str(raw).strip().lower())
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown equipment class {raw!r} (expected one of: {valid})") from None


@dataclass(frozen=True)
class ElementaryOperation:
    """One basic assembly function (e.g. handling, feeding, inspecting)."""

    id: str
    name: str
    description: str
    applicable_class: EquipmentClass

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("elementary operation id must be non-empty")
        if not self.name:
            raise ValueError(f"operation {self.id!r}: name must be non-empty")


@dataclass(frozen=True)
class AttributeValue:
    """Tagged attribute payload: a number (with optional unit), text, or flag."""

    kind: str  # "number" | "text" | "flag"
    value: float | str | bool
    unit: str | None = None

    def __post_init__(self) -> None:
        if self.kind == "number":
            if isinstance(self.value, bool) or not isinstance(self.value, (int, float)):
                raise ValueError(f"number attribute requires a numeric value, got {self.value!r}")
            if not math.isfinite(self.value):
                raise ValueError(f"number attribute must be finite, got {self.value!r}")
            if self.unit is not None:
                if self.unit != self.unit.lower() or self.unit not in CANONICAL_UNITS:
                    raise ValueError(
                        f"unit {self.unit!r} is not a canonical symbol ({', '.join(sorted(CANONICAL_UNITS))})"
                    )
        elif self.kind == "text":
            if not isinstance(self.value, str):
                raise ValueError(f"text attribute requires a string value, got {self.value!r}")
            if self.unit is not None:
                raise ValueError("text attributes carry no unit")
        elif self.kind == "flag":
            if not isinstance(self.value, bool):
                raise ValueError(f"flag attribute requires a boolean value, got {self.value!r}")
            if self.unit is not None:
                raise ValueError("flag attributes carry no unit")
        else:
            raise ValueError(f"unknown attribute kind {self.kind!r}")

    @classmethod
    def number(cls, value: float, unit: str | None = None) -> "AttributeValue":
        return cls("number", float(value), unit)

    @classmethod
    def text(cls, value: str) -> "AttributeValue":
        return cls("text", value)

    @classmethod
    def flag(cls, value: bool) -> "AttributeValue":
        return cls("flag", value)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind, "value": self.value}
        if self.unit is not None:
            d["unit"] = self.unit
        return d

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "AttributeValue":
        if "kind" not in raw or "value" not in raw:
            raise ValueError(f"attribute value needs 'kind' and 'value' keys, got {dict(raw)!r}")
        value = raw["value"]
        if raw["kind"] == "number" and isinstance(value, (int, float)) and not isinstance(value, bool):
            value = float(value)
        return cls(raw["kind"], value, raw.get("unit"))


@dataclass(frozen=True)
class EquipmentRecord:
    """One catalog entry: brand/model plus typed attributes."""

    id: str
    brand: str
    model: str
    equipment_class: EquipmentClass
    subtype: str
    elementary_operation_id: str
    attributes: Mapping[str, AttributeValue] = field(default_factory=dict)
    supplier: str = ""
    source_ref: str = ""

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("record id must be non-empty")
        for name in ("brand", "model", "subtype"):
            if not getattr(self, name):
                raise ValueError(f"record {self.id!r}: {name} must be non-empty")
        object.__setattr__(self, "attributes", dict(self.attributes))

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "brand": self.brand,
            "model": self.model,
            "equipment_class": self.equipment_class.value,
            "subtype": self.subtype,
            "elementary_operation_id": self.elementary_operation_id,
            "attributes": {k: v.to_dict() for k, v in self.attributes.items()},
            "supplier": self.supplier,
            "source_ref": self.source_ref,
        }


class Comparator(enum.Enum):
    """Requirement comparators."""

    GE = ">="
    LE = "<="
    EQ = "="
    IN_RANGE = "in_range"
    CONTAINS = "contains"

    @classmethod
    def parse(cls, raw: str) -> "Comparator":
        aliases = {"≥": cls.GE, "≤": cls.LE, "==": cls.EQ, "in-range": cls.IN_RANGE}
        raw = str(raw).strip()
        if raw in aliases:
            return aliases[raw]
        try:
            return cls(raw)
        except ValueError:
            raise ValueError(f"unknown comparator {raw!r}") from None


@dataclass(frozen=True)
class Requirement:
    """One user constraint on an attribute key.

    ``value`` holds a number for >= / <=, a (low, high) pair for in_range,
    a string for contains, and a number / string / boolean for =. ``unit``
    applies to numeric comparisons only and must match the record attribute
    unit exactly for the requirement to be evaluable.
    """

    key: str
    comparator: Comparator
    value: float | str | bool | tuple[float, float]
    unit: str | None = None

    def __post_init__(self) -> None:
        if not self.key:
            raise ValueError("requirement key must be non-empty")
        if self.unit is not None and (self.unit != self.unit.lower() or self.unit not in CANONICAL_UNITS):
            raise ValueError(
                f"requirement {self.key!r}: unit {self.unit!r} is not a canonical symbol"
            )
        c, v = self.comparator, self.value
        if c in (Comparator.GE, Comparator.LE):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ValueError(f"requirement {self.key!r}: {c.value} needs a numeric value")
            if not math.isfinite(v):
                raise ValueError(f"requirement {self.key!r}: value must be finite")
            object.__setattr__(self, "value", float(v))
        elif c is Comparator.IN_RANGE:
            if not (isinstance(v, (tuple, list)) and len(v) == 2):
                raise ValueError(f"requirement {self.key!r}: in_range needs a (low, high) pair")
            low, high = v
            for bound in (low, high):
                if isinstance(bound, bool) or not isinstance(bound, (int, float)) or not math.isfinite(bound):
                    raise ValueError(f"requirement {self.key!r}: in_range bounds must be finite numbers")
            if low > high:
                raise ValueError(f"requirement {self.key!r}: in_range low must be <= high")
            object.__setattr__(self, "value", (float(low), float(high)))
        elif c is Comparator.CONTAINS:
            if not isinstance(v, str):
                raise ValueError(f"requirement {self.key!r}: contains applies to text values only")
            if self.unit is not None:
                raise ValueError(f"requirement {self.key!r}: contains carries no unit")
        elif c is Comparator.EQ:
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                if not math.isfinite(v):
                    raise ValueError(f"requirement {self.key!r}: value must be finite")
                object.__setattr__(self, "value", float(v))
            elif not isinstance(v, (str, bool)):
                raise ValueError(f"requirement {self.key!r}: = needs a number, text, or flag value")

    def to_dict(self) -> dict[str, Any]:
        value: Any = self.value
        if isinstance(value, tuple):
            value = list(value)
        d: dict[str, Any] = {"key": self.key, "comparator": self.comparator.value, "value": value}
        if self.unit is not None:
            d["unit"] = self.unit
        return d

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "Requirement":
        for k in ("key", "comparator", "value"):
            if k not in raw:
                raise ValueError(f"requirement needs a {k!r} field, got {dict(raw)!r}")
        value = raw["value"]
        if isinstance(value, list):
            value = tuple(value)
        return cls(
            key=str(raw["key"]),
            comparator=Comparator.parse(raw["comparator"]),
            value=value,
            unit=raw.get("unit"),
        )

    def describe(self) -> str:
        """Human-readable one-liner, used in prompts and replies."""
        unit = f" {self.unit}" if self.unit else ""
        if self.comparator is Comparator.IN_RANGE:
            low, high = self.value  # type: ignore[misc]
            return f"{self.key} in [{low:g}, {high:g}]{unit}"
        if isinstance(self.value, float):
            return f"{self.key} {self.comparator.value} {self.value:g}{unit}"
        return f"{self.key} {self.comparator.value} {self.value}{unit}"


@dataclass(frozen=True)
class RequirementGroup:
    """Requirements grouped under the equipment class they constrain."""

    equipment_class: EquipmentClass
    requirements: tuple[Requirement, ...]

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "RequirementGroup":
        if "equipment_class" not in raw:
            raise ValueError(f"requirement group needs an 'equipment_class' field, got {dict(raw)!r}")
        reqs = raw.get("requirements", [])
        return cls(
            equipment_class=EquipmentClass.parse(raw["equipment_class"]),
            requirements=tuple(Requirement.from_dict(r) for r in reqs),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "equipment_class": self.equipment_class.value,
            "requirements": [r.to_dict() for r in self.requirements],
        }


def evaluate_requirement(req: Requirement, record: EquipmentRecord) -> str:
    """Evaluate one requirement against one record.

    Returns "satisfied", "unsatisfied", or "unknown". Unknown covers an
    absent attribute, a unit mismatch, and an attribute whose kind cannot
    answer the comparator (e.g. a numeric bound against a text attribute):
    none of these are evidence against the record, and nothing is ever
    converted silently.
    """
    attr = record.attributes.get(req.key)
    if attr is None:
        return "unknown"
    c = req.comparator
    if c in (Comparator.GE, Comparator.LE, Comparator.IN_RANGE):
        if attr.kind != "number":
            return "unknown"
        if req.unit != attr.unit:
            return "unknown"
        actual = float(attr.value)  # type: ignore[arg-type]
        if c is Comparator.GE:
            ok = actual >= float(req.value)  # type: ignore[arg-type]
        elif c is Comparator.LE:
            ok = actual <= float(req.value)  # type: ignore[arg-type]
        else:
            low, high = req.value  # type: ignore[misc]
            ok = low <= actual <= high
        return "satisfied" if ok else "unsatisfied"
    if c is Comparator.CONTAINS:
        if attr.kind != "text":
            return "unknown"
        return "satisfied" if str(req.value).lower() in str(attr.value).lower() else "unsatisfied"
    # Equality: the requirement value selects the attribute kind it can answer.
    if isinstance(req.value, bool):
        if attr.kind != "flag":
            return "unknown"
        return "satisfied" if attr.value is req.value else "unsatisfied"
    if isinstance(req.value, float):
        if attr.kind != "number":
            return "unknown"
        if req.unit != attr.unit:
            return "unknown"
        return "satisfied" if float(attr.value) == req.value else "unsatisfied"  # type: ignore[arg-type]
    if attr.kind != "text":
        return "unknown"
    return "satisfied" if attr.value == req.value else "unsatisfied"


@dataclass(frozen=True)
class AnnotatedRecord:
    """A record with its requirement annotations from a query.

    The three index sets partition the requirement index range of the query
    that produced this annotation.
    """

    record: EquipmentRecord
    satisfied: frozenset[int]
    unsatisfied: frozenset[int]
    unknown: frozenset[int]

    def to_dict(self) -> dict[str, Any]:
        return {
            "record_id": self.record.id,
            "satisfied": sorted(self.satisfied),
            "unsatisfied": sorted(self.unsatisfied),
            "unknown": sorted(self.unknown),
        }


def satisfaction_ratio(annotated: AnnotatedRecord) -> float:
    """Fraction of requirements satisfied; 1.0 when there were none."""
    total = len(annotated.satisfied) + len(annotated.unsatisfied) + len(annotated.unknown)
    if total == 0:
        return 1.0
    return len(annotated.satisfied) / total


def _normalize_subtype(subtype: str) -> str:
    return subtype.strip().lower()


class Catalog:
    """Immutable, validated view over operations and equipment records."""

    def __init__(
        self,
        operations: Iterable[ElementaryOperation],
        records: Iterable[EquipmentRecord],
    ):
        ops: dict[str, ElementaryOperation] = {}
        for op in operations:
            if op.id in ops:
                raise CatalogParseError(f"duplicate operation id {op.id!r}", section="operations")
            ops[op.id] = op
        recs: dict[str, EquipmentRecord] = {}
        for rec in records:
            if rec.id in recs:
                raise CatalogParseError(f"duplicate record id {rec.id!r}", section="equipment")
            op = ops.get(rec.elementary_operation_id)
            if op is None:
                raise ReferentialIntegrityError(
                    f"record {rec.id!r} references unknown elementary operation "
                    f"{rec.elementary_operation_id!r}"
                )
            if op.applicable_class is not rec.equipment_class:
                raise ReferentialIntegrityError(
                    f"record {rec.id!r} has class {rec.equipment_class.value!r} but operation "
                    f"{op.id!r} applies to {op.applicable_class.value!r}"
                )
            recs[rec.id] = rec
        self._operations = ops
        self._records = recs

    @property
    def record_count(self) -> int:
        return len(self._records)

    @property
    def operation_count(self) -> int:
        return len(self._operations)

    def records(self) -> list[EquipmentRecord]:
        return sorted(self._records.values(), key=lambda r: r.id)

    def operations(self) -> list[ElementaryOperation]:
        return sorted(self._operations.values(), key=lambda o: o.id)

    def get_record(self, record_id: str) -> EquipmentRecord | None:
        return self._records.get(record_id)

    def get_operation(self, operation_id: str) -> ElementaryOperation | None:
        return self._operations.get(operation_id)

    def list_operations(self, equipment_class: EquipmentClass) -> list[ElementaryOperation]:
        """All operations applicable to the class, in stable id order."""
        return [op for op in self.operations() if op.applicable_class is equipment_class]

    def distinct_subtypes(
        self,
        equipment_class: EquipmentClass,
        operation_id: str | None = None,
    ) -> list[str]:
        """Distinct record subtypes of a class (optionally under one operation), sorted."""
        seen: dict[str, str] = {}
        for rec in self._records.values():
            if rec.equipment_class is not equipment_class:
                continue
            if operation_id is not None and rec.elementary_operation_id != operation_id:
                continue
            seen.setdefault(_normalize_subtype(rec.subtype), rec.subtype)
        return [seen[k] for k in sorted(seen)]

    def query_equipment(
        self,
        equipment_class: EquipmentClass,
        subtype_filter: str | None,
        requirements: Sequence[Requirement],
    ) -> list[AnnotatedRecord]:
        """Annotate every matching record against the requirements.

        Records of the class (narrowed to the subtype when a filter is
        given) come back ordered by descending satisfied count, ties broken
        by ascending record id.
        """
        for i, req in enumerate(requirements):
            if not isinstance(req, Requirement):
                raise QueryError(f"requirement {i} is not a Requirement: {req!r}")
        wanted_subtype = _normalize_subtype(subtype_filter) if subtype_filter else None
        annotated: list[AnnotatedRecord] = []
        for rec in self._records.values():
            if rec.equipment_class is not equipment_class:
                continue
            if wanted_subtype is not None and _normalize_subtype(rec.subtype) != wanted_subtype:
                continue
            sat, unsat, unk = set(), set(), set()
            for i, req in enumerate(requirements):
                verdict = evaluate_requirement(req, rec)
                {"satisfied": sat, "unsatisfied": unsat, "unknown": unk}[verdict].add(i)
            annotated.append(
                AnnotatedRecord(rec, frozenset(sat), frozenset(unsat), frozenset(unk))
            )
        annotated.sort(key=lambda a: (-len(a.satisfied), a.record.id))
        return annotated


def parse_catalog(doc: Mapping[str, Any]) -> Catalog:
    """Build a catalog from a parsed catalog document."""
    if not isinstance(doc, Mapping):
        raise CatalogParseError(f"catalog document must be an object, got {type(doc).__name__}")
    operations = []
    for i, raw in enumerate(doc.get("operations", [])):
        try:
            operations.append(
                ElementaryOperation(
                    id=str(raw["id"]),
                    name=str(raw["name"]),
                    description=str(raw.get("description", "")),
                    applicable_class=EquipmentClass.parse(raw["applicable_class"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CatalogParseError(str(exc), section="operations", entry_index=i) from exc
    records = []
    for i, raw in enumerate(doc.get("equipment", [])):
        try:
            attributes = {
                key: AttributeValue.from_dict(val)
                for key, val in (raw.get("attributes") or {}).items()
            }
            records.append(
                EquipmentRecord(
                    id=str(raw["id"]),
                    brand=str(raw["brand"]),
                    model=str(raw["model"]),
                    equipment_class=EquipmentClass.parse(raw["equipment_class"]),
                    subtype=str(raw["subtype"]),
                    elementary_operation_id=str(raw["elementary_operation_id"]),
                    attributes=attributes,
                    supplier=str(raw.get("supplier", "")),
                    source_ref=str(raw.get("source_ref", "")),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CatalogParseError(str(exc), section="equipment", entry_index=i) from exc
    return Catalog(operations, records)


def load_catalog(source: str | Path) -> Catalog:
    """Load and validate a catalog from a JSON file."""
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CatalogParseError(f"cannot read catalog file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CatalogParseError(f"catalog file {path} is not valid JSON: {exc}") from exc
    return parse_catalog(doc)
