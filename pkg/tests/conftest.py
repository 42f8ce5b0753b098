import json

import pytest

from equipcopilot.catalog import load_catalog, parse_catalog
from equipcopilot.config import packaged_data


@pytest.fixture(scope="session")
def sample_catalog():
    return load_catalog(packaged_data("catalog.json"))


@pytest.fixture(scope="session")
def sample_catalog_doc():
    return json.loads(packaged_data("catalog.json").read_text(encoding="utf-8"))


# A small catalog with hand-countable contents: 12 records across 3 classes
# (5 robots, 4 feeders, 3 vision units).
FIXTURE_OPERATIONS = [
    {"id": "op-feed", "name": "feeding", "description": "", "applicable_class": "feeder"},
    {"id": "op-handle", "name": "handling", "description": "", "applicable_class": "robot"},
    {"id": "op-inspect", "name": "inspecting", "description": "", "applicable_class": "vision"},
]


def _fixture_records():
    spec = [
        ("robot", "op-handle", "articulated arm robot", {"payload": ("number", 5, "kg"), "reach": ("number", 900, "mm")}),
        ("robot", "op-handle", "articulated arm robot", {"payload": ("number", 12, "kg")}),
        ("robot", "op-handle", "scara robot", {"payload": ("number", 3, "kg"), "reach": ("number", 600, "mm")}),
        ("robot", "op-handle", "cartesian robot", {"payload": ("number", 20, "kg")}),
        ("robot", "op-handle", "delta robot", {"payload": ("number", 1, "kg"), "washdown": ("flag", True, None)}),
        ("feeder", "op-feed", "vibratory bowl feeder", {"part_size_max": ("number", 30, "mm")}),
        ("feeder", "op-feed", "vibratory bowl feeder", {"part_size_max": ("number", 50, "mm")}),
        ("feeder", "op-feed", "linear feeder", {"track_length": ("number", 800, "mm")}),
        ("feeder", "op-feed", "flexible feeder", {"notes": ("text", "camera guided", None)}),
        ("vision", "op-inspect", "area-scan camera", {"resolution": ("number", 12, "mp")}),
        ("vision", "op-inspect", "line-scan camera", {"resolution": ("number", 4, "mp")}),
        ("vision", "op-inspect", "smart camera", {"resolution": ("number", 2, "mp"), "housing": ("text", "IP67 rated", None)}),
    ]
    records = []
    for i, (cls, op, subtype, attrs) in enumerate(spec):
        records.append(
            {
                "id": f"{cls}-{i:02d}",
                "brand": f"Brand{i}",
                "model": f"M-{i:02d}",
                "equipment_class": cls,
                "subtype": subtype,
                "elementary_operation_id": op,
                "attributes": {
                    key: {"kind": kind, "value": value, **({"unit": unit} if unit else {})}
                    for key, (kind, value, unit) in attrs.items()
                },
                "supplier": "Fixture",
                "source_ref": "test fixture",
            }
        )
    return records


@pytest.fixture(scope="session")
def fixture_doc():
    return {
        "operations": FIXTURE_OPERATIONS,
        "equipment": _fixture_records(),
    }


@pytest.fixture(scope="session")
def fixture_catalog(fixture_doc):
    return parse_catalog(fixture_doc)


def pytest_runtest_logreport(report):
    """Print one pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    outcome = "PASS" if report.passed else "FAIL"
    print(f"\n[ACCEPTANCE] {name}: {outcome}", flush=True)
