#!/usr/bin/env python3
"""Regenerate the shipped evaluation suite and its per-case backend scripts.

The suite holds 22 cases: three public example prompts plus nineteen
synthetic ones (documented as synthetic in their notes). Each case carries
a scripted backend conversation that drives the full selection pipeline to
a designed outcome; this tool recomputes every case's expected suitability
level from the sample catalog and refuses to write files that would not
reproduce the intended 3 ClassOnly / 13 SubtypeMost / 6 FullySuitable
split.

Usage: python tools/build_eval_suite.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from equipcopilot.catalog import EquipmentClass, Requirement, load_catalog  # noqa: E402
from equipcopilot.evalharness import EvalCase, annotate_for_case, score_case  # noqa: E402

DATA = REPO / "src" / "equipcopilot" / "data"

# (case_id, expected level, class, expected subtype, picked record id, prompt, requirements)
CASES = [
    (
        "t1-feeder-buffer",
        "ClassOnly",
        "feeder",
        "linear feeder",
        "feeder-slk-05",
        "We need an input buffer for 25 x 12 x 12 mm bushings weighing 20 g. Operators "
        "load it manually, it must hold about one hour of stock, and it has to supply at "
        "least 8 bushings every 40 seconds to the next station.",
        [
            {"key": "part_size_max", "comparator": ">=", "value": 25, "unit": "mm"},
            {"key": "part_weight_max", "comparator": ">=", "value": 20, "unit": "g"},
            {"key": "buffer_capacity", "comparator": ">=", "value": 720},
        ],
        "public example case; the reference selection was a linear buffer feeder",
    ),
    (
        "t1-robot-housing",
        "SubtypeMost",
        "robot",
        "articulated arm robot",
        "robot-epson-c8",
        "Equipment is needed to handle a composite plastic and steel housing component "
        "measuring 45 x 45 x 30 mm and weighing 60 g. It must offer a wide range of motion "
        "for complex moves and turn the housing to work on all of its faces. Precision and "
        "repeatability are critical.",
        [
            {"key": "payload", "comparator": ">=", "value": 0.06, "unit": "kg"},
            {"key": "reach", "comparator": ">=", "value": 450, "unit": "mm"},
            {"key": "axes", "comparator": ">=", "value": 6},
            {"key": "repeatability", "comparator": "<=", "value": 0.05, "unit": "mm"},
            {"key": "wrist_torque", "comparator": ">=", "value": 2},
        ],
        "public example case",
    ),
    (
        "t1-vision-inspect",
        "FullySuitable",
        "vision",
        "area-scan camera",
        "vision-optronis-cyclone",
        "We need a visual inspection of the part afterward. The camera requires at least "
        "5 Mega Pixels and two pictures need to be taken within a small timeframe. The "
        "field of inspection varies for each part.",
        [
            {"key": "resolution", "comparator": ">=", "value": 5, "unit": "mp"},
            {"key": "frame_rate", "comparator": ">=", "value": 30, "unit": "fps"},
        ],
        "public example case",
    ),
    (
        "syn-01-flex-caps",
        "FullySuitable",
        "feeder",
        "flexible feeder",
        "feeder-flexcube-380",
        "Feed 28 mm molded caps of about 15 g with frequent product changeovers; "
        "camera-guided picking over a feed surface is acceptable.",
        [
            {"key": "part_size_max", "comparator": ">=", "value": 30, "unit": "mm"},
            {"key": "part_weight_max", "comparator": ">=", "value": 20, "unit": "g"},
        ],
        "synthetic case",
    ),
    (
        "syn-02-scara-nest",
        "FullySuitable",
        "robot",
        "scara robot",
        "robot-axon-sr600",
        "Pick and place 1.5 kg pump housings from a tray into a test nest with planar "
        "moves, repeatability around 0.02 mm, reach about half a metre.",
        [
            {"key": "payload", "comparator": ">=", "value": 2, "unit": "kg"},
            {"key": "reach", "comparator": ">=", "value": 500, "unit": "mm"},
            {"key": "repeatability", "comparator": "<=", "value": 0.02, "unit": "mm"},
        ],
        "synthetic case",
    ),
    (
        "syn-03-web-profile",
        "FullySuitable",
        "vision",
        "line-scan camera",
        "vision-kestrel-kl2",
        "Inspect a continuously moving extruded profile for surface defects; the line "
        "runs fast, so a high capture rate matters.",
        [
            {"key": "frame_rate", "comparator": ">=", "value": 100, "unit": "fps"},
            {"key": "resolution", "comparator": ">=", "value": 2, "unit": "mp"},
        ],
        "synthetic case",
    ),
    (
        "syn-04-rack-insert",
        "FullySuitable",
        "robot",
        "cartesian robot",
        "robot-axon-cx900",
        "Insert 9 kg battery modules into a rack along a straight vertical axis with a "
        "stroke of roughly 0.8 m.",
        [
            {"key": "payload", "comparator": ">=", "value": 10, "unit": "kg"},
            {"key": "reach", "comparator": ">=", "value": 800, "unit": "mm"},
        ],
        "synthetic case",
    ),
    (
        "syn-05-brass-feed",
        "FullySuitable",
        "feeder",
        "vibratory bowl feeder",
        "feeder-vb-400",
        "Supply 22 mm turned brass fittings at a steady rate; floor space near the cell "
        "is tight, so the bowl must stay compact.",
        [
            {"key": "part_size_max", "comparator": ">=", "value": 25, "unit": "mm"},
            {"key": "bowl_diameter", "comparator": "<=", "value": 450, "unit": "mm"},
        ],
        "synthetic case",
    ),
    (
        "syn-06-gear-handling",
        "SubtypeMost",
        "robot",
        "articulated arm robot",
        "robot-epson-n2",
        "Handle small gear assemblies of about 0.8 kg and reorient them between stations "
        "inside a compact cell.",
        [
            {"key": "payload", "comparator": ">=", "value": 1, "unit": "kg"},
            {"key": "reach", "comparator": ">=", "value": 400, "unit": "mm"},
            {"key": "gripper_force", "comparator": ">=", "value": 50},
        ],
        "synthetic case",
    ),
    (
        "syn-07-bracket-bulk",
        "SubtypeMost",
        "feeder",
        "vibratory bowl feeder",
        "feeder-slk-05",
        "Bulk feed 35 mm stamped brackets of about 25 g; the hall has noise limits we "
        "must respect.",
        [
            {"key": "part_size_max", "comparator": ">=", "value": 40, "unit": "mm"},
            {"key": "part_weight_max", "comparator": ">=", "value": 30, "unit": "g"},
            {"key": "noise_level", "comparator": "<=", "value": 70},
        ],
        "synthetic case",
    ),
    (
        "syn-08-label-check",
        "SubtypeMost",
        "vision",
        "area-scan camera",
        "vision-kestrel-kv5",
        "Check label position and print quality on indexed parts; we would like to keep "
        "using our existing c-mount optics.",
        [
            {"key": "resolution", "comparator": ">=", "value": 5, "unit": "mp"},
            {"key": "frame_rate", "comparator": ">=", "value": 25, "unit": "fps"},
            {"key": "lens_mount", "comparator": "contains", "value": "c-mount"},
        ],
        "synthetic case",
    ),
    (
        "syn-09-blister-pick",
        "SubtypeMost",
        "robot",
        "delta robot",
        "robot-axon-ld250",
        "High-rate picking of 0.3 kg blister packs from a conveyor into cartons, about "
        "two picks per second across a 0.6 m wide belt.",
        [
            {"key": "payload", "comparator": ">=", "value": 0.5, "unit": "kg"},
            {"key": "cycle_time", "comparator": "<=", "value": 0.5, "unit": "s"},
            {"key": "reach", "comparator": ">=", "value": 600, "unit": "mm"},
        ],
        "synthetic case",
    ),
    (
        "syn-10-sleeve-buffer",
        "SubtypeMost",
        "feeder",
        "linear feeder",
        "feeder-sll-800-1200",
        "Buffer and convey 18 mm sleeves over roughly a metre to the assembly nest at a "
        "modest, steady rate.",
        [
            {"key": "track_length", "comparator": ">=", "value": 1000, "unit": "mm"},
            {"key": "part_size_max", "comparator": ">=", "value": 20, "unit": "mm"},
            {"key": "feed_rate", "comparator": ">=", "value": 30},
        ],
        "synthetic case",
    ),
    (
        "syn-11-gap-flush",
        "SubtypeMost",
        "vision",
        "laser scanner",
        "vision-gocator-2150",
        "Measure gap and flush on a 120 mm wide seam with micron-level repeatability at "
        "line speed.",
        [
            {"key": "field_of_view", "comparator": ">=", "value": 100, "unit": "mm"},
            {"key": "repeatability", "comparator": "<=", "value": 0.02, "unit": "mm"},
            {"key": "scan_rate", "comparator": ">=", "value": 500},
        ],
        "synthetic case",
    ),
    (
        "syn-12-drum-tend",
        "SubtypeMost",
        "robot",
        "articulated arm robot",
        "robot-epson-c8",
        "Tend a washer drum between two fixtures 1.2 m apart; the part plus gripper "
        "weighs close to 5 kg and the area gets wet during rinsing.",
        [
            {"key": "payload", "comparator": ">=", "value": 5, "unit": "kg"},
            {"key": "reach", "comparator": ">=", "value": 1200, "unit": "mm"},
            {"key": "ip_rating", "comparator": "contains", "value": "ip67"},
        ],
        "synthetic case",
    ),
    (
        "syn-13-clip-family",
        "SubtypeMost",
        "feeder",
        "flexible feeder",
        "feeder-flexcube-380",
        "Feed a family of 30 mm clips with weekly variant changes; camera picking over a "
        "lit surface is preferred.",
        [
            {"key": "part_size_max", "comparator": ">=", "value": 35, "unit": "mm"},
            {"key": "platform_width", "comparator": ">=", "value": 350, "unit": "mm"},
            {"key": "backlight", "comparator": "=", "value": True},
        ],
        "synthetic case",
    ),
    (
        "syn-14-screw-presence",
        "SubtypeMost",
        "vision",
        "smart camera",
        "vision-kestrel-sc16",
        "Verify the presence of two screws directly at the station without a separate "
        "vision controller; parts index quickly.",
        [
            {"key": "resolution", "comparator": ">=", "value": 1.5, "unit": "mp"},
            {"key": "onboard_processing", "comparator": "=", "value": True},
            {"key": "frame_rate", "comparator": ">=", "value": 100, "unit": "fps"},
        ],
        "synthetic case",
    ),
    (
        "syn-15-bearing-press",
        "SubtypeMost",
        "robot",
        "scara robot",
        "robot-axon-sr600",
        "Press bearings into housings from above, 3.5 kg including the tool, ideally "
        "with the robot hung inverted over the line.",
        [
            {"key": "payload", "comparator": ">=", "value": 4, "unit": "kg"},
            {"key": "repeatability", "comparator": "<=", "value": 0.02, "unit": "mm"},
            {"key": "mounting", "comparator": "contains", "value": "inverted"},
        ],
        "synthetic case",
    ),
    (
        "syn-16-spacer-slide",
        "SubtypeMost",
        "feeder",
        "gravity feeder",
        "feeder-gf-12",
        "Slide rigid 12 mm spacers down to a pick position with a short buffer and "
        "singulation at the end of the track.",
        [
            {"key": "part_size_max", "comparator": ">=", "value": 15, "unit": "mm"},
            {"key": "track_length", "comparator": ">=", "value": 250, "unit": "mm"},
            {"key": "escapement", "comparator": "=", "value": True},
        ],
        "synthetic case",
    ),
    (
        "syn-17-surface-detail",
        "SubtypeMost",
        "vision",
        "area-scan camera",
        "vision-optronis-cyclone",
        "Capture fine surface detail on fast-moving parts; we need very high resolution "
        "and a high frame rate at the same time.",
        [
            {"key": "resolution", "comparator": ">=", "value": 10, "unit": "mp"},
            {"key": "frame_rate", "comparator": ">=", "value": 200, "unit": "fps"},
            {"key": "interface", "comparator": "contains", "value": "coaxpress"},
        ],
        "synthetic case",
    ),
    (
        "syn-18-tray-shuttle",
        "ClassOnly",
        "robot",
        "cartesian robot",
        "robot-axon-sr600",
        "Move 2.5 kg trays between two fixed positions about half a metre apart; plain "
        "straight-line motion is all we need.",
        [
            {"key": "payload", "comparator": ">=", "value": 3, "unit": "kg"},
            {"key": "reach", "comparator": ">=", "value": 500, "unit": "mm"},
        ],
        "synthetic case; a gantry axis was the reference choice",
    ),
    (
        "syn-19-web-streaks",
        "ClassOnly",
        "vision",
        "line-scan camera",
        "vision-kestrel-kv5",
        "Inspect the printed web for streaks as it passes under the bridge; wide, "
        "continuous coverage matters most.",
        [
            {"key": "resolution", "comparator": ">=", "value": 4, "unit": "mp"},
            {"key": "frame_rate", "comparator": ">=", "value": 25, "unit": "fps"},
        ],
        "synthetic case; a line-scan setup was the reference choice",
    ),
]

EXPECTED_SPLIT = {"ClassOnly": 3, "SubtypeMost": 13, "FullySuitable": 6, "Wrong": 0}


def build_script(catalog, cls: str, reqs: list[dict], pick_id: str) -> list[dict]:
    record = catalog.get_record(pick_id)
    assert record is not None, pick_id
    return [
        {"template_id": "ROUTE_INTENT", "response_json": {"intent": "selection"}},
        {"template_id": "EXTRACT_REQUIREMENTS", "response_json": {"requirements": reqs}},
        {
            "template_id": "GROUP_REQUIREMENTS",
            "response_json": {"groups": [{"equipment_class": cls, "requirements": reqs}]},
        },
        {
            "template_id": "SELECT_OPERATION",
            "response_json": {"operation_id": record.elementary_operation_id},
        },
        {"template_id": "SELECT_SUBTYPE", "response_json": {"subtype": record.subtype}},
        {"template_id": "SELECT_EQUIPMENT", "response_json": {"record_ids": [pick_id]}},
        {
            "template_id": "REFLECT_SUITABILITY",
            "response_json": {
                "suitable": True,
                "missing_information": [],
                "rationale": "requirements reviewed against the record attributes",
            },
        },
    ]


def main() -> int:
    catalog = load_catalog(DATA / "catalog.json")
    suite_cases = []
    scripts: dict[str, list[dict]] = {}
    split = {"ClassOnly": 0, "SubtypeMost": 0, "FullySuitable": 0, "Wrong": 0}
    for case_id, expected_level, cls, subtype, pick_id, prompt, reqs, notes in CASES:
        record = catalog.get_record(pick_id)
        assert record is not None, f"{case_id}: {pick_id} not in catalog"
        case = EvalCase(
            case_id=case_id,
            prompt=prompt,
            expected_class=EquipmentClass.parse(cls),
            expected_subtype=subtype,
            checkable_requirements=tuple(Requirement.from_dict(r) for r in reqs),
        )
        level = score_case(case, [annotate_for_case(case, record)])
        if level.label != expected_level:
            print(f"FAIL {case_id}: designed {expected_level}, computed {level.label}")
            return 1
        split[level.label] += 1
        suite_cases.append(
            {
                "case_id": case_id,
                "prompt": prompt,
                "expected_class": cls,
                "expected_subtype": subtype,
                "checkable_requirements": reqs,
                "notes": notes,
            }
        )
        scripts[case_id] = build_script(catalog, cls, reqs, pick_id)
    if split != EXPECTED_SPLIT:
        print(f"FAIL: split {split} != {EXPECTED_SPLIT}")
        return 1
    out_dir = DATA / "eval"
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "suite.json").write_text(
        json.dumps({"cases": suite_cases}, indent=2) + "\n", encoding="utf-8"
    )
    (out_dir / "scripts.json").write_text(
        json.dumps(scripts, indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote {len(suite_cases)} cases; split {split}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
