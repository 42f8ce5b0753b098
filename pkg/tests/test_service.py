"""HTTP boundary: session lifecycle, turn mutual exclusion, admin paths."""

import json
import threading

from fastapi.testclient import TestClient

from equipcopilot.config import ServiceConfig
from equipcopilot.llm import TransportError, scripted_backend
from equipcopilot.retrieval import DeterministicEmbedder
from equipcopilot.service import create_app

ADMIN = {"Authorization": "Bearer secret-token"}

VISION_PROMPT = (
    "We need a visual inspection of the part afterward. The camera requires at "
    "least 5 Mega Pixels and two pictures need to be taken within a small "
    "timeframe. The field of inspection varies for each part."
)

VISION_REQS = [
    {"key": "resolution", "comparator": ">=", "value": 5, "unit": "mp"},
    {"key": "frame_rate", "comparator": ">=", "value": 30, "unit": "fps"},
]


def vision_entries(reflect_response=None):
    return [
        ("ROUTE_INTENT", json.dumps({"intent": "selection"})),
        ("EXTRACT_REQUIREMENTS", json.dumps({"requirements": VISION_REQS})),
        ("GROUP_REQUIREMENTS", json.dumps({"groups": [{"equipment_class": "vision", "requirements": VISION_REQS}]})),
        ("SELECT_OPERATION", json.dumps({"operation_id": "op-inspecting"})),
        ("SELECT_SUBTYPE", json.dumps({"subtype": "area-scan camera"})),
        ("SELECT_EQUIPMENT", json.dumps({"record_ids": ["vision-optronis-cyclone"]})),
        (
            "REFLECT_SUITABILITY",
            reflect_response or json.dumps({"suitable": True, "missing_information": [], "rationale": "fits"}),
        ),
    ]


def make_app(entries, **kwargs):
    config = ServiceConfig()
    config.admin_token = "secret-token"
    backend = scripted_backend(entries)
    app = create_app(config, backend=backend, embedder=DeterministicEmbedder(64), **kwargs)
    return app, backend


# ----------------------------------------------------------------------
# sessions


def test_session_creation_unique_ids():
    app, _ = make_app([])
    client = TestClient(app)
    first = client.post("/sessions")
    second = client.post("/sessions")
    assert first.status_code == 201 and second.status_code == 201
    assert first.json()["session_id"]
    assert first.json()["session_id"] != second.json()["session_id"]


def test_session_creation_blocked_before_readiness():
    app, _ = make_app([], defer_load=True)
    client = TestClient(app)
    assert client.post("/sessions").status_code == 503
    assert client.get("/health").json()["status"] == "starting"
    app.state.runtime.load()
    assert client.post("/sessions").status_code == 201
    assert client.get("/health").json()["status"] == "ok"


def test_unknown_session_is_404():
    app, _ = make_app([])
    client = TestClient(app)
    assert client.post("/sessions/nope/messages", json={"text": "hi"}).status_code == 404
    assert client.get("/sessions/nope/state").status_code == 404


# ----------------------------------------------------------------------
# turns


def test_vision_prompt_round_trip():
    app, _ = make_app(vision_entries())
    client = TestClient(app)
    session_id = client.post("/sessions").json()["session_id"]
    response = client.post(f"/sessions/{session_id}/messages", json={"text": VISION_PROMPT})
    assert response.status_code == 200
    body = response.json()
    assert "OPTRONIS" in body["reply"]
    assert body["phase"] == "Done"
    assert body["trace_delta"][0]["kind"] == "user_message"
    assert body["trace_delta"][-1]["kind"] == "answer"


def test_turn_on_completed_session_is_409():
    app, _ = make_app(vision_entries())
    client = TestClient(app)
    session_id = client.post("/sessions").json()["session_id"]
    client.post(f"/sessions/{session_id}/messages", json={"text": VISION_PROMPT})
    again = client.post(f"/sessions/{session_id}/messages", json={"text": "more"})
    assert again.status_code == 409


def test_concurrent_turns_one_wins():
    release = threading.Event()
    entered = threading.Event()

    def blocking_answer(request):
        entered.set()
        release.wait(timeout=15)
        return "slow answer"

    entries = [
        ("ROUTE_INTENT", json.dumps({"intent": "general"})),
        ("GENERAL_ANSWER", blocking_answer),
    ]
    app, _ = make_app(entries)
    client_a, client_b = TestClient(app), TestClient(app)
    session_id = client_a.post("/sessions").json()["session_id"]

    codes = []

    def turn(client):
        codes.append(client.post(f"/sessions/{session_id}/messages", json={"text": "q"}).status_code)

    thread_a = threading.Thread(target=turn, args=(client_a,))
    thread_a.start()
    # The first turn is inside the backend (and holds the session lock) once
    # `entered` fires; a second turn now must be turned away.
    assert entered.wait(timeout=10)
    code = client_b.post(f"/sessions/{session_id}/messages", json={"text": "q2"}).status_code
    release.set()
    thread_a.join(timeout=15)
    assert code == 409
    assert codes == [200]


def test_snapshot_is_last_completed_state():
    release = threading.Event()
    entered = threading.Event()

    def blocking_answer(request):
        entered.set()
        release.wait(timeout=15)
        return "done now"

    entries = [
        ("ROUTE_INTENT", json.dumps({"intent": "general"})),
        ("GENERAL_ANSWER", blocking_answer),
    ]
    app, _ = make_app(entries)
    client = TestClient(app)
    worker = TestClient(app)
    session_id = client.post("/sessions").json()["session_id"]

    thread = threading.Thread(
        target=lambda: worker.post(f"/sessions/{session_id}/messages", json={"text": "q"})
    )
    thread.start()
    assert entered.wait(timeout=10)
    snapshot = client.get(f"/sessions/{session_id}/state").json()
    assert snapshot["phase"] == "AwaitingInput"  # published before the turn started
    assert snapshot["trace"] == []
    release.set()
    thread.join(timeout=15)
    snapshot = client.get(f"/sessions/{session_id}/state").json()
    assert snapshot["phase"] == "Done"
    assert snapshot["trace"][-1]["kind"] == "answer"


def test_state_after_general_turn_contains_retrieval_events():
    entries = [
        ("ROUTE_INTENT", json.dumps({"intent": "general"})),
        ("GENERAL_ANSWER", "an answer"),
    ]
    app, _ = make_app(entries)
    client = TestClient(app)
    session_id = client.post("/sessions").json()["session_id"]
    fresh = client.get(f"/sessions/{session_id}/state").json()
    assert fresh["phase"] == "AwaitingInput" and fresh["trace"] == []
    client.post(f"/sessions/{session_id}/messages", json={"text": "what is a feeder?"})
    snapshot = client.get(f"/sessions/{session_id}/state").json()
    retrievals = [ev for ev in snapshot["trace"] if ev["kind"] == "retrieval"]
    assert len(retrievals) == 3
    assert all(ev["payload"]["chunk_id"] for ev in retrievals)


def test_transport_exhaustion_returns_502_and_resets():
    entries = [("ROUTE_INTENT", TransportError("backend down"))] * 3
    app, _ = make_app(entries)
    app.state.runtime.gateway._sleep = lambda _: None
    client = TestClient(app)
    session_id = client.post("/sessions").json()["session_id"]
    response = client.post(f"/sessions/{session_id}/messages", json={"text": "q"})
    assert response.status_code == 502
    snapshot = client.get(f"/sessions/{session_id}/state").json()
    assert snapshot["phase"] == "AwaitingInput"


# ----------------------------------------------------------------------
# admin


def test_admin_requires_token():
    app, _ = make_app([])
    client = TestClient(app)
    assert client.post("/admin/corpus", json={"doc_id": "d", "markdown": "x"}).status_code == 401
    bad = {"Authorization": "Bearer wrong"}
    assert client.post("/admin/corpus", json={"doc_id": "d", "markdown": "x"}, headers=bad).status_code == 401


def test_admin_corpus_indexes_two_chunks():
    app, _ = make_app([])
    client = TestClient(app)
    before = client.get("/health").json()["index_chunks"]
    response = client.post(
        "/admin/corpus", json={"doc_id": "new.md", "markdown": "y" * 1350}, headers=ADMIN
    )
    assert response.status_code == 200
    assert response.json() == {"chunks_indexed": 2}
    assert client.get("/health").json()["index_chunks"] == before + 2
    # Re-posting the same doc id collides with the existing chunk ids.
    again = client.post(
        "/admin/corpus", json={"doc_id": "new.md", "markdown": "z" * 100}, headers=ADMIN
    )
    assert again.status_code == 400


def test_admin_catalog_swap_and_validation(sample_catalog_doc):
    app, _ = make_app([])
    client = TestClient(app)
    malformed = {
        "operations": sample_catalog_doc["operations"],
        "equipment": [sample_catalog_doc["equipment"][0], {"id": "broken"}],
    }
    response = client.post("/admin/catalog", json=malformed, headers=ADMIN)
    assert response.status_code == 400
    assert response.json()["detail"]["entry_index"] == 1

    response = client.post("/admin/catalog", json=sample_catalog_doc, headers=ADMIN)
    assert response.status_code == 200
    assert response.json()["records"] == len(sample_catalog_doc["equipment"])


def test_catalog_swap_during_turn_uses_one_snapshot(sample_catalog_doc):
    release = threading.Event()
    entered = threading.Event()

    def blocking_reflect(request):
        entered.set()
        release.wait(timeout=15)
        return json.dumps({"suitable": True})

    app, _ = make_app(vision_entries(reflect_response=blocking_reflect))
    client = TestClient(app)
    worker = TestClient(app)
    session_id = client.post("/sessions").json()["session_id"]

    result = {}

    def turn():
        result["response"] = worker.post(
            f"/sessions/{session_id}/messages", json={"text": VISION_PROMPT}
        )

    thread = threading.Thread(target=turn)
    thread.start()
    assert entered.wait(timeout=10)
    # Swap in a catalog without the selected record while the turn is running.
    emptyish = {"operations": sample_catalog_doc["operations"], "equipment": []}
    assert client.post("/admin/catalog", json=emptyish, headers=ADMIN).status_code == 200
    release.set()
    thread.join(timeout=15)
    assert result["response"].status_code == 200
    assert "OPTRONIS" in result["response"].json()["reply"]


# ----------------------------------------------------------------------
# misc


def test_health_reports_backend_and_counts():
    app, _ = make_app([])
    client = TestClient(app)
    body = client.get("/health").json()
    assert body["status"] == "ok"
    assert body["llm_backend"] == "scripted"
    assert body["catalog_records"] > 0
    assert body["index_chunks"] > 0


def test_transitions_endpoint_matches_table():
    from equipcopilot.orchestrator import transition_table

    app, _ = make_app([])
    client = TestClient(app)
    edges = client.get("/transitions").json()["edges"]
    assert {(e["from"], e["event"], e["to"]) for e in edges} == transition_table()


def test_responses_are_json_shaped():
    app, _ = make_app(vision_entries())
    client = TestClient(app)
    session_id = client.post("/sessions").json()["session_id"]
    body = client.post(f"/sessions/{session_id}/messages", json={"text": VISION_PROMPT}).json()
    assert set(body) == {"reply", "phase", "trace_delta"}
    snapshot = client.get(f"/sessions/{session_id}/state").json()
    for key in ("session_id", "phase", "history", "requirements", "groups", "trace"):
        assert key in snapshot
