"""HTTP boundary: sessions, chat turns, state inspection, knowledge admin.

The app wires the catalog, the vector index, the LLM gateway, and the
orchestrator together. Sessions live in memory; each one takes at most one
turn at a time (a concurrent turn gets 409), and state snapshots are
published atomically at turn boundaries so readers never see a torn state.
"""

from __future__ import annotations

import secrets
import threading
from datetime import datetime, timezone
from typing import Any

from fastapi import Body, Depends, FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from equipcopilot.catalog import Catalog, CatalogError, CatalogParseError, load_catalog, parse_catalog
from equipcopilot.config import ServiceConfig
from equipcopilot.llm import (
    GatewayConfig,
    LLMGateway,
    LiveBackend,
    TransportError,
    load_script,
)
from equipcopilot.orchestrator import (
    Orchestrator,
    OrchestratorConfig,
    Phase,
    SessionState,
    TurnStateError,
)
from equipcopilot.retrieval import (
    ChunkingConfig,
    DeterministicEmbedder,
    HttpEmbedder,
    IndexIntegrityError,
    VectorIndex,
    chunk_document,
    index_corpus_dir,
)


class MessageIn(BaseModel):
    text: str


class CorpusIn(BaseModel):
    doc_id: str
    markdown: str


class _SessionEntry:
    def __init__(self, state: SessionState):
        self.state = state
        self.lock = threading.Lock()
        self.created_at = datetime.now(timezone.utc).isoformat()
        self.snapshot: dict[str, Any] = state.to_snapshot()

    def publish(self) -> None:
        self.snapshot = self.state.to_snapshot()


class AppRuntime:
    """Mutable server state behind the endpoints."""

    def __init__(self, config: ServiceConfig, backend: Any | None = None, embedder: Any | None = None):
        config.validate(require_llm_backend=backend is None)
        self.config = config
        self.ready = False
        self._catalog: Catalog | None = None
        self._catalog_lock = threading.Lock()
        self.sessions: dict[str, _SessionEntry] = {}
        self._sessions_lock = threading.Lock()

        if embedder is None:
            if config.retrieval.embedder == "http":
                embedder = HttpEmbedder(
                    url=config.retrieval.embedder_url or "",
                    dimension=config.retrieval.dimension,
                    normalize=config.retrieval.normalize,
                )
            else:
                embedder = DeterministicEmbedder(
                    dimension=config.retrieval.dimension,
                    normalize=config.retrieval.normalize,
                )
        self.index = VectorIndex(embedder)
        self.chunking = ChunkingConfig(config.retrieval.chunk_size, config.retrieval.overlap)

        if backend is None:
            if config.llm.backend == "live":
                backend = LiveBackend(
                    api_base=config.llm.api_base or "",
                    api_key=config.llm.api_key,
                    model=config.llm.model,
                )
            else:
                backend = load_script(config.llm.script_path or "")
                backend.name = config.llm.backend
        self.backend = backend
        self.gateway = LLMGateway(
            backend,
            config=GatewayConfig(
                max_parse_retries=config.llm.max_parse_retries,
                transport_retries=config.llm.transport_retries,
                prompt_budget=config.llm.prompt_budget,
                temperature=config.llm.temperature,
                answer_temperature=config.llm.temperature,
            ),
        )
        self.orchestrator = Orchestrator(
            self.gateway,
            catalog=self.catalog,
            index=self.index,
            config=OrchestratorConfig(
                max_iterations=config.orchestrator.max_iterations,
                top_k=config.orchestrator.top_k,
                max_candidates=config.orchestrator.max_candidates,
            ),
        )

    def catalog(self) -> Catalog:
        catalog = self._catalog
        if catalog is None:
            raise RuntimeError("catalog not loaded")
        return catalog

    def swap_catalog(self, catalog: Catalog) -> None:
        with self._catalog_lock:
            self._catalog = catalog

    def load(self) -> None:
        """Load the catalog and index the corpus; flips the readiness gate."""
        self.swap_catalog(load_catalog(self.config.catalog_path))
        corpus = self.config.corpus_dir
        if corpus:
            index_corpus_dir(self.index, corpus, self.chunking)
        self.ready = True

    @property
    def backend_name(self) -> str:
        return getattr(self.backend, "name", type(self.backend).__name__)


def create_app(
    config: ServiceConfig | None = None,
    *,
    backend: Any | None = None,
    embedder: Any | None = None,
    defer_load: bool = False,
) -> FastAPI:
    """Build the service app. ``defer_load`` leaves the server not-ready until
    ``app.state.runtime.load()`` is called (used to exercise the readiness gate)."""
    runtime = AppRuntime(config or ServiceConfig(), backend=backend, embedder=embedder)
    app = FastAPI(title="equipcopilot", version="0.1.0")
    app.state.runtime = runtime

    if runtime.config.ui_origin:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=[runtime.config.ui_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    if not defer_load:
        runtime.load()

    def require_admin(request: Request) -> None:
        header = request.headers.get("authorization", "")
        expected = f"Bearer {runtime.config.admin_token}"
        if not runtime.config.admin_token or not secrets.compare_digest(header, expected):
            raise HTTPException(status_code=401, detail="invalid admin token")

    @app.post("/sessions", status_code=201)
    def create_session() -> dict[str, str]:
        """Open a fresh session in AwaitingInput."""
        if not runtime.ready:
            raise HTTPException(status_code=503, detail="server is still loading knowledge")
        session_id = secrets.token_urlsafe(32)
        state = runtime.orchestrator.new_state(session_id)
        with runtime._sessions_lock:
            runtime.sessions[session_id] = _SessionEntry(state)
        return {"session_id": session_id}

    def get_entry(session_id: str) -> _SessionEntry:
        entry = runtime.sessions.get(session_id)
        if entry is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return entry

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageIn) -> dict[str, Any]:
        """Run one turn; blocks until the machine blocks on input or finishes."""
        entry = get_entry(session_id)
        if not entry.lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="a turn is already in progress")
        try:
            before = len(entry.state.trace)
            try:
                _, reply = runtime.orchestrator.handle_turn(entry.state, body.text)
            except TurnStateError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            except TransportError as exc:
                entry.state.phase = Phase.AWAITING_INPUT
                entry.publish()
                raise HTTPException(status_code=502, detail=f"language model unreachable: {exc}") from exc
            entry.publish()
            delta = [ev.to_dict() for ev in entry.state.trace[before:]]
            return {"reply": reply, "phase": entry.state.phase.value, "trace_delta": delta}
        finally:
            entry.lock.release()

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str) -> dict[str, Any]:
        """Read-only snapshot from the last completed turn."""
        return get_entry(session_id).snapshot

    @app.get("/transitions")
    def get_transitions() -> dict[str, Any]:
        """The state machine's edge list (drives the UI's phase diagram)."""
        return runtime.orchestrator.transitions.to_dict()

    @app.post("/admin/catalog")
    def admin_catalog(
        doc: dict = Body(...), _: None = Depends(require_admin)
    ) -> dict[str, Any]:
        """Atomically replace the equipment catalog."""
        try:
            catalog = parse_catalog(doc)
        except CatalogParseError as exc:
            detail: dict[str, Any] = {"error": str(exc)}
            if exc.section is not None:
                detail["section"] = exc.section
            if exc.entry_index is not None:
                detail["entry_index"] = exc.entry_index
            raise HTTPException(status_code=400, detail=detail) from exc
        except CatalogError as exc:
            raise HTTPException(status_code=400, detail={"error": str(exc)}) from exc
        runtime.swap_catalog(catalog)
        return {"records": catalog.record_count, "operations": catalog.operation_count}

    @app.post("/admin/corpus")
    def admin_corpus(body: CorpusIn, _: None = Depends(require_admin)) -> dict[str, Any]:
        """Chunk and index one Markdown document incrementally."""
        if not body.doc_id.strip():
            raise HTTPException(status_code=400, detail={"error": "doc_id must be non-empty"})
        chunks = chunk_document(body.markdown, body.doc_id, runtime.chunking)
        try:
            stats = runtime.index.index_chunks(chunks)
        except IndexIntegrityError as exc:
            raise HTTPException(status_code=400, detail={"error": str(exc)}) from exc
        return {"chunks_indexed": stats.count}

    @app.get("/health")
    def health() -> dict[str, Any]:
        return {
            "status": "ok" if runtime.ready else "starting",
            "catalog_records": runtime._catalog.record_count if runtime._catalog else 0,
            "index_chunks": runtime.index.size,
            "llm_backend": runtime.backend_name,
        }

    return app


def main() -> None:
    """Run the service with uvicorn, honoring SERVICE_BIND."""
    import argparse

    import uvicorn

    from equipcopilot.config import load_config

    parser = argparse.ArgumentParser(description="Equipment-selection copilot service")
    parser.add_argument("--config", help="path to a JSON config file")
    args = parser.parse_args()
    config = load_config(args.config)
    host, _, port = config.bind.rpartition(":")
    uvicorn.run(create_app(config), host=host or "127.0.0.1", port=int(port))


if __name__ == "__main__":
    main()
