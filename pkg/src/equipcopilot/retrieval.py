"""Semi-structured knowledge retrieval: chunking, embedding, dot-product top-k.

Markdown documents are split into fixed-stride character chunks (default
750 with an overlap of 150), embedded through a pluggable backend, and
searched exhaustively: the relevance score of a chunk is the plain dot
product between the query embedding and the chunk embedding. No
approximate index is used; the corpus sizes involved do not need one.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np


class RetrievalError(Exception):
    """Base class for retrieval failures."""


class ChunkingConfigError(RetrievalError):
    """Invalid chunk size / overlap combination."""


class IndexIntegrityError(RetrievalError):
    """Duplicate chunk ids or inconsistent embedding dimensions."""


class EmbedderTransportError(RetrievalError):
    """The embedding backend could not be reached. Retryable."""


@dataclass(frozen=True)
class ChunkingConfig:
    """Fixed-stride chunking parameters, counted in Unicode code points."""

    chunk_size: int = 750
    overlap: int = 150

    def __post_init__(self) -> None:
        if self.chunk_size <= 0:
            raise ChunkingConfigError(f"chunk_size must be positive, got {self.chunk_size}")
        if self.overlap < 0:
            raise ChunkingConfigError(f"overlap must be non-negative, got {self.overlap}")
        if self.overlap >= self.chunk_size:
            raise ChunkingConfigError(
                f"overlap ({self.overlap}) must be smaller than chunk_size ({self.chunk_size})"
            )

    @property
    def stride(self) -> int:
        return self.chunk_size - self.overlap


@dataclass
class Chunk:
    """One contiguous span of a source document.

    ``text`` is exactly the document substring over [start, end); the
    embedding stays None until the chunk is indexed.
    """

    id: str
    doc_id: str
    text: str
    start: int
    end: int
    embedding: np.ndarray | None = field(default=None, repr=False)

    def meta_dict(self) -> dict:
        return {
            "id": self.id,
            "doc_id": self.doc_id,
            "text": self.text,
            "start": self.start,
            "end": self.end,
        }


def chunk_document(doc: str, doc_id: str, cfg: ChunkingConfig | None = None) -> list[Chunk]:
    """Split a document into overlapping fixed-stride chunks.

    Chunk starts are 0, stride, 2*stride, ... and each chunk covers
    min(chunk_size, remaining) characters; generation stops with the first
    chunk that reaches the end of the document. An empty document yields no
    chunks.
    """
    if cfg is None:
        cfg = ChunkingConfig()
    if not doc_id:
        raise ValueError("doc_id must be non-empty")
    chunks: list[Chunk] = []
    length = len(doc)
    if length == 0:
        return chunks
    start = 0
    index = 0
    while True:
        end = min(start + cfg.chunk_size, length)
        chunks.append(
            Chunk(
                id=f"{doc_id}#{index:05d}",
                doc_id=doc_id,
                text=doc[start:end],
                start=start,
                end=end,
            )
        )
        if end >= length:
            break
        start += cfg.stride
        index += 1
    return chunks


def score(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of two equal-dimension vectors.

    Summation runs in ascending index order so the result is bit-for-bit
    reproducible and symmetric in its arguments.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise IndexIntegrityError(f"dimension mismatch: {a.shape} vs {b.shape}")
    products = np.multiply(a, b)
    total = 0.0
    for p in products.tolist():
        total += p
    return total


class Embedder(Protocol):
    """Anything that turns text into fixed-dimension vectors."""

    dimension: int

    def embed(self, text: str) -> np.ndarray: ...

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]: ...


class DeterministicEmbedder:
    """Hash-seeded embedding backend for tests and offline runs.

    The SHA-256 digest of the text seeds a PRNG that fills the vector with
    standard normals; with ``normalize`` on (the default) the vector is
    L2-normalized, so the dot product doubles as cosine similarity. Equal
    texts always map to equal vectors.
    """

    name = "deterministic"

    def __init__(self, dimension: int = 384, normalize: bool = True):
        if dimension <= 0:
            raise ValueError(f"dimension must be positive, got {dimension}")
        self.dimension = dimension
        self.normalize = normalize

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("cannot embed empty text")
        digest = hashlib.sha256(text.encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        vec = rng.standard_normal(self.dimension)
        if self.normalize:
            vec = vec / np.linalg.norm(vec)
        vec.setflags(write=False)
        return vec

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self.embed(t) for t in texts]


class HttpEmbedder:
    """Embedding backend speaking the batch HTTP contract.

    Request body is ``{"texts": [...]}``; the response must carry
    ``{"vectors": [[...], ...]}`` with one vector per input text.
    """

    name = "http"

    def __init__(self, url: str, dimension: int = 384, normalize: bool = True, timeout: float = 30.0):
        self.url = url
        self.dimension = dimension
        self.normalize = normalize
        self.timeout = timeout

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        import httpx

        for text in texts:
            if not text:
                raise ValueError("cannot embed empty text")
        try:
            response = httpx.post(self.url, json={"texts": list(texts)}, timeout=self.timeout)
            response.raise_for_status()
            payload = response.json()
        except Exception as exc:
            raise EmbedderTransportError(f"embedding backend at {self.url} failed: {exc}") from exc
        vectors = payload.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise EmbedderTransportError(
                f"embedding backend returned {len(vectors) if isinstance(vectors, list) else 'no'} "
                f"vectors for {len(texts)} texts"
            )
        out = []
        for raw in vectors:
            vec = np.asarray(raw, dtype=np.float64)
            if vec.shape != (self.dimension,):
                raise IndexIntegrityError(
                    f"embedding backend returned dimension {vec.shape}, expected ({self.dimension},)"
                )
            if not np.all(np.isfinite(vec)):
                raise IndexIntegrityError("embedding backend returned non-finite components")
            if self.normalize:
                vec = vec / np.linalg.norm(vec)
            vec.setflags(write=False)
            out.append(vec)
        return out


@dataclass(frozen=True)
class IndexStats:
    """Bookkeeping returned by an indexing call."""

    count: int
    dimension: int


@dataclass(frozen=True)
class RetrievalResult:
    """One retrieved chunk with its relevance score."""

    chunk: Chunk
    score: float


INDEX_FORMAT_VERSION = 1


class VectorIndex:
    """Exhaustive dot-product index over embedded chunks.

    Reads are lock-free against an immutable snapshot; writes replace the
    snapshot atomically under a lock, so a retrieval that raced a write
    sees either the pre-write or post-write state, never a torn one.
    """

    def __init__(self, embedder: Embedder):
        self.embedder = embedder
        self._lock = threading.Lock()
        self._chunks: tuple[Chunk, ...] = ()

    @property
    def size(self) -> int:
        return len(self._chunks)

    @property
    def dimension(self) -> int:
        return self.embedder.dimension

    def chunks(self) -> tuple[Chunk, ...]:
        return self._chunks

    def index_chunks(self, chunks: Iterable[Chunk]) -> IndexStats:
        """Embed (where needed) and add chunks; duplicate ids are rejected."""
        incoming = list(chunks)
        with self._lock:
            known = {c.id for c in self._chunks}
            for chunk in incoming:
                if chunk.id in known:
                    raise IndexIntegrityError(f"duplicate chunk id {chunk.id!r}")
                known.add(chunk.id)
            to_embed = [c for c in incoming if c.embedding is None]
            if to_embed:
                vectors = self.embedder.embed_batch([c.text for c in to_embed])
                for chunk, vec in zip(to_embed, vectors):
                    chunk.embedding = vec
            for chunk in incoming:
                emb = chunk.embedding
                assert emb is not None
                if emb.shape != (self.dimension,):
                    raise IndexIntegrityError(
                        f"chunk {chunk.id!r} has dimension {emb.shape}, index expects ({self.dimension},)"
                    )
                if not np.all(np.isfinite(emb)):
                    raise IndexIntegrityError(f"chunk {chunk.id!r} has non-finite embedding components")
            self._chunks = self._chunks + tuple(incoming)
        return IndexStats(count=len(incoming), dimension=self.dimension)

    def retrieve(self, query: str, k: int = 3) -> list[RetrievalResult]:
        """Top-k chunks by dot-product score, ties broken by ascending chunk id."""
        if k <= 0:
            raise ValueError(f"k must be positive, got {k}")
        snapshot = self._chunks
        if not snapshot:
            return []
        query_vec = self.embedder.embed(query)
        scored = [RetrievalResult(chunk, score(query_vec, chunk.embedding)) for chunk in snapshot]
        scored.sort(key=lambda r: (-r.score, r.chunk.id))
        return scored[:k]

    def save(self, path: str | Path) -> None:
        """Persist the index as a single self-describing file."""
        snapshot = self._chunks
        meta = [c.meta_dict() for c in snapshot]
        if snapshot:
            vectors = np.stack([c.embedding for c in snapshot])
        else:
            vectors = np.zeros((0, self.dimension))
        np.savez(
            Path(path),
            format_version=np.int64(INDEX_FORMAT_VERSION),
            dimension=np.int64(self.dimension),
            meta_json=np.str_(json.dumps(meta)),
            vectors=vectors,
        )

    @classmethod
    def load(cls, path: str | Path, embedder: Embedder) -> "VectorIndex":
        with np.load(Path(path), allow_pickle=False) as data:
            version = int(data["format_version"])
            if version != INDEX_FORMAT_VERSION:
                raise IndexIntegrityError(f"unsupported index format version {version}")
            dimension = int(data["dimension"])
            if dimension != embedder.dimension:
                raise IndexIntegrityError(
                    f"index dimension {dimension} does not match embedder dimension {embedder.dimension}"
                )
            meta = json.loads(str(data["meta_json"]))
            vectors = data["vectors"]
        index = cls(embedder)
        chunks = []
        for entry, vec in zip(meta, vectors):
            vec = np.asarray(vec, dtype=np.float64)
            vec.setflags(write=False)
            chunks.append(Chunk(embedding=vec, **entry))
        index.index_chunks(chunks)
        return index


def index_corpus_dir(index: VectorIndex, corpus_dir: str | Path, cfg: ChunkingConfig | None = None) -> IndexStats:
    """Chunk and index every ``.md`` file under a directory.

    Doc ids are paths relative to the corpus root, using ``/`` separators.
    """
    root = Path(corpus_dir)
    total = 0
    for path in sorted(root.rglob("*.md")):
        doc_id = path.relative_to(root).as_posix()
        stats = index.index_chunks(chunk_document(path.read_text(encoding="utf-8"), doc_id, cfg))
        total += stats.count
    return IndexStats(count=total, dimension=index.dimension)
