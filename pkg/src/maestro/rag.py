"""Three-stage retrieval pipeline: document processing, search, generation.

Splitting walks a fixed separator hierarchy (paragraph, line, word,
character), greedily merging pieces up to the chunk size and recursing into
oversized pieces.  Retrieval is an exhaustive cosine scan over an in-memory
index; a blend reranker re-scores hits before the relevance gate decides
between grounded generation and the web-search fallback.

All vector math is plain Python with left-to-right accumulation so scores
are bit-stable across runs and machines; at this scale (exhaustive scan is
the contract) that beats pulling in a numerics stack.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Protocol

from .blobs import sha256_hex
from .errors import (
    DecodeError,
    DimMismatch,
    EmptyText,
    InvalidParams,
    NoWebTool,
    UnsupportedMediaType,
)

SEPARATORS = ("\n\n", "\n", " ")

DEFAULT_CHUNK_SIZE = 1000
DEFAULT_OVERLAP = 200
DEFAULT_TOP_K = 4
DEFAULT_TAU = 0.35
MAX_EXPANDED_K = 8

TEXT_MEDIA_TYPES = {"text/plain", "text/markdown"}


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding values must be finite")

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class DocumentChunk:
    doc_id: str
    chunk_index: int
    text: str
    char_offset: int
    embedding: EmbeddingVector | None = None
    metadata: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class SearchHit:
    chunk: DocumentChunk
    score: float
    rank: int


@dataclass(frozen=True)
class RagAnswer:
    text: str
    source: str  # "rag" | "web"
    top_score: float
    hits: tuple[SearchHit, ...] = ()
    citation: str | None = None


# --- document processing ------------------------------------------------------


def split_recursive(text: str, chunk_size: int, overlap: int) -> list[DocumentChunk]:
    """Split text into chunks of at most chunk_size characters.

    Splits at the coarsest separator present, greedily merges adjacent
    pieces while they fit, recurses into oversized pieces with the next
    separator, and hard-splits at character granularity as the last resort.
    Separators stay attached to the preceding piece so every input character
    lands in exactly one base chunk; each chunk after the first is then
    extended backwards by up to ``overlap`` trailing characters of its
    predecessor, capped so no chunk ever exceeds chunk_size.
    """
    if chunk_size < 1 or overlap < 0 or overlap >= chunk_size:
        raise InvalidParams(f"chunk_size={chunk_size}, overlap={overlap}")
    if not text:
        return []
    spans = _split_spans(text, 0, list(SEPARATORS), chunk_size)
    chunks: list[DocumentChunk] = []
    prev_start, prev_end = None, None
    for i, (start, end) in enumerate(spans):
        ext = 0
        if prev_end is not None:
            ext = min(overlap, chunk_size - (end - start), prev_end - prev_start)
        chunks.append(
            DocumentChunk(
                doc_id="",
                chunk_index=i,
                text=text[start - ext : end],
                char_offset=start - ext,
            )
        )
        prev_start, prev_end = start, end
    return chunks


def _split_spans(text: str, offset: int, seps: list[str], size: int) -> list[tuple[int, int]]:
    """Base (non-overlapped) chunk spans as absolute [start, end) pairs."""
    if len(text) <= size:
        return [(offset, offset + len(text))]
    sep = next((s for s in seps if s in text), None)
    if sep is None:
        return [(offset + i, offset + min(i + size, len(text))) for i in range(0, len(text), size)]
    rest = seps[seps.index(sep) + 1 :]
    pieces = _pieces_with_positions(text, offset, sep)
    spans: list[tuple[int, int]] = []
    buf_start: int | None = None
    buf_end = 0
    for start, end in pieces:
        if buf_start is not None and (end - buf_start) <= size:
            buf_end = end
            continue
        if buf_start is not None:
            spans.append((buf_start, buf_end))
            buf_start = None
        if end - start > size:
            spans.extend(_split_spans(text[start - offset : end - offset], start, rest, size))
        else:
            buf_start, buf_end = start, end
    if buf_start is not None:
        spans.append((buf_start, buf_end))
    return spans


def _pieces_with_positions(text: str, offset: int, sep: str) -> list[tuple[int, int]]:
    """Split on sep, attaching each separator to the preceding piece."""
    pieces = []
    pos = 0
    for part in text.split(sep):
        end = pos + len(part) + len(sep)
        pieces.append((offset + pos, offset + min(end, len(text))))
        pos = end
    # text ending in sep leaves a zero-length trailing piece
    if pieces and pieces[-1][0] == pieces[-1][1]:
        pieces.pop()
    return pieces


# --- embeddings ---------------------------------------------------------------


class Embedder(Protocol):
    def embed(self, text: str) -> EmbeddingVector: ...


class LetterFrequencyEmbedder:
    """Deterministic 26-dim embedder: case-folded a-z counts, L2-normalized.

    Every score in the test suite is hand-checkable from letter counts; a
    text with no letters maps to the zero vector.
    """

    dim = 26

    def embed(self, text: str) -> EmbeddingVector:
        if not text.strip():
            raise EmptyText("cannot embed empty text")
        counts = [0] * 26
        for ch in text.casefold():
            idx = ord(ch) - ord("a")
            if 0 <= idx < 26:
                counts[idx] += 1
        norm = math.sqrt(sum(c * c for c in counts))
        if norm == 0.0:
            return EmbeddingVector(values=(0.0,) * 26)
        return EmbeddingVector(values=tuple(c / norm for c in counts))


def cosine(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """Cosine similarity; any zero-vector operand scores 0."""
    if u.dim != v.dim:
        raise DimMismatch(u.dim, v.dim)
    dot = nu = nv = 0.0
    for a, b in zip(u.values, v.values):
        dot += a * b
        nu += a * a
        nv += b * b
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return dot / (math.sqrt(nu) * math.sqrt(nv))


# --- the index ------------------------------------------------------------------


class VectorIndex:
    """Exhaustive-scan in-memory vector store.

    Reads work on copy-on-write snapshots; upserts serialize per document so
    distinct documents may ingest in parallel.
    """

    def __init__(self, dim: int | None = None):
        self.dim = dim
        self._chunks: tuple[DocumentChunk, ...] = ()
        self._lock = threading.Lock()
        self._doc_locks: dict[str, threading.Lock] = {}

    def __len__(self) -> int:
        return len(self._chunks)

    def doc_ids(self) -> set[str]:
        return {c.doc_id for c in self._chunks}

    def upsert_document(self, doc_id: str, chunks: list[DocumentChunk]) -> None:
        """Replace all chunks of doc_id with the given ones (insertion order kept)."""
        for c in chunks:
            if c.embedding is None:
                raise ValueError("chunks must be embedded before upsert")
            if self.dim is not None and c.embedding.dim != self.dim:
                raise DimMismatch(self.dim, c.embedding.dim)
        with self._lock:
            doc_lock = self._doc_locks.setdefault(doc_id, threading.Lock())
        with doc_lock:
            with self._lock:
                if self.dim is None and chunks:
                    self.dim = chunks[0].embedding.dim  # type: ignore[union-attr]
                kept = tuple(c for c in self._chunks if c.doc_id != doc_id)
                self._chunks = kept + tuple(chunks)

    def search_top_k(self, query_vec: EmbeddingVector, k: int) -> list[SearchHit]:
        """The k highest-cosine chunks, ties broken by insertion order."""
        if k < 1:
            raise InvalidParams(f"k={k}")
        snapshot = self._chunks
        if snapshot and self.dim is not None and query_vec.dim != self.dim:
            raise DimMismatch(self.dim, query_vec.dim)
        scored = [
            (cosine(query_vec, c.embedding), i, c)  # type: ignore[arg-type]
            for i, c in enumerate(snapshot)
        ]
        scored.sort(key=lambda t: (-t[0], t[1]))
        return [
            SearchHit(chunk=c, score=s, rank=rank)
            for rank, (s, _, c) in enumerate(scored[:k], start=1)
        ]

    def export_lines(self) -> Iterator[str]:
        for c in self._chunks:
            yield json.dumps(
                {
                    "doc_id": c.doc_id,
                    "chunk_index": c.chunk_index,
                    "char_offset": c.char_offset,
                    "text": c.text,
                    "embedding": list(c.embedding.values) if c.embedding else None,
                },
                ensure_ascii=False,
            )


# --- search refinement -----------------------------------------------------------


def term_overlap(query_text: str, chunk_text: str) -> float:
    """Fraction of whitespace-separated query terms present in the chunk."""
    terms = query_text.casefold().split()
    if not terms:
        return 0.0
    hay = chunk_text.casefold()
    return sum(1 for t in terms if t in hay) / len(terms)


def rerank(hits: list[SearchHit], query_text: str) -> list[SearchHit]:
    """Blend rerank: 0.7·cosine + 0.3·query-term overlap, stable by old rank."""
    rescored = [
        (0.7 * h.score + 0.3 * term_overlap(query_text, h.chunk.text), i, h)
        for i, h in enumerate(hits)
    ]
    rescored.sort(key=lambda t: (-t[0], t[1]))
    return [
        replace(h, score=s, rank=rank) for rank, (s, _, h) in enumerate(rescored, start=1)
    ]


# --- ingestion --------------------------------------------------------------------


def ingest_document(
    source_bytes: bytes,
    media_type: str,
    index: VectorIndex,
    embedder: Embedder,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    overlap: int = DEFAULT_OVERLAP,
    metadata: dict[str, str] | None = None,
) -> tuple[str, int]:
    """Decode, split, embed, and upsert a document.

    The doc_id is the content digest, so re-ingesting identical bytes is
    idempotent: same id, chunks replaced in place.
    """
    if media_type.split(";")[0].strip() not in TEXT_MEDIA_TYPES:
        raise UnsupportedMediaType(media_type)
    try:
        text = source_bytes.decode("utf-8")
    except UnicodeDecodeError as err:
        raise DecodeError(str(err)) from err
    doc_id = sha256_hex(source_bytes)
    meta = tuple(sorted((metadata or {}).items()))
    chunks = [
        replace(
            c,
            doc_id=doc_id,
            metadata=meta,
            embedding=_embed_chunk(embedder, c.text),
        )
        for c in split_recursive(text, chunk_size, overlap)
    ]
    index.upsert_document(doc_id, chunks)
    return doc_id, len(chunks)


def _embed_chunk(embedder: Embedder, text: str) -> EmbeddingVector:
    if not text.strip():
        return EmbeddingVector(values=(0.0,) * getattr(embedder, "dim", 26))
    return embedder.embed(text)


# --- answering -------------------------------------------------------------------


def retrieve(
    query_text: str,
    index: VectorIndex,
    embedder: Embedder,
    k: int = DEFAULT_TOP_K,
    tau: float = DEFAULT_TAU,
) -> list[SearchHit]:
    """Top-k search plus rerank, widening once when hits look weak.

    When fewer than two reranked hits clear half the threshold, the search
    re-runs with k doubled (capped at MAX_EXPANDED_K) exactly once.
    """
    if len(index) == 0:
        return []
    query_vec = embedder.embed(query_text)
    hits = rerank(index.search_top_k(query_vec, k), query_text)
    if sum(1 for h in hits if h.score > tau / 2) < 2 and k < MAX_EXPANDED_K:
        wider = min(2 * k, MAX_EXPANDED_K)
        hits = rerank(index.search_top_k(query_vec, wider), query_text)
    return hits


def answer_with_fallback(
    query_text: str,
    index: VectorIndex,
    tau: float,
    embedder: Embedder,
    generate: Callable[[str, list[SearchHit]], str],
    web_search: Callable[[str], dict] | None = None,
    k: int = DEFAULT_TOP_K,
) -> RagAnswer:
    """Answer from the index when retrieval is relevant enough, else the web.

    The web tool is invoked exactly once, and only when the gate fails.
    """
    hits = retrieve(query_text, index, embedder, k=k, tau=tau)
    top_score = hits[0].score if hits else -1.0
    if hits and top_score >= tau:
        text = generate(query_text, hits)
        return RagAnswer(text=text, source="rag", top_score=top_score, hits=tuple(hits))
    if web_search is None:
        raise NoWebTool("web fallback required but no web-search tool registered")
    result = web_search(query_text)
    return RagAnswer(
        text=result.get("text", ""),
        source="web",
        top_score=top_score,
        citation=result.get("citation", "web-search"),
    )
