"""RAG baseline: token-aware recursive chunking, embedding and cosine top-k retrieval."""

from __future__ import annotations

import bisect
import re
import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from dualmem.backends import EmbeddingBackend
from dualmem.core import (
    DEFAULT_COUNTER,
    DEFAULT_PREAMBLE,
    AssembledContext,
    Message,
    SpanCounter,
    TokenCounter,
    build_context,
)

CHUNK_SIZE = 500
CHUNK_OVERLAP = 50
TOP_K = 5

_PARAGRAPH = re.compile(r"\n\s*\n")
_SENTENCE = re.compile(r"[.!?][\"')\]]*\s+")
_WHITESPACE = re.compile(r"\s+")


@dataclass(frozen=True)
class Chunk:
    id: int
    text: str
    source_span: tuple[int, int]
    token_count: int
    # character offsets into the serialized history
    start: int = 0
    end: int = 0


class _Counter:
    """Slice counter: O(1) prefix sums for heuristic counters, direct counting otherwise."""

    def __init__(self, text: str, counter: TokenCounter):
        self.text = text
        self._fast = SpanCounter(text, counter) if counter.external is None else None
        self._counter = counter

    def __call__(self, a: int, b: int) -> int:
        if self._fast is not None:
            return self._fast.count(a, b)
        return self._counter(self.text[a:b])


def _max_end(count: _Counter, start: int, n: int, limit: int) -> int:
    """Largest end with count(start, end) <= limit (count is monotone in end)."""
    lo, hi = start, n
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if count(start, mid) <= limit:
            lo = mid
        else:
            hi = mid - 1
    return lo


def _overlap_start(count: _Counter, start: int, end: int, overlap: int) -> int:
    """Largest p in (start, end) with count(p, end) == overlap.

    count(p, end) grows by at most one as p moves left one character, so
    every value up to count(start, end) is hit.
    """
    if overlap == 0:
        return end
    lo, hi = start + 1, end
    # smallest-overlap side: find largest p with count(p, end) >= overlap
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if count(mid, end) >= overlap:
            lo = mid
        else:
            hi = mid - 1
    if count(lo, end) != overlap:
        raise AssertionError("overlap search failed")  # unreachable for monotone counters
    return lo


def _preferred_end(text: str, boundaries: Sequence[int], lo: int, hi: int) -> int | None:
    """Latest split point in (lo, hi] at the most preferred level available."""
    i = bisect.bisect_right(boundaries, hi) - 1
    if i >= 0 and boundaries[i] > lo:
        return boundaries[i]
    window = text[lo:hi]
    for pattern in (_PARAGRAPH, _SENTENCE, _WHITESPACE):
        best = None
        for m in pattern.finditer(window):
            if m.end() > 0:
                best = lo + m.end()
        if best is not None:
            return best
    return None


def chunk_text(
    text: str,
    *,
    chunk_size: int = CHUNK_SIZE,
    overlap: int = CHUNK_OVERLAP,
    boundaries: Sequence[int] = (),
    counter: TokenCounter = DEFAULT_COUNTER,
) -> list[tuple[int, int]]:
    """Split ``text`` into (start, end) character spans.

    Each span holds at most ``chunk_size`` tokens and consecutive spans share
    exactly ``overlap`` tokens. Chunk ends prefer ``boundaries`` (message
    starts), then paragraph breaks, sentence ends, whitespace, and finally a
    hard cut at the token limit. A preferred split is only taken if it keeps
    the chunk at least half full, which also guarantees forward progress.
    """
    if chunk_size <= overlap or overlap < 0:
        raise ValueError("need chunk_size > overlap >= 0")
    n = len(text)
    if n == 0:
        return []
    count = _Counter(text, counter)
    min_tokens = max(overlap + 1, chunk_size // 2)
    spans: list[tuple[int, int]] = []
    start = 0
    while True:
        hard_end = _max_end(count, start, n, chunk_size)
        if hard_end >= n:
            spans.append((start, n))
            return spans
        if hard_end <= start:
            raise ValueError("chunk_size too small to make progress")
        lo = _max_end(count, start, hard_end, min_tokens - 1)
        end = _preferred_end(text, boundaries, lo, hard_end) or hard_end
        spans.append((start, end))
        start = _overlap_start(count, start, end, overlap)


def _message_offsets(messages: Sequence[Message]) -> tuple[str, list[int]]:
    offsets = []
    pos = 0
    lines = []
    for m in messages:
        offsets.append(pos)
        line = m.line()
        lines.append(line)
        pos += len(line) + 1
    return "\n".join(lines), offsets


def chunk_history(
    messages: Sequence[Message],
    chunk_size: int = CHUNK_SIZE,
    overlap: int = CHUNK_OVERLAP,
    counter: TokenCounter = DEFAULT_COUNTER,
) -> list[Chunk]:
    if chunk_size <= overlap or overlap < 0:
        raise ValueError("need chunk_size > overlap >= 0")
    text, offsets = _message_offsets(messages)
    spans = chunk_text(text, chunk_size=chunk_size, overlap=overlap,
                       boundaries=offsets[1:], counter=counter)
    chunks = []
    for cid, (a, b) in enumerate(spans):
        first = bisect.bisect_right(offsets, a) - 1
        last = bisect.bisect_right(offsets, b - 1) - 1
        chunks.append(Chunk(
            id=cid,
            text=text[a:b],
            source_span=(messages[first].index, messages[last].index),
            token_count=counter(text[a:b]),
            start=a,
            end=b,
        ))
    return chunks


def reconstruct(chunks: Sequence[Chunk]) -> str:
    """Concatenate chunks with each overlap removed."""
    out = []
    prev_end = 0
    for c in chunks:
        out.append(c.text[max(0, prev_end - c.start):])
        prev_end = c.end
    return "".join(out)


class ChunkIndex:
    """In-memory exhaustive cosine index.

    Vectors are stored unit-normalized. Appends are serialized and publish a
    new immutable view atomically, so concurrent readers never see a
    half-updated index.
    """

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dimension must be positive")
        self.dim = dim
        self._lock = threading.Lock()
        self._view: tuple[tuple[Chunk, ...], np.ndarray, np.ndarray] = (
            (), np.zeros((0, dim)), np.zeros(0, dtype=np.int64))

    @classmethod
    def from_unit_vectors(cls, dim: int, chunks: Sequence[Chunk], matrix: np.ndarray) -> "ChunkIndex":
        """Rebuild from already-normalized vectors without renormalizing (exact round trip)."""
        index = cls(dim)
        matrix = np.asarray(matrix, dtype=float).reshape(len(chunks), dim)
        if not np.all(np.isfinite(matrix)):
            raise ValueError("vectors must be finite")
        index._view = (tuple(chunks), matrix, np.array([c.id for c in chunks], dtype=np.int64))
        return index

    def __len__(self) -> int:
        return len(self._view[0])

    @property
    def chunks(self) -> tuple[Chunk, ...]:
        return self._view[0]

    @property
    def vectors(self) -> np.ndarray:
        return self._view[1]

    def add(self, chunk: Chunk, vector: np.ndarray) -> None:
        self.extend([chunk], np.asarray(vector, dtype=float).reshape(1, -1))

    def extend(self, chunks: Sequence[Chunk], vectors: np.ndarray) -> None:
        vectors = np.asarray(vectors, dtype=float)
        if vectors.ndim != 2 or vectors.shape != (len(chunks), self.dim):
            raise ValueError(f"expected vectors of shape ({len(chunks)}, {self.dim})")
        if not np.all(np.isfinite(vectors)):
            raise ValueError("vectors must be finite")
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ValueError("zero vectors cannot be indexed")
        with self._lock:
            old_chunks, old_matrix, old_ids = self._view
            new_ids = np.array([c.id for c in chunks], dtype=np.int64)
            # one reference swap publishes the new view
            self._view = (
                old_chunks + tuple(chunks),
                np.vstack([old_matrix, vectors / norms]),
                np.concatenate([old_ids, new_ids]),
            )

    def search(self, query_vector: np.ndarray, k: int = TOP_K) -> list[tuple[Chunk, float]]:
        chunks, matrix, ids = self._view
        if not chunks or k <= 0:
            return []
        q = np.asarray(query_vector, dtype=float)
        q = q / np.linalg.norm(q)
        scores = np.clip(matrix @ q, -1.0, 1.0)
        order = np.lexsort((ids, -scores))[:k]
        return [(chunks[i], float(scores[i])) for i in order]


def build_index(chunks: Sequence[Chunk], embedder: EmbeddingBackend) -> ChunkIndex:
    index = ChunkIndex(embedder.dim)
    if chunks:
        index.extend(chunks, np.vstack([embedder.embed(c.text) for c in chunks]))
    return index


def embed(text: str, backend: EmbeddingBackend) -> np.ndarray:
    return backend.embed(text)


def retrieve_top_k(
    index: ChunkIndex, query: str, embedder: EmbeddingBackend, k: int = TOP_K
) -> list[tuple[Chunk, float]]:
    """Top ``k`` chunks by cosine similarity, ties broken by ascending id.

    An empty index returns ``[]``: a cold store, not an error.
    """
    if len(index) == 0:
        return []
    return index.search(embedder.embed(query), k)


def rag_answer_context(
    index: ChunkIndex,
    query: str,
    embedder: EmbeddingBackend,
    *,
    k: int = TOP_K,
    preamble: str = DEFAULT_PREAMBLE,
    counter: TokenCounter = DEFAULT_COUNTER,
) -> AssembledContext:
    hits = retrieve_top_k(index, query, embedder, k)
    return build_context(query, preamble=preamble, chunks=[c.text for c, _ in hits], counter=counter)
