"""The three memory architectures behind one observe / context_for interface."""

from __future__ import annotations

import enum
import threading
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from dualmem.backends import EmbeddingBackend, ScriptedEmbedder
from dualmem.core import (
    DEFAULT_COUNTER,
    DEFAULT_PREAMBLE,
    AssembledContext,
    Message,
    Role,
    TokenCounter,
    assemble_context,
    build_context,
)
from dualmem.episodic import EpisodicBuffer
from dualmem.full_context import FullHistory, full_context_answer_context
from dualmem.profile import (
    ConsolidationFailure,
    ConsolidationLog,
    ConsolidationPolicy,
    ConsolidationRequest,
    Consolidator,
    RuleBasedConsolidator,
    SemanticProfile,
    build_consolidation_prompt,
    consolidate,
    should_consolidate,
)
from dualmem.vector import (
    CHUNK_OVERLAP,
    CHUNK_SIZE,
    TOP_K,
    Chunk,
    ChunkIndex,
    chunk_history,
    retrieve_top_k,
)


class Architecture(str, enum.Enum):
    DUAL_PROCESS = "dual_process"
    RAG = "rag"
    FULL_CONTEXT = "full_context"

    @property
    def short(self) -> str:
        return {"dual_process": "dp", "rag": "rag", "full_context": "fc"}[self.value]

    @classmethod
    def from_short(cls, name: str) -> "Architecture":
        for arch in cls:
            if name in (arch.short, arch.value):
                return arch
        raise ValueError(f"unknown architecture {name!r}")


class Memory(Protocol):
    architecture: Architecture

    def observe(self, msg: Message) -> None: ...

    def context_for(self, query: str) -> AssembledContext: ...


@dataclass(frozen=True)
class ConsolidationCall:
    """Token accounting for one consolidation event (for the cost model)."""

    latest_index: int
    input_tokens: int
    output_tokens: int


class DualProcessMemory:
    """Episodic window plus consolidated profile.

    Consolidation fires on every ``policy.cadence``-th agent turn. Its
    snapshot covers the current window and every older message not yet
    consolidated, so no fact falls through the gap when the cadence spans
    more messages than the window holds. With ``background=True`` each
    consolidation runs on a single worker thread: jobs execute one at a time
    in submission order, and ``context_for`` reads whichever profile was
    last published without waiting.
    """

    architecture = Architecture.DUAL_PROCESS

    def __init__(
        self,
        *,
        capacity: int = 10,
        policy: ConsolidationPolicy = ConsolidationPolicy(),
        consolidator: Consolidator | None = None,
        preamble: str = DEFAULT_PREAMBLE,
        counter: TokenCounter = DEFAULT_COUNTER,
        account_calls: bool = False,
        background: bool = False,
    ):
        self.buffer = EpisodicBuffer(capacity)
        self.policy = policy
        self.consolidator = consolidator if consolidator is not None else RuleBasedConsolidator()
        self.preamble = preamble
        self.counter = counter
        self.account_calls = account_calls
        self.log = ConsolidationLog()
        self.failures: list[ConsolidationFailure] = []
        self.calls: list[ConsolidationCall] = []
        self._profile = SemanticProfile.empty()
        self._pending: list[Message] = []
        self._agent_turns = 0
        self._publish_lock = threading.Lock()
        self._executor = ThreadPoolExecutor(max_workers=1) if background else None
        self._futures: list[Future] = []

    @property
    def profile(self) -> SemanticProfile:
        return self._profile

    def observe(self, msg: Message) -> None:
        self.buffer.append(msg)
        self._pending.append(msg)
        if msg.role is Role.AGENT:
            self._agent_turns += 1
            if should_consolidate(self._agent_turns, self.policy):
                self._schedule()

    def _schedule(self) -> None:
        if not self._pending:
            return
        window = self.buffer.window()
        scope = {m.index: m for m in window}
        scope.update((m.index, m) for m in self._pending)
        ordered = [scope[i] for i in sorted(scope)]
        self._pending = []
        n_exchange = 2 if len(ordered) >= 2 else 1
        snapshot, exchange = tuple(ordered[:-n_exchange]), tuple(ordered[-n_exchange:])
        if self._executor is None:
            self._run(snapshot, exchange)
        else:
            self._futures.append(self._executor.submit(self._run, snapshot, exchange))

    def _run(self, snapshot: tuple[Message, ...], exchange: tuple[Message, ...]) -> None:
        # the prior profile is read when the job runs, so queued jobs chain correctly
        req = ConsolidationRequest(snapshot, self._profile, exchange)
        new = consolidate(req, self.consolidator, self.policy, counter=self.counter,
                          on_failure=self.failures.append)
        if self.account_calls and new is not req.prior_profile:
            self.calls.append(ConsolidationCall(
                req.latest_index, self.counter(build_consolidation_prompt(req)), new.token_count))
        with self._publish_lock:
            self.log.record(new)
            self._profile = new

    def flush(self) -> None:
        """Consolidate anything still pending and wait for queued jobs."""
        self._schedule()
        self.wait()

    def wait(self) -> None:
        for fut in self._futures:
            fut.result()
        self._futures = []

    def close(self) -> None:
        self.wait()
        if self._executor is not None:
            self._executor.shutdown()

    def context_for(self, query: str) -> AssembledContext:
        return assemble_context(self._profile, self.buffer, query,
                                preamble=self.preamble, counter=self.counter)


class RagMemory:
    """Vector retrieval over the complete history, re-chunked lazily before a query.

    Chunk embeddings are cached by text, so re-chunking after new messages
    only embeds the chunks that changed.
    """

    architecture = Architecture.RAG

    def __init__(
        self,
        embedder: EmbeddingBackend | None = None,
        *,
        k: int = TOP_K,
        chunk_size: int = CHUNK_SIZE,
        overlap: int = CHUNK_OVERLAP,
        preamble: str = DEFAULT_PREAMBLE,
        counter: TokenCounter = DEFAULT_COUNTER,
    ):
        self.embedder = embedder if embedder is not None else ScriptedEmbedder()
        self.k = k
        self.chunk_size = chunk_size
        self.overlap = overlap
        self.preamble = preamble
        self.counter = counter
        self.history: list[Message] = []
        self._index: ChunkIndex | None = None
        self._cache: dict[str, np.ndarray] = {}
        self.last_retrieved: tuple[Chunk, ...] = ()

    def observe(self, msg: Message) -> None:
        if msg.index != len(self.history):
            raise ValueError(f"out-of-sequence message {msg.index}")
        self.history.append(msg)
        self._index = None

    @property
    def index(self) -> ChunkIndex:
        if self._index is None:
            chunks = chunk_history(self.history, self.chunk_size, self.overlap, self.counter)
            index = ChunkIndex(self.embedder.dim)
            if chunks:
                vecs = []
                for c in chunks:
                    if c.text not in self._cache:
                        self._cache[c.text] = self.embedder.embed(c.text)
                    vecs.append(self._cache[c.text])
                index.extend(chunks, np.vstack(vecs))
            self._index = index
        return self._index

    def context_for(self, query: str) -> AssembledContext:
        hits = retrieve_top_k(self.index, query, self.embedder, self.k)
        self.last_retrieved = tuple(c for c, _ in hits)
        return build_context(query, preamble=self.preamble,
                             chunks=[c.text for c in self.last_retrieved], counter=self.counter)


class FullContextMemory:
    architecture = Architecture.FULL_CONTEXT

    def __init__(
        self,
        history: FullHistory | None = None,
        *,
        preamble: str = DEFAULT_PREAMBLE,
    ):
        self.history = history if history is not None else FullHistory()
        self.preamble = preamble

    def observe(self, msg: Message) -> None:
        self.history.append_and_truncate(msg)

    def context_for(self, query: str) -> AssembledContext:
        return full_context_answer_context(self.history, query, preamble=self.preamble)
