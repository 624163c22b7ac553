"""Shared data model: messages, token counting and context assembly."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:
    from dualmem.episodic import EpisodicBuffer
    from dualmem.profile import SemanticProfile

DEFAULT_PREAMBLE = "You are a research assistant with long-term memory of this project."
PROFILE_HEADER = "KNOWN FACTS:"
RETRIEVED_HEADER = "RETRIEVED CONTEXT:"
QUERY_LABEL = "QUERY:"

_WS_RUN = re.compile(r"\s+")


class Role(str, enum.Enum):
    USER = "user"
    AGENT = "agent"
    SYSTEM = "system"

    @property
    def label(self) -> str:
        return self.value.upper()


class TokenCounter:
    """Deterministic token counter.

    The heuristic mode collapses whitespace runs to one character and returns
    ``ceil(chars / divisor)``. It approximates commercial BPE tokenizers
    closely enough for budgeting; pass ``external`` to count exactly with a
    real tokenizer.
    """

    def __init__(self, divisor: int = 4, external: Callable[[str], int] | None = None):
        if divisor <= 0:
            raise ValueError("divisor must be positive")
        self.divisor = divisor
        self.external = external

    @property
    def mode(self) -> str:
        return "external" if self.external is not None else "heuristic"

    def __call__(self, text: str) -> int:
        if not text:
            return 0
        if self.external is not None:
            return int(self.external(text))
        return -(-len(_WS_RUN.sub(" ", text)) // self.divisor)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, TokenCounter)
            and self.divisor == other.divisor
            and self.external is other.external
        )

    def __hash__(self) -> int:
        return hash((self.divisor, id(self.external)))

    def __repr__(self) -> str:
        return f"TokenCounter(mode={self.mode!r}, divisor={self.divisor})"


DEFAULT_COUNTER = TokenCounter()


def count_tokens(text: str, counter: TokenCounter = DEFAULT_COUNTER) -> int:
    return counter(text)


class SpanCounter:
    """O(1) heuristic token counts for arbitrary slices of one text.

    Precomputes a prefix sum of characters that survive whitespace
    collapsing, so ``count(a, b) == counter(text[a:b])`` without rescanning.
    Only valid for heuristic counters.
    """

    def __init__(self, text: str, counter: TokenCounter = DEFAULT_COUNTER):
        if counter.external is not None:
            raise ValueError("SpanCounter requires a heuristic counter")
        self.text = text
        self.divisor = counter.divisor
        n = len(text)
        ws = np.fromiter((c.isspace() for c in text), dtype=bool, count=n)
        # a char is dropped by collapsing iff it and its predecessor are whitespace
        dropped = np.zeros(n, dtype=bool)
        if n > 1:
            dropped[1:] = ws[1:] & ws[:-1]
        self._dropped = dropped
        self._prefix = np.concatenate(([0], np.cumsum(~dropped)))

    def collapsed_len(self, a: int, b: int) -> int:
        if b <= a:
            return 0
        kept = int(self._prefix[b] - self._prefix[a])
        # the first char of a slice always survives
        return kept + (1 if self._dropped[a] else 0)

    def count(self, a: int, b: int) -> int:
        return -(-self.collapsed_len(a, b) // self.divisor)


@dataclass(frozen=True)
class Message:
    role: Role
    text: str
    index: int
    token_count: int

    @classmethod
    def create(
        cls, role: Role | str, text: str, index: int, counter: TokenCounter = DEFAULT_COUNTER
    ) -> "Message":
        if index < 0:
            raise ValueError("message index must be non-negative")
        return cls(Role(role), text, index, counter(text))

    def line(self) -> str:
        """Role-labelled serialization used in every context format."""
        return f"{self.role.label}: {self.text}"

    def to_record(self) -> dict:
        return {
            "index": self.index,
            "role": self.role.value,
            "text": self.text,
            "token_count": self.token_count,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Message":
        return cls(Role(rec["role"]), rec["text"], int(rec["index"]), int(rec["token_count"]))


def check_sequence(messages: Sequence[Message]) -> None:
    """Raise if indices are not 0..n-1 in order."""
    for expected, msg in enumerate(messages):
        if msg.index != expected:
            raise ValueError(f"message at position {expected} has index {msg.index}")


def serialize_history(messages: Iterable[Message]) -> str:
    return "\n".join(m.line() for m in messages)


@dataclass(frozen=True)
class AssembledContext:
    """Inference input in fixed part order.

    Parts are, in order: system preamble, profile block, retrieved chunks,
    episodic (or full-history) message lines, and the query line.
    ``total_tokens`` is the sum of the per-part counts.
    """

    system_preamble: str
    profile_text: str
    episodic_messages: tuple[Message, ...]
    query: str
    total_tokens: int
    retrieved_chunks: tuple[str, ...] = ()
    parts: tuple[str, ...] = field(default=(), repr=False)

    def render(self) -> str:
        return "\n".join(self.parts)

    def body(self) -> str:
        """Everything except the system preamble."""
        parts = self.parts[1:] if self.system_preamble else self.parts
        return "\n".join(parts)


def build_context(
    query: str,
    *,
    preamble: str = DEFAULT_PREAMBLE,
    profile_text: str = "",
    messages: Sequence[Message] = (),
    chunks: Sequence[str] = (),
    counter: TokenCounter = DEFAULT_COUNTER,
    line_tokens: Sequence[int] | None = None,
) -> AssembledContext:
    """Assemble a context from raw ingredients.

    ``line_tokens`` may carry precomputed counts for ``messages`` lines; the
    full-context baseline uses it to avoid recounting 100k-message histories.
    """
    if not query or not query.strip():
        raise ValueError("query must be non-empty")
    parts: list[str] = []
    total = 0
    if preamble:
        parts.append(preamble)
        total += counter(preamble)
    if profile_text:
        block = f"{PROFILE_HEADER}\n{profile_text}"
        parts.append(block)
        total += counter(block)
    if chunks:
        parts.append(RETRIEVED_HEADER)
        total += counter(RETRIEVED_HEADER)
        for chunk in chunks:
            parts.append(chunk)
            total += counter(chunk)
    lines = [m.line() for m in messages]
    parts.extend(lines)
    if line_tokens is None:
        total += sum(counter(line) for line in lines)
    else:
        total += int(sum(line_tokens))
    qline = f"{QUERY_LABEL} {query}"
    parts.append(qline)
    total += counter(qline)
    return AssembledContext(
        system_preamble=preamble,
        profile_text=profile_text,
        episodic_messages=tuple(messages),
        query=query,
        total_tokens=total,
        retrieved_chunks=tuple(chunks),
        parts=tuple(parts),
    )


def assemble_context(
    profile: "SemanticProfile | None",
    buffer: "EpisodicBuffer",
    query: str,
    *,
    preamble: str = DEFAULT_PREAMBLE,
    counter: TokenCounter = DEFAULT_COUNTER,
) -> AssembledContext:
    """Dual-process context: profile and episodic window side by side."""
    profile_text = profile.text if profile is not None else ""
    return build_context(
        query,
        preamble=preamble,
        profile_text=profile_text,
        messages=buffer.window(),
        counter=counter,
    )
