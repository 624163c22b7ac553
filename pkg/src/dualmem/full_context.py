"""Full-context baseline: keep the whole history, truncating to a token-bounded suffix."""

from __future__ import annotations

from collections import deque

from dualmem.core import (
    DEFAULT_COUNTER,
    DEFAULT_PREAMBLE,
    AssembledContext,
    Message,
    Role,
    TokenCounter,
    build_context,
)

TRUNCATION_LIMIT = 120_000
HARD_MODEL_LIMIT = 128_000


class FullHistory:
    """Complete message history with whole-message suffix truncation.

    ``cumulative_tokens`` tracks message token counts and is what the
    truncation limit applies to. The serialized context also carries role
    labels, preamble and query, so a history sitting just under the
    truncation limit can still exceed ``hard_model_limit`` when messages
    are short. That gap is what turns long realistic runs into overflows.
    Pass ``truncation_limit=None`` to keep everything.
    """

    def __init__(
        self,
        truncation_limit: int | None = TRUNCATION_LIMIT,
        hard_model_limit: int = HARD_MODEL_LIMIT,
        counter: TokenCounter = DEFAULT_COUNTER,
    ):
        if truncation_limit is not None and truncation_limit < 1:
            raise ValueError("truncation_limit must be positive")
        self.truncation_limit = truncation_limit
        self.hard_model_limit = hard_model_limit
        self.counter = counter
        self._messages: deque[Message] = deque()
        self._line_tokens: deque[int] = deque()
        self.cumulative_tokens = 0
        self.line_token_total = 0
        self.total_appended = 0
        self.dropped = 0

    @property
    def messages(self) -> tuple[Message, ...]:
        return tuple(self._messages)

    def __len__(self) -> int:
        return len(self._messages)

    def first_retained_index(self) -> int | None:
        return self._messages[0].index if self._messages else None

    def append_and_truncate(self, msg: Message) -> "FullHistory":
        if msg.role is Role.SYSTEM:
            raise ValueError("system messages are not part of the history")
        if msg.index != self.total_appended:
            raise ValueError(
                f"out-of-sequence message: expected index {self.total_appended}, got {msg.index}"
            )
        if self.truncation_limit is not None and msg.token_count > self.truncation_limit:
            raise ValueError(
                f"message {msg.index} has {msg.token_count} tokens, above the truncation limit"
            )
        line_tokens = self.counter(msg.line())
        self._messages.append(msg)
        self._line_tokens.append(line_tokens)
        self.cumulative_tokens += msg.token_count
        self.line_token_total += line_tokens
        self.total_appended += 1
        if self.truncation_limit is not None:
            while self.cumulative_tokens > self.truncation_limit:
                old = self._messages.popleft()
                self.cumulative_tokens -= old.token_count
                self.line_token_total -= self._line_tokens.popleft()
                self.dropped += 1
        return self

    def overflows(self, context: AssembledContext) -> bool:
        return context.total_tokens > self.hard_model_limit


def full_context_answer_context(
    history: FullHistory,
    query: str,
    *,
    preamble: str = DEFAULT_PREAMBLE,
) -> AssembledContext:
    """Preamble, every retained message in order, then the query.

    The context is returned even when it exceeds the hard model limit;
    callers check ``history.overflows(ctx)`` (and backends enforce the limit)
    so that an overflow is recorded as an outcome instead of being hidden by
    further truncation.
    """
    return build_context(
        query,
        preamble=preamble,
        messages=history._messages,
        counter=history.counter,
        line_tokens=history._line_tokens,
    )
