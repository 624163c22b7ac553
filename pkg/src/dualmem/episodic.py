"""Fixed-capacity sliding window over the most recent conversational turns."""

from __future__ import annotations

import threading
from collections import deque

from dualmem.core import Message, Role


class EpisodicBuffer:
    """FIFO window of the last ``capacity`` messages.

    Each user or agent turn counts as one slot. System messages are not
    episodic and are rejected. Appends must arrive in strict index order
    starting at 0.
    """

    def __init__(self, capacity: int = 10):
        if capacity < 1:
            raise ValueError("capacity must be a positive integer")
        self._capacity = capacity
        self._entries: deque[Message] = deque(maxlen=capacity)
        self._snapshot: tuple[Message, ...] | None = ()
        self._lock = threading.Lock()
        self.total_appended = 0

    @property
    def capacity(self) -> int:
        return self._capacity

    def append(self, msg: Message) -> "EpisodicBuffer":
        if msg.role is Role.SYSTEM:
            raise ValueError("system messages are not stored in the episodic window")
        if msg.index != self.total_appended:
            raise ValueError(
                f"out-of-sequence message: expected index {self.total_appended}, got {msg.index}"
            )
        with self._lock:
            self._entries.append(msg)
            self.total_appended += 1
            self._snapshot = None
        return self

    def window(self) -> tuple[Message, ...]:
        """Snapshot of the window, oldest first. Later appends never mutate it."""
        with self._lock:
            if self._snapshot is None:
                self._snapshot = tuple(self._entries)
            return self._snapshot

    def token_footprint(self) -> int:
        return sum(m.token_count for m in self.window())

    def __len__(self) -> int:
        return len(self._entries)

    def __repr__(self) -> str:
        return f"EpisodicBuffer(capacity={self._capacity}, size={len(self)}, total_appended={self.total_appended})"
