"""Consolidated semantic profile and the consolidation pipeline that maintains it."""

from __future__ import annotations

import enum
import hashlib
import logging
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

from dualmem.backends import ChatBackend, CallRecord, Outcome
from dualmem.core import DEFAULT_COUNTER, Message, TokenCounter
from dualmem.markers import merge_facts, parse_profile, render_profile

logger = logging.getLogger(__name__)

PROFILE_SOFT_LIMIT = 120_000

INSTRUCTION_BLOCK = """\
You are maintaining a scientific research profile.
Extract:
- Project goals and hypotheses
- Analysis parameters (thresholds, cutoffs)
- Dataset specifications
- Preferences (visualization, methods)

If the new message contradicts existing facts,
UPDATE the profile with the most recent value.
Preserve technical precision."""

REQUIRED_DIRECTIVES = (
    "- Project goals and hypotheses",
    "- Analysis parameters (thresholds, cutoffs)",
    "- Dataset specifications",
    "- Preferences (visualization, methods)",
    "UPDATE the profile with the most recent value.",
)

EXISTING_HEADER = "EXISTING PROFILE:"
SNAPSHOT_HEADER = "RECENT MESSAGES:"
EXCHANGE_HEADER = "LATEST EXCHANGE:"
OUTPUT_CUE = "UPDATED PROFILE:"


@dataclass(frozen=True)
class SemanticProfile:
    text: str = ""
    version: int = 0
    token_count: int = 0
    last_consolidated_index: int = -1

    @classmethod
    def empty(cls) -> "SemanticProfile":
        return cls()

    @classmethod
    def from_text(
        cls, text: str, version: int, last_index: int, counter: TokenCounter = DEFAULT_COUNTER
    ) -> "SemanticProfile":
        return cls(text, version, counter(text), last_index)

    def to_record(self) -> dict:
        return {
            "version": self.version,
            "last_consolidated_index": self.last_consolidated_index,
            "token_count": self.token_count,
            "text": self.text,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "SemanticProfile":
        return cls(rec["text"], int(rec["version"]), int(rec["token_count"]),
                   int(rec["last_consolidated_index"]))


class ConflictRule(str, enum.Enum):
    TEMPORAL_PRECEDENCE = "temporal_precedence"


@dataclass(frozen=True)
class ConsolidationPolicy:
    # counted in agent turns: 1 consolidates after every agent response
    cadence: int = 10
    consolidator_temperature: float = 0.0
    conflict_rule: ConflictRule = ConflictRule.TEMPORAL_PRECEDENCE
    max_retries: int = 2
    soft_limit_tokens: int = PROFILE_SOFT_LIMIT

    def __post_init__(self):
        if self.cadence < 1:
            raise ValueError("cadence must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass(frozen=True)
class ConsolidationRequest:
    episodic_snapshot: tuple[Message, ...]
    prior_profile: SemanticProfile
    latest_exchange: tuple[Message, ...]
    prompt_template: str = INSTRUCTION_BLOCK

    def __post_init__(self):
        if not self.latest_exchange:
            raise ValueError("latest exchange must contain at least one message")
        in_scope = [m.index for m in self.episodic_snapshot] + [m.index for m in self.latest_exchange]
        top = sorted(set(in_scope))[-len(self.latest_exchange):]
        if sorted(m.index for m in self.latest_exchange) != top:
            raise ValueError("latest exchange must hold the highest indices in scope")
        missing = [d for d in REQUIRED_DIRECTIVES if d not in self.prompt_template]
        if missing:
            raise ValueError(f"prompt template lacks required sections: {missing}")

    @property
    def latest_index(self) -> int:
        return max(m.index for m in self.latest_exchange)


def _lines(messages: Sequence[Message]) -> str:
    return "\n".join(m.line() for m in messages)


def build_consolidation_prompt(req: ConsolidationRequest) -> str:
    parts = [req.prompt_template]
    if req.prior_profile.text:
        parts.append(f"{EXISTING_HEADER}\n{req.prior_profile.text}")
    if req.episodic_snapshot:
        parts.append(f"{SNAPSHOT_HEADER}\n{_lines(req.episodic_snapshot)}")
    parts.append(f"{EXCHANGE_HEADER}\n{_lines(req.latest_exchange)}")
    parts.append(OUTPUT_CUE)
    return "\n\n".join(parts)


class ConsolidationError(RuntimeError):
    pass


class Consolidator(Protocol):
    """Produces the full text of the next profile from a request."""

    def update(self, req: ConsolidationRequest) -> str: ...


class RuleBasedConsolidator:
    """Deterministic oracle: merge ``FACT key=value`` markers by temporal precedence.

    Markers are read from the prior profile, then the snapshot, then the
    latest exchange, so a later assignment to a key always wins.
    ``drop_fraction`` deliberately forgets a deterministic share of *new*
    keys, giving a degraded consolidator for ablations. An empty result is
    legitimate here (no facts seen yet), unlike an empty LLM reply.
    """

    allows_empty = True

    def __init__(self, drop_fraction: float = 0.0, counter: TokenCounter = DEFAULT_COUNTER):
        if not 0.0 <= drop_fraction < 1.0:
            raise ValueError("drop_fraction must lie in [0, 1)")
        self.drop_fraction = drop_fraction
        self.counter = counter
        self.records: list[CallRecord] = []

    def _dropped(self, key: str) -> bool:
        if self.drop_fraction == 0.0:
            return False
        h = int.from_bytes(hashlib.blake2b(key.encode(), digest_size=4).digest(), "little")
        return (h % 10_000) / 10_000 < self.drop_fraction

    def update(self, req: ConsolidationRequest) -> str:
        prior = parse_profile(req.prior_profile.text)
        texts = [m.text for m in req.episodic_snapshot] + [m.text for m in req.latest_exchange]
        merged = merge_facts(texts, prior)
        if self.drop_fraction:
            merged = {k: v for k, v in merged.items() if k in prior or not self._dropped(k)}
        return render_profile(merged)


class LLMConsolidator:
    """Consolidation through a chat backend at the policy temperature."""

    def __init__(self, backend: ChatBackend, temperature: float = 0.0):
        self.backend = backend
        self.temperature = temperature
        self.records: list[CallRecord] = []

    def update(self, req: ConsolidationRequest) -> str:
        result = self.backend.complete(build_consolidation_prompt(req), temperature=self.temperature)
        self.records.append(result.record)
        if result.record.outcome is not Outcome.OK:
            raise ConsolidationError(result.record.error or result.record.outcome.value)
        text = result.text.strip()
        if not text:
            raise ConsolidationError("empty consolidation response")
        return text


@dataclass(frozen=True)
class ConsolidationFailure:
    latest_index: int
    attempts: int
    error: str


def consolidate(
    req: ConsolidationRequest,
    consolidator: Consolidator,
    policy: ConsolidationPolicy = ConsolidationPolicy(),
    *,
    counter: TokenCounter = DEFAULT_COUNTER,
    on_failure: Callable[[ConsolidationFailure], None] | None = None,
) -> SemanticProfile:
    """Run one consolidation with capped retries.

    On success the new profile replaces the prior one with version + 1. If
    every attempt fails (exception or empty text) the prior profile is
    returned unchanged and the failure goes to ``on_failure`` and the log.
    """
    prior = req.prior_profile
    error = ""
    attempts = 0
    for attempts in range(1, policy.max_retries + 2):
        try:
            text = consolidator.update(req)
        except Exception as exc:  # noqa: BLE001 - any consolidator failure degrades gracefully
            error = f"{type(exc).__name__}: {exc}"
            continue
        if text.strip() or getattr(consolidator, "allows_empty", False):
            break
        error = "empty consolidation response"
    else:
        failure = ConsolidationFailure(req.latest_index, attempts, error)
        logger.warning("consolidation at message %d failed after %d attempts: %s",
                       req.latest_index, attempts, error)
        if on_failure is not None:
            on_failure(failure)
        return prior
    profile = SemanticProfile.from_text(
        text, prior.version + 1, max(prior.last_consolidated_index, req.latest_index), counter
    )
    if profile.token_count > policy.soft_limit_tokens:
        logger.warning("profile is %d tokens, above the %d-token soft limit",
                       profile.token_count, policy.soft_limit_tokens)
    return profile


def should_consolidate(agent_ordinal: int | None, policy: ConsolidationPolicy) -> bool:
    """True on every ``cadence``-th agent turn.

    ``agent_ordinal`` is the 1-based count of agent turns up to and including
    this message, or ``None`` when the message is not an agent turn.
    """
    if agent_ordinal is None or agent_ordinal < 1:
        return False
    return agent_ordinal % policy.cadence == 0


@dataclass
class ConsolidationLog:
    """Profile history of one conversation, oldest first (audit trail)."""

    versions: list[SemanticProfile] = field(default_factory=lambda: [SemanticProfile.empty()])

    @property
    def current(self) -> SemanticProfile:
        return self.versions[-1]

    def record(self, profile: SemanticProfile) -> None:
        cur = self.current
        if profile.version == cur.version:
            return
        if profile.version != cur.version + 1:
            raise ValueError("profile versions must increase by exactly one")
        if profile.last_consolidated_index < cur.last_consolidated_index:
            raise ValueError("last_consolidated_index must not decrease")
        self.versions.append(profile)


def profile_growth_series(log: ConsolidationLog) -> list[tuple[int, int]]:
    """(messages seen, profile tokens) after each successful consolidation."""
    return [(p.last_consolidated_index + 1, p.token_count) for p in log.versions[1:]]
