"""Chat-completion, embedding and judge backends.

Two kinds exist for each interface: an OpenAI-compatible HTTP client (with
optional record/replay fixtures) and a deterministic scripted stand-in that
isolates memory-architecture effects from model capability.
"""

from __future__ import annotations

import enum
import functools
import hashlib
import json
import logging
import os
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Protocol

import httpx
import numpy as np

from dualmem.core import DEFAULT_COUNTER, QUERY_LABEL, AssembledContext, TokenCounter
from dualmem.markers import iter_facts, key_pattern, merge_facts, render_profile

logger = logging.getLogger(__name__)

DEFAULT_HARD_LIMIT = 128_000
UNKNOWN = "UNKNOWN"


class BackendError(RuntimeError):
    """Transport or provider failure that survived the retry policy."""


class JudgeParseError(ValueError):
    pass


class Outcome(str, enum.Enum):
    OK = "ok"
    OVERFLOW = "overflow"
    ERROR = "error"


class BackendKind(str, enum.Enum):
    HTTP = "http_openai_compatible"
    SCRIPTED = "scripted"


class ScriptedBehavior(str, enum.Enum):
    ECHO_FACT = "echo_fact_if_present"
    FIXED = "fixed_response"
    FAIL = "fail_with_error"
    # consolidation stand-in: returns the marker profile implied by the prompt
    MERGE_FACTS = "merge_fact_markers"
    JUDGE = "judge_rubric"


@dataclass(frozen=True)
class ChatBackendSpec:
    kind: BackendKind = BackendKind.SCRIPTED
    model: str = "scripted"
    temperature: float = 0.7
    max_output_tokens: int = 512
    timeout: float = 60.0
    endpoint: str | None = None
    api_key_env: str = "DUALMEM_API_KEY"
    hard_limit: int = DEFAULT_HARD_LIMIT
    # simulated latency = base + per_token * input_tokens (scripted only)
    latency_base_ms: float = 586.0
    latency_per_token_ms: float = 0.0785

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must lie in [0, 2]")
        if self.kind is BackendKind.HTTP and not self.endpoint:
            raise ValueError("http backends need an endpoint")

    def simulated_latency_ms(self, input_tokens: int) -> float:
        return self.latency_base_ms + self.latency_per_token_ms * input_tokens


@dataclass(frozen=True)
class CallRecord:
    input_tokens: int
    output_tokens: int
    wall_latency_ms: float
    outcome: Outcome
    model: str = ""
    error: str = ""

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be non-negative")


@dataclass(frozen=True)
class ChatResult:
    text: str
    record: CallRecord

    def __iter__(self):
        # allows ``text, record = backend.complete(...)``
        return iter((self.text, self.record))


class ChatBackend(Protocol):
    spec: ChatBackendSpec

    def complete(
        self,
        prompt: str,
        *,
        system: str = "",
        input_tokens: int | None = None,
        temperature: float | None = None,
    ) -> ChatResult: ...


class EmbeddingBackend(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


# --------------------------------------------------------------------------
# scripted chat


_FIRST_WORDS = re.compile(r"\b(initial|initially|first|original|originally|outset)\b", re.I)
_SEQUENCE_WORDS = re.compile(r"\b(order|sequence|progression|succession)\b", re.I)


def split_query(prompt: str) -> tuple[str, str]:
    """Return (context, query) split at the last query label."""
    pos = prompt.rfind(QUERY_LABEL)
    if pos < 0:
        return "", prompt
    return prompt[:pos], prompt[pos + len(QUERY_LABEL):].strip()


def echo_answer(prompt: str) -> str:
    """Answer a probe from ``FACT`` markers visible in the prompt.

    Probed keys are the marker keys named in the query. Which occurrence is
    reported depends on the question wording: "initial"/"first" style
    questions take the first occurrence in context order, "order"/"sequence"
    questions list every distinct value in context order, and everything
    else takes the last occurrence. Context order is what the architecture
    provides, so a retriever that ranks by similarity can surface a stale
    value.
    """
    context, query = split_query(prompt)
    seen: dict[str, list[str]] = {}
    for key, value in iter_facts(context):
        seen.setdefault(key, []).append(value)
    probed = []
    for key in seen:
        m = key_pattern(key).search(query)
        if m:
            probed.append((m.start(), key))
    if not probed:
        return UNKNOWN
    answers = []
    for _, key in sorted(probed):
        values = seen[key]
        if _SEQUENCE_WORDS.search(query):
            ordered = [v for i, v in enumerate(values) if i == 0 or v != values[i - 1]]
            answers.append(" -> ".join(ordered))
        elif _FIRST_WORDS.search(query):
            answers.append(values[0])
        else:
            answers.append(values[-1])
    return "; ".join(answers)


def merge_markers_answer(prompt: str) -> str:
    """Profile text implied by all markers in a consolidation prompt, in reading order."""
    return render_profile(merge_facts([prompt]))


_JUDGE_FIELDS = re.compile(
    r"GROUND TRUTH:\s*(?P<truth>.*?)\nANSWER:\s*(?P<answer>.*?)\n(?:RUBRIC|$)", re.S
)


def judge_rubric_answer(prompt: str) -> str:
    m = _JUDGE_FIELDS.search(prompt)
    if m is None:
        return "no score"
    truth = " ".join(m.group("truth").split()).lower()
    answer = " ".join(m.group("answer").split()).lower()
    if not answer:
        score = 0
    elif answer == truth:
        score = 10
    elif truth and truth in answer:
        score = 7
    else:
        score = 2
    return f"Score: {score}"


class ScriptedChatBackend:
    """Deterministic chat backend with simulated latency."""

    def __init__(
        self,
        behavior: ScriptedBehavior | str = ScriptedBehavior.ECHO_FACT,
        spec: ChatBackendSpec | None = None,
        *,
        fixed_response: str = "",
        counter: TokenCounter = DEFAULT_COUNTER,
    ):
        self.behavior = ScriptedBehavior(behavior)
        self.spec = spec or ChatBackendSpec(model=f"scripted-{self.behavior.value}")
        self.fixed_response = fixed_response
        self.counter = counter

    def _respond(self, prompt: str) -> str:
        if self.behavior is ScriptedBehavior.ECHO_FACT:
            return echo_answer(prompt)
        if self.behavior is ScriptedBehavior.FIXED:
            return self.fixed_response
        if self.behavior is ScriptedBehavior.MERGE_FACTS:
            return merge_markers_answer(prompt)
        if self.behavior is ScriptedBehavior.JUDGE:
            return judge_rubric_answer(prompt)
        raise BackendError("scripted failure")

    def complete(
        self,
        prompt: str,
        *,
        system: str = "",
        input_tokens: int | None = None,
        temperature: float | None = None,
    ) -> ChatResult:
        if input_tokens is None:
            input_tokens = self.counter(system) + self.counter(prompt)
        latency = self.spec.simulated_latency_ms(input_tokens)
        if input_tokens > self.spec.hard_limit:
            rec = CallRecord(input_tokens, 0, latency, Outcome.OVERFLOW, self.spec.model,
                             "context_length_exceeded")
            return ChatResult("", rec)
        try:
            text = self._respond(prompt)
        except BackendError as exc:
            return ChatResult("", CallRecord(input_tokens, 0, latency, Outcome.ERROR,
                                             self.spec.model, str(exc)))
        return ChatResult(text, CallRecord(input_tokens, self.counter(text), latency,
                                           Outcome.OK, self.spec.model))


# --------------------------------------------------------------------------
# record / replay


class FixtureStore:
    """Request-hash -> response-body files for reproducible HTTP tests.

    ``mode`` is ``live`` (no fixtures), ``record`` (call through, save body)
    or ``replay`` (never touch the network).
    """

    def __init__(self, root: str | Path, mode: str = "replay"):
        if mode not in ("live", "record", "replay"):
            raise ValueError(f"unknown fixture mode {mode!r}")
        self.root = Path(root)
        self.mode = mode

    @staticmethod
    def request_key(path: str, body: dict) -> str:
        canonical = json.dumps({"path": path, "body": body}, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def path_for(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def load(self, key: str) -> bytes:
        p = self.path_for(key)
        if not p.exists():
            raise BackendError(f"no recorded fixture for request {key[:12]}")
        return p.read_bytes()

    def save(self, key: str, content: bytes) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = self.path_for(key).with_suffix(".tmp")
        tmp.write_bytes(content)
        os.replace(tmp, self.path_for(key))


class _HttpTransport:
    def __init__(
        self,
        endpoint: str,
        *,
        api_key_env: str,
        timeout: float,
        client: httpx.Client | None,
        fixtures: FixtureStore | None,
        retries: int,
        backoff: float,
        sleep: Callable[[float], None],
    ):
        self.endpoint = endpoint.rstrip("/")
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.client = client
        self.fixtures = fixtures
        self.retries = retries
        self.backoff = backoff
        self.sleep = sleep

    def _client(self) -> httpx.Client:
        if self.client is None:
            self.client = httpx.Client(timeout=self.timeout)
        return self.client

    def post(self, path: str, body: dict) -> bytes:
        key = FixtureStore.request_key(path, body)
        if self.fixtures is not None and self.fixtures.mode == "replay":
            return self.fixtures.load(key)
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.api_key_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                self.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._client().post(self.endpoint + path, json=body, headers=headers)
            except httpx.HTTPError as exc:
                last = exc
                continue
            if resp.status_code == 400 and b"context_length_exceeded" in resp.content:
                raise ContextLengthExceeded(resp.text)
            if resp.status_code >= 500 or resp.status_code == 429:
                last = BackendError(f"HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            if self.fixtures is not None and self.fixtures.mode == "record":
                self.fixtures.save(key, resp.content)
            return resp.content
        raise BackendError(f"request failed after {self.retries + 1} attempts: {last}")


class ContextLengthExceeded(BackendError):
    pass


class HttpChatBackend:
    """Client for OpenAI-compatible ``/chat/completions`` endpoints."""

    def __init__(
        self,
        spec: ChatBackendSpec,
        *,
        client: httpx.Client | None = None,
        fixtures: FixtureStore | None = None,
        retries: int = 2,
        backoff: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
        counter: TokenCounter = DEFAULT_COUNTER,
    ):
        if spec.kind is not BackendKind.HTTP:
            raise ValueError("HttpChatBackend needs an http spec")
        self.spec = spec
        self.counter = counter
        self.transport = _HttpTransport(
            spec.endpoint or "", api_key_env=spec.api_key_env, timeout=spec.timeout,
            client=client, fixtures=fixtures, retries=retries, backoff=backoff, sleep=sleep,
        )

    def request_body(self, prompt: str, system: str, temperature: float | None) -> dict:
        messages = []
        if system:
            messages.append({"role": "system", "content": system})
        messages.append({"role": "user", "content": prompt})
        return {
            "model": self.spec.model,
            "messages": messages,
            "temperature": self.spec.temperature if temperature is None else temperature,
            "max_tokens": self.spec.max_output_tokens,
        }

    def complete(
        self,
        prompt: str,
        *,
        system: str = "",
        input_tokens: int | None = None,
        temperature: float | None = None,
    ) -> ChatResult:
        estimate = input_tokens if input_tokens is not None else (
            self.counter(system) + self.counter(prompt))
        if estimate > self.spec.hard_limit:
            return ChatResult("", CallRecord(estimate, 0, 0.0, Outcome.OVERFLOW, self.spec.model,
                                             "context_length_exceeded"))
        body = self.request_body(prompt, system, temperature)
        start = time.perf_counter()
        try:
            raw = self.transport.post("/chat/completions", body)
            payload = json.loads(raw)
            text = payload["choices"][0]["message"]["content"] or ""
        except ContextLengthExceeded as exc:
            elapsed = (time.perf_counter() - start) * 1000
            return ChatResult("", CallRecord(estimate, 0, elapsed, Outcome.OVERFLOW,
                                             self.spec.model, str(exc)[:200]))
        except (BackendError, KeyError, IndexError, ValueError) as exc:
            elapsed = (time.perf_counter() - start) * 1000
            logger.warning("chat call failed: %s", exc)
            return ChatResult("", CallRecord(estimate, 0, elapsed, Outcome.ERROR,
                                             self.spec.model, str(exc)[:200]))
        elapsed = (time.perf_counter() - start) * 1000
        usage = payload.get("usage") or {}
        rec = CallRecord(
            int(usage.get("prompt_tokens", estimate)),
            int(usage.get("completion_tokens", self.counter(text))),
            elapsed,
            Outcome.OK,
            self.spec.model,
        )
        return ChatResult(text, rec)


def chat_complete(backend: ChatBackend, context: AssembledContext,
                  temperature: float | None = None) -> ChatResult:
    """Send an assembled context; the preamble travels as the system message."""
    return backend.complete(
        context.body(),
        system=context.system_preamble,
        input_tokens=context.total_tokens,
        temperature=temperature,
    )


# --------------------------------------------------------------------------
# embeddings

_STOPWORDS = frozenset(
    """a an and are as at be by for from has have i in is it its of on or our so
    that the this to was we were what which with you your do does did""".split()
)
_WORD = re.compile(r"[a-z0-9_]+")


def embedding_tokens(text: str) -> list[str]:
    return sorted({w for w in _WORD.findall(text.lower()) if w not in _STOPWORDS})


_SKETCH_WIDTH = 8


@functools.lru_cache(maxsize=100_000)
def _token_sketch(token: str, dim: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Signed-hash features for one token: bucket indices and +/-1 signs."""
    digest = hashlib.blake2b(f"{seed}\x1f{token}".encode(), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    width = min(_SKETCH_WIDTH, dim)
    idx = rng.choice(dim, size=width, replace=False)
    signs = rng.choice((-1.0, 1.0), size=width)
    idx.setflags(write=False)
    signs.setflags(write=False)
    return idx, signs


class ScriptedEmbedder:
    """Hash-derived bag-of-words embedding.

    Every distinct non-stopword token maps to a seeded sparse signed vector
    (a count sketch with 8 nonzeros); a text embeds to the normalized sum
    over its token set. Identical texts embed identically, texts sharing
    tokens land close, and distinct tokens only interact through rare
    bucket collisions, so cosine noise between unrelated texts shrinks
    like 1/sqrt(dim).
    """

    def __init__(self, dim: int = 64, seed: int = 0):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.seed = seed

    def embed(self, text: str) -> np.ndarray:
        tokens = embedding_tokens(text)
        if not tokens:
            tokens = ["\x00" + " ".join(text.split())]
        vec = np.zeros(self.dim)
        for tok in tokens:
            idx, signs = _token_sketch(tok, self.dim, self.seed)
            np.add.at(vec, idx, signs)
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            # exact cancellation; fall back to the sketch of the whole text
            idx, signs = _token_sketch("\x00" + text, self.dim, self.seed)
            vec[idx] = signs
            norm = np.linalg.norm(vec)
        return vec / norm


class HttpEmbedder:
    """Client for OpenAI-compatible ``/embeddings`` endpoints; vectors come back unit-normalized."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        dim: int,
        *,
        api_key_env: str = "DUALMEM_API_KEY",
        timeout: float = 60.0,
        client: httpx.Client | None = None,
        fixtures: FixtureStore | None = None,
        retries: int = 2,
        backoff: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.model = model
        self.dim = dim
        self.transport = _HttpTransport(
            endpoint, api_key_env=api_key_env, timeout=timeout, client=client,
            fixtures=fixtures, retries=retries, backoff=backoff, sleep=sleep,
        )

    def embed(self, text: str) -> np.ndarray:
        raw = self.transport.post("/embeddings", {"model": self.model, "input": text})
        try:
            vec = np.asarray(json.loads(raw)["data"][0]["embedding"], dtype=float)
        except (KeyError, IndexError, ValueError) as exc:
            raise BackendError(f"malformed embedding response: {exc}") from exc
        if vec.shape != (self.dim,):
            raise BackendError(f"expected dimension {self.dim}, got {vec.shape}")
        norm = np.linalg.norm(vec)
        if not np.isfinite(norm) or norm == 0.0:
            raise BackendError("embedding is zero or non-finite")
        return vec / norm


def embed_text(backend: EmbeddingBackend, text: str) -> np.ndarray:
    return backend.embed(text)


# --------------------------------------------------------------------------
# judge

JUDGE_RUBRIC = (
    "Rate the answer from 0 to 10 for factual correctness against the ground truth, "
    "completeness, and coherence. Reply with 'Score: N'."
)
_SCORE = re.compile(r"score\s*[:=]?\s*(\d+(?:\.\d+)?)", re.I)
_BARE_NUMBER = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(?:/\s*10)?\s*$")


def build_judge_prompt(question: str, ground_truth: str, answer: str) -> str:
    return (
        f"QUESTION: {question}\nGROUND TRUTH: {ground_truth}\nANSWER: {answer}\n"
        f"RUBRIC: {JUDGE_RUBRIC}"
    )


def parse_judge_score(text: str) -> float:
    m = _SCORE.search(text) or _BARE_NUMBER.match(text)
    if m is None:
        raise JudgeParseError(f"no score in judge output: {text[:80]!r}")
    score = float(m.group(1))
    if not 0.0 <= score <= 10.0:
        raise JudgeParseError(f"score {score} outside [0, 10]")
    return score


def judge_score(backend: ChatBackend, question: str, ground_truth: str, answer: str) -> float:
    result = backend.complete(build_judge_prompt(question, ground_truth, answer), temperature=0.0)
    if result.record.outcome is not Outcome.OK:
        raise BackendError(f"judge call failed: {result.record.error}")
    return parse_judge_score(result.text)


def backend_description(backend: Any) -> dict:
    spec = getattr(backend, "spec", None)
    out: dict[str, Any] = {"class": type(backend).__name__}
    if spec is not None:
        out.update(kind=spec.kind.value, model=spec.model)
    return out
