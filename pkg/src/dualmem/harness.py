"""Benchmark drivers: feed generated logs to each architecture and score the probes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from dualmem.architectures import (
    Architecture,
    DualProcessMemory,
    FullContextMemory,
    Memory,
    RagMemory,
)
from dualmem.backends import (
    BackendKind,
    ChatBackend,
    ChatBackendSpec,
    EmbeddingBackend,
    Outcome,
    ScriptedBehavior,
    ScriptedChatBackend,
    ScriptedEmbedder,
    chat_complete,
)
from dualmem.core import Message
from dualmem.evaluation import (
    CALL_CONSOLIDATION,
    CONSOLIDATION_MODEL,
    DEFAULT_PRICING,
    INFERENCE_MODEL,
    BenchmarkRecord,
    PricingTable,
    match_case,
)
from dualmem.markers import iter_facts
from dualmem.profile import ConsolidationPolicy, Consolidator, LLMConsolidator, RuleBasedConsolidator
from dualmem.simulation import (
    FactSpec,
    Placement,
    QueryCase,
    QueryType,
    WorkloadSpec,
    generate_capacity_run,
    generate_realistic_run,
    honest120_workload,
    make_case,
    extract_facts,
)

# the needles used by capacity runs; values never contain one another
CAPACITY_FACTS = (
    ("p_threshold", "0.001"),
    ("fold_change", "2.0"),
    ("sample_count", "178"),
    ("cluster_resolution", "1.2"),
)


@dataclass
class Backends:
    """Inference, consolidation and embedding backends for one run."""

    inference: ChatBackend = field(default_factory=lambda: ScriptedChatBackend(
        ScriptedBehavior.ECHO_FACT, ChatBackendSpec(model=INFERENCE_MODEL)))
    consolidation: ChatBackend | None = None
    embedder_factory: Callable[[int], EmbeddingBackend] = field(
        default_factory=lambda: (lambda dim: ScriptedEmbedder(dim)))

    @property
    def kind(self) -> str:
        return self.inference.spec.kind.value

    @property
    def simulated(self) -> bool:
        return self.inference.spec.kind is BackendKind.SCRIPTED

    def consolidator(self, drop_fraction: float = 0.0) -> Consolidator:
        if self.consolidation is None:
            return RuleBasedConsolidator(drop_fraction)
        return LLMConsolidator(self.consolidation, 0.0)


def make_memory(
    arch: Architecture,
    backends: Backends,
    *,
    cadence: int = 10,
    embed_dim: int = 64,
    drop_fraction: float = 0.0,
) -> Memory:
    if arch is Architecture.DUAL_PROCESS:
        return DualProcessMemory(policy=ConsolidationPolicy(cadence=cadence),
                                 consolidator=backends.consolidator(drop_fraction),
                                 account_calls=True)
    if arch is Architecture.RAG:
        return RagMemory(backends.embedder_factory(embed_dim))
    return FullContextMemory()


def ingest(memory: Memory, messages: Sequence[Message]) -> None:
    for m in messages:
        memory.observe(m)
    if isinstance(memory, DualProcessMemory):
        # consolidate whatever arrived since the last cadence point before probing
        memory.flush()


def probe(
    memory: Memory,
    backend: ChatBackend,
    case: QueryCase,
    *,
    scale: int,
    seed: int,
    group: str = "",
    pricing: PricingTable = DEFAULT_PRICING,
) -> BenchmarkRecord:
    ctx = memory.context_for(case.question)
    result = chat_complete(backend, ctx)
    rec = result.record
    ok = rec.outcome is Outcome.OK
    model = backend.spec.model if backend.spec.model in pricing.prices else INFERENCE_MODEL
    retrieved = tuple(c.id for c in getattr(memory, "last_retrieved", ()))
    return BenchmarkRecord(
        architecture=memory.architecture.value,
        scale=scale,
        seed=seed,
        query_type=case.query_type.value,
        expected=case.expected,
        actual=result.text,
        matched=ok and match_case(case, result.text),
        latency_ms=round(rec.wall_latency_ms, 3),
        input_tokens=rec.input_tokens,
        output_tokens=rec.output_tokens,
        outcome=rec.outcome.value,
        cost=pricing.cost(model, rec.input_tokens, rec.output_tokens),
        model=model,
        group=group,
        question=case.question,
        retrieved_ids=retrieved,
    )


def consolidation_records(
    memory: DualProcessMemory,
    *,
    scale: int,
    seed: int,
    group: str = "",
    pricing: PricingTable = DEFAULT_PRICING,
) -> list[BenchmarkRecord]:
    spec = ChatBackendSpec(model=CONSOLIDATION_MODEL)
    return [
        BenchmarkRecord(
            architecture=memory.architecture.value,
            scale=scale,
            seed=seed,
            query_type="",
            expected="",
            actual="",
            matched=False,
            latency_ms=round(spec.simulated_latency_ms(c.input_tokens), 3),
            input_tokens=c.input_tokens,
            output_tokens=c.output_tokens,
            outcome=Outcome.OK.value,
            cost=pricing.cost(CONSOLIDATION_MODEL, c.input_tokens, c.output_tokens),
            model=CONSOLIDATION_MODEL,
            call_kind=CALL_CONSOLIDATION,
            group=group,
        )
        for c in memory.calls
    ]


# ---------------------------------------------------------------------------
# capacity


def capacity_facts(total: int, placement: Placement, probes: int) -> list[FactSpec]:
    """``probes`` needles on consecutive indices at the placement anchor."""
    probes = min(probes, len(CAPACITY_FACTS), total)
    anchor = FactSpec("x", "x", placement).resolve(total)
    start = min(anchor, total - probes)
    return [FactSpec(k, v, placement, start + j) for j, (k, v) in enumerate(CAPACITY_FACTS[:probes])]


@dataclass
class CapacityResult:
    records: list[BenchmarkRecord]
    footprints: dict[tuple[int, str], list[int]]


def run_capacity(
    scales: Sequence[int],
    seeds: Sequence[int],
    *,
    placements: Sequence[Placement] = tuple(Placement),
    archs: Sequence[Architecture] = (Architecture.DUAL_PROCESS, Architecture.FULL_CONTEXT),
    probes: int = 1,
    filler: str = "natural",
    cadence: int = 10,
    backends: Backends | None = None,
) -> CapacityResult:
    backends = backends or Backends()
    records: list[BenchmarkRecord] = []
    footprints: dict[tuple[int, str], list[int]] = {}
    for scale in scales:
        for placement in placements:
            facts = capacity_facts(scale, placement, probes)
            for seed in seeds:
                messages = generate_capacity_run(scale, facts, seed, filler=filler)
                table = extract_facts(messages)
                cases = [make_case(QueryType.RECENT_STATE, [f.key], table) for f in facts]
                for arch in archs:
                    memory = make_memory(arch, backends, cadence=cadence)
                    ingest(memory, messages)
                    for case in cases:
                        rec = probe(memory, backends.inference, case, scale=scale, seed=seed,
                                    group=placement.value)
                        records.append(rec)
                        footprints.setdefault((scale, arch.value), []).append(rec.input_tokens)
    return CapacityResult(records, footprints)


# ---------------------------------------------------------------------------
# realistic


@dataclass
class RealisticResult:
    records: list[BenchmarkRecord]
    growth: list[tuple[int, int, int, int]]  # (scale, seed, messages, profile tokens)


def run_realistic(
    scales: Sequence[int],
    seeds: Sequence[int],
    *,
    archs: Sequence[Architecture] = (Architecture.DUAL_PROCESS, Architecture.FULL_CONTEXT),
    probes: int = 4,
    cadence: int = 10,
    embed_dim: int = 1024,
    backends: Backends | None = None,
    base_spec: WorkloadSpec | None = None,
) -> RealisticResult:
    backends = backends or Backends()
    base_spec = base_spec or WorkloadSpec(probes=probes)
    records: list[BenchmarkRecord] = []
    growth: list[tuple[int, int, int, int]] = []
    for scale in scales:
        for seed in seeds:
            run = generate_realistic_run(base_spec.with_run(scale, seed))
            for arch in archs:
                memory = make_memory(arch, backends, cadence=cadence, embed_dim=embed_dim)
                ingest(memory, run.messages)
                for case in run.cases:
                    records.append(probe(memory, backends.inference, case, scale=scale, seed=seed))
                if isinstance(memory, DualProcessMemory):
                    records.extend(consolidation_records(memory, scale=scale, seed=seed))
                    growth.extend((scale, seed, p.last_consolidated_index + 1, p.token_count)
                                  for p in memory.log.versions[1:])
    return RealisticResult(records, growth)


# ---------------------------------------------------------------------------
# six-type suite


@dataclass
class Honest120Result:
    records: list[BenchmarkRecord]
    cases: list[QueryCase]
    # same-key cases: (question, first-value chunk retrieved, last-value chunk retrieved)
    retrieval_checks: list[tuple[str, bool, bool]]


SAME_KEY_TYPES = (QueryType.RECENT_STATE, QueryType.CONTRADICTORY, QueryType.TEMPORAL_SEQUENCE)


def _marker_chunks(memory: RagMemory, key: str, value: str) -> set[int]:
    return {c.id for c in memory.index.chunks if (key, value) in iter_facts(c.text)}


def run_honest120(
    seed: int,
    *,
    total: int = 3000,
    archs: Sequence[Architecture] = (Architecture.DUAL_PROCESS, Architecture.RAG),
    cadence: int = 10,
    embed_dim: int = 16384,
    backends: Backends | None = None,
    drop_fraction: float = 0.0,
    group: str = "",
) -> Honest120Result:
    backends = backends or Backends()
    messages, cases = honest120_workload(seed, total)
    facts = extract_facts(messages)
    records: list[BenchmarkRecord] = []
    checks: list[tuple[str, bool, bool]] = []
    for arch in archs:
        memory = make_memory(arch, backends, cadence=cadence, embed_dim=embed_dim,
                             drop_fraction=drop_fraction)
        ingest(memory, messages)
        for case in cases:
            rec = probe(memory, backends.inference, case, scale=total, seed=seed,
                        group=case.query_type.value if not group else group)
            records.append(rec)
            if isinstance(memory, RagMemory) and case.query_type in SAME_KEY_TYPES:
                key = case.keys[0]
                occ = facts[key]
                first = _marker_chunks(memory, key, occ[0][1])
                last = _marker_chunks(memory, key, occ[-1][1])
                got = set(rec.retrieved_ids)
                checks.append((case.question, bool(first & got), bool(last & got)))
        if isinstance(memory, DualProcessMemory):
            records.extend(consolidation_records(memory, scale=total, seed=seed, group=group))
    return Honest120Result(records, list(cases), checks)
