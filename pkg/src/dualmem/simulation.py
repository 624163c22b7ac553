"""Seeded synthetic workloads: capacity runs, realistic research sessions and query suites.

Facts travel as ``FACT key=value`` markers inside ordinary sentences, so the
scripted backends can detect them while a live model still reads fluent
text. Every generator is a pure function of its arguments.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterator, Sequence

import numpy as np

from dualmem.core import DEFAULT_COUNTER, Message, Role, TokenCounter
from dualmem.markers import iter_facts, render_fact


class GenerationError(RuntimeError):
    """A generated workload failed its own consistency check."""


class Placement(str, enum.Enum):
    BEGINNING = "beginning"
    MIDDLE = "middle"
    END = "end"


class Act(str, enum.Enum):
    DIRECTIVE = "directive"
    STATE_UPDATE = "state_update"
    EXPERIMENTAL_LOG = "experimental_log"
    NOISE = "noise"


class QueryType(str, enum.Enum):
    RECENT_STATE = "recent_state"
    HISTORICAL_RETRIEVAL = "historical_retrieval"
    CONTRADICTORY = "contradictory"
    TEMPORAL_SEQUENCE = "temporal_sequence"
    MULTI_HOP = "multi_hop"
    LONG_TERM = "long_term"


QUERY_TYPES = tuple(QueryType)
DEFAULT_ACT_MIX = {
    Act.DIRECTIVE.value: 0.20,
    Act.STATE_UPDATE.value: 0.15,
    Act.EXPERIMENTAL_LOG.value: 0.25,
    Act.NOISE.value: 0.40,
}
# endpoints and five interior points are measured scales; 500, 2000 and 6000 are interpolated
TEN_SCALES = (100, 500, 1000, 2000, 4000, 6000, 7500, 10000, 12500, 15000)

# ---------------------------------------------------------------------------
# text corpus
#
# None of these sentences may contain a word used by the probe templates
# below (current, latest, order, initial, outset, recall, ...): probes have to
# be retrievable by their key alone.

NOISE = (
    "Sounds good, I will look at the heatmap tonight.",
    "Thanks, that matches what I saw in lab meeting.",
    "Could you check the axis labels on figure {n}?",
    "Good catch, the legend was hiding that panel.",
    "Rerunning the notebook now, give me a minute.",
    "No rush, the reviewers will wait until Friday.",
    "Agreed, the clusters look cleaner after that fix.",
    "Let me know once the job on node {n} finishes.",
    "The coffee machine on level {n} is broken again.",
    "I will share the slides with the group later.",
    "That plot is much easier to read with these colors.",
    "Makes sense, we revisit the batch issue next week.",
    "Happy to help, ping me if the kernel crashes.",
    "The server was slow this morning, fine now.",
)

LOGS = (
    "Ran DESeq2 on batch {n}: {m} genes passed.",
    "Alignment for lane {n} done, {p}% reads mapped.",
    "QC report {n}: {m} cells kept after doublets.",
    "Stained slide {n} for ACTA2, strong in stroma.",
    "Clustering run {n} produced {s} clusters.",
    "Deconvolution run {n} estimated {p}% fibroblasts.",
    "Normalized counts for cohort {n} saved to disk.",
    "Survival fit {n} gave concordance 0.{p} on holdout.",
    "Imaging batch {n} has {s} slides left to segment.",
)

DIRECTIVES = (
    "For this analysis, adopt FACT {k}={v} as setting.",
    "Let us use FACT {k}={v} in the pipeline.",
    "For the record: FACT {k}={v} holds here.",
    "Keep FACT {k}={v} fixed for all figures.",
)

UPDATES = (
    "Update: switch to FACT {k}={v} after review.",
    "Change of plan, we now use FACT {k}={v} here.",
    "Revising the setup: FACT {k}={v} replaces it.",
    "Team decision: FACT {k}={v} going forward.",
)

CAPACITY_CARRIER = "Noting for the record: FACT {k}={v} holds for this study."

# probe templates; the echo backend keys off "initial"/"outset" and "order"
PROBES = {
    QueryType.RECENT_STATE: "What is the current {k}?",
    QueryType.CONTRADICTORY: "Following revisions, what is the latest {k}?",
    QueryType.TEMPORAL_SEQUENCE: "In what order was {k} revised?",
    QueryType.HISTORICAL_RETRIEVAL: "What was the initial {k} at the outset?",
    QueryType.LONG_TERM: "Recall the {k} please.",
    QueryType.MULTI_HOP: "Combine {k} with the current {k2}.",
}

UNIQUE_STEMS = (
    "plot_palette", "qc_filter", "marker_gene", "cell_type_label", "gsea_set",
    "figure_style", "stain_protocol", "cohort_split", "embedding_method", "de_method",
    "imputation", "outlier_rule", "panel_layout", "color_scale", "report_format",
    "annotation_db", "clustering_algo", "ligand_receptor_db", "spatial_method", "pathway_db",
    "seurat_assay", "scoring_method", "subset_rule", "export_format", "review_owner",
)
UNIQUE_VALUES = (
    "spearman", "leiden", "louvain", "umap", "tsne", "zscore", "cellchat", "nichenet",
    "squidpy", "svg", "pdf", "parquet", "csv", "alice", "bob", "median",
    "mad", "rna", "ucell", "aucell", "gsva", "cellphonedb", "liana", "tangram",
    "cell2location", "scenic", "monocle", "velocyto", "dotplot", "violin", "ridgeline", "tiff",
)

# evolving parameters; no value is a substring of another value of the same key or of
# any one-off value, so substring matching cannot credit a stale or foreign answer
CHURN_KEYS: dict[str, tuple[str, ...]] = {
    "min_read_depth": ("250", "600", "900", "1200"),
    "cluster_resolution": ("0.4", "0.8", "1.2", "1.6"),
    "mito_cutoff": ("8pct", "12pct", "20pct", "30pct"),
    "n_top_genes": ("2000", "3000", "4500", "6000"),
    "pca_components": ("20", "30", "45", "60"),
    "umap_neighbors": ("15", "30", "50", "80"),
    "doublet_rate": ("0.04", "0.06", "0.08", "0.1"),
    "batch_method": ("harmony", "combat", "scvi", "bbknn"),
    "norm_method": ("log1p", "sctransform", "scran", "pearson_residuals"),
    "de_test": ("wilcoxon", "mast", "deseq2", "edger"),
    "min_cells": ("3", "10", "25", "40"),
    "max_genes": ("5000", "6500", "8000", "9500"),
    "fdr_method": ("bh", "bonferroni", "storey", "by"),
    "gsea_database": ("hallmark", "reactome", "kegg", "go_bp"),
    "palette": ("viridis", "magma", "cividis", "plasma"),
    "figure_dpi": ("150", "300", "450", "600"),
    "random_seed": ("7", "42", "1234", "2024"),
    "hvg_flavor": ("seurat_v3", "cell_ranger", "dispersion", "pearson_residuals"),
    "integration_k": ("knn8", "knn20", "knn30", "knn40"),
    "spot_radius": ("55um", "75um", "95um", "110um"),
}

CHURN_VALUES = 3
HYPOTHESIS_FAP = "FAP+_CAFs_drive_chemoresistance"
HYPOTHESIS_PDGFRB = "PDGFRB+_pericytes_drive_chemoresistance"


def _pick(rng: np.random.Generator, options: Sequence[str]) -> str:
    return options[int(rng.integers(len(options)))]


def _fill(template: str, rng: np.random.Generator, **kw: str) -> str:
    slots = {
        "n": str(int(rng.integers(1, 60))),
        "m": str(int(rng.integers(100, 900))),
        "p": str(int(rng.integers(40, 99))),
        "s": str(int(rng.integers(4, 30))),
    }
    slots.update(kw)
    return template.format(**slots)


def _filler(rng: np.random.Generator) -> str:
    pool = NOISE if rng.random() < 0.5 else LOGS
    return _fill(_pick(rng, pool), rng)


def _pad_exact(text: str, n_chars: int, rng: np.random.Generator) -> str:
    """Extend single-spaced ``text`` with filler words to exactly ``n_chars`` characters."""
    words = [text] if text else []
    length = len(text)
    while length < n_chars:
        sentence = _filler(rng)
        words.append(sentence)
        length += len(sentence) + (1 if length else 0)
    out = " ".join(words)[:n_chars]
    if len(out) < n_chars:
        raise GenerationError("padding failed")
    if out[-1].isspace():
        out = out[:-1] + "x"
    return out


def role_for(index: int) -> Role:
    return Role.USER if index % 2 == 0 else Role.AGENT


def _stable_hash(obj: object) -> str:
    canonical = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class FactSpec:
    key: str
    value: str
    placement: Placement | str = Placement.END
    index: int | None = None

    def marker(self) -> str:
        return render_fact(self.key, self.value)

    def resolve(self, total: int, rng: np.random.Generator | None = None) -> int:
        """Injection index for a log of ``total`` messages.

        Without ``rng`` the fact sits at the anchor of its band (first
        message, T//2, last message). With ``rng`` it is drawn uniformly from
        the band: first 5%, 45-55% or last 5% of indices.
        """
        if self.index is not None:
            if not 0 <= self.index < total:
                raise ValueError("explicit fact index outside the conversation")
            return self.index
        lo, hi = placement_band(Placement(self.placement), total)
        if rng is None:
            return {Placement.BEGINNING: 0, Placement.MIDDLE: total // 2,
                    Placement.END: total - 1}[Placement(self.placement)]
        return int(rng.integers(lo, hi + 1))


def placement_band(placement: Placement, total: int) -> tuple[int, int]:
    """Inclusive index band for a placement."""
    if total < 1:
        raise ValueError("total must be positive")
    width = max(1, math.ceil(0.05 * total))
    if placement is Placement.BEGINNING:
        return 0, width - 1
    if placement is Placement.END:
        return total - width, total - 1
    lo = math.floor(0.45 * total)
    hi = max(lo, math.ceil(0.55 * total) - 1)
    return min(lo, total // 2), max(hi, total // 2)


@dataclass(frozen=True)
class ContradictionSchedule:
    key: str
    values: tuple[str, ...]
    indices: tuple[int, ...]

    def __post_init__(self):
        if len(self.values) < 2:
            raise ValueError("a contradiction needs at least two values")
        if len(self.values) != len(self.indices):
            raise ValueError("one index per value")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("indices must be strictly increasing")
        if self.indices[0] < 0:
            raise ValueError("indices must be non-negative")

    def check_bounds(self, total: int) -> None:
        if self.indices[-1] >= total:
            raise ValueError(f"schedule for {self.key} exceeds the conversation length")


@dataclass(frozen=True)
class WorkloadSpec:
    kind: str = "realistic"
    total_messages: int = 100
    seed: int = 0
    act_mix: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_ACT_MIX))
    scales: tuple[int, ...] = TEN_SCALES
    probes: int = 4
    seeds: int = 5
    churn_keys: int | None = None

    def __post_init__(self):
        if self.kind not in ("capacity", "realistic", "baseline_scenario", "honest120"):
            raise ValueError(f"unknown workload kind {self.kind!r}")
        if self.total_messages < 1:
            raise ValueError("total_messages must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if set(self.act_mix) != set(DEFAULT_ACT_MIX):
            raise ValueError(f"act mix must cover {sorted(DEFAULT_ACT_MIX)}")
        if any(p < 0 for p in self.act_mix.values()) or not math.isclose(
            sum(self.act_mix.values()), 1.0, abs_tol=1e-9
        ):
            raise ValueError("act mix proportions must be non-negative and sum to 1")
        if self.probes < 1 or self.seeds < 1:
            raise ValueError("probes and seeds must be positive")

    def with_run(self, total_messages: int, seed: int) -> "WorkloadSpec":
        return WorkloadSpec(self.kind, total_messages, seed, dict(self.act_mix), self.scales,
                            self.probes, self.seeds, self.churn_keys)

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["scales"] = list(self.scales)
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "WorkloadSpec":
        return cls(rec["kind"], int(rec["total_messages"]), int(rec["seed"]), dict(rec["act_mix"]),
                   tuple(rec["scales"]), int(rec["probes"]), int(rec["seeds"]), rec.get("churn_keys"))

    def spec_hash(self) -> str:
        """Provenance hash of everything except the seed."""
        rec = self.to_record()
        rec.pop("seed")
        return _stable_hash(rec)


@dataclass(frozen=True)
class QueryCase:
    query_type: QueryType
    question: str
    expected: str
    supporting_indices: tuple[int, ...]
    keys: tuple[str, ...] = ()
    # every part must match (multi-hop joins)
    expected_parts: tuple[str, ...] = ()
    unique_fact: bool = False

    def parts(self) -> tuple[str, ...]:
        return self.expected_parts or (self.expected,)

    def to_record(self) -> dict:
        return {
            "query_type": self.query_type.value,
            "question": self.question,
            "expected": self.expected,
            "supporting_indices": list(self.supporting_indices),
            "keys": list(self.keys),
            "expected_parts": list(self.expected_parts),
            "unique_fact": self.unique_fact,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "QueryCase":
        return cls(QueryType(rec["query_type"]), rec["question"], rec["expected"],
                   tuple(rec["supporting_indices"]), tuple(rec["keys"]),
                   tuple(rec["expected_parts"]), bool(rec["unique_fact"]))


@dataclass(frozen=True)
class RealisticRun:
    messages: tuple[Message, ...]
    cases: tuple[QueryCase, ...]
    acts: tuple[Act, ...]
    schedules: tuple[ContradictionSchedule, ...]

    def __iter__(self) -> Iterator:
        # unpacks as (messages, cases)
        return iter((self.messages, self.cases))

    def act_counts(self) -> dict[str, int]:
        return {a.value: sum(1 for x in self.acts if x is a) for a in Act}


# ---------------------------------------------------------------------------
# fact extraction and answers


def extract_facts(messages: Sequence[Message]) -> dict[str, list[tuple[int, str]]]:
    """Every marker in the log: key -> [(message index, value), ...] in log order."""
    facts: dict[str, list[tuple[int, str]]] = {}
    for m in messages:
        for key, value in iter_facts(m.text):
            facts.setdefault(key, []).append((m.index, value))
    return facts


def value_sequence(occurrences: Sequence[tuple[int, str]]) -> list[str]:
    """Distinct consecutive values (repeats of the same value collapse)."""
    out: list[str] = []
    for _, v in occurrences:
        if not out or out[-1] != v:
            out.append(v)
    return out


def answer_from_facts(case: QueryCase, facts: dict[str, list[tuple[int, str]]]) -> tuple[str, ...]:
    """Ground-truth answer parts recomputed from extracted facts."""
    out = []
    qtype = case.query_type
    for pos, key in enumerate(case.keys):
        occ = facts.get(key)
        if not occ:
            raise GenerationError(f"probe key {key} absent from the log")
        if qtype is QueryType.HISTORICAL_RETRIEVAL:
            out.append(occ[0][1])
        elif qtype is QueryType.TEMPORAL_SEQUENCE:
            out.append(" -> ".join(value_sequence(occ)))
        else:
            out.append(occ[-1][1])
    return tuple(out)


def make_case(
    qtype: QueryType,
    keys: Sequence[str],
    facts: dict[str, list[tuple[int, str]]],
    *,
    unique_fact: bool = False,
) -> QueryCase:
    if qtype is QueryType.MULTI_HOP:
        if len(keys) < 2:
            raise GenerationError("multi-hop cases join at least two facts")
        question = PROBES[qtype].format(k=keys[0], k2=keys[1])
    else:
        question = PROBES[qtype].format(k=keys[0])
    draft = QueryCase(qtype, question, "", (), tuple(keys), unique_fact=unique_fact)
    parts = answer_from_facts(draft, facts)
    support = tuple(sorted({i for k in keys for i, _ in facts[k]}))
    if len(parts) > 1:
        return QueryCase(qtype, question, "; ".join(parts), support, tuple(keys), parts, unique_fact)
    return QueryCase(qtype, question, parts[0], support, tuple(keys), (), unique_fact)


def check_answerable(cases: Sequence[QueryCase], messages: Sequence[Message]) -> None:
    """Recompute each expected answer from the raw log; raise on any mismatch."""
    facts = extract_facts(messages)
    for case in cases:
        parts = answer_from_facts(case, facts)
        if parts != case.parts():
            raise GenerationError(f"unanswerable case {case.question!r}: log says {parts}")


def capacity_probe(fact: FactSpec, messages: Sequence[Message]) -> QueryCase:
    return make_case(QueryType.RECENT_STATE, [fact.key], extract_facts(messages))


# ---------------------------------------------------------------------------
# generators


def generate_capacity_run(
    total: int,
    fact: FactSpec | Sequence[FactSpec],
    seed: int,
    *,
    filler: str = "natural",
    filler_tokens: int = 100,
    jitter: bool = False,
    counter: TokenCounter = DEFAULT_COUNTER,
) -> list[Message]:
    """Needle-in-a-haystack log: ``total`` filler messages with fact carriers.

    ``fact`` may be one FactSpec or several (each must land on its own
    index). ``filler="natural"`` draws short research chatter (about 13
    tokens); ``filler="exact"`` pads every message, carriers included, to
    exactly ``filler_tokens`` tokens under the heuristic counter.
    """
    if not 1 <= total <= 1_000_000:
        raise ValueError("total must lie in [1, 1,000,000]")
    if filler not in ("natural", "exact"):
        raise ValueError("filler must be 'natural' or 'exact'")
    facts = [fact] if isinstance(fact, FactSpec) else list(fact)
    if not facts:
        raise ValueError("need at least one fact")
    rng = np.random.default_rng(seed)
    where = [f.resolve(total, rng if jitter else None) for f in facts]
    if len(set(where)) != len(where):
        raise ValueError("facts must occupy distinct indices")
    carriers = [CAPACITY_CARRIER.format(k=f.key, v=f.value) for f in facts]
    exact_chars = filler_tokens * counter.divisor
    if filler == "exact":
        if max(len(c) for c in carriers) > exact_chars:
            raise ValueError("filler_tokens too small for the fact carrier")
        # a fixed pool keeps 100k-message runs cheap
        pool = [_pad_exact("", exact_chars, rng) for _ in range(64)]
        carriers = [_pad_exact(c, exact_chars, rng) for c in carriers]
        picks = rng.integers(len(pool), size=total)
        texts = [pool[i] for i in picks]
    else:
        texts = [_filler(rng) for _ in range(total)]
    for i, c in zip(where, carriers):
        texts[i] = c
    return [Message.create(role_for(i), t, i, counter) for i, t in enumerate(texts)]


def generate_fact_stream(
    total: int,
    seed: int,
    *,
    every: int = 10,
    fact_tokens: int = 30,
    counter: TokenCounter = DEFAULT_COUNTER,
) -> list[Message]:
    """Filler log with a fresh unique fact every ``every`` messages.

    Each fact's rendered profile line is sized so that line plus newline is
    exactly ``fact_tokens`` tokens, so a merged profile of n facts counts
    exactly ``n * fact_tokens`` tokens.
    """
    line_chars = fact_tokens * counter.divisor - 1
    rng = np.random.default_rng(seed)
    alphabet = np.array(list("abcdefghijklmnopqrstuvwxyz0123456789"))
    messages = []
    n_fact = 0
    for i in range(total):
        if i % every == every - 1:
            key = f"fact_{n_fact:06d}"
            n_fact += 1
            value_len = line_chars - len(render_fact(key, "x")) + 1
            if value_len < 1:
                raise ValueError("fact_tokens too small for the key")
            value = "".join(rng.choice(alphabet, size=value_len))
            text = f"Logging {render_fact(key, value)} for the record."
        else:
            text = _filler(rng)
        messages.append(Message.create(role_for(i), text, i, counter))
    return messages


def _spread(rng: np.random.Generator, total: int, n: int, lo: float, hi: float) -> list[int]:
    """n increasing target positions spread over [lo, hi) of the log with jitter."""
    edges = np.linspace(lo, hi, n + 1)
    return [int(total * rng.uniform(edges[i], edges[i + 1])) for i in range(n)]


def _ladders(total: int) -> list[tuple[str, tuple[str, ...], tuple[float, ...]]]:
    return [
        ("dataset", ("TCGA-PAAD",), (0.01,)),
        ("sample_count", ("178",), (0.015,)),
        ("hypothesis", (HYPOTHESIS_FAP, HYPOTHESIS_PDGFRB), (0.03, 0.55)),
        ("p_threshold", ("0.05", "0.01", "0.001"), (0.08, 0.35, 0.62)),
        ("fold_change", ("1.0", "1.5", "2.0"), (0.12, 0.42, 0.70)),
    ]


def default_churn_keys(total: int) -> int:
    return min(len(CHURN_KEYS), total // 150)


def generate_realistic_run(spec: WorkloadSpec, counter: TokenCounter = DEFAULT_COUNTER) -> RealisticRun:
    """Research-session log drawn from the act mix, with planned parameter evolutions.

    Planned events (the dataset facts, the threshold, fold-change and
    hypothesis ladders, and the churn keys) claim slots near their target
    positions and override the drawn act. Remaining directive slots
    introduce new one-off keys; remaining state-update slots report
    progress without a marker.
    """
    total = spec.total_messages
    rng = np.random.default_rng(spec.seed)
    names = [a.value for a in Act]
    probs = np.array([spec.act_mix[n] for n in names])
    acts = [Act(names[i]) for i in rng.choice(len(names), size=total, p=probs / probs.sum())]

    events: list[tuple[int, str, str, bool]] = []  # (target, key, value, is_first)
    for key, values, fracs in _ladders(total):
        for j, (v, f) in enumerate(zip(values, fracs)):
            events.append((int(f * total), key, v, j == 0))
    n_churn = spec.churn_keys if spec.churn_keys is not None else default_churn_keys(total)
    churn_names = list(CHURN_KEYS)[:n_churn]
    for key in churn_names:
        pool = CHURN_KEYS[key]
        # three values: with 50-token overlaps a key then spans at most six
        # chunks, and any five of them still hold both the first and last value
        for j, pos in enumerate(_spread(rng, total, CHURN_VALUES, 0.02, 0.98)):
            events.append((pos, key, pool[j], j == 0))

    taken: dict[int, tuple[str, str, bool]] = {}
    placed: dict[str, list[int]] = {}
    for target, key, value, first in sorted(events, key=lambda e: (e[0], e[1])):
        slot = min(max(target, 0), total - 1)
        lower = placed[key][-1] + 1 if key in placed else 0
        slot = max(slot, lower)
        while slot < total and slot in taken:
            slot += 1
        if slot >= total:
            raise GenerationError(f"no room for {key}={value} in a log of {total} messages")
        taken[slot] = (key, value, first)
        placed.setdefault(key, []).append(slot)

    texts = []
    n_unique = 0
    for i in range(total):
        if i in taken:
            key, value, first = taken[i]
            acts[i] = Act.DIRECTIVE if first else Act.STATE_UPDATE
            template = _pick(rng, DIRECTIVES if first else UPDATES)
            texts.append(template.format(k=key, v=value))
        elif acts[i] is Act.DIRECTIVE:
            key = f"{_pick(rng, UNIQUE_STEMS)}_{n_unique}"
            n_unique += 1
            texts.append(_pick(rng, DIRECTIVES).format(k=key, v=_pick(rng, UNIQUE_VALUES)))
        elif acts[i] is Act.STATE_UPDATE:
            texts.append(_fill(_pick(rng, STATUS), rng))
        elif acts[i] is Act.EXPERIMENTAL_LOG:
            texts.append(_fill(_pick(rng, LOGS), rng))
        else:
            texts.append(_fill(_pick(rng, NOISE), rng))
    messages = tuple(Message.create(role_for(i), t, i, counter) for i, t in enumerate(texts))

    facts = extract_facts(messages)
    schedules = tuple(
        ContradictionSchedule(k, tuple(v for _, v in facts[k]), tuple(i for i, _ in facts[k]))
        for k in ["p_threshold", "fold_change", "hypothesis", *churn_names]
        if len(facts.get(k, ())) >= 2
    )
    for s in schedules:
        s.check_bounds(total)
    probe_plan = [
        (QueryType.RECENT_STATE, ["p_threshold"]),
        (QueryType.CONTRADICTORY, ["fold_change"]),
        (QueryType.LONG_TERM, ["sample_count"]),
        (QueryType.HISTORICAL_RETRIEVAL, ["hypothesis"]),
    ]
    if spec.probes > len(probe_plan):
        raise ValueError(f"at most {len(probe_plan)} probes per realistic run")
    cases = tuple(make_case(t, k, facts) for t, k in probe_plan[: spec.probes])
    check_answerable(cases, messages)
    return RealisticRun(messages, cases, tuple(acts), schedules)


STATUS = (
    "Status: {s} remaining samples are still queued.",
    "Progress note: batch {n} is halfway aligned.",
    "Pipeline check: step {s} of the workflow is done.",
    "Cluster quota raised, jobs for lane {n} resumed.",
)


def generate_query_suite(
    messages: Sequence[Message],
    seed: int = 0,
    per_type: int = 20,
) -> list[QueryCase]:
    """Six query types, ``per_type`` cases each, all derived from the log.

    - recent_state, contradictory, temporal_sequence probe keys that took
      at least three values;
    - historical_retrieval probes one-off facts from the first 20% of the log;
    - long_term probes one-off facts from the 40-60% band;
    - multi_hop joins a one-off fact with the newest value of an evolving key.

    Raises GenerationError when the log cannot support a type.
    """
    total = len(messages)
    facts = extract_facts(messages)
    rng = np.random.default_rng(seed)
    evolving = sorted(k for k, occ in facts.items() if len(value_sequence(occ)) >= 3)
    unique = [k for k, occ in facts.items() if len(occ) == 1]
    early = sorted(k for k in unique if facts[k][0][0] < 0.2 * total)
    middle = sorted(k for k in unique if 0.4 * total <= facts[k][0][0] < 0.6 * total)
    for name, pool in (("evolving", evolving), ("early", early), ("middle", middle)):
        if len(pool) < per_type:
            raise GenerationError(f"log supports only {len(pool)} {name} keys, need {per_type}")

    def sample(pool: list[str]) -> list[str]:
        return [pool[i] for i in sorted(rng.choice(len(pool), size=per_type, replace=False))]

    cases: list[QueryCase] = []
    for qtype in (QueryType.RECENT_STATE, QueryType.CONTRADICTORY, QueryType.TEMPORAL_SEQUENCE):
        cases.extend(make_case(qtype, [k], facts) for k in sample(evolving))
    cases.extend(make_case(QueryType.HISTORICAL_RETRIEVAL, [k], facts, unique_fact=True)
                 for k in sample(early))
    cases.extend(make_case(QueryType.LONG_TERM, [k], facts, unique_fact=True)
                 for k in sample(middle))
    stable = [k for k in unique if k not in set(middle)]
    if len(stable) < per_type:
        stable = unique
    for a, b in zip(sample(stable), sample(evolving)):
        cases.append(make_case(QueryType.MULTI_HOP, [a, b], facts))
    check_answerable(cases, messages)
    return cases


def honest120_workload(seed: int, total: int = 3000,
                       counter: TokenCounter = DEFAULT_COUNTER) -> tuple[tuple[Message, ...], list[QueryCase]]:
    """Log plus 120-case suite used by the six-type evaluation."""
    spec = WorkloadSpec(kind="honest120", total_messages=total, seed=seed, churn_keys=len(CHURN_KEYS))
    run = generate_realistic_run(spec, counter)
    return run.messages, generate_query_suite(run.messages, seed=seed)


# ---------------------------------------------------------------------------
# bundled baseline scenario

_SCENARIO_CORE = (
    ("user", "We are starting the CAF project today. Our cohort is FACT dataset=TCGA-PAAD from the GDC portal."),
    ("agent", "Understood. I will pull the expression matrix and clinical tables for that cohort."),
    ("user", "After filtering we have FACT sample_count=178 samples with complete RNA-seq and survival data."),
    ("agent", "Confirmed: 178 samples pass filtering. I will keep that count fixed for every analysis."),
    ("user", "Our working idea is FACT hypothesis=FAP+_CAFs_drive_chemoresistance in these tumours."),
    ("agent", "Noted. I will score FAP expression in the stromal compartment as the lead readout."),
    ("user", "Track the stromal markers FACT marker_panel=FAP,ACTA2,PDGFRB in every figure."),
    ("agent", "The panel FAP, ACTA2 and PDGFRB is added to the default plotting function."),
    ("user", "For differential expression use FACT p_threshold=0.05 on adjusted p-values."),
    ("agent", "Set. DESeq2 results will be filtered at adjusted p below 0.05."),
    ("user", "Also require FACT fold_change=1.0 as the minimum absolute log2 fold change."),
    ("agent", "Added the log2 fold-change cutoff of 1.0 to the results filter."),
)

_SCENARIO_LATER = {
    40: ("user", "Too many hits. Tighten to FACT p_threshold=0.01 from now on."),
    41: ("agent", "Updated: the adjusted p-value cutoff is now 0.01 for all contrasts."),
    56: ("user", "Raise the effect size too: FACT fold_change=1.5 for the main table."),
    57: ("agent", "Log2 fold-change cutoff raised to 1.5 and the tables regenerated."),
    70: ("user", "The pericyte signal is stronger than FAP. New working idea: "
             "FACT hypothesis=PDGFRB+_pericytes_drive_chemoresistance in this cohort."),
    71: ("agent", "Pivot recorded: PDGFR-beta positive pericytes replace FAP+ CAFs as the lead hypothesis."),
    86: ("user", "For the final figures use the strictest cutoff, FACT p_threshold=0.001 on adjusted p."),
    87: ("agent", "Final cutoff is adjusted p below 0.001; all figures are being redrawn."),
    98: ("user", "One more tightening: FACT fold_change=2.0 for the figure tables."),
    99: ("agent", "Minimum log2 fold change is 2.0 in every exported table now."),
}

BASELINE_LENGTH = 114


def baseline_scenario(counter: TokenCounter = DEFAULT_COUNTER) -> list[Message]:
    """Fixed 114-message CAF analysis session (no system prompt)."""
    rng = np.random.default_rng(20240114)
    texts: list[tuple[str, str]] = list(_SCENARIO_CORE)
    for i in range(len(texts), BASELINE_LENGTH):
        if i in _SCENARIO_LATER:
            texts.append(_SCENARIO_LATER[i])
        else:
            pool = LOGS if i % 2 else NOISE
            texts.append((role_for(i).value, _fill(_pick(rng, pool), rng)))
    out = []
    for i, (role, text) in enumerate(texts):
        if Role(role) is not role_for(i):
            raise GenerationError(f"scenario message {i} breaks role alternation")
        out.append(Message.create(role, text, i, counter))
    return out
