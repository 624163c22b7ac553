"""Scoring, aggregation, the cost model and report rendering."""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from dualmem.backends import Outcome
from dualmem.simulation import QUERY_TYPES, Placement, QueryCase

ARCH_ORDER = ("dual_process", "rag", "full_context")
CALL_INFERENCE = "inference"
CALL_CONSOLIDATION = "consolidation"


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class BenchmarkRecord:
    architecture: str
    scale: int
    seed: int
    query_type: str
    expected: str
    actual: str
    matched: bool
    latency_ms: float
    input_tokens: int
    output_tokens: int
    outcome: str
    cost: float
    model: str = ""
    call_kind: str = CALL_INFERENCE
    group: str = ""
    question: str = ""
    retrieved_ids: tuple[int, ...] = ()

    def __post_init__(self):
        if self.outcome not in {o.value for o in Outcome}:
            raise ValueError(f"unknown outcome {self.outcome!r}")
        if self.outcome == Outcome.OVERFLOW.value and self.matched:
            raise ValueError("an overflowed call cannot match")
        if self.input_tokens < 0 or self.output_tokens < 0 or self.cost < 0:
            raise ValueError("tokens and cost must be non-negative")

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["retrieved_ids"] = list(self.retrieved_ids)
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "BenchmarkRecord":
        known = {f: rec[f] for f in cls.__dataclass_fields__ if f in rec}
        known["retrieved_ids"] = tuple(known.get("retrieved_ids", ()))
        return cls(**known)

    def sort_key(self) -> tuple:
        arch = ARCH_ORDER.index(self.architecture) if self.architecture in ARCH_ORDER else 99
        return (self.scale, arch, self.group, self.query_type, self.seed, self.call_kind, self.question)


# ---------------------------------------------------------------------------
# pricing and cost


class PricingError(KeyError):
    pass


@dataclass(frozen=True)
class PricingTable:
    """USD per million tokens, keyed by model: (input, output)."""

    prices: dict[str, tuple[float, float]] = field(default_factory=lambda: {
        "gpt-4o": (2.50, 10.00),
        "gpt-4o-mini": (0.15, 0.60),
    })

    def __post_init__(self):
        for model, (pin, pout) in self.prices.items():
            if pin < 0 or pout < 0:
                raise ValueError(f"negative price for {model}")

    def rates(self, model: str) -> tuple[float, float]:
        try:
            return self.prices[model]
        except KeyError:
            raise PricingError(f"no pricing entry for model {model!r}") from None

    def cost(self, model: str, input_tokens: int, output_tokens: int) -> float:
        pin, pout = self.rates(model)
        return (input_tokens * pin + output_tokens * pout) / 1e6


DEFAULT_PRICING = PricingTable()
INFERENCE_MODEL = "gpt-4o"
CONSOLIDATION_MODEL = "gpt-4o-mini"


def run_cost(records: Iterable[BenchmarkRecord], pricing: PricingTable = DEFAULT_PRICING) -> float:
    """Total USD over every call (inference and consolidation) in ``records``."""
    return math.fsum(pricing.cost(r.model, r.input_tokens, r.output_tokens) for r in records)


@dataclass(frozen=True)
class CostAssumptions:
    """Token curves behind the projected totals. Every field is printed in cost reports.

    Message index i runs from 1 to T and each message is answered once.
    """

    tokens_per_message: float = 40.0
    fc_truncation: int = 120_000
    hard_limit: int = 128_000
    prompt_overhead: float = 30.0  # preamble plus query
    profile_intercept: float = 78.5
    profile_slope: float = 3.03
    window: int = 10
    output_tokens: float = 200.0
    consolidation_every: int = 1
    consolidation_instruction: float = 60.0
    exchange_messages: int = 2

    def lines(self) -> list[str]:
        return [
            f"messages average {self.tokens_per_message:g} tokens; each message gets one inference call",
            f"inference output is {self.output_tokens:g} tokens per call",
            f"full context input = {self.prompt_overhead:g} + min({self.tokens_per_message:g} * i, "
            f"{self.fc_truncation}) tokens; uncapped history above {self.hard_limit} is a crash",
            f"dual process input = {self.prompt_overhead:g} + profile ({self.profile_intercept:g} + "
            f"{self.profile_slope:g} * i) + min(i, {self.window}) * {self.tokens_per_message:g}",
            f"consolidation runs every {self.consolidation_every} message(s) on the mini model: input = "
            f"{self.consolidation_instruction:g} instruction + profile + window + "
            f"{self.exchange_messages} exchange messages, output = the full updated profile",
        ]


@dataclass(frozen=True)
class CostProjection:
    messages: np.ndarray
    dp_per_message: np.ndarray
    fc_per_message: np.ndarray
    fc_crashed: np.ndarray

    @property
    def dp_total(self) -> float:
        return float(self.dp_per_message.sum())

    @property
    def fc_total(self) -> float:
        return float(self.fc_per_message.sum())


def project_costs(
    total: int,
    assumptions: CostAssumptions = CostAssumptions(),
    pricing: PricingTable = DEFAULT_PRICING,
) -> CostProjection:
    a = assumptions
    i = np.arange(1, total + 1, dtype=float)
    in_inf, out_inf = pricing.rates(INFERENCE_MODEL)
    in_con, out_con = pricing.rates(CONSOLIDATION_MODEL)
    history = a.tokens_per_message * i
    fc_in = a.prompt_overhead + np.minimum(history, a.fc_truncation)
    fc = (fc_in * in_inf + a.output_tokens * out_inf) / 1e6
    profile = a.profile_intercept + a.profile_slope * i
    window = np.minimum(i, a.window) * a.tokens_per_message
    dp_in = a.prompt_overhead + profile + window
    dp = (dp_in * in_inf + a.output_tokens * out_inf) / 1e6
    fires = (i % a.consolidation_every) == 0
    con_in = a.consolidation_instruction + profile + window + a.exchange_messages * a.tokens_per_message
    dp = dp + fires * (con_in * in_con + profile * out_con) / 1e6
    crashed = history + a.prompt_overhead > a.hard_limit
    return CostProjection(i.astype(int), dp, fc, crashed)


def crossover_point(
    dp_costs: Sequence[float],
    fc_costs: Sequence[float],
    grid: Sequence[int] | None = None,
) -> int | None:
    """Smallest T at which cumulative DP cost is below cumulative FC cost.

    Both series hold per-message costs on the same grid (default 1..n).
    Returns None when DP never becomes cheaper.
    """
    dp = np.cumsum(np.asarray(dp_costs, dtype=float))
    fc = np.cumsum(np.asarray(fc_costs, dtype=float))
    if dp.shape != fc.shape:
        raise ValueError("cost series must share a grid")
    grid = np.arange(1, len(dp) + 1) if grid is None else np.asarray(grid)
    if len(grid) != len(dp):
        raise ValueError("grid length must match the cost series")
    below = np.nonzero(dp < fc)[0]
    return int(grid[below[0]]) if below.size else None


# ---------------------------------------------------------------------------
# matching

_WS = re.compile(r"\s+")
_OP_SPACE = re.compile(r"\s*(<=|>=|!=|==|<|>|=)\s*")


def normalize_answer(text: str) -> str:
    """Lowercase, collapse whitespace, and drop spaces around comparison operators."""
    text = _WS.sub(" ", text.strip().lower())
    return _OP_SPACE.sub(r"\1", text)


def match_answer(expected: str, actual: str) -> bool:
    if not expected or not expected.strip():
        raise ValueError("expected answer must be non-empty")
    return normalize_answer(expected) in normalize_answer(actual)


def match_case(case: QueryCase, actual: str) -> bool:
    """Every expected part must match (multi-hop answers join several facts)."""
    return all(match_answer(p, actual) for p in case.parts())


# ---------------------------------------------------------------------------
# aggregation


def proportion_ci(successes: int, n: int, method: str = "t") -> tuple[float, float]:
    """Two-sided 95% interval for a proportion, clamped to [0, 1].

    ``t``: p +/- t(0.975, n-1) * sqrt(p(1-p)/(n-1)), the Student-t interval
    over the n binary outcomes (sample standard deviation, n-1 degrees of
    freedom). ``normal``: the Wald interval p +/- 1.96 * sqrt(p(1-p)/n).
    """
    if n <= 0:
        return 0.0, 0.0
    p = successes / n
    if method == "t":
        if n < 2:
            return 0.0, 1.0
        half = stats.t.ppf(0.975, n - 1) * math.sqrt(p * (1 - p) / (n - 1))
    elif method == "normal":
        half = stats.norm.ppf(0.975) * math.sqrt(p * (1 - p) / n)
    else:
        raise ValueError(f"unknown CI method {method!r}")
    return max(0.0, p - half), min(1.0, p + half)


CI_METHOD_NOTE = {
    "t": "95% CI: p +/- t(0.975, n-1) * sqrt(p(1-p)/(n-1)), clamped to [0, 1]",
    "normal": "95% CI: p +/- 1.96 * sqrt(p(1-p)/n) (normal approximation), clamped to [0, 1]",
}


@dataclass(frozen=True)
class ScaleSummary:
    scale: int
    architecture: str
    group: str
    n: int
    accuracy: float
    ci_low: float
    ci_high: float
    latency_mean_ms: float
    tokens_mean: float
    tokens_sd: float
    crashed: bool
    overflow_count: int = 0

    def accuracy_label(self) -> str:
        if self.crashed and self.accuracy == 0.0:
            return "0.0% (Crash)"
        return f"{100 * self.accuracy:.1f}%"

    def ci_label(self) -> str:
        half = 100 * max(self.accuracy - self.ci_low, self.ci_high - self.accuracy)
        return f"[{100 * self.ci_low:.1f}, {100 * self.ci_high:.1f}] (+/-{half:.1f})"

    def to_record(self) -> dict:
        return asdict(self)


def summarize_scale(
    records: Sequence[BenchmarkRecord],
    *,
    group_by: str | None = None,
    ci_method: str = "t",
) -> list[ScaleSummary]:
    """One summary per (scale, architecture[, group]) over inference records.

    ``group_by`` is ``"group"`` (placement labels), ``"query_type"`` or None.
    A cell is marked crashed when any of its records overflowed.
    """
    cells: dict[tuple, list[BenchmarkRecord]] = {}
    for r in records:
        if r.call_kind != CALL_INFERENCE:
            continue
        group = getattr(r, group_by) if group_by else ""
        cells.setdefault((r.scale, r.architecture, group), []).append(r)
    out = []
    for (scale, arch, group), rs in cells.items():
        n = len(rs)
        k = sum(r.matched for r in rs)
        lo, hi = proportion_ci(k, n, ci_method)
        overflow = sum(r.outcome == Outcome.OVERFLOW.value for r in rs)
        tokens = np.array([r.input_tokens for r in rs], dtype=float)
        out.append(ScaleSummary(
            scale=scale,
            architecture=arch,
            group=group,
            n=n,
            accuracy=k / n,
            ci_low=lo,
            ci_high=hi,
            latency_mean_ms=float(np.mean([r.latency_ms for r in rs])),
            tokens_mean=float(tokens.mean()),
            tokens_sd=float(tokens.std(ddof=1)) if n > 1 else 0.0,
            crashed=overflow > 0,
            overflow_count=overflow,
        ))
    return sorted(out, key=_summary_key)


def _summary_key(s: ScaleSummary) -> tuple:
    arch = ARCH_ORDER.index(s.architecture) if s.architecture in ARCH_ORDER else 99
    order = [q.value for q in QUERY_TYPES] + [p.value for p in Placement]
    group = (order.index(s.group), s.group) if s.group in order else (len(order), s.group)
    return (s.scale, arch, group)


@dataclass(frozen=True)
class GrowthFit:
    slope: float
    intercept: float
    r_squared: float | None
    n: int

    def label(self) -> str:
        r2 = "n/a" if self.r_squared is None else f"{self.r_squared:.4f}"
        return f"y = {self.slope:.4f}x + {self.intercept:.2f} (R^2 = {r2}, n = {self.n})"


def fit_growth_law(series: Sequence[tuple[float, float]]) -> GrowthFit:
    """Ordinary least squares of profile tokens on message count.

    R^2 is None when the response is constant (undefined).
    """
    if len(series) < 3:
        raise ValueError("need at least 3 points to fit a growth law")
    x = np.array([p[0] for p in series], dtype=float)
    y = np.array([p[1] for p in series], dtype=float)
    if np.ptp(x) == 0:
        raise ValueError("message counts must vary")
    slope, intercept = np.polyfit(x, y, 1)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return GrowthFit(0.0, float(y.mean()), None, len(series))
    ss_res = float(((y - (slope * x + intercept)) ** 2).sum())
    return GrowthFit(float(slope), float(intercept), 1.0 - ss_res / ss_tot, len(series))


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class ReportMeta:
    title: str = "Benchmark report"
    spec_hash: str = ""
    seeds: tuple[int, ...] = ()
    backend_kind: str = "scripted"
    simulated_latency: bool = True
    ci_method: str = "t"
    notes: tuple[str, ...] = ()


SIMULATED_BANNER = (
    "> **simulated latency**: scripted backends report latency from an affine "
    "model of input tokens, not wall-clock measurements."
)

_TABLE_HEAD = (
    "| Scale | Architecture | Group | n | Accuracy | 95% CI | Latency (ms) | Tokens (mean +/- SD) |",
    "|---:|---|---|---:|---:|---|---:|---|",
)


def _row(s: ScaleSummary) -> str:
    return (
        f"| {s.scale} | {s.architecture} | {s.group or '-'} | {s.n} | {s.accuracy_label()} | "
        f"{s.ci_label()} | {s.latency_mean_ms:.0f} | {s.tokens_mean:,.0f} +/- {s.tokens_sd:,.0f} |"
    )


def emit_report(
    summaries: Sequence[ScaleSummary],
    meta: ReportMeta = ReportMeta(),
    fmt: str = "markdown",
    sections: Sequence[tuple[str, Sequence[str]]] = (),
) -> str:
    """Render summaries deterministically (by scale, architecture, group).

    ``sections`` appends extra (heading, lines) blocks to markdown output.
    """
    ordered = sorted(summaries, key=_summary_key)
    if fmt == "line_records":
        head = {
            "record": "header",
            "title": meta.title,
            "spec_hash": meta.spec_hash,
            "seeds": list(meta.seeds),
            "backend_kind": meta.backend_kind,
            "simulated_latency": meta.simulated_latency,
            "ci_method": meta.ci_method,
        }
        lines = [json.dumps(head, sort_keys=True)]
        lines += [json.dumps({"record": "summary", **s.to_record()}, sort_keys=True) for s in ordered]
        return "\n".join(lines) + "\n"
    if fmt != "markdown":
        raise ValueError(f"unknown report format {fmt!r}")
    out = [f"# {meta.title}", ""]
    if meta.simulated_latency:
        out += [SIMULATED_BANNER, ""]
    out += [
        f"- spec hash: `{meta.spec_hash or 'n/a'}`",
        f"- seeds: {', '.join(str(s) for s in meta.seeds) or 'n/a'}",
        f"- backend kind: {meta.backend_kind}",
        f"- {CI_METHOD_NOTE[meta.ci_method]}",
    ]
    out += [f"- {n}" for n in meta.notes]
    out += ["", *_TABLE_HEAD]
    out += [_row(s) for s in ordered]
    for heading, lines in sections:
        out += ["", f"## {heading}", "", *lines]
    return "\n".join(out) + "\n"


def per_type_table(summaries: Sequence[ScaleSummary], architectures: Sequence[str]) -> list[str]:
    """Rows of query type against architecture accuracy (one scale)."""
    by = {(s.group, s.architecture): s for s in summaries}
    head = "| Query type | " + " | ".join(architectures) + " |"
    lines = [head, "|---|" + "---:|" * len(architectures)]
    for qt in QUERY_TYPES:
        cells = []
        for arch in architectures:
            s = by.get((qt.value, arch))
            cells.append(s.accuracy_label() if s else "-")
        lines.append(f"| {qt.value} | " + " | ".join(cells) + " |")
    return lines


def placement_table(summaries: Sequence[ScaleSummary]) -> list[str]:
    """Capacity layout: one row per scale, accuracy per architecture and placement."""
    cols = sorted({(s.architecture, s.group) for s in summaries},
                  key=lambda c: _summary_key(ScaleSummary(0, c[0], c[1], 0, 0, 0, 0, 0, 0, 0, False)))
    by = {(s.scale, s.architecture, s.group): s for s in summaries}
    lines = ["| Scale | " + " | ".join(f"{a} {g}".strip() for a, g in cols) + " |",
             "|---:|" + "---:|" * len(cols)]
    for scale in sorted({s.scale for s in summaries}):
        cells = []
        for a, g in cols:
            s = by.get((scale, a, g))
            if s is None:
                cells.append("-")
            elif s.accuracy == 0.0 and not s.crashed:
                cells.append("0.0% (Lost)")
            else:
                cells.append(s.accuracy_label())
        lines.append(f"| {scale} | " + " | ".join(cells) + " |")
    return lines
