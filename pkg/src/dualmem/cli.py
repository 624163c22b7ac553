"""Command-line runner: ``dualmem {capacity,realistic,honest120,consolidation-ablation,cost,replay}``.

Every run writes ``config.snapshot``, ``records.ldj``, ``report.md`` and
``growth.series`` into its output directory. ``replay`` regenerates a
directory from its snapshot and compares the files byte for byte.

Exit codes: 0 success, 1 configuration error, 2 backend error,
3 replay mismatch.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

from dualmem import __version__
from dualmem.architectures import Architecture
from dualmem.backends import (
    BackendError,
    BackendKind,
    ChatBackendSpec,
    FixtureStore,
    HttpChatBackend,
    HttpEmbedder,
    Outcome,
)
from dualmem.evaluation import (
    CALL_CONSOLIDATION,
    CONSOLIDATION_MODEL,
    DEFAULT_PRICING,
    INFERENCE_MODEL,
    BenchmarkRecord,
    CostAssumptions,
    ReportMeta,
    crossover_point,
    emit_report,
    fit_growth_law,
    per_type_table,
    placement_table,
    project_costs,
    summarize_scale,
)
from dualmem.harness import Backends, run_capacity, run_honest120, run_realistic
from dualmem.persistence import atomic_write_text, write_records_file
from dualmem.simulation import TEN_SCALES, Placement, WorkloadSpec

logger = logging.getLogger("dualmem")

COMMANDS = ("capacity", "realistic", "honest120", "consolidation-ablation", "cost", "replay")
EXIT_OK, EXIT_CONFIG, EXIT_BACKEND, EXIT_MISMATCH = 0, 1, 2, 3
OUTPUT_FILES = ("config.snapshot", "records.ldj", "report.md", "growth.series")

CAPACITY_SCALES = (10, 1000, 10000, 30000, 50000, 100000)
CAPACITY_RANGE = (10, 100_000)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything needed to regenerate a results directory."""

    command: str
    scales: list[int] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)
    probes: int = 1
    archs: list[str] = field(default_factory=list)
    backend: str = "scripted"
    cadence: int = 10
    seed: int = 0
    placements: list[str] = field(default_factory=lambda: [p.value for p in Placement])
    filler: str = "exact"
    embed_dim: int = 0
    total: int = 3000
    drop_fractions: list[float] = field(default_factory=lambda: [0.0, 0.5])
    ci_method: str = "t"
    endpoint: str | None = None
    model: str = INFERENCE_MODEL
    mini_model: str = CONSOLIDATION_MODEL
    embed_model: str = "text-embedding-3-small"
    fixtures: str | None = None
    fixture_mode: str = "live"
    version: str = __version__

    def validate(self) -> None:
        if self.command not in COMMANDS or self.command == "replay":
            raise ConfigError(f"cannot snapshot command {self.command!r}")
        if self.backend not in ("scripted", "http"):
            raise ConfigError("backend must be scripted or http")
        if self.backend == "http" and not self.endpoint:
            raise ConfigError("--backend http needs --endpoint")
        if self.cadence < 1:
            raise ConfigError("cadence must be at least 1")
        if self.probes < 1:
            raise ConfigError("probes must be at least 1")
        if self.command == "capacity":
            lo, hi = CAPACITY_RANGE
            bad = [s for s in self.scales if not lo <= s <= hi]
            if bad:
                raise ConfigError(f"capacity scales must lie in [{lo}, {hi}], got {bad}")
            if self.filler not in ("natural", "exact"):
                raise ConfigError("filler must be natural or exact")
        if any(s < 1 for s in self.scales):
            raise ConfigError("scales must be positive")
        for a in self.archs:
            try:
                Architecture.from_short(a)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        for p in self.placements:
            if p not in {x.value for x in Placement}:
                raise ConfigError(f"unknown placement {p!r}")
        if self.ci_method not in ("t", "normal"):
            raise ConfigError("ci method must be t or normal")
        if any(not 0.0 <= d < 1.0 for d in self.drop_fractions):
            raise ConfigError("drop fractions must lie in [0, 1)")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        raw = json.loads(text)
        known = {f.name for f in fields(cls)}
        extra = set(raw) - known
        if extra:
            logger.warning("ignoring unknown snapshot fields %s", sorted(extra))
        return cls(**{k: v for k, v in raw.items() if k in known})


# ---------------------------------------------------------------------------
# backends


def build_backends(cfg: RunConfig) -> Backends:
    if cfg.backend == "scripted":
        return Backends()
    fixtures = FixtureStore(cfg.fixtures, cfg.fixture_mode) if cfg.fixtures else None

    def chat(model: str) -> HttpChatBackend:
        spec = ChatBackendSpec(kind=BackendKind.HTTP, model=model, endpoint=cfg.endpoint,
                               temperature=0.0)
        return HttpChatBackend(spec, fixtures=fixtures)

    return Backends(
        inference=chat(cfg.model),
        consolidation=chat(cfg.mini_model),
        embedder_factory=lambda dim: HttpEmbedder(cfg.endpoint or "", cfg.embed_model, dim,
                                                  fixtures=fixtures),
    )


# ---------------------------------------------------------------------------
# outputs


@dataclass
class RunOutput:
    records: list[BenchmarkRecord]
    report: str
    growth: list[tuple[int, int, int, int]] = field(default_factory=list)


def _growth_text(rows: Sequence[tuple[int, int, int, int]]) -> str:
    lines = ["scale\tseed\tmessages\tprofile_tokens"]
    lines += ["\t".join(str(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_outputs(out: Path, cfg: RunConfig, result: RunOutput) -> None:
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "config.snapshot", cfg.to_json())
    provenance = {"command": cfg.command, "seeds": cfg.seeds, "backend": cfg.backend,
                  "version": cfg.version}
    records = sorted(result.records, key=lambda r: r.sort_key())
    write_records_file(out / "records.ldj", records, provenance)
    atomic_write_text(out / "report.md", result.report)
    atomic_write_text(out / "growth.series", _growth_text(result.growth))


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(cfg.to_json().encode()).hexdigest()[:16]


def _meta(cfg: RunConfig, title: str, spec_hash: str = "", notes: Sequence[str] = ()) -> ReportMeta:
    return ReportMeta(
        title=title,
        spec_hash=spec_hash or config_hash(cfg),
        seeds=tuple(cfg.seeds),
        backend_kind=cfg.backend,
        simulated_latency=cfg.backend == "scripted",
        ci_method=cfg.ci_method,
        notes=tuple(notes),
    )


def _archs(cfg: RunConfig) -> tuple[Architecture, ...]:
    return tuple(Architecture.from_short(a) for a in cfg.archs)


# ---------------------------------------------------------------------------
# commands


def cmd_capacity(cfg: RunConfig, backends: Backends) -> RunOutput:
    placements = [Placement(p) for p in cfg.placements]
    res = run_capacity(cfg.scales, cfg.seeds, placements=placements, archs=_archs(cfg),
                       probes=cfg.probes, filler=cfg.filler, cadence=cfg.cadence,
                       backends=backends)
    summaries = summarize_scale(res.records, group_by="group", ci_method=cfg.ci_method)
    footprint = ["| Scale | Architecture | Mean input tokens | Min | Max |", "|---:|---|---:|---:|---:|"]
    for (scale, arch), toks in sorted(res.footprints.items()):
        footprint.append(f"| {scale} | {arch} | {sum(toks) / len(toks):,.1f} | {min(toks):,} | {max(toks):,} |")
    report = emit_report(
        summaries,
        _meta(cfg, "Capacity scaling", notes=(f"filler: {cfg.filler}", f"probes per run: {cfg.probes}")),
        sections=[("Accuracy by placement", placement_table(summaries)),
                  ("Context footprint", footprint)],
    )
    return RunOutput(res.records, report)


def cmd_realistic(cfg: RunConfig, backends: Backends) -> RunOutput:
    base = WorkloadSpec(probes=cfg.probes)
    res = run_realistic(cfg.scales, cfg.seeds, archs=_archs(cfg), probes=cfg.probes,
                        cadence=cfg.cadence, embed_dim=cfg.embed_dim or 1024,
                        backends=backends, base_spec=base)
    summaries = summarize_scale(res.records, ci_method=cfg.ci_method)
    sections = []
    if len({g[2] for g in res.growth}) >= 3:
        fit = fit_growth_law([(g[2], g[3]) for g in res.growth])
        sections.append(("Profile growth", [f"- least-squares fit: {fit.label()}"]))
    return RunOutput(res.records, emit_report(summaries, _meta(cfg, "Realistic simulation",
                                                               base.spec_hash()), sections=sections),
                     res.growth)


def cmd_honest120(cfg: RunConfig, backends: Backends) -> RunOutput:
    records: list[BenchmarkRecord] = []
    checks = []
    for seed in cfg.seeds:
        res = run_honest120(seed, total=cfg.total, archs=_archs(cfg), cadence=cfg.cadence,
                            embed_dim=cfg.embed_dim or 16384, backends=backends)
        records += res.records
        checks += res.retrieval_checks
    inference = [r for r in records if r.call_kind != CALL_CONSOLIDATION]
    summaries = summarize_scale(inference, group_by="query_type", ci_method=cfg.ci_method)
    archs = [a.value for a in _archs(cfg)]
    lines = per_type_table(summaries, archs)
    sections = [("Accuracy by query type", lines)]
    if checks:
        both = sum(f and l for _, f, l in checks)
        sections.append(("Retrieval sets for same-key cases", [
            f"- cases: {len(checks)}",
            f"- first-value chunk retrieved: {sum(f for _, f, _ in checks)}",
            f"- last-value chunk retrieved: {sum(l for _, _, l in checks)}",
            f"- both retrieved: {both}",
        ]))
    meta = _meta(cfg, "Six-type query suite", notes=(f"messages per run: {cfg.total}",))
    return RunOutput(records, emit_report(summaries, meta, sections=sections))


def cmd_consolidation_ablation(cfg: RunConfig, backends: Backends) -> RunOutput:
    if len(cfg.drop_fractions) < 2:
        raise ConfigError("an ablation needs at least two consolidator variants")
    records: list[BenchmarkRecord] = []
    rows = ["| Variant | n | Accuracy | 95% CI | Latency (ms) | Final profile tokens (mean) |",
            "|---|---:|---:|---|---:|---:|"]
    per_type = []
    labels = []
    for drop in cfg.drop_fractions:
        label = "oracle" if drop == 0 else f"drop_{drop:g}"
        labels.append(label)
        finals = []
        for seed in cfg.seeds:
            res = run_honest120(seed, total=cfg.total, archs=(Architecture.DUAL_PROCESS,),
                                cadence=cfg.cadence, backends=backends, drop_fraction=drop,
                                group=label)
            records += res.records
            cons = [r for r in res.records if r.call_kind == CALL_CONSOLIDATION]
            finals.append(cons[-1].output_tokens if cons else 0)
        inf = [r for r in records if r.group == label and r.call_kind != CALL_CONSOLIDATION]
        (s,) = summarize_scale(inf, ci_method=cfg.ci_method)
        rows.append(f"| {label} | {s.n} | {s.accuracy_label()} | {s.ci_label()} | "
                    f"{s.latency_mean_ms:.0f} | {sum(finals) / len(finals):,.1f} |")
        for t in summarize_scale(inf, group_by="query_type", ci_method=cfg.ci_method):
            per_type.append(type(t)(**{**t.to_record(), "architecture": label}))
    inference = [r for r in records if r.call_kind != CALL_CONSOLIDATION]
    summaries = summarize_scale(inference, group_by="group", ci_method=cfg.ci_method)
    report = emit_report(summaries, _meta(cfg, "Consolidation ablation"),
                         sections=[("Variants", rows),
                                   ("Accuracy by query type", per_type_table(per_type, labels))])
    return RunOutput(records, report)


def cmd_cost(cfg: RunConfig, backends: Backends) -> RunOutput:
    a = CostAssumptions()
    lines = ["| Scale | Dual process (USD) | Full context (USD) | FC crashed calls |",
             "|---:|---:|---:|---:|"]
    cross = None
    for scale in cfg.scales:
        proj = project_costs(scale, a)
        lines.append(f"| {scale} | {proj.dp_total:,.3f} | {proj.fc_total:,.3f} | "
                     f"{int(proj.fc_crashed.sum())} |")
        if cross is None:
            cross = crossover_point(proj.dp_per_message, proj.fc_per_message)
    pricing = ["| Model | Input (USD / 1M) | Output (USD / 1M) |", "|---|---:|---:|"]
    pricing += [f"| {m} | {pin:.2f} | {pout:.2f} |" for m, (pin, pout) in DEFAULT_PRICING.prices.items()]
    body = [
        "# Cost projection",
        "",
        "## Assumptions",
        "",
        *[f"- {line}" for line in a.lines()],
        "",
        "## Pricing",
        "",
        *pricing,
        "",
        "## Totals",
        "",
        *lines,
        "",
        f"- crossover (first T with cumulative DP cost below FC): "
        f"{cross if cross is not None else 'none within the largest scale'}",
    ]
    return RunOutput([], "\n".join(body) + "\n")


RUNNERS: dict[str, Callable[[RunConfig, Backends], RunOutput]] = {
    "capacity": cmd_capacity,
    "realistic": cmd_realistic,
    "honest120": cmd_honest120,
    "consolidation-ablation": cmd_consolidation_ablation,
    "cost": cmd_cost,
}


def execute(cfg: RunConfig, out: Path) -> int:
    cfg.validate()
    result = RUNNERS[cfg.command](cfg, build_backends(cfg))
    write_outputs(out, cfg, result)
    errors = sum(r.outcome == Outcome.ERROR.value for r in result.records)
    if errors:
        logger.error("%d backend call(s) failed; see records.ldj", errors)
        return EXIT_BACKEND
    return EXIT_OK


def replay(src: Path, out: Path | None) -> int:
    snapshot = src / "config.snapshot"
    if not snapshot.is_file():
        raise ConfigError(f"{snapshot} not found")
    cfg = RunConfig.from_json(snapshot.read_text(encoding="utf-8"))
    if out is None:
        out = Path(tempfile.mkdtemp(prefix="dualmem-replay-"))
    code = execute(cfg, out)
    differ = [name for name in OUTPUT_FILES
              if not (src / name).is_file() or (src / name).read_bytes() != (out / name).read_bytes()]
    for name in differ:
        print(f"differs: {name}")
    print(f"replayed into {out}: {'identical' if not differ else 'MISMATCH'}")
    if code != EXIT_OK:
        return code
    return EXIT_MISMATCH if differ else EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems are configuration errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _ints(text: str) -> list[int]:
    try:
        return [int(x.replace("_", "")) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


_DEFAULTS = {
    "capacity": dict(scales=list(CAPACITY_SCALES), seeds=1, probes=1, archs=["dp", "fc"]),
    "realistic": dict(scales=list(TEN_SCALES), seeds=5, probes=4, archs=["dp", "fc"]),
    "honest120": dict(scales=[], seeds=1, probes=1, archs=["dp", "rag"]),
    "consolidation-ablation": dict(scales=[], seeds=1, probes=1, archs=["dp"]),
    "cost": dict(scales=[100, 500, 1000, 5000, 10000], seeds=0, probes=1, archs=["dp", "fc"]),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dualmem", description="Memory-architecture benchmark runner.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS[:-1]:
        p = sub.add_parser(name)
        p.add_argument("--out", type=Path, required=True, help="results directory")
        p.add_argument("--scales", type=_ints, help="comma-separated message counts")
        p.add_argument("--seeds", type=int, help="number of seeds, counted up from --seed")
        p.add_argument("--seed", type=int, default=0, help="first seed")
        p.add_argument("--probes", type=int, help="probe questions per run")
        p.add_argument("--arch", action="append", choices=["dp", "rag", "fc"],
                       help="architecture (repeatable)")
        p.add_argument("--backend", choices=["scripted", "http"], default="scripted")
        p.add_argument("--cadence", type=int, default=10, help="agent turns between consolidations")
        p.add_argument("--ci-method", choices=["t", "normal"], default="t")
        p.add_argument("--endpoint", help="base URL of an OpenAI-compatible API (http backend)")
        p.add_argument("--model", default=INFERENCE_MODEL)
        p.add_argument("--mini-model", default=CONSOLIDATION_MODEL)
        p.add_argument("--embed-model", default="text-embedding-3-small")
        p.add_argument("--fixtures", help="fixture directory for recorded http responses")
        p.add_argument("--fixture-mode", choices=["live", "record", "replay"], default="live")
        p.add_argument("--embed-dim", type=int, default=0, help="embedding width (0 = command default)")
        if name == "capacity":
            p.add_argument("--placement", action="append", choices=[x.value for x in Placement])
            p.add_argument("--filler", choices=["natural", "exact"], default="exact",
                           help="exact: every filler is 100 tokens; natural: generated chatter")
        if name in ("honest120", "consolidation-ablation"):
            p.add_argument("--total", type=int, default=3000, help="messages per conversation")
        if name == "consolidation-ablation":
            p.add_argument("--drop-fractions", type=_floats, default=[0.0, 0.5],
                           help="fraction of keys each oracle variant drops")
    r = sub.add_parser("replay")
    r.add_argument("results", type=Path, help="results directory holding config.snapshot")
    r.add_argument("--out", type=Path, help="where to regenerate (default: a temporary directory)")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    d = _DEFAULTS[args.command]
    n_seeds = d["seeds"] if args.seeds is None else args.seeds
    cfg = RunConfig(
        command=args.command,
        scales=args.scales if args.scales is not None else list(d["scales"]),
        seeds=list(range(args.seed, args.seed + n_seeds)),
        probes=args.probes if args.probes is not None else d["probes"],
        archs=args.arch or list(d["archs"]),
        backend=args.backend,
        cadence=args.cadence,
        seed=args.seed,
        ci_method=args.ci_method,
        endpoint=args.endpoint,
        model=args.model,
        mini_model=args.mini_model,
        embed_model=args.embed_model,
        fixtures=args.fixtures,
        fixture_mode=args.fixture_mode,
        embed_dim=args.embed_dim,
    )
    if args.command == "capacity":
        cfg.filler = args.filler
        if args.placement:
            cfg.placements = list(args.placement)
    if args.command in ("honest120", "consolidation-ablation"):
        cfg.total = args.total
    if args.command == "consolidation-ablation":
        cfg.drop_fractions = list(args.drop_fractions)
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            return replay(args.results, args.out)
        cfg = config_from_args(args)
        code = execute(cfg, args.out)
        print(f"wrote {', '.join(OUTPUT_FILES)} to {args.out}")
        return code
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
