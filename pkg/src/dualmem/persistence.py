"""Line-delimited storage with provenance headers and content hashes.

Every file is ``{kind}/{spec_hash}/{seed}.ldj`` under a store root. The
first line is a header object carrying the kind, provenance, record count
and the sha256 of the record lines. Writes go to a temporary file that is
renamed into place, so readers see either the old file or the new one.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from dualmem.backends import FixtureStore
from dualmem.core import Message, check_sequence
from dualmem.evaluation import BenchmarkRecord
from dualmem.profile import ConsolidationLog, SemanticProfile
from dualmem.simulation import QueryCase
from dualmem.vector import Chunk, ChunkIndex

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
KINDS = ("conversations", "profiles", "indices", "fixtures", "results", "queries")
_HEADER_FIELDS = {"record", "kind", "format_version", "provenance", "count", "content_sha256"}


class CorruptionError(ValueError):
    """Stored content does not match its embedded hash or structure."""


def _dump(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_ldj(kind: str, records: Iterable[dict], provenance: dict | None = None) -> str:
    lines = [_dump(r) for r in records]
    body = "\n".join(lines)
    header = {
        "record": "header",
        "kind": kind,
        "format_version": FORMAT_VERSION,
        "provenance": provenance or {},
        "count": len(lines),
        "content_sha256": hashlib.sha256(body.encode()).hexdigest(),
    }
    return _dump(header) + "\n" + (body + "\n" if lines else "")


def decode_ldj(text: str, kind: str | None = None) -> tuple[dict, list[dict]]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise CorruptionError("empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise CorruptionError(f"unreadable header: {exc}") from exc
    if header.get("record") != "header":
        raise CorruptionError("missing header line")
    if kind is not None and header.get("kind") != kind:
        raise CorruptionError(f"expected kind {kind!r}, found {header.get('kind')!r}")
    extra = set(header) - _HEADER_FIELDS
    if extra:
        logger.warning("ignoring unknown header fields %s", sorted(extra))
    body = "\n".join(lines[1:])
    if hashlib.sha256(body.encode()).hexdigest() != header.get("content_sha256"):
        raise CorruptionError("content hash mismatch")
    if len(lines) - 1 != header.get("count"):
        raise CorruptionError("record count mismatch")
    try:
        records = [json.loads(line) for line in lines[1:]]
    except json.JSONDecodeError as exc:
        raise CorruptionError(f"unreadable record: {exc}") from exc
    return header, records


def _warn_unknown(records: Sequence[dict], known: set[str], what: str) -> None:
    extra = set().union(*(r.keys() for r in records)) - known if records else set()
    if extra:
        logger.warning("ignoring unknown %s fields %s", what, sorted(extra))


class Store:
    """File layout rooted at ``root``: one sub-store per object kind."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def path(self, kind: str, spec_hash: str, seed: int | str) -> Path:
        if kind not in KINDS:
            raise ValueError(f"unknown store kind {kind!r}")
        return self.root / kind / spec_hash / f"{seed}.ldj"

    def write(self, kind: str, spec_hash: str, seed: int | str, records: Iterable[dict],
              extra_provenance: dict | None = None) -> Path:
        provenance = {"spec_hash": spec_hash, "seed": seed, **(extra_provenance or {})}
        path = self.path(kind, spec_hash, seed)
        atomic_write_text(path, encode_ldj(kind, records, provenance))
        return path

    def read(self, kind: str, spec_hash: str, seed: int | str) -> tuple[dict, list[dict]]:
        path = self.path(kind, spec_hash, seed)
        return decode_ldj(path.read_text(encoding="utf-8"), kind)

    def fixtures(self, mode: str = "replay") -> FixtureStore:
        return FixtureStore(self.root / "fixtures", mode)

    # typed helpers

    def save_conversation(self, messages: Sequence[Message], spec_hash: str, seed: int) -> Path:
        return self.write("conversations", spec_hash, seed, (m.to_record() for m in messages))

    def load_conversation(self, spec_hash: str, seed: int) -> list[Message]:
        _, recs = self.read("conversations", spec_hash, seed)
        _warn_unknown(recs, {"index", "role", "text", "token_count"}, "message")
        messages = [Message.from_record(r) for r in recs]
        check_sequence(messages)
        return messages

    def save_profiles(self, log: ConsolidationLog, spec_hash: str, seed: int) -> Path:
        return self.write("profiles", spec_hash, seed, (p.to_record() for p in log.versions))

    def load_profiles(self, spec_hash: str, seed: int) -> ConsolidationLog:
        _, recs = self.read("profiles", spec_hash, seed)
        _warn_unknown(recs, {"version", "last_consolidated_index", "token_count", "text"}, "profile")
        versions = [SemanticProfile.from_record(r) for r in recs]
        log = ConsolidationLog(versions[:1] or [SemanticProfile.empty()])
        for p in versions[1:]:
            log.record(p)
        return log

    def save_index(self, index: ChunkIndex, spec_hash: str, seed: int) -> Path:
        vectors = index.vectors
        recs = (
            {
                "id": c.id,
                "span": list(c.source_span),
                "text": c.text,
                "token_count": c.token_count,
                "start": c.start,
                "end": c.end,
                "d": index.dim,
                "vector": [float(x) for x in vectors[row]],
            }
            for row, c in enumerate(index.chunks)
        )
        return self.write("indices", spec_hash, seed, recs, {"dim": index.dim})

    def load_index(self, spec_hash: str, seed: int) -> ChunkIndex:
        header, recs = self.read("indices", spec_hash, seed)
        _warn_unknown(recs, {"id", "span", "text", "token_count", "start", "end", "d", "vector"},
                      "chunk")
        dim = int(header["provenance"]["dim"])
        if any(int(r["d"]) != dim for r in recs):
            raise CorruptionError("chunk dimension disagrees with the index header")
        chunks = [Chunk(int(r["id"]), r["text"], (int(r["span"][0]), int(r["span"][1])),
                        int(r["token_count"]), int(r["start"]), int(r["end"])) for r in recs]
        matrix = np.array([r["vector"] for r in recs], dtype=float).reshape(len(recs), dim)
        return ChunkIndex.from_unit_vectors(dim, chunks, matrix)

    def save_records(self, records: Sequence[BenchmarkRecord], spec_hash: str, seed: int | str) -> Path:
        return self.write("results", spec_hash, seed, (r.to_record() for r in records))

    def load_records(self, spec_hash: str, seed: int | str) -> list[BenchmarkRecord]:
        _, recs = self.read("results", spec_hash, seed)
        _warn_unknown(recs, set(BenchmarkRecord.__dataclass_fields__), "benchmark record")
        return [BenchmarkRecord.from_record(r) for r in recs]

    def save_cases(self, cases: Sequence[QueryCase], spec_hash: str, seed: int) -> Path:
        return self.write("queries", spec_hash, seed, (c.to_record() for c in cases))

    def load_cases(self, spec_hash: str, seed: int) -> list[QueryCase]:
        _, recs = self.read("queries", spec_hash, seed)
        return [QueryCase.from_record(r) for r in recs]


def write_records_file(path: Path, records: Sequence[BenchmarkRecord], provenance: dict) -> None:
    atomic_write_text(path, encode_ldj("results", (r.to_record() for r in records), provenance))


def read_records_file(path: Path) -> tuple[dict, list[BenchmarkRecord]]:
    header, recs = decode_ldj(path.read_text(encoding="utf-8"), "results")
    _warn_unknown(recs, set(BenchmarkRecord.__dataclass_fields__), "benchmark record")
    return header, [BenchmarkRecord.from_record(r) for r in recs]
