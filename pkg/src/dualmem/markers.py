"""The ``FACT key=value`` marker grammar shared by generators, oracles and scripted models."""

from __future__ import annotations

import re
from typing import Iterable, Iterator

FACT_RE = re.compile(r"\bFACT ([A-Za-z][A-Za-z0-9_]*)=(\S+)")


def render_fact(key: str, value: str) -> str:
    if not re.fullmatch(r"[A-Za-z][A-Za-z0-9_]*", key):
        raise ValueError(f"invalid fact key {key!r}")
    if not value or any(c.isspace() for c in value):
        raise ValueError(f"fact value must be a non-empty token without whitespace: {value!r}")
    return f"FACT {key}={value}"


def iter_facts(text: str) -> Iterator[tuple[str, str]]:
    for m in FACT_RE.finditer(text):
        yield m.group(1), m.group(2)


def merge_facts(texts: Iterable[str], prior: dict[str, str] | None = None) -> dict[str, str]:
    """Merge markers in reading order; a later assignment overwrites an earlier one.

    Insertion order of keys is first-seen order, so the rendered profile is
    stable when a value is overwritten.
    """
    facts = dict(prior or {})
    for text in texts:
        for key, value in iter_facts(text):
            facts[key] = value
    return facts


def render_profile(facts: dict[str, str]) -> str:
    return "\n".join(render_fact(k, v) for k, v in facts.items())


def parse_profile(text: str) -> dict[str, str]:
    return merge_facts([text])


def key_pattern(key: str) -> re.Pattern[str]:
    return re.compile(r"(?<![A-Za-z0-9_])" + re.escape(key) + r"(?![A-Za-z0-9_])")
