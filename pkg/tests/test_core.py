import math

import pytest
from hypothesis import given, strategies as st

from dualmem.core import (
    DEFAULT_PREAMBLE,
    PROFILE_HEADER,
    QUERY_LABEL,
    RETRIEVED_HEADER,
    Message,
    Role,
    SpanCounter,
    TokenCounter,
    build_context,
    check_sequence,
    count_tokens,
    serialize_history,
)

texts = st.text(alphabet=st.characters(codec="utf-8", exclude_categories=("Cs",)), max_size=200)


def test_counter_heuristic_values():
    assert count_tokens("") == 0
    assert count_tokens("abcd") == 1
    assert count_tokens("abcde") == 2
    # whitespace runs collapse to one character
    assert count_tokens("ab  \n\t cd") == count_tokens("ab cd") == 2


@given(texts)
def test_counter_matches_ceiling_of_collapsed_length(text):
    import re
    n = len(re.sub(r"\s+", " ", text))
    assert count_tokens(text) == (math.ceil(n / 4) if text else 0)


@given(texts, texts)
def test_counter_subadditive_within_one(a, b):
    c = count_tokens(a + b)
    assert c <= count_tokens(a) + count_tokens(b)


def test_external_counter_and_equality():
    ext = TokenCounter(external=lambda s: len(s.split()))
    assert ext("one two three") == 3
    assert ext.mode == "external"
    assert TokenCounter() == TokenCounter()
    assert TokenCounter(divisor=3) != TokenCounter()
    with pytest.raises(ValueError):
        TokenCounter(divisor=0)


@given(texts, st.data())
def test_span_counter_agrees_with_direct_count(text, data):
    sc = SpanCounter(text)
    a = data.draw(st.integers(0, len(text)))
    b = data.draw(st.integers(a, len(text)))
    assert sc.count(a, b) == count_tokens(text[a:b])


def test_span_counter_rejects_external():
    with pytest.raises(ValueError):
        SpanCounter("x", TokenCounter(external=len))


def test_message_roundtrip_and_validation():
    m = Message.create("user", "hello there", 3)
    assert m.role is Role.USER and m.token_count == 3
    assert m.line() == "USER: hello there"
    assert Message.from_record(m.to_record()) == m
    with pytest.raises(ValueError):
        Message.create(Role.AGENT, "x", -1)
    with pytest.raises(ValueError):
        Message.create("robot", "x", 0)


def test_check_sequence():
    msgs = [Message.create(Role.USER, "a", i) for i in range(3)]
    check_sequence(msgs)
    with pytest.raises(ValueError):
        check_sequence(msgs[1:])


def test_build_context_part_order_and_total():
    msgs = [Message.create(Role.USER, "first", 0), Message.create(Role.AGENT, "second", 1)]
    ctx = build_context("what now?", profile_text="FACT a=1", messages=msgs, chunks=["chunk one"])
    assert ctx.parts[0] == DEFAULT_PREAMBLE
    assert ctx.parts[1] == f"{PROFILE_HEADER}\nFACT a=1"
    assert ctx.parts[2] == RETRIEVED_HEADER
    assert ctx.parts[3] == "chunk one"
    assert ctx.parts[4:6] == ("USER: first", "AGENT: second")
    assert ctx.parts[-1] == f"{QUERY_LABEL} what now?"
    assert ctx.total_tokens == sum(count_tokens(p) for p in ctx.parts)
    assert ctx.body() == "\n".join(ctx.parts[1:])
    assert ctx.render().startswith(DEFAULT_PREAMBLE)


def test_build_context_rejects_empty_query():
    with pytest.raises(ValueError):
        build_context("   ")


def test_precomputed_line_tokens_are_used():
    msgs = [Message.create(Role.USER, "x" * 40, 0)]
    ctx = build_context("q", preamble="", messages=msgs, line_tokens=[999])
    assert ctx.total_tokens == 999 + count_tokens("QUERY: q")


def test_serialize_history():
    msgs = [Message.create(Role.USER, "a", 0), Message.create(Role.AGENT, "b", 1)]
    assert serialize_history(msgs) == "USER: a\nAGENT: b"
