import pytest
from hypothesis import given, strategies as st

from dualmem.core import Message, Role, count_tokens
from dualmem.full_context import FullHistory, full_context_answer_context


def msg(i, tokens):
    return Message.create(Role.USER if i % 2 == 0 else Role.AGENT, "x" * (4 * tokens), i)


@given(st.lists(st.integers(1, 50), max_size=200), st.integers(50, 400))
def test_truncation_keeps_longest_fitting_suffix(sizes, limit):
    h = FullHistory(truncation_limit=limit)
    seq = [msg(i, t) for i, t in enumerate(sizes)]
    for m in seq:
        h.append_and_truncate(m)
    kept = list(h.messages)
    assert kept == seq[len(seq) - len(kept):]
    assert sum(m.token_count for m in kept) <= limit
    if len(kept) < len(seq):
        # one more message would not have fit
        assert sum(m.token_count for m in seq[len(seq) - len(kept) - 1:]) > limit
    assert h.cumulative_tokens == sum(m.token_count for m in kept)
    assert h.line_token_total == sum(count_tokens(m.line()) for m in kept)
    assert h.dropped + len(kept) == len(seq)


def test_no_truncation_mode():
    h = FullHistory(truncation_limit=None)
    for i in range(50):
        h.append_and_truncate(msg(i, 1000))
    assert len(h) == 50 and h.first_retained_index() == 0


def test_rejections():
    h = FullHistory(truncation_limit=100)
    with pytest.raises(ValueError):
        h.append_and_truncate(Message.create(Role.SYSTEM, "s", 0))
    with pytest.raises(ValueError):
        h.append_and_truncate(msg(1, 1))
    with pytest.raises(ValueError):
        h.append_and_truncate(msg(0, 101))
    with pytest.raises(ValueError):
        FullHistory(truncation_limit=0)


def test_context_overflow_is_reported_not_hidden():
    h = FullHistory(truncation_limit=None, hard_model_limit=500)
    for i in range(20):
        h.append_and_truncate(msg(i, 30))
    ctx = full_context_answer_context(h, "what?")
    assert ctx.total_tokens == sum(count_tokens(p) for p in ctx.parts)
    assert h.overflows(ctx)
    assert len(ctx.episodic_messages) == 20
