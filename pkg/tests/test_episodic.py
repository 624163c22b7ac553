import threading

import pytest
from hypothesis import given, strategies as st

from dualmem.core import Message, Role
from dualmem.episodic import EpisodicBuffer


def msgs(n, start=0):
    return [Message.create(Role.USER if i % 2 == 0 else Role.AGENT, f"turn {i} " * (i % 5 + 1), i)
            for i in range(start, start + n)]


@given(st.integers(1, 60), st.integers(0, 300))
def test_window_is_suffix(capacity, n):
    buf = EpisodicBuffer(capacity)
    seq = msgs(n)
    for m in seq:
        buf.append(m)
    assert buf.window() == tuple(seq[-capacity:]) if n else buf.window() == ()
    assert len(buf) == min(n, capacity)
    assert buf.total_appended == n


@given(st.integers(1, 20), st.integers(0, 100))
def test_footprint_bounded_by_capacity(capacity, n):
    buf = EpisodicBuffer(capacity)
    for m in msgs(n):
        buf.append(m)
    longest = max((m.token_count for m in msgs(n)), default=0)
    assert buf.token_footprint() <= capacity * longest


def test_rejects_system_and_out_of_order():
    buf = EpisodicBuffer(3)
    with pytest.raises(ValueError):
        buf.append(Message.create(Role.SYSTEM, "sys", 0))
    with pytest.raises(ValueError):
        buf.append(Message.create(Role.USER, "skip", 1))
    buf.append(Message.create(Role.USER, "ok", 0))
    with pytest.raises(ValueError):
        buf.append(Message.create(Role.USER, "dup", 0))


def test_capacity_validation():
    for bad in (0, -3):
        with pytest.raises(ValueError):
            EpisodicBuffer(bad)


def test_window_snapshot_is_stable():
    buf = EpisodicBuffer(2)
    seq = msgs(4)
    buf.append(seq[0]).append(seq[1])
    snap = buf.window()
    buf.append(seq[2])
    assert snap == (seq[0], seq[1])
    assert buf.window() == (seq[1], seq[2])


def test_concurrent_readers_see_whole_windows():
    buf = EpisodicBuffer(10)
    seq = msgs(5000)
    bad = []

    def reader():
        for _ in range(2000):
            w = buf.window()
            idx = [m.index for m in w]
            if idx and idx != list(range(idx[0], idx[0] + len(idx))):
                bad.append(idx)

    t = threading.Thread(target=reader)
    t.start()
    for m in seq:
        buf.append(m)
    t.join()
    assert not bad
