import pytest
from hypothesis import given, strategies as st

from dualmem.markers import iter_facts, key_pattern, merge_facts, parse_profile, render_fact, render_profile

keys = st.from_regex(r"[A-Za-z][A-Za-z0-9_]{0,12}", fullmatch=True)
values = st.from_regex(r"[A-Za-z0-9.+\-_,]{1,12}", fullmatch=True)


@given(st.dictionaries(keys, values, max_size=12))
def test_profile_render_parse_roundtrip(facts):
    assert parse_profile(render_profile(facts)) == facts


@given(keys, st.lists(values, min_size=1, max_size=6))
def test_later_assignment_wins(key, vals):
    texts = [f"we set {render_fact(key, v)} today" for v in vals]
    assert merge_facts(texts) == {key: vals[-1]}


def test_render_fact_validates():
    with pytest.raises(ValueError):
        render_fact("1bad", "x")
    with pytest.raises(ValueError):
        render_fact("ok", "two words")
    with pytest.raises(ValueError):
        render_fact("ok", "")


def test_iter_facts_in_prose():
    text = "Noted: FACT p_threshold=0.01 and also FACT fold_change=2.0."
    assert list(iter_facts(text)) == [("p_threshold", "0.01"), ("fold_change", "2.0.")]


def test_key_pattern_respects_word_edges():
    pat = key_pattern("palette")
    assert pat.search("what is the palette?")
    assert not pat.search("plot_palette_3")
