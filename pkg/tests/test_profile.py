import pytest
from hypothesis import given, strategies as st

from dualmem.backends import ChatBackendSpec, ScriptedBehavior, ScriptedChatBackend
from dualmem.core import Message, Role
from dualmem.markers import parse_profile, render_fact
from dualmem.profile import (
    EXCHANGE_HEADER,
    EXISTING_HEADER,
    INSTRUCTION_BLOCK,
    OUTPUT_CUE,
    SNAPSHOT_HEADER,
    ConsolidationLog,
    ConsolidationPolicy,
    ConsolidationRequest,
    LLMConsolidator,
    RuleBasedConsolidator,
    SemanticProfile,
    build_consolidation_prompt,
    consolidate,
    profile_growth_series,
    should_consolidate,
)


def m(i, text, role=None):
    return Message.create(role or (Role.USER if i % 2 == 0 else Role.AGENT), text, i)


def test_prompt_layout():
    prior = SemanticProfile.from_text("FACT a=1", 1, 3)
    req = ConsolidationRequest((m(4, "hello"),), prior, (m(5, "FACT a=2"), m(6, "ok")))
    prompt = build_consolidation_prompt(req)
    assert prompt.startswith(INSTRUCTION_BLOCK)
    order = [prompt.index(h) for h in (EXISTING_HEADER, SNAPSHOT_HEADER, EXCHANGE_HEADER, OUTPUT_CUE)]
    assert order == sorted(order)
    assert "most recent value" in prompt


def test_request_validation():
    with pytest.raises(ValueError):
        ConsolidationRequest((), SemanticProfile.empty(), ())
    with pytest.raises(ValueError):  # exchange must be the newest messages
        ConsolidationRequest((m(5, "late"),), SemanticProfile.empty(), (m(2, "early"),))
    with pytest.raises(ValueError):
        ConsolidationRequest((), SemanticProfile.empty(), (m(0, "x"),), prompt_template="summarize")


def test_oracle_temporal_precedence():
    prior = SemanticProfile.from_text("FACT p=0.05\nFACT d=TCGA", 1, 9)
    req = ConsolidationRequest((m(10, "now FACT p=0.01 ok"),), prior, (m(11, "FACT p=0.001 final"),))
    new = consolidate(req, RuleBasedConsolidator())
    assert parse_profile(new.text) == {"p": "0.001", "d": "TCGA"}
    assert new.version == 2 and new.last_consolidated_index == 11


@given(st.lists(st.sampled_from(["0.05", "0.01", "0.001", "0.1"]), min_size=2, max_size=20))
def test_final_value_only(values):
    prior = SemanticProfile.empty()
    for i, v in enumerate(values):
        req = ConsolidationRequest((), prior, (m(i, f"set {render_fact('thr', v)}"),))
        prior = consolidate(req, RuleBasedConsolidator())
    assert parse_profile(prior.text) == {"thr": values[-1]}


def test_llm_consolidator_with_merge_backend():
    backend = ScriptedChatBackend(ScriptedBehavior.MERGE_FACTS)
    req = ConsolidationRequest((m(0, "FACT a=1"),), SemanticProfile.empty(), (m(1, "FACT a=2"),))
    new = consolidate(req, LLMConsolidator(backend))
    assert parse_profile(new.text) == {"a": "2"}


def test_failed_consolidation_keeps_prior_and_reports():
    prior = SemanticProfile.from_text("FACT a=1", 1, 0)
    req = ConsolidationRequest((), prior, (m(1, "FACT a=2"),))
    failures = []
    for backend in (ScriptedChatBackend(ScriptedBehavior.FAIL),
                    ScriptedChatBackend(ScriptedBehavior.FIXED, fixed_response="  ")):
        c = LLMConsolidator(backend)
        out = consolidate(req, c, ConsolidationPolicy(max_retries=2), on_failure=failures.append)
        assert out is prior
        assert len(c.records) == 3
    assert [f.attempts for f in failures] == [3, 3]


def test_oracle_empty_profile_is_not_a_failure():
    failures = []
    req = ConsolidationRequest((), SemanticProfile.empty(), (m(0, "no facts here"),))
    out = consolidate(req, RuleBasedConsolidator(), on_failure=failures.append)
    assert out.text == "" and out.version == 1 and not failures


def test_drop_fraction_forgets_some_new_keys():
    texts = " ".join(render_fact(f"k{i}", "v") for i in range(200))
    req = ConsolidationRequest((), SemanticProfile.empty(), (m(0, texts),))
    kept = parse_profile(RuleBasedConsolidator(0.5).update(req))
    assert 60 < len(kept) < 140
    with pytest.raises(ValueError):
        RuleBasedConsolidator(1.0)


@given(st.integers(1, 30), st.integers(0, 200))
def test_cadence(cadence, ordinal):
    policy = ConsolidationPolicy(cadence=cadence)
    assert should_consolidate(ordinal, policy) == (ordinal >= 1 and ordinal % cadence == 0)
    assert not should_consolidate(None, policy)


def test_policy_validation():
    with pytest.raises(ValueError):
        ConsolidationPolicy(cadence=0)
    with pytest.raises(ValueError):
        ConsolidationPolicy(max_retries=-1)


def test_log_monotonic_and_growth_series():
    log = ConsolidationLog()
    log.record(SemanticProfile.from_text("FACT a=1", 1, 9))
    log.record(SemanticProfile.from_text("FACT a=1\nFACT b=2", 2, 19))
    log.record(SemanticProfile.from_text("ignored duplicate", 2, 19))
    assert profile_growth_series(log) == [(10, 2), (20, 5)]
    with pytest.raises(ValueError):
        log.record(SemanticProfile.from_text("x", 4, 30))
    with pytest.raises(ValueError):
        log.record(SemanticProfile.from_text("x", 3, 5))


def test_profile_record_roundtrip():
    p = SemanticProfile.from_text("FACT a=1", 3, 40)
    assert SemanticProfile.from_record(p.to_record()) == p


def test_soft_limit_warns(caplog):
    req = ConsolidationRequest((), SemanticProfile.empty(), (m(0, "FACT big=" + "x" * 400),))
    consolidate(req, RuleBasedConsolidator(), ConsolidationPolicy(soft_limit_tokens=10))
    assert "soft limit" in caplog.text
