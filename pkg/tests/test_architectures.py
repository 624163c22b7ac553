import pytest

from dualmem.architectures import Architecture, DualProcessMemory, FullContextMemory, RagMemory
from dualmem.backends import ScriptedEmbedder, ScriptedChatBackend, chat_complete
from dualmem.core import Message, Role
from dualmem.full_context import FullHistory
from dualmem.markers import merge_facts, parse_profile
from dualmem.profile import ConsolidationPolicy
from dualmem.simulation import WorkloadSpec, baseline_scenario, generate_realistic_run


def feed(mem, msgs):
    for m in msgs:
        mem.observe(m)
    return mem


def test_architecture_names():
    assert Architecture.from_short("dp") is Architecture.DUAL_PROCESS
    assert Architecture.from_short("full_context").short == "fc"
    with pytest.raises(ValueError):
        Architecture.from_short("lstm")


def test_cadence_counts_agent_turns():
    mem = feed(DualProcessMemory(policy=ConsolidationPolicy(cadence=3)), baseline_scenario()[:12])
    # agent turns at odd indices; the 3rd and 6th fall on messages 5 and 11
    assert [p.last_consolidated_index for p in mem.log.versions[1:]] == [5, 11]


def test_no_fact_falls_between_cadence_points():
    # cadence 10 spans 20 messages but the window holds only 10
    msgs = generate_realistic_run(WorkloadSpec(total_messages=2000, seed=3)).messages
    mem = feed(DualProcessMemory(), msgs)
    mem.flush()
    assert parse_profile(mem.profile.text) == merge_facts(m.text for m in msgs)


def test_background_consolidation_matches_synchronous():
    msgs = generate_realistic_run(WorkloadSpec(total_messages=1500, seed=2)).messages
    sync = feed(DualProcessMemory(), msgs)
    sync.flush()
    bg = feed(DualProcessMemory(background=True), msgs)
    bg.flush()
    bg.close()
    assert bg.log.versions == sync.log.versions


def test_dual_process_context_is_small_and_answers():
    msgs = baseline_scenario()
    mem = feed(DualProcessMemory(), msgs)
    mem.flush()
    ctx = mem.context_for("What is the current p_threshold?")
    assert len(ctx.episodic_messages) == 10
    assert ctx.total_tokens < 400
    assert chat_complete(ScriptedChatBackend(), ctx).text == "0.001"


def test_consolidation_calls_accounted():
    mem = feed(DualProcessMemory(account_calls=True), baseline_scenario())
    mem.flush()
    assert len(mem.calls) == len(mem.log.versions) - 1
    assert all(c.input_tokens > c.output_tokens for c in mem.calls)


def test_rag_reindexes_lazily_and_rejects_gaps():
    mem = RagMemory(ScriptedEmbedder(128))
    feed(mem, baseline_scenario()[:40])
    n = len(mem.index)
    mem.observe(Message.create(Role.USER, "one more " * 400, 40))
    assert len(mem.index) > n
    with pytest.raises(ValueError):
        mem.observe(Message.create(Role.USER, "gap", 99))
    ctx = mem.context_for("Recall the dataset please.")
    assert len(mem.last_retrieved) == min(5, len(mem.index)) and ctx.retrieved_chunks


def test_full_context_answers_from_history():
    msgs = baseline_scenario()
    mem = feed(FullContextMemory(FullHistory()), msgs)
    ctx = mem.context_for("What was the initial hypothesis at the outset?")
    assert len(ctx.episodic_messages) == len(msgs)
    assert chat_complete(ScriptedChatBackend(), ctx).text == "FAP+_CAFs_drive_chemoresistance"
