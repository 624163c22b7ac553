import json

import httpx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from dualmem.backends import (
    UNKNOWN,
    BackendError,
    BackendKind,
    ChatBackendSpec,
    FixtureStore,
    HttpChatBackend,
    HttpEmbedder,
    JudgeParseError,
    Outcome,
    ScriptedBehavior,
    ScriptedChatBackend,
    ScriptedEmbedder,
    backend_description,
    build_judge_prompt,
    chat_complete,
    echo_answer,
    judge_score,
    parse_judge_score,
)
from dualmem.core import build_context

CTX = "FACT p=0.05 early\nchatter\nFACT p=0.01 mid\nFACT q=x\nFACT p=0.001 late\n"


@pytest.mark.parametrize("query,answer", [
    ("QUERY: What is the current p?", "0.001"),
    ("QUERY: What was the initial p at the outset?", "0.05"),
    ("QUERY: In what order was p revised?", "0.05 -> 0.01 -> 0.001"),
    ("QUERY: Combine q with the current p.", "x; 0.001"),
    ("QUERY: What is the current z?", UNKNOWN),
])
def test_echo_answers(query, answer):
    assert echo_answer(CTX + query) == answer


def test_echo_ignores_markers_inside_the_query():
    assert echo_answer("no facts\nQUERY: is FACT p=9 the current p?") == UNKNOWN


def test_scripted_latency_and_overflow():
    b = ScriptedChatBackend(spec=ChatBackendSpec(hard_limit=100))
    ok = b.complete(CTX + "QUERY: current p?", input_tokens=50)
    assert ok.record.outcome is Outcome.OK
    assert ok.record.wall_latency_ms == pytest.approx(586 + 0.0785 * 50)
    over = b.complete("x", input_tokens=101)
    assert over.record.outcome is Outcome.OVERFLOW and over.text == ""


def test_scripted_fail_and_fixed():
    assert ScriptedChatBackend(ScriptedBehavior.FAIL).complete("x").record.outcome is Outcome.ERROR
    assert ScriptedChatBackend(ScriptedBehavior.FIXED, fixed_response="hi").complete("x").text == "hi"


def test_chat_complete_sends_preamble_as_system():
    seen = {}

    class Spy(ScriptedChatBackend):
        def complete(self, prompt, *, system="", input_tokens=None, temperature=None):
            seen.update(prompt=prompt, system=system, tokens=input_tokens)
            return super().complete(prompt, system=system, input_tokens=input_tokens)

    ctx = build_context("what?", profile_text="FACT a=1")
    chat_complete(Spy(), ctx)
    assert seen["system"] == ctx.system_preamble
    assert seen["tokens"] == ctx.total_tokens
    assert not seen["prompt"].startswith(ctx.system_preamble)


def test_spec_validation():
    with pytest.raises(ValueError):
        ChatBackendSpec(temperature=3.0)
    with pytest.raises(ValueError):
        ChatBackendSpec(kind=BackendKind.HTTP)


def _http(handler, **kw):
    spec = ChatBackendSpec(kind=BackendKind.HTTP, model="m", endpoint="http://api.test/v1")
    client = httpx.Client(transport=httpx.MockTransport(handler))
    return HttpChatBackend(spec, client=client, sleep=lambda s: None, **kw)


def _ok(text="hello", usage=True):
    body = {"choices": [{"message": {"content": text}}]}
    if usage:
        body["usage"] = {"prompt_tokens": 11, "completion_tokens": 2}
    return httpx.Response(200, json=body)


def test_http_request_shape_and_usage(monkeypatch):
    monkeypatch.setenv("DUALMEM_API_KEY", "sk-test")
    captured = {}

    def handler(req):
        captured["url"] = str(req.url)
        captured["auth"] = req.headers.get("authorization")
        captured["body"] = json.loads(req.content)
        return _ok()

    res = _http(handler).complete("prompt", system="sys", temperature=0.0)
    assert captured["url"] == "http://api.test/v1/chat/completions"
    assert captured["auth"] == "Bearer sk-test"
    assert captured["body"]["messages"][0] == {"role": "system", "content": "sys"}
    assert captured["body"]["temperature"] == 0.0
    assert res.text == "hello" and res.record.input_tokens == 11 and res.record.output_tokens == 2


def test_http_retries_then_succeeds():
    calls = []

    def handler(req):
        calls.append(1)
        return httpx.Response(503) if len(calls) < 3 else _ok()

    assert _http(handler).complete("p").record.outcome is Outcome.OK
    assert len(calls) == 3


def test_http_exhausted_retries_is_error_outcome():
    res = _http(lambda req: httpx.Response(429), retries=1).complete("p")
    assert res.record.outcome is Outcome.ERROR


def test_http_context_length_is_overflow():
    res = _http(lambda req: httpx.Response(400, json={"error": {"code": "context_length_exceeded"}})).complete("p")
    assert res.record.outcome is Outcome.OVERFLOW


def test_http_local_limit_short_circuits():
    res = _http(lambda req: pytest.fail("no request expected")).complete("p", input_tokens=200_000)
    assert res.record.outcome is Outcome.OVERFLOW


def test_http_malformed_payload_is_error():
    res = _http(lambda req: httpx.Response(200, json={"nope": 1})).complete("p")
    assert res.record.outcome is Outcome.ERROR


def test_fixture_record_then_replay(tmp_path):
    rec = _http(lambda req: _ok("recorded"), fixtures=FixtureStore(tmp_path, "record"))
    assert rec.complete("p").text == "recorded"
    rep = _http(lambda req: pytest.fail("replay must not hit the network"),
                fixtures=FixtureStore(tmp_path, "replay"))
    assert rep.complete("p").text == "recorded"
    missing = rep.complete("other prompt")
    assert missing.record.outcome is Outcome.ERROR
    with pytest.raises(ValueError):
        FixtureStore(tmp_path, "sometimes")


def test_http_embedder():
    def handler(req):
        return httpx.Response(200, json={"data": [{"embedding": [3.0, 4.0]}]})

    client = httpx.Client(transport=httpx.MockTransport(handler))
    emb = HttpEmbedder("http://api.test", "e", 2, client=client)
    assert np.allclose(emb.embed("x"), [0.6, 0.8])
    with pytest.raises(BackendError):
        HttpEmbedder("http://api.test", "e", 3, client=client).embed("x")


@given(st.text(min_size=1, max_size=80))
def test_scripted_embedding_is_deterministic_unit(text):
    a, b = ScriptedEmbedder(64).embed(text), ScriptedEmbedder(64).embed(text)
    assert np.array_equal(a, b)
    assert np.linalg.norm(a) == pytest.approx(1.0)


def test_unrelated_texts_are_not_close():
    rng = np.random.default_rng(7)
    vocab = [f"w{i}" for i in range(5000)]
    emb = ScriptedEmbedder(64)
    worst = 0.0
    for _ in range(300):
        a = " ".join(rng.choice(vocab, 4))
        b = " ".join(rng.choice(vocab, 4))
        if set(a.split()) & set(b.split()):
            continue
        worst = max(worst, float(emb.embed(a) @ emb.embed(b)))
    assert worst < 0.5


def test_shared_tokens_raise_similarity():
    emb = ScriptedEmbedder(4096)
    q = emb.embed("what is the current palette")
    assert q @ emb.embed("we chose palette viridis") > q @ emb.embed("ran leiden clustering twice")


@pytest.mark.parametrize("text,score", [("Score: 7", 7.0), ("score=9.5 overall", 9.5), ("8/10", 8.0), ("3", 3.0)])
def test_parse_judge_score(text, score):
    assert parse_judge_score(text) == score


@pytest.mark.parametrize("text", ["great answer", "Score: 11"])
def test_parse_judge_score_rejects(text):
    with pytest.raises(JudgeParseError):
        parse_judge_score(text)


def test_scripted_judge():
    judge = ScriptedChatBackend(ScriptedBehavior.JUDGE)
    assert judge_score(judge, "q", "0.001", "0.001") == 10
    assert judge_score(judge, "q", "0.001", "it is 0.001 now") == 7
    assert judge_score(judge, "q", "0.001", "0.05") == 2
    assert "RUBRIC" in build_judge_prompt("q", "t", "a")


def test_backend_description():
    d = backend_description(ScriptedChatBackend())
    assert d["kind"] == "scripted" and d["class"] == "ScriptedChatBackend"
