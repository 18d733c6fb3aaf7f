import json
import logging

import httpx
import pytest

from gustvqa.judge import (
    JudgeClient,
    JudgeConfig,
    JudgeError,
    JudgeParseError,
    RateLimiter,
    load_prompt,
    parse_scores,
    render_prompt,
)

from mock_judge import MockJudgeServer

GOOD = "### Score 1: 4 ### Score 2: 5 ### Score 3: 4"


@pytest.fixture(autouse=True)
def api_key(monkeypatch):
    monkeypatch.setenv("JUDGE_TEST_KEY", "sk-secret-123")


def cfg(url="http://judge.invalid/v1", **kw):
    base = dict(endpoint=url, model="m", api_key_env="JUDGE_TEST_KEY", max_retries=3, requests_per_minute=6000, backoff_base_s=0.0)
    base.update(kw)
    return JudgeConfig(**base)


def test_parse_scores():
    assert parse_scores(GOOD) == (4, 5, 4)
    assert parse_scores("Score 1: 3\nScore 2: **2**\nScore 3: 1.5") == (3, 2, 1.5)
    with pytest.raises(JudgeParseError, match="Score 2"):
        parse_scores("### Score 1: 4 ### Score 3: 4")
    with pytest.raises(JudgeParseError, match="outside"):
        parse_scores("Score 1: 9 Score 2: 1 Score 3: 1")


def test_render_prompt_fills_once():
    t = load_prompt()
    out = render_prompt(t, "Q?", "gold {gpt_ans}", "pred")
    assert "Q?" in out and "gold {gpt_ans}" in out and "pred" in out
    assert "{question}" not in out and out.count("{gpt_ans}") == 1
    assert "Please act as an impartial judge" in out
    with pytest.raises(ValueError):
        render_prompt("no placeholders", "a", "b", "c")


def test_rate_limiter_spacing():
    now = [0.0]
    slept = []

    def sleep(s):
        slept.append(s)
        now[0] += s

    rl = RateLimiter(60, clock=lambda: now[0], sleep=sleep)
    for _ in range(3):
        rl.acquire()
    assert slept == [1.0, 1.0]


def test_config_validation_and_secret_hygiene(tmp_path):
    with pytest.raises(ValueError):
        JudgeConfig(endpoint="x", requests_per_minute=0)
    p = tmp_path / "j.json"
    p.write_text(json.dumps({"endpoint": "http://x", "bogus": 1}))
    with pytest.raises(ValueError, match="bogus"):
        JudgeConfig.from_file(p)
    c = cfg()
    assert "sk-secret" not in repr(c)


def test_missing_key(monkeypatch):
    monkeypatch.delenv("JUDGE_TEST_KEY")
    with pytest.raises(JudgeError, match="JUDGE_TEST_KEY"):
        JudgeClient(cfg())


def test_against_local_server_and_key_never_logged(caplog):
    caplog.set_level(logging.DEBUG)
    with MockJudgeServer(lambda prompt: (200, GOOD)) as srv, JudgeClient(cfg(srv.url)) as client:
        out = client.judge("What?", "gold answer", "model answer")
    assert out.scores == (4, 5, 4) and out.error is None and out.retries == 0
    body = srv.requests[0]
    assert body["model"] == "m" and body["temperature"] == 0 and len(body["messages"]) == 1
    assert srv.headers[0]["Authorization"] == "Bearer sk-secret-123"
    assert "sk-secret" not in caplog.text


def _transport(responses, calls):
    def handler(request):
        calls.append(request)
        r = responses.pop(0)
        if isinstance(r, Exception):
            raise r
        return r

    return httpx.MockTransport(handler)


def ok(content):
    return httpx.Response(200, json={"choices": [{"message": {"content": content}}]})


def test_two_timeouts_then_success(caplog):
    calls, sleeps = [], []
    responses = [httpx.ReadTimeout("t1"), httpx.ReadTimeout("t2"), ok(GOOD)]
    client = JudgeClient(cfg(backoff_base_s=0.5), http=httpx.Client(transport=_transport(responses, calls)), sleep=sleeps.append)
    with caplog.at_level(logging.WARNING):
        out = client.judge("q", "g", "p")
    assert out.scores == (4, 5, 4) and out.retries == 2
    # the rate limiter shares the sleep hook; its waits are ~0.01s at 6000 rpm
    assert len(calls) == 3 and [s for s in sleeps if s >= 0.1] == [0.5, 1.0]
    assert caplog.text.count("retry") == 2


def test_retries_exhausted_recorded():
    calls = []
    responses = [httpx.Response(503)] * 4
    client = JudgeClient(cfg(max_retries=3), http=httpx.Client(transport=_transport(responses, calls)), sleep=lambda s: None)
    out = client.judge("q", "g", "p")
    assert out.scores is None and out.error.startswith("transport") and out.retries == 3 and len(calls) == 4


def test_client_error_not_retried():
    calls = []
    client = JudgeClient(cfg(), http=httpx.Client(transport=_transport([httpx.Response(401)], calls)), sleep=lambda s: None)
    out = client.judge("q", "g", "p")
    assert out.error and len(calls) == 1


def test_malformed_body_recorded():
    calls = []
    client = JudgeClient(cfg(), http=httpx.Client(transport=_transport([httpx.Response(200, json={"nope": 1})], calls)))
    out = client.judge("q", "g", "p")
    assert out.error.startswith("parse")


def test_batch_keeps_order_and_isolates_failures():
    def responder(prompt):
        if "BAD" in prompt:
            return 200, "I refuse to score."
        if "BROKEN" in prompt:
            return 200, b"{not json"
        return 200, GOOD

    items = [("q", "g", "fine"), ("q", "g", "BAD"), ("q", "g", "BROKEN"), ("q", "g", "fine")]
    with MockJudgeServer(responder) as srv, JudgeClient(cfg(srv.url, max_concurrency=3)) as client:
        outs = client.judge_batch(items)
    assert [o.scores for o in outs] == [(4, 5, 4), None, None, (4, 5, 4)]
    assert "Score 1" in outs[1].error and outs[2].error.startswith("parse")
