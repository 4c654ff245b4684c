import time

import pytest

from conftest import make_item, oracle_judge
from knockout_eval.errors import EndpointRejected, MissingLatentQuality, TransportError
from knockout_eval.judges import (
    Judge,
    JudgeConfig,
    MatchContext,
    OracleBackend,
    RemoteBackend,
    build_backend,
    round_to_half,
)
from knockout_eval.models import TaskKind
from knockout_eval.prompts import TemplateKind, render_prompt


def remote(url, **kw):
    kw.setdefault("sleep", lambda s: None)
    kw.setdefault("api_key", "")
    return RemoteBackend(url, "stub-model", **kw)


@pytest.mark.parametrize("x, expected", [(7.24, 7.0), (7.25, 7.5), (7.74, 7.5), (-0.2, 0.0), (-0.3, -0.5)])
def test_round_to_half(x, expected):
    assert round_to_half(x) == expected


def test_oracle_individual_text():
    item = make_item([7.0])
    backend = OracleBackend()
    text = backend.complete("p", MatchContext(item, item.answers[0], None, TemplateKind.INDIVIDUAL_EXAM_EN))
    assert "Score: 7/10" in text
    assert backend.calls == 1


def test_oracle_bias_first_position_only():
    item = make_item([5.0, 5.0])
    parsed = oracle_judge(bias=1.0).score_pair(item, *item.answers)
    assert parsed.scores == (6.0, 5.0)


def test_oracle_clamps():
    item = make_item([10.5, -1.0])
    judge = oracle_judge()
    assert judge.score_individual(item, item.answers[0]).scores == (10.0,)
    assert judge.score_individual(item, item.answers[1]).scores == (0.0,)


def test_oracle_no_bias_on_individual():
    item = make_item([4.0])
    assert oracle_judge(bias=2.0).score_individual(item, item.answers[0]).scores == (4.0,)


def test_oracle_determinism_and_sensitivity():
    item = make_item([5.0, 6.0])
    a, b = item.answers
    kind = TemplateKind.PAIRWISE_EXAM_EN
    prompt = render_prompt(kind, item, a, b)
    one, two = OracleBackend(sigma=2.0, seed=3), OracleBackend(sigma=2.0, seed=3)
    ctx = MatchContext(item, a, b, kind)
    assert one.complete(prompt, ctx) == two.complete(prompt, ctx)
    draws = {OracleBackend(sigma=2.0, seed=s).scores_for(prompt, ctx) for s in range(20)}
    assert len(draws) > 1


def test_oracle_german_output_uses_comma():
    item = make_item([4.5, 3.0], max_points=6, language="de")
    text = oracle_judge().backend.complete(
        "p", MatchContext(item, *item.answers, TemplateKind.PAIRWISE_EXAM_DE))
    assert "Antwort 1: 4,5/6" in text
    assert oracle_judge().score_pair(item, *item.answers).scores == (4.5, 3.0)


def test_oracle_translation_scale():
    item = make_item([72.5, 40.0], max_points=100, task_kind=TaskKind.TRANSLATION)
    assert oracle_judge().score_pair(item, *item.answers).scores == (72.5, 40.0)


def test_oracle_needs_latent():
    item = make_item([None])
    with pytest.raises(MissingLatentQuality):
        oracle_judge().score_individual(item, item.answers[0])


def test_config_validation():
    with pytest.raises(ValueError):
        JudgeConfig(backend="remote")
    with pytest.raises(ValueError):
        JudgeConfig(backend="bogus")
    with pytest.raises(ValueError):
        JudgeConfig(max_retries=-1)
    assert isinstance(build_backend(JudgeConfig()), OracleBackend)
    assert isinstance(build_backend(JudgeConfig(backend="remote", endpoint_url="http://x/v1")), RemoteBackend)


def test_remote_healthy(stub_llm):
    stub = stub_llm([(200, "Score: 6/10")])
    backend = remote(stub.url)
    assert backend.complete("hello") == "Score: 6/10"
    req = stub.requests[0]
    assert req["path"] == "/v1/chat/completions"
    assert req["body"]["model"] == "stub-model"
    assert req["body"]["messages"] == [{"role": "user", "content": "hello"}]
    assert req["body"]["temperature"] == 0.1


def test_remote_bearer_header(stub_llm, monkeypatch):
    stub = stub_llm([(200, "ok")])
    monkeypatch.setenv("LLM_API_KEY", "sekret")
    RemoteBackend(stub.url, "m").complete("x")
    assert stub.headers[0].get("Authorization") == "Bearer sekret"


def test_remote_500_thrice(stub_llm):
    stub = stub_llm([(500, "boom")])
    waits = []
    backend = remote(stub.url, max_retries=2, sleep=waits.append, backoff_base=1, backoff_cap=1.5)
    with pytest.raises(TransportError):
        backend.complete("x")
    assert len(stub.requests) == 3
    assert waits == [1, 1.5]


def test_remote_429_retried(stub_llm):
    stub = stub_llm([(429, "slow down"), (200, "fine")])
    assert remote(stub.url, max_retries=1).complete("x") == "fine"


def test_remote_slow_once_then_healthy(stub_llm):
    stub = stub_llm([("sleep", 1.0, "late"), (200, "Score: 3/10")])
    backend = remote(stub.url, max_retries=1, timeout=0.3)
    assert backend.complete("x") == "Score: 3/10"
    assert len(stub.requests) == 2


def test_remote_client_error(stub_llm):
    stub = stub_llm([(400, "bad request")])
    with pytest.raises(EndpointRejected) as info:
        remote(stub.url, max_retries=3).complete("x")
    assert info.value.status_code == 400
    assert len(stub.requests) == 1


def test_remote_unreachable():
    backend = remote("http://127.0.0.1:9/v1", max_retries=1, timeout=0.5)
    with pytest.raises(TransportError):
        backend.complete("x")


def test_remote_in_flight_cap(stub_llm):
    from concurrent.futures import ThreadPoolExecutor

    stub = stub_llm([("sleep", 0.1, "Score: 1/10")])
    backend = remote(stub.url, max_in_flight=2)
    start = time.monotonic()
    with ThreadPoolExecutor(max_workers=6) as pool:
        out = list(pool.map(backend.complete, [f"p{k}" for k in range(6)]))
    assert out == ["Score: 1/10"] * 6
    assert stub.max_in_flight <= 2
    assert time.monotonic() - start >= 0.25


def test_judge_through_remote(stub_llm):
    item = make_item([None, None])
    stub = stub_llm([(200, "nonsense"), (200, "Answer 1: 4/10 Answer 2: 7/10")])
    judge = Judge(remote(stub.url), max_parse_retries=1)
    parsed = judge.score_pair(item, *item.answers)
    assert parsed.scores == (4.0, 7.0) and parsed.attempts == 2
    assert "answer text a00" in stub.requests[0]["body"]["messages"][0]["content"]
