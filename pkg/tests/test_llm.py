import json

import httpx
import pytest
from hypothesis import given, strategies as st

from bumpfix.errors import AuthMissing, CassetteMiss, ConfigInvalid, InputTooLarge, NoCodeBlock, ProviderError
from bumpfix.llm import (
    CassetteStore,
    CompletionRecord,
    LLMClient,
    Mode,
    ModelSpec,
    RateLimiter,
    estimate_tokens,
    extract_code_block,
    load_providers,
    prompt_hash,
    split_repair_strategy,
)

from .conftest import ROOT

MODEL = ModelSpec("openai", "o3-mini", "https://api.example.invalid/v1/chat/completions", "TEST_KEY", 1000, 1000, None)
ENV = {"TEST_KEY": "k"}


def reply(content, status=200):
    return httpx.Response(status, json={"choices": [{"message": {"content": content}}], "usage": {"total_tokens": 3}})


def scripted(*responses):
    seen = []
    queue = list(responses)

    def handler(request):
        seen.append(request)
        item = queue.pop(0)
        if isinstance(item, Exception):
            raise item
        return item

    return httpx.MockTransport(handler), seen


def test_table5_limits():
    specs = load_providers(ROOT / "providers.json")
    limits = {name: (s.provider_id, s.input_token_limit, s.output_token_limit) for name, s in specs.items()}
    assert limits == {
        "gemini-2.0-flash": ("google", 1_048_576, 8_192),
        "gpt-4o-mini": ("openai", 128_000, 16_000),
        "o3-mini": ("openai", 200_000, 100_000),
        "deepseek/deepseek-chat": ("openrouter", 131_000, 131_000),
        "qwen/qwen2.5-32b-instruct": ("openrouter", 131_000, 131_000),
    }


def test_providers_reject_unknown_fields(tmp_path):
    p = tmp_path / "p.json"
    p.write_text(json.dumps([{"provider_id": "x", "model_name": "m", "bogus": 1}]))
    with pytest.raises(ConfigInvalid):
        load_providers(p)
    p.write_text(json.dumps({"models": [{"provider_id": "x"}]}))
    with pytest.raises(ConfigInvalid):
        load_providers(p)


def test_record_then_replay(tmp_path):
    transport, seen = scripted(reply("```java\nclass A {}\n```"))
    store = CassetteStore(tmp_path)
    live = LLMClient(Mode.RECORD, store, transport=transport, env=ENV)
    assert live.complete(MODEL, "fix it") == "```java\nclass A {}\n```"
    body = json.loads(seen[0].content)
    assert body["model"] == "o3-mini" and "temperature" not in body
    assert seen[0].headers["authorization"] == "Bearer k"

    rec = store.get("openai", prompt_hash("o3-mini", "fix it"))
    assert rec.extracted_code == "class A {}"
    assert rec.token_counts == {"total_tokens": 3}

    def explode(request):
        raise AssertionError("network used during replay")

    replay = LLMClient(Mode.REPLAY, store, transport=httpx.MockTransport(explode), env={})
    assert replay.complete(MODEL, "fix it") == "```java\nclass A {}\n```"
    with pytest.raises(CassetteMiss):
        replay.complete(MODEL, "something else")


def test_temperature_sent_when_set(tmp_path):
    transport, seen = scripted(reply("x"))
    spec = ModelSpec("g", "gpt-4o-mini", "https://e.invalid", "TEST_KEY", 100, 100, 0.0)
    LLMClient(Mode.LIVE, transport=transport, env=ENV).complete(spec, "p")
    assert json.loads(seen[0].content)["temperature"] == 0.0


def test_retries_then_success():
    transport, seen = scripted(httpx.Response(429), httpx.ConnectError("down"), reply("ok"))
    sleeps = []
    client = LLMClient(Mode.LIVE, transport=transport, env=ENV, sleep=sleeps.append, backoff=0.5)
    assert client.complete(MODEL, "p") == "ok"
    assert len(seen) == 3
    assert sleeps == [0.5, 1.0]


def test_retries_exhausted_and_client_errors():
    transport, _ = scripted(*[httpx.Response(503, text="busy")] * 3)
    client = LLMClient(Mode.LIVE, transport=transport, env=ENV, sleep=lambda s: None)
    with pytest.raises(ProviderError) as info:
        client.complete(MODEL, "p")
    assert info.value.status == 503

    transport, seen = scripted(httpx.Response(400, text="bad"))
    with pytest.raises(ProviderError):
        LLMClient(Mode.LIVE, transport=transport, env=ENV).complete(MODEL, "p")
    assert len(seen) == 1

    transport, _ = scripted(httpx.Response(200, json={"nope": 1}))
    with pytest.raises(ProviderError):
        LLMClient(Mode.LIVE, transport=transport, env=ENV).complete(MODEL, "p")


def test_auth_and_size_checks(tmp_path):
    transport, seen = scripted()
    with pytest.raises(AuthMissing):
        LLMClient(Mode.LIVE, transport=transport, env={}).complete(MODEL, "p")
    with pytest.raises(InputTooLarge):
        LLMClient(Mode.REPLAY, CassetteStore(tmp_path)).complete(MODEL, "x" * 4001)
    assert seen == []
    with pytest.raises(ConfigInvalid):
        LLMClient(Mode.REPLAY, None)


def test_cassette_store_atomic(tmp_path):
    store = CassetteStore(tmp_path)
    rec = CompletionRecord("h" * 64, "m", "raw")
    path = store.put("p", rec)
    assert path == tmp_path / "p" / f"{'h' * 64}.json"
    assert store.get("p", "h" * 64) == rec
    assert [f.name for f in path.parent.iterdir()] == [path.name]


def test_rate_limiter_waits():
    now = [0.0]
    slept = []

    def sleep(s):
        slept.append(s)
        now[0] += s

    rl = RateLimiter(60, clock=lambda: now[0], sleep=sleep)
    rl.acquire()
    rl.acquire()
    assert slept == [pytest.approx(1.0)]


def test_hash_and_tokens():
    assert prompt_hash("m", "p") != prompt_hash("n", "p")
    assert estimate_tokens("") == 0 and estimate_tokens("abcde") == 2


@pytest.mark.parametrize(
    "raw, code",
    [
        ("```java\nclass A {}\n```", "class A {}"),
        ("Sure:\n```\nx\ny\n```\nmore\n```java\nz\n```", "x\ny"),
        ("```java\nunterminated\n", "unterminated"),
        ("<repair_strategy>\nuse ```x```\n</repair_strategy>\n```java\nreal\n```", "real"),
    ],
)
def test_extract_code_block(raw, code):
    assert extract_code_block(raw) == code


@pytest.mark.parametrize("raw", ["no code here", "```java\n\n```", ""])
def test_no_code_block(raw):
    with pytest.raises(NoCodeBlock):
        extract_code_block(raw)


def test_split_strategy():
    assert split_repair_strategy("<repair_strategy>\n plan \n</repair_strategy>\nrest") == ("plan", "\nrest")
    assert split_repair_strategy("plain") == (None, "plain")


_body = st.lists(st.text(alphabet="abc {}();=\t", max_size=15).filter(lambda l: "```" not in l), min_size=1, max_size=8)


@given(_body, st.text(alphabet="xyz \n", max_size=20), st.sampled_from(["java", ""]))
def test_extract_roundtrip(lines, prose, lang):
    code = "\n".join(lines)
    raw = f"{prose.replace(chr(96), '')}\n```{lang}\n{code}\n```\ntrailing"
    if code.strip():
        assert extract_code_block(raw) == code
    else:
        with pytest.raises(NoCodeBlock):
            extract_code_block(raw)
