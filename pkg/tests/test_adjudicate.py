"""Prompt rendering, response parsing, client contract, single-call flow."""

from __future__ import annotations

from pathlib import Path

import pytest
import requests

from vsapath.adjudicate import (
    SYSTEM_PREAMBLE,
    Adjudication,
    ClientContract,
    HttpLlmClient,
    MockLlmClient,
    adjudicate,
    mock_client,
    parse_response,
    render_prompt,
    verbalize_path,
)
from vsapath.errors import ConfigError, ResponseParseError, TransportError
from vsapath.retrieve import CandidatePath

FIXTURES = Path(__file__).parent / "fixtures"


# ---------------------------------------------------------------------------
# verbalize_path
# ---------------------------------------------------------------------------


def test_verbalize_single_hop():
    assert verbalize_path(CandidatePath(("r1",), ("a", "b"))) == "a --r1--> b"


def test_verbalize_two_hops():
    path = CandidatePath(("r1", "r2"), ("a", "b", "c"))
    assert verbalize_path(path) == "a --r1--> b --r2--> c"
    assert verbalize_path(path).count("-->") == 2


def test_verbalize_deterministic():
    path = CandidatePath(("born_in",), ("alice", "paris"))
    assert verbalize_path(path) == verbalize_path(path)


# ---------------------------------------------------------------------------
# render_prompt
# ---------------------------------------------------------------------------


def test_render_matches_golden_file():
    bundle = render_prompt(
        "which continent contains the gobi desert",
        [
            "gobi_desert --containedby--> asia",
            "gobi_desert --partially_containedby--> mongolia",
            "asia --contains--> gobi_desert",
        ],
    )
    golden = (FIXTURES / "golden_prompt_k3.txt").read_bytes()
    assert bundle.prompt.encode("utf-8") == golden


def test_render_single_path_matches_golden_file():
    bundle = render_prompt("who founded acme", ["acme --founded_by--> alice"])
    golden = (FIXTURES / "golden_prompt_k1.txt").read_bytes()
    assert bundle.prompt.encode("utf-8") == golden


def test_render_numbered_items_match_path_count():
    for k in (1, 2, 3, 7):
        paths = [f"a --r{i}--> b" for i in range(k)]
        bundle = render_prompt("q", paths)
        numbered = [line for line in bundle.prompt.splitlines() if line[:1].isdigit()]
        assert len(numbered) == k
        assert bundle.paths == tuple(paths)


def test_render_preamble_is_template_constant():
    bundle = render_prompt("q", ["a --r--> b"])
    assert bundle.system_preamble == SYSTEM_PREAMBLE
    assert bundle.prompt.startswith(SYSTEM_PREAMBLE)


def test_render_rejects_empty_inputs():
    with pytest.raises(ConfigError):
        render_prompt("q", [])
    with pytest.raises(ConfigError):
        render_prompt("", ["a --r--> b"])


def test_render_pure_function():
    one = render_prompt("q", ["a --r--> b"])
    two = render_prompt("q", ["a --r--> b"])
    assert one.prompt == two.prompt


# ---------------------------------------------------------------------------
# parse_response
# ---------------------------------------------------------------------------


def test_parse_canonical_response():
    text = "Answer: Asia\nSupporting path(s): [1]\nRationale: contained by Asia."
    adj = parse_response(text, 3)
    assert adj.answer == "Asia"
    assert adj.supporting_indices == (1,)
    assert adj.rationale == "contained by Asia."
    assert adj.raw_response == text
    assert adj.warnings == ()


def test_parse_multi_index():
    adj = parse_response("Answer: x\nSupporting path(s): [1, 3]\nRationale: both.", 3)
    assert adj.supporting_indices == (1, 3)


def test_parse_out_of_range_dropped_with_warning():
    adj = parse_response("Answer: x\nSupporting path(s): [9]\nRationale: r.", 3)
    assert adj.supporting_indices == ()
    assert any("out of range" in w for w in adj.warnings)


def test_parse_case_and_whitespace_tolerant():
    text = "  ANSWER:   Europe  \n supporting paths : [ 2 ]\nRATIONALE (1-2 sentences):  direct mapping."
    adj = parse_response(text, 2)
    assert adj.answer == "Europe"
    assert adj.supporting_indices == (2,)
    assert adj.rationale == "direct mapping."


def test_parse_missing_answer_raises_with_raw():
    text = "Supporting path(s): [1]\nRationale: none."
    with pytest.raises(ResponseParseError) as err:
        parse_response(text, 1)
    assert err.value.raw == text


def test_parse_empty_answer_raises():
    with pytest.raises(ResponseParseError):
        parse_response("Answer:\nSupporting path(s): [1]", 1)


def test_parse_indices_always_in_range():
    adj = parse_response("Answer: x\nSupporting path(s): [0, 1, 2, 3, -1]", 2)
    assert all(1 <= i <= 2 for i in adj.supporting_indices)


def test_parse_invalid_num_paths():
    with pytest.raises(ConfigError):
        parse_response("Answer: x", 0)


# ---------------------------------------------------------------------------
# mock client
# ---------------------------------------------------------------------------


def make_bundle(paths=None):
    return render_prompt("who founded acme", paths or ["acme --founded_by--> alice", "acme --located_in--> berlin"])


def test_mock_client_selects_path_one():
    bundle = make_bundle()
    adj = parse_response(mock_client(bundle), len(bundle.paths))
    assert adj.supporting_indices == (1,)
    assert adj.answer == "alice"


def test_mock_client_deterministic():
    bundle = make_bundle()
    assert mock_client(bundle) == mock_client(bundle)


def test_mock_llm_client_agrees_with_mock_client():
    bundle = make_bundle()
    client = MockLlmClient()
    assert client.complete(bundle.prompt) == mock_client(bundle)
    assert client.requests_made == 1


def test_mock_parse_totality():
    for paths in (["a --r--> b"], ["a --r--> b", "a --s--> c", "c --t--> d"]):
        bundle = make_bundle(paths)
        adj = parse_response(mock_client(bundle), len(bundle.paths))
        assert adj.answer


# ---------------------------------------------------------------------------
# adjudicate + transport
# ---------------------------------------------------------------------------


def test_adjudicate_with_mock_is_single_call():
    bundle = make_bundle()
    client = MockLlmClient()
    adj = adjudicate(client, bundle)
    assert client.requests_made == 1
    assert adj.answer == "alice"
    assert adj.supporting_indices == (1,)


def test_client_contract_invariants():
    with pytest.raises(ConfigError):
        ClientContract(endpoint_url="http://x", timeout_s=0.0)
    with pytest.raises(ConfigError):
        ClientContract(endpoint_url="http://x", max_retries=-1)


def test_unreachable_endpoint_is_transport_error():
    contract = ClientContract(endpoint_url="http://127.0.0.1:1/llm", timeout_s=0.5, max_retries=0)
    client = HttpLlmClient(contract)
    with pytest.raises(TransportError):
        adjudicate(client, make_bundle())
    assert client.requests_made == 1


def test_retries_apply_to_transport_only(monkeypatch):
    calls = {"n": 0}

    class FakeResponse:
        status_code = 200

        @staticmethod
        def json():
            return {"text": "Answer: alice\nSupporting path(s): [1]\nRationale: ok."}

    def flaky_post(url, json=None, headers=None, timeout=None):
        calls["n"] += 1
        if calls["n"] < 3:
            raise requests.ConnectionError("boom")
        return FakeResponse()

    monkeypatch.setattr(requests, "post", flaky_post)
    client = HttpLlmClient(ClientContract(endpoint_url="http://fake", max_retries=2))
    adj = adjudicate(client, make_bundle())
    assert adj.answer == "alice"
    assert client.requests_made == 3


def test_parse_failure_is_never_retried(monkeypatch):
    calls = {"n": 0}

    class GarbageResponse:
        status_code = 200

        @staticmethod
        def json():
            return {"text": "complete nonsense"}

    def post(url, json=None, headers=None, timeout=None):
        calls["n"] += 1
        return GarbageResponse()

    monkeypatch.setattr(requests, "post", post)
    client = HttpLlmClient(ClientContract(endpoint_url="http://fake", max_retries=5))
    with pytest.raises(ResponseParseError):
        adjudicate(client, make_bundle())
    assert calls["n"] == 1  # retries are for transport failures only


def test_http_client_sends_token_and_zero_temperature(monkeypatch):
    seen = {}

    class FakeResponse:
        status_code = 200

        @staticmethod
        def json():
            return {"text": "Answer: x\nSupporting path(s): [1]\nRationale: r."}

    def post(url, json=None, headers=None, timeout=None):
        seen.update(url=url, body=json, headers=headers, timeout=timeout)
        return FakeResponse()

    monkeypatch.setattr(requests, "post", post)
    monkeypatch.setenv("MY_TOKEN", "sekrit")
    contract = ClientContract(endpoint_url="http://fake/llm", timeout_s=9.0, token_env="MY_TOKEN")
    HttpLlmClient(contract).complete("PROMPT")
    assert seen["url"] == "http://fake/llm"
    assert seen["body"]["prompt"] == "PROMPT"
    assert seen["body"]["temperature"] == 0.0
    assert seen["headers"]["Authorization"] == "Bearer sekrit"
    assert seen["timeout"] == 9.0


def test_missing_text_field_is_transport_error(monkeypatch):
    class BadBody:
        status_code = 200

        @staticmethod
        def json():
            return {"output": "nope"}

    monkeypatch.setattr(requests, "post", lambda *a, **k: BadBody())
    client = HttpLlmClient(ClientContract(endpoint_url="http://fake"))
    with pytest.raises(TransportError):
        client.complete("p")
