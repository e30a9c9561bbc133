"""One-shot adjudication: prompt rendering, LLM client contract, parsing.

The rendered prompt lists the question and the numbered Top-K paths and asks
for a fixed three-section response (Answer / Supporting path(s) /
Rationale). Exactly one request is issued per question; transport failures
may be retried per the client contract, but a malformed response is never
re-prompted - it surfaces as ResponseParseError.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from typing import Protocol, Sequence

import requests

from .errors import ConfigError, ResponseParseError, TransportError
from .retrieve import CandidatePath

__all__ = [
    "SYSTEM_PREAMBLE",
    "PromptBundle",
    "Adjudication",
    "ClientContract",
    "LlmClient",
    "HttpLlmClient",
    "MockLlmClient",
    "verbalize_path",
    "render_prompt",
    "parse_response",
    "mock_client",
    "adjudicate",
]

SYSTEM_PREAMBLE = (
    "You are a careful reasoner. Only use the provided KG reasoning paths "
    "as evidence. Cite the most relevant path(s) and answer concisely."
)

_RESPONSE_FORMAT = (
    "Respond in exactly this format:\n"
    "Answer: <short answer>\n"
    "Supporting path(s): [indexes from the list above]\n"
    "Rationale (1-2 sentences): why those paths imply the answer."
)


@dataclass(frozen=True)
class PromptBundle:
    question: str
    paths: tuple[str, ...]  # verbalized, 1-indexed as displayed
    prompt: str
    system_preamble: str = SYSTEM_PREAMBLE


@dataclass(frozen=True)
class Adjudication:
    answer: str
    supporting_indices: tuple[int, ...]  # 1-based into PromptBundle.paths
    rationale: str
    raw_response: str
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class ClientContract:
    """Narrow wire contract for the external model endpoint."""

    endpoint_url: str
    timeout_s: float = 30.0
    max_retries: int = 0
    token_env: str = "VSAPATH_LLM_TOKEN"

    def __post_init__(self):
        if self.timeout_s <= 0.0:
            raise ConfigError(f"timeout must be > 0, got {self.timeout_s}")
        if self.max_retries < 0:
            raise ConfigError(f"max_retries must be >= 0, got {self.max_retries}")


def verbalize_path(path: CandidatePath) -> str:
    """Deterministic linearization: ``e0 --r1--> e1 --r2--> ... --rl--> el``."""
    parts = [path.chain[0]]
    for relation, entity in zip(path.schema, path.chain[1:]):
        parts.append(f" --{relation}--> {entity}")
    return "".join(parts)


def render_prompt(question: str, paths: Sequence[str]) -> PromptBundle:
    """Fill the one-shot adjudication template; byte-stable for given inputs."""
    if not question:
        raise ConfigError("question text must be non-empty")
    if not paths:
        raise ConfigError("at least one path is required to render a prompt")
    numbered = "".join(f"{i}. {p}\n" for i, p in enumerate(paths, start=1))
    prompt = (
        f"{SYSTEM_PREAMBLE}\n"
        "\n"
        f'Question: "{question}"\n'
        "\n"
        "Retrieved paths (Top-K):\n"
        f"{numbered}"
        "\n"
        f"{_RESPONSE_FORMAT}\n"
    )
    return PromptBundle(question=question, paths=tuple(paths), prompt=prompt)


_ANSWER_RE = re.compile(r"^[ \t]*answer[ \t]*:[ \t]*(.*?)[ \t]*$", re.IGNORECASE | re.MULTILINE)
_SUPPORT_RE = re.compile(
    r"^[ \t]*supporting[ \t]+path(?:\(s\)|s)?[ \t]*:[ \t]*(.*?)[ \t]*$",
    re.IGNORECASE | re.MULTILINE,
)
_RATIONALE_RE = re.compile(
    r"^[ \t]*rationale[^:\r\n]*:[ \t]*(.*)", re.IGNORECASE | re.MULTILINE | re.DOTALL
)
_BRACKET_RE = re.compile(r"\[([^\]]*)\]")
_INT_RE = re.compile(r"-?\d+")


def parse_response(text: str, num_paths: int) -> Adjudication:
    """Extract the three labeled sections, tolerating case and whitespace.

    Missing or empty Answer raises ResponseParseError carrying the raw text.
    Out-of-range supporting indices are dropped with a warning flag.
    """
    if num_paths < 1:
        raise ConfigError(f"num_paths must be >= 1, got {num_paths}")
    answer_match = _ANSWER_RE.search(text)
    if answer_match is None:
        raise ResponseParseError("response has no 'Answer:' section", raw=text)
    answer = answer_match.group(1).strip()
    if not answer:
        raise ResponseParseError("response 'Answer:' section is empty", raw=text)

    warnings: list[str] = []
    indices: list[int] = []
    support_match = _SUPPORT_RE.search(text)
    if support_match is None:
        warnings.append("no supporting-path section")
    else:
        section = support_match.group(1)
        bracket = _BRACKET_RE.search(section)
        raw_ints = _INT_RE.findall(bracket.group(1) if bracket else section)
        for token in raw_ints:
            value = int(token)
            if 1 <= value <= num_paths:
                indices.append(value)
            else:
                warnings.append(f"supporting index {value} out of range 1..{num_paths}")

    rationale_match = _RATIONALE_RE.search(text)
    rationale = rationale_match.group(1).strip() if rationale_match else ""
    return Adjudication(
        answer=answer,
        supporting_indices=tuple(indices),
        rationale=rationale,
        raw_response=text,
        warnings=tuple(warnings),
    )


class LlmClient(Protocol):
    requests_made: int

    def complete(self, prompt: str) -> str: ...


def _terminal_entity(verbalized: str) -> str:
    return verbalized.rsplit("--> ", 1)[-1].strip()


def _mock_text(first_path: str) -> str:
    return (
        f"Answer: {_terminal_entity(first_path)}\n"
        "Supporting path(s): [1]\n"
        "Rationale: Path 1 links the topic entity straight to the answer."
    )


def mock_client(bundle: PromptBundle) -> str:
    """Deterministic offline response: cites path 1, answers its terminal."""
    return _mock_text(bundle.paths[0])


_NUMBERED_LINE_RE = re.compile(r"^\d+\. (.*)$", re.MULTILINE)


class MockLlmClient:
    """Offline client recovering the numbered paths from the rendered prompt
    and answering like mock_client. Matches the vector-only baseline: top-1
    terminal entity, always citing path 1."""

    def __init__(self):
        self.requests_made = 0

    def complete(self, prompt: str) -> str:
        self.requests_made += 1
        paths = _NUMBERED_LINE_RE.findall(prompt)
        if not paths:
            raise TransportError("mock client found no numbered paths in prompt")
        return _mock_text(paths[0])


class HttpLlmClient:
    """Single-POST client: {prompt, max_tokens, temperature} -> {text}.

    Temperature is fixed to 0 for reproducibility. Retries apply to
    transport failures only; a 2xx response with a malformed body is a
    protocol violation and also counts as transport-level.
    """

    def __init__(self, contract: ClientContract, max_tokens: int = 512):
        self.contract = contract
        self.max_tokens = max_tokens
        self.requests_made = 0

    def complete(self, prompt: str) -> str:
        headers = {}
        token = os.environ.get(self.contract.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body = {"prompt": prompt, "max_tokens": self.max_tokens, "temperature": 0.0}
        last_error: Exception | None = None
        for _ in range(self.contract.max_retries + 1):
            self.requests_made += 1
            try:
                resp = requests.post(
                    self.contract.endpoint_url,
                    json=body,
                    headers=headers,
                    timeout=self.contract.timeout_s,
                )
                if resp.status_code != 200:
                    raise TransportError(f"endpoint returned HTTP {resp.status_code}")
                payload = resp.json()
                if "text" not in payload:
                    raise TransportError("endpoint response body lacks 'text'")
                return str(payload["text"])
            except (requests.RequestException, ValueError, TransportError) as exc:
                last_error = exc
        raise TransportError(
            f"transport failed after {self.contract.max_retries + 1} attempt(s): {last_error}"
        )


def adjudicate(client: LlmClient, bundle: PromptBundle) -> Adjudication:
    """One request-response cycle; parse failures are surfaced, never retried.

    The per-question call count is observable via client.requests_made.
    """
    text = client.complete(bundle.prompt)
    return parse_response(text, num_paths=len(bundle.paths))
