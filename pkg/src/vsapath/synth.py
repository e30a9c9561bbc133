"""Seed-reproducible planted-path benchmark generator.

Emits a random directed graph plus Q questions, each with a gold chain
inserted into the graph. Two structural guarantees make the benchmark a
clean rank-1 target for the retriever:

  * every gold chain is walkable in the emitted graph (it is inserted), and
  * each question's gold schema instantiates to exactly ONE chain from its
    topic entity - a same-schema sibling would tie the calibrated score
    exactly and turn rank 1 into a tie-break coin flip, so planting and
    top-up rejection-sample around that.

Entity names carry a deterministic type bucket (entity_type) so evaluation
harnesses can build type-aware mock adjudicators.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, VsapathError
from .kg import Graph, Question, Schema, Triple, graph_from_triples

__all__ = [
    "SynthSpec",
    "SynthBenchmark",
    "generate_benchmark",
    "entity_type",
    "ENTITY_TYPE_BUCKETS",
    "TypeMatchMockClient",
]

ENTITY_TYPE_BUCKETS = 8

_DOMAIN_SYNTH = 2
_PLANT_ATTEMPTS = 2000
_TOPUP_ATTEMPTS_PER_TRIPLE = 50


@dataclass(frozen=True)
class SynthSpec:
    entities: int
    relations: int
    triples: int
    questions: int
    max_gold_length: int
    seed: int = 0

    def __post_init__(self):
        if min(self.entities, self.relations, self.triples, self.questions) < 1:
            raise ConfigError("all benchmark sizes must be >= 1")
        if self.entities < 2:
            raise ConfigError("need at least 2 entities to form chains")
        if self.max_gold_length < 1:
            raise ConfigError("max_gold_length must be >= 1")
        if self.triples < self.questions * self.max_gold_length:
            raise ConfigError(
                f"infeasible sizes: triples={self.triples} < "
                f"questions*max_gold_length={self.questions * self.max_gold_length}"
            )


@dataclass(frozen=True)
class SynthBenchmark:
    graph: Graph
    questions: tuple[Question, ...]


def entity_type(name: str) -> int:
    """Deterministic type bucket derived from the entity index in its name."""
    match = re.search(r"(\d+)", name)
    if match is None:
        raise VsapathError(f"entity name carries no index: {name!r}")
    return int(match.group(1)) % ENTITY_TYPE_BUCKETS


class _Walker:
    """Mutable triple set with chain counting for uniqueness checks."""

    def __init__(self):
        self.triples: set[Triple] = set()
        self.adj: dict[tuple[str, str], set[str]] = {}

    def add(self, triple: Triple) -> bool:
        if triple in self.triples:
            return False
        self.triples.add(triple)
        self.adj.setdefault((triple[0], triple[1]), set()).add(triple[2])
        return True

    def remove(self, triple: Triple) -> None:
        self.triples.discard(triple)
        key = (triple[0], triple[1])
        tails = self.adj.get(key)
        if tails is not None:
            tails.discard(triple[2])
            if not tails:
                del self.adj[key]

    def chain_count(self, topic: str, schema: Schema, cap: int = 2) -> int:
        """Number of chains from `topic` matching `schema`, early-exit at cap."""
        frontier = [topic]
        for relation in schema:
            nxt: list[str] = []
            for entity in frontier:
                nxt.extend(self.adj.get((entity, relation), ()))
                if len(nxt) >= cap * 64:  # plenty for an early verdict
                    break
            if not nxt:
                return 0
            frontier = nxt
        return min(len(frontier), cap) if len(frontier) < cap else cap


def generate_benchmark(spec: SynthSpec) -> SynthBenchmark:
    """Build the graph + questions for `spec`; identical seeds give identical
    benchmarks byte-for-byte."""
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=spec.seed, spawn_key=(_DOMAIN_SYNTH,)))
    )
    entities = [f"e{i:04d}" for i in range(spec.entities)]
    relations = [f"r{j:02d}" for j in range(spec.relations)]

    gold_lengths = [int(rng.integers(1, spec.max_gold_length + 1)) for _ in range(spec.questions)]
    base_target = spec.triples - sum(gold_lengths)

    walker = _Walker()

    def random_triple() -> Triple:
        return (
            entities[int(rng.integers(spec.entities))],
            relations[int(rng.integers(spec.relations))],
            entities[int(rng.integers(spec.entities))],
        )

    guard = 0
    while len(walker.triples) < base_target:
        walker.add(random_triple())
        guard += 1
        if guard > 100 * spec.triples:
            raise VsapathError("graph too dense to reach the requested triple count")

    planted: list[tuple[str, Schema, tuple[str, ...]]] = []

    def all_unique() -> bool:
        return all(walker.chain_count(t, s) == 1 for t, s, _ in planted)

    for qi in range(spec.questions):
        length = gold_lengths[qi]
        ok = False
        for _ in range(_PLANT_ATTEMPTS):
            topic = entities[int(rng.integers(spec.entities))]
            schema: Schema = tuple(
                relations[int(rng.integers(spec.relations))] for _ in range(length)
            )
            chain = (topic,) + tuple(
                entities[int(rng.integers(spec.entities))] for _ in range(length)
            )
            new_triples = [
                (chain[i], schema[i], chain[i + 1]) for i in range(length)
            ]
            added = [t for t in new_triples if walker.add(t)]
            if walker.chain_count(topic, schema) == 1 and all_unique():
                planted.append((topic, schema, chain))
                ok = True
                break
            for t in added:
                walker.remove(t)
        if not ok:
            raise VsapathError(
                f"could not plant a unique gold chain for question {qi} "
                f"(graph too dense for these sizes)"
            )

    # Top up to the requested triple count without breaking any uniqueness.
    while len(walker.triples) < spec.triples:
        placed = False
        for _ in range(_TOPUP_ATTEMPTS_PER_TRIPLE):
            candidate = random_triple()
            if not walker.add(candidate):
                continue
            if all_unique():
                placed = True
                break
            walker.remove(candidate)
        if not placed:
            break  # accept a slightly smaller graph rather than loop forever

    questions = tuple(
        Question(
            id=f"q{qi:03d}",
            text=f"which entity is reached from {topic} via {' then '.join(schema)}",
            topic_entity=topic,
            gold_answers=frozenset({chain[-1]}),
            gold_schema=schema,
        )
        for qi, (topic, schema, chain) in enumerate(planted)
    )
    return SynthBenchmark(graph=graph_from_triples(walker.triples), questions=questions)


_NUMBERED_LINE_RE = re.compile(r"^(\d+)\. (.*)$", re.MULTILINE)


class TypeMatchMockClient:
    """Noisy offline adjudicator: cites the highest-ranked path whose terminal
    entity matches the expected answer type, else path 1."""

    def __init__(self, expected_type: int):
        self.expected_type = expected_type
        self.requests_made = 0

    def complete(self, prompt: str) -> str:
        self.requests_made += 1
        items = _NUMBERED_LINE_RE.findall(prompt)
        if not items:
            raise VsapathError("no numbered paths in prompt")
        chosen_index, chosen_text = items[0]
        for index, text in items:
            terminal = text.rsplit("--> ", 1)[-1].strip()
            if entity_type(terminal) == self.expected_type:
                chosen_index, chosen_text = index, text
                break
        terminal = chosen_text.rsplit("--> ", 1)[-1].strip()
        return (
            f"Answer: {terminal}\n"
            f"Supporting path(s): [{chosen_index}]\n"
            "Rationale: The cited path ends at an entity of the expected type."
        )
