"""Planted-benchmark generator contract."""

from __future__ import annotations

import pytest

from vsapath.errors import ConfigError
from vsapath.synth import (
    ENTITY_TYPE_BUCKETS,
    SynthSpec,
    TypeMatchMockClient,
    entity_type,
    generate_benchmark,
)

from oracles import exhaustive_chains

SPEC = SynthSpec(entities=60, relations=8, triples=400, questions=20, max_gold_length=3, seed=5)


def test_generator_produces_requested_sizes():
    b = generate_benchmark(SPEC)
    assert len(b.questions) == 20
    assert len(b.graph.triples) == 400
    assert len(b.graph.entities) <= 60
    assert len(b.graph.relations) <= 8


def test_generator_deterministic():
    one = generate_benchmark(SPEC)
    two = generate_benchmark(SPEC)
    assert one.graph.triples == two.graph.triples
    assert one.questions == two.questions


def test_different_seeds_differ():
    other = SynthSpec(entities=60, relations=8, triples=400, questions=20, max_gold_length=3, seed=6)
    assert generate_benchmark(SPEC).graph.triples != generate_benchmark(other).graph.triples


def test_gold_paths_walkable():
    # independent walker oracle: every gold schema instantiates from its topic
    b = generate_benchmark(SPEC)
    for q in b.questions:
        chains = exhaustive_chains(b.graph.adjacency, q.topic_entity, q.gold_schema)
        assert chains, q.id
        terminals = {chain[-1] for chain in chains}
        assert q.gold_answers is not None and q.gold_answers <= terminals


def test_gold_schema_instantiates_uniquely():
    # rank-1 retrieval needs no same-schema sibling from the topic
    b = generate_benchmark(SPEC)
    for q in b.questions:
        chains = exhaustive_chains(b.graph.adjacency, q.topic_entity, q.gold_schema)
        assert len(chains) == 1, q.id


def test_gold_lengths_bounded():
    b = generate_benchmark(SPEC)
    assert all(1 <= len(q.gold_schema) <= 3 for q in b.questions)


def test_infeasible_sizes_rejected():
    with pytest.raises(ConfigError, match="infeasible"):
        SynthSpec(entities=60, relations=8, triples=30, questions=20, max_gold_length=3)


def test_entity_type_buckets():
    assert entity_type("e0013") == 13 % ENTITY_TYPE_BUCKETS
    assert entity_type("e0008") == 0
    assert 0 <= entity_type("e0999") < ENTITY_TYPE_BUCKETS


def test_type_match_mock_client_prefers_matching_terminal():
    prompt = (
        "Question: q\n"
        "Retrieved paths (Top-K):\n"
        "1. e0001 --r0--> e0003\n"
        "2. e0001 --r1--> e0010\n"
        "3. e0001 --r2--> e0018\n"
    )
    client = TypeMatchMockClient(expected_type=entity_type("e0010"))
    text = client.complete(prompt)
    assert "Answer: e0010" in text
    assert "[2]" in text
    fallback = TypeMatchMockClient(expected_type=7)
    text = fallback.complete(prompt)
    assert "Answer: e0003" in text  # no type match -> top-1
    assert "[1]" in text
