"""Planner, candidate instantiation, calibrated scoring, Top-K, retrieve."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vsapath.errors import ConfigError, UnknownSymbolError, VsapathError
from vsapath.kg import IdfTable, Question, build_schema_graph, compute_idf, graph_from_triples, schema_key
from vsapath.retrieve import (
    CandidatePath,
    PenaltyMode,
    RetrievalConfig,
    ScoredCandidate,
    collect_candidate_schemas,
    enumerate_plans,
    instantiate_candidates,
    ranking_key,
    result_to_record,
    retrieve,
    score_candidates,
    select_query_plan,
    top_k,
)
from vsapath.vsa import HdcConfig, OperatorFamily, encode_path, make_codebook, similarity

from oracles import exhaustive_chains, exhaustive_plans, full_sort_selection, oracle_calibrated_total

HDC = HdcConfig(num_blocks=64, block_size=4, operator=OperatorFamily.GHRR, seed=7)


def cfg_with(**kw) -> RetrievalConfig:
    return RetrievalConfig(hdc=HDC, **kw)


def question(topic="a", text="q", gold_schema=None) -> Question:
    return Question(id="q0", text=text, topic_entity=topic, gold_schema=gold_schema)


CHAIN_GRAPH = graph_from_triples({("a", "r1", "b"), ("b", "r2", "c"), ("c", "r3", "d")})
CHAIN_SG = build_schema_graph(CHAIN_GRAPH)


# ---------------------------------------------------------------------------
# RetrievalConfig
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "kw",
    [
        {"alpha": -0.1},
        {"beta": -0.1},
        {"lam": 0.0},
        {"lam": 1.0},
        {"k": 0},
        {"l_max": 0},
        {"beam": 0},
    ],
)
def test_config_invariants(kw):
    with pytest.raises(ConfigError):
        cfg_with(**kw)


def test_candidate_path_chain_length_checked():
    with pytest.raises(VsapathError):
        CandidatePath(("r1",), ("a",))
    assert CandidatePath(("r1",), ("a", "b")).terminal == "b"


# ---------------------------------------------------------------------------
# enumerate_plans
# ---------------------------------------------------------------------------


def test_chain_schema_graph_plans():
    plans = enumerate_plans(CHAIN_SG, {"r1"}, cfg_with(l_max=3, beam=10))
    assert plans == [("r1",), ("r1", "r2"), ("r1", "r2", "r3")]


def test_depth_one_returns_start_relations():
    plans = enumerate_plans(CHAIN_SG, {"r2", "r1"}, cfg_with(l_max=1))
    assert plans == [("r1",), ("r2",)]


def test_empty_start_set_is_valid():
    assert enumerate_plans(CHAIN_SG, set(), cfg_with()) == []


def test_unknown_start_relation_rejected():
    with pytest.raises(VsapathError):
        enumerate_plans(CHAIN_SG, {"zz"}, cfg_with())


def test_beam_keeps_highest_witness_product():
    # r1 composes with r2 via two witnesses but with r3 via one
    g = graph_from_triples(
        {
            ("a", "r1", "b"),
            ("b", "r2", "c"),
            ("a", "r1", "d"),
            ("d", "r2", "e"),
            ("d", "r3", "f"),
        }
    )
    sg = build_schema_graph(g)
    plans = enumerate_plans(sg, {"r1"}, cfg_with(l_max=2, beam=1))
    assert plans == [("r1",), ("r1", "r2")]


def test_plans_match_exhaustive_dfs_oracle():
    rng = np.random.default_rng(11)
    for trial in range(20):
        relations = [f"r{i}" for i in range(rng.integers(3, 10))]
        entities = [f"e{i}" for i in range(12)]
        triples = {
            (
                entities[rng.integers(12)],
                relations[rng.integers(len(relations))],
                entities[rng.integers(12)],
            )
            for _ in range(rng.integers(5, 40))
        }
        g = graph_from_triples(triples)
        sg = build_schema_graph(g)
        starts = set(rng.choice(sorted(g.relations), size=min(2, len(g.relations)), replace=False))
        l_max = int(rng.integers(1, 4))
        got = enumerate_plans(sg, starts, cfg_with(l_max=l_max, beam=10**6))
        succ = {r: sg.successors(r) for r in sg.nodes}
        assert set(got) == exhaustive_plans(succ, starts, l_max)
        assert got == sorted(got, key=lambda s: (len(s), s))


# ---------------------------------------------------------------------------
# select_query_plan
# ---------------------------------------------------------------------------


def test_gold_hint_passthrough():
    plans = [("r1",), ("r1", "r2")]
    assert select_query_plan(plans, question(), gold_hint=("r1", "r2")) == ("r1", "r2")


def test_gold_hint_absent_falls_back():
    plans = [("located_in",), ("founded_by",)]
    q = question(text="who founded X")
    assert select_query_plan(plans, q, gold_hint=("missing",)) == ("founded_by",)


def test_token_overlap_selection():
    plans = [("founded_by",), ("located_in",)]
    assert select_query_plan(plans, question(text="who founded X")) == ("founded_by",)


def test_zero_overlap_lexicographic_tiebreak():
    assert select_query_plan([("b",), ("a",)], question(text="zzz")) == ("a",)


def test_tie_prefers_shorter_plan():
    plans = [("founded_by", "located_in"), ("founded_by",)]
    assert select_query_plan(plans, question(text="who founded X")) == ("founded_by",)


def test_empty_plan_list_rejected():
    with pytest.raises(VsapathError):
        select_query_plan([], question())


# ---------------------------------------------------------------------------
# instantiate_candidates
# ---------------------------------------------------------------------------


def test_unique_chain_instantiation():
    cands = instantiate_candidates(CHAIN_GRAPH, [("r1", "r2")], "a", cfg_with())
    assert cands == [CandidatePath(("r1", "r2"), ("a", "b", "c"))]


def test_non_matching_plan_gives_no_candidates():
    assert instantiate_candidates(CHAIN_GRAPH, [("r2",)], "a", cfg_with()) == []


def test_unknown_topic_rejected():
    with pytest.raises(VsapathError):
        instantiate_candidates(CHAIN_GRAPH, [("r1",)], "zz", cfg_with())


def test_candidates_match_recursive_matcher_oracle():
    rng = np.random.default_rng(13)
    for trial in range(10):
        entities = [f"e{i}" for i in range(30)]
        relations = [f"r{i}" for i in range(6)]
        triples = {
            (entities[rng.integers(30)], relations[rng.integers(6)], entities[rng.integers(30)])
            for _ in range(400)
        }
        g = graph_from_triples(triples)
        sg = build_schema_graph(g)
        topic = sorted(g.entities)[0]
        cfg = cfg_with(l_max=3, beam=10**6)
        plans = enumerate_plans(sg, g.out_relations(topic), cfg)
        got = instantiate_candidates(g, plans, topic, cfg)
        expected = set()
        for plan in plans:
            for chain in exhaustive_chains(g.adjacency, topic, plan):
                expected.add(CandidatePath(plan, chain))
        assert set(got) == expected
        assert got == sorted(got, key=lambda c: (c.schema, c.chain))


def test_frontier_beam_caps_expansion():
    # star graph: 1 plan, topic with 10 tails, beam 1 -> at most 1 partial kept
    triples = {("a", "r1", f"b{i}") for i in range(10)} | {(f"b{i}", "r2", "c") for i in range(10)}
    g = graph_from_triples(triples)
    cfg = cfg_with(beam=1)
    cands = instantiate_candidates(g, [("r1", "r2")], "a", cfg)
    assert len(cands) == 1  # frontier capped at beam * |plans| = 1


# ---------------------------------------------------------------------------
# score_candidates
# ---------------------------------------------------------------------------


def scored(total, schema=("r",), chain=("a", "b")):
    if len(chain) != len(schema) + 1:
        chain = tuple(f"e{i}" for i in range(len(schema) + 1))
    return ScoredCandidate(
        path=CandidatePath(schema, chain), sim=total, idf_bonus=0.0, length_penalty=0.0, total=total
    )


def test_hand_computed_calibration():
    # sim=0.25, IDF=2.0, alpha=0.2, beta=0.1, lambda=0.8, |z|=2 -> 0.586
    total = oracle_calibrated_total(0.25, 2.0, 2, 0.2, 0.1, 0.8)
    assert total == pytest.approx(0.586, abs=1e-12)


def test_score_candidates_composition():
    cb = make_codebook(HDC, ["r1", "r2", "r3"])
    cfg = cfg_with(alpha=0.2, beta=0.1, lam=0.8)
    idf = IdfTable(n_train=10, freq={schema_key(("r1", "r2")): 4})
    cands = [
        CandidatePath(("r1", "r2"), ("a", "b", "c")),
        CandidatePath(("r3",), ("a", "d")),
    ]
    query = encode_path(cb, ("r1", "r2"))
    out = score_candidates(cb, query, cands, idf, cfg)
    for sc, cand in zip(out, cands):
        expected_sim = similarity(query, encode_path(cb, cand.schema))
        assert sc.sim == expected_sim
        assert sc.idf_bonus == 0.2 * idf.idf(cand.schema)
        assert sc.length_penalty == 0.1 * 0.8 ** len(cand.schema)
        assert sc.total == sc.sim + sc.idf_bonus - sc.length_penalty
        assert abs(sc.total - sc.sim - sc.idf_bonus + sc.length_penalty) <= 1e-12
    assert out[0].sim == pytest.approx(1.0, abs=1e-6)


def test_calibration_off_total_equals_sim():
    cb = make_codebook(HDC, ["r1", "r2"])
    cfg = cfg_with(alpha=0.0, beta=0.0)
    cands = [CandidatePath(("r1",), ("a", "b")), CandidatePath(("r2",), ("a", "c"))]
    out = score_candidates(cb, encode_path(cb, ("r1",)), cands, IdfTable(5, {}), cfg)
    for sc in out:
        assert sc.total == sc.sim


def test_matching_schema_is_strictly_maximal():
    # planted query schema among random distractors: sim == 1 and top total
    rng = np.random.default_rng(17)
    cb = make_codebook(HdcConfig(num_blocks=256, block_size=4, seed=19), [f"s{i:02d}" for i in range(24)])
    gold = ("s00", "s01", "s02")
    cands = [CandidatePath(gold, ("a", "b", "c", "d"))]
    seen = {gold}
    while len(cands) < 500:
        schema = tuple(f"s{i:02d}" for i in rng.integers(0, 24, size=3))
        if schema in seen:
            continue
        seen.add(schema)
        cands.append(CandidatePath(schema, ("a", "b", "c", "d")))
    cfg = cfg_with(alpha=0.0, beta=0.0)
    out = score_candidates(cb, encode_path(cb, gold), cands, IdfTable(0, {}), cfg)
    assert out[0].sim == pytest.approx(1.0, abs=1e-6)
    assert out[0].total == max(sc.total for sc in out)
    assert sorted(out, key=ranking_key)[0].path.schema == gold


def test_unknown_relation_rejected():
    cb = make_codebook(HDC, ["r1"])
    with pytest.raises(UnknownSymbolError):
        score_candidates(
            cb,
            encode_path(cb, ("r1",)),
            [CandidatePath(("zz",), ("a", "b"))],
            IdfTable(0, {}),
            cfg_with(),
        )


def test_penalty_mode_alternative():
    cb = make_codebook(HDC, ["r1"])
    cands = [CandidatePath(("r1",), ("a", "b"))]
    printed = score_candidates(
        cb, encode_path(cb, ("r1",)), cands, IdfTable(0, {}), cfg_with(beta=0.1, lam=0.8)
    )[0]
    proportional = score_candidates(
        cb,
        encode_path(cb, ("r1",)),
        cands,
        IdfTable(0, {}),
        cfg_with(beta=0.1, lam=0.8, penalty_mode=PenaltyMode.LENGTH_PROPORTIONAL),
    )[0]
    assert printed.length_penalty == pytest.approx(0.08, abs=1e-12)
    assert proportional.length_penalty == pytest.approx(0.02, abs=1e-12)


def test_as_printed_penalty_decreases_with_length():
    # as printed, beta * lambda**|z| shrinks as |z| grows
    cfg = cfg_with(beta=0.1, lam=0.8)
    cb = make_codebook(HDC, ["r1", "r2", "r3"])
    cands = [
        CandidatePath(("r1",), ("a", "b")),
        CandidatePath(("r1", "r2"), ("a", "b", "c")),
        CandidatePath(("r1", "r2", "r3"), ("a", "b", "c", "d")),
    ]
    out = score_candidates(cb, encode_path(cb, ("r1",)), cands, IdfTable(0, {}), cfg)
    penalties = [sc.length_penalty for sc in out]
    assert penalties[0] > penalties[1] > penalties[2] > 0.0


# ---------------------------------------------------------------------------
# top_k
# ---------------------------------------------------------------------------


def test_top_k_undersized_input():
    items = [scored(0.3), scored(0.9)]
    assert [sc.total for sc in top_k(items, 3)] == [0.9, 0.3]


def test_top_k_tiebreak_lexicographic_schema():
    items = [scored(0.5, schema=("b",)), scored(0.5, schema=("a",))]
    assert top_k(items, 1)[0].path.schema == ("a",)


def test_top_k_tiebreak_shorter_first():
    items = [scored(0.5, schema=("a", "b")), scored(0.5, schema=("z",))]
    assert top_k(items, 1)[0].path.schema == ("z",)


def test_top_k_invalid_k():
    with pytest.raises(ConfigError):
        top_k([], 0)


def test_top_k_matches_full_sort_oracle_with_ties():
    rng = np.random.default_rng(23)
    items = []
    for i in range(10_000):
        schema = tuple(f"r{j}" for j in rng.integers(0, 5, size=rng.integers(1, 4)))
        chain = tuple(f"e{j}" for j in rng.integers(0, 9, size=len(schema) + 1))
        total = float(rng.choice([0.1, 0.25, 0.5, 0.75]))  # coarse grid forces ties
        items.append(
            ScoredCandidate(CandidatePath(schema, chain), total, 0.0, 0.0, total)
        )
    for k in (1, 3, 17, 9999):
        assert top_k(items, k) == full_sort_selection(items, k)


@settings(max_examples=50, deadline=None)
@given(
    totals=st.lists(st.floats(-1.0, 2.0, allow_nan=False), min_size=1, max_size=40),
    k=st.integers(1, 10),
)
def test_top_k_property(totals, k):
    items = [scored(t, schema=(f"r{i}",), chain=(f"a{i}", f"b{i}")) for i, t in enumerate(totals)]
    got = top_k(items, k)
    assert got == full_sort_selection(items, k)
    assert len(got) == min(k, len(items))


# ---------------------------------------------------------------------------
# retrieve (composition)
# ---------------------------------------------------------------------------


def build_pipeline(graph, seed=7, **cfg_kw):
    cfg = cfg_with(**cfg_kw)
    cb = make_codebook(cfg.hdc, sorted(graph.relations))
    sg = build_schema_graph(graph)
    return cfg, cb, sg


def test_retrieve_single_chain_graph():
    cfg, cb, sg = build_pipeline(CHAIN_GRAPH)
    q = question(topic="a", gold_schema=("r1", "r2", "r3"))
    result = retrieve(CHAIN_GRAPH, sg, cb, IdfTable(0, {}), q, cfg)
    assert result.plan == ("r1", "r2", "r3")
    assert result.top_k[0].path == CandidatePath(("r1", "r2", "r3"), ("a", "b", "c", "d"))
    assert result.top_k[0].sim == pytest.approx(1.0, abs=1e-6)
    assert set(result.timings_us) == {"plan", "encode", "score", "select"}


def test_retrieve_deterministic_modulo_timings():
    cfg, cb, sg = build_pipeline(CHAIN_GRAPH)
    q = question(topic="a")
    one = retrieve(CHAIN_GRAPH, sg, cb, IdfTable(0, {}), q, cfg)
    two = retrieve(CHAIN_GRAPH, sg, cb, IdfTable(0, {}), q, cfg)
    assert one.plan == two.plan
    assert one.candidates == two.candidates
    assert one.top_k == two.top_k
    assert one.flags == two.flags


def test_retrieve_topic_without_edges_flagged():
    g = graph_from_triples({("a", "r1", "b")})
    cfg, cb, sg = build_pipeline(g)
    q = Question(id="qx", text="t", topic_entity="b")
    result = retrieve(g, sg, cb, IdfTable(0, {}), q, cfg)
    assert result.top_k == ()
    assert "no_plans" in result.flags


def test_retrieve_ranked_candidates_are_sorted():
    cfg, cb, sg = build_pipeline(CHAIN_GRAPH)
    result = retrieve(CHAIN_GRAPH, sg, cb, IdfTable(0, {}), question(topic="a"), cfg)
    assert list(result.candidates) == sorted(result.candidates, key=ranking_key)
    assert result.top_k == result.candidates[: cfg.k]


def test_result_record_shape():
    cfg, cb, sg = build_pipeline(CHAIN_GRAPH)
    result = retrieve(CHAIN_GRAPH, sg, cb, IdfTable(0, {}), question(topic="a"), cfg)
    record = result_to_record(result)
    assert record["question_id"] == "q0"
    assert record["top_k"] == list(range(len(result.top_k)))
    for entry in record["candidates"]:
        assert set(entry) == {"schema", "chain", "sim", "idf_bonus", "length_penalty", "total"}
        assert entry["total"] == pytest.approx(
            entry["sim"] + entry["idf_bonus"] - entry["length_penalty"], abs=1e-12
        )


def test_collect_candidate_schemas_matches_retrieve_candidates():
    cfg, cb, sg = build_pipeline(CHAIN_GRAPH)
    schemas = collect_candidate_schemas(CHAIN_GRAPH, sg, question(topic="a"), cfg)
    result = retrieve(CHAIN_GRAPH, sg, cb, IdfTable(0, {}), question(topic="a"), cfg)
    assert sorted(schemas) == sorted(sc.path.schema for sc in result.candidates)


def test_self_retrieval_sim_is_one_and_maximal():
    rng = np.random.default_rng(29)
    entities = [f"e{i}" for i in range(40)]
    relations = [f"r{i}" for i in range(8)]
    triples = {
        (entities[rng.integers(40)], relations[rng.integers(8)], entities[rng.integers(40)])
        for _ in range(300)
    }
    triples |= {("e0", "r0", "e1"), ("e1", "r1", "e2")}
    g = graph_from_triples(triples)
    cfg, cb, sg = build_pipeline(g, beam=10**6)
    q = question(topic="e0", gold_schema=("r0", "r1"))
    result = retrieve(g, sg, cb, IdfTable(0, {}), q, cfg)
    assert result.plan == ("r0", "r1")
    matching = [sc for sc in result.candidates if sc.path.schema == ("r0", "r1")]
    assert matching and all(sc.sim == pytest.approx(1.0, abs=1e-6) for sc in matching)
    best_sim = max(sc.sim for sc in result.candidates)
    assert max(sc.sim for sc in matching) == best_sim
