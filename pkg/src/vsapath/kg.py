"""Knowledge-graph store: triples, schema graph, questions, IDF statistics.

File formats
------------
Triples: UTF-8 text, LF line endings, one triple per line as
``head<TAB>relation<TAB>tail``. Lines starting with ``#`` are comments;
blank lines are ignored. Duplicate triples are deduplicated. Relation names
may not contain the schema separator ``->``.

Questions: UTF-8 JSON Lines, one object per line with mandatory fields
``id``, ``text``, ``topic_entity`` and optional ``gold_answers`` (list of
entity names) and ``gold_schema`` (list of relation names).

A Schema is an ordered relation sequence, represented as a plain tuple of
relation names; its canonical serialization joins the names with ``->``.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

from .errors import FormatError, VsapathError

Schema = tuple[str, ...]
Triple = tuple[str, str, str]

SCHEMA_SEP = "->"


def schema_key(schema: Sequence[str]) -> str:
    """Canonical string form used as IdfTable key."""
    return SCHEMA_SEP.join(schema)


@dataclass(frozen=True)
class Graph:
    """Directed multigraph of (head, relation, tail) triples.

    `adjacency` maps (entity, relation) to the sorted tuple of tails; it is
    exactly the triple set re-keyed.
    """

    entities: frozenset[str]
    relations: frozenset[str]
    triples: frozenset[Triple]
    adjacency: Mapping[tuple[str, str], tuple[str, ...]]

    def tails(self, entity: str, relation: str) -> tuple[str, ...]:
        return self.adjacency.get((entity, relation), ())

    def out_relations(self, entity: str) -> set[str]:
        """Relations with at least one outgoing edge from `entity`."""
        return {r for (e, r) in self.adjacency if e == entity}


def graph_from_triples(triples: Iterable[Triple]) -> Graph:
    tripleset = frozenset(triples)
    entities: set[str] = set()
    relations: set[str] = set()
    adj: dict[tuple[str, str], list[str]] = defaultdict(list)
    for h, r, t in tripleset:
        entities.add(h)
        entities.add(t)
        relations.add(r)
        adj[(h, r)].append(t)
    adjacency = {k: tuple(sorted(v)) for k, v in adj.items()}
    return Graph(frozenset(entities), frozenset(relations), tripleset, adjacency)


def load_triples(source: IO[bytes]) -> Graph:
    """Parse a TSV triple stream into a Graph.

    Malformed lines raise FormatError with the 1-based line number; an empty
    stream yields an empty Graph.
    """
    triples: set[Triple] = set()
    for lineno, raw in enumerate(source, start=1):
        line = raw.decode("utf-8").rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3 or not all(fields):
            raise FormatError(
                f"expected 3 tab-separated fields, got {len(fields)}", line=lineno
            )
        head, relation, tail = fields
        if SCHEMA_SEP in relation:
            raise FormatError(
                f"relation name {relation!r} contains reserved separator {SCHEMA_SEP!r}",
                line=lineno,
            )
        triples.add((head, relation, tail))
    return graph_from_triples(triples)


def dump_triples(graph: Graph, stream: IO[bytes]) -> None:
    """Write the triple set in sorted order (losslessly round-trips)."""
    for h, r, t in sorted(graph.triples):
        stream.write(f"{h}\t{r}\t{t}\n".encode("utf-8"))


@dataclass(frozen=True)
class SchemaGraph:
    """Relation-composition graph: edge r_a -> r_b whenever some entity is
    simultaneously a tail of r_a and a head of r_b, with the number of such
    witnessing entities stored per edge."""

    nodes: frozenset[str]
    witness: Mapping[tuple[str, str], int]
    _succ: Mapping[str, tuple[str, ...]]

    def successors(self, relation: str) -> tuple[str, ...]:
        return self._succ.get(relation, ())

    def edge_witnesses(self, r_a: str, r_b: str) -> int:
        return self.witness.get((r_a, r_b), 0)


def build_schema_graph(g: Graph) -> SchemaGraph:
    in_rels: dict[str, set[str]] = defaultdict(set)
    out_rels: dict[str, set[str]] = defaultdict(set)
    for h, r, t in g.triples:
        out_rels[h].add(r)
        in_rels[t].add(r)
    witness: dict[tuple[str, str], int] = defaultdict(int)
    for entity, incoming in in_rels.items():
        outgoing = out_rels.get(entity)
        if not outgoing:
            continue
        for r_a in incoming:
            for r_b in outgoing:
                witness[(r_a, r_b)] += 1
    succ: dict[str, list[str]] = defaultdict(list)
    for r_a, r_b in witness:
        succ[r_a].append(r_b)
    return SchemaGraph(
        nodes=g.relations,
        witness=dict(witness),
        _succ={r: tuple(sorted(s)) for r, s in succ.items()},
    )


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    topic_entity: str
    gold_answers: frozenset[str] | None = None
    gold_schema: Schema | None = None


def load_questions(source: IO[bytes], graph: Graph | None = None) -> list[Question]:
    """Parse a JSON-Lines question stream, optionally validating topics
    against a Graph. Missing mandatory fields raise FormatError naming the
    field; an empty stream yields an empty list."""
    questions: list[Question] = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.decode("utf-8").strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", line=lineno) from exc
        for fieldname in ("id", "text", "topic_entity"):
            if fieldname not in record:
                raise FormatError(f"missing mandatory field {fieldname!r}", line=lineno)
        topic = str(record["topic_entity"])
        if graph is not None and topic not in graph.entities:
            raise FormatError(f"unknown topic entity {topic!r}", line=lineno)
        gold_answers = record.get("gold_answers")
        gold_schema = record.get("gold_schema")
        questions.append(
            Question(
                id=str(record["id"]),
                text=str(record["text"]),
                topic_entity=topic,
                gold_answers=frozenset(map(str, gold_answers)) if gold_answers is not None else None,
                gold_schema=tuple(map(str, gold_schema)) if gold_schema is not None else None,
            )
        )
    return questions


def dump_questions(questions: Iterable[Question], stream: IO[bytes]) -> None:
    for q in questions:
        record: dict = {"id": q.id, "text": q.text, "topic_entity": q.topic_entity}
        if q.gold_answers is not None:
            record["gold_answers"] = sorted(q.gold_answers)
        if q.gold_schema is not None:
            record["gold_schema"] = list(q.gold_schema)
        stream.write((json.dumps(record, sort_keys=True) + "\n").encode("utf-8"))


@dataclass(frozen=True)
class IdfTable:
    """Schema inverse-frequency statistics over a training question set.

    freq maps canonical schema keys to the number of distinct questions
    whose candidate sets contain at least one path with that schema. The
    bonus is log(1 + n_train / (1 + freq)): frequent schemas get a smaller
    bonus, rare ones a larger one, and the value is always >= 0.
    """

    n_train: int
    freq: Mapping[str, int]

    def idf(self, schema: Sequence[str]) -> float:
        f = self.freq.get(schema_key(schema), 0)
        return math.log(1.0 + self.n_train / (1.0 + f))


def compute_idf(
    questions: Sequence[Question],
    candidate_sets: Mapping[str, Sequence[Schema]],
) -> IdfTable:
    """Count, per schema, how many questions' candidate sets contain it.

    A schema appearing several times within one question's candidate set
    counts once. candidate_sets keys must be question ids.
    """
    ids = {q.id for q in questions}
    unknown = set(candidate_sets) - ids
    if unknown:
        raise VsapathError(f"candidate sets reference unknown question ids: {sorted(unknown)}")
    freq: dict[str, int] = defaultdict(int)
    for qid in sorted(candidate_sets):
        for key in {schema_key(s) for s in candidate_sets[qid]}:
            freq[key] += 1
    return IdfTable(n_train=len(questions), freq=dict(freq))
