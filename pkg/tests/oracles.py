"""Independent reference implementations used as test oracles.

These deliberately avoid the library's vectorized code paths: similarity is
a scalar python loop, circular convolution/correlation are direct O(d^2)
evaluations, graph derivations are brute-force double loops, and selection
is a full sort. Each oracle pairs with exactly one production route.
"""

from __future__ import annotations

import math
from itertools import product

import numpy as np


def scalar_blockwise_cosine(x_blocks, y_blocks) -> float:
    """Pure-python blockwise cosine: mean over blocks of
    Re<X_j, Y_j>_F / (||X_j||_F ||Y_j||_F)."""
    total = 0.0
    n_blocks = len(x_blocks)
    for xb, yb in zip(x_blocks, y_blocks):
        num = 0.0
        n2x = 0.0
        n2y = 0.0
        for xv, yv in zip(np.asarray(xb).ravel(), np.asarray(yb).ravel()):
            num += (xv.conjugate() * yv).real
            n2x += (xv.conjugate() * xv).real
            n2y += (yv.conjugate() * yv).real
        total += num / math.sqrt(n2x * n2y)
    return total / n_blocks


def scalar_cosine(x, y) -> float:
    """Pure-python cosine with the real part of the inner product."""
    num = 0.0
    n2x = 0.0
    n2y = 0.0
    for xv, yv in zip(np.asarray(x).ravel(), np.asarray(y).ravel()):
        num += (complex(xv).conjugate() * complex(yv)).real
        n2x += abs(complex(xv)) ** 2
        n2y += abs(complex(yv)) ** 2
    return num / math.sqrt(n2x * n2y)


def direct_circular_convolution(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """O(d^2) evaluation of s_k = sum_i x_i y_{(k-i) mod d}."""
    d = len(x)
    out = np.empty(d)
    for k in range(d):
        out[k] = sum(x[i] * y[(k - i) % d] for i in range(d))
    return out


def direct_circular_correlation(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """O(d^2) evaluation of x_i = sum_k z_k y_{(k-i) mod d} via rolled dots."""
    d = len(z)
    return np.array([np.dot(z, np.roll(y, i)) for i in range(d)])


def brute_force_schema_edges(triples) -> dict[tuple[str, str], int]:
    """Schema-graph edges from the double loop over all triple pairs,
    counting distinct witnessing entities."""
    witnesses: dict[tuple[str, str], set[str]] = {}
    for h1, r1, t1 in triples:
        for h2, r2, t2 in triples:
            if t1 == h2:
                witnesses.setdefault((r1, r2), set()).add(t1)
    return {edge: len(ents) for edge, ents in witnesses.items()}


def exhaustive_plans(successors, start_relations, l_max) -> set[tuple[str, ...]]:
    """DFS enumeration of every edge-consistent schema up to l_max."""
    plans: set[tuple[str, ...]] = set()

    def grow(schema):
        plans.add(schema)
        if len(schema) == l_max:
            return
        for nxt in successors.get(schema[-1], ()):
            grow(schema + (nxt,))

    for r in sorted(start_relations):
        grow((r,))
    return plans


def exhaustive_chains(adjacency, topic, schema) -> set[tuple[str, ...]]:
    """Recursive matcher: every entity chain from `topic` realizing `schema`."""
    chains: set[tuple[str, ...]] = set()

    def walk(chain, depth):
        if depth == len(schema):
            chains.add(chain)
            return
        for tail in adjacency.get((chain[-1], schema[depth]), ()):
            walk(chain + (tail,), depth + 1)

    walk((topic,), 0)
    return chains


def full_sort_selection(scored, k):
    """Reference Top-K: sort everything, take the prefix."""
    ordered = sorted(
        scored,
        key=lambda sc: (-sc.total, len(sc.path.schema), sc.path.schema, sc.path.chain),
    )
    return ordered[:k]


def oracle_calibrated_total(sim: float, idf_value: float, length: int, alpha, beta, lam) -> float:
    """The calibrated score written out literally."""
    return sim + alpha * idf_value - beta * lam**length


def oracle_idf(n_train: int, freq: int) -> float:
    return math.log(1.0 + n_train / (1.0 + freq))
