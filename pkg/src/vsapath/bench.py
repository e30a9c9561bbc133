"""Monte Carlo harness for the toolkit's statistical guarantees.

Experiments (all seed-reproducible; per-trial Philox substreams so trials
could run in any order or in parallel):

  tail        empirical Pr(|sim| >= eps) for independent atoms across
              dimensions, with 2-sigma noise bands and a least-squares fit
              of the exponential rate constant c in Pr <= 2 exp(-c d eps^2)
  capacity    smallest dimension keeping the max similarity over M random
              distractors below eps in a (1 - delta) fraction of trials,
              against the union-bound prediction d >= log(2M/delta)/(c eps^2)
  separation  the bipolar product-binding guarantee: at
              d = ceil((2/eps^2) log(2M/delta)), the true path scores
              cosine exactly 1 and all M distractors stay below eps with
              frequency >= 1 - delta
  order       mean similarity between a path encoding and a permuted
              re-encoding, per operator family and path length
  scaling     wall time of exhaustive candidate scoring over an N x d grid,
              fitted to t = a*N*d + b

Each experiment serializes to a CSV table (schema-validated before write)
plus a JSON sidecar holding the full configuration and seed.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, VsapathError
from .kg import IdfTable
from .retrieve import CandidatePath, RetrievalConfig, score_candidates
from .vsa import (
    BlockFamily,
    Codebook,
    HdcConfig,
    Hypervector,
    OperatorFamily,
    bind,
    encode_path,
    make_codebook,
    similarity,
)
from .vsa import _atom  # intra-package reuse of the atom samplers

__all__ = [
    "TailExperiment",
    "CapacityExperiment",
    "SeparationExperiment",
    "OrderSensitivityTable",
    "ScalingRun",
    "run_tail_experiment",
    "run_capacity_experiment",
    "run_separation_check",
    "run_order_sensitivity",
    "run_scaling_benchmark",
    "bipolar_tail_bound",
    "separation_dimension",
    "write_table",
]

_DOMAIN_BENCH = 3
_TAIL_CHUNK = 4096
_MAX_ELEMENTS = 1 << 23  # cap on elements per sampled block (~64 MB float64)


def bipolar_tail_bound(d: int, epsilon: float) -> float:
    """Hoeffding bound 2 exp(-eps^2 d / 2) for bipolar cosines."""
    return 2.0 * math.exp(-0.5 * epsilon * epsilon * d)


def separation_dimension(m_distractors: int, epsilon: float, delta: float) -> int:
    """d = ceil((2/eps^2) log(2M/delta)) from the separation guarantee."""
    return math.ceil((2.0 / (epsilon * epsilon)) * math.log(2.0 * m_distractors / delta))


def _bench_rng(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_DOMAIN_BENCH, *key))
    return np.random.Generator(np.random.Philox(ss))


def _bipolar_rows(rng: np.random.Generator, count: int, d: int) -> np.ndarray:
    return (2.0 * rng.integers(0, 2, size=(count, d)) - 1.0).astype(np.float64)


def _hrr_rows(rng: np.random.Generator, count: int, d: int) -> np.ndarray:
    half = d // 2 + 1
    spec = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=(count, half)))
    spec[:, 0] = 2.0 * rng.integers(0, 2, size=count) - 1.0
    if d % 2 == 0:
        spec[:, -1] = 2.0 * rng.integers(0, 2, size=count) - 1.0
    return np.fft.irfft(spec, n=d, axis=-1)


def _unitary_rows(rng: np.random.Generator, count: int, blocks: int, m: int) -> np.ndarray:
    z = rng.standard_normal((count * blocks, m, m)) + 1j * rng.standard_normal(
        (count * blocks, m, m)
    )
    q, r = np.linalg.qr(z / np.sqrt(2.0))
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    return (q * (diag / np.abs(diag))[:, None, :]).reshape(count, blocks, m, m)


def _atom_rows(
    operator: OperatorFamily, rng: np.random.Generator, count: int, d: int, block_size: int
) -> np.ndarray:
    """A batch of independent atoms as one stacked array."""
    if operator is OperatorFamily.GHRR:
        if d % (block_size * block_size) != 0:
            raise ConfigError(f"d={d} is not divisible by block_size^2={block_size**2}")
        return _unitary_rows(rng, count, d // (block_size * block_size), block_size)
    if operator is OperatorFamily.FHRR:
        return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=(count, d)))
    if operator is OperatorFamily.HRR:
        return _hrr_rows(rng, count, d)
    if operator is OperatorFamily.REAL_ELEMENTWISE:
        return rng.standard_normal((count, d))
    # BIPOLAR_XOR and COMM_MIX atoms are identically distributed (the mix of
    # two independent bipolar draws is bipolar).
    return _bipolar_rows(rng, count, d)


def _pair_sims(operator: OperatorFamily, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row-wise blockwise cosine of two stacks of atoms."""
    if operator is OperatorFamily.GHRR:
        num = np.einsum("njab,njab->nj", np.conj(x), y).real
        n2x = np.einsum("njab,njab->nj", np.conj(x), x).real
        n2y = np.einsum("njab,njab->nj", np.conj(y), y).real
        return np.mean(num / np.sqrt(n2x * n2y), axis=1)
    num = np.einsum("nd,nd->n", np.conj(x), y).real
    n2x = np.einsum("nd,nd->n", np.conj(x), x).real
    n2y = np.einsum("nd,nd->n", np.conj(y), y).real
    return num / np.sqrt(n2x * n2y)


# ---------------------------------------------------------------------------
# Tail experiment.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailExperiment:
    operator: OperatorFamily
    block_size: int
    d_values: tuple[int, ...]
    epsilon: float
    trials: int
    seed: int
    rates: tuple[float, ...]  # empirical Pr(|sim| >= eps) per d
    sigmas: tuple[float, ...]  # one-sigma Monte Carlo band per d
    fitted_c: float  # nan when fewer than 2 nonzero rates

    def monotone_within_noise(self, band_sigmas: float = 2.0) -> bool:
        for i in range(len(self.rates) - 1):
            slack = band_sigmas * math.sqrt(self.sigmas[i] ** 2 + self.sigmas[i + 1] ** 2)
            if self.rates[i + 1] > self.rates[i] + slack:
                return False
        return True

    table_columns = (("d", int), ("rate", float), ("sigma", float), ("fitted_c", float))

    def table_rows(self) -> list[tuple]:
        return [
            (d, rate, sigma, self.fitted_c)
            for d, rate, sigma in zip(self.d_values, self.rates, self.sigmas)
        ]

    def meta(self) -> dict:
        return {
            "experiment": "tail",
            "operator": self.operator.value,
            "block_size": self.block_size,
            "d_values": list(self.d_values),
            "epsilon": self.epsilon,
            "trials": self.trials,
            "seed": self.seed,
        }


def run_tail_experiment(
    operator: OperatorFamily,
    d_values: Sequence[int],
    epsilon: float,
    trials: int,
    seed: int = 0,
    block_size: int = 1,
) -> TailExperiment:
    """Exceedance rates of |sim| for independent atom pairs.

    The rate constant c is the least-squares slope of -log(rate) against
    d * eps^2, fitted over dimensions with at least one exceedance.
    """
    if trials < 1000:
        raise ConfigError(f"tail experiments need >= 1000 trials, got {trials}")
    if not 0.0 < epsilon <= 1.0:
        raise ConfigError(f"epsilon must lie in (0, 1], got {epsilon}")
    if any(d < 64 for d in d_values):
        raise ConfigError("tail dimensions must be >= 64")
    rates: list[float] = []
    sigmas: list[float] = []
    for di, d in enumerate(d_values):
        exceed = 0
        chunk_elems = max(1, min(_TAIL_CHUNK, _MAX_ELEMENTS // max(d, 1)))
        done = 0
        chunk_idx = 0
        while done < trials:
            count = min(chunk_elems, trials - done)
            rng = _bench_rng(seed, 0, di, chunk_idx)
            x = _atom_rows(operator, rng, count, d, block_size)
            y = _atom_rows(operator, rng, count, d, block_size)
            sims = _pair_sims(operator, x, y)
            exceed += int(np.count_nonzero(np.abs(sims) >= epsilon))
            done += count
            chunk_idx += 1
        rate = exceed / trials
        rates.append(rate)
        sigmas.append(math.sqrt(max(rate * (1.0 - rate), 1e-300) / trials))
    positive = [(d, r) for d, r in zip(d_values, rates) if r > 0.0]
    if len(positive) >= 2:
        xs = np.array([d * epsilon * epsilon for d, _ in positive])
        ys = np.array([-math.log(r) for _, r in positive])
        fitted_c = float(np.polyfit(xs, ys, 1)[0])
    else:
        fitted_c = float("nan")
    return TailExperiment(
        operator=operator,
        block_size=block_size,
        d_values=tuple(d_values),
        epsilon=epsilon,
        trials=trials,
        seed=seed,
        rates=tuple(rates),
        sigmas=tuple(sigmas),
        fitted_c=fitted_c,
    )


# ---------------------------------------------------------------------------
# Capacity experiment.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CapacityExperiment:
    operator: OperatorFamily
    m_distractors: int
    delta: float
    epsilon: float
    c: float
    trials: int
    seed: int
    measured_d: int  # 0 when not converged
    predicted_d: int
    converged: bool

    table_columns = (
        ("m_distractors", int),
        ("measured_d", int),
        ("predicted_d", int),
        ("converged", int),
    )

    def table_rows(self) -> list[tuple]:
        return [(self.m_distractors, self.measured_d, self.predicted_d, int(self.converged))]

    def meta(self) -> dict:
        return {
            "experiment": "capacity",
            "operator": self.operator.value,
            "m_distractors": self.m_distractors,
            "delta": self.delta,
            "epsilon": self.epsilon,
            "c": self.c,
            "trials": self.trials,
            "seed": self.seed,
        }


def run_capacity_experiment(
    operator: OperatorFamily,
    m_distractors: int,
    delta: float,
    epsilon: float,
    c: float,
    trials: int = 200,
    seed: int = 0,
    block_size: int = 1,
    d_min: int = 64,
    d_max: int = 2**20,
) -> CapacityExperiment:
    """Binary-search the smallest d where max distractor |sim| <= eps holds
    in at least a (1 - delta) fraction of seeded trials."""
    if m_distractors < 1:
        raise ConfigError("need at least one distractor")
    if not 0.0 < delta < 1.0:
        raise ConfigError(f"delta must lie in (0, 1), got {delta}")
    if trials < 200:
        raise ConfigError(f"capacity experiments need >= 200 trials, got {trials}")
    needed = math.ceil((1.0 - delta) * trials)

    def trial_ok(d: int, trial: int) -> bool:
        rng = _bench_rng(seed, 1, d, trial)
        q = _atom_rows(operator, rng, 1, d, block_size)[0]
        rows = max(1, _MAX_ELEMENTS // max(d, 1))
        remaining = m_distractors
        while remaining > 0:
            count = min(rows, remaining)
            distractors = _atom_rows(operator, rng, count, d, block_size)
            sims = _pair_sims(operator, distractors, np.broadcast_to(q, distractors.shape))
            if np.abs(sims).max() > epsilon:
                return False
            remaining -= count
        return True

    def succeeds(d: int) -> bool:
        ok = 0
        for trial in range(trials):
            if trial_ok(d, trial):
                ok += 1
            elif ok + (trials - trial - 1) < needed:
                return False  # cannot reach the threshold any more
        return ok >= needed

    predicted = math.ceil(math.log(2.0 * m_distractors / delta) / (c * epsilon * epsilon))
    hi = d_min
    lo = None
    while not succeeds(hi):
        lo = hi
        hi *= 2
        if hi > d_max:
            return CapacityExperiment(
                operator, m_distractors, delta, epsilon, c, trials, seed, 0, predicted, False
            )
    if lo is None:
        measured = d_min  # already satisfied at the floor
    else:
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if succeeds(mid):
                hi = mid
            else:
                lo = mid
        measured = hi
    return CapacityExperiment(
        operator, m_distractors, delta, epsilon, c, trials, seed, measured, predicted, True
    )


# ---------------------------------------------------------------------------
# Separation check (bipolar product binding).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeparationExperiment:
    n_relations: int
    m_distractors: int
    epsilon: float
    delta: float
    d: int
    trials: int
    seed: int
    success_rate: float
    exact_failures: int  # trials where cos(q, p*) != 1.0 exactly; must be 0

    table_columns = (
        ("d", int),
        ("success_rate", float),
        ("exact_failures", int),
    )

    def table_rows(self) -> list[tuple]:
        return [(self.d, self.success_rate, self.exact_failures)]

    def meta(self) -> dict:
        return {
            "experiment": "separation",
            "n_relations": self.n_relations,
            "m_distractors": self.m_distractors,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "d": self.d,
            "trials": self.trials,
            "seed": self.seed,
        }


def run_separation_check(
    n_relations: int,
    m_distractors: int,
    epsilon: float,
    delta: float,
    trials: int,
    seed: int = 0,
    d: int | None = None,
) -> SeparationExperiment:
    """Plant q = r1 * ... * rn (bipolar product binding) among M distractors
    that each differ from q in exactly one relation, at the guarantee's d."""
    if n_relations < 1:
        raise ConfigError("paths need at least one relation")
    if d is None:
        d = separation_dimension(m_distractors, epsilon, delta)
    successes = 0
    exact_failures = 0
    for trial in range(trials):
        rng = _bench_rng(seed, 2, trial)
        atoms = (2 * rng.integers(0, 2, size=(n_relations, d), dtype=np.int8) - 1).astype(np.int8)
        q = np.prod(atoms, axis=0, dtype=np.int8)
        qf = q.astype(np.float64)
        n2q = float(np.dot(qf, qf))
        cos_star = float(np.dot(qf, qf)) / math.sqrt(n2q * n2q)
        if cos_star != 1.0:
            exact_failures += 1
            continue
        positions = rng.integers(0, n_relations, size=m_distractors)
        fresh = (2 * rng.integers(0, 2, size=(m_distractors, d), dtype=np.int8) - 1).astype(np.int8)
        # Replacing relation at `pos` multiplies out the old atom (self-inverse)
        # and multiplies in the fresh one.
        distractors = (q[None, :] * atoms[positions] * fresh).astype(np.float64)
        cos = (distractors @ qf) / np.sqrt(
            np.einsum("nd,nd->n", distractors, distractors) * n2q
        )
        if np.abs(cos).max() <= epsilon:
            successes += 1
    return SeparationExperiment(
        n_relations=n_relations,
        m_distractors=m_distractors,
        epsilon=epsilon,
        delta=delta,
        d=d,
        trials=trials,
        seed=seed,
        success_rate=successes / trials,
        exact_failures=exact_failures,
    )


# ---------------------------------------------------------------------------
# Order sensitivity.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrderRow:
    operator: OperatorFamily
    length: int
    mean_sim: float
    std_sim: float
    trials: int


@dataclass(frozen=True)
class OrderSensitivityTable:
    rows: tuple[OrderRow, ...]
    seed: int
    ghrr_blocks: int
    block_size: int
    flat_dim: int

    table_columns = (
        ("operator", str),
        ("length", int),
        ("mean_sim", float),
        ("std_sim", float),
        ("trials", int),
    )

    def table_rows(self) -> list[tuple]:
        return [(r.operator.value, r.length, r.mean_sim, r.std_sim, r.trials) for r in self.rows]

    def meta(self) -> dict:
        return {
            "experiment": "order_sensitivity",
            "seed": self.seed,
            "ghrr_blocks": self.ghrr_blocks,
            "block_size": self.block_size,
            "flat_dim": self.flat_dim,
        }

    def row(self, operator: OperatorFamily, length: int) -> OrderRow:
        for r in self.rows:
            if r.operator is operator and r.length == length:
                return r
        raise KeyError((operator, length))


def _family_config(
    operator: OperatorFamily, ghrr_blocks: int, block_size: int, flat_dim: int, seed: int
) -> HdcConfig:
    if operator is OperatorFamily.GHRR:
        return HdcConfig(
            num_blocks=ghrr_blocks,
            block_size=block_size,
            operator=operator,
            seed=seed,
            block_family=BlockFamily.HOUSEHOLDER_PRODUCT,
        )
    return HdcConfig(num_blocks=flat_dim, operator=operator, seed=seed)


def run_order_sensitivity(
    families: Sequence[OperatorFamily],
    lengths: Sequence[int],
    trials: int,
    seed: int = 0,
    ghrr_blocks: int = 256,
    block_size: int = 4,
    flat_dim: int = 4096,
) -> OrderSensitivityTable:
    """Mean similarity between a random path encoding and a random
    non-identity permutation of the same relations, per family and length."""
    if any(not 2 <= length <= 8 for length in lengths):
        raise ConfigError("path lengths must lie in [2, 8]")
    rows: list[OrderRow] = []
    for fi, family in enumerate(families):
        config = _family_config(family, ghrr_blocks, block_size, flat_dim, seed)
        for length in lengths:
            sims = np.empty(trials)
            for trial in range(trials):
                rng = _bench_rng(seed, 3, fi, length, trial)
                atoms = [_atom(config, rng) for _ in range(length)]
                perm = rng.permutation(length)
                while (perm == np.arange(length)).all():
                    perm = rng.permutation(length)
                forward = atoms[0]
                for a in atoms[1:]:
                    forward = bind(forward, a)
                shuffled = atoms[perm[0]]
                for i in perm[1:]:
                    shuffled = bind(shuffled, atoms[i])
                sims[trial] = similarity(forward, shuffled)
            rows.append(
                OrderRow(
                    operator=family,
                    length=length,
                    mean_sim=float(sims.mean()),
                    std_sim=float(sims.std()),
                    trials=trials,
                )
            )
    return OrderSensitivityTable(
        rows=tuple(rows),
        seed=seed,
        ghrr_blocks=ghrr_blocks,
        block_size=block_size,
        flat_dim=flat_dim,
    )


# ---------------------------------------------------------------------------
# Scaling benchmark.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingRun:
    n_values: tuple[int, ...]
    d_values: tuple[int, ...]
    times_s: tuple[tuple[float, ...], ...]  # [i][j] -> (n_values[i], d_values[j])
    coeff: float  # a in t = a*N*d + b
    intercept: float
    r_squared: float
    max_rel_deviation: float
    seed: int
    path_length: int
    repeats: int

    table_columns = (("n", int), ("d", int), ("time_s", float))

    def table_rows(self) -> list[tuple]:
        return [
            (n, d, self.times_s[i][j])
            for i, n in enumerate(self.n_values)
            for j, d in enumerate(self.d_values)
        ]

    def meta(self) -> dict:
        return {
            "experiment": "scaling",
            "n_values": list(self.n_values),
            "d_values": list(self.d_values),
            "coeff": self.coeff,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "max_rel_deviation": self.max_rel_deviation,
            "seed": self.seed,
            "path_length": self.path_length,
            "repeats": self.repeats,
        }


def run_scaling_benchmark(
    n_values: Sequence[int],
    d_values: Sequence[int],
    path_length: int = 3,
    repeats: int = 5,
    seed: int = 0,
    block_size: int = 4,
    vocab: int = 32,
) -> ScalingRun:
    """Median wall time of score_candidates over the N x d grid, fitted to
    t = a*N*d + b. Candidates carry all-distinct schemas so the encoding
    work scales with N like the similarity work does."""
    if len(n_values) < 4 or len(d_values) < 4:
        raise ConfigError("scaling runs need at least 4 grid points per axis")
    rng = _bench_rng(seed, 4)
    space = vocab**path_length
    if max(n_values) > space:
        raise ConfigError(
            f"cannot draw {max(n_values)} distinct schemas from {space} combinations"
        )
    times: list[list[float]] = []
    for n in n_values:
        row: list[float] = []
        codes = rng.choice(space, size=n, replace=False)
        schemas = []
        for code in codes:
            digits = []
            value = int(code)
            for _ in range(path_length):
                digits.append(value % vocab)
                value //= vocab
            schemas.append(tuple(f"s{digit:03d}" for digit in digits))
        chain = tuple(f"x{i}" for i in range(path_length + 1))
        candidates = [CandidatePath(schema, chain) for schema in schemas]
        for d in d_values:
            if d % (block_size * block_size) != 0:
                raise ConfigError(f"d={d} is not divisible by block_size^2")
            hdc = HdcConfig(
                num_blocks=d // (block_size * block_size),
                block_size=block_size,
                operator=OperatorFamily.GHRR,
                seed=seed,
            )
            cfg = RetrievalConfig(hdc=hdc)
            cb = make_codebook(hdc, [f"s{i:03d}" for i in range(vocab)])
            query = encode_path(cb, schemas[0])
            idf = IdfTable(n_train=0, freq={})
            score_candidates(cb, query, candidates[: min(64, n)], idf, cfg)  # warm-up
            samples = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                score_candidates(cb, query, candidates, idf, cfg)
                samples.append(time.perf_counter() - t0)
            row.append(float(np.median(samples)))
        times.append(row)

    nd = np.array([n * d for n in n_values for d in d_values], dtype=np.float64)
    ts = np.array([times[i][j] for i in range(len(n_values)) for j in range(len(d_values))])
    design = np.stack([nd, np.ones_like(nd)], axis=1)
    (coeff, intercept), *_ = np.linalg.lstsq(design, ts, rcond=None)
    pred = design @ np.array([coeff, intercept])
    ss_res = float(np.sum((ts - pred) ** 2))
    ss_tot = float(np.sum((ts - ts.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    max_rel = float(np.max(np.abs(pred - ts) / ts))
    return ScalingRun(
        n_values=tuple(n_values),
        d_values=tuple(d_values),
        times_s=tuple(tuple(row) for row in times),
        coeff=float(coeff),
        intercept=float(intercept),
        r_squared=r_squared,
        max_rel_deviation=max_rel,
        seed=seed,
        path_length=path_length,
        repeats=repeats,
    )


# ---------------------------------------------------------------------------
# Table emission.
# ---------------------------------------------------------------------------

_COLUMN_TYPES = {int: (int, np.integer), float: (float, int, np.floating, np.integer), str: (str,)}


def write_table(experiment, path: str | Path) -> Path:
    """Schema-validate and write an experiment table as CSV, with a JSON
    sidecar (same stem, .meta.json) recording the full config and seed."""
    path = Path(path)
    columns = experiment.table_columns
    rows = experiment.table_rows()
    for row in rows:
        if len(row) != len(columns):
            raise VsapathError(
                f"row width {len(row)} does not match schema width {len(columns)}"
            )
        for value, (name, kind) in zip(row, columns):
            if not isinstance(value, _COLUMN_TYPES[kind]):
                raise VsapathError(
                    f"column {name!r} expects {kind.__name__}, got {type(value).__name__}"
                )
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([name for name, _ in columns])
        writer.writerows(rows)
    sidecar = path.with_suffix(path.suffix + ".meta.json")
    with sidecar.open("w") as fh:
        json.dump(experiment.meta(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
