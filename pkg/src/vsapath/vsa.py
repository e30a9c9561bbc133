"""Hypervector core: representations, codebooks, binding algebra, similarity.

Six operator families over a shared Hypervector container:

    GHRR             block vector of D unitary m x m complex matrices,
                     bind = per-block matrix product (non-commutative),
                     unbind = multiply by the conjugate transpose (exact)
    FHRR             d unit-modulus phasors, bind = elementwise product
    HRR              d reals with unit-modulus Fourier spectrum,
                     bind = circular convolution, unbind = circular correlation
    REAL_ELEMENTWISE d reals, bind = elementwise product,
                     unbind = guarded elementwise division
    BIPOLAR_XOR      d values in {-1,+1}, bind = elementwise product
                     (XOR under the bipolar code), self-inverse
    COMM_MIX         bipolar atoms pre-mixed with an independent bipolar
                     mask; bind = elementwise product

Similarity is the blockwise cosine: mean over blocks of
Re<X_j, Y_j>_F / (||X_j||_F ||Y_j||_F), which reduces to the ordinary cosine
for the flat families. Blocks are stored un-normalized exact unitaries and
norms are divided out here, so GHRR binding never drifts.

All values are deterministic functions of (HdcConfig, symbol list): each
symbol draws from its own counter-based Philox substream keyed by
(seed, symbol index), so inserting new symbols never perturbs existing ones.
Hypervectors and codebooks are immutable; every operation is pure.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DuplicateSymbolError,
    FamilyMismatchError,
    UnknownSymbolError,
    ZeroNormError,
)

__all__ = [
    "OperatorFamily",
    "BlockFamily",
    "Side",
    "HdcConfig",
    "Hypervector",
    "Codebook",
    "make_codebook",
    "identity_hypervector",
    "negate",
    "bind",
    "unbind",
    "encode_path",
    "similarity",
    "project_embedding",
    "max_unitarity_defect",
    "encode_paths_batch",
    "similarity_batch",
    "path_similarities",
]

# Tolerance for the per-block unitarity invariant ||A*A - I||_max.
UNITARITY_TOL = 1e-9
# Guard for REAL_ELEMENTWISE unbinding (division by near-zero entries).
DIVISION_EPS = 1e-12

# SeedSequence spawn-key domains, so symbol streams and projection streams
# can never collide even under the same integer seed.
_DOMAIN_SYMBOL = 0
_DOMAIN_PROJECTION = 1

# Scratch-buffer budget for the batched scoring kernels. Keeping each
# buffer near 2 MiB holds the fold cache-resident at every dimension, which
# keeps the per-candidate cost flat in d (the O(Nd) scaling fit needs that).
_KERNEL_BUFFER_BYTES = 2 * 2**20
_KERNEL_CHUNK_MAX = 512
_KERNEL_CHUNK_MIN = 16
# Pair-product tables are only cached for small relation vocabularies.
_PAIR_TABLE_MAX_PAIRS = 512
_PAIR_TABLE_MAX_BYTES = 128 * 2**20


class OperatorFamily(str, Enum):
    GHRR = "ghrr"
    FHRR = "fhrr"
    HRR = "hrr"
    REAL_ELEMENTWISE = "real"
    BIPOLAR_XOR = "bipolar"
    COMM_MIX = "comm_mix"


class BlockFamily(str, Enum):
    DIAGONAL_PHASE = "diagonal_phase"
    HOUSEHOLDER_PRODUCT = "householder_product"


class Side(str, Enum):
    """Position of the *known* factor passed to unbind."""

    LEFT_FACTOR = "left"
    RIGHT_FACTOR = "right"


_FLAT_FAMILIES = frozenset(
    {
        OperatorFamily.FHRR,
        OperatorFamily.HRR,
        OperatorFamily.REAL_ELEMENTWISE,
        OperatorFamily.BIPOLAR_XOR,
        OperatorFamily.COMM_MIX,
    }
)


@dataclass(frozen=True)
class HdcConfig:
    """Static hypervector-space parameters.

    For GHRR the flattened dimension is d = num_blocks * block_size**2; the
    flat families use num_blocks as the full vector length and require
    block_size == 1.

    Note: DIAGONAL_PHASE blocks are cheap but diagonal matrices commute, so
    that family loses GHRR's order sensitivity (binding degenerates to an
    FHRR-style phase sum). HOUSEHOLDER_PRODUCT (dense random unitaries built
    from Householder reflectors via QR) is the default.
    """

    num_blocks: int
    block_size: int = 1
    operator: OperatorFamily = OperatorFamily.GHRR
    seed: int = 0
    block_family: BlockFamily = BlockFamily.HOUSEHOLDER_PRODUCT

    def __post_init__(self):
        if self.num_blocks < 1:
            raise ConfigError(f"num_blocks must be >= 1, got {self.num_blocks}")
        if self.block_size < 1:
            raise ConfigError(f"block_size must be >= 1, got {self.block_size}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.operator in _FLAT_FAMILIES and self.block_size != 1:
            raise ConfigError(
                f"operator {self.operator.value} is flat; block_size must be 1, "
                f"got {self.block_size}"
            )

    @property
    def dim(self) -> int:
        """Flattened dimension d."""
        if self.operator is OperatorFamily.GHRR:
            return self.num_blocks * self.block_size**2
        return self.num_blocks


@dataclass(frozen=True)
class Hypervector:
    """Tagged payload for one symbol or composite structure.

    GHRR payload: complex128 array (D, m, m). FHRR: complex128 (d,).
    HRR / REAL_ELEMENTWISE: float64 (d,). BIPOLAR_XOR / COMM_MIX: int8 (d,)
    with values exactly +-1. Payload arrays are read-only.
    """

    family: OperatorFamily
    payload: np.ndarray

    def __post_init__(self):
        self.payload.flags.writeable = False

    @property
    def dim(self) -> int:
        if self.family is OperatorFamily.GHRR:
            d, m, _ = self.payload.shape
            return d * m * m
        return self.payload.shape[0]


def _symbol_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based substream for symbol `index` under `seed`."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_DOMAIN_SYMBOL, index))
    return np.random.Generator(np.random.Philox(ss))


def _random_unitary_blocks(rng: np.random.Generator, count: int, m: int) -> np.ndarray:
    """Haar unitary blocks: QR of a complex Ginibre matrix with phase fix.

    LAPACK's QR is itself a product of Householder reflectors; the diagonal
    phase correction makes the distribution exactly Haar (zero mean), which
    the near-orthogonality tail bound needs.
    """
    z = rng.standard_normal((count, m, m)) + 1j * rng.standard_normal((count, m, m))
    q, r = np.linalg.qr(z / np.sqrt(2.0))
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (diag / np.abs(diag))[:, None, :]


def _diagonal_phase_blocks(rng: np.random.Generator, count: int, m: int) -> np.ndarray:
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(count, m))
    blocks = np.zeros((count, m, m), dtype=np.complex128)
    idx = np.arange(m)
    blocks[:, idx, idx] = np.exp(1j * phases)
    return blocks


def _bipolar(rng: np.random.Generator, d: int) -> np.ndarray:
    return (2 * rng.integers(0, 2, size=d, dtype=np.int8) - 1).astype(np.int8)


def _hrr_atom(rng: np.random.Generator, d: int) -> np.ndarray:
    # Unit-modulus Fourier spectrum ("unitary" vector): exactly unit L2 norm,
    # convolution-closed, and circular-correlation unbinding is exact.
    half = d // 2 + 1
    spec = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=half))
    spec[0] = 1.0 if rng.integers(0, 2) else -1.0
    if d % 2 == 0:
        spec[-1] = 1.0 if rng.integers(0, 2) else -1.0
    return np.fft.irfft(spec, n=d)


def _atom(config: HdcConfig, rng: np.random.Generator) -> Hypervector:
    op = config.operator
    if op is OperatorFamily.GHRR:
        if config.block_family is BlockFamily.DIAGONAL_PHASE:
            payload = _diagonal_phase_blocks(rng, config.num_blocks, config.block_size)
        else:
            payload = _random_unitary_blocks(rng, config.num_blocks, config.block_size)
    elif op is OperatorFamily.FHRR:
        payload = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=config.num_blocks))
    elif op is OperatorFamily.HRR:
        payload = _hrr_atom(rng, config.num_blocks)
    elif op is OperatorFamily.REAL_ELEMENTWISE:
        payload = rng.standard_normal(config.num_blocks)
    elif op is OperatorFamily.BIPOLAR_XOR:
        payload = _bipolar(rng, config.num_blocks)
    elif op is OperatorFamily.COMM_MIX:
        base = _bipolar(rng, config.num_blocks)
        mask = _bipolar(rng, config.num_blocks)
        payload = (base * mask).astype(np.int8)
    else:  # pragma: no cover - exhaustive enum
        raise ConfigError(f"unknown operator family {op}")
    return Hypervector(op, payload)


class Codebook:
    """Immutable symbol -> atomic Hypervector map with a fixed build order.

    Rebuilding from the same (config, ordered symbol list) is bit-identical;
    the per-symbol substreams make the atoms themselves independent of the
    order in which other symbols were added.
    """

    def __init__(self, config: HdcConfig, symbols: Sequence[str], entries: Mapping[str, Hypervector]):
        self.config = config
        self.symbols: tuple[str, ...] = tuple(symbols)
        self._entries = dict(entries)
        self._stacked: np.ndarray | None = None
        self._index: dict[str, int] | None = None
        self._pairs: np.ndarray | None = None
        self._pairs_built = False

    def __getitem__(self, name: str) -> Hypervector:
        try:
            return self._entries[name]
        except KeyError:
            raise UnknownSymbolError(f"symbol not in codebook: {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def stacked_payloads(self) -> tuple[np.ndarray, dict[str, int]]:
        """All payloads stacked along axis 0, plus symbol -> row index.

        Built lazily and cached; used by the batched scoring kernels.
        """
        if self._stacked is None:
            self._stacked = np.stack([self._entries[s].payload for s in self.symbols])
            self._stacked.flags.writeable = False
            self._index = {s: i for i, s in enumerate(self.symbols)}
        assert self._index is not None
        return self._stacked, self._index

    def pair_table(self) -> np.ndarray | None:
        """All length-2 bind products, flattened to (V*V, ...) row-major.

        Entry i*V + j equals matmul(atom_i, atom_j) bitwise, so folds seeded
        from the table reproduce the plain left-fold exactly. Only built for
        small GHRR vocabularies (None otherwise); cached per codebook.
        """
        if not self._pairs_built:
            self._pairs_built = True
            cfg = self.config
            v = len(self.symbols)
            nbytes = v * v * cfg.num_blocks * cfg.block_size**2 * 16
            if (
                cfg.operator is OperatorFamily.GHRR
                and v * v <= _PAIR_TABLE_MAX_PAIRS
                and nbytes <= _PAIR_TABLE_MAX_BYTES
            ):
                stacked, _ = self.stacked_payloads()
                pairs = np.matmul(stacked[:, None], stacked[None, :])
                self._pairs = pairs.reshape(v * v, *stacked.shape[1:])
                self._pairs.flags.writeable = False
        return self._pairs


def make_codebook(config: HdcConfig, symbols: Sequence[str]) -> Codebook:
    """Draw one atomic hypervector per symbol, deterministically.

    Raises DuplicateSymbolError on repeated names; symbols must be non-empty.
    """
    if not symbols:
        raise ConfigError("symbol list must be non-empty")
    seen: set[str] = set()
    for name in symbols:
        if name in seen:
            raise DuplicateSymbolError(f"duplicate symbol name: {name!r}")
        seen.add(name)
    entries = {
        name: _atom(config, _symbol_rng(config.seed, i))
        for i, name in enumerate(symbols)
    }
    return Codebook(config, symbols, entries)


def identity_hypervector(config: HdcConfig) -> Hypervector:
    """The family identity element (bind(x, identity) == x)."""
    op = config.operator
    if op is OperatorFamily.GHRR:
        payload = np.broadcast_to(
            np.eye(config.block_size, dtype=np.complex128),
            (config.num_blocks, config.block_size, config.block_size),
        ).copy()
    elif op is OperatorFamily.FHRR:
        payload = np.ones(config.num_blocks, dtype=np.complex128)
    elif op is OperatorFamily.HRR:
        payload = np.zeros(config.num_blocks)
        payload[0] = 1.0  # unit impulse: the circular-convolution identity
    elif op is OperatorFamily.REAL_ELEMENTWISE:
        payload = np.ones(config.num_blocks)
    else:
        payload = np.ones(config.num_blocks, dtype=np.int8)
    return Hypervector(op, payload)


def negate(x: Hypervector) -> Hypervector:
    """Antipodal vector: similarity(x, negate(x)) == -1."""
    return Hypervector(x.family, -x.payload)


def max_unitarity_defect(x: Hypervector) -> float:
    """||A*A - I||_max over all blocks (GHRR only)."""
    if x.family is not OperatorFamily.GHRR:
        raise FamilyMismatchError("unitarity defect is defined for GHRR only")
    blocks = x.payload
    m = blocks.shape[-1]
    gram = np.matmul(np.conj(np.swapaxes(blocks, -1, -2)), blocks)
    return float(np.abs(gram - np.eye(m)).max())


def _check_pair(x: Hypervector, y: Hypervector) -> None:
    if x.family is not y.family:
        raise FamilyMismatchError(f"operator families differ: {x.family} vs {y.family}")
    if x.payload.shape != y.payload.shape:
        raise FamilyMismatchError(f"shapes differ: {x.payload.shape} vs {y.payload.shape}")


def _phasor_product(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # Explicit real decomposition: unlike the compiler's complex multiply
    # (which may fuse asymmetrically), this commutes bitwise, keeping
    # elementwise binding exactly commutative.
    return (x.real * y.real - x.imag * y.imag) + 1j * (x.real * y.imag + x.imag * y.real)


def bind(x: Hypervector, y: Hypervector) -> Hypervector:
    """Compose two hypervectors; order matters only for GHRR."""
    _check_pair(x, y)
    op = x.family
    if op is OperatorFamily.GHRR:
        out = np.matmul(x.payload, y.payload)
        # Unitarity closure check (a product of unitaries is unitary); cheap
        # enough at desk scale and stripped under `python -O`.
        assert (
            np.abs(
                np.matmul(np.conj(np.swapaxes(out, -1, -2)), out)
                - np.eye(out.shape[-1])
            ).max()
            <= UNITARITY_TOL
        ), "GHRR bind broke per-block unitarity"
    elif op is OperatorFamily.HRR:
        d = x.payload.shape[0]
        out = np.fft.irfft(np.fft.rfft(x.payload) * np.fft.rfft(y.payload), n=d)
    elif op in (OperatorFamily.BIPOLAR_XOR, OperatorFamily.COMM_MIX):
        out = (x.payload * y.payload).astype(np.int8)
    elif op is OperatorFamily.FHRR:
        out = _phasor_product(x.payload, y.payload)
    else:  # REAL elementwise product
        out = x.payload * y.payload
    return Hypervector(op, out)


def unbind(z: Hypervector, y: Hypervector, side: Side = Side.RIGHT_FACTOR) -> Hypervector:
    """Recover the other factor of a binding, given the factor `y`.

    `side` states where `y` sat in the original product: with Z = bind(X, Y),
    unbind(Z, Y, RIGHT_FACTOR) recovers X (as Z Y*) and
    unbind(Z, X, LEFT_FACTOR) recovers Y (as X* Z). Exact for GHRR, FHRR and
    the bipolar families; approximate for HRR (circular correlation) and
    REAL_ELEMENTWISE (guarded division). The flat families are commutative,
    so `side` only matters for GHRR.
    """
    _check_pair(z, y)
    op = z.family
    if op is OperatorFamily.GHRR:
        y_star = np.conj(np.swapaxes(y.payload, -1, -2))
        if side is Side.RIGHT_FACTOR:
            out = np.matmul(z.payload, y_star)
        else:
            out = np.matmul(y_star, z.payload)
    elif op is OperatorFamily.FHRR:
        out = _phasor_product(z.payload, np.conj(y.payload))
    elif op is OperatorFamily.HRR:
        d = z.payload.shape[0]
        out = np.fft.irfft(np.fft.rfft(z.payload) * np.conj(np.fft.rfft(y.payload)), n=d)
    elif op in (OperatorFamily.BIPOLAR_XOR, OperatorFamily.COMM_MIX):
        out = (z.payload * y.payload).astype(np.int8)
    else:  # REAL_ELEMENTWISE: elementwise division with a small-denominator guard
        denom = np.where(
            np.abs(y.payload) >= DIVISION_EPS,
            y.payload,
            np.where(y.payload >= 0.0, DIVISION_EPS, -DIVISION_EPS),
        )
        out = z.payload / denom
    return Hypervector(op, out)


def encode_path(cb: Codebook, relations: Sequence[str]) -> Hypervector:
    """Left-fold of bind over the relation atoms, in path order.

    The empty path yields the family identity so folds are total.
    """
    if not relations:
        return identity_hypervector(cb.config)
    acc = cb[relations[0]]
    for name in relations[1:]:
        acc = bind(acc, cb[name])
    return acc


def _as_float(a: np.ndarray) -> np.ndarray:
    return a.astype(np.float64) if a.dtype == np.int8 else a


def _real_imag(a: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
    if np.iscomplexobj(a):
        return a.real, a.imag
    return a, None


def _block_cos(payloads: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Blockwise cosine of a (n, D, m, m) stack against one (D, m, m) query.

    Re<X, Y>_F is accumulated as sum(xr*yr) + sum(xi*yi) on real views, which
    avoids conjugate copies; the pairwise and batched entry points share this
    kernel, so chunking can never change a score.
    """
    pr, pi = _real_imag(payloads)
    qr, qi = _real_imag(query)
    num = np.einsum("njab,jab->nj", pr, qr)
    n2p = np.einsum("njab,njab->nj", pr, pr)
    n2q = np.einsum("jab,jab->j", qr, qr)
    if pi is not None:
        num += np.einsum("njab,jab->nj", pi, qi)
        n2p += np.einsum("njab,njab->nj", pi, pi)
        n2q += np.einsum("jab,jab->j", qi, qi)
    if not (n2p > 0.0).all() or not (n2q > 0.0).all():
        raise ZeroNormError("zero-norm block in blockwise cosine")
    # sqrt of the product (not product of sqrts) keeps cos(x, x) == 1.0 exact.
    return np.mean(num / np.sqrt(n2p * n2q), axis=1)


def _flat_cos(payloads: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Ordinary cosine of a (n, d) stack against one (d,) query."""
    pr, pi = _real_imag(_as_float(payloads))
    qr, qi = _real_imag(_as_float(query))
    num = np.einsum("nd,d->n", pr, qr)
    n2p = np.einsum("nd,nd->n", pr, pr)
    n2q = np.einsum("d,d->", qr, qr)
    if pi is not None:
        num += np.einsum("nd,d->n", pi, qi)
        n2p += np.einsum("nd,nd->n", pi, pi)
        n2q += np.einsum("d,d->", qi, qi)
    if not (n2p > 0.0).all() or not n2q > 0.0:
        raise ZeroNormError("zero-norm vector in cosine similarity")
    return num / np.sqrt(n2p * n2q)


def similarity(x: Hypervector, y: Hypervector) -> float:
    """Blockwise cosine similarity in [-1, 1].

    GHRR: mean over blocks of Re<X_j, Y_j>_F / (||X_j||_F ||Y_j||_F);
    flat families: ordinary cosine (real part of the inner product for
    complex payloads). Raises ZeroNormError instead of returning NaN.
    """
    _check_pair(x, y)
    if x.family is OperatorFamily.GHRR:
        return float(_block_cos(y.payload[None], x.payload)[0])
    return float(_flat_cos(y.payload[None], x.payload)[0])


# ---------------------------------------------------------------------------
# Batched kernels for exhaustive scoring.
# ---------------------------------------------------------------------------


def encode_paths_batch(cb: Codebook, schemas: Sequence[tuple[str, ...]]) -> np.ndarray:
    """Encode many relation sequences into one stacked payload array.

    GHRR schemas of equal length are folded with batched matmuls, which are
    bitwise-identical to the pairwise bind fold (regression-tested); other
    families (and the empty schema) fall back to encode_path.
    """
    if cb.config.operator is not OperatorFamily.GHRR:
        return np.stack([encode_path(cb, schema).payload for schema in schemas])
    stacked, index = cb.stacked_payloads()
    cfg = cb.config
    out = np.empty(
        (len(schemas), cfg.num_blocks, cfg.block_size, cfg.block_size), dtype=np.complex128
    )
    by_len: dict[int, list[int]] = {}
    for i, schema in enumerate(schemas):
        if len(schema) == 0:
            out[i] = identity_hypervector(cfg).payload
        else:
            by_len.setdefault(len(schema), []).append(i)
    for length, positions in by_len.items():
        try:
            ids = np.array(
                [[index[r] for r in schemas[i]] for i in positions], dtype=np.intp
            )
        except KeyError as exc:
            raise UnknownSymbolError(f"symbol not in codebook: {exc.args[0]!r}") from None
        acc = stacked[ids[:, 0]]
        for hop in range(1, length):
            acc = np.matmul(acc, stacked[ids[:, hop]])
        out[positions] = acc
    return out


def similarity_batch(query: Hypervector, payloads: np.ndarray) -> np.ndarray:
    """Blockwise cosine of one query against a stack of payloads."""
    if query.family is OperatorFamily.GHRR:
        return _block_cos(payloads, query.payload)
    return _flat_cos(payloads, query.payload)


class _Workspace(threading.local):
    """Per-thread scratch buffers for the scoring kernel.

    Page-faulting fresh multi-MB arrays per call costs more than the math at
    desk scale; buffers are single-slot per name (reallocated on shape
    change) so steady-state scoring is allocation-free and threads never
    share scratch memory.
    """

    def __init__(self):
        self.slots: dict[str, np.ndarray] = {}

    def array(self, name: str, shape: tuple[int, ...], dtype) -> np.ndarray:
        arr = self.slots.get(name)
        if arr is None or arr.shape != shape or arr.dtype != dtype:
            arr = np.empty(shape, dtype=dtype)
            self.slots[name] = arr
        return arr


_WS = _Workspace()


def path_similarities(cb: Codebook, query: Hypervector, schemas: Sequence[tuple[str, ...]]) -> np.ndarray:
    """similarity(query, encode_path(cb, schema)) for many schemas at once.

    Fuses the left-fold encode with the blockwise cosine in reusable
    chunked buffers; every value is bitwise-identical to the pairwise route
    (shared cosine kernel, fold steps that match np.matmul on the same
    operands, pair-table seeds equal to the first fold step).
    """
    sims = np.empty(len(schemas))
    if cb.config.operator is not OperatorFamily.GHRR:
        for i, schema in enumerate(schemas):
            sims[i] = similarity(query, encode_path(cb, schema))
        return sims
    stacked, index = cb.stacked_payloads()
    pairs = cb.pair_table()
    vocab = len(cb.symbols)
    cfg = cb.config
    block_bytes = cfg.num_blocks * cfg.block_size**2 * 16
    chunk_len = int(np.clip(_KERNEL_BUFFER_BYTES // block_bytes, _KERNEL_CHUNK_MIN, _KERNEL_CHUNK_MAX))
    shape = (chunk_len, cfg.num_blocks, cfg.block_size, cfg.block_size)
    buf_a = _WS.array("fold_a", shape, np.complex128)
    buf_b = _WS.array("fold_b", shape, np.complex128)
    buf_g = _WS.array("fold_gather", shape, np.complex128)
    qp = query.payload
    for lo in range(0, len(schemas), chunk_len):
        chunk = schemas[lo : lo + chunk_len]
        by_len: dict[int, list[int]] = {}
        for i, schema in enumerate(chunk):
            by_len.setdefault(len(schema), []).append(i)
        for length, positions in by_len.items():
            if length == 0:
                value = _block_cos(identity_hypervector(cfg).payload[None], qp)[0]
                for p in positions:
                    sims[lo + p] = value
                continue
            n = len(positions)
            try:
                ids = np.array(
                    [[index[r] for r in chunk[p]] for p in positions], dtype=np.intp
                )
            except KeyError as exc:
                raise UnknownSymbolError(f"symbol not in codebook: {exc.args[0]!r}") from None
            cur, nxt = buf_a, buf_b
            if length >= 2 and pairs is not None:
                np.take(pairs, ids[:, 0] * vocab + ids[:, 1], axis=0, out=cur[:n])
                hop = 2
            else:
                np.take(stacked, ids[:, 0], axis=0, out=cur[:n])
                hop = 1
            while hop < length:
                np.take(stacked, ids[:, hop], axis=0, out=buf_g[:n])
                np.matmul(cur[:n], buf_g[:n], out=nxt[:n])
                cur, nxt = nxt, cur
                hop += 1
            sims[np.array(positions, dtype=np.intp) + lo] = _block_cos(cur[:n], qp)
    return sims


# ---------------------------------------------------------------------------
# Text-projection queries.
# ---------------------------------------------------------------------------


@lru_cache(maxsize=4)
def _projection_matrix(projection_seed: int, dim: int, d_t: int) -> np.ndarray:
    ss = np.random.SeedSequence(entropy=projection_seed, spawn_key=(_DOMAIN_PROJECTION,))
    rng = np.random.Generator(np.random.Philox(ss))
    p = rng.normal(0.0, 1.0 / np.sqrt(d_t), size=(dim, d_t))
    p.flags.writeable = False
    return p


def project_embedding(projection_seed: int, embedding: np.ndarray, config: HdcConfig) -> Hypervector:
    """Map a sentence embedding into the hypervector space.

    Applies a fixed random map P with N(0, 1/d_t) entries, then packs and
    normalizes per family: GHRR fills blocks row-major with real parts and
    Frobenius-normalizes each block (query blocks are not unitary and are
    only ever used on the query side of the similarity); real/complex flat
    families L2-normalize; bipolar families sign-quantize.
    """
    emb = np.asarray(embedding, dtype=np.float64).ravel()
    if emb.size < 1:
        raise ConfigError("embedding must have at least one component")
    if not np.any(emb != 0.0):
        raise ZeroNormError("cannot project an all-zero embedding")
    p = _projection_matrix(projection_seed, config.dim, emb.size)
    v = p @ emb
    op = config.operator
    if op is OperatorFamily.GHRR:
        blocks = v.reshape(config.num_blocks, config.block_size, config.block_size)
        norms = np.sqrt(np.einsum("jab,jab->j", blocks, blocks))
        if not (norms > 0.0).all():
            raise ZeroNormError("projected query has a zero-norm block")
        return Hypervector(op, (blocks / norms[:, None, None]).astype(np.complex128))
    if op is OperatorFamily.FHRR:
        return Hypervector(op, (v / np.linalg.norm(v)).astype(np.complex128))
    if op in (OperatorFamily.HRR, OperatorFamily.REAL_ELEMENTWISE):
        return Hypervector(op, v / np.linalg.norm(v))
    return Hypervector(op, np.where(v >= 0.0, 1, -1).astype(np.int8))
