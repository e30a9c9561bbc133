"""Versioned binary container for codebooks.

Layout (all integers big-endian):

    bytes 0-7    magic  b"HVCODEBK"
    bytes 8-9    format version (uint16, currently 1)
    bytes 10-17  header length H (uint64)
    H bytes      UTF-8 JSON header: config, ordered symbol list, payload
                 dtype (little-endian numpy code) and per-symbol shape
    rest         raw little-endian C-order payload bytes, one slab per
                 symbol in header order

Round-trips are bit-exact; writing the same codebook twice produces
byte-identical files.
"""

from __future__ import annotations

import json
import struct
from typing import BinaryIO

import numpy as np

from .errors import FormatError
from .vsa import BlockFamily, Codebook, HdcConfig, Hypervector, OperatorFamily

MAGIC = b"HVCODEBK"
FORMAT_VERSION = 1

_PAYLOAD_DTYPES = {
    OperatorFamily.GHRR: "<c16",
    OperatorFamily.FHRR: "<c16",
    OperatorFamily.HRR: "<f8",
    OperatorFamily.REAL_ELEMENTWISE: "<f8",
    OperatorFamily.BIPOLAR_XOR: "|i1",
    OperatorFamily.COMM_MIX: "|i1",
}


def save_codebook(cb: Codebook, stream: BinaryIO) -> None:
    cfg = cb.config
    dtype = _PAYLOAD_DTYPES[cfg.operator]
    shape = list(cb[cb.symbols[0]].payload.shape)
    header = {
        "config": {
            "num_blocks": cfg.num_blocks,
            "block_size": cfg.block_size,
            "operator": cfg.operator.value,
            "seed": cfg.seed,
            "block_family": cfg.block_family.value,
        },
        "symbols": list(cb.symbols),
        "dtype": dtype,
        "payload_shape": shape,
    }
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    stream.write(MAGIC)
    stream.write(struct.pack(">H", FORMAT_VERSION))
    stream.write(struct.pack(">Q", len(raw)))
    stream.write(raw)
    for name in cb.symbols:
        stream.write(np.ascontiguousarray(cb[name].payload, dtype=dtype).tobytes())


def load_codebook(stream: BinaryIO) -> Codebook:
    magic = stream.read(len(MAGIC))
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}; not a codebook container")
    (version,) = struct.unpack(">H", stream.read(2))
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported codebook format version {version}")
    (header_len,) = struct.unpack(">Q", stream.read(8))
    try:
        header = json.loads(stream.read(header_len).decode("utf-8"))
        cfg = HdcConfig(
            num_blocks=header["config"]["num_blocks"],
            block_size=header["config"]["block_size"],
            operator=OperatorFamily(header["config"]["operator"]),
            seed=header["config"]["seed"],
            block_family=BlockFamily(header["config"]["block_family"]),
        )
        symbols = list(header["symbols"])
        dtype = np.dtype(header["dtype"])
        shape = tuple(header["payload_shape"])
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"corrupt codebook header: {exc}") from exc
    slab = int(np.prod(shape)) * dtype.itemsize
    entries = {}
    for name in symbols:
        buf = stream.read(slab)
        if len(buf) != slab:
            raise FormatError(f"truncated payload for symbol {name!r}")
        payload = np.frombuffer(buf, dtype=dtype).reshape(shape)
        entries[name] = Hypervector(cfg.operator, payload)
    return Codebook(cfg, symbols, entries)
