"""Versioned binary container for block measurements.

Layout (all integers little-endian)::

    magic            8 bytes  b"SCBCSMF\\0"
    version          u16      (currently 1)
    width, height    u32, u32
    block, interior  u32, u32
    M                u32
    kind             u8       0 = DSS, 1 = Gaussian
    generator_id     u16 length + UTF-8 bytes
    seed             u64
    per_block_seed   u8
    block_count      u32
    payload          block_count * M float64, row-major block order

Matrices are not stored; they are regenerated from the header.
"""
from __future__ import annotations

import os
import struct

import numpy as np

from .exceptions import FormatError
from .sensing import DSS, GAUSSIAN, MeasurementSet

MAGIC = b"SCBCSMF\0"
VERSION = 1
_KINDS = {DSS: 0, GAUSSIAN: 1}
_KIND_NAMES = {v: k for k, v in _KINDS.items()}

_HEAD = struct.Struct("<8sHIIIIIB")
_TAIL = struct.Struct("<QBI")


def encode_measurements(ms: MeasurementSet) -> bytes:
    gid = ms.generator_id.encode("utf-8")
    height, width = ms.image_shape
    blocks = ms.y.shape[0] * ms.y.shape[1]
    parts = [
        _HEAD.pack(MAGIC, VERSION, width, height, ms.block, ms.interior, ms.M, _KINDS[ms.kind]),
        struct.pack("<H", len(gid)), gid,
        _TAIL.pack(ms.seed & 0xFFFFFFFFFFFFFFFF, int(ms.per_block_seed), blocks),
        np.ascontiguousarray(ms.y, dtype="<f8").tobytes(),
    ]
    return b"".join(parts)


def decode_measurements(data: bytes) -> MeasurementSet:
    try:
        magic, version, width, height, block, interior, M, kind = _HEAD.unpack_from(data, 0)
    except struct.error:
        raise FormatError("truncated measurement header") from None
    if magic != MAGIC:
        raise FormatError("not a measurement file")
    if version != VERSION:
        raise FormatError(f"unsupported measurement file version {version}")
    if kind not in _KIND_NAMES:
        raise FormatError(f"unknown matrix kind code {kind}")
    off = _HEAD.size
    try:
        (glen,) = struct.unpack_from("<H", data, off)
        off += 2
        gid = data[off:off + glen].decode("utf-8")
        off += glen
        seed, per_block, blocks = _TAIL.unpack_from(data, off)
    except (struct.error, UnicodeDecodeError):
        raise FormatError("truncated measurement header") from None
    off += _TAIL.size
    ring2 = block - interior
    if interior < 1 or ring2 < 0 or ring2 % 2:
        raise FormatError("inconsistent block/interior in header")
    gr = (height - ring2) // interior
    gc = (width - ring2) // interior
    if gr * gc != blocks:
        raise FormatError(f"block count {blocks} does not match a {gr}x{gc} grid")
    payload = data[off:]
    if len(payload) != blocks * M * 8:
        raise FormatError("payload size does not match header")
    y = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(gr, gc, M)
    return MeasurementSet(image_shape=(height, width), block=block, interior=interior, M=M,
                          kind=_KIND_NAMES[kind], seed=seed, y=y, generator_id=gid,
                          per_block_seed=bool(per_block))


def write_measurements(path: str | os.PathLike, ms: MeasurementSet) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_measurements(ms))


def read_measurements(path: str | os.PathLike) -> MeasurementSet:
    with open(path, "rb") as fh:
        return decode_measurements(fh.read())
