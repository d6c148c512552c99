"""Binary 8-bit PGM (P5) reading and writing."""
from __future__ import annotations

import os

import numpy as np

from .exceptions import FormatError


def _tokens(data: bytes):
    """Yield (token, end_offset) for the header, skipping ``#`` comments."""
    i, n = 0, len(data)
    while i < n:
        ch = data[i:i + 1]
        if ch == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < n and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
                j += 1
            yield data[i:j], j
            i = j


def decode_pgm(data: bytes) -> np.ndarray:
    toks = _tokens(data)
    try:
        magic, _ = next(toks)
        if magic != b"P5":
            raise FormatError(f"not a binary PGM (magic {magic!r})")
        width = int(next(toks)[0])
        height = int(next(toks)[0])
        maxval_tok, end = next(toks)
        maxval = int(maxval_tok)
    except (StopIteration, ValueError):
        raise FormatError("truncated or malformed PGM header") from None
    if not (0 < maxval < 256):
        raise FormatError(f"only 8-bit PGM is supported (maxval {maxval})")
    if width < 1 or height < 1:
        raise FormatError("empty image")
    start = end + 1  # single whitespace byte after maxval
    pixels = data[start:start + width * height]
    if len(pixels) != width * height:
        raise FormatError("PGM payload shorter than width*height")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width).copy()


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    """Read a P5 image as a ``(height, width)`` uint8 array."""
    with open(path, "rb") as fh:
        return decode_pgm(fh.read())


def to_uint8(image) -> np.ndarray:
    """Clip to [0, 255] and round half away from zero."""
    a = np.clip(np.asarray(image, dtype=np.float64), 0.0, 255.0)
    return np.floor(a + 0.5).astype(np.uint8)


def encode_pgm(image) -> bytes:
    a = to_uint8(image)
    if a.ndim != 2:
        raise FormatError("PGM images must be 2-D")
    h, w = a.shape
    return b"P5\n%d %d\n255\n" % (w, h) + a.tobytes()


def write_pgm(path: str | os.PathLike, image) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pgm(image))
