"""Minimal binary (P5) PGM reading and writing for 8-bit label images."""

from __future__ import annotations

from pathlib import Path

import numpy as np


class PGMFormatError(ValueError):
    pass


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    tokens: list[bytes] = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PGMFormatError("truncated PGM header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def parse_pgm(data: bytes) -> np.ndarray:
    tokens, offset = _header_tokens(data, 4)
    magic, width, height, maxval = tokens
    if magic != b"P5":
        raise PGMFormatError(f"not a binary PGM (magic {magic!r})")
    try:
        w, h, maxv = int(width), int(height), int(maxval)
    except ValueError as exc:
        raise PGMFormatError(f"bad PGM header: {exc}") from None
    if w <= 0 or h <= 0:
        raise PGMFormatError(f"bad PGM dimensions {w}x{h}")
    if not 0 < maxv < 256:
        raise PGMFormatError(f"only 8-bit PGM is supported (maxval {maxv})")
    raster = data[offset : offset + w * h]
    if len(raster) != w * h:
        raise PGMFormatError(f"PGM raster truncated: expected {w * h} bytes, got {len(raster)}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w).copy()


def read_pgm(path) -> np.ndarray:
    """Read a P5 PGM file into a ``(height, width)`` uint8 array."""
    path = Path(path)
    try:
        return parse_pgm(path.read_bytes())
    except PGMFormatError as exc:
        raise PGMFormatError(f"{path}: {exc}") from None


def encode_pgm(image) -> bytes:
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {img.shape}")
    if img.size and (img.min() < 0 or img.max() > 255):
        raise ValueError("pixel values must fit in 8 bits")
    h, w = img.shape
    return b"P5\n%d %d\n255\n" % (w, h) + img.astype(np.uint8).tobytes()


def write_pgm(path, image) -> None:
    Path(path).write_bytes(encode_pgm(image))
