"""Byte-aligned codec for ternary messages.

Layout (little-endian)::

    offset 0   u8    format version (1)
    offset 1   u32   element count d
    offset 5   f64   threshold r
    offset 13  u8[ceil(d / 5)]  payload

Each payload byte packs up to five trits as radix-3 digits, first element
least significant, with digit = level + 1 (so -1 -> 0, 0 -> 1, +1 -> 2).
A short final group only holds the remaining digits, so every byte is at
most 242. A ``.tern`` file is a plain concatenation of codewords.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

VERSION = 1
TRITS_PER_BYTE = 5
_HEADER = struct.Struct("<BId")
HEADER_BITS = 8 * 5  # version byte + u32 count
THRESHOLD_BITS = 64
_POW3 = 3 ** np.arange(TRITS_PER_BYTE, dtype=np.int64)


class MalformedCodeword(ValueError):
    pass


@dataclass(frozen=True)
class TernaryCodeword:
    d: int
    r: float
    payload: bytes
    version: int = VERSION

    def to_bytes(self) -> bytes:
        return _HEADER.pack(self.version, self.d, self.r) + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "TernaryCodeword":
        cw, used = _parse(memoryview(data), 0)
        if used != len(data):
            raise MalformedCodeword(f"{len(data) - used} trailing bytes after payload")
        return cw


def payload_length(d: int) -> int:
    return -(-d // TRITS_PER_BYTE)


def encode(levels, r: float) -> TernaryCodeword:
    levels = np.asarray(levels).ravel()
    if levels.size and not np.all(np.isin(levels, (-1, 0, 1))):
        raise ValueError("levels must lie in {-1, 0, +1}")
    d = levels.size
    if d >= 2**32:
        raise ValueError("too many elements for a u32 count")
    digits = np.zeros(payload_length(d) * TRITS_PER_BYTE, dtype=np.int64)
    digits[:d] = levels.astype(np.int64) + 1
    payload = (digits.reshape(-1, TRITS_PER_BYTE) @ _POW3).astype(np.uint8)
    return TernaryCodeword(d, float(r), payload.tobytes())


def decode(c: TernaryCodeword) -> tuple[np.ndarray, float]:
    """Inverse of :func:`encode`; returns ``(levels, r)`` with int8 levels."""
    if c.version != VERSION:
        raise MalformedCodeword(f"unsupported version {c.version} (expected {VERSION})")
    nbytes = payload_length(c.d)
    if len(c.payload) != nbytes:
        raise MalformedCodeword(f"payload has {len(c.payload)} bytes but d = {c.d} needs {nbytes}")
    raw = np.frombuffer(c.payload, dtype=np.uint8).astype(np.int64)
    if raw.size and raw.max() > 242:
        bad = int(np.argmax(raw > 242))
        raise MalformedCodeword(f"payload byte {bad} = {raw[bad]} exceeds 242")
    tail = c.d - (nbytes - 1) * TRITS_PER_BYTE
    if nbytes and raw[-1] >= 3**tail:
        raise MalformedCodeword(f"final byte {raw[-1]} holds more than {tail} digits")
    digits = (raw[:, None] // _POW3) % 3
    levels = (digits.ravel()[: c.d] - 1).astype(np.int8)
    return levels, c.r


def compression_ratio(d: int) -> float:
    """32-bit floats versus one codeword carrying ``d`` trits."""
    if d < 1:
        raise ValueError("d must be at least 1")
    return 32.0 * d / (8 * payload_length(d) + HEADER_BITS + THRESHOLD_BITS)


def _parse(buf: memoryview, offset: int) -> tuple[TernaryCodeword, int]:
    if len(buf) - offset < _HEADER.size:
        raise MalformedCodeword("truncated header")
    version, d, r = _HEADER.unpack_from(buf, offset)
    if version != VERSION:
        raise MalformedCodeword(f"unsupported version {version} (expected {VERSION})")
    start = offset + _HEADER.size
    end = start + payload_length(d)
    if end > len(buf):
        raise MalformedCodeword(f"truncated payload: need {end - start} bytes, have {len(buf) - start}")
    cw = TernaryCodeword(d, r, bytes(buf[start:end]), version)
    decode(cw)
    return cw, end


def iter_codewords(data: bytes) -> Iterator[TernaryCodeword]:
    buf = memoryview(data)
    pos = 0
    while pos < len(buf):
        cw, pos = _parse(buf, pos)
        yield cw


def write_tern(path, codewords: Iterable[TernaryCodeword]) -> int:
    """Write codewords back to back; returns the number of bytes written."""
    blob = b"".join(c.to_bytes() for c in codewords)
    Path(path).write_bytes(blob)
    return len(blob)


def read_tern(path) -> list[TernaryCodeword]:
    return list(iter_codewords(Path(path).read_bytes()))
