"""Byte-exact container for a stream of fixed-width MZRL codewords.

Layout (all integers big-endian)::

    offset  size  field
    0       4     magic "MZRL"
    4       1     version (1)
    5       4     n, the alphabet size
    9       8     source_bit_count
    17      8     codeword_count
    25      ...   payload: codewords, k = ceil(log2 n) bits each, MSB first,
                  concatenated and zero-padded to a whole byte
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from os import PathLike
from typing import Union

import numpy as np

from .codec import CorruptStreamError, encode_block, expand_codewords
from .theory import CodeParams

__all__ = [
    "MAGIC",
    "VERSION",
    "HEADER",
    "CodewordStream",
    "pack_codewords",
    "unpack_codewords",
    "encode_stream",
    "decode_stream",
    "bytes_to_bits",
    "bits_to_bytes",
    "read_stream",
    "write_stream",
]

MAGIC = b"MZRL"
VERSION = 1
HEADER = struct.Struct(">4sBIQQ")
MAX_N = (1 << 32) - 1

# Codewords packed per vectorised step; a multiple of 8 keeps steps byte-aligned.
_PACK_STEP = 1 << 16


def pack_codewords(values: np.ndarray, k: int) -> bytes:
    """Concatenate ``k``-bit values MSB first and pad to a byte boundary."""
    values = np.asarray(values, dtype=np.uint64)
    if values.size == 0:
        return b""
    if k < 64 and int(values.max()) >> k:
        raise ValueError(f"value does not fit in {k} bits")
    if values.size <= _PACK_STEP:
        return _pack(values, k)
    return b"".join(_pack(values[i:i + _PACK_STEP], k)
                    for i in range(0, values.size, _PACK_STEP))


def _pack(values: np.ndarray, k: int) -> bytes:
    octets = values.astype(">u8").view(np.uint8).reshape(-1, 8)
    bits = np.unpackbits(octets, axis=1)[:, 64 - k:]
    return np.packbits(bits.ravel()).tobytes()


def unpack_codewords(payload: bytes, k: int, count: int) -> np.ndarray:
    """Inverse of :func:`pack_codewords`; ``payload`` may carry trailing padding."""
    if count == 0:
        return np.empty(0, dtype=np.int64)
    raw = np.frombuffer(payload, dtype=np.uint8)
    out = np.empty(count, dtype=np.int64)
    step_bytes = _PACK_STEP * k // 8
    for j, i in enumerate(range(0, count, _PACK_STEP)):
        m = min(_PACK_STEP, count - i)
        chunk = raw[j * step_bytes: j * step_bytes + (m * k + 7) // 8]
        bits = np.unpackbits(chunk)[: m * k].reshape(m, k)
        wide = np.zeros((m, 64), dtype=np.uint8)
        wide[:, 64 - k:] = bits
        out[i:i + m] = np.packbits(wide, axis=1).view(">u8").ravel()
    return out


@dataclass(frozen=True)
class CodewordStream:
    n: int
    source_bit_count: int
    codeword_count: int
    payload: bytes

    @property
    def params(self) -> CodeParams:
        return CodeParams(self.n)

    @property
    def payload_bits(self) -> int:
        return self.codeword_count * self.params.k

    def header_bytes(self) -> bytes:
        return HEADER.pack(MAGIC, VERSION, self.n, self.source_bit_count,
                           self.codeword_count)

    def to_bytes(self) -> bytes:
        return self.header_bytes() + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "CodewordStream":
        if len(data) < HEADER.size:
            raise CorruptStreamError(
                f"truncated header: {len(data)} bytes, need {HEADER.size}"
            )
        magic, version, n, source_bits, count = HEADER.unpack_from(data)
        if magic != MAGIC:
            raise CorruptStreamError(f"bad magic {magic!r}, expected {MAGIC!r}")
        if version != VERSION:
            raise CorruptStreamError(f"unsupported version {version}, expected {VERSION}")
        if n < 2:
            raise CorruptStreamError(f"bad n field: {n} (must be >= 2)")
        payload = bytes(data[HEADER.size:])
        k = CodeParams(n).k
        expected = (count * k + 7) // 8
        if len(payload) != expected:
            raise CorruptStreamError(
                f"payload length mismatch: {len(payload)} bytes, header implies {expected}"
            )
        return cls(n, source_bits, count, payload)

    def codewords(self) -> np.ndarray:
        return unpack_codewords(self.payload, self.params.k, self.codeword_count)


def encode_stream(bits: np.ndarray, params: CodeParams) -> CodewordStream:
    if params.n > MAX_N:
        raise ValueError(f"n={params.n} does not fit the 4-byte header field")
    bits = np.asarray(bits, dtype=np.uint8)
    codewords, _, counter = encode_block(bits, params)
    if counter:
        codewords = np.append(codewords, counter)
    return CodewordStream(params.n, int(bits.size), int(codewords.size),
                          pack_codewords(codewords, params.k))


def decode_stream(stream: CodewordStream) -> np.ndarray:
    """Recover exactly ``source_bit_count`` source bits from a stream."""
    params = stream.params
    expected = (stream.codeword_count * params.k + 7) // 8
    if len(stream.payload) != expected:
        raise CorruptStreamError(
            f"payload length mismatch: {len(stream.payload)} bytes, header implies {expected}"
        )
    bits = expand_codewords(stream.codewords(), params)
    if bits.size < stream.source_bit_count:
        raise CorruptStreamError(
            f"truncated stream: codewords expand to {bits.size} bits, "
            f"header declares {stream.source_bit_count}"
        )
    return bits[: stream.source_bit_count]


def bytes_to_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def bits_to_bytes(bits: np.ndarray) -> bytes:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size % 8:
        raise ValueError(f"bit count {bits.size} is not a whole number of bytes")
    return np.packbits(bits).tobytes()


def write_stream(path: Union[str, PathLike], stream: CodewordStream) -> None:
    with open(path, "wb") as fh:
        fh.write(stream.to_bytes())


def read_stream(path: Union[str, PathLike]) -> CodewordStream:
    with open(path, "rb") as fh:
        return CodewordStream.from_bytes(fh.read())
