"""MZRL encoder and decoder.

Message ``s_i`` (``i <= n - 2``) is ``i`` zeros followed by a one; message
``s_{n-1}`` is a full segment of ``n - 1`` zeros.  Each message is sent as the
fixed-width codeword ``c_i`` carrying the value ``i``.

Two equivalent paths are provided: :class:`Encoder`/:class:`Decoder` work one
bit or codeword at a time with O(1) state, and :func:`encode_block` /
:func:`expand_codewords` process numpy arrays for throughput.  A block may be
fed with the zero counter left over from the previous block, so long streams
can be handled chunk by chunk.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np

from .theory import CodeParams

__all__ = [
    "CorruptStreamError",
    "ZeroRunMessage",
    "Encoder",
    "Decoder",
    "decode_codeword",
    "encode_bits",
    "encode_block",
    "encode_ones",
    "expansion_lengths",
    "expand_codewords",
    "baseline_position_encode",
]


class CorruptStreamError(ValueError):
    """A codeword stream violates the MZRL container or code invariants."""


@dataclass(frozen=True)
class ZeroRunMessage:
    index: int
    n: int

    @property
    def is_segment(self) -> bool:
        return self.index == self.n - 1

    def __len__(self) -> int:
        return self.n - 1 if self.is_segment else self.index + 1

    def bits(self) -> List[int]:
        if self.is_segment:
            return [0] * (self.n - 1)
        return [0] * self.index + [1]


class Encoder:
    """Streaming source parser and message encoder.

    >>> enc = Encoder(CodeParams(4))
    >>> [c for b in map(int, "0010001100000001") if (c := enc.encode_bit(b)) is not None]
    [2, 3, 0, 0, 3, 3, 1]
    """

    __slots__ = ("params", "zero_counter", "_segment")

    def __init__(self, params: CodeParams, zero_counter: int = 0):
        self.params = params
        self._segment = params.n - 1
        if not 0 <= zero_counter < self._segment:
            raise ValueError(f"zero counter {zero_counter} outside [0, {self._segment})")
        self.zero_counter = zero_counter

    def encode_bit(self, bit: int) -> Optional[int]:
        if bit:
            c = self.zero_counter
            self.zero_counter = 0
            return c
        self.zero_counter += 1
        if self.zero_counter == self._segment:
            self.zero_counter = 0
            return self._segment
        return None

    def flush(self) -> Optional[int]:
        """Codeword for a trailing partial run; the decoder drops its implied one."""
        c = self.zero_counter
        self.zero_counter = 0
        return c if c else None


def decode_codeword(value: int, params: CodeParams) -> ZeroRunMessage:
    if not 0 <= value < params.n:
        raise CorruptStreamError(f"codeword value {value} not below n={params.n}")
    return ZeroRunMessage(int(value), params.n)


class Decoder:
    """Streaming decoder that expands codewords and stops after ``limit`` bits."""

    def __init__(self, params: CodeParams, limit: Optional[int] = None):
        self.params = params
        self.limit = limit
        self.emitted = 0

    def decode(self, value: int) -> List[int]:
        bits = decode_codeword(value, self.params).bits()
        if self.limit is not None:
            bits = bits[: max(0, self.limit - self.emitted)]
        self.emitted += len(bits)
        return bits


def encode_bits(bits: Iterable[int], params: CodeParams) -> List[int]:
    """Encode a finite bit sequence one bit at a time, flush included."""
    enc = Encoder(params)
    out = []
    for b in bits:
        c = enc.encode_bit(b)
        if c is not None:
            out.append(c)
    tail = enc.flush()
    if tail is not None:
        out.append(tail)
    return out


def encode_block(flags: np.ndarray, params: CodeParams,
                 zero_counter: int = 0) -> Tuple[np.ndarray, np.ndarray, int]:
    """Vectorised encoder for one block of detection flags.

    Returns ``(codewords, ends, zero_counter)``.  ``ends[j]`` is the position
    within the block of the bit that completed codeword ``j``.  The returned
    counter is the zero run still open at the end of the block; no flush is
    performed.
    """
    flags = np.asarray(flags)
    return encode_ones(np.flatnonzero(flags), flags.shape[0], params, zero_counter)


def encode_ones(ones: np.ndarray, size: int, params: CodeParams,
                zero_counter: int = 0, positions: bool = True
                ) -> Tuple[np.ndarray, Optional[np.ndarray], int]:
    """:func:`encode_block` for a block given by the sorted positions of its ones.

    With ``positions=False`` the end positions are skipped and returned as None.
    """
    seg = params.n - 1
    ends = None
    if ones.size:
        run_start = np.empty(ones.size, dtype=np.int64)
        run_start[0] = -zero_counter
        run_start[1:] = ones[:-1] + 1
        runs = ones - run_start
        full, rem = np.divmod(runs, seg)
        total = int(full.sum()) + ones.size
        if total == ones.size:
            codewords = rem
            if positions:
                ends = ones.astype(np.int64)
        else:
            counts = full + 1
            last = np.cumsum(counts) - 1
            codewords = np.full(total, seg, dtype=np.int64)
            codewords[last] = rem
            if positions:
                # segment j of a run starting at s ends at s + (j - first + 1) seg - 1
                offset = run_start - (last - full) * seg + (seg - 1)
                ends = np.arange(0, total * seg, seg, dtype=np.int64)
                ends += np.repeat(offset, counts)
                ends[last] = ones
        tail_start = int(ones[-1]) + 1
    else:
        codewords = np.empty(0, dtype=np.int64)
        if positions:
            ends = np.empty(0, dtype=np.int64)
        tail_start = -zero_counter
    tail = size - tail_start
    tail_full, zero_counter = divmod(tail, seg)
    if tail_full:
        codewords = np.concatenate([codewords, np.full(tail_full, seg, dtype=np.int64)])
        if positions:
            ends = np.concatenate(
                [ends, tail_start + np.arange(1, tail_full + 1, dtype=np.int64) * seg - 1]
            )
    return codewords.astype(np.int64, copy=False), ends, int(zero_counter)


def expansion_lengths(codewords: np.ndarray, params: CodeParams) -> np.ndarray:
    """Number of source bits each codeword stands for."""
    cw = np.asarray(codewords, dtype=np.int64)
    seg = params.n - 1
    return np.where(cw < seg, cw + 1, seg)


def expand_codewords(codewords: np.ndarray, params: CodeParams,
                     limit: Optional[int] = None) -> np.ndarray:
    """Vectorised inverse of :func:`encode_block`, as a uint8 bit array."""
    cw = np.asarray(codewords, dtype=np.int64)
    if cw.size and (cw.min() < 0 or cw.max() >= params.n):
        bad = int(np.flatnonzero((cw < 0) | (cw >= params.n))[0])
        raise CorruptStreamError(
            f"codeword at offset {bad} has value {int(cw[bad])}, not below n={params.n}"
        )
    lengths = expansion_lengths(cw, params)
    total = int(lengths.sum())
    bits = np.zeros(total, dtype=np.uint8)
    bits[(np.cumsum(lengths) - 1)[cw < params.n - 1]] = 1
    if limit is not None:
        bits = bits[:limit]
    return bits


def baseline_position_encode(bits: np.ndarray, frame_size: int) -> int:
    """Traffic of announcing each detection by its position within an m-bit frame."""
    if frame_size < 2:
        raise ValueError(f"frame size must be >= 2, got {frame_size}")
    width = (frame_size - 1).bit_length()
    return int(np.count_nonzero(np.asarray(bits))) * width
