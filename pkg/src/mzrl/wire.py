"""Session messages and their byte framing.

A sifting session is a sequence of messages from Bob to Alice::

    SessionStart   once, carries the CodewordStream header (counts zero)
    Codewords      any number, each with one or more packed codewords
    SessionEnd     once, carries the flush codeword (if any) and the
                   definitive source bit and codeword counts

On a byte stream each message is a frame ``tag (1 byte) | length (4 bytes,
big-endian) | body``.  Concatenating the codewords of every frame and taking
the counts from ``SessionEnd`` reproduces the session's :class:`CodewordStream`.
"""

from __future__ import annotations

import queue
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Optional, Union

import numpy as np

from .codec import CorruptStreamError
from .container import (
    HEADER,
    MAGIC,
    VERSION,
    CodewordStream,
    pack_codewords,
    unpack_codewords,
)
from .theory import CodeParams

__all__ = [
    "SessionStart",
    "Codewords",
    "SessionEnd",
    "Message",
    "encode_frame",
    "read_frame",
    "InProcessChannel",
    "ByteStreamChannel",
    "BytePipe",
    "NullChannel",
    "transcript_to_stream",
]

_FRAME = struct.Struct(">cI")
_COUNT = struct.Struct(">I")
_END = struct.Struct(">QQI")


@dataclass(frozen=True)
class SessionStart:
    n: int


@dataclass(frozen=True)
class Codewords:
    values: np.ndarray


@dataclass(frozen=True)
class SessionEnd:
    source_bit_count: int
    codeword_count: int
    flush: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))


Message = Union[SessionStart, Codewords, SessionEnd]


def _pack_counted(values: np.ndarray, k: int) -> bytes:
    values = np.asarray(values, dtype=np.int64)
    if values.size == 1:
        nbytes = (k + 7) // 8
        body = (int(values[0]) << (8 * nbytes - k)).to_bytes(nbytes, "big")
    else:
        body = pack_codewords(values, k)
    return _COUNT.pack(values.size) + body


def _unpack_counted(body: bytes, k: int) -> np.ndarray:
    (count,) = _COUNT.unpack_from(body)
    payload = body[_COUNT.size:]
    if len(payload) != (count * k + 7) // 8:
        raise CorruptStreamError("payload length mismatch in codeword frame")
    if count == 1:
        value = int.from_bytes(payload, "big") >> (8 * len(payload) - k)
        return np.array([value], dtype=np.int64)
    return unpack_codewords(payload, k, count)


def encode_frame(msg: Message, k: Optional[int] = None) -> bytes:
    if isinstance(msg, SessionStart):
        tag, body = b"H", HEADER.pack(MAGIC, VERSION, msg.n, 0, 0)
    elif isinstance(msg, Codewords):
        tag, body = b"C", _pack_counted(msg.values, k)
    elif isinstance(msg, SessionEnd):
        flush = np.asarray(msg.flush, dtype=np.int64)
        tag = b"F"
        body = (_END.pack(msg.source_bit_count, msg.codeword_count, flush.size)
                + pack_codewords(flush, k))
    else:
        raise TypeError(f"not a session message: {msg!r}")
    return _FRAME.pack(tag, len(body)) + body


def _read_exact(stream: BinaryIO, size: int) -> bytes:
    data = stream.read(size)
    if data is None or len(data) != size:
        raise CorruptStreamError(f"stream ended inside a frame ({size} bytes expected)")
    return data


def read_frame(stream: BinaryIO, k: Optional[int] = None) -> Message:
    tag, length = _FRAME.unpack(_read_exact(stream, _FRAME.size))
    body = _read_exact(stream, length)
    if tag == b"H":
        magic, version, n, _, _ = HEADER.unpack(body)
        if magic != MAGIC:
            raise CorruptStreamError(f"bad magic {magic!r} in session header")
        if version != VERSION:
            raise CorruptStreamError(f"unsupported version {version} in session header")
        return SessionStart(n)
    if k is None:
        raise CorruptStreamError("codeword frame before session header")
    if tag == b"C":
        return Codewords(_unpack_counted(body, k))
    if tag == b"F":
        source_bits, count, n_flush = _END.unpack_from(body)
        flush = unpack_codewords(body[_END.size:], k, n_flush)
        return SessionEnd(source_bits, count, flush)
    raise CorruptStreamError(f"unknown frame tag {tag!r}")


class InProcessChannel:
    """Ordered, exactly-once message queue between two endpoints."""

    def __init__(self) -> None:
        self._queue: "queue.SimpleQueue[Message]" = queue.SimpleQueue()

    def send(self, msg: Message) -> None:
        self._queue.put(msg)

    def recv(self) -> Message:
        return self._queue.get()

    def empty(self) -> bool:
        return self._queue.empty()


class BytePipe:
    """Single-threaded in-memory byte FIFO with file-like ``write``/``read``."""

    def __init__(self) -> None:
        self._buf = bytearray()
        self._pos = 0

    def write(self, data: bytes) -> int:
        self._buf += data
        return len(data)

    def read(self, size: int) -> bytes:
        out = bytes(self._buf[self._pos:self._pos + size])
        self._pos += len(out)
        if self._pos > (1 << 20) and self._pos * 2 > len(self._buf):
            del self._buf[:self._pos]
            self._pos = 0
        return out

    def flush(self) -> None:
        pass

    def __len__(self) -> int:
        return len(self._buf) - self._pos


class ByteStreamChannel:
    """Carries session messages as frames over a byte stream.

    Either side may be absent: Bob's end only has a ``writer`` and Alice's end
    only a ``reader``.  Every byte written is also appended to ``transcript``
    when one is given.
    """

    def __init__(self, writer: Optional[BinaryIO] = None,
                 reader: Optional[BinaryIO] = None,
                 transcript: Optional[bytearray] = None) -> None:
        self.writer = writer
        self.reader = reader
        self.transcript = transcript
        self._k_out: Optional[int] = None
        self._k_in: Optional[int] = None

    def send(self, msg: Message) -> None:
        if isinstance(msg, SessionStart):
            self._k_out = CodeParams(msg.n).k
        frame = encode_frame(msg, self._k_out)
        self.writer.write(frame)
        if self.transcript is not None:
            self.transcript += frame
        if isinstance(msg, SessionEnd):
            self.writer.flush()

    def recv(self) -> Message:
        msg = read_frame(self.reader, self._k_in)
        if isinstance(msg, SessionStart):
            self._k_in = CodeParams(msg.n).k
        return msg


class NullChannel:
    """Discards messages; counts codewords.  Used for throughput measurements."""

    def __init__(self) -> None:
        self.codewords = 0

    def send(self, msg: Message) -> None:
        if isinstance(msg, Codewords):
            self.codewords += len(msg.values)


def transcript_to_stream(data: bytes) -> CodewordStream:
    """Rebuild the container form of a session from its byte transcript."""
    pipe = BytePipe()
    pipe.write(data)
    chan = ByteStreamChannel(reader=pipe)
    first = chan.recv()
    if not isinstance(first, SessionStart):
        raise CorruptStreamError("transcript does not begin with a session header")
    params = CodeParams(first.n)
    parts = []
    while True:
        msg = chan.recv()
        if isinstance(msg, Codewords):
            parts.append(msg.values)
        elif isinstance(msg, SessionEnd):
            parts.append(msg.flush)
            break
        else:
            raise CorruptStreamError("second session header in transcript")
    if len(pipe):
        raise CorruptStreamError("trailing bytes after session end")
    values = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
    if values.size != msg.codeword_count:
        raise CorruptStreamError(
            f"codeword count mismatch: {values.size} sent, end frame declares {msg.codeword_count}"
        )
    return CodewordStream(params.n, msg.source_bit_count, int(values.size),
                          pack_codewords(values, params.k))
