"""Two-endpoint bit sifting over an ordered classical channel.

Bob drops undetected pulses and announces detection positions as MZRL
codewords; Alice keeps her original keys in a FIFO until the codeword covering
them arrives, then discards the undetected ones and keeps the rest as raw key.

Two drivers run the same endpoints:

* ``"interleaved"`` steps both parties on a shared pulse clock in a single
  thread and models the pipeline latency, so Alice's buffer peak is
  meaningful;
* ``"threaded"`` runs Bob and Alice in separate threads joined only by the
  channel (a socket pair for byte channels).  Alice then loads her keys on
  demand, so only the traffic and the sifted keys are comparable.
"""

from __future__ import annotations

import math
import socket
import threading
import time
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .codec import Encoder, encode_ones, expansion_lengths
from .theory import (
    CodeParams,
    KeyBudget,
    LinkBudget,
    binary_entropy,
    check_rate,
    key_consumption,
    latency_in_pulses,
)
from .wire import (
    ByteStreamChannel,
    BytePipe,
    Codewords,
    InProcessChannel,
    Message,
    NullChannel,
    SessionEnd,
    SessionStart,
)

__all__ = [
    "ProtocolError",
    "OriginalKeyRecord",
    "KeyBuffer",
    "BobEndpoint",
    "AliceEndpoint",
    "SiftingReport",
    "SessionOutcome",
    "pulse_chunks",
    "simulate_session",
    "run_session",
    "TimingRow",
    "verify_linear_time",
    "per_pulse_ratio",
]

CHUNK = 1 << 20
FIBRE_SPEED = 2.0e8  # m/s


class ProtocolError(RuntimeError):
    """The message sequence is inconsistent with Alice's buffered keys."""


@dataclass(frozen=True)
class OriginalKeyRecord:
    index: int
    key_bits: int
    detected: bool = False


class KeyBuffer:
    """FIFO of (pulse index, key bits) with a recorded peak occupancy."""

    def __init__(self, capacity: int = 1024) -> None:
        self._idx = np.empty(capacity, dtype=np.int64)
        self._key = np.empty(capacity, dtype=np.uint8)
        self._head = 0
        self._tail = 0
        self.peak = 0

    def __len__(self) -> int:
        return self._tail - self._head

    def _reserve(self, extra: int) -> None:
        live = self._tail - self._head
        if self._tail + extra <= self._idx.size:
            return
        if live + extra > self._idx.size // 2:
            size = max(2 * self._idx.size, 2 * (live + extra))
            idx = np.empty(size, dtype=np.int64)
            key = np.empty(size, dtype=np.uint8)
        else:
            idx, key = self._idx, self._key
        idx[:live] = self._idx[self._head:self._tail]
        key[:live] = self._key[self._head:self._tail]
        self._idx, self._key = idx, key
        self._head, self._tail = 0, live

    def append(self, index: int, key_bits: int) -> None:
        self._reserve(1)
        self._idx[self._tail] = index
        self._key[self._tail] = key_bits
        self._tail += 1
        self.peak = max(self.peak, self._tail - self._head)

    def extend(self, indexes: np.ndarray, keys: np.ndarray) -> None:
        count = len(indexes)
        if not count:
            return
        self._reserve(count)
        self._idx[self._tail:self._tail + count] = indexes
        self._key[self._tail:self._tail + count] = keys
        self._tail += count
        self.peak = max(self.peak, self._tail - self._head)

    def take(self, offsets: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        at = self._head + np.asarray(offsets, dtype=np.int64)
        return self._idx[at], self._key[at]

    def get(self, offset: int) -> Tuple[int, int]:
        at = self._head + offset
        return int(self._idx[at]), int(self._key[at])

    def discard(self, count: int) -> None:
        if count > len(self):
            raise ProtocolError(f"buffer underflow: need {count} keys, hold {len(self)}")
        self._head += count


class BobEndpoint:
    """Undetected-bit removal plus MZRL encoder on Bob's side.

    With ``batch=False`` every codeword is sent as soon as it is formed;
    ``batch=True`` sends one message per processed block.
    """

    def __init__(self, params: CodeParams, channel, batch: bool = False,
                 collect: bool = True) -> None:
        self.params = params
        self.channel = channel
        self.batch = batch
        self.collect = collect
        self.encoder = Encoder(params)
        self.source_bits = 0
        self.codeword_count = 0
        self.detections = 0
        self._raw_idx: List[np.ndarray] = []
        self._raw_key: List[np.ndarray] = []

    @property
    def code_bits_sent(self) -> int:
        return self.codeword_count * self.params.k

    def start(self) -> None:
        self.channel.send(SessionStart(self.params.n))

    def process(self, record: OriginalKeyRecord) -> Optional[int]:
        self.source_bits += 1
        if record.detected:
            self.detections += 1
            if self.collect:
                self._raw_idx.append(np.array([record.index], dtype=np.int64))
                self._raw_key.append(np.array([record.key_bits], dtype=np.uint8))
        c = self.encoder.encode_bit(1 if record.detected else 0)
        if c is not None:
            self.codeword_count += 1
            self.channel.send(Codewords(np.array([c], dtype=np.int64)))
        return c

    def process_block(self, start: int, flags: np.ndarray,
                      keys: Optional[np.ndarray] = None, positions: bool = True
                      ) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """Process consecutive pulses ``start, start + 1, ...``.

        Returns the codewords emitted and the absolute pulse index that
        completed each of them (None when ``positions`` is false; only the
        latency model needs them).
        """
        detected = np.flatnonzero(flags)
        codewords, ends, counter = encode_ones(detected, len(flags), self.params,
                                               self.encoder.zero_counter, positions)
        self.encoder.zero_counter = counter
        self.source_bits += len(flags)
        self.detections += detected.size
        if self.collect and detected.size:
            self._raw_idx.append(detected + start)
            if keys is not None:
                self._raw_key.append(np.asarray(keys)[detected])
        self.codeword_count += codewords.size
        if codewords.size:
            if self.batch:
                self.channel.send(Codewords(codewords))
            else:
                for c in codewords:
                    self.channel.send(Codewords(np.array([c], dtype=np.int64)))
        return codewords, None if ends is None else ends + start

    def finish(self) -> Optional[int]:
        tail = self.encoder.flush()
        flush = np.empty(0, dtype=np.int64) if tail is None else np.array([tail], dtype=np.int64)
        self.codeword_count += flush.size
        self.channel.send(SessionEnd(self.source_bits, self.codeword_count, flush))
        return tail

    def raw_keys(self) -> Tuple[np.ndarray, np.ndarray]:
        return _concat(self._raw_idx, np.int64), _concat(self._raw_key, np.uint8)


class AliceEndpoint:
    """Buffer of original keys plus MZRL decoder on Alice's side."""

    def __init__(self, collect: bool = True) -> None:
        self.buffer = KeyBuffer()
        self.collect = collect
        self.params: Optional[CodeParams] = None
        self.consumed = 0
        self.retained = 0
        self.codewords_received = 0
        self.finished = False
        self.end: Optional[SessionEnd] = None
        self._raw_idx: List[np.ndarray] = []
        self._raw_key: List[np.ndarray] = []

    def push(self, index: int, key_bits: int) -> None:
        self.buffer.append(index, key_bits)

    def push_many(self, indexes: np.ndarray, keys: np.ndarray) -> None:
        self.buffer.extend(indexes, keys)

    def required(self, msg: Message) -> int:
        """Buffered keys needed before ``msg`` can be handled."""
        if isinstance(msg, Codewords):
            return int(expansion_lengths(msg.values, self.params).sum())
        if isinstance(msg, SessionEnd):
            return max(0, msg.source_bit_count - self.consumed)
        return 0

    def handle(self, msg: Message) -> Tuple[np.ndarray, np.ndarray]:
        if isinstance(msg, SessionStart):
            self.params = CodeParams(msg.n)
            return _EMPTY_IDX, _EMPTY_KEY
        if self.params is None:
            raise ProtocolError("codewords received before the session header")
        if self.finished:
            raise ProtocolError("message received after session end")
        if isinstance(msg, Codewords):
            return self._sift(msg.values)
        self.finished = True
        self.end = msg
        out = self._sift(msg.flush, limit=msg.source_bit_count)
        if self.consumed != msg.source_bit_count:
            raise ProtocolError(
                f"session covers {self.consumed} pulses, end frame declares {msg.source_bit_count}"
            )
        if self.codewords_received != msg.codeword_count:
            raise ProtocolError(
                f"received {self.codewords_received} codewords, end frame declares {msg.codeword_count}"
            )
        return out

    def process(self, codeword: int) -> List[OriginalKeyRecord]:
        """Sift for a single codeword; returns the raw keys it releases."""
        idx, key = self._sift(np.array([codeword], dtype=np.int64))
        return [OriginalKeyRecord(int(i), int(b), True) for i, b in zip(idx, key)]

    def _sift(self, values: np.ndarray, limit: Optional[int] = None):
        n = self.params.n
        self.codewords_received += len(values)
        if len(values) == 1 and limit is None:
            c = int(values[0])
            if not 0 <= c < n:
                raise ProtocolError(f"codeword value {c} not below n={n}")
            if c == n - 1:
                self.buffer.discard(n - 1)
                self.consumed += n - 1
                return _EMPTY_IDX, _EMPTY_KEY
            if c >= len(self.buffer):
                raise ProtocolError(
                    f"buffer underflow: need {c + 1} keys, hold {len(self.buffer)}"
                )
            i, b = self.buffer.get(c)
            self.buffer.discard(c + 1)
            self.consumed += c + 1
            self.retained += 1
            idx = np.array([i], dtype=np.int64)
            key = np.array([b], dtype=np.uint8)
            if self.collect:
                self._raw_idx.append(idx)
                self._raw_key.append(key)
            return idx, key
        values = np.asarray(values, dtype=np.int64)
        if values.size == 0:
            return _EMPTY_IDX, _EMPTY_KEY
        if values.min() < 0 or values.max() >= n:
            raise ProtocolError(f"codeword value not below n={n}")
        lengths = expansion_lengths(values, self.params)
        ones = (np.cumsum(lengths) - 1)[values < n - 1]
        total = int(lengths.sum())
        if limit is not None:
            total = min(total, limit - self.consumed)
            ones = ones[ones < total]
        if total > len(self.buffer):
            raise ProtocolError(f"buffer underflow: need {total} keys, hold {len(self.buffer)}")
        idx, key = self.buffer.take(ones)
        self.buffer.discard(total)
        self.consumed += total
        self.retained += ones.size
        if self.collect and ones.size:
            self._raw_idx.append(idx)
            self._raw_key.append(key)
        return idx, key

    def raw_keys(self) -> Tuple[np.ndarray, np.ndarray]:
        return _concat(self._raw_idx, np.int64), _concat(self._raw_key, np.uint8)


_EMPTY_IDX = np.empty(0, dtype=np.int64)
_EMPTY_KEY = np.empty(0, dtype=np.uint8)


def _concat(parts, dtype):
    if not parts:
        return np.empty(0, dtype=dtype)
    return np.concatenate(parts).astype(dtype, copy=False)


@dataclass(frozen=True)
class SiftingReport:
    n: int
    q: float
    source_bits: int
    codeword_count: int
    code_bits_sent: int
    raw_keys: int
    empirical_codelength: float
    empirical_efficiency: float
    key_consumption: int
    buffer_peak: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SessionOutcome:
    report: SiftingReport
    alice_indexes: np.ndarray
    alice_keys: np.ndarray
    bob_indexes: np.ndarray
    bob_keys: np.ndarray
    transcript: Optional[bytes] = None
    delivery_order: List[int] = field(default_factory=list)


def pulse_chunks(m: int, q: float, seed: int, key_width: int = 1,
                 chunk: int = CHUNK) -> Iterator[Tuple[int, np.ndarray, np.ndarray]]:
    """Yield ``(start, detected, key_bits)`` blocks of a seeded pulse train.

    Detection flags are i.i.d. Bernoulli(q); key bits are uniform over
    ``key_width`` bits.  Blocks are deterministic for a given seed and chunk size.
    """
    rng = np.random.default_rng(seed)
    for start in range(0, m, chunk):
        size = min(chunk, m - start)
        flags = rng.random(size) < q
        keys = rng.integers(0, 1 << key_width, size, dtype=np.uint8)
        yield start, flags, keys


def _make_report(params: CodeParams, q: float, bob: BobEndpoint,
                 alice: AliceEndpoint, budget: KeyBudget) -> SiftingReport:
    m = bob.source_bits
    if m == 0:
        return SiftingReport(params.n, q, 0, bob.codeword_count, bob.code_bits_sent,
                             0, 0.0, 0.0, 0, alice.buffer.peak)
    L = bob.code_bits_sent / m
    f = L / binary_entropy(q)
    return SiftingReport(
        n=params.n,
        q=q,
        source_bits=m,
        codeword_count=bob.codeword_count,
        code_bits_sent=bob.code_bits_sent,
        raw_keys=alice.retained,
        empirical_codelength=L,
        empirical_efficiency=f,
        key_consumption=key_consumption(m, q, f, budget),
        buffer_peak=alice.buffer.peak,
    )


def _interleaved(m, q, params, lag, seed, key_width, channel, batch, collect):
    bob = BobEndpoint(params, channel, batch=batch, collect=collect)
    alice = AliceEndpoint(collect=collect)
    bob.start()
    alice.handle(channel.recv())
    pending: deque = deque()  # delivery slot of each message in flight
    for start, flags, keys in pulse_chunks(m, q, seed, key_width):
        stop = start + len(flags)
        codewords, ends = bob.process_block(start, flags, keys)
        if codewords.size:
            if batch:
                pending.append(int(ends[-1]) + lag)
            else:
                pending.extend((ends + lag).tolist())
        pushed = start
        while pending and pending[0] < stop:
            slot = pending.popleft()
            if slot >= pushed:
                alice.push_many(np.arange(pushed, slot + 1), keys[pushed - start:slot + 1 - start])
                pushed = slot + 1
            alice.handle(channel.recv())
        alice.push_many(np.arange(pushed, stop), keys[pushed - start:])
    bob.finish()
    for _ in range(len(pending) + 1):
        alice.handle(channel.recv())
    return bob, alice


def _threaded(m, q, params, seed, key_width, make_channels, batch, collect):
    bob_chan, alice_chan, bob_done, alice_done = make_channels()
    bob = BobEndpoint(params, bob_chan, batch=batch, collect=collect)
    alice = AliceEndpoint(collect=collect)
    errors: List[BaseException] = []

    def run_bob():
        try:
            bob.start()
            for start, flags, keys in pulse_chunks(m, q, seed, key_width):
                bob.process_block(start, flags, keys, positions=False)
            bob.finish()
        except BaseException as exc:  # surfaced after join
            errors.append(exc)
        finally:
            bob_done()

    worker = threading.Thread(target=run_bob, name="bob")
    worker.start()
    source = pulse_chunks(m, q, seed, key_width)
    block: Optional[Tuple[int, np.ndarray]] = None
    offset = 0
    try:
        while not alice.finished:
            msg = alice_chan.recv()
            if isinstance(msg, SessionStart):
                alice.handle(msg)
                continue
            need = alice.required(msg)
            while len(alice.buffer) < need:
                if block is None or offset == len(block[1]):
                    start, _, keys = next(source)
                    block, offset = (start, keys), 0
                take = min(need - len(alice.buffer), len(block[1]) - offset)
                first = block[0] + offset
                alice.push_many(np.arange(first, first + take), block[1][offset:offset + take])
                offset += take
            alice.handle(msg)
    finally:
        alice_done()
        worker.join()
    if errors:
        raise errors[0]
    return bob, alice


def _socket_channels(transcript):
    a, b = socket.socketpair()
    writer = a.makefile("wb", buffering=1 << 16)
    reader = b.makefile("rb", buffering=1 << 16)

    def bob_done():
        try:
            writer.close()
        except OSError:
            pass
        a.close()

    def alice_done():
        reader.close()
        b.close()

    return (ByteStreamChannel(writer=writer, transcript=transcript),
            ByteStreamChannel(reader=reader), bob_done, alice_done)


def simulate_session(m: int, q: float, params: CodeParams,
                     link: Optional[LinkBudget] = None, seed: int = 0, *,
                     driver: str = "interleaved", channel: str = "memory",
                     batch: bool = False, key_width: int = 1, collect: bool = True,
                     budget: KeyBudget = KeyBudget()) -> SessionOutcome:
    """Run a full sifting session and keep both parties' raw keys.

    ``channel`` is ``"memory"`` (message objects) or ``"bytes"`` (framed byte
    stream, whose transcript is returned).  Latencies in ``link`` delay each
    codeword's arrival at Alice; they only matter for the interleaved driver.
    """
    if m < 0:
        raise ValueError(f"pulse count must be non-negative, got {m}")
    q = check_rate(q)
    lag = latency_in_pulses(link) if link is not None else 0
    transcript: Optional[bytearray] = None
    if driver == "interleaved":
        if channel == "memory":
            chan = InProcessChannel()
        elif channel == "bytes":
            transcript = bytearray()
            pipe = BytePipe()
            chan = _Duplex(ByteStreamChannel(writer=pipe, transcript=transcript),
                           ByteStreamChannel(reader=pipe))
        else:
            raise ValueError(f"unknown channel {channel!r}")
        bob, alice = _interleaved(m, q, params, lag, seed, key_width, chan, batch, collect)
    elif driver == "threaded":
        if channel == "memory":
            def make():
                c = InProcessChannel()
                return c, c, lambda: None, lambda: None
        elif channel == "bytes":
            transcript = bytearray()

            def make():
                return _socket_channels(transcript)
        else:
            raise ValueError(f"unknown channel {channel!r}")
        bob, alice = _threaded(m, q, params, seed, key_width, make, batch, collect)
    else:
        raise ValueError(f"unknown driver {driver!r}")
    report = _make_report(params, q, bob, alice, budget)
    a_idx, a_key = alice.raw_keys()
    b_idx, b_key = bob.raw_keys()
    return SessionOutcome(report, a_idx, a_key, b_idx, b_key,
                          None if transcript is None else bytes(transcript))


class _Duplex:
    """Pairs Bob's sending end and Alice's receiving end of one byte channel."""

    def __init__(self, tx: ByteStreamChannel, rx: ByteStreamChannel) -> None:
        self.tx, self.rx = tx, rx

    def send(self, msg: Message) -> None:
        self.tx.send(msg)

    def recv(self) -> Message:
        return self.rx.recv()


def run_session(m: int, q: float, params: CodeParams,
                link: Optional[LinkBudget] = None, seed: int = 0,
                **kwargs) -> SiftingReport:
    """Run a session and return only its report."""
    kwargs.setdefault("collect", False)
    return simulate_session(m, q, params, link, seed, **kwargs).report


def fibre_latency(d_km: float) -> float:
    """One-way propagation delay over ``d_km`` of fibre, in seconds."""
    return d_km * 1e3 / FIBRE_SPEED


@dataclass(frozen=True)
class TimingRow:
    m: int
    n: int
    seconds: float

    @property
    def ns_per_pulse(self) -> float:
        return 1e9 * self.seconds / self.m if self.m else 0.0


def verify_linear_time(sizes: Sequence[int], params: CodeParams, q: float = 0.01,
                       seed: int = 0, repeats: int = 1) -> List[TimingRow]:
    """Time Bob's processing of ``m`` pulses for each size.

    Pulse generation is excluded; codewords go to a discarding channel in
    batch mode.  Each size keeps the best of ``repeats`` runs.
    """
    sizes = list(sizes)
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be strictly increasing")
    rows = []
    for m in sizes:
        best = math.inf
        for _ in range(repeats):
            bob = BobEndpoint(params, NullChannel(), batch=True, collect=True)
            elapsed = 0.0
            for start, flags, keys in pulse_chunks(m, q, seed):
                t0 = time.perf_counter()
                bob.process_block(start, flags, keys, positions=False)
                elapsed += time.perf_counter() - t0
            best = min(best, elapsed)
        rows.append(TimingRow(m, params.n, best))
    return rows


def per_pulse_ratio(rows: Sequence[TimingRow]) -> float:
    """Largest over smallest per-pulse time."""
    rates = [r.ns_per_pulse for r in rows]
    return max(rates) / min(rates)
