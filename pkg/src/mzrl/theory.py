"""Closed-form statistics of the MZRL code on a Bernoulli(q) detection source.

Everything here is a pure function of its arguments.  Powers of ``1 - q`` are
evaluated as ``exp(n * log1p(-q))`` so that count rates down to 1e-15 and
alphabet sizes up to 2**50 keep full relative precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "DomainError",
    "SolverDomainError",
    "Q_MIN",
    "Q_MAX",
    "CodeParams",
    "LinkBudget",
    "KeyBudget",
    "MessageStats",
    "check_rate",
    "check_solver_rate",
    "pow_complement",
    "run_length_pmf",
    "message_stats",
    "expected_codeword_bits_per_run",
    "expected_message_bits_per_run",
    "expected_codelength",
    "binary_entropy",
    "compression_efficiency",
    "count_rate",
    "buffer_occupancy",
    "latency_in_pulses",
    "key_consumption",
]

#: Count-rate interval on which the optimal-parameter results hold.
Q_MIN = 1e-15
Q_MAX = 0.1

# Term-by-term sums are only attempted up to this alphabet size.
_MAX_EXPLICIT_N = 1 << 27


class DomainError(ValueError):
    """An argument lies outside the domain of a formula."""


class SolverDomainError(DomainError):
    """Count rate outside the interval ``[Q_MIN, Q_MAX]`` accepted by the solvers."""


def check_rate(q: float) -> float:
    q = float(q)
    if not (0.0 < q < 1.0):
        raise DomainError(f"count rate q must lie in (0, 1), got {q!r}")
    return q


def check_solver_rate(q: float) -> float:
    q = float(q)
    if not (Q_MIN <= q <= Q_MAX):
        raise SolverDomainError(
            f"count rate q must lie in [{Q_MIN:g}, {Q_MAX:g}], got {q!r}"
        )
    return q


def pow_complement(q: float, e: float) -> float:
    """``(1 - q) ** e`` without cancellation for tiny ``q``."""
    return math.exp(e * math.log1p(-q))


def _one_minus_pow_complement(q: float, e: float) -> float:
    # 1 - (1 - q)**e
    return -math.expm1(e * math.log1p(-q))


@dataclass(frozen=True)
class CodeParams:
    """Alphabet size ``n`` of an MZRL code and its codeword width ``k``."""

    n: int
    k: int = field(init=False)

    def __post_init__(self) -> None:
        n = self.n
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
            raise DomainError(f"alphabet size must be an integer, got {n!r}")
        n = int(n)
        if n < 2:
            raise DomainError(f"alphabet size must be >= 2, got {n}")
        object.__setattr__(self, "n", n)
        # ceil(log2 n), exact for arbitrarily large n
        object.__setattr__(self, "k", (n - 1).bit_length())

    @classmethod
    def from_width(cls, k: int) -> "CodeParams":
        return cls(1 << int(k))


@dataclass(frozen=True)
class LinkBudget:
    """Physical parameters that fix the per-pulse detection probability.

    Lengths are in km, losses in dB and times in seconds.  When
    ``combined_loss_db`` is set it replaces ``alpha * d + gamma_bob``.
    """

    mu: float
    alpha: float = 0.2
    d: float = 0.0
    gamma_bob: float = 0.0
    eta_d: float = 0.1
    p_dark: float = 0.0
    t_rf: float = 1e-9
    t2: float = 0.0
    t3: float = 0.0
    t4: float = 0.0
    t5: float = 0.0
    combined_loss_db: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("mu", "alpha", "d", "gamma_bob", "eta_d", "p_dark",
                     "t_rf", "t2", "t3", "t4", "t5"):
            value = getattr(self, name)
            if not (value >= 0.0) or math.isinf(value):
                raise DomainError(f"{name} must be finite and non-negative, got {value!r}")
        if self.combined_loss_db is not None and not (self.combined_loss_db >= 0.0):
            raise DomainError(f"combined loss must be non-negative, got {self.combined_loss_db!r}")
        if self.eta_d > 1.0:
            raise DomainError(f"detector efficiency must be <= 1, got {self.eta_d!r}")
        if self.p_dark >= 1.0:
            raise DomainError(f"dark count probability must be < 1, got {self.p_dark!r}")

    @classmethod
    def from_combined_loss(cls, mu: float, loss_db: float, eta_d: float,
                           p_dark: float, d: float = 0.0, **kwargs) -> "LinkBudget":
        """Build a budget from a single loss figure covering fibre and receiver."""
        return cls(mu=mu, d=d, eta_d=eta_d, p_dark=p_dark,
                   combined_loss_db=loss_db, **kwargs)

    @property
    def loss_db(self) -> float:
        if self.combined_loss_db is not None:
            return self.combined_loss_db
        return self.alpha * self.d + self.gamma_bob

    @property
    def latency(self) -> float:
        return self.t2 + self.t3 + self.t4 + self.t5


@dataclass(frozen=True)
class KeyBudget:
    """Authentication cost: ``tag_bits`` secret bits per ``block_bits`` of traffic."""

    tag_bits: int = 127
    block_bits: int = 1 << 20


@dataclass(frozen=True)
class MessageStats:
    """Expected occurrences of each source message per zero run.

    ``weight(i)`` for ``i <= n - 2`` sums to one over those indices, since every
    run ends in exactly one terminating message.  ``weight(n - 1)`` counts the
    full segments and is an expectation, not a probability.
    """

    n: int
    q: float

    def weight(self, i: int) -> float:
        n, q = self.n, self.q
        if not 0 <= i < n:
            raise IndexError(f"message index {i} outside [0, {n - 1}]")
        denom = _one_minus_pow_complement(q, n - 1)
        if i == n - 1:
            return pow_complement(q, n - 1) / denom
        return pow_complement(q, i) * q / denom

    @property
    def per_run_weight(self) -> np.ndarray:
        n, q = self.n, self.q
        if n > _MAX_EXPLICIT_N:
            raise ValueError(f"refusing to materialise {n} weights")
        denom = _one_minus_pow_complement(q, n - 1)
        w = np.empty(n, dtype=np.float64)
        w[:-1] = np.exp(np.arange(n - 1) * math.log1p(-q)) * q / denom
        w[-1] = pow_complement(q, n - 1) / denom
        return w

    @property
    def full_segments(self) -> float:
        return self.weight(self.n - 1)


def run_length_pmf(l: int, q: float) -> float:
    """Probability that a zero run has length exactly ``l``."""
    q = check_rate(q)
    if l < 0:
        raise DomainError(f"run length must be non-negative, got {l}")
    return pow_complement(q, l) * q


def message_stats(params: CodeParams, q: float) -> MessageStats:
    return MessageStats(params.n, check_rate(q))


def expected_codeword_bits_per_run(params: CodeParams, q: float) -> float:
    """Mean number of code bits spent on one zero run (including its one)."""
    q = check_rate(q)
    return params.k / _one_minus_pow_complement(q, params.n - 1)


def expected_message_bits_per_run(params: CodeParams, q: float) -> float:
    """Mean number of source bits covered per zero run, summed term by term.

    The result equals ``1 / q``; it is evaluated from the message weights so
    that the identity can be checked rather than assumed.
    """
    q = check_rate(q)
    n = params.n
    if n > _MAX_EXPLICIT_N:
        raise ValueError(f"term-by-term sum not supported for n={n}")
    stats = MessageStats(n, q)
    total = 0.0
    step = 1 << 20
    log_p = math.log1p(-q)
    denom = _one_minus_pow_complement(q, n - 1)
    for lo in range(0, n - 1, step):
        i = np.arange(lo, min(lo + step, n - 1), dtype=np.float64)
        total += float(np.sum(np.exp(i * log_p) * (i + 1.0))) * q / denom
    return total + stats.weight(n - 1) * (n - 1)


def expected_codelength(params: CodeParams, q: float) -> float:
    """Expected code bits per source bit, ``q k / (1 - (1-q)^(n-1))``."""
    q = check_rate(q)
    return q * params.k / _one_minus_pow_complement(q, params.n - 1)


def binary_entropy(q: float) -> float:
    q = check_rate(q)
    return -q * math.log2(q) - (1.0 - q) * math.log1p(-q) / math.log(2.0)


def compression_efficiency(L: float, q: float) -> float:
    if not L > 0:
        raise DomainError(f"codelength must be positive, got {L!r}")
    return L / binary_entropy(q)


def count_rate(link: LinkBudget) -> float:
    """Per-pulse detection probability of a weak coherent source."""
    transmittance = 10.0 ** (-link.loss_db / 10.0)
    q = -math.expm1(-link.mu * transmittance * link.eta_d) + link.p_dark
    if q >= 1.0:
        raise DomainError(f"count rate evaluates to {q!r} >= 1")
    return q


def buffer_occupancy(params: CodeParams, link: LinkBudget) -> int:
    """Worst-case number of original keys Alice holds before they are sifted."""
    return (params.n - 1) + latency_in_pulses(link)


def latency_in_pulses(link: LinkBudget) -> int:
    """Pipeline latency ``t2 + t3 + t4 + t5`` rounded up to whole pulse periods."""
    if not link.t_rf > 0:
        raise DomainError(f"repetition period must be positive, got {link.t_rf!r}")
    pulses = link.latency / link.t_rf
    nearest = round(pulses)
    if math.isclose(pulses, nearest, rel_tol=1e-12, abs_tol=1e-12):
        return int(nearest)
    return math.ceil(pulses)


def key_consumption(m: int, q: float, f: float,
                    budget: KeyBudget = KeyBudget()) -> int:
    """Secret bits consumed to authenticate the sifting traffic of ``m`` pulses."""
    if m < 0:
        raise DomainError(f"pulse count must be non-negative, got {m}")
    if m == 0:
        return 0
    traffic = m * binary_entropy(q) * f
    return budget.tag_bits * math.ceil(traffic / budget.block_bits)
