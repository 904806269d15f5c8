"""Optimal MZRL alphabet size, unconstrained and under a storage cap."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional

from .theory import (
    CodeParams,
    DomainError,
    binary_entropy,
    check_solver_rate,
    expected_codelength,
)

__all__ = [
    "OptimizerResult",
    "ContinuousRelaxation",
    "stationary_point",
    "codelength_width",
    "codelength_continuous",
    "unimodality_witness",
    "locate_minimum",
    "solve_unconstrained",
    "solve_constrained",
    "iteration_census",
]

_TIE_RTOL = 1e-15


@dataclass(frozen=True)
class OptimizerResult:
    """Outcome of a parameter search.

    ``k_opt`` is always the unconstrained optimum width; ``n_opt`` is the
    chosen alphabet size, which differs from ``2**k_opt`` only when a storage
    cap ``n_max`` is binding.
    """

    q: float
    k_opt: int
    n_opt: int
    L_opt: float
    iterations: int
    n_max: Optional[int] = None

    @property
    def params(self) -> CodeParams:
        return CodeParams(self.n_opt)

    @property
    def entropy(self) -> float:
        return binary_entropy(self.q)

    @property
    def efficiency(self) -> float:
        return self.L_opt / self.entropy

    def to_dict(self) -> dict:
        d = asdict(self)
        d["k"] = self.params.k
        d["h_q"] = self.entropy
        d["f"] = self.efficiency
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerResult":
        return cls(
            q=float(d["q"]),
            k_opt=int(d["k_opt"]),
            n_opt=int(d["n_opt"]),
            L_opt=float(d["L_opt"]),
            iterations=int(d["iterations"]),
            n_max=None if d.get("n_max") is None else int(d["n_max"]),
        )


@dataclass(frozen=True)
class ContinuousRelaxation:
    """Real-valued codeword width ``z0`` minimising the relaxed codelength."""

    q: float
    z_m: float
    z0: float
    residual: float

    @property
    def bracket(self) -> tuple:
        return (self.z_m, self.z_m + 3.0)


def stationary_point(q: float) -> float:
    """``-log2(-ln(1 - q))``, the minimiser of the witness function."""
    return -math.log2(-math.log1p(-q))


def _check_relaxed(z: float, q: float) -> None:
    if not (0.0 < q <= 0.1):
        raise DomainError(f"count rate q must lie in (0, 0.1], got {q!r}")
    if not z >= 1.0:
        raise DomainError(f"codeword width must be >= 1, got {z!r}")


def codelength_width(k: int, q: float) -> float:
    """Expected codelength at integer width ``k`` and ``n = 2**k``."""
    return q * k / -math.expm1((2.0 ** k - 1.0) * math.log1p(-q))


def codelength_continuous(z: float, q: float) -> float:
    _check_relaxed(z, q)
    return q * z / -math.expm1((2.0 ** z - 1.0) * math.log1p(-q))


def unimodality_witness(z: float, q: float) -> float:
    """Function whose sign equals the sign of d/dz of the relaxed codelength.

    ``p - p**(2**z) + z 2**z p**(2**z) ln2 ln p`` with ``p = 1 - q``, written
    with ``log1p``/``expm1`` so the leading ``p - p**(2**z)`` keeps precision.
    """
    _check_relaxed(z, q)
    ln_p = math.log1p(-q)
    x = 2.0 ** z * ln_p
    return -q - math.expm1(x) + z * 2.0 ** z * math.exp(x) * math.log(2.0) * ln_p


def locate_minimum(q: float, tol: float = 1e-9) -> ContinuousRelaxation:
    """Bisect the witness on ``[z_m, z_m + 3]`` for its unique sign change."""
    z_m = stationary_point(q)
    lo, hi = z_m, z_m + 3.0
    r_lo, r_hi = unimodality_witness(lo, q), unimodality_witness(hi, q)
    if not (r_lo < 0.0 < r_hi):
        raise ArithmeticError(
            f"witness does not change sign on [{lo}, {hi}] for q={q!r}"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if unimodality_witness(mid, q) < 0.0:
            lo = mid
        else:
            hi = mid
    z0 = 0.5 * (lo + hi)
    return ContinuousRelaxation(q, z_m, z0, unimodality_witness(z0, q))


def solve_unconstrained(q: float) -> OptimizerResult:
    """Integer-width search starting just below the stationary point.

    Walks upward from ``floor(z_m)`` and stops at the first width whose
    successor is not strictly better.  Each pass of the loop counts as one
    iteration.
    """
    q = check_solver_rate(q)
    k = max(1, math.floor(stationary_point(q)))
    best = codelength_width(k, q)
    iterations = 0
    while True:
        iterations += 1
        k += 1
        trial = codelength_width(k, q)
        # near-ties keep the smaller width
        if best <= trial * (1.0 + _TIE_RTOL):
            break
        best = trial
    k_opt = k - 1
    return OptimizerResult(q=q, k_opt=k_opt, n_opt=1 << k_opt,
                           L_opt=best, iterations=iterations)


def solve_constrained(q: float, n_max: int) -> OptimizerResult:
    """Best alphabet size not exceeding ``n_max``.

    If the unconstrained optimum fits it is returned unchanged; otherwise the
    answer is either the largest power of two below the cap or the cap itself.
    """
    q = check_solver_rate(q)
    n_max = int(n_max)
    if n_max < 2:
        raise DomainError(f"n_max must be >= 2, got {n_max}")
    free = solve_unconstrained(q)
    if n_max >= free.n_opt:
        return OptimizerResult(q, free.k_opt, free.n_opt, free.L_opt,
                               free.iterations, n_max)
    n_pow = 1 << (n_max.bit_length() - 1)
    L_pow = expected_codelength(CodeParams(n_pow), q)
    L_cap = expected_codelength(CodeParams(n_max), q)
    if L_pow > L_cap:
        n_opt, L_opt = n_max, L_cap
    else:
        n_opt, L_opt = n_pow, L_pow
    return OptimizerResult(q, free.k_opt, n_opt, L_opt, free.iterations, n_max)


def iteration_census(q_grid: Iterable[float]) -> tuple:
    """Maximum and mean iteration count of ``solve_unconstrained`` over a grid."""
    counts = [solve_unconstrained(q).iterations for q in q_grid]
    if not counts:
        raise ValueError("empty count-rate grid")
    return max(counts), sum(counts) / len(counts)
