"""Alphabet-size recommendations for concrete QKD links under a storage budget.

A parameter file is a CSV with the columns::

    system, p_dark, mu, distance_km, loss_db, eta_d,
    storage_bits, bits_per_key, reserved_bits

``loss_db`` is the combined fibre and receiver loss.  Storage is given in
bits; Alice can buffer ``(storage_bits - reserved_bits) // bits_per_key``
original keys, and that count is used as the cap on the alphabet size.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from os import PathLike
from typing import List, Optional, TextIO, Union

from .optimizer import solve_constrained, solve_unconstrained
from .theory import DomainError, LinkBudget, check_solver_rate, count_rate

__all__ = [
    "FIELDS",
    "SystemSpec",
    "Recommendation",
    "RowError",
    "load_systems",
    "default_systems",
    "recommend",
]

FIELDS = ("system", "p_dark", "mu", "distance_km", "loss_db", "eta_d",
          "storage_bits", "bits_per_key", "reserved_bits")


class RowError(ValueError):
    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


@dataclass(frozen=True)
class SystemSpec:
    name: str
    link: LinkBudget
    storage_bits: int
    bits_per_key: int = 1
    reserved_bits: int = 0

    @property
    def n_max(self) -> int:
        return (self.storage_bits - self.reserved_bits) // self.bits_per_key


@dataclass(frozen=True)
class Recommendation:
    system_name: str
    link: LinkBudget
    q: float
    n_theoretical: int
    f_theoretical: float
    storage_limit_bits: int
    n_max: int
    n_recommended: int
    f_actual: float

    def row(self) -> dict:
        return {
            "system": self.system_name,
            "q": self.q,
            "n_theoretical": self.n_theoretical,
            "f_theoretical": self.f_theoretical,
            "storage_bits": self.storage_limit_bits,
            "n_max": self.n_max,
            "n_recommended": self.n_recommended,
            "f_actual": self.f_actual,
        }


def _parse_row(lineno: int, row: dict) -> SystemSpec:
    missing = [f for f in FIELDS if not (row.get(f) or "").strip()]
    if missing:
        raise RowError(lineno, f"missing field(s): {', '.join(missing)}")
    try:
        link = LinkBudget.from_combined_loss(
            mu=float(row["mu"]),
            loss_db=float(row["loss_db"]),
            eta_d=float(row["eta_d"]),
            p_dark=float(row["p_dark"]),
            d=float(row["distance_km"]),
        )
        storage = int(row["storage_bits"])
        per_key = int(row["bits_per_key"])
        reserved = int(row["reserved_bits"])
    except (ValueError, DomainError) as exc:
        raise RowError(lineno, str(exc)) from None
    if per_key < 1:
        raise RowError(lineno, f"bits_per_key must be >= 1, got {per_key}")
    if reserved < 0 or storage - reserved < 2 * per_key:
        raise RowError(lineno, "storage leaves room for fewer than 2 keys")
    return SystemSpec(row["system"].strip(), link, storage, per_key, reserved)


def load_systems(source: Union[str, PathLike, TextIO]) -> List[SystemSpec]:
    if hasattr(source, "read"):
        return _load(source)
    with open(source, newline="") as fh:
        return _load(fh)


def _load(fh: TextIO) -> List[SystemSpec]:
    reader = csv.DictReader(fh)
    absent = [f for f in FIELDS if f not in (reader.fieldnames or [])]
    if absent:
        raise RowError(1, f"missing column(s): {', '.join(absent)}")
    return [_parse_row(lineno, row) for lineno, row in enumerate(reader, start=2)]


def default_systems() -> List[SystemSpec]:
    text = resources.files("mzrl").joinpath("data/systems.csv").read_text()
    return _load(io.StringIO(text))


def recommend(spec: SystemSpec, q: Optional[float] = None) -> Recommendation:
    """Theoretical and storage-constrained alphabet size for one system."""
    if q is None:
        q = count_rate(spec.link)
    q = check_solver_rate(q)
    free = solve_unconstrained(q)
    capped = solve_constrained(q, spec.n_max)
    return Recommendation(
        system_name=spec.name,
        link=spec.link,
        q=q,
        n_theoretical=free.n_opt,
        f_theoretical=free.efficiency,
        storage_limit_bits=spec.storage_bits,
        n_max=spec.n_max,
        n_recommended=capped.n_opt,
        f_actual=capped.efficiency,
    )
