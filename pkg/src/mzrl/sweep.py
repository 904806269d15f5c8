"""Optimal-parameter sweeps over log-spaced count rates."""

from __future__ import annotations

import csv
from dataclasses import astuple, dataclass, fields
from typing import List, TextIO

import numpy as np

from .optimizer import solve_unconstrained
from .theory import check_solver_rate


@dataclass(frozen=True)
class SweepRow:
    q: float
    k_opt: int
    n_opt: int
    L: float
    h_q: float
    f: float
    iterations: int


COLUMNS = tuple(f.name for f in fields(SweepRow))


def log_grid(q_min: float, q_max: float, points: int) -> np.ndarray:
    """``points`` log-spaced rates, both ends included."""
    check_solver_rate(q_min)
    check_solver_rate(q_max)
    if points < 1:
        raise ValueError(f"need at least one point, got {points}")
    if q_min > q_max:
        raise ValueError(f"q_min {q_min} exceeds q_max {q_max}")
    if points == 1:
        return np.array([q_min])
    return np.logspace(np.log10(q_min), np.log10(q_max), points)


def sweep(q_min: float = 1e-6, q_max: float = 0.1, points: int = 100) -> List[SweepRow]:
    rows = []
    for q in log_grid(q_min, q_max, points):
        res = solve_unconstrained(float(q))
        rows.append(SweepRow(res.q, res.k_opt, res.n_opt, res.L_opt,
                             res.entropy, res.efficiency, res.iterations))
    return rows


def write_csv(rows: List[SweepRow], fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in astuple(row)])


def read_csv(fh: TextIO) -> List[SweepRow]:
    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != COLUMNS:
        raise ValueError(f"unexpected columns {reader.fieldnames}")
    return [SweepRow(float(r["q"]), int(r["k_opt"]), int(r["n_opt"]), float(r["L"]),
                     float(r["h_q"]), float(r["f"]), int(r["iterations"]))
            for r in reader]
