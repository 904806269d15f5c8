"""Figures for sweep results.  Rendered off-screen straight to files."""

from __future__ import annotations

import math
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def figsize(scale: float = 1.0, rows: int = 1):
    width = 5.5 * scale
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    return width, width * golden * rows * 0.6


def plot_sweep(rows: Sequence, path) -> None:
    """Three stacked panels against q: optimal width, codelength, efficiency.

    ``rows`` are objects with ``q, k_opt, L, h_q, f`` attributes.
    """
    q = [r.q for r in rows]
    with plt.rc_context(STYLE):
        fig, (ax_k, ax_l, ax_f) = plt.subplots(3, 1, sharex=True,
                                               figsize=figsize(rows=3))
        ax_k.step(q, [r.k_opt for r in rows], where="mid")
        ax_k.set_ylabel(r"$k_{opt}$")

        ax_l.loglog(q, [r.L for r in rows], label="MZRL")
        ax_l.loglog(q, [r.h_q for r in rows], "--", label="entropy")
        ax_l.set_ylabel("bits / pulse")
        ax_l.legend(loc="upper left")

        ax_f.semilogx(q, [r.f for r in rows], marker=".", markersize=3)
        ax_f.axhline(1.0, color="0.5", linewidth=0.8)
        ax_f.set_ylabel("efficiency f")
        ax_f.set_xlabel("count rate q")
        fig.align_ylabels()
        fig.savefig(path)
        plt.close(fig)
