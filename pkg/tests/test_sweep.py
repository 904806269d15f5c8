import io

import numpy as np
import pytest

from mzrl.optimizer import solve_unconstrained
from mzrl.sweep import COLUMNS, log_grid, read_csv, sweep, write_csv
from mzrl.theory import DomainError


def test_grid_inclusive():
    g = log_grid(1e-6, 0.1, 100)
    assert g.size == 100
    assert g[0] == pytest.approx(1e-6, rel=1e-14)
    assert g[-1] == pytest.approx(0.1, rel=1e-14)
    assert np.allclose(np.diff(np.log(g)), np.log(1e5) / 99)


@pytest.mark.parametrize("args", [(1e-16, 0.1, 10), (1e-6, 0.2, 10), (0.1, 1e-3, 10), (1e-3, 0.1, 0)])
def test_grid_errors(args):
    with pytest.raises(ValueError):
        log_grid(*args)


def test_standard_sweep():
    rows = sweep()
    assert len(rows) == 100
    assert max(r.f for r in rows) < 1.10
    its = [r.iterations for r in rows]
    assert max(its) == 4
    assert np.mean(its) == pytest.approx(3.28, abs=0.1)
    for r in rows:
        assert r.f == pytest.approx(r.L / r.h_q, rel=1e-12)
        assert r.f >= 1.0
        assert r.n_opt == 1 << r.k_opt


def test_single_point_matches_solver():
    (row,) = sweep(0.1, 0.1, 1)
    res = solve_unconstrained(0.1)
    assert (row.k_opt, row.n_opt, row.L, row.iterations) == (res.k_opt, res.n_opt, res.L_opt, res.iterations)


def test_csv_roundtrip():
    rows = sweep(1e-9, 1e-2, 17)
    buf = io.StringIO()
    write_csv(rows, buf)
    text = buf.getvalue()
    assert text.splitlines()[0] == "q,k_opt,n_opt,L,h_q,f,iterations"
    assert read_csv(io.StringIO(text)) == rows
    buf2 = io.StringIO()
    write_csv(sweep(1e-9, 1e-2, 17), buf2)
    assert buf2.getvalue() == text


def test_csv_bad_header():
    with pytest.raises(ValueError):
        read_csv(io.StringIO("a,b\n1,2\n"))


def test_plot(tmp_path):
    from mzrl.plotting import plot_sweep
    path = tmp_path / "sweep.png"
    plot_sweep(sweep(1e-6, 0.1, 20), path)
    assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
