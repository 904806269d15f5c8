import csv
import hashlib
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import bernoulli_bits
from mzrl.cli import count_arg, main
from mzrl.container import CodewordStream, bits_to_bytes
from mzrl.optimizer import OptimizerResult, solve_unconstrained


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestArgs:
    @pytest.mark.parametrize("text, value", [("0", 0), ("1000", 1000), ("1e8", 10 ** 8),
                                             ("2^30", 2 ** 30), ("2**10", 1024)])
    def test_count(self, text, value):
        assert count_arg(text) == value

    @pytest.mark.parametrize("text", ["1.5", "-3e2", "many"])
    def test_bad_count(self, text):
        import argparse
        with pytest.raises(argparse.ArgumentTypeError):
            count_arg(text)


class TestSolve:
    def test_table(self, capsys):
        code, out, _ = run(capsys, "solve", "--q", "1e-6")
        assert code == 0
        assert "k_opt       22" in out

    def test_json_constrained(self, capsys):
        code, out, _ = run(capsys, "solve", "--q", "0.05", "--n-max", "18", "--json")
        d = json.loads(out)
        assert code == 0 and d["n_opt"] == 16
        res = OptimizerResult.from_dict(d)
        assert res.to_dict() == d

    def test_domain(self, capsys):
        code, _, err = run(capsys, "solve", "--q", "0.5")
        assert code == 2
        assert "[1e-15, 0.1]" in err

    def test_usage(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["solve"])
        assert exc.value.code == 2


class TestCodecCommands:
    def test_empty_file(self, tmp_path, capsys):
        src, mid, dst = tmp_path / "a", tmp_path / "a.mz", tmp_path / "b"
        src.write_bytes(b"")
        assert main(["encode", str(src), str(mid), "--n", "16"]) == 0
        assert main(["decode", str(mid), str(dst)]) == 0
        assert dst.read_bytes() == b""

    def test_mebibyte_roundtrip(self, tmp_path, capsys):
        src, mid, dst = tmp_path / "a", tmp_path / "a.mz", tmp_path / "b"
        src.write_bytes(bits_to_bytes(bernoulli_bits(8 << 20, 0.01, seed=12)))
        assert main(["encode", str(src), str(mid), "--q", "0.01"]) == 0
        assert CodewordStream.from_bytes(mid.read_bytes()).n == solve_unconstrained(0.01).n_opt
        assert main(["decode", str(mid), str(dst)]) == 0
        digest = lambda p: hashlib.sha256(p.read_bytes()).hexdigest()
        assert digest(dst) == digest(src)

    def test_truncated(self, tmp_path, capsys):
        src, mid = tmp_path / "a", tmp_path / "a.mz"
        src.write_bytes(b"\x01\x80\x00\x10" * 100)
        main(["encode", str(src), str(mid), "--n", "8"])
        mid.write_bytes(mid.read_bytes()[:-3])
        code, _, err = run(capsys, "decode", str(mid), str(tmp_path / "b"))
        assert code == 1
        assert "payload length mismatch" in err

    def test_bad_magic(self, tmp_path, capsys):
        bad = tmp_path / "bad.mz"
        bad.write_bytes(b"\x00" * 40)
        code, _, err = run(capsys, "decode", str(bad), str(tmp_path / "b"))
        assert code == 1 and "bad magic" in err

    def test_missing_input(self, tmp_path, capsys):
        code, _, _ = run(capsys, "decode", str(tmp_path / "nope"), str(tmp_path / "b"))
        assert code == 1

    def test_needs_parameter(self, tmp_path, capsys):
        src = tmp_path / "a"
        src.write_bytes(b"x")
        code, _, err = run(capsys, "encode", str(src), str(tmp_path / "o"))
        assert code == 2 and "--n or --q" in err


class TestSimulate:
    def test_analytic_key_consumption(self, capsys):
        code, out, _ = run(capsys, "simulate", "--m", "2^30", "--q", "2.76e-3", "--analytic", "--json")
        d = json.loads(out)
        assert code == 0
        assert d["n"] == 1024
        assert d["key_consumption"] == 3937

    def test_zero(self, capsys):
        code, out, _ = run(capsys, "simulate", "--m", "0", "--q", "0.01", "--json")
        d = json.loads(out)
        assert code == 0
        assert d["source_bits"] == d["codeword_count"] == d["raw_keys"] == d["key_consumption"] == 0

    def test_csv_deterministic(self, capsys, monkeypatch):
        args = ["simulate", "--m", "1e5", "--q", "0.02", "--csv", "-"]
        monkeypatch.setenv("MZRL_SEED", "4")
        code, first, _ = run(capsys, *args)
        _, second, _ = run(capsys, *args)
        assert code == 0 and first == second
        (row,) = csv.DictReader(io.StringIO(first))
        assert row["seed"] == "4"
        _, third, _ = run(capsys, *args, "--seed", "5")
        assert third != first

    def test_link_parameters(self, capsys):
        code, out, _ = run(capsys, "simulate", "--m", "3e5", "--mu", "0.55", "--loss-db", "8.01",
                           "--p-dark", "1.36e-5", "--distance", "20", "--fibre-latency", "--json")
        d = json.loads(out)
        assert code == 0
        assert d["q"] == pytest.approx(8.68e-3, rel=1e-2)
        assert d["n"] == 256
        # 2 x 100 us of fibre at 1 GHz
        assert 200_000 < d["buffer_peak"] <= 255 + 200_000 + 1

    def test_needs_rate(self, capsys):
        code, _, err = run(capsys, "simulate", "--m", "10")
        assert code == 2

    def test_threaded_bytes(self, capsys):
        code, out, _ = run(capsys, "simulate", "--m", "50000", "--q", "0.05", "--driver",
                           "threaded", "--channel", "bytes", "--json")
        assert code == 0 and json.loads(out)["source_bits"] == 50000


class TestSweep:
    def test_default_grid(self, tmp_path, capsys):
        out_csv, fig = tmp_path / "s.csv", tmp_path / "s.png"
        code, out, _ = run(capsys, "sweep", "--out", str(out_csv), "--plot", str(fig))
        assert code == 0
        rows = list(csv.DictReader(out_csv.open()))
        assert list(rows[0]) == ["q", "k_opt", "n_opt", "L", "h_q", "f", "iterations"]
        assert len(rows) == 100
        assert max(float(r["f"]) for r in rows) < 1.10
        its = [int(r["iterations"]) for r in rows]
        assert max(its) == 4 and np.mean(its) == pytest.approx(3.28, abs=0.1)
        assert fig.stat().st_size > 0

    def test_single_point_stdout(self, capsys):
        code, out, _ = run(capsys, "sweep", "--q-min", "0.1", "--q-max", "0.1", "--points", "1")
        (row,) = csv.DictReader(io.StringIO(out))
        _, solved, _ = run(capsys, "solve", "--q", "0.1", "--json")
        solved = json.loads(solved)
        assert int(row["k_opt"]) == solved["k_opt"]
        assert float(row["L"]) == solved["L_opt"]
        assert float(row["f"]) == solved["f"]

    def test_out_of_range(self, capsys):
        code, _, err = run(capsys, "sweep", "--q-min", "1e-20")
        assert code == 2 and "[1e-15, 0.1]" in err


class TestRecommend:
    def test_default_table(self, capsys):
        code, out, _ = run(capsys, "recommend", "--json")
        rows = {r["system"]: r for r in json.loads(out)}
        assert code == 0
        assert rows["Stucki"]["n_recommended"] == 12288
        assert rows["Stucki"]["f_actual"] == pytest.approx(70.57, abs=0.05)
        assert rows["Stucki-8Mb"]["f_actual"] == pytest.approx(1.06, abs=0.01)

    def test_csv(self, capsys):
        code, out, _ = run(capsys, "recommend", "--csv", "-")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and len(rows) == 5

    def test_bad_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("system,mu\nX,0.5\n")
        code, _, err = run(capsys, "recommend", "--systems", str(bad))
        assert code == 2 and "missing column" in err


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mzrl.cli", "solve", "--q", "0.05", "--json"],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["k_opt"] == 6
