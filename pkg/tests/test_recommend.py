import io

import pytest

from mzrl.recommend import FIELDS, RowError, default_systems, load_systems, recommend
from mzrl.theory import count_rate

HEADER = ",".join(FIELDS)


def by_name():
    return {s.name: s for s in default_systems()}


def test_bundled_rows():
    systems = by_name()
    assert set(systems) == {"Dixon", "Stucki", "Zhang", "Tanaka", "Stucki-8Mb"}
    assert systems["Stucki"].n_max == 12 * 2 ** 10
    assert systems["Dixon"].storage_bits == 2 * 2 ** 30 * 8


@pytest.mark.parametrize("name, q, n, f", [
    ("Dixon", 8.68e-3, 2 ** 8, 1.08),
    ("Zhang", 1.36e-2, 2 ** 8, 1.08),
])
def test_reference_rows(name, q, n, f):
    rec = recommend(by_name()[name])
    assert rec.q == pytest.approx(q, rel=1e-2)
    assert rec.n_theoretical == rec.n_recommended == n
    assert rec.f_theoretical == pytest.approx(f, abs=0.01)
    assert rec.f_actual == rec.f_theoretical


def test_storage_limited():
    rec = recommend(by_name()["Stucki"])
    assert rec.n_theoretical == 2 ** 22
    assert rec.n_recommended == 12 * 2 ** 10
    assert rec.f_actual == pytest.approx(70.57, abs=0.05)
    assert recommend(by_name()["Stucki"], q=7.44e-7).f_actual == pytest.approx(70.57, abs=0.05)


def test_extended_storage():
    rec = recommend(by_name()["Stucki-8Mb"])
    assert rec.f_actual == pytest.approx(1.06, abs=0.01)


@pytest.mark.parametrize("spec", default_systems(), ids=lambda s: s.name)
def test_invariants(spec):
    rec = recommend(spec)
    assert rec.n_recommended <= spec.n_max
    assert rec.f_actual >= rec.f_theoretical
    assert rec.q == count_rate(spec.link)


def test_load_from_file(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text(HEADER + "\nLab,1e-6,0.1,10,5,0.2,4096,1,0\n")
    (spec,) = load_systems(path)
    assert spec.name == "Lab"
    assert spec.n_max == 4096
    assert recommend(spec).n_recommended <= 4096


@pytest.mark.parametrize("row, message", [
    ("Lab,1e-6,0.1,10,,0.2,4096,1,0", "missing field"),
    ("Lab,1e-6,abc,10,5,0.2,4096,1,0", "row 2"),
    ("Lab,1e-6,0.1,10,5,1.5,4096,1,0", "detector efficiency"),
    ("Lab,1e-6,0.1,10,5,0.2,4096,0,0", "bits_per_key"),
    ("Lab,1e-6,0.1,10,5,0.2,4096,2,4094", "fewer than 2 keys"),
    ("Lab,1e-6,10,0,0,1.0,4096,1,0", "count rate"),
])
def test_row_errors(row, message):
    fh = io.StringIO(HEADER + "\n" + row + "\n")
    with pytest.raises(ValueError, match=message):
        specs = load_systems(fh)
        recommend(specs[0])


def test_missing_column():
    with pytest.raises(RowError, match="eta_d"):
        load_systems(io.StringIO("system,p_dark,mu,distance_km,loss_db\n"))
