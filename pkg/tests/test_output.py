import xml.etree.ElementTree as ET

import numpy as np
import pytest

from qmarket import output as out
from qmarket.params import TimeSeries


def sample_series():
    t = np.linspace(0, 2, 5)
    return TimeSeries(t, 30 + np.sin(t), 15 + np.cos(t) / 3, 5 - np.sin(t) - np.cos(t) / 3 + 1 / 3)


def test_fmt():
    assert out.fmt(0.1) == "0.1"
    assert out.fmt(1 / 3) == "0.333333333333333"
    assert out.fmt(50) == "50"
    assert out.fmt(1e-20) == "1e-20"
    assert out.fmt(np.float64(2.5)) == "2.5"


def test_series_round_trip(tmp_path):
    ts = sample_series()
    p = out.write_series_csv(tmp_path / "a" / "s.csv", ts)
    raw = p.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    assert raw.split(b"\n")[0] == b"t,n_shares,n_cash,n_loi,portfolio,conserved_M"
    back = out.read_series_csv(p)
    for name in ("times", "n_shares", "n_cash", "n_loi"):
        assert np.allclose(getattr(back, name), getattr(ts, name), rtol=1e-14, atol=0)
    assert np.allclose(back.conserved_M, ts.conserved_M, rtol=1e-14)


def test_series_bytes_deterministic(tmp_path):
    a = out.write_series_csv(tmp_path / "a.csv", sample_series()).read_bytes()
    b = out.write_series_csv(tmp_path / "b.csv", sample_series()).read_bytes()
    assert a == b


def test_read_series_rejects_other_tables(tmp_path):
    p = out.write_table(tmp_path / "x.csv", ("a", "b"), [(1, 2)])
    with pytest.raises(ValueError):
        out.read_series_csv(p)
    header, data = out.read_table(p)
    assert header == ("a", "b") and data.tolist() == [[1.0, 2.0]]


def test_table_text_keeps_strings():
    text = out.table_text(("name", "v"), [("x", 0.5)])
    assert text == "name,v\nx,0.5\n"


def test_field_round_trip(tmp_path):
    q1 = np.linspace(-1, 1, 4)
    q2 = np.linspace(0, 2, 3)
    Q1, Q2 = np.meshgrid(q1, q2, indexing="ij")
    psi = np.exp(1j * Q1) * (1 + Q2)
    U = Q1 * Q2
    U[0, 0] = np.nan
    p = out.write_field_csv(tmp_path / "f.csv", q1, q2, psi=psi, U=U)
    header = p.read_text().split("\n")[0]
    assert header == "q1,q2,psi_re,psi_im,U"
    r1, r2, cols = out.read_field_csv(p)
    assert np.allclose(r1, q1) and np.allclose(r2, q2)
    assert np.allclose(cols["psi"], psi, rtol=1e-14)
    assert np.isnan(cols["U"][0, 0]) and np.allclose(cols["U"][1:], U[1:])
    with pytest.raises(ValueError):
        out.write_field_csv(tmp_path / "g.csv", q1, q2, bad=np.zeros((3, 3)))


def test_svg_is_valid_xml(tmp_path):
    x = np.linspace(0, 1, 50)
    p = out.write_svg(tmp_path / "p.svg", x, x**2, title="t", ylabel="y")
    root = ET.fromstring(p.read_text())
    assert root.tag.endswith("svg")
    poly = [e for e in root.iter() if e.tag.endswith("polyline")]
    assert len(poly) == 1
    assert len(poly[0].get("points").split()) == 50


def test_svg_constant_series():
    text = out.svg_line_plot([0, 1, 2], [45, 45, 45])
    assert "nan" not in text.lower()
    ET.fromstring(text)
