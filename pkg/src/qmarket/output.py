"""Flat-file emission: CSV time series, field dumps, sweep tables and SVG line plots."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from qmarket.params import TimeSeries

SERIES_HEADER = ("t", "n_shares", "n_cash", "n_loi", "portfolio", "conserved_M")


def fmt(x) -> str:
    """15 significant digits, locale independent."""
    return "%.15g" % float(x)


def _write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write(text)
    return path


def table_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def write_table(path, header, rows) -> Path:
    return _write_text(path, table_text(header, rows))


def series_rows(ts: TimeSeries):
    cols = (ts.times, ts.n_shares, ts.n_cash, ts.n_loi, ts.portfolio, ts.conserved_M)
    return np.column_stack(cols)


def write_series_csv(path, ts: TimeSeries) -> Path:
    return write_table(path, SERIES_HEADER, series_rows(ts))


def read_table(path):
    """Header tuple and float array of a table written by :func:`write_table`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        data = np.array([[float(v) for v in row] for row in reader], dtype=float)
    return header, data.reshape(-1, len(header))


def read_series_csv(path) -> TimeSeries:
    header, data = read_table(path)
    if header != SERIES_HEADER:
        raise ValueError(f"unexpected header {header}")
    return TimeSeries(data[:, 0], data[:, 1], data[:, 2], data[:, 3])


def write_field_csv(path, q1, q2, **columns) -> Path:
    """One row per grid point, q1 varying slowest. Complex columns split into re/im."""
    Q1, Q2 = np.meshgrid(q1, q2, indexing="ij")
    header = ["q1", "q2"]
    cols = [Q1.ravel(), Q2.ravel()]
    for name, arr in columns.items():
        arr = np.asarray(arr)
        if arr.shape != Q1.shape:
            raise ValueError(f"field {name} has shape {arr.shape}, grid is {Q1.shape}")
        if np.iscomplexobj(arr):
            header += [f"{name}_re", f"{name}_im"]
            cols += [arr.real.ravel(), arr.imag.ravel()]
        else:
            header.append(name)
            cols.append(arr.astype(float).ravel())
    return write_table(path, header, np.column_stack(cols))


def read_field_csv(path):
    """Inverse of :func:`write_field_csv`: returns ``(q1, q2, {name: array})``."""
    header, data = read_table(path)
    q1 = np.unique(data[:, 0])
    q2 = np.unique(data[:, 1])
    shape = (len(q1), len(q2))
    out = {}
    j = 2
    while j < len(header):
        name = header[j]
        if name.endswith("_re") and j + 1 < len(header) and header[j + 1] == name[:-3] + "_im":
            out[name[:-3]] = (data[:, j] + 1j * data[:, j + 1]).reshape(shape)
            j += 2
        else:
            out[name] = data[:, j].reshape(shape)
            j += 1
    return q1, q2, out


def svg_line_plot(x, y, title="", xlabel="t", ylabel="", width=640, height=400) -> str:
    """Self-contained SVG with a single polyline and min/max tick labels."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ml, mr, mt, mb = 70, 20, 30, 45
    pw, ph = width - ml - mr, height - mt - mb
    x0, x1 = float(x.min()), float(x.max())
    y0, y1 = float(y.min()), float(y.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 - y0 < 1e-12 * max(1.0, abs(y0)):
        y0, y1 = y0 - 0.5, y1 + 0.5
    px = ml + (x - x0) / (x1 - x0) * pw
    py = mt + (y1 - y) / (y1 - y0) * ph
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))

    def label(v):
        return "%.6g" % v

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<polyline fill="none" stroke="#1f4e9c" stroke-width="1.2" points="{pts}"/>',
        f'<text x="{ml}" y="{mt + ph + 18}" font-size="12">{label(x0)}</text>',
        f'<text x="{ml + pw}" y="{mt + ph + 18}" font-size="12" text-anchor="end">{label(x1)}</text>',
        f'<text x="{ml - 6}" y="{mt + ph}" font-size="12" text-anchor="end">{label(y0)}</text>',
        f'<text x="{ml - 6}" y="{mt + 10}" font-size="12" text-anchor="end">{label(y1)}</text>',
        f'<text x="{ml + pw / 2:.1f}" y="{height - 8}" font-size="13" text-anchor="middle">{xlabel}</text>',
        f'<text x="16" y="{mt + ph / 2:.1f}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{ylabel}</text>',
        f'<text x="{ml + pw / 2:.1f}" y="18" font-size="14" text-anchor="middle">{title}</text>',
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def write_svg(path, x, y, **kw) -> Path:
    return _write_text(path, svg_line_plot(x, y, **kw))
