"""Tabular output: CSV (the contract), JSON, and a minimal SVG line plot.

Floats are written with ``repr`` so that identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import numbers
import sys
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np


def _plain(x):
    """numpy scalars to Python numbers (their repr differs)."""
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, numbers.Integral):
        return int(x)
    if isinstance(x, numbers.Real):
        return float(x)
    return x


def format_value(x) -> str:
    x = _plain(x)
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def _json_value(x):
    x = _plain(x)
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


class Table:
    """Column names, rows and ordered ``#`` metadata lines."""

    def __init__(self, columns, header: str, meta: dict | None = None):
        self.columns = list(columns)
        self.header = header
        self.meta = dict(meta or {})
        self.rows: list[tuple] = []

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values, expected {len(self.columns)}")
        self.rows.append(tuple(values))

    def column(self, name):
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {self.header}\n")
        for k, v in self.meta.items():
            buf.write(f"# {k}={format_value(v)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_value(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "header": self.header,
            "meta": {k: _json_value(v) for k, v in self.meta.items()},
            "columns": self.columns,
            "rows": [[_json_value(v) for v in row] for row in self.rows],
        }
        return json.dumps(doc, indent=1) + "\n"

    def to_svg(self, x: str, y: str, series: str | None = None, width=640, height=400) -> str:
        return svg_lines(self, x, y, series, width, height)


def svg_lines(table: Table, x, y, series=None, width=640, height=400) -> str:
    """Polyline plot of ``y`` against ``x``, one line per distinct ``series`` value."""
    xs, ys = table.column(x), table.column(y)
    if not all(isinstance(v, (int, float)) for v in xs):
        xs = list(range(len(xs)))
    keys = table.column(series) if series else [""] * len(xs)
    groups: dict = {}
    for k, a, b in zip(keys, xs, ys):
        if isinstance(b, float) and not math.isfinite(b):
            continue
        groups.setdefault(k, []).append((float(a), float(b)))
    pts = [p for g in groups.values() for p in g]
    pad = 40
    if pts:
        x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
        y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    else:
        x0 = y0 = 0.0
        x1 = y1 = 1.0
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f"<title>{escape(table.header)}</title>",
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
        'fill="none" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 8}" text-anchor="middle">{escape(x)}</text>',
        f'<text x="12" y="{height / 2:.1f}" transform="rotate(-90 12 {height / 2:.1f})" '
        f'text-anchor="middle">{escape(y)}</text>',
        f'<text x="{pad}" y="{pad - 6}">{escape(f"{y} in [{y0:.4g}, {y1:.4g}]")}</text>',
    ]
    for i, (k, g) in enumerate(groups.items()):
        colour = palette[i % len(palette)]
        path = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in g)
        label = f"{series}={format_value(k)}" if series else y
        out.append(
            f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{path}">'
            f"<title>{escape(label)}</title></polyline>"
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit(table: Table, fmt: str, out=None, plot=None):
    """Write ``table`` to ``out`` (a path) or stdout. ``plot`` is ``(x, y, series)`` for SVG."""
    if fmt == "csv":
        text = table.to_csv()
    elif fmt == "json":
        text = table.to_json()
    elif fmt == "svg":
        if plot is None:
            plot = (table.columns[0], table.columns[1], None)
        text = table.to_svg(*plot)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")
    return text
