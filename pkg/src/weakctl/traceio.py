"""Plain-text outputs: trace CSVs, row tables, key/value reports and SVG charts.

Numbers are written with 15 significant digits, so a trace read back agrees
with the in-memory one to that precision. Every writer goes through a
temporary file in the target directory and renames it into place, so an
interrupted run never leaves a half-written file behind.
"""
from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .scenario import SimTrace

__all__ = [
    "trace_columns", "format_number", "write_trace_csv", "read_trace_csv",
    "write_rows_csv", "read_rows_csv", "write_report", "parse_report", "write_text",
    "svg_line_chart", "trace_filename",
]

FLOAT_FMT = "%.15g"


def format_number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return FLOAT_FMT % x
    return str(x)


def trace_filename(run_id: str, case: str, ext: str = "csv") -> str:
    return f"{run_id}_{case}.{ext}"


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def write_text(path: str | Path, text: str) -> Path:
    """Atomically replace ``path`` with ``text``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def trace_columns(n: int) -> list[str]:
    return (["k", "t", "r", "d", "v", "y"] + [f"u_{i + 1}" for i in range(n)]
            + [f"y_{i + 1}" for i in range(n)] + ["cost"])


def _table(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_number(x) for x in row])
    return buf.getvalue()


def write_trace_csv(trace: SimTrace, path: str | Path) -> Path:
    n = trace.n
    t = trace.times
    rows = (
        [k, t[k], trace.r[k], trace.d[k], trace.v[k], trace.y[k], *trace.u[k], *trace.y_parts[k],
         trace.cost[k]]
        for k in range(len(trace))
    )
    return write_text(path, _table(trace_columns(n), rows))


def read_trace_csv(path: str | Path) -> SimTrace:
    """Inverse of :func:`write_trace_csv`.

    The model output, the infeasible-step list and the bounds are not stored;
    they come back as NaNs, an empty list and ``None``.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(x) for x in row] for row in reader], dtype=float)
    n = (len(header) - 7) // 2
    if header != trace_columns(n):
        raise ValueError(f"{path}: unexpected trace header {header}")
    data = data.reshape(-1, len(header))
    col = {name: j for j, name in enumerate(header)}
    step = float(data[1, col["t"]] - data[0, col["t"]]) if len(data) > 1 else 0.0
    return SimTrace(
        step=step,
        r=data[:, col["r"]], d=data[:, col["d"]], v=data[:, col["v"]], y=data[:, col["y"]],
        y_model=np.full(len(data), np.nan),
        u=data[:, col["u_1"]:col["u_1"] + n], y_parts=data[:, col["y_1"]:col["y_1"] + n],
        cost=data[:, col["cost"]],
    )


def write_rows_csv(rows: Sequence[Mapping], path: str | Path,
                   columns: Sequence[str] | None = None) -> Path:
    """Write dict rows; columns default to the keys of the first row, in order."""
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    return write_text(path, _table(columns, ([row[c] for c in columns] for row in rows)))


def read_rows_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_report(lines: Sequence[str], path: str | Path) -> Path:
    return write_text(path, "".join(line + "\n" for line in lines))


def parse_report(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if ":" in line:
            key, _, value = line.partition(":")
            out[key.strip()] = value.strip()
    return out


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


def svg_line_chart(x: np.ndarray, series: Mapping[str, np.ndarray], title: str = "",
                   width: int = 720, height: int = 360) -> str:
    """Self-contained SVG with one polyline per series and a legend."""
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    left, right, top, bottom = 60, 20, 30, 40
    pw, ph = width - left - right, height - top - bottom
    finite = [v[np.isfinite(v)] for v in ys.values()]
    finite = [v for v in finite if v.size]
    ymin = min((v.min() for v in finite), default=0.0)
    ymax = max((v.max() for v in finite), default=1.0)
    if ymax == ymin:
        ymin, ymax = ymin - 1.0, ymax + 1.0
    xmin, xmax = (float(x[0]), float(x[-1])) if x.size > 1 else (0.0, 1.0)
    if xmax == xmin:
        xmax = xmin + 1.0

    def px(xv):
        return left + (xv - xmin) / (xmax - xmin) * pw

    def py(yv):
        return top + (ymax - yv) / (ymax - ymin) * ph

    # a chart needs at most a couple of points per pixel column
    stride = max(1, x.size // (2 * pw))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        yv = ymin + frac * (ymax - ymin)
        xv = xmin + frac * (xmax - xmin)
        parts.append(f'<text x="{left - 6}" y="{py(yv) + 4:.1f}" text-anchor="end" '
                     f'font-size="11">{yv:.4g}</text>')
        parts.append(f'<text x="{px(xv):.1f}" y="{height - bottom + 16}" text-anchor="middle" '
                     f'font-size="11">{xv:.4g}</text>')
    for j, (name, y) in enumerate(ys.items()):
        colour = _PALETTE[j % len(_PALETTE)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}"
                       for a, b in zip(x[::stride], y[::stride]) if np.isfinite(b))
        parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.2" points="{pts}"/>')
        ly = top + 14 + 14 * j
        parts.append(f'<line x1="{left + 8}" y1="{ly - 4}" x2="{left + 24}" y2="{ly - 4}" '
                     f'stroke="{colour}" stroke-width="2"/>')
        parts.append(f'<text x="{left + 28}" y="{ly}" font-size="11">{escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
