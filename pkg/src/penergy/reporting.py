"""Deterministic CSV and SVG artifacts for the command-line reports.

Same inputs must give byte-identical files: header keys are sorted, floats
are written with repr (shortest round-trip form), nothing timestamps or
environment-dependent ever enters the output.  SVG charts are static
polyline plots assembled by hand; they depend only on the data series.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

PALETTE = ("#1f6feb", "#d1242f", "#1a7f37", "#9a6700", "#8250df", "#57606a")


def format_cell(value) -> str:
    """One CSV cell; floats keep full round-trip precision."""
    if value is None:
        return ""
    if isinstance(value, bool) or isinstance(value, np.bool_):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    text = str(value)
    if any(ch in text for ch in ",\"\n"):
        text = '"' + text.replace('"', '""') + '"'
    return text


def _header_value(value) -> str:
    if isinstance(value, (dict, list, tuple)):
        return json.dumps(value, sort_keys=True, separators=(",", ":"))
    return format_cell(value)


def csv_text(columns, rows, header: dict | None = None) -> str:
    """CSV with '# key=value' comment headers, sorted for reproducibility."""
    lines = []
    for key in sorted(header or {}):
        lines.append(f"# {key}={_header_value(header[key])}")
    lines.append(",".join(columns))
    for row in rows:
        cells = [format_cell(v) for v in row]
        if len(cells) != len(columns):
            raise ValueError("row width does not match the column count")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_csv(path, columns, rows, header: dict | None = None) -> Path:
    path = Path(path)
    path.write_text(csv_text(columns, rows, header))
    return path


# ---------------------------------------------------------------------------
# SVG line charts


def step_series(nodes, cell_values):
    """Duplicate nodes/values into the staircase polyline of a density."""
    nodes = np.asarray(nodes, dtype=float)
    cells = np.asarray(cell_values, dtype=float)
    xs = np.repeat(nodes, 2)[1:-1]
    ys = np.repeat(cells, 2)
    return xs, ys


class _Axis:
    """Maps data values onto pixel coordinates, linearly or in log scale."""

    def __init__(self, lo: float, hi: float, px_lo: float, px_hi: float,
                 log: bool):
        if log:
            lo = max(lo, 1e-300)
            hi = max(hi, lo)
        if hi <= lo:
            if log:
                lo, hi = lo / 2.0, lo * 2.0
            else:
                lo, hi = lo - 1.0, hi + 1.0
        self.lo, self.hi, self.log = lo, hi, log
        self.px_lo, self.px_hi = px_lo, px_hi

    def _t(self, v: float) -> float:
        if self.log:
            v = max(v, 1e-300)
            return (math.log(v) - math.log(self.lo)) \
                / (math.log(self.hi) - math.log(self.lo))
        return (v - self.lo) / (self.hi - self.lo)

    def px(self, v: float) -> float:
        return self.px_lo + self._t(v) * (self.px_hi - self.px_lo)

    def ticks(self, count: int = 5):
        if self.log:
            return [float(t) for t in
                    np.geomspace(self.lo, self.hi, count)]
        return [float(t) for t in np.linspace(self.lo, self.hi, count)]


def svg_chart(series, *, title: str, x_label: str, y_label: str,
              log_x: bool = False, log_y: bool = False,
              width: int = 720, height: int = 460) -> str:
    """Static polyline chart; series is a list of (label, xs, ys)."""
    ml, mr, mt, mb = 72, 24, 48, 56
    xs_all = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    ys_all = np.concatenate([np.asarray(s[2], dtype=float) for s in series])
    if log_x:
        xs_all = xs_all[xs_all > 0]
    if log_y:
        ys_all = ys_all[ys_all > 0]
    if xs_all.size == 0 or ys_all.size == 0:
        xs_all = np.array([0.1, 1.0])
        ys_all = np.array([0.1, 1.0])
    x_axis = _Axis(float(xs_all.min()), float(xs_all.max()),
                   ml, width - mr, log_x)
    y_axis = _Axis(float(ys_all.min()), float(ys_all.max()),
                   height - mb, mt, log_y)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
    ]
    # grid and tick labels
    for tx in x_axis.ticks():
        px = x_axis.px(tx)
        parts.append(f'<line x1="{px:.2f}" y1="{mt}" x2="{px:.2f}" '
                     f'y2="{height - mb}" stroke="#dddddd"/>')
        parts.append(f'<text x="{px:.2f}" y="{height - mb + 18}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{tx:.4g}</text>')
    for ty in y_axis.ticks():
        py = y_axis.px(ty)
        parts.append(f'<line x1="{ml}" y1="{py:.2f}" x2="{width - mr}" '
                     f'y2="{py:.2f}" stroke="#dddddd"/>')
        parts.append(f'<text x="{ml - 8}" y="{py + 4:.2f}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="11">{ty:.4g}</text>')
    # axes
    parts.append(f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" '
                 f'y2="{height - mb}" stroke="#333333"/>')
    parts.append(f'<line x1="{ml}" y1="{mt}" x2="{ml}" '
                 f'y2="{height - mb}" stroke="#333333"/>')
    parts.append(f'<text x="{(ml + width - mr) / 2:.1f}" y="{height - 12}" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="13">{x_label}</text>')
    parts.append(f'<text x="18" y="{(mt + height - mb) / 2:.1f}" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="13" transform="rotate(-90 18 '
                 f'{(mt + height - mb) / 2:.1f})">{y_label}</text>')
    # series
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = []
        for x, y in zip(np.asarray(xs, float), np.asarray(ys, float)):
            if (log_x and x <= 0) or (log_y and y <= 0):
                continue
            pts.append(f"{x_axis.px(float(x)):.2f},{y_axis.px(float(y)):.2f}")
        parts.append(f'<polyline points="{" ".join(pts)}" fill="none" '
                     f'stroke="{color}" stroke-width="1.8"/>')
        ly = mt + 16 + 18 * i
        parts.append(f'<rect x="{ml + 10}" y="{ly - 9}" width="12" '
                     f'height="12" fill="{color}"/>')
        parts.append(f'<text x="{ml + 28}" y="{ly + 2}" '
                     f'font-family="sans-serif" font-size="12">'
                     f'{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(path, text: str) -> Path:
    path = Path(path)
    path.write_text(text)
    return path
