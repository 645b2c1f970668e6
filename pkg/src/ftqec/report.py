"""CSV, JSON and SVG writers for experiment reports."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Sequence

# Stable column orders of every CSV the command line emits.
MEMORY_COLUMNS = ("state", "cycles", "shots", "failures", "mean", "jackknife_std")
FIT_COLUMNS = ("name", "p_spam", "p_cycle", "p_cycle_std")
CHANNEL_COLUMNS = ("p_x", "p_y", "p_z", "p_L")
BUDGET_COLUMNS = ("source", "A", "B_row_sum", "share")
THRESHOLD_COLUMNS = ("model", "scale", "p_L", "std", "line")
SGATE_COLUMNS = ("mode", "shots", "failures", "fidelity", "jackknife_std")

PALETTE = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def write_csv(path: Path, rows: Sequence[dict], columns: Sequence[str]) -> Path:
    path.write_text(csv_text(rows, columns))
    return path


def read_csv(path: Path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------- svg

def svg_plot(series: Sequence[dict], xlabel: str, ylabel: str, logy: bool = True,
             logx: bool = False, width: int = 520, height: int = 360) -> str:
    """Line plot with optional error bars.

    Each series is ``{"label", "x", "y", "err" (optional), "dashed" (optional)}``.
    Non-positive values are dropped on log axes.
    """
    left, right, top, bottom = 70, 150, 20, 50
    pw, ph = width - left - right, height - top - bottom

    def tx(v, log_):
        return math.log10(v) if log_ else v

    xs, ys = [], []
    for s in series:
        for i, (x, y) in enumerate(zip(s["x"], s["y"])):
            if (logx and x <= 0) or (logy and y <= 0):
                continue
            e = (s.get("err") or [0] * len(s["x"]))[i]
            xs.append(tx(x, logx))
            ys.append(tx(y, logy))
            if e and (not logy or y - e > 0):
                ys.append(tx(y - e, logy))
            ys.append(tx(y + e, logy))
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if logy:
        y0, y1 = math.floor(y0), math.ceil(y1)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1

    def px(x):
        return left + (tx(x, logx) - x0) / (x1 - x0) * pw

    def py(y):
        return top + ph - (tx(y, logy) - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    # y ticks: decades on log axes, five steps otherwise
    ticks = range(int(y0), int(y1) + 1) if logy else [y0 + (y1 - y0) * k / 4 for k in range(5)]
    for t in ticks:
        yy = top + ph - (t - y0) / (y1 - y0) * ph
        lab = f"1e{t}" if logy else f"{t:.3g}"
        out.append(f'<line x1="{left - 4}" y1="{yy:.1f}" x2="{left}" y2="{yy:.1f}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{yy + 4:.1f}" text-anchor="end">{lab}</text>')
    for k in range(5):
        t = x0 + (x1 - x0) * k / 4
        xx = left + k / 4 * pw
        lab = f"{10 ** t:.3g}" if logx else f"{t:.3g}"
        out.append(f'<line x1="{xx:.1f}" y1="{top + ph}" x2="{xx:.1f}" y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{xx:.1f}" y="{top + ph + 16}" text-anchor="middle">{lab}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="15" y="{top + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 15 {top + ph / 2})">{ylabel}</text>')
    for i, s in enumerate(series):
        col = s.get("color") or PALETTE[i % len(PALETTE)]
        pts = [(x, y) for x, y in zip(s["x"], s["y"]) if not ((logx and x <= 0) or (logy and y <= 0))]
        if len(pts) > 1:
            path = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in pts)
            dash = ' stroke-dasharray="5,4"' if s.get("dashed") else ""
            out.append(f'<polyline points="{path}" fill="none" stroke="{col}"{dash}/>')
        errs = s.get("err") or [0] * len(s["x"])
        for (x, y), e in zip(zip(s["x"], s["y"]), errs):
            if (logx and x <= 0) or (logy and y <= 0):
                continue
            if not s.get("dashed"):
                out.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="3" fill="{col}"/>')
            if e:
                lo = y - e if (not logy or y - e > 0) else y
                out.append(f'<line x1="{px(x):.1f}" y1="{py(lo):.1f}" x2="{px(x):.1f}" '
                           f'y2="{py(y + e):.1f}" stroke="{col}"/>')
        ly = top + 14 * (i + 1)
        out.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" y2="{ly - 4}" '
                   f'stroke="{col}"/>')
        out.append(f'<text x="{left + pw + 34}" y="{ly}">{s["label"]}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
