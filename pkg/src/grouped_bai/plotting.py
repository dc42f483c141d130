"""Deterministic SVG line charts of mean sample counts, with their plotted points.

Mean sweeps are drawn against the hardness index, size sweeps against N or M.
The layout is fixed and numbers are printed with fixed precision, so the same
summary always produces byte-identical files.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

from .harness import SummaryRow, format_value

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 80, 170, 40, 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
MARKERS = ("circle", "square", "diamond", "circle", "square", "diamond")
POINT_FIELDS = ("experiment", "policy", "sweep_value", "x", "mean_pulls", "std_error")

X_LABELS = {"varyN": "number of arms N", "varyM": "number of attributes M"}


@dataclass(frozen=True)
class PlotPoint:
    experiment: str
    policy: str
    sweep_value: object
    x: float
    y: float
    se: float


def plot_points(rows: Sequence[SummaryRow]) -> dict[str, list[PlotPoint]]:
    """Plotted points per experiment, ordered by policy then x."""
    by_exp: dict = {}
    for r in rows:
        x = float(r.sweep_value) if r.experiment_id in X_LABELS else float(r.hardness)
        by_exp.setdefault(r.experiment_id, []).append(
            PlotPoint(r.experiment_id, r.policy, r.sweep_value, x, r.mean_pulls, r.std_error)
        )
    policy_order = {}
    for r in rows:
        policy_order.setdefault(r.policy, len(policy_order))
    return {
        exp: sorted(pts, key=lambda p: (policy_order[p.policy], p.x, format_value(p.sweep_value)))
        for exp, pts in by_exp.items()
    }


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi <= lo:
        hi = lo + (abs(lo) or 1.0)
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = next(s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw)
    start = math.floor(lo / step) * step
    ticks = []
    v = start
    while v <= hi + step * 1e-9:
        ticks.append(round(v, 12))
        v += step
    if ticks[-1] < hi:
        ticks.append(round(ticks[-1] + step, 12))
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    if v == 0:
        return "0"
    a = abs(v)
    if a >= 1e6:
        return f"{v / 1e6:g}M"
    if a >= 1e3:
        return f"{v / 1e3:g}k"
    return f"{v:g}"


def _marker(kind: str, x: float, y: float, color: str) -> str:
    if kind == "square":
        return f'<rect x="{_fmt(x - 3.5)}" y="{_fmt(y - 3.5)}" width="7.00" height="7.00" fill="{color}"/>'
    if kind == "diamond":
        pts = f"{_fmt(x)},{_fmt(y - 4.5)} {_fmt(x + 4.5)},{_fmt(y)} {_fmt(x)},{_fmt(y + 4.5)} {_fmt(x - 4.5)},{_fmt(y)}"
        return f'<polygon points="{pts}" fill="{color}"/>'
    return f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="3.50" fill="{color}"/>'


def render_svg(experiment: str, points: Sequence[PlotPoint]) -> str:
    """One self-contained SVG: a line per policy with standard-error bars."""
    policies = []
    for p in points:
        if p.policy not in policies:
            policies.append(p.policy)
    finite = [p for p in points if math.isfinite(p.x)]
    xs = [p.x for p in finite]
    lows = [p.y - p.se for p in finite] + [0.0]
    highs = [p.y + p.se for p in finite]
    xt = _nice_ticks(min(xs), max(xs)) if xs else [0.0, 1.0]
    if experiment in X_LABELS:
        xt = sorted({float(v) for v in xs}) or [0.0, 1.0]
    yt = _nice_ticks(min(lows), max(highs)) if highs else [0.0, 1.0]
    x0, x1 = xt[0], xt[-1]
    y0, y1 = yt[0], yt[-1]
    if x1 == x0:
        x0, x1 = x0 - 1.0, x1 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(x):
        return LEFT + (x - x0) / (x1 - x0) * pw

    def py(y):
        return TOP + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2 - RIGHT // 2}" y="22" text-anchor="middle" font-size="14">'
        f"{escape(experiment)}: mean sample count</text>",
    ]
    # Axes and grid.
    out.append(f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>')
    out.append(f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>')
    for v in xt:
        x = px(v)
        out.append(f'<line x1="{_fmt(x)}" y1="{TOP + ph}" x2="{_fmt(x)}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{TOP + ph + 18}" text-anchor="middle">{_tick_label(v)}</text>')
    for v in yt:
        y = py(v)
        out.append(f'<line x1="{LEFT - 5}" y1="{_fmt(y)}" x2="{LEFT + pw}" y2="{_fmt(y)}" stroke="#dddddd"/>')
        out.append(f'<text x="{LEFT - 8}" y="{_fmt(y + 4)}" text-anchor="end">{_tick_label(v)}</text>')
    xlabel = X_LABELS.get(experiment, "hardness index H_id")
    out.append(f'<text x="{LEFT + pw // 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{TOP + ph // 2}" text-anchor="middle" '
               f'transform="rotate(-90 18 {TOP + ph // 2})">pulls to stop</text>')
    # Series.
    for k, pol in enumerate(policies):
        color = COLORS[k % len(COLORS)]
        series = [p for p in finite if p.policy == pol]
        if len(series) > 1:
            pts = " ".join(f"{_fmt(px(p.x))},{_fmt(py(p.y))}" for p in series)
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for p in series:
            x = px(p.x)
            if p.se > 0:
                lo, hi = py(p.y - p.se), py(p.y + p.se)
                out.append(f'<line x1="{_fmt(x)}" y1="{_fmt(lo)}" x2="{_fmt(x)}" y2="{_fmt(hi)}" stroke="{color}"/>')
                for yy in (lo, hi):
                    out.append(f'<line x1="{_fmt(x - 3)}" y1="{_fmt(yy)}" x2="{_fmt(x + 3)}" y2="{_fmt(yy)}" stroke="{color}"/>')
            out.append(_marker(MARKERS[k % len(MARKERS)], x, py(p.y), color))
        ly = TOP + 10 + 20 * k
        lx = WIDTH - RIGHT + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="1.5"/>')
        out.append(_marker(MARKERS[k % len(MARKERS)], lx + 10, ly, color))
        out.append(f'<text class="legend" x="{lx + 26}" y="{ly + 4}">{escape(pol)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_points(points: Sequence[PlotPoint], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POINT_FIELDS)
        for p in points:
            w.writerow([p.experiment, p.policy, format_value(p.sweep_value), repr(p.x), repr(p.y), repr(p.se)])


def write_plots(rows: Sequence[SummaryRow], out_dir: str | Path) -> list[Path]:
    """Write ``<experiment>.svg`` and ``<experiment>_points.csv`` for every experiment."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for exp, pts in sorted(plot_points(rows).items()):
        svg = out / f"{exp}.svg"
        svg.write_text(render_svg(exp, pts))
        csv_path = out / f"{exp}_points.csv"
        write_points(pts, csv_path)
        written += [svg, csv_path]
    return written
