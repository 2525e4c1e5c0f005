"""Self-contained SVG line charts of benchmark results.

Rows with an error are skipped; points with several seeds plot the mean.
"""
from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path
from xml.sax.saxutils import escape

__all__ = ["CHART_KINDS", "render_chart", "chart_series", "nice_ticks"]

CHART_KINDS = ("budget", "scaling", "algo-compare")
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
           "#7f7f7f", "#bcbd22", "#17becf")
_ATTR = {'"': "&quot;"}
_W, _H = 720, 440
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 200, 30, 60


def _label(row, kind) -> str:
    parts = [row.heuristic]
    if kind != "algo-compare":
        parts.insert(0, row.algo)
    if row.mode == "iterative":
        parts.append("iter")
    if row.direction == "unicast_first":
        parts.append("ufirst")
    return " / ".join(parts)


def _scaling_x(row) -> float:
    if row.workload.startswith("scaling-"):
        return float(row.workload.split("-", 1)[1])
    return float(row.n)


def chart_series(rows, kind: str):
    """``({label: [(x, mean_y), ...]}, categories)``; categories only for algo-compare."""
    if kind not in CHART_KINDS:
        raise ValueError(f"unknown chart kind {kind!r}; choose from {CHART_KINDS}")
    acc = defaultdict(lambda: defaultdict(list))
    cats: list[str] = []
    for r in rows:
        if not r.ok or r.pct_of_perfect is None:
            continue
        if kind == "budget":
            x = float(r.budget)
        elif kind == "scaling":
            x = _scaling_x(r)
        else:
            if r.algo not in cats:
                cats.append(r.algo)
            x = float(cats.index(r.algo))
        acc[_label(r, kind)][x].append(r.pct_of_perfect)
    series = {lab: sorted((x, sum(v) / len(v)) for x, v in pts.items())
              for lab, pts in acc.items()}
    if not series:
        raise ValueError("nothing to plot: no successful result rows")
    return series, cats


def nice_ticks(lo: float, hi: float, count: int = 6) -> list[float]:
    if hi <= lo:
        lo, hi = lo - 1.0, hi + 1.0
    raw = (hi - lo) / max(1, count - 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw)
    start = math.floor(lo / step) * step
    ticks = []
    t = start
    while t <= hi + step * 1e-9:
        ticks.append(round(t, 10))
        t += step
    if ticks[-1] < hi:
        ticks.append(round(t, 10))
    return ticks


def _fmt(v: float) -> str:
    return format(v, "g")


def render_chart(rows, kind: str, out, title: str | None = None) -> Path:
    """Write an SVG plotting pct_of_perfect per series; returns the output path."""
    series, cats = chart_series(rows, kind)
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    if kind == "algo-compare":
        xt = list(range(len(cats)))
        xlo, xhi = -0.5, len(cats) - 0.5
    else:
        xt = nice_ticks(min(xs), max(xs))
        xlo, xhi = xt[0], xt[-1]
    yt = nice_ticks(min(ys), max(ys))
    ylo, yhi = yt[0], yt[-1]
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM

    def px(x):
        return _LEFT + (x - xlo) / ((xhi - xlo) or 1.0) * pw

    def py(y):
        return _TOP + ph - (y - ylo) / ((yhi - ylo) or 1.0) * ph

    xlabel = {"budget": "unicast budget (fraction of demanded bandwidth)",
              "scaling": "scaling point",
              "algo-compare": "algorithm"}[kind]
    title = title or {"budget": "Cost vs unicast budget", "scaling": "Cost vs system size",
                      "algo-compare": "Cost by algorithm"}[kind]
    out_ = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
            f'<title>{escape(title)}</title>',
            f'<rect width="{_W}" height="{_H}" fill="white"/>',
            f'<text x="{_LEFT + pw / 2:.1f}" y="18" text-anchor="middle" font-size="14">'
            f'{escape(title)}</text>']
    # axes and grid
    out_.append(f'<g class="axes" stroke="#333" fill="none">'
                f'<line x1="{_LEFT}" y1="{_TOP + ph}" x2="{_LEFT + pw}" y2="{_TOP + ph}"/>'
                f'<line x1="{_LEFT}" y1="{_TOP}" x2="{_LEFT}" y2="{_TOP + ph}"/></g>')
    for t in yt:
        y = py(t)
        out_.append(f'<line x1="{_LEFT}" y1="{y:.1f}" x2="{_LEFT + pw}" y2="{y:.1f}" '
                    f'stroke="#ddd"/>')
        out_.append(f'<text x="{_LEFT - 6}" y="{y + 4:.1f}" text-anchor="end">{_fmt(t)}</text>')
    for i, t in enumerate(xt):
        x = px(t)
        lab = cats[i] if kind == "algo-compare" else _fmt(t)
        out_.append(f'<line x1="{x:.1f}" y1="{_TOP + ph}" x2="{x:.1f}" y2="{_TOP + ph + 5}" '
                    f'stroke="#333"/>')
        out_.append(f'<text x="{x:.1f}" y="{_TOP + ph + 18}" text-anchor="middle">'
                    f'{escape(lab)}</text>')
    out_.append(f'<text x="{_LEFT + pw / 2:.1f}" y="{_H - 15}" text-anchor="middle">'
                f'{escape(xlabel)}</text>')
    out_.append(f'<text x="18" y="{_TOP + ph / 2:.1f}" text-anchor="middle" '
                f'transform="rotate(-90 18 {_TOP + ph / 2:.1f})">% of perfect multicast</text>')
    # series
    for s, (lab, pts) in enumerate(sorted(series.items())):
        color = _COLORS[s % len(_COLORS)]
        coords = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in pts)
        out_.append(f'<g class="series" data-label="{escape(lab, _ATTR)}">')
        if len(pts) > 1:
            out_.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                        f'stroke-width="2"/>')
        for x, y in pts:
            out_.append(f'<circle class="marker" cx="{px(x):.1f}" cy="{py(y):.1f}" r="3.5" '
                        f'fill="{color}"/>')
        out_.append('</g>')
        ly = _TOP + 10 + 18 * s
        lx = _LEFT + pw + 15
        out_.append(f'<g class="legend"><line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" '
                    f'stroke="{color}" stroke-width="2"/>'
                    f'<circle cx="{lx + 10}" cy="{ly}" r="3.5" fill="{color}"/>'
                    f'<text x="{lx + 26}" y="{ly + 4}">{escape(lab)}</text></g>')
    out_.append('</svg>')
    path = Path(out)
    path.write_text("\n".join(out_) + "\n", encoding="utf-8")
    return path
