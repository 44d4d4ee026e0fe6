"""Minimal SVG line plots written by hand (no plotting dependency)."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
W, H = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 30, 50


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def line_plot(series, *, title: str = "", xlabel: str = "", ylabel: str = "",
              logx: bool = False, logy: bool = False, markers: bool = False) -> str:
    """``series`` is a list of ``(label, xs, ys)``.  Non-finite points and,
    on log axes, non-positive ones are dropped."""
    fx = math.log10 if logx else float
    fy = math.log10 if logy else float
    clean = []
    for label, xs, ys in series:
        pts = [(fx(x), fy(y)) for x, y in zip(xs, ys)
               if x is not None and y is not None and math.isfinite(x) and math.isfinite(y)
               and (not logx or x > 0) and (not logy or y > 0)]
        clean.append((label, pts))
    allx = [x for _, pts in clean for x, _ in pts] or [0.0, 1.0]
    ally = [y for _, pts in clean for _, y in pts] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return TOP + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for v in _ticks(x0, x1):
        lab = f"{10 ** v:.3g}" if logx else f"{v:.4g}"
        out.append(f'<line x1="{sx(v):.2f}" y1="{TOP + ph}" x2="{sx(v):.2f}" y2="{TOP + ph + 5}" '
                   'stroke="black"/>')
        out.append(f'<text x="{sx(v):.2f}" y="{TOP + ph + 18}" text-anchor="middle">{lab}</text>')
    for v in _ticks(y0, y1):
        lab = f"{10 ** v:.3g}" if logy else f"{v:.4g}"
        out.append(f'<line x1="{LEFT - 5}" y1="{sy(v):.2f}" x2="{LEFT}" y2="{sy(v):.2f}" '
                   'stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{sy(v) + 4:.2f}" text-anchor="end">{lab}</text>')
    for i, (label, pts) in enumerate(clean):
        color = COLORS[i % len(COLORS)]
        if len(pts) > 1:
            path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                       f'points="{path}"/>')
        if markers or len(pts) == 1:
            out += [f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>'
                    for x, y in pts]
        out.append(f'<text x="{LEFT + 10}" y="{TOP + 16 + 16 * i}" fill="{color}">'
                   f'{escape(label)}</text>')
    out.append(f'<text x="{W / 2}" y="{TOP - 10}" text-anchor="middle">{escape(title)}</text>')
    out.append(f'<text x="{LEFT + pw / 2}" y="{H - 10}" text-anchor="middle">'
               f'{escape(xlabel)}</text>')
    out.append(f'<text x="15" y="{TOP + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 15 {TOP + ph / 2})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
