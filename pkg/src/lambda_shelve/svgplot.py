"""Minimal self-contained SVG line charts with a logarithmic x axis."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 720, 440
MARGIN = dict(left=70, right=170, top=30, bottom=50)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


def _fmt(x):
    return f"{x:.6g}"


def line_chart(x, series: dict, *, title="", xlabel="", ylabel="") -> str:
    """Render ``series`` (name -> y values) against ``x`` as an SVG document.

    Points with non-positive or non-finite ``x`` and non-finite ``y`` are
    dropped.
    """
    pts = {}
    for name, ys in series.items():
        pts[name] = [
            (math.log10(a), float(b))
            for a, b in zip(x, ys)
            if a is not None and b is not None and a > 0 and math.isfinite(a) and math.isfinite(b)
        ]
    xs = [p[0] for v in pts.values() for p in v]
    ys = [p[1] for v in pts.values() for p in v]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def py(v):
        return MARGIN["top"] + (1 - (v - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
        'fill="none" stroke="black"/>',
    ]
    for d in range(math.ceil(x0), math.floor(x1) + 1):
        gx = _fmt(px(d))
        out.append(f'<line x1="{gx}" y1="{MARGIN["top"]}" x2="{gx}" y2="{MARGIN["top"] + ph}" '
                   'stroke="#ddd"/>')
        out.append(f'<text x="{gx}" y="{MARGIN["top"] + ph + 16}" text-anchor="middle">1e{d}</text>')
    for i in range(5):
        v = y0 + (y1 - y0) * i / 4
        gy = _fmt(py(v))
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{gy}" text-anchor="end">{_fmt(v)}</text>')
    for i, (name, p) in enumerate(pts.items()):
        color = COLORS[i % len(COLORS)]
        if p:
            path = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in p)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{path}"/>')
        ly = MARGIN["top"] + 14 + 18 * i
        lx = WIDTH - MARGIN["right"] + 12
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" '
                   'stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}">{escape(name)}</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="18" text-anchor="middle">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 10}" '
                   f'text-anchor="middle">{escape(xlabel)} (log scale)</text>')
    if ylabel:
        out.append(f'<text x="14" y="{MARGIN["top"] + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {MARGIN["top"] + ph / 2})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
