"""Minimal polyline SVG line charts."""

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#0064ff", "#96aa28", "#ff4874", "#222222", "#8a2be2", "#ff8c00", "#008b8b"]


def _ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    return list(np.linspace(lo, hi, n))


def line_chart(series, title="", xlabel="", ylabel="", width=640, height=360, markers=False):
    """Render ``[(label, xs, ys), ...]`` as an SVG document string."""
    ml, mr, mt, mb = 70, 150, 30, 50
    pw, ph = width - ml - mr, height - mt - mb
    xs_all = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    ys_all = np.concatenate([np.asarray(s[2], dtype=float) for s in series])
    x0, x1 = float(xs_all.min()), float(xs_all.max())
    y0, y1 = float(ys_all.min()), float(ys_all.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 1.0, y1 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for xv in _ticks(x0, x1):
        out.append(f'<line x1="{px(xv):.2f}" y1="{mt}" x2="{px(xv):.2f}" y2="{mt + ph}" stroke="#ddd"/>')
        out.append(f'<text x="{px(xv):.2f}" y="{mt + ph + 15}" text-anchor="middle">{xv:.4g}</text>')
    for yv in _ticks(y0, y1):
        out.append(f'<line x1="{ml}" y1="{py(yv):.2f}" x2="{ml + pw}" y2="{py(yv):.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{ml - 5}" y="{py(yv) + 4:.2f}" text-anchor="end">{yv:.4g}</text>')
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{px(float(x)):.2f},{py(float(y)):.2f}" for x, y in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        if markers:
            for x, y in zip(xs, ys):
                out.append(f'<circle cx="{px(float(x)):.2f}" cy="{py(float(y)):.2f}" r="3" '
                           f'fill="none" stroke="{color}"/>')
        ly = mt + 14 * (i + 1)
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly - 4}" x2="{ml + pw + 30}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 35}" y="{ly}">{escape(str(label))}</text>')
    if title:
        out.append(f'<text x="{ml + pw / 2}" y="{mt - 10}" text-anchor="middle" font-size="13">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{ml + pw / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="15" y="{mt + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 15 {mt + ph / 2})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out)
