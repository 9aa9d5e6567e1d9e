"""Minimal deterministic SVG scatter/line plots (no plotting dependency).

Output bytes depend only on the data passed in, which keeps run directories
byte-reproducible.
"""

from __future__ import annotations

import numpy as np

_PALETTE = [
    "#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377",
    "#bbbbbb", "#000000",
]

_W, _H, _PAD = 640, 480, 50


def _scale(values, lo, hi, out_lo, out_hi):
    span = hi - lo if hi > lo else 1.0
    return out_lo + (np.asarray(values, float) - lo) * (out_hi - out_lo) / span


def _frame(title):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.0f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
    ]


def svg_scatter(points, labels, path, title="embedding"):
    """2-D scatter colored by label; labels may be any hashable values."""
    points = np.asarray(points, dtype=float)
    names = sorted({str(l) for l in labels})
    colors = {n: _PALETTE[i % len(_PALETTE)] for i, n in enumerate(names)}
    xlo, xhi = points[:, 0].min(), points[:, 0].max()
    ylo, yhi = points[:, 1].min(), points[:, 1].max()
    xs = _scale(points[:, 0], xlo, xhi, _PAD, _W - _PAD)
    ys = _scale(points[:, 1], ylo, yhi, _H - _PAD, _PAD)
    parts = _frame(title)
    for x, y, label in zip(xs, ys, labels):
        parts.append(
            f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" fill="{colors[str(label)]}" '
            f'fill-opacity="0.75"/>'
        )
    for i, name in enumerate(names):
        y = _PAD + 16 * i
        parts.append(
            f'<circle cx="{_W - 130}" cy="{y}" r="4" fill="{colors[name]}"/>'
            f'<text x="{_W - 120}" y="{y + 4}" font-family="sans-serif" '
            f'font-size="12">{name}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def svg_lines(xs, series, path, title="trace", ylabel=""):
    """Line chart; `series` maps name -> y array over the common xs."""
    xs = np.asarray(xs, dtype=float)
    all_y = np.concatenate([np.asarray(v, float) for v in series.values()])
    ylo, yhi = float(all_y.min()), float(all_y.max())
    if yhi - ylo < 1e-12:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    px = _scale(xs, xs.min(), xs.max(), _PAD, _W - _PAD)
    parts = _frame(title)
    parts.append(
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" '
        f'stroke="black"/>'
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_PAD}" y2="{_PAD}" stroke="black"/>'
    )
    for tick in (ylo, 0.5 * (ylo + yhi), yhi):
        py = float(_scale([tick], ylo, yhi, _H - _PAD, _PAD)[0])
        parts.append(
            f'<text x="{_PAD - 6}" y="{py + 4}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{tick:.3f}</text>'
        )
    for i, (name, ys) in enumerate(sorted(series.items())):
        py = _scale(np.asarray(ys, float), ylo, yhi, _H - _PAD, _PAD)
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(px, py))
        color = _PALETTE[i % len(_PALETTE)]
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{_W - _PAD - 4}" y="{_PAD + 16 * i}" text-anchor="end" '
            f'font-family="sans-serif" font-size="12" fill="{color}">{name}</text>'
        )
    if ylabel:
        parts.append(
            f'<text x="16" y="{_H / 2:.0f}" font-family="sans-serif" '
            f'font-size="12" transform="rotate(-90 16 {_H / 2:.0f})" '
            f'text-anchor="middle">{ylabel}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
