"""Hand-rolled SVG charts.

Charts are written as plain SVG text with fixed formatting so identical
inputs produce byte-identical files (no timestamps, no generated ids).
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 40, 60


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _axes(lo_x, hi_x, lo_y, hi_y, title, x_label, y_label) -> list[str]:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="monospace" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.0f}" y="22" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" stroke="black"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>',
        f'<text x="{(_ML + _W - _MR) / 2:.0f}" y="{_H - 14}" text-anchor="middle">{x_label}</text>',
        f'<text x="16" y="{(_MT + _H - _MB) / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(_MT + _H - _MB) / 2:.0f})">{y_label}</text>',
    ]
    for tx in _ticks(lo_x, hi_x):
        px = _x_px(tx, lo_x, hi_x)
        parts.append(f'<line x1="{_fmt(px)}" y1="{_H - _MB}" x2="{_fmt(px)}" '
                     f'y2="{_H - _MB + 5}" stroke="black"/>')
        parts.append(f'<text x="{_fmt(px)}" y="{_H - _MB + 18}" '
                     f'text-anchor="middle">{tx:.3g}</text>')
    for ty in _ticks(lo_y, hi_y):
        py = _y_px(ty, lo_y, hi_y)
        parts.append(f'<line x1="{_ML - 5}" y1="{_fmt(py)}" x2="{_ML}" '
                     f'y2="{_fmt(py)}" stroke="black"/>')
        parts.append(f'<text x="{_ML - 8}" y="{_fmt(py + 4)}" '
                     f'text-anchor="end">{ty:.3g}</text>')
    return parts


def _x_px(x: float, lo: float, hi: float) -> float:
    span = (hi - lo) or 1.0
    return _ML + (x - lo) / span * (_W - _ML - _MR)


def _y_px(y: float, lo: float, hi: float) -> float:
    span = (hi - lo) or 1.0
    return (_H - _MB) - (y - lo) / span * (_H - _MT - _MB)


def _legend(names: Sequence[str]) -> list[str]:
    parts = []
    for i, name in enumerate(names):
        color = PALETTE[i % len(PALETTE)]
        y = _MT + 14 + 16 * i
        parts.append(f'<line x1="{_W - _MR - 150}" y1="{y}" x2="{_W - _MR - 130}" '
                     f'y2="{y}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{_W - _MR - 124}" y="{y + 4}">{name}</text>')
    return parts


def line_chart(series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
               path: str | Path, *, title: str, x_label: str, y_label: str) -> None:
    """Polyline chart; series is a list of (name, xs, ys)."""
    if not series:
        raise ValueError("line chart needs at least one series")
    all_x = [x for _, xs, _ in series for x in xs]
    all_y = [y for _, _, ys in series for y in ys]
    lo_x, hi_x = min(all_x), max(all_x)
    lo_y, hi_y = min(min(all_y), 0.0), max(all_y)
    parts = _axes(lo_x, hi_x, lo_y, hi_y, title, x_label, y_label)
    for i, (name, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_fmt(_x_px(x, lo_x, hi_x))},{_fmt(_y_px(y, lo_y, hi_y))}"
                       for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="2"/>')
        for x, y in zip(xs, ys):
            parts.append(f'<circle cx="{_fmt(_x_px(x, lo_x, hi_x))}" '
                         f'cy="{_fmt(_y_px(y, lo_y, hi_y))}" r="3" fill="{color}"/>')
    parts += _legend([name for name, _, _ in series])
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def scatter_chart(groups: Sequence[tuple[str, Sequence[float]]],
                  path: str | Path, *, title: str, y_label: str) -> None:
    """Grouped scatter: group i plots its values at x = i with jitter-free spread."""
    if not groups:
        raise ValueError("scatter chart needs at least one group")
    all_y = [y for _, ys in groups for y in ys]
    if not all_y:
        raise ValueError("scatter chart needs at least one point")
    lo_y, hi_y = min(min(all_y), 0.0), max(all_y)
    lo_x, hi_x = -0.5, len(groups) - 0.5
    parts = _axes(lo_x, hi_x, lo_y, hi_y, title, "group", y_label)
    for i, (name, ys) in enumerate(groups):
        color = PALETTE[i % len(PALETTE)]
        n = max(len(ys), 1)
        for j, y in enumerate(ys):
            x = i - 0.25 + 0.5 * (j + 0.5) / n
            parts.append(f'<circle cx="{_fmt(_x_px(x, lo_x, hi_x))}" '
                         f'cy="{_fmt(_y_px(y, lo_y, hi_y))}" r="3" fill="{color}"/>')
        px = _x_px(i, lo_x, hi_x)
        parts.append(f'<text x="{_fmt(px)}" y="{_H - _MB + 32}" '
                     f'text-anchor="middle">{name}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
