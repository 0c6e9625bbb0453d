"""Self-contained SVG reliability diagram, no plotting dependency.

Bars show per-bin accuracy against the diagonal of perfect calibration;
bar color encodes occupancy. Output is a deterministic function of the bins.
"""

from __future__ import annotations

from typing import Sequence

from .metrics import BinStats

_W, _H, _M = 420, 420, 48


def _x(v: float) -> float:
    return _M + v * (_W - 2 * _M)


def _y(v: float) -> float:
    return _H - _M - v * (_H - 2 * _M)


def reliability_svg(bins: Sequence[BinStats], *, title: str = "Reliability") -> str:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{title}</text>',
    ]
    total = sum(b.count for b in bins) or 1
    for b in bins:
        if not b.count or b.accuracy is None:
            continue
        x0, x1 = _x(b.lo), _x(b.hi)
        y0, y1 = _y(0.0), _y(b.accuracy)
        share = b.count / total
        parts.append(
            f'<rect x="{x0:.1f}" y="{min(y0, y1):.1f}" width="{x1 - x0:.1f}" '
            f'height="{abs(y0 - y1):.1f}" fill="#4878b0" fill-opacity="{0.35 + 0.6 * share:.3f}" '
            f'stroke="#2a4a70" stroke-width="1"/>'
        )
    axis = (
        f'<line x1="{_x(0):.1f}" y1="{_y(0):.1f}" x2="{_x(1):.1f}" y2="{_y(0):.1f}" '
        f'stroke="black"/>'
        f'<line x1="{_x(0):.1f}" y1="{_y(0):.1f}" x2="{_x(0):.1f}" y2="{_y(1):.1f}" '
        f'stroke="black"/>'
        f'<line x1="{_x(0):.1f}" y1="{_y(0):.1f}" x2="{_x(1):.1f}" y2="{_y(1):.1f}" '
        f'stroke="#999" stroke-dasharray="4 3"/>'
    )
    parts.append(axis)
    for tick in range(0, 11, 2):
        v = tick / 10
        parts.append(
            f'<text x="{_x(v):.1f}" y="{_y(0) + 16:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{v:.1f}</text>'
        )
        parts.append(
            f'<text x="{_x(0) - 8:.1f}" y="{_y(v) + 3:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{v:.1f}</text>'
        )
    parts.append(
        f'<text x="{_x(0.5):.1f}" y="{_H - 8}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11">mean confidence</text>'
    )
    parts.append(
        f'<text x="14" y="{_y(0.5):.1f}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="11" transform="rotate(-90 14 {_y(0.5):.1f})">accuracy</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
