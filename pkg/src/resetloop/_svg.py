"""Minimal SVG line plots (log-x polylines) for the CLI's --svg output."""

from __future__ import annotations

import math

WIDTH, HEIGHT = 720, 420
MARGIN = 56
PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
)


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo == hi:
        return [lo]
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def line_plot_svg(
    curves: dict[str, tuple[list[float], list[float]]],
    title: str,
    xlabel: str,
    ylabel: str,
    logx: bool = True,
) -> str:
    """Render labelled (x, y) polylines to an SVG string."""
    xs_all, ys_all = [], []
    for xs, ys in curves.values():
        for x, y in zip(xs, ys):
            if math.isfinite(x) and math.isfinite(y) and (not logx or x > 0):
                xs_all.append(math.log10(x) if logx else x)
                ys_all.append(y)
    if not xs_all:
        xs_all, ys_all = [0.0, 1.0], [0.0, 1.0]
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def px(x: float) -> float:
        return MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2 * MARGIN)

    def py(y: float) -> float:
        return HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2 * MARGIN)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="monospace" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="18" text-anchor="middle" font-size="13">{title}</text>',
    ]
    # axes box + ticks
    parts.append(
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" '
        f'height="{HEIGHT - 2 * MARGIN}" fill="none" stroke="black"/>'
    )
    for xv in _ticks(x_lo, x_hi):
        parts.append(
            f'<line x1="{px(xv):.1f}" y1="{HEIGHT - MARGIN}" x2="{px(xv):.1f}" '
            f'y2="{HEIGHT - MARGIN + 4}" stroke="black"/>'
        )
        label = f"1e{xv:.1f}" if logx else f"{xv:.3g}"
        parts.append(
            f'<text x="{px(xv):.1f}" y="{HEIGHT - MARGIN + 16}" '
            f'text-anchor="middle">{label}</text>'
        )
    for yv in _ticks(y_lo, y_hi):
        parts.append(
            f'<line x1="{MARGIN - 4}" y1="{py(yv):.1f}" x2="{MARGIN}" '
            f'y2="{py(yv):.1f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{MARGIN - 6}" y="{py(yv):.1f}" text-anchor="end" '
            f'dominant-baseline="middle">{yv:.3g}</text>'
        )
    parts.append(
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle">{xlabel}</text>'
    )
    parts.append(
        f'<text x="16" y="{HEIGHT / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {HEIGHT / 2})">{ylabel}</text>'
    )
    for i, (name, (xs, ys)) in enumerate(curves.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = []
        for x, y in zip(xs, ys):
            if not (math.isfinite(x) and math.isfinite(y)):
                continue
            if logx:
                if x <= 0:
                    continue
                x = math.log10(x)
            pts.append(f"{px(x):.1f},{py(y):.1f}")
        if pts:
            parts.append(
                f'<polyline points="{" ".join(pts)}" fill="none" '
                f'stroke="{color}" stroke-width="1.5"/>'
            )
        parts.append(
            f'<text x="{WIDTH - MARGIN - 6}" y="{MARGIN + 14 + 13 * i}" '
            f'text-anchor="end" fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
