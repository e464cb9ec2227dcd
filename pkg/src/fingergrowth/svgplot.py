"""Minimal deterministic SVG emission: scatter and box plots.

Fixed 800x600 viewport, axes annotated with data min/max.  Output contains
no timestamps or random identifiers, so identical inputs give identical
bytes.  Box quantiles use linear interpolation (quartile boxes, whiskers at
the 5% and 95% quantiles).
"""
from __future__ import annotations

import numpy as np

from .errors import ValidationError

WIDTH = 800
HEIGHT = 600
MARGIN = 70


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _header() -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]


def _axes(x_min, x_max, y_min, y_max, x_label: str, y_label: str) -> list[str]:
    x0, x1 = MARGIN, WIDTH - MARGIN
    y0, y1 = HEIGHT - MARGIN, MARGIN
    parts = [
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{x0}" y="{y0 + 20}" font-size="12" text-anchor="middle">{_fmt(x_min)}</text>',
        f'<text x="{x1}" y="{y0 + 20}" font-size="12" text-anchor="middle">{_fmt(x_max)}</text>',
        f'<text x="{x0 - 8}" y="{y0 + 4}" font-size="12" text-anchor="end">{_fmt(y_min)}</text>',
        f'<text x="{x0 - 8}" y="{y1 + 4}" font-size="12" text-anchor="end">{_fmt(y_max)}</text>',
    ]
    if x_label:
        parts.append(f'<text x="{(x0 + x1) // 2}" y="{HEIGHT - 15}" font-size="14" '
                     f'text-anchor="middle">{x_label}</text>')
    if y_label:
        parts.append(f'<text x="20" y="{(y0 + y1) // 2}" font-size="14" text-anchor="middle" '
                     f'transform="rotate(-90 20 {(y0 + y1) // 2})">{y_label}</text>')
    return parts


def _span(lo: float, hi: float) -> tuple[float, float]:
    if hi == lo:
        return lo - 1.0, hi + 1.0
    return lo, hi


def scatter_svg(x, y, x_label: str = "", y_label: str = "") -> str:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size == 0 or x.shape != y.shape:
        raise ValidationError("scatter needs two equal-length non-empty columns")
    x_min, x_max = _span(float(x.min()), float(x.max()))
    y_min, y_max = _span(float(y.min()), float(y.max()))
    sx = (WIDTH - 2 * MARGIN) / (x_max - x_min)
    sy = (HEIGHT - 2 * MARGIN) / (y_max - y_min)
    parts = _header() + _axes(x_min, x_max, y_min, y_max, x_label, y_label)
    for xi, yi in zip(x, y):
        px = MARGIN + (xi - x_min) * sx
        py = HEIGHT - MARGIN - (yi - y_min) * sy
        parts.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="3" fill="steelblue" '
                     f'fill-opacity="0.7"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def box_stats(values) -> dict[str, float]:
    """Five box-plot statistics with linear-interpolation quantiles."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValidationError("box plot group is empty")
    lo, q1, med, q3, hi = (float(v) for v in
                           np.percentile(arr, [5.0, 25.0, 50.0, 75.0, 95.0]))
    return {"whisker_low": lo, "q1": q1, "median": med, "q3": q3, "whisker_high": hi}


def box_svg(groups: dict[str, "np.ndarray"], y_label: str = "") -> str:
    if not groups:
        raise ValidationError("box plot needs at least one group")
    stats = {name: box_stats(vals) for name, vals in groups.items()}
    y_min = min(s["whisker_low"] for s in stats.values())
    y_max = max(s["whisker_high"] for s in stats.values())
    y_min, y_max = _span(y_min, y_max)
    sy = (HEIGHT - 2 * MARGIN) / (y_max - y_min)

    def py(v: float) -> float:
        return HEIGHT - MARGIN - (v - y_min) * sy

    n = len(stats)
    slot = (WIDTH - 2 * MARGIN) / n
    box_w = slot * 0.5
    parts = _header() + _axes(0.0, float(n), y_min, y_max, "", y_label)
    for k, (name, s) in enumerate(stats.items()):
        cx = MARGIN + slot * (k + 0.5)
        x_l, x_r = cx - box_w / 2, cx + box_w / 2
        parts += [
            f'<line x1="{_fmt(cx)}" y1="{_fmt(py(s["whisker_low"]))}" '
            f'x2="{_fmt(cx)}" y2="{_fmt(py(s["q1"]))}" stroke="black"/>',
            f'<line x1="{_fmt(cx)}" y1="{_fmt(py(s["q3"]))}" '
            f'x2="{_fmt(cx)}" y2="{_fmt(py(s["whisker_high"]))}" stroke="black"/>',
            f'<rect x="{_fmt(x_l)}" y="{_fmt(py(s["q3"]))}" width="{_fmt(box_w)}" '
            f'height="{_fmt(py(s["q1"]) - py(s["q3"]))}" fill="lightsteelblue" stroke="black"/>',
            f'<line x1="{_fmt(x_l)}" y1="{_fmt(py(s["median"]))}" '
            f'x2="{_fmt(x_r)}" y2="{_fmt(py(s["median"]))}" stroke="black" stroke-width="2"/>',
            f'<text x="{_fmt(cx)}" y="{HEIGHT - MARGIN + 20}" font-size="12" '
            f'text-anchor="middle">{name}</text>',
        ]
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
