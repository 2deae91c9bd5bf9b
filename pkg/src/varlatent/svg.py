"""Minimal SVG emitters: scatter plots, heat maps, and line charts."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]

W, H, PAD = 640, 640, 48


def _doc(body: list[str], width: int = W, height: int = H, title: str = "") -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">')
    parts = [head, f'<rect width="{width}" height="{height}" fill="white"/>']
    if title:
        parts.append(f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>')
    parts.extend(body)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _scale(v: np.ndarray, lo: float, hi: float, a: float, b: float) -> np.ndarray:
    span = hi - lo if hi > lo else 1.0
    return a + (v - lo) / span * (b - a)


def scatter(points: np.ndarray, labels: Sequence[str] | None = None, groups: Sequence[str] | None = None,
            lines: Sequence[tuple[int, int]] = (), title: str = "",
            bounds: tuple[float, float, float, float] | None = None, unit_circle: bool = False) -> str:
    """Labelled scatter of 2-D points with optional group colors and pair lines.

    Each line is drawn from its first point to its second, thicker at the first end.
    """
    pts = np.asarray(points, dtype=np.float64)
    if bounds is None:
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        pad = (hi - lo) * 0.05 + 1e-12
        bounds = (lo[0] - pad[0], hi[0] + pad[0], lo[1] - pad[1], hi[1] + pad[1])
    x0, x1, y0, y1 = bounds
    px = _scale(pts[:, 0], x0, x1, PAD, W - PAD)
    py = _scale(pts[:, 1], y0, y1, H - PAD, PAD)
    body = [f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" fill="none" stroke="#444"/>']
    if unit_circle:
        cx, cy = _scale(np.array([0.0]), x0, x1, PAD, W - PAD)[0], _scale(np.array([0.0]), y0, y1, H - PAD, PAD)[0]
        rx = (W - 2 * PAD) / (x1 - x0)
        ry = (H - 2 * PAD) / (y1 - y0)
        body.append(f'<ellipse cx="{cx:.2f}" cy="{cy:.2f}" rx="{rx:.2f}" ry="{ry:.2f}" fill="none" stroke="#bbb"/>')
    for a, b in lines:
        body.append(f'<line x1="{px[a]:.2f}" y1="{py[a]:.2f}" x2="{px[b]:.2f}" y2="{py[b]:.2f}" '
                    f'stroke="#2ca02c" stroke-width="1" opacity="0.7"/>')
        body.append(f'<circle cx="{px[a]:.2f}" cy="{py[a]:.2f}" r="5" fill="none" stroke="#2ca02c"/>')
    group_names = sorted(set(groups)) if groups is not None else []
    color = {g: PALETTE[i % len(PALETTE)] for i, g in enumerate(group_names)}
    for i in range(len(pts)):
        fill = color[groups[i]] if groups is not None else PALETTE[0]
        body.append(f'<circle cx="{px[i]:.2f}" cy="{py[i]:.2f}" r="3" fill="{fill}"/>')
        if labels is not None:
            body.append(f'<text x="{px[i] + 4:.2f}" y="{py[i] - 4:.2f}" font-size="8">{escape(str(labels[i]))}</text>')
    for k, g in enumerate(group_names):
        y = PAD + 14 * k + 10
        body.append(f'<rect x="{W - PAD - 110}" y="{y - 8}" width="8" height="8" fill="{color[g]}"/>')
        body.append(f'<text x="{W - PAD - 98}" y="{y}">{escape(g)}</text>')
    return _doc(body, title=title)


def heatmap(grid: np.ndarray, title: str = "", cmap: str = "viridis") -> str:
    """Grid ``[a, b]`` drawn with axis-1 index a to the right and axis-2 index b upward."""
    g = np.asarray(grid, dtype=np.float64)
    na, nb = g.shape
    lo, hi = float(g.min()), float(g.max())
    cw = (W - 2 * PAD) / na
    ch = (H - 2 * PAD) / nb
    body = []
    for a in range(na):
        for b in range(nb):
            t = 0.5 if hi == lo else (g[a, b] - lo) / (hi - lo)
            x = PAD + a * cw
            y = H - PAD - (b + 1) * ch
            body.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{cw + 0.3:.2f}" height="{ch + 0.3:.2f}" '
                        f'fill="{_color(t, cmap)}"/>')
    body.append(f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" fill="none" stroke="#444"/>')
    body.append(f'<text x="{PAD}" y="{H - 14}">min {lo:.4g}  max {hi:.4g}</text>')
    return _doc(body, title=title)


def line_chart(series: dict[str, np.ndarray], title: str = "", xlabels: Sequence[str] | None = None) -> str:
    width, height = 900, 360
    allv = np.concatenate([np.asarray(v, dtype=np.float64) for v in series.values()])
    lo, hi = float(allv.min()), float(allv.max())
    body = [f'<rect x="{PAD}" y="{PAD}" width="{width - 2 * PAD}" height="{height - 2 * PAD}" fill="none" stroke="#444"/>']
    for k, (name, vals) in enumerate(series.items()):
        v = np.asarray(vals, dtype=np.float64)
        xs = _scale(np.arange(v.size, dtype=np.float64), 0, max(v.size - 1, 1), PAD, width - PAD)
        ys = _scale(v, lo, hi, height - PAD, PAD)
        path = " ".join(f"{x:.1f},{y:.1f}" for x, y in zip(xs, ys))
        col = PALETTE[k % len(PALETTE)]
        body.append(f'<polyline points="{path}" fill="none" stroke="{col}" stroke-width="1"/>')
        body.append(f'<text x="{PAD + 4}" y="{PAD + 14 * (k + 1)}" fill="{col}">{escape(name)}</text>')
    if xlabels is not None and len(xlabels):
        body.append(f'<text x="{PAD}" y="{height - 20}">{escape(str(xlabels[0]))}</text>')
        body.append(f'<text x="{width - PAD}" y="{height - 20}" text-anchor="end">{escape(str(xlabels[-1]))}</text>')
    return _doc(body, width, height, title)


def _color(t: float, cmap: str) -> str:
    # coarse viridis-like ramp: dark purple -> teal -> yellow
    stops = np.array([[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]], float)
    if cmap == "gray":
        stops = np.array([[0, 0, 0], [255, 255, 255]], float)
    pos = t * (len(stops) - 1)
    i = min(int(pos), len(stops) - 2)
    c = stops[i] + (stops[i + 1] - stops[i]) * (pos - i)
    return "#%02x%02x%02x" % tuple(int(round(v)) for v in c)


def write(svg: str, path: str | Path) -> None:
    Path(path).write_text(svg, encoding="utf-8")
