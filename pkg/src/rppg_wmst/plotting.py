"""Deterministic SVG line and violin plots (no plotting library needed)."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .errors import DegenerateError

WIDTH, HEIGHT = 640, 400
MARGIN = (60, 20, 30, 50)  # left, right, top, bottom
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
KDE_POINTS = 128


def _f(v):
    # fixed precision keeps the bytes stable across platforms
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def silverman_bandwidth(x):
    """``0.9 min(sd, IQR / 1.34) n^(-1/5)``; falls back to sd when the IQR is 0."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n < 2:
        return 0.0
    sd = x.std(ddof=1)
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    return 0.9 * spread * n ** (-0.2)


def gaussian_kde(x, grid, bandwidth=None):
    x = np.asarray(x, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    bw = silverman_bandwidth(x) if bandwidth is None else bandwidth
    if not bw > 0:
        raise DegenerateError("zero bandwidth: data has no spread")
    z = (grid[:, None] - x[None, :]) / bw
    return np.exp(-0.5 * z * z).sum(axis=1) / (len(x) * bw * math.sqrt(2 * math.pi))


class _Frame:
    def __init__(self, x_range, y_range, width=WIDTH, height=HEIGHT):
        self.width, self.height = width, height
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        if self.x1 == self.x0:
            self.x0, self.x1 = self.x0 - 0.5, self.x1 + 0.5
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 0.5, self.y1 + 0.5
        left, right, top, bottom = MARGIN
        self.px0, self.px1 = left, width - right
        self.py0, self.py1 = height - bottom, top

    def x(self, v):
        return self.px0 + (v - self.x0) / (self.x1 - self.x0) * (self.px1 - self.px0)

    def y(self, v):
        return self.py0 + (v - self.y0) / (self.y1 - self.y0) * (self.py1 - self.py0)


def _header(frame, title):
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{frame.width}" height="{frame.height}" '
        f'viewBox="0 0 {frame.width} {frame.height}">',
        f'<rect x="0" y="0" width="{frame.width}" height="{frame.height}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{_f(frame.width / 2)}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>')
    return out


def _axes(frame, xlabel, ylabel, n_ticks=5, x_ticks=True):
    out = [
        f'<line x1="{_f(frame.px0)}" y1="{_f(frame.py0)}" x2="{_f(frame.px1)}" y2="{_f(frame.py0)}" stroke="black"/>',
        f'<line x1="{_f(frame.px0)}" y1="{_f(frame.py0)}" x2="{_f(frame.px0)}" y2="{_f(frame.py1)}" stroke="black"/>',
    ]
    for v in np.linspace(frame.y0, frame.y1, n_ticks):
        y = frame.y(v)
        out.append(f'<text x="{_f(frame.px0 - 6)}" y="{_f(y + 4)}" text-anchor="end" font-size="10">{v:.3g}</text>')
    if x_ticks:
        for v in np.linspace(frame.x0, frame.x1, n_ticks):
            x = frame.x(v)
            out.append(f'<text x="{_f(x)}" y="{_f(frame.py0 + 14)}" text-anchor="middle" font-size="10">{v:.3g}</text>')
    if xlabel:
        out.append(f'<text x="{_f((frame.px0 + frame.px1) / 2)}" y="{_f(frame.height - 8)}" '
                   f'text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
    if ylabel:
        cy = (frame.py0 + frame.py1) / 2
        out.append(f'<text x="14" y="{_f(cy)}" text-anchor="middle" font-size="12" '
                   f'transform="rotate(-90 14 {_f(cy)})">{escape(ylabel)}</text>')
    return out


def line_plot_svg(series, title="", xlabel="", ylabel="") -> str:
    """``series``: list of ``(label, x, y)``. Returns the SVG document."""
    series = [(lab, np.asarray(x, float), np.asarray(y, float)) for lab, x, y in series]
    if not series or any(len(x) == 0 or len(x) != len(y) for _, x, y in series):
        raise DegenerateError("line plot needs non-empty series with matching x and y")
    xs = np.concatenate([x for _, x, _ in series])
    ys = np.concatenate([y for _, _, y in series])
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise DegenerateError("non-finite plot data")
    frame = _Frame((xs.min(), xs.max()), (ys.min(), ys.max()))
    out = _header(frame, title) + _axes(frame, xlabel, ylabel)
    for k, (label, x, y) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_f(frame.x(a))},{_f(frame.y(b))}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{pts}"/>')
        out.append(f'<text x="{_f(frame.px1 - 4)}" y="{_f(frame.py1 + 12 + 14 * k)}" text-anchor="end" '
                   f'font-size="11" fill="{color}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def violin_outline(x, grid_points=KDE_POINTS):
    """``(grid, half_width)`` of a violin with unit maximum half-width.

    A dataset with no spread collapses to a single grid point, drawn as a tick.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise DegenerateError("empty dataset")
    bw = silverman_bandwidth(x)
    if not bw > 0:
        return np.array([x[0]]), np.array([1.0])
    grid = np.linspace(x.min() - 3 * bw, x.max() + 3 * bw, grid_points)
    dens = gaussian_kde(x, grid, bw)
    return grid, dens / dens.max()


def violin_plot_svg(datasets, title="", ylabel="") -> str:
    """``datasets``: list of ``(label, values)``; mirrored KDE per dataset."""
    datasets = [(lab, np.asarray(v, float).ravel()) for lab, v in datasets]
    if not datasets or any(v.size == 0 for _, v in datasets):
        raise DegenerateError("violin plot needs non-empty datasets")
    if not all(np.all(np.isfinite(v)) for _, v in datasets):
        raise DegenerateError("non-finite plot data")
    outlines = [violin_outline(v) for _, v in datasets]
    lo = min(g.min() for g, _ in outlines)
    hi = max(g.max() for g, _ in outlines)
    frame = _Frame((0.0, float(len(datasets))), (lo, hi))
    out = _header(frame, title) + _axes(frame, "", ylabel, x_ticks=False)
    slot = (frame.px1 - frame.px0) / len(datasets)
    half = 0.4 * slot
    for k, ((label, values), (grid, width)) in enumerate(zip(datasets, outlines)):
        color = PALETTE[k % len(PALETTE)]
        cx = frame.px0 + slot * (k + 0.5)
        if len(grid) == 1:
            y = frame.y(grid[0])
            out.append(f'<line x1="{_f(cx - half)}" y1="{_f(y)}" x2="{_f(cx + half)}" y2="{_f(y)}" '
                       f'stroke="{color}" stroke-width="2"/>')
        else:
            right = [f"{_f(cx + half * w)},{_f(frame.y(g))}" for g, w in zip(grid, width)]
            left = [f"{_f(cx - half * w)},{_f(frame.y(g))}" for g, w in zip(grid[::-1], width[::-1])]
            out.append(f'<polygon points="{" ".join(right + left)}" fill="{color}" fill-opacity="0.4" stroke="{color}"/>')
        med = frame.y(float(np.median(values)))
        out.append(f'<line x1="{_f(cx - half / 3)}" y1="{_f(med)}" x2="{_f(cx + half / 3)}" y2="{_f(med)}" stroke="black"/>')
        out.append(f'<text x="{_f(cx)}" y="{_f(frame.py0 + 14)}" text-anchor="middle" font-size="11">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
