"""Minimal self-contained SVG line and scatter plots."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

__all__ = ["Plot"]

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#7f7f7f")


def _ticks(lo, hi, n=5):
    span = hi - lo
    raw = span / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = np.ceil(lo / step - 1e-9) * step
    return np.arange(start, hi + 1e-9 * span, step)


class Plot:
    """Fixed-axis plot; coordinates outside the axes are clipped by the frame."""

    def __init__(self, xlim, ylim, title="", xlabel="", ylabel="", width=640, height=440):
        self.xlim, self.ylim = tuple(map(float, xlim)), tuple(map(float, ylim))
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.w, self.h = width, height
        self.m = (60, 20, 40, 50)  # left, right, top, bottom
        self.items = []
        self.legend = []

    def _px(self, x, y):
        l, r, t, b = self.m
        x0, x1 = self.xlim
        y0, y1 = self.ylim
        px = l + (np.asarray(x, float) - x0) / (x1 - x0) * (self.w - l - r)
        py = self.h - b - (np.asarray(y, float) - y0) / (y1 - y0) * (self.h - t - b)
        return px, py

    def line(self, x, y, color=None, dash=False, width=1.5, label=None):
        color = color or PALETTE[len(self.legend) % len(PALETTE)]
        px, py = self._px(x, y)
        ok = np.isfinite(px) & np.isfinite(py)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px[ok], py[ok]))
        style = ' stroke-dasharray="6,4"' if dash else ""
        self.items.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                          f'stroke-width="{width}"{style}/>')
        if label:
            self.legend.append((label, color, dash))
        return self

    def points(self, x, y, err=None, color=None, radius=2.5, label=None):
        color = color or PALETTE[len(self.legend) % len(PALETTE)]
        px, py = self._px(x, y)
        if err is not None:
            _, lo = self._px(x, np.asarray(y) - err)
            _, hi = self._px(x, np.asarray(y) + err)
            for a, b, c in zip(px, lo, hi):
                if np.isfinite(b) and np.isfinite(c):
                    self.items.append(f'<line x1="{a:.2f}" y1="{b:.2f}" x2="{a:.2f}" y2="{c:.2f}" '
                                      f'stroke="{color}" stroke-width="1"/>')
        for a, b in zip(px, py):
            if np.isfinite(a) and np.isfinite(b):
                self.items.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="{radius}" fill="{color}"/>')
        if label:
            self.legend.append((label, color, False))
        return self

    def render(self) -> str:
        l, r, t, b = self.m
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w}" height="{self.h}" '
               f'viewBox="0 0 {self.w} {self.h}" font-family="sans-serif" font-size="11">',
               f'<rect width="{self.w}" height="{self.h}" fill="white"/>',
               f'<clipPath id="frame"><rect x="{l}" y="{t}" width="{self.w - l - r}" '
               f'height="{self.h - t - b}"/></clipPath>']
        for xt in _ticks(*self.xlim):
            px, _ = self._px(xt, self.ylim[0])
            out.append(f'<line x1="{px:.2f}" y1="{self.h - b}" x2="{px:.2f}" y2="{self.h - b + 4}" stroke="black"/>')
            out.append(f'<text x="{px:.2f}" y="{self.h - b + 16}" text-anchor="middle">{xt:g}</text>')
        for yt in _ticks(*self.ylim):
            _, py = self._px(self.xlim[0], yt)
            out.append(f'<line x1="{l - 4}" y1="{py:.2f}" x2="{l}" y2="{py:.2f}" stroke="black"/>')
            out.append(f'<text x="{l - 6}" y="{py + 4:.2f}" text-anchor="end">{yt:g}</text>')
        out.append('<g clip-path="url(#frame)">')
        out.extend(self.items)
        out.append("</g>")
        out.append(f'<rect x="{l}" y="{t}" width="{self.w - l - r}" height="{self.h - t - b}" '
                   f'fill="none" stroke="black"/>')
        out.append(f'<text x="{self.w / 2:.1f}" y="{t - 14}" text-anchor="middle" '
                   f'font-size="13">{escape(self.title)}</text>')
        out.append(f'<text x="{self.w / 2:.1f}" y="{self.h - 10}" text-anchor="middle">'
                   f'{escape(self.xlabel)}</text>')
        out.append(f'<text x="14" y="{self.h / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {self.h / 2:.1f})">{escape(self.ylabel)}</text>')
        for k, (label, color, dash) in enumerate(self.legend):
            y = t + 14 + 16 * k
            x = self.w - r - 150
            style = ' stroke-dasharray="6,4"' if dash else ""
            out.append(f'<line x1="{x}" y1="{y - 4}" x2="{x + 20}" y2="{y - 4}" stroke="{color}" '
                       f'stroke-width="2"{style}/>')
            out.append(f'<text x="{x + 26}" y="{y}">{escape(label)}</text>')
        out.append("</svg>\n")
        return "\n".join(out)
