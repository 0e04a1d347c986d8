"""Minimal SVG line plots: axes, polylines, markers and labels.

Only what the command-line reports need. Output is plain, deterministic XML
so files can be diffed between runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _num(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


@dataclass
class _Series:
    xs: list
    ys: list
    color: str
    dashed: bool
    width: float
    label: str | None
    markers: bool


@dataclass
class Plot:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    width: int = 640
    height: int = 480
    logy: bool = False
    series: list = field(default_factory=list)
    _limits: tuple | None = None

    def line(self, xs, ys, color=None, dashed=False, width=1.5, label=None, markers=False):
        xs = [float(v) for v in xs]
        ys = [float(v) for v in ys]
        if len(xs) != len(ys):
            raise ValueError("x and y lengths differ")
        color = color or PALETTE[len(self.series) % len(PALETTE)]
        self.series.append(_Series(xs, ys, color, dashed, width, label, markers))
        return self

    def points(self, xs, ys, color=None, label=None):
        return self.line(xs, ys, color=color, width=0.0, label=label, markers=True)

    def limits(self, xlim, ylim):
        """Fix the data window (otherwise it is fitted to the finite data)."""
        self._limits = (tuple(xlim), tuple(ylim))
        return self

    def _ty(self, y):
        if self.logy:
            return math.log10(y) if y > 0 else math.nan
        return y

    def _window(self):
        if self._limits is not None:
            (x0, x1), (y0, y1) = self._limits
            return x0, x1, self._ty(y0), self._ty(y1)
        xs = [x for s in self.series for x in s.xs if math.isfinite(x)]
        ys = [self._ty(y) for s in self.series for y in s.ys]
        ys = [y for y in ys if math.isfinite(y)]
        if not xs or not ys:
            return -1.0, 1.0, -1.0, 1.0
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
        if x1 - x0 < 1e-12:
            x0, x1 = x0 - 1.0, x1 + 1.0
        if y1 - y0 < 1e-12:
            y0, y1 = y0 - 1.0, y1 + 1.0
        px, py = 0.05 * (x1 - x0), 0.05 * (y1 - y0)
        return x0 - px, x1 + px, y0 - py, y1 + py

    def to_svg(self) -> str:
        W, H = self.width, self.height
        ml, mr, mt, mb = 70, 20, 36, 50
        x0, x1, y0, y1 = self._window()

        def X(x):
            return ml + (x - x0) / (x1 - x0) * (W - ml - mr)

        def Y(y):
            return H - mb - (self._ty(y) - y0) / (y1 - y0) * (H - mt - mb)

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
            f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
            f'<rect x="{ml}" y="{mt}" width="{W - ml - mr}" height="{H - mt - mb}" fill="none" stroke="black"/>',
        ]
        # zero axes when in view
        if x0 < 0 < x1:
            out.append(f'<line x1="{_num(X(0))}" y1="{mt}" x2="{_num(X(0))}" y2="{H - mb}" stroke="#999"/>')
        if not self.logy and y0 < 0 < y1:
            out.append(f'<line x1="{ml}" y1="{_num(Y(0))}" x2="{W - mr}" y2="{_num(Y(0))}" stroke="#999"/>')
        for i in range(5):
            fx = x0 + (x1 - x0) * i / 4
            fy = y0 + (y1 - y0) * i / 4
            ylab = f"1e{fy:.1f}" if self.logy else f"{fy:.3g}"
            out.append(f'<text x="{_num(X(fx))}" y="{H - mb + 16}" font-size="11" text-anchor="middle">{fx:.3g}</text>')
            yy = H - mb - (fy - y0) / (y1 - y0) * (H - mt - mb)
            out.append(f'<text x="{ml - 6}" y="{_num(yy + 4)}" font-size="11" text-anchor="end">{ylab}</text>')
        out.append(f'<clipPath id="plot"><rect x="{ml}" y="{mt}" width="{W - ml - mr}" height="{H - mt - mb}"/></clipPath>')
        out.append('<g clip-path="url(#plot)">')
        for s in self.series:
            pts = [(X(x), Y(y)) for x, y in zip(s.xs, s.ys) if math.isfinite(x) and math.isfinite(self._ty(y))]
            if s.width > 0 and len(pts) > 1:
                dash = ' stroke-dasharray="6,4"' if s.dashed else ""
                coords = " ".join(f"{_num(a)},{_num(b)}" for a, b in pts)
                out.append(f'<polyline points="{coords}" fill="none" stroke="{s.color}" stroke-width="{s.width}"{dash}/>')
            if s.markers or len(pts) == 1:
                for a, b in pts:
                    out.append(f'<circle cx="{_num(a)}" cy="{_num(b)}" r="3" fill="{s.color}"/>')
        out.append("</g>")
        ly = mt + 14
        for s in self.series:
            if s.label:
                out.append(f'<text x="{W - mr - 6}" y="{ly}" font-size="11" text-anchor="end" fill="{s.color}">'
                           f"{escape(s.label)}</text>")
                ly += 14
        out.append(f'<text x="{W / 2:.0f}" y="22" font-size="14" text-anchor="middle">{escape(self.title)}</text>')
        out.append(f'<text x="{W / 2:.0f}" y="{H - 12}" font-size="12" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text x="16" y="{H / 2:.0f}" font-size="12" text-anchor="middle" '
                   f'transform="rotate(-90 16 {H / 2:.0f})">{escape(self.ylabel)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_svg())
