"""Deterministic static SVG rendering of shape exports.

Output depends only on the inputs: coordinates are printed with fixed
precision, element order follows the input order and no timestamps or ids
are generated.  Heatmaps use a two-tone diverging ramp anchored at zero:
negative cells fade from white to blue, positive cells from white to red,
with intensity ``|v| / max|v|``.
"""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .shape_export import ShapeExport

PANEL_W, PANEL_H = 260, 190
MARGIN = dict(left=46, right=12, top=26, bottom=30)
NEGATIVE_RGB = (33, 102, 172)
POSITIVE_RGB = (178, 24, 43)
LINE_COLOR = "#1f3b73"
BAND_COLOR = "#9fb3d9"
BAR_COLOR = "#4a6fa5"

STYLE = (".axis{stroke:#333;stroke-width:1;fill:none}"
         ".frame{fill:#fff;stroke:#bbb;stroke-width:1}"
         ".grid{stroke:#e4e4e4;stroke-width:0.5}"
         ".tick{font:9px sans-serif;fill:#333}"
         ".title{font:11px sans-serif;fill:#111}"
         ".curve{fill:none;stroke:%s;stroke-width:1.5}"
         ".band{fill:%s;fill-opacity:0.5;stroke:none}"
         ".bar{fill:%s}") % (LINE_COLOR, BAND_COLOR, BAR_COLOR)


def _f(v: float) -> str:
    s = f"{float(v):.2f}"
    return "0.00" if s == "-0.00" else s


def diverging_color(value: float, vmax: float) -> str:
    """Hex color of ``value`` on the zero-anchored ramp."""
    t = 0.0 if vmax <= 0 else min(abs(float(value)) / vmax, 1.0)
    base = POSITIVE_RGB if value > 0 else NEGATIVE_RGB
    rgb = [round(255 + t * (c - 255)) for c in base]
    return "#%02x%02x%02x" % tuple(rgb)


def _ticks(lo: float, hi: float, n: int = 4) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * k / n for k in range(n + 1)]


class _Panel:
    def __init__(self, ox: float, oy: float, w: float, h: float):
        self.x0 = ox + MARGIN["left"]
        self.y0 = oy + MARGIN["top"]
        self.w = w - MARGIN["left"] - MARGIN["right"]
        self.h = h - MARGIN["top"] - MARGIN["bottom"]

    def sx(self, v, lo, hi):
        return self.x0 + (0.5 if hi == lo else (v - lo) / (hi - lo)) * self.w

    def sy(self, v, lo, hi):
        return self.y0 + self.h - (0.5 if hi == lo else (v - lo) / (hi - lo)) * self.h


def _range(*arrays) -> tuple[float, float]:
    vals = np.concatenate([np.ravel(a) for a in arrays if a is not None])
    vals = vals[np.isfinite(vals)]
    if len(vals) == 0:
        return 0.0, 1.0
    lo, hi = float(vals.min()), float(vals.max())
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def _axes(p: _Panel, xlo, xhi, ylo, yhi, numeric_x=True) -> list[str]:
    out = []
    for t in _ticks(ylo, yhi):
        y = _f(p.sy(t, ylo, yhi))
        out.append(f'<line class="grid" x1="{_f(p.x0)}" y1="{y}" x2="{_f(p.x0 + p.w)}" y2="{y}"/>')
        out.append(f'<text class="tick" x="{_f(p.x0 - 4)}" y="{y}" text-anchor="end" '
                   f'dominant-baseline="middle">{t:.3g}</text>')
    if numeric_x:
        for t in _ticks(xlo, xhi):
            x = _f(p.sx(t, xlo, xhi))
            out.append(f'<text class="tick" x="{x}" y="{_f(p.y0 + p.h + 12)}" '
                       f'text-anchor="middle">{t:.3g}</text>')
    out.append(f'<polyline class="axis" points="{_f(p.x0)},{_f(p.y0)} {_f(p.x0)},'
               f'{_f(p.y0 + p.h)} {_f(p.x0 + p.w)},{_f(p.y0 + p.h)}"/>')
    return out


def _line_panel(e: ShapeExport, p: _Panel) -> list[str]:
    x = np.asarray(e.x, dtype=float)
    xlo, xhi = _range(x)
    ylo, yhi = _range(e.y, e.band_lower, e.band_upper)
    out = _axes(p, xlo, xhi, ylo, yhi)
    if e.has_band:
        upper = [f"{_f(p.sx(a, xlo, xhi))},{_f(p.sy(b, ylo, yhi))}"
                 for a, b in zip(x, e.band_upper)]
        lower = [f"{_f(p.sx(a, xlo, xhi))},{_f(p.sy(b, ylo, yhi))}"
                 for a, b in zip(x[::-1], e.band_lower[::-1])]
        out.append(f'<polygon class="band" points="{" ".join(upper + lower)}"/>')
    pts = " ".join(f"{_f(p.sx(a, xlo, xhi))},{_f(p.sy(b, ylo, yhi))}" for a, b in zip(x, e.y))
    out.append(f'<polyline class="curve" points="{pts}"/>')
    return out


def _bar_panel(e: ShapeExport, p: _Panel) -> list[str]:
    ylo, yhi = _range(e.y, e.band_lower, e.band_upper, np.zeros(1))
    out = _axes(p, 0, 1, ylo, yhi, numeric_x=False)
    n = len(e.y)
    slot = p.w / max(n, 1)
    zero = p.sy(0.0, ylo, yhi)
    for i, (label, v) in enumerate(zip(e.x, e.y)):
        x = p.x0 + i * slot + 0.15 * slot
        top = p.sy(v, ylo, yhi)
        out.append(f'<rect class="bar" x="{_f(x)}" y="{_f(min(top, zero))}" '
                   f'width="{_f(0.7 * slot)}" height="{_f(abs(zero - top))}"/>')
        if e.has_band:
            cx = _f(x + 0.35 * slot)
            out.append(f'<line class="axis" x1="{cx}" y1="{_f(p.sy(e.band_lower[i], ylo, yhi))}" '
                       f'x2="{cx}" y2="{_f(p.sy(e.band_upper[i], ylo, yhi))}"/>')
        out.append(f'<text class="tick" x="{_f(x + 0.35 * slot)}" y="{_f(p.y0 + p.h + 12)}" '
                   f'text-anchor="middle">{escape(str(label))}</text>')
    return out


def _heatmap_panel(e: ShapeExport, p: _Panel) -> list[str]:
    ea, eb = e.x
    fa = np.clip(ea, ea[np.isfinite(ea)].min(), ea[np.isfinite(ea)].max())
    fb = np.clip(eb, eb[np.isfinite(eb)].min(), eb[np.isfinite(eb)].max())
    xlo, xhi = float(fa[0]), float(fa[-1])
    ylo, yhi = float(fb[0]), float(fb[-1])
    vmax = float(np.max(np.abs(e.y))) if e.y.size else 0.0
    out = []
    for i in range(len(fa) - 1):
        for j in range(len(fb) - 1):
            x1, x2 = p.sx(fa[i], xlo, xhi), p.sx(fa[i + 1], xlo, xhi)
            y1, y2 = p.sy(fb[j + 1], ylo, yhi), p.sy(fb[j], ylo, yhi)
            out.append(f'<rect x="{_f(x1)}" y="{_f(y1)}" width="{_f(x2 - x1)}" '
                       f'height="{_f(y2 - y1)}" fill="{diverging_color(e.y[i, j], vmax)}"/>')
    out += _axes(p, xlo, xhi, ylo, yhi)
    return out


_RENDERERS = {"line": _line_panel, "bar": _bar_panel, "heatmap": _heatmap_panel}


def render_svg(exports: Sequence[ShapeExport] | Sequence[Sequence[ShapeExport | None]],
               ncols: int | None = None, title: str | None = None,
               panel_size: tuple[int, int] = (PANEL_W, PANEL_H)) -> str:
    """SVG document with one panel per export.

    ``exports`` is a flat list laid out ``ncols`` per row (default: all in one
    row, at most four) or a list of rows, for example models by features;
    ``None`` leaves a cell empty.
    """
    exports = list(exports)
    if exports and isinstance(exports[0], (list, tuple)):
        rows = [list(r) for r in exports]
    else:
        n = len(exports)
        ncols = ncols or max(1, min(n, 4))
        rows = [exports[i:i + ncols] for i in range(0, n, ncols)]
    pw, ph = panel_size
    n_cols = max((len(r) for r in rows), default=0)
    head = 24 if title else 0
    width = max(n_cols, 1) * pw
    height = max(len(rows), 1) * ph + head
    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f"<style>{STYLE}</style>",
           f'<rect class="frame" x="0" y="0" width="{width}" height="{height}"/>']
    if title:
        out.append(f'<text class="title" x="{_f(width / 2)}" y="16" '
                   f'text-anchor="middle">{escape(title)}</text>')
    for r, row in enumerate(rows):
        for c, e in enumerate(row):
            if e is None:
                continue
            ox, oy = c * pw, head + r * ph
            p = _Panel(ox, oy, pw, ph)
            label = e.feature if e.model is None else f"{e.model}: {e.feature}"
            out.append(f'<g class="panel {e.kind}">')
            out.append(f'<text class="title" x="{_f(ox + pw / 2)}" y="{_f(oy + 16)}" '
                       f'text-anchor="middle">{escape(label)}</text>')
            out.extend(_RENDERERS[e.kind](e, p))
            out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
