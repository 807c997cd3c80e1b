"""Deterministic SVG bar chart for the I/O-size histogram."""

import io

from ..aggregate import BUCKETS
from .heatmap import _esc

_BAR_W = 30
_GAP = 8
_MARGIN = 14
_PLOT_H = 160
_LABEL_H = 64

BAR_COLOR = "#4c78a8"


def histogram_svg(hist, title=""):
    """hist: mapping bucket label -> HistCell (or anything with .ops)."""
    counts = [(label, hist[label].ops if label in hist else 0)
              for label in BUCKETS]
    peak = max((c for _, c in counts), default=0)
    width = 2 * _MARGIN + len(counts) * (_BAR_W + _GAP) - _GAP
    title_h = 22 if title else 0
    height = 2 * _MARGIN + _PLOT_H + _LABEL_H + title_h

    out = io.StringIO()
    out.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
              f'height="{height}" viewBox="0 0 {width} {height}">\n')
    out.write(f'<rect width="{width}" height="{height}" fill="#ffffff"/>\n')
    if title:
        out.write(f'<text x="{_MARGIN}" y="{_MARGIN + 4}" '
                  f'font-family="monospace" font-size="13">{_esc(title)}</text>\n')
    base_y = _MARGIN + title_h + _PLOT_H
    out.write(f'<line x1="{_MARGIN}" y1="{base_y}" x2="{width - _MARGIN}" '
              f'y2="{base_y}" stroke="#333333"/>\n')
    out.write('<g class="bars" font-family="monospace" font-size="10">\n')
    for i, (label, count) in enumerate(counts):
        x = _MARGIN + i * (_BAR_W + _GAP)
        h = 0 if peak == 0 else count * _PLOT_H // peak
        y = base_y - h
        out.write(f'<rect class="bar" x="{x}" y="{y}" width="{_BAR_W}" '
                  f'height="{h}" fill="{BAR_COLOR}" data-bucket="{_esc(label)}" '
                  f'data-ops="{count}"/>\n')
        if count:
            out.write(f'<text x="{x + _BAR_W // 2}" y="{y - 3}" '
                      f'text-anchor="middle">{count}</text>\n')
        out.write(f'<text x="{x + _BAR_W // 2}" y="{base_y + 10}" '
                  f'text-anchor="end" transform="rotate(-60 {x + _BAR_W // 2} '
                  f'{base_y + 10})">{_esc(label)}</text>\n')
    out.write("</g>\n</svg>\n")
    return out.getvalue()
