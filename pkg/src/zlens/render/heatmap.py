"""Zone reset heatmap: one cell per zone, row-major from zone 0.

Zero-reset cells use a reserved blue so "never reset" reads differently
from "reset a little". Non-zero values map onto a 9-step sequential ramp;
a fixed scale allows cross-figure comparison (values above it clamp to the
ramp maximum while the CSV keeps the exact count).
"""

import io
from dataclasses import dataclass

from ..errors import EmptyFigureError

ZERO_COLOR = "#4575b4"
RAMP = ("#ffffcc", "#ffeda0", "#fed976", "#feb24c", "#fd8d3c",
        "#fc4e2a", "#e31a1c", "#bd0026", "#800026")

_CELL = 44
_GAP = 4
_MARGIN = 10


@dataclass(frozen=True)
class HeatmapSpec:
    columns: int = 8
    scale: int | None = None  # None -> auto (max value)
    title: str = ""


def cell_color(value, scale):
    if value <= 0:
        return ZERO_COLOR
    if scale <= 0:
        return RAMP[-1]
    return RAMP[min(len(RAMP) - 1, value * len(RAMP) // scale)]


def render_heatmap(values, spec=HeatmapSpec()):
    """Render per-zone values; returns (svg_text, csv_text)."""
    values = list(values)
    if not values:
        raise EmptyFigureError("no zones to render")
    if spec.columns <= 0:
        raise EmptyFigureError("heatmap needs at least one column")
    cols = spec.columns
    rows = -(-len(values) // cols)
    scale = spec.scale if spec.scale is not None else max(values)

    width = 2 * _MARGIN + cols * _CELL + (cols - 1) * _GAP
    title_h = 24 if spec.title else 0
    height = 2 * _MARGIN + rows * _CELL + (rows - 1) * _GAP + title_h

    out = io.StringIO()
    out.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
              f'height="{height}" viewBox="0 0 {width} {height}">\n')
    out.write(f'<rect width="{width}" height="{height}" fill="#ffffff"/>\n')
    if spec.title:
        out.write(f'<text x="{_MARGIN}" y="{_MARGIN + 14}" '
                  f'font-family="monospace" font-size="14">{_esc(spec.title)}</text>\n')
    out.write('<g class="cells">\n')
    for zone, value in enumerate(values):
        r, c = divmod(zone, cols)
        x = _MARGIN + c * (_CELL + _GAP)
        y = _MARGIN + title_h + r * (_CELL + _GAP)
        color = cell_color(value, scale)
        out.write(f'<rect class="cell" x="{x}" y="{y}" width="{_CELL}" '
                  f'height="{_CELL}" fill="{color}" data-zone="{zone}" '
                  f'data-resets="{value}"/>\n')
    out.write("</g>\n</svg>\n")

    csv = io.StringIO()
    csv.write("zone,resets\n")
    for zone, value in enumerate(values):
        csv.write(f"{zone},{value}\n")
    return out.getvalue(), csv.getvalue()


def _esc(text):
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))
