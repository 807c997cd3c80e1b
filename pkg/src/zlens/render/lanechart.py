"""Three-lane (APP/FS/DEV) timeline chart with lineage arcs and delete links."""

import io
from dataclasses import dataclass

from .. import trace
from ..timeline import PLACEMENT
from .heatmap import _esc

_LANE_Y = {trace.LAYER_APP: 60, trace.LAYER_FS: 130, trace.LAYER_DEV: 200}
_LEFT = 70
_RIGHT = 24
_HEIGHT = 250

DELETE_LINK_COLOR = "#e377c2"  # pink, per the source narrative
PAIR_LINK_COLOR = "#bbbbbb"
LINEAGE_COLOR = "#7a7a7a"


@dataclass(frozen=True)
class LaneChartSpec:
    width: int = 960
    filter_trivial: bool = False
    title: str = ""


def _glyph(kind, x, y):
    if kind in (trace.COMPACTION_BEGIN, trace.COMPACTION_END):
        return f'<rect x="{x - 6}" y="{y - 6}" width="12" height="12"/>'
    if kind == trace.FILE_DELETE:
        return (f'<path d="M {x} {y - 7} L {x + 7} {y} L {x} {y + 7} '
                f'L {x - 7} {y} Z"/>')
    if kind == PLACEMENT:
        return (f'<path d="M {x} {y - 7} L {x + 7} {y + 6} L {x - 7} {y + 6} Z"/>')
    if kind == trace.RESET:
        return (f'<path d="M {x - 5} {y - 5} L {x + 5} {y + 5} '
                f'M {x - 5} {y + 5} L {x + 5} {y - 5}" stroke-width="2"/>')
    if kind == trace.FLUSH:
        return f'<circle cx="{x}" cy="{y}" r="6"/>'
    if kind == trace.FSYNC:
        return f'<path d="M {x} {y - 6} L {x} {y + 6}" stroke-width="2"/>'
    return f'<circle cx="{x}" cy="{y}" r="3"/>'


_GLYPH_FILL = {
    trace.COMPACTION_BEGIN: "#1f77b4",
    trace.COMPACTION_END: "#1f77b4",
    trace.FILE_DELETE: "#e377c2",
    trace.FLUSH: "#2ca02c",
    trace.FILE_CREATE: "#2ca02c",
    trace.RESET: "#d62728",
    PLACEMENT: "#ff7f0e",
}


def render_timeline(timeline, spec=LaneChartSpec()):
    """Render the timeline to SVG + aligned text; deterministic layout.

    Trivial promotion entries are hidden by the filter flag (they are kept
    in the timeline itself: lossless core, lossy view).
    """
    entries = timeline.entries
    shown = [e for e in entries if not (spec.filter_trivial and e.trivial)]
    shown_ids = {e.index for e in shown}

    ts_values = [e.ts_ns for e in shown]
    t0 = min(ts_values) if ts_values else 0
    span = (max(ts_values) - t0) if ts_values else 0
    inner = spec.width - _LEFT - _RIGHT

    def x_of(ts):
        if span == 0:
            return _LEFT + inner // 2
        return _LEFT + (ts - t0) * inner // span

    pos = {e.index: (x_of(e.ts_ns), _LANE_Y[e.lane]) for e in shown}

    out = io.StringIO()
    out.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{spec.width}" '
              f'height="{_HEIGHT}" viewBox="0 0 {spec.width} {_HEIGHT}">\n')
    out.write(f'<rect width="{spec.width}" height="{_HEIGHT}" fill="#ffffff"/>\n')
    if spec.title:
        out.write(f'<text x="{_LEFT}" y="24" font-family="monospace" '
                  f'font-size="14">{_esc(spec.title)}</text>\n')
    out.write('<g class="lanes" font-family="monospace" font-size="12">\n')
    for lane, y in _LANE_Y.items():
        out.write(f'<line x1="{_LEFT}" y1="{y}" x2="{spec.width - _RIGHT}" '
                  f'y2="{y}" stroke="#dddddd"/>\n')
        out.write(f'<text x="{_LEFT - 60}" y="{y + 4}">{lane}</text>\n')
    out.write("</g>\n")

    # lineage arcs: one per DAG edge, anchored on the compaction pair
    cid_pos = {}
    for e in shown:
        if e.cid is not None:
            cid_pos.setdefault(e.cid, {})[e.kind] = pos[e.index]
    out.write('<g class="links">\n')
    for record in timeline.lineage:
        anchors = cid_pos.get(record.cid, {})
        if trace.COMPACTION_BEGIN not in anchors or trace.COMPACTION_END not in anchors:
            continue
        (x1, y1) = anchors[trace.COMPACTION_BEGIN]
        (x2, y2) = anchors[trace.COMPACTION_END]
        midx = (x1 + x2) // 2
        out.write(f'<path class="lineage" d="M {x1} {y1} Q {midx} {y1 - 36} '
                  f'{x2} {y2}" fill="none" stroke="{LINEAGE_COLOR}" '
                  f'data-output="{_esc(record.output)}" '
                  f'data-inputs="{_esc(",".join(record.inputs))}"/>\n')
    for e in shown:
        for target, lkind in zip(e.links, e.link_kinds):
            if target not in shown_ids:
                continue
            (x1, y1) = pos[e.index]
            (x2, y2) = pos[target]
            if lkind == "superseded_by":
                out.write(f'<line class="delete-link" x1="{x1}" y1="{y1}" '
                          f'x2="{x2}" y2="{y2}" stroke="{DELETE_LINK_COLOR}" '
                          f'stroke-width="2"/>\n')
            else:
                out.write(f'<line class="pair-link" x1="{x1}" y1="{y1}" '
                          f'x2="{x2}" y2="{y2}" stroke="{PAIR_LINK_COLOR}" '
                          f'stroke-dasharray="4 3"/>\n')
    out.write("</g>\n")

    out.write('<g class="entries">\n')
    for e in shown:
        x, y = pos[e.index]
        fill = _GLYPH_FILL.get(e.kind, "#555555")
        out.write(f'<g class="entry" data-index="{e.index}" data-kind="{e.kind}" '
                  f'data-ts="{e.ts_ns}" data-files="{_esc(",".join(e.files))}" '
                  f'fill="{fill}" stroke="{fill}">')
        out.write(_glyph(e.kind, x, y))
        out.write(f'<title>{_esc(e.label)}</title>')
        out.write("</g>\n")
    out.write("</g>\n</svg>\n")

    from ..timeline import timeline_text
    return out.getvalue(), timeline_text(timeline, spec.filter_trivial)
