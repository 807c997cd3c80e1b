"""Deterministic figure emitters: same input, byte-identical output.

The SVG/CSV paths are dependency-free and golden-file tested; the PNG
companions (matplotlib) exist for humans and dashboards.
"""

from .heatmap import HeatmapSpec, render_heatmap  # noqa: F401
from .lanechart import LaneChartSpec, render_timeline  # noqa: F401
from .histogram import histogram_svg  # noqa: F401
