"""Matplotlib PNG companions to the SVG emitters.

These are for eyeballs; the SVG/CSV outputs stay the contractual,
golden-file-tested artifacts. Rendering is pinned (Agg, fixed dpi, no
date metadata) so repeat runs produce identical bytes.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import BoundaryNorm, ListedColormap  # noqa: E402

from ..aggregate import BUCKETS  # noqa: E402
from .heatmap import RAMP, ZERO_COLOR  # noqa: E402
from .lanechart import _LANE_Y  # noqa: E402

_SAVE_KW = {"format": "png", "dpi": 100, "metadata": {"Software": "zlens"}}


def heatmap_png(values, path, columns=8, scale=None, title=""):
    values = list(values)
    rows = -(-len(values) // columns)
    grid = np.full((rows, columns), np.nan)
    for zone, v in enumerate(values):
        grid[zone // columns][zone % columns] = v
    top = scale if scale is not None else max(max(values), 1)
    cmap = ListedColormap([ZERO_COLOR, *RAMP])
    cmap.set_bad("#f0f0f0")
    bounds = [0, 1] + [1 + top * (i + 1) / len(RAMP) for i in range(len(RAMP))]
    norm = BoundaryNorm(bounds, cmap.N, clip=True)

    fig, ax = plt.subplots(figsize=(columns * 0.6 + 1.6, rows * 0.6 + 1.2))
    im = ax.imshow(grid, cmap=cmap, norm=norm)
    ax.set_xticks(range(columns))
    ax.set_yticks(range(rows))
    ax.set_xlabel("zone % columns")
    ax.set_ylabel("zone // columns")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, label="resets")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def histogram_png(hist, path, title=""):
    labels = list(BUCKETS)
    counts = [hist[b].ops if b in hist else 0 for b in labels]
    fig, ax = plt.subplots(figsize=(8, 3.6))
    ax.bar(range(len(labels)), counts, color="#4c78a8")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=8)
    ax.set_ylabel("requests")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def lanechart_png(timeline, path, filter_trivial=False, title=""):
    entries = [e for e in timeline.entries
               if not (filter_trivial and e.trivial)]
    fig, ax = plt.subplots(figsize=(9.6, 3))
    lanes = list(_LANE_Y)
    y_of = {lane: len(lanes) - i for i, lane in enumerate(lanes)}
    for e in entries:
        ax.plot(e.ts_ns, y_of[e.lane], marker="o", markersize=4,
                color="#1f77b4")
    for e in entries:
        for target, kind in zip(e.links, e.link_kinds):
            others = [t for t in entries if t.index == target]
            if not others:
                continue
            t = others[0]
            color = "#e377c2" if kind == "superseded_by" else "#bbbbbb"
            ax.plot([e.ts_ns, t.ts_ns], [y_of[e.lane], y_of[t.lane]],
                    color=color, linewidth=1)
    ax.set_yticks([y_of[lane] for lane in lanes])
    ax.set_yticklabels(lanes)
    ax.set_xlabel("ts_ns")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
