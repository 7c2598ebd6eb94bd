"""House plot style and deterministic SVG output."""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ..profile import write_text_atomic  # noqa: E402

STYLE = {
    "figure.figsize": (7.0, 3.6),
    "figure.dpi": 100,
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "grid.linewidth": 0.5,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "lines.linewidth": 1.2,
    # fixed ids so identical data renders identical bytes
    "svg.hashsalt": "netcas",
    "svg.fonttype": "path",
}

# one colour per policy, stable across figures
POLICY_COLORS = {
    "CacheOnly": "#4c72b0",
    "BackendOnly": "#dd8452",
    "StaticSplit": "#55a868",
    "RandomSplit": "#8172b3",
    "NetCas": "#c44e52",
}


def policy_color(label: str) -> str:
    return POLICY_COLORS.get(label.split("(")[0], "#666666")


def figure(nrows: int = 1, ncols: int = 1, **kw):
    with plt.rc_context(STYLE):
        return plt.subplots(nrows, ncols, **kw)


def save_svg(fig, path: Path) -> Path:
    buf = io.StringIO()
    with plt.rc_context(STYLE):
        fig.tight_layout()
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    write_text_atomic(Path(path), buf.getvalue())
    return Path(path)
