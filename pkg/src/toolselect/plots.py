"""Scatter-plot SVGs for the studies. Presentation only."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams["svg.hashsalt"] = "toolselect"

_SVG_META = {"Date": None}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def scatter(path: Path, xs, ys, xlabel: str, ylabel: str, title: str, groups=None) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    if groups is None:
        ax.scatter(xs, ys, s=10)
    else:
        for label, (gx, gy) in groups.items():
            ax.scatter(gx, gy, s=10, label=str(label))
        ax.legend(fontsize="small")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


GRID_STYLE = {"neither": "white", "F-only": "lightgrey", "J-only": "dimgrey", "both": "black"}


def selection_grid(path: Path, rows: list[dict], toolset_size: int) -> Path:
    fig, ax = plt.subplots(figsize=(max(4, 0.3 * len(rows)), 3))
    for cell, color in GRID_STYLE.items():
        pts = [(r["trial"], i) for r in rows for i in range(toolset_size) if r.get(f"tool_{i}") == cell]
        if pts:
            ax.scatter([p[0] for p in pts], [p[1] for p in pts], marker="s", s=80,
                       c=color, edgecolors="k", linewidths=0.5, label=cell)
    ax.set_xlabel("trial")
    ax.set_ylabel("tool")
    ax.legend(fontsize="small", loc="upper left", bbox_to_anchor=(1, 1))
    fig.tight_layout()
    return _save(fig, path)
