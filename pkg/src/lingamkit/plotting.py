"""Matplotlib figures written next to the tabular reports.

Uses the non-interactive Agg backend; every function saves one file and
closes its figure.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}

SOURCE_COLOR = "#4c72b0"
SINK_COLOR = "#c44e52"
NODE_COLOR = "#dddddd"

# fixed metadata keeps PNG bytes reproducible across runs
_PNG_META = {"Software": None}


def _save(fig, path):
    path = Path(path)
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)
    return path


def _circle(order: Sequence[int]) -> dict[int, tuple[float, float]]:
    n = len(order)
    pos = {}
    for k, i in enumerate(order):
        theta = np.pi / 2 - 2 * np.pi * k / n
        pos[i] = (np.cos(theta), np.sin(theta))
    return pos


def causal_graph(names: Sequence[str], adjacency: np.ndarray, path, labels=None,
                 sources: Sequence[str] = (), sinks: Sequence[str] = (), title: str = "",
                 order: Sequence[int] | None = None):
    """Circular drawing of a DAG, nodes clockwise in ``order`` (default: as given).

    ``labels[i][j]`` annotates edge j -> i and defaults to the weight.
    Positive effects are green, negative red; sources blue, sinks red.
    """
    adj = np.asarray(adjacency, dtype=float)
    p = len(names)
    pos = _circle(list(order) if order is not None else list(range(p)))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.5, 6.5))
        for i in range(p):
            for j in range(p):
                if adj[i, j] == 0:
                    continue
                (x0, y0), (x1, y1) = pos[j], pos[i]
                color = "#2a7f2a" if adj[i, j] > 0 else "#b03a2e"
                ax.annotate("", xy=(x1, y1), xytext=(x0, y0),
                            arrowprops=dict(arrowstyle="-|>", color=color, lw=1.1,
                                            shrinkA=13, shrinkB=13))
                text = f"{adj[i, j]:.2f}" if labels is None else str(labels[i][j])
                # nearer the head than the tail so labels of a fan-out separate
                lx, ly = x0 + 0.62 * (x1 - x0), y0 + 0.62 * (y1 - y0)
                ax.text(lx, ly, text, fontsize=6.5, ha="center", va="center", color=color,
                        bbox=dict(boxstyle="round,pad=0.1", fc="white", ec="none", alpha=0.85))
        for i, name in enumerate(names):
            fc = SOURCE_COLOR if name in sources else SINK_COLOR if name in sinks else NODE_COLOR
            tc = "white" if name in sources or name in sinks else "black"
            ax.text(*pos[i], name, ha="center", va="center", color=tc, fontsize=8,
                    bbox=dict(boxstyle="round,pad=0.35", fc=fc, ec="black", lw=0.6))
        ax.set_xlim(-1.25, 1.25)
        ax.set_ylim(-1.25, 1.25)
        ax.set_aspect("equal")
        ax.axis("off")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def effect_heatmap(names: Sequence[str], effects: np.ndarray, path, probability: np.ndarray | None = None,
                   title: str = "Median total effects"):
    """Cause x effect heatmap (rows = cause); blank where the effect is zero."""
    mat = np.asarray(effects, dtype=float).T
    shown = np.where(mat != 0, mat, np.nan)
    lim = max(float(np.nanmax(np.abs(shown))) if np.isfinite(shown).any() else 1.0, 1e-9)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(0.6 * len(names) + 2, 0.5 * len(names) + 1.5))
        im = ax.imshow(shown, cmap="RdBu_r", vmin=-lim, vmax=lim)
        for a in range(len(names)):
            for b in range(len(names)):
                if mat[a, b] != 0:
                    txt = f"{mat[a, b]:.2f}"
                    if probability is not None:
                        txt += f"\n{np.asarray(probability).T[a, b] * 100:.0f}%"
                    ax.text(b, a, txt, ha="center", va="center", fontsize=6)
        ax.set_xticks(range(len(names)), names, rotation=45, ha="right")
        ax.set_yticks(range(len(names)), names)
        ax.set_xlabel("effect")
        ax.set_ylabel("cause")
        ax.set_title(title)
        fig.colorbar(im, ax=ax, shrink=0.8)
        return _save(fig, path)


def correlation_heatmap(names: Sequence[str], rho: np.ndarray, path, title: str = "Spearman correlation"):
    rho = np.asarray(rho, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(0.6 * len(names) + 2, 0.5 * len(names) + 1.5))
        im = ax.imshow(rho, cmap="RdBu_r", vmin=-1, vmax=1)
        for a in range(len(names)):
            for b in range(len(names)):
                if np.isfinite(rho[a, b]):
                    ax.text(b, a, f"{rho[a, b]:.2f}", ha="center", va="center", fontsize=6)
        ax.set_xticks(range(len(names)), names, rotation=45, ha="right")
        ax.set_yticks(range(len(names)), names)
        ax.set_title(title)
        fig.colorbar(im, ax=ax, shrink=0.8)
        return _save(fig, path)


def condition_means(tables, path, ncols: int = 3):
    """Per-factor box plots of participant condition means with paired lines."""
    tables = list(tables)
    nrows = max(1, -(-len(tables) // ncols))
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(nrows, ncols, figsize=(3.2 * ncols, 2.6 * nrows), squeeze=False)
        for ax, t in zip(axes.flat, tables):
            k = len(t.conditions)
            for row in t.values:
                ax.plot(range(k), row, color="0.8", lw=0.5, zorder=1)
            ax.boxplot([t.values[:, c] for c in range(k)], positions=range(k), widths=0.5,
                       showfliers=False)
            ax.set_xticks(range(k), t.conditions)
            ax.set_title(t.factor)
        for ax in list(axes.flat)[len(tables):]:
            ax.axis("off")
        fig.tight_layout()
        return _save(fig, path)
