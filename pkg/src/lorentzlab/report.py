"""Figure rendering for the command-line reports.

Every helper writes a PNG next to the delimited artifact and returns
the path.  The Agg backend keeps rendering headless; callers decide
whether figures are wanted at all, so nothing here touches the data
pipeline.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def save_heatmap(path, values, extent, title, cbar_label="", cmap="viridis"):
    """Heatmap of values[i, j] with i along x and j along y."""
    fig, ax = plt.subplots(figsize=(5.4, 4.4), dpi=130)
    im = ax.imshow(np.asarray(values).T, origin="lower", extent=extent,
                   aspect="auto", cmap=cmap, interpolation="nearest")
    fig.colorbar(im, ax=ax, label=cbar_label)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(title)
    return _finish(fig, path)


def save_series(path, x, series, xlabel, ylabel, title, logy=False):
    """Line plot of each named series against the common abscissa."""
    fig, ax = plt.subplots(figsize=(5.4, 4.0), dpi=130)
    for label, ys in series.items():
        ax.plot(x, ys, marker="o", markersize=3.5, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    if len(series) > 1:
        ax.legend()
    return _finish(fig, path)


def save_scatter(path, x, y, xlabel, ylabel, title, logx=False, logy=False):
    fig, ax = plt.subplots(figsize=(5.0, 4.0), dpi=130)
    ax.scatter(x, y, s=9, alpha=0.6)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return _finish(fig, path)


def save_occupancy(path, counts, title):
    """Cell-count histogram over the fundamental-domain chart."""
    counts = np.asarray(counts, dtype=float)
    fig, ax = plt.subplots(figsize=(5.0, 4.2), dpi=130)
    shown = np.log10(1.0 + counts)
    im = ax.imshow(shown.T, origin="lower",
                   extent=(-0.5, 0.5, 0.0, 1.0), aspect="auto",
                   cmap="magma", interpolation="nearest")
    fig.colorbar(im, ax=ax, label="log10(1 + samples)")
    ax.set_xlabel("Re chart")
    ax.set_ylabel("height chart")
    ax.set_title(title)
    return _finish(fig, path)
