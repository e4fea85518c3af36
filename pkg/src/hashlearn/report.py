"""Report emission: tab-separated tables plus rendered figures.

Tables are plain rows with no header so they pipe straight into plotting or
join tools; the figure renderers draw the same data to PNG files next to
them.  All metric computation lives in :mod:`hashlearn.evaluation`; this
module only formats and draws.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def write_precision_table(path, s_values, precisions) -> None:
    """Rows ``s<TAB>mean_precision``."""
    with open(path, "w", encoding="utf-8") as fh:
        for s, p in zip(s_values, precisions):
            fh.write(f"{int(s)}\t{float(p)!r}\n")


def write_pr_table(path, pr_points: np.ndarray) -> None:
    """Rows ``radius<TAB>precision<TAB>recall``."""
    with open(path, "w", encoding="utf-8") as fh:
        for r, precision, recall in np.asarray(pr_points):
            fh.write(f"{int(r)}\t{float(precision)!r}\t{float(recall)!r}\n")


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def figure_path(table_path) -> Path:
    return Path(table_path).with_suffix(".png")


def render_precision_figure(path, s_values, precisions, label: str = "model") -> None:
    """Mean precision against the number of retrieved neighbors s."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.0, 3.75))
    ax.plot(list(s_values), list(precisions), marker="o", label=label)
    ax.set_xlabel("retrieved neighbors s")
    ax.set_ylabel("mean precision@s")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower left")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_pr_figure(path, pr_points, label: str = "model") -> None:
    """Precision-recall curve swept over the Hamming radius."""
    plt = _pyplot()
    pts = np.asarray(pr_points)
    fig, ax = plt.subplots(figsize=(5.0, 3.75))
    ax.plot(pts[:, 2], pts[:, 1], marker="o", label=label)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower left")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
