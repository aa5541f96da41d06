"""Static SVG line plots and heatmaps rendered with matplotlib."""

import logging
import os
from pathlib import Path

import numpy as np

os.environ.setdefault("MPLCONFIGDIR", "/tmp/matplotlib")

import matplotlib  # noqa: E402

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

logger = logging.getLogger(__name__)

# Fixed salt and no date stamp keep repeated renders byte-identical.
SVG_RC = {"svg.hashsalt": "tdse-lab", "svg.fonttype": "none"}
SVG_METADATA = {"Date": None}
SERIES_GID = "series-"


def _save(fig: plt.Figure, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=SVG_METADATA)
    plt.close(fig)
    logger.debug(f"Wrote plot {path}")
    return path


def line_plot(
    path: Path,
    x: np.ndarray,
    series: dict[str, np.ndarray],
    title: str,
    xlabel: str = "t",
    ylabel: str = "",
) -> Path:
    """Write one or more curves over a shared abscissa.

    Each curve is tagged with the SVG group id ``series-<name>``.
    """
    abscissa = np.asarray(x, dtype=np.float64)
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for name, values in series.items():
            (line,) = ax.plot(abscissa, np.asarray(values, dtype=np.float64), label=name)
            line.set_gid(f"{SERIES_GID}{name}")
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if len(series) > 1:
            ax.legend(loc="best")
        fig.tight_layout()
        return _save(fig, path)


def heatmap(
    path: Path,
    matrix: np.ndarray,
    title: str,
    xlabel: str = "",
    ylabel: str = "",
) -> Path:
    """Write a diverging-colour heatmap of a 2D array (first index runs down)."""
    values = np.asarray(matrix, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"heatmap needs a 2D array, got shape {values.shape}")
    finite = values[np.isfinite(values)]
    scale = float(np.max(np.abs(finite))) if finite.size else 0.0
    scale = scale if scale > 0 else 1.0
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(5.6, 4.8))
        image = ax.imshow(values, cmap="RdBu_r", vmin=-scale, vmax=scale, aspect="auto")
        image.set_gid("heatmap")
        fig.colorbar(image, ax=ax, fraction=0.046, pad=0.04)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        fig.tight_layout()
        return _save(fig, path)
