"""Run directories: CSV tables, a summary row, the manifest and optional plots."""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .config import LabConfig
from .util import ValidationUtils

logger = logging.getLogger(__name__)


@dataclass
class ExperimentResult:
    """Output of one experiment before it is written to disk."""

    experiment: str
    table: pd.DataFrame
    summary: dict[str, Any] = field(default_factory=dict)
    constants: dict[str, Any] = field(default_factory=dict)
    extra_tables: dict[str, pd.DataFrame] = field(default_factory=dict)
    lines: dict[str, tuple[np.ndarray, dict[str, np.ndarray]]] = field(default_factory=dict)
    heatmaps: dict[str, np.ndarray] = field(default_factory=dict)
    violations: int = 0


def _plain(value: Any) -> Any:
    """JSON-compatible form of numpy scalars, paths and nested containers."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    if isinstance(value, Path):
        return str(value)
    return value


class ArtifactWriter:
    """Writes the files of one run directory."""

    def __init__(self, directory: Path, config: LabConfig):
        """Prepare a writer for directory."""
        self.directory = Path(directory)
        self.config = config
        self.written: list[Path] = []

    def table(self, name: str, frame: pd.DataFrame) -> Path:
        """Write name.csv with the configured float format."""
        path = self.directory / f"{ValidationUtils.sanitize_filename(name)}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(
            path, index=False, float_format=self.config.csv_float_format, lineterminator="\n"
        )
        self.written.append(path)
        return path

    def manifest(self, payload: dict[str, Any]) -> Path:
        """Write manifest.json with sorted keys."""
        path = self.directory / "manifest.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        self.written.append(path)
        return path

    def result(self, result: ExperimentResult, plots: bool) -> list[Path]:
        """Write every artifact of an experiment result."""
        self.table(result.experiment, result.table)
        summary = {"experiment": result.experiment, **result.summary}
        self.table("summary", pd.DataFrame([_plain(summary)]))
        for name, frame in result.extra_tables.items():
            self.table(name, frame)
        if plots:
            from .plots import heatmap, line_plot

            for name, (x, series) in result.lines.items():
                path = line_plot(self.directory / f"{name}.svg", x, series, name)
                self.written.append(path)
            for name, matrix in result.heatmaps.items():
                path = heatmap(self.directory / f"{name}.svg", matrix, name)
                self.written.append(path)
        logger.info(f"Wrote {len(self.written)} artifacts to {self.directory}")
        return self.written
