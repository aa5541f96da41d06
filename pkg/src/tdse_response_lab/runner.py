"""Scenario runner: one run directory per scenario, or a sweep of them.

This module ties scenario files, the experiment suite and the artifact
writer together and is what the command line front end calls.
"""

import logging
from pathlib import Path
from typing import Any

import pandas as pd

from . import __version__
from .artifacts import ArtifactWriter, ExperimentResult
from .config import LabConfig
from .exceptions import BoundViolationError
from .experiments import ExperimentSuite
from .scenario import Scenario
from .util import ValidationUtils, ordered_map

logger = logging.getLogger(__name__)

# LabConfig fields echoed into manifests.
MANIFEST_CONFIG_KEYS = (
    "picard_tolerance",
    "picard_max_iterations",
    "picard_patience",
    "threshold_count",
    "ensemble_size",
    "kernel_max_points",
    "kernel_max_pair_points",
)


class ScenarioRunner:
    """Runs scenarios and writes their artifacts."""

    def __init__(self, config: LabConfig):
        """Initialize the runner with configuration."""
        self.config = config
        self.suite = ExperimentSuite(config)

    def _root(self, scenario: Scenario, output_root: Path | None) -> Path:
        if output_root is not None:
            return Path(output_root)
        if scenario.output_dir is not None:
            return scenario.output_dir
        return self.config.output_dir

    def _manifest(self, scenario: Scenario, result: ExperimentResult, files: list[Path]) -> dict:
        return {
            "version": __version__,
            "lab": self.config.lab_name,
            "experiment": result.experiment,
            "scenario": scenario.to_dict(),
            "seed": scenario.seed,
            "constants": result.constants,
            "summary": result.summary,
            "violations": result.violations,
            "artifacts": sorted(path.name for path in files),
            "config": {key: getattr(self.config, key) for key in MANIFEST_CONFIG_KEYS},
        }

    def execute(
        self, scenario: Scenario, directory: Path, plots: bool | None = None
    ) -> ExperimentResult:
        """Run one scenario into directory without raising on bound violations."""
        result = self.suite.run(scenario)
        writer = ArtifactWriter(directory, self.config)
        files = writer.result(result, self.config.enable_plots if plots is None else plots)
        writer.manifest(self._manifest(scenario, result, files))
        return result

    def run(
        self, scenario: Scenario, output_root: Path | None = None, plots: bool | None = None
    ) -> ExperimentResult:
        """Run a scenario into <root>/<name>/.

        Raises BoundViolationError after writing every artifact if any bound
        check failed.
        """
        directory = self._root(scenario, output_root) / ValidationUtils.sanitize_filename(
            scenario.name
        )
        result = self.execute(scenario, directory, plots)
        logger.info(f"Scenario '{scenario.name}' finished in {directory}")
        if result.violations:
            raise BoundViolationError(
                f"{result.violations} bound check(s) violated in '{scenario.name}'",
                violations=result.violations,
            )
        return result

    def sweep(
        self,
        scenario: Scenario,
        parameter: str,
        values: list[Any],
        output_root: Path | None = None,
        plots: bool | None = None,
    ) -> pd.DataFrame:
        """Run the scenario once per value of one scalar parameter.

        Every value gets its own run directory under sweep_<name>/; the merged
        tables sweep.csv and sweep_summary.csv carry the parameter as their
        first column.
        """
        if not values:
            raise ValueError("sweep needs at least one value")
        variants = [scenario.with_override(parameter, value) for value in values]
        base = self._root(scenario, output_root) / ValidationUtils.sanitize_filename(
            f"sweep_{scenario.name}"
        )
        logger.info(f"Sweeping {parameter} over {len(values)} values into {base}")

        def run_one(item: tuple[Any, Scenario]) -> ExperimentResult:
            value, variant = item
            name = ValidationUtils.sanitize_filename(f"{parameter}={value}")
            return self.execute(variant, base / name, plots)

        tables = []
        summaries = []
        violations = 0
        items = list(zip(values, variants, strict=True))
        for value, result in zip(
            values, ordered_map(run_one, items, self.config.max_workers), strict=True
        ):
            tables.append(result.table.assign(**{parameter: value}))
            summaries.append({parameter: value, **result.summary})
            violations += result.violations

        merged = pd.concat(tables, ignore_index=True)
        merged = merged[[parameter] + [c for c in merged.columns if c != parameter]]
        summary = pd.DataFrame(summaries)
        writer = ArtifactWriter(base, self.config)
        writer.table("sweep", merged)
        writer.table("sweep_summary", summary)
        if violations:
            raise BoundViolationError(
                f"{violations} bound check(s) violated across the sweep", violations=violations
            )
        return summary
