"""Configuration management for the TDSE response lab."""

import os
from dataclasses import dataclass
from pathlib import Path

from . import __version__


@dataclass
class PicardConfig:
    """Fixed-point iteration settings for the mild solver."""

    tolerance: float = 1e-12
    max_iterations: int = 500
    subinterval_count: int | None = None  # None selects the automatic partition
    patience: int = 3

    def __post_init__(self):
        """Reject settings the iteration cannot work with."""
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be at least 1, got {self.max_iterations}")
        if self.subinterval_count is not None and self.subinterval_count < 1:
            raise ValueError(
                f"subinterval_count must be at least 1, got {self.subinterval_count}"
            )
        if self.patience < 1:
            raise ValueError(f"patience must be at least 1, got {self.patience}")


@dataclass
class LabConfig:
    """Process-wide settings shared by every scenario run."""

    # Identification
    lab_name: str = "tdse-response-lab"
    lab_version: str = __version__

    # Mild solver
    picard_tolerance: float = 1e-12
    picard_max_iterations: int = 500
    picard_patience: int = 3

    # Norm machinery
    threshold_count: int = 24

    # Response kernel size guard
    kernel_max_points: int = 256
    kernel_max_pair_points: int = 4096

    # Constant estimation
    ensemble_size: int = 16
    max_workers: int = 1

    # Artifacts
    output_dir: Path = Path("runs")
    csv_float_format: str = "%.15e"
    enable_plots: bool = False

    # Logging configuration
    log_level: str = "INFO"
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    @classmethod
    def from_environment(cls) -> "LabConfig":
        """Create configuration from environment variables."""

        # Parse boolean values
        def parse_bool(value: str | None, default: bool = False) -> bool:
            if not value:
                return default
            return value.lower() in ("true", "1", "yes", "on", "enabled")

        # Parse integer values
        def parse_int(value: str | None, default: int) -> int:
            try:
                return int(value) if value else default
            except ValueError:
                return default

        # Parse float values
        def parse_float(value: str | None, default: float) -> float:
            try:
                return float(value) if value else default
            except ValueError:
                return default

        return cls(
            lab_name=os.getenv("TDSE_LAB_NAME", "tdse-response-lab"),
            lab_version=os.getenv("TDSE_LAB_VERSION", __version__),
            picard_tolerance=parse_float(os.getenv("TDSE_LAB_PICARD_TOLERANCE"), 1e-12),
            picard_max_iterations=parse_int(os.getenv("TDSE_LAB_PICARD_MAX_ITERATIONS"), 500),
            picard_patience=parse_int(os.getenv("TDSE_LAB_PICARD_PATIENCE"), 3),
            threshold_count=parse_int(os.getenv("TDSE_LAB_THRESHOLD_COUNT"), 24),
            kernel_max_points=parse_int(os.getenv("TDSE_LAB_KERNEL_MAX_POINTS"), 256),
            kernel_max_pair_points=parse_int(os.getenv("TDSE_LAB_KERNEL_MAX_PAIR_POINTS"), 4096),
            ensemble_size=parse_int(os.getenv("TDSE_LAB_ENSEMBLE_SIZE"), 16),
            max_workers=parse_int(os.getenv("TDSE_LAB_MAX_WORKERS"), 1),
            output_dir=Path(os.getenv("TDSE_LAB_OUTPUT_DIR", "runs")),
            csv_float_format=os.getenv("TDSE_LAB_CSV_FLOAT_FORMAT", "%.15e"),
            enable_plots=parse_bool(os.getenv("TDSE_LAB_ENABLE_PLOTS"), False),
            log_level=os.getenv("TDSE_LAB_LOG_LEVEL", "INFO"),
            log_format=os.getenv(
                "TDSE_LAB_LOG_FORMAT", "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
            ),
        )

    def validate(self) -> None:
        """Validate configuration values."""
        errors = []

        if not 0.0 < self.picard_tolerance < 1e-3:
            errors.append(
                f"picard_tolerance must be in (0, 1e-3), got {self.picard_tolerance}"
            )

        if self.picard_max_iterations <= 0 or self.picard_max_iterations > 100_000:
            errors.append(
                "picard_max_iterations must be between 1 and 100000, "
                f"got {self.picard_max_iterations}"
            )

        if self.picard_patience <= 0:
            errors.append(f"picard_patience must be positive, got {self.picard_patience}")

        if self.threshold_count < 2:
            errors.append(f"threshold_count must be at least 2, got {self.threshold_count}")

        if self.kernel_max_points < 8:
            errors.append(f"kernel_max_points must be at least 8, got {self.kernel_max_points}")

        if self.kernel_max_pair_points < 64:
            errors.append(
                f"kernel_max_pair_points must be at least 64, got {self.kernel_max_pair_points}"
            )

        if self.ensemble_size <= 0:
            errors.append(f"ensemble_size must be positive, got {self.ensemble_size}")

        if self.max_workers <= 0 or self.max_workers > 64:
            errors.append(f"max_workers must be between 1 and 64, got {self.max_workers}")

        if not _is_scientific(self.csv_float_format):
            errors.append(
                "csv_float_format must be scientific notation with at least 12 significant "
                f"digits, got {self.csv_float_format!r}"
            )

        # Validate log level
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if self.log_level.upper() not in valid_levels:
            errors.append(f"log_level must be one of {valid_levels}, got {self.log_level}")

        if errors:
            raise ValueError(
                "Configuration validation failed:\n" + "\n".join(f"- {error}" for error in errors)
            )

    def picard(self, subinterval_count: int | None = None) -> PicardConfig:
        """Build the solver settings from the process defaults."""
        return PicardConfig(
            tolerance=self.picard_tolerance,
            max_iterations=self.picard_max_iterations,
            subinterval_count=subinterval_count,
            patience=self.picard_patience,
        )

    def to_dict(self) -> dict:
        """Convert configuration to dictionary."""
        result = {}
        for key, value in self.__dict__.items():
            if isinstance(value, Path):
                result[key] = str(value)
            else:
                result[key] = value
        return result

    def __post_init__(self):
        """Post-initialization normalization."""
        self.output_dir = Path(self.output_dir)

        # Normalize log level
        self.log_level = self.log_level.upper()


def _is_scientific(float_format: str) -> bool:
    """Check that a %-format renders scientific notation with 12+ significant digits."""
    try:
        rendered = (float_format % (1.0 / 3.0)).lower()
    except (TypeError, ValueError):
        return False
    if "e" not in rendered:
        return False
    mantissa = rendered.split("e")[0]
    return sum(ch.isdigit() for ch in mantissa) >= 12


# Global configuration instance
_config: LabConfig | None = None


def get_config() -> LabConfig:
    """Get the global configuration instance."""
    global _config
    if _config is None:
        _config = LabConfig.from_environment()
        _config.validate()
    return _config


def set_config(config: LabConfig) -> None:
    """Set the global configuration instance."""
    global _config
    config.validate()
    _config = config


def reload_config() -> LabConfig:
    """Reload configuration from environment."""
    global _config
    _config = LabConfig.from_environment()
    _config.validate()
    return _config


# Environment variable documentation for users
ENV_VAR_DOCS = """
TDSE Response Lab Environment Variables:

Identification:
  TDSE_LAB_NAME                   Lab name recorded in manifests (default: tdse-response-lab)
  TDSE_LAB_VERSION                Version string recorded in manifests (default: package version)

Mild solver:
  TDSE_LAB_PICARD_TOLERANCE       Fixed-point residual relative to the initial norm (default: 1e-12)
  TDSE_LAB_PICARD_MAX_ITERATIONS  Iteration budget per subinterval (default: 500)
  TDSE_LAB_PICARD_PATIENCE        Non-contracting iterations tolerated before failing (default: 3)

Norms and kernels:
  TDSE_LAB_THRESHOLD_COUNT        Thresholds scanned for sum-space norms (default: 24)
  TDSE_LAB_KERNEL_MAX_POINTS      Single-particle kernel size guard (default: 256)
  TDSE_LAB_KERNEL_MAX_PAIR_POINTS Two-particle kernel size guard (default: 4096)

Estimates:
  TDSE_LAB_ENSEMBLE_SIZE          Members per calibration ensemble (default: 16)
  TDSE_LAB_MAX_WORKERS            Thread pool width for ensembles and sweeps (default: 1)

Artifacts:
  TDSE_LAB_OUTPUT_DIR             Default output directory (default: runs)
  TDSE_LAB_CSV_FLOAT_FORMAT       printf-style float format for CSV files (default: %.15e)
  TDSE_LAB_ENABLE_PLOTS           Emit SVG plots next to CSV files (default: false)

Logging:
  TDSE_LAB_LOG_LEVEL              Log level (default: INFO)
  TDSE_LAB_LOG_FORMAT             Log format string

Example usage:
  export TDSE_LAB_PICARD_TOLERANCE=1e-11
  export TDSE_LAB_MAX_WORKERS=4
"""
