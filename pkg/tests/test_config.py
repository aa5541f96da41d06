"""Tests for process configuration."""

from pathlib import Path

import pytest

from tdse_response_lab.config import (
    ENV_VAR_DOCS,
    LabConfig,
    PicardConfig,
    get_config,
    reload_config,
    set_config,
)


@pytest.fixture(autouse=True)
def restore_config():
    """Leave the global configuration as the test found it."""
    previous = get_config()
    yield
    set_config(previous)


class TestLabConfig:
    """Test LabConfig construction and validation."""

    def test_defaults(self):
        config = LabConfig()
        config.validate()
        assert config.picard_tolerance == 1e-12
        assert config.picard_max_iterations == 500
        assert config.threshold_count == 24
        assert config.kernel_max_points == 256
        assert config.kernel_max_pair_points == 4096
        assert config.ensemble_size == 16
        assert config.output_dir == Path("runs")
        assert config.enable_plots is False

    def test_from_environment(self, monkeypatch):
        monkeypatch.setenv("TDSE_LAB_PICARD_TOLERANCE", "1e-11")
        monkeypatch.setenv("TDSE_LAB_MAX_WORKERS", "4")
        monkeypatch.setenv("TDSE_LAB_ENABLE_PLOTS", "yes")
        monkeypatch.setenv("TDSE_LAB_OUTPUT_DIR", "/tmp/lab-runs")
        monkeypatch.setenv("TDSE_LAB_LOG_LEVEL", "debug")
        config = LabConfig.from_environment()
        assert config.picard_tolerance == 1e-11
        assert config.max_workers == 4
        assert config.enable_plots is True
        assert config.output_dir == Path("/tmp/lab-runs")
        assert config.log_level == "DEBUG"

    def test_bad_environment_values_fall_back(self, monkeypatch):
        monkeypatch.setenv("TDSE_LAB_ENSEMBLE_SIZE", "many")
        monkeypatch.setenv("TDSE_LAB_PICARD_TOLERANCE", "tight")
        config = LabConfig.from_environment()
        assert config.ensemble_size == 16
        assert config.picard_tolerance == 1e-12

    def test_validate_collects_every_error(self):
        config = LabConfig(
            picard_tolerance=0.5,
            max_workers=0,
            csv_float_format="%.3f",
            log_level="LOUD",
        )
        with pytest.raises(ValueError) as excinfo:
            config.validate()
        message = str(excinfo.value)
        assert message.startswith("Configuration validation failed:")
        for name in ("picard_tolerance", "max_workers", "csv_float_format", "log_level"):
            assert name in message

    def test_float_format_needs_twelve_digits(self):
        with pytest.raises(ValueError):
            LabConfig(csv_float_format="%.6e").validate()
        LabConfig(csv_float_format="%.12e").validate()

    def test_picard_settings(self):
        config = LabConfig(picard_tolerance=1e-10, picard_max_iterations=50, picard_patience=2)
        picard = config.picard(subinterval_count=3)
        assert picard == PicardConfig(1e-10, 50, 3, 2)

    def test_picard_config_rejects_bad_values(self):
        with pytest.raises(ValueError):
            PicardConfig(tolerance=0.0)
        with pytest.raises(ValueError):
            PicardConfig(subinterval_count=0)

    def test_to_dict(self):
        data = LabConfig().to_dict()
        assert data["output_dir"] == "runs"
        assert data["lab_name"] == "tdse-response-lab"


class TestGlobalConfig:
    """Test the module-level accessors."""

    def test_set_and_get(self):
        config = LabConfig(ensemble_size=3)
        set_config(config)
        assert get_config() is config

    def test_set_rejects_invalid(self):
        with pytest.raises(ValueError):
            set_config(LabConfig(ensemble_size=0))

    def test_reload(self, monkeypatch):
        monkeypatch.setenv("TDSE_LAB_THRESHOLD_COUNT", "12")
        assert reload_config().threshold_count == 12

    def test_env_docs_mention_every_variable(self):
        for name in ("TDSE_LAB_PICARD_TOLERANCE", "TDSE_LAB_MAX_WORKERS", "TDSE_LAB_LOG_LEVEL"):
            assert name in ENV_VAR_DOCS
