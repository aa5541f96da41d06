"""Minimal tests for the TDSE response lab."""


def test_config_import_and_creation():
    """Test that config module can be imported and LabConfig created."""
    from tdse_response_lab.config import LabConfig

    config = LabConfig()
    assert config is not None
    assert hasattr(config, "picard_tolerance")
    assert hasattr(config, "output_dir")
    assert config.csv_float_format == "%.15e"
    assert config.max_workers == 1


def test_exceptions_import():
    """Test that exceptions module can be imported."""
    from tdse_response_lab.exceptions import (
        BoundViolationError,
        ConfigurationError,
        ContractionError,
        ConvergenceError,
        EstimateError,
        ExponentError,
        ExpressionError,
        GridMismatchError,
        SizeGuardError,
        SolverError,
        TDSELabError,
        ValidationError,
    )

    # Test exception hierarchy
    assert issubclass(ConfigurationError, TDSELabError)
    assert issubclass(ExpressionError, ConfigurationError)
    assert issubclass(GridMismatchError, ValidationError)
    assert issubclass(ExponentError, ValidationError)
    assert issubclass(SizeGuardError, ValidationError)
    assert issubclass(ContractionError, SolverError)
    assert issubclass(ConvergenceError, SolverError)
    assert issubclass(EstimateError, TDSELabError)
    assert issubclass(BoundViolationError, TDSELabError)


def test_exception_context():
    """Exceptions carry their context attributes."""
    from tdse_response_lab.exceptions import BoundViolationError, ConfigurationError

    error = ConfigurationError("bad", field="grid.points", line=7)
    assert error.field == "grid.points"
    assert error.line == 7
    assert BoundViolationError("x", violations=3).violations == 3


def test_util_import():
    """Test that util module can be imported."""
    from tdse_response_lab.util import ValidationUtils, ordered_map

    assert ValidationUtils is not None
    assert ordered_map is not None


def test_parse_scalar():
    """Command-line values become int, float or string."""
    from tdse_response_lab.util import ValidationUtils

    assert ValidationUtils.parse_scalar("4") == 4
    assert isinstance(ValidationUtils.parse_scalar("4"), int)
    assert ValidationUtils.parse_scalar(" 1e-3 ") == 1e-3
    assert ValidationUtils.parse_scalar("strang") == "strang"


def test_sanitize_filename():
    """Test filename sanitization."""
    from tdse_response_lab.util import ValidationUtils

    assert ValidationUtils.sanitize_filename("T=0.5") == "T=0.5"
    assert ValidationUtils.sanitize_filename("a/b c") == "a_b_c"
    assert ValidationUtils.sanitize_filename("") == "_"


def test_require_finite_scalar():
    """Non-finite scalars are rejected."""
    import pytest

    from tdse_response_lab.exceptions import ValidationError
    from tdse_response_lab.util import ValidationUtils

    assert ValidationUtils.require_finite_scalar("2.5", "t") == 2.5
    with pytest.raises(ValidationError):
        ValidationUtils.require_finite_scalar(float("nan"), "t")
    with pytest.raises(ValidationError):
        ValidationUtils.require_finite_scalar("abc", "t")


def test_ordered_map_keeps_order():
    """Parallel mapping yields results in submission order."""
    import time

    from tdse_response_lab.util import ordered_map

    def slow_square(value):
        time.sleep(0.001 * (10 - value))
        return value * value

    expected = [v * v for v in range(10)]
    assert list(ordered_map(slow_square, range(10))) == expected
    assert list(ordered_map(slow_square, range(10), max_workers=4)) == expected


def test_version():
    """The package exposes a version string."""
    import tdse_response_lab

    assert isinstance(tdse_response_lab.__version__, str)
