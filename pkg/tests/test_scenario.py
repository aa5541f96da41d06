"""Tests for scenario file parsing."""

from pathlib import Path

import numpy as np
import pytest

from tdse_response_lab.exceptions import ConfigurationError
from tdse_response_lab.scenario import load_scenario

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"

MINIMAL = """
[scenario]
name = "minimal"
experiment = "solve"

[grid]
points = 64
box_length = 16.0

[time]
horizon = 0.5
steps = 10

[potential]
expression = "a * cos(x)"

[params]
a = 0.25
"""


@pytest.fixture
def minimal(tmp_path):
    path = tmp_path / "minimal.toml"
    path.write_text(MINIMAL, encoding="utf-8")
    return path


def write(tmp_path, text):
    path = tmp_path / "scenario.toml"
    path.write_text(text, encoding="utf-8")
    return path


class TestParsing:
    """Test valid scenario files."""

    def test_minimal(self, minimal):
        scenario = load_scenario(minimal)
        assert scenario.name == "minimal"
        assert scenario.experiment == "solve"
        assert scenario.seed == 0
        assert scenario.grid.n_dim == 1
        assert scenario.params == {"a": 0.25}
        assert scenario.evaluation_time() == 0.5
        assert scenario.base_dir == minimal.parent

    def test_builds_fields(self, minimal):
        scenario = load_scenario(minimal)
        grid = scenario.build_grid()
        v = scenario.build_potential()
        np.testing.assert_allclose(v.values[0], 0.25 * np.cos(grid.axis), atol=1e-15)
        assert scenario.build_perturbation().is_zero()
        assert scenario.build_state().norm() == pytest.approx(1.0)

    def test_scale_multiplies_the_field(self, tmp_path):
        text = MINIMAL + '\n[perturbation]\nexpression = "cos(x)"\nscale = 3.0\n'
        scenario = load_scenario(write(tmp_path, text))
        assert scenario.build_perturbation().sup == pytest.approx(3.0)

    def test_potential_from_sample_file(self, tmp_path):
        values = np.full((11, 64), 0.5)
        np.save(tmp_path / "v.npy", values)
        text = MINIMAL.replace('expression = "a * cos(x)"', 'path = "v.npy"')
        scenario = load_scenario(write(tmp_path, text))
        np.testing.assert_array_equal(scenario.build_potential().values, values)

    def test_to_dict_echoes_the_document(self, minimal):
        data = load_scenario(minimal).to_dict()
        assert data["grid"] == {"points": 64, "box_length": 16.0}

    @pytest.mark.parametrize("path", sorted(SCENARIO_DIR.glob("*.toml")), ids=lambda p: p.stem)
    def test_shipped_scenarios_load(self, path):
        scenario = load_scenario(path)
        assert scenario.name


class TestErrors:
    """Test rejected scenario files."""

    def test_collects_every_error(self, tmp_path):
        text = """
[scenario]
experiment = "dance"
seed = -1

[grid]
points = "many"

[time]
horizon = 1.0
"""
        with pytest.raises(ConfigurationError) as excinfo:
            load_scenario(write(tmp_path, text))
        message = str(excinfo.value)
        for fragment in ("scenario.experiment", "scenario.seed", "grid.points", "time.steps"):
            assert fragment in message
        assert excinfo.value.field == "scenario.experiment"

    def test_toml_syntax_error_reports_the_line(self, tmp_path):
        with pytest.raises(ConfigurationError) as excinfo:
            load_scenario(write(tmp_path, "[grid]\npoints = \n"))
        assert excinfo.value.line == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_scenario(tmp_path / "absent.toml")

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigurationError, match="unknown section"):
            load_scenario(write(tmp_path, MINIMAL + "\n[extras]\nx = 1\n"))

    @pytest.mark.parametrize("name", ["x", "t", "exp", "pi"])
    def test_reserved_parameter_names(self, tmp_path, name):
        with pytest.raises(ConfigurationError, match="reserved"):
            load_scenario(write(tmp_path, MINIMAL + f"{name} = 1.0\n"))

    def test_unknown_identifier_in_expression(self, tmp_path):
        text = MINIMAL.replace("a * cos(x)", "b * cos(x)")
        with pytest.raises(ConfigurationError, match="potential"):
            load_scenario(write(tmp_path, text))

    def test_evaluation_time_off_the_lattice(self, tmp_path):
        text = MINIMAL.replace('experiment = "solve"', 'experiment = "solve"\nt = 0.123')
        with pytest.raises(ConfigurationError, match="scenario.t"):
            load_scenario(write(tmp_path, text))

    def test_kernel_source_after_evaluation_time(self, tmp_path):
        text = MINIMAL.replace('experiment = "solve"', 'experiment = "kernel"\nt = 0.2\ns = 0.3')
        with pytest.raises(ConfigurationError, match="scenario.s"):
            load_scenario(write(tmp_path, text))

    def test_convergence_lambdas_span(self, tmp_path):
        text = MINIMAL.replace(
            'experiment = "solve"', 'experiment = "convergence"\nlambdas = [0.1, 0.01]'
        )
        with pytest.raises(ConfigurationError, match="three decades"):
            load_scenario(write(tmp_path, text))

    def test_two_particles_need_a_planar_grid(self, tmp_path):
        text = MINIMAL.replace('experiment = "solve"', 'experiment = "solve"\nparticles = 2')
        with pytest.raises(ConfigurationError, match="particles"):
            load_scenario(write(tmp_path, text))


class TestOverrides:
    """Test sweep overrides."""

    def test_horizon_alias(self, minimal):
        scenario = load_scenario(minimal).with_override("T", 1.0)
        assert scenario.time.horizon == 1.0
        assert scenario.build_time().dt == pytest.approx(0.1)

    def test_parameter_override(self, minimal):
        scenario = load_scenario(minimal).with_override("a", 0.5)
        assert scenario.params["a"] == 0.5

    def test_scenario_field_override(self, minimal):
        scenario = load_scenario(minimal).with_override("lambda", 1e-3)
        assert scenario.lam == 1e-3

    def test_override_is_revalidated(self, minimal):
        with pytest.raises(ConfigurationError):
            load_scenario(minimal).with_override("steps", 0)

    def test_original_is_untouched(self, minimal):
        original = load_scenario(minimal)
        original.with_seed(9)
        assert original.seed == 0
        assert original.with_seed(9).seed == 9

    def test_rejects_nested_and_list_fields(self, tmp_path, minimal):
        with pytest.raises(ConfigurationError):
            load_scenario(minimal).with_override("scenario.experiment.kind", 1)
        text = MINIMAL.replace('experiment = "solve"', 'experiment = "solve"\nlambdas = [1, 2]')
        with pytest.raises(ConfigurationError):
            load_scenario(write(tmp_path, text)).with_override("lambdas", 3)
