"""Tests for Frechet derivatives, the Kubo formula, densities and kernels."""

import numpy as np
import pytest

from tdse_response_lab.exceptions import GridMismatchError, SizeGuardError, ValidationError
from tdse_response_lab.norms import INF, mixed_norm
from tdse_response_lab.potentials import SampledPotential
from tdse_response_lab.propagation import solve_mild, solve_strang
from tdse_response_lab.response import (
    ObservableOperator,
    delta_density,
    delta_density_series,
    delta_evolution,
    delta_psi,
    density,
    density_series,
    duhamel_weights,
    expectation,
    expectation_fd,
    gateaux_fd,
    internal_force_density,
    kernel_contract,
    kubo_delta_expectation,
    kubo_response_series,
    response_kernel,
    response_kernel_series,
)
from tdse_response_lab.spectral import (
    Grid,
    StateVector,
    TimeGrid,
    free_trajectory,
    gaussian_state,
    harmonic_ground_state,
    product_pair,
    slater_pair,
    symmetrize_pair,
)


@pytest.fixture
def grid():
    return Grid(1, 128, 20.0)


@pytest.fixture
def time():
    return TimeGrid(1.0, 200)


@pytest.fixture
def psi0(grid):
    return gaussian_state(grid, 1.0, 0.0, 0.5)


@pytest.fixture
def v(grid, time):
    return SampledPotential.from_function(lambda t, x: 0.5 * np.cos(0.5 * x), grid, time)


@pytest.fixture
def w(grid, time):
    return SampledPotential.from_function(
        lambda t, x: np.exp(-((x - 1.0) ** 2)) * np.sin(3.0 * t), grid, time
    )


class TestDuhamelWeights:
    """Test trapezoid weights of the Duhamel integral."""

    def test_first_sample(self):
        np.testing.assert_allclose(duhamel_weights(4, 0, 0.1), [0.0, 0.05, 0.05, 0.05, 0.05])

    def test_interior_sample(self):
        np.testing.assert_allclose(duhamel_weights(4, 2, 0.1), [0.05, 0.1, 0.1])


class TestObservables:
    """Test observable construction and expectations."""

    def test_identity_expectation(self, grid, psi0):
        assert ObservableOperator.identity(grid).expectation(psi0) == pytest.approx(1.0)

    def test_projector_on_own_state(self, psi0):
        assert ObservableOperator.projector(psi0).expectation(psi0) == pytest.approx(1.0)

    def test_matrix_matches_multiplication(self, grid, psi0):
        field = np.cos(grid.axis)
        by_matrix = ObservableOperator.matrix(np.diag(field), grid)
        by_field = ObservableOperator.multiplication(field, grid)
        assert by_matrix.expectation(psi0) == pytest.approx(by_field.expectation(psi0))

    def test_rejects_non_hermitian_matrix(self, grid):
        matrix = np.zeros((grid.size, grid.size))
        matrix[0, 1] = 1.0
        with pytest.raises(ValidationError):
            ObservableOperator.matrix(matrix, grid)

    def test_rejects_unnormalized_projector(self, psi0):
        with pytest.raises(ValidationError):
            ObservableOperator.projector(psi0 * 2.0)

    def test_rejects_field_on_wrong_grid(self, grid):
        with pytest.raises(GridMismatchError):
            ObservableOperator.multiplication(np.ones(10), grid)

    def test_expectation_along_free_trajectory_is_constant_for_identity(self, grid, psi0, v):
        traj = solve_strang(v, psi0)
        np.testing.assert_allclose(
            expectation(ObservableOperator.identity(grid), traj), 1.0, atol=1e-12
        )


class TestFrechetDerivative:
    """Test delta psi and the variation of the evolution system."""

    def test_linear_in_the_perturbation(self, grid, time, psi0, v, w):
        other = SampledPotential.from_function(lambda t, x: 0.2 * np.cos(x) * t, grid, time)
        combined = delta_psi(v, w + other, psi0, scheme="strang")
        separate = delta_psi(v, w, psi0, scheme="strang") + delta_psi(
            v, other, psi0, scheme="strang"
        )
        scale = mixed_norm(combined, 2, INF)
        assert mixed_norm(combined - separate, 2, INF) <= 1e-8 * scale

    def test_duhamel_matches_tangent_map(self, psi0, v, w):
        duhamel = delta_psi(v, w, psi0, method="duhamel", scheme="strang")
        tangent = delta_psi(v, w, psi0, method="linearized", scheme="strang")
        scale = mixed_norm(tangent, 2, INF)
        assert mixed_norm(duhamel - tangent, 2, INF) <= 1e-3 * scale

    def test_mild_duhamel_matches_difference_quotient(self, grid, psi0):
        short = TimeGrid(0.5, 50)
        v = SampledPotential.from_function(lambda t, x: 0.5 * np.cos(0.5 * x), grid, short)
        w = SampledPotential.from_function(lambda t, x: np.exp(-(x**2)), grid, short)
        duhamel = delta_psi(v, w, psi0, method="duhamel", scheme="mild")
        quotient = gateaux_fd(v, w, psi0, 1e-5, scheme="mild")
        scale = mixed_norm(duhamel, 2, INF)
        assert mixed_norm(quotient - duhamel, 2, INF) <= 1e-3 * scale

    def test_zero_perturbation(self, grid, time, psi0, v):
        result = delta_psi(v, SampledPotential.zeros(grid, time), psi0, scheme="strang")
        assert not np.any(result.states)

    def test_variation_vanishes_at_equal_times(self, psi0, v, w):
        result = delta_evolution(v, w, 0.5, 0.5, psi0)
        assert not np.any(result.amplitudes)

    def test_unknown_method(self, psi0, v, w):
        with pytest.raises(ValidationError):
            delta_psi(v, w, psi0, method="adjoint")

    def test_lambda_must_be_nonzero(self, psi0, v, w):
        with pytest.raises(ValidationError):
            gateaux_fd(v, w, psi0, 0.0)


class TestKubo:
    """Test the Kubo formula against finite differences."""

    @pytest.fixture(params=["rational", "projector"])
    def observable(self, request, grid):
        if request.param == "rational":
            return ObservableOperator.multiplication(grid.axis / (1.0 + grid.axis**2), grid)
        return ObservableOperator.projector(gaussian_state(grid, 1.0, 2.0))

    def test_matches_finite_difference(self, observable, psi0, v, w):
        kubo = kubo_delta_expectation(observable, v, w, psi0, 1.0)
        fd = expectation_fd(observable, v, w, psi0, 1e-4, 1.0)
        assert abs(kubo - fd) <= 1e-3 * abs(fd) + 1e-7

    def test_identity_has_no_response(self, grid, psi0, v, w):
        series = kubo_response_series(ObservableOperator.identity(grid), v, w, psi0)
        assert np.max(np.abs(series)) <= 1e-10

    def test_series_starts_at_zero(self, grid, psi0, v, w):
        A = ObservableOperator.multiplication(np.cos(grid.axis), grid)
        series = kubo_response_series(A, v, w, psi0)
        assert series[0] == 0.0
        assert series[-1] == pytest.approx(kubo_delta_expectation(A, v, w, psi0, 1.0))

    def test_zero_time(self, grid, psi0, v, w):
        A = ObservableOperator.identity(grid)
        assert kubo_delta_expectation(A, v, w, psi0, 0.0) == 0.0


class TestDensity:
    """Test densities and their linear response."""

    def test_single_particle_total(self, psi0, v):
        traj = solve_strang(v, psi0)
        totals = np.sum(density_series(traj), axis=-1) * traj.grid.spacing
        np.testing.assert_allclose(totals, 1.0, atol=1e-10)
        assert density(psi0).total() == pytest.approx(1.0, abs=1e-12)

    def test_delta_density_integrates_to_zero(self, psi0, v, w):
        series = delta_density_series(v, w, psi0)
        totals = np.sum(series, axis=-1) * psi0.grid.spacing
        assert np.max(np.abs(totals)) <= 1e-8
        assert np.max(np.abs(series)) > 1e-4

    def test_delta_density_at_time(self, psi0, v, w):
        series = delta_density_series(v, w, psi0)
        np.testing.assert_allclose(delta_density(v, w, psi0, 1.0), series[-1], atol=1e-12)
        assert not np.any(delta_density(v, w, psi0, 0.0))

    def test_gauge_shift_does_not_change_the_density(self, time, psi0, v, w):
        offsets = 0.7 + np.sin(time.samples)
        shifted = density_series(solve_strang(v.shifted(offsets), psi0))
        np.testing.assert_allclose(shifted, density_series(solve_strang(v, psi0)), atol=1e-12)
        response = delta_density_series(v, w.shifted(offsets), psi0)
        np.testing.assert_allclose(response, delta_density_series(v, w, psi0), atol=1e-10)

    def test_two_particle_total(self):
        single = Grid(1, 32, 12.0)
        pair = slater_pair(gaussian_state(single, 1.0, -1.0), gaussian_state(single, 1.0, 1.5))
        field = density(pair, particles=2)
        assert field.grid == single
        assert field.total() == pytest.approx(2.0)

    def test_two_particle_state_needs_exchange_symmetry(self):
        single = Grid(1, 32, 12.0)
        pair = product_pair(gaussian_state(single, 1.0, -1.0), gaussian_state(single, 1.0, 1.5))
        with pytest.raises(ValidationError):
            density(pair, particles=2)

    def test_symmetric_product_marginal(self):
        single = Grid(1, 48, 16.0)
        phi = gaussian_state(single, 1.2, 0.5, 0.8)
        pair = symmetrize_pair(product_pair(phi, phi), sign=1)
        field = density(pair, particles=2)
        np.testing.assert_allclose(field.values, 2.0 * np.abs(phi.amplitudes) ** 2, atol=1e-12)

    def test_slater_marginal_of_orthonormal_orbitals(self):
        single = Grid(1, 48, 16.0)
        ground = harmonic_ground_state(single).normalized()
        excited = StateVector(single.axis * ground.amplitudes, single).normalized()
        overlap = np.sum(np.conj(ground.amplitudes) * excited.amplitudes) * single.spacing
        assert abs(overlap) <= 1e-14
        field = density(slater_pair(ground, excited), particles=2)
        expected = np.abs(ground.amplitudes) ** 2 + np.abs(excited.amplitudes) ** 2
        np.testing.assert_allclose(field.values, expected, atol=1e-12)

    def test_unsupported_particle_count(self, psi0):
        with pytest.raises(ValidationError):
            density(psi0, particles=3)


class TestResponseKernel:
    """Test chi(t, x, s, y) against the direct density response."""

    @pytest.fixture
    def small(self):
        grid = Grid(1, 64, 16.0)
        time = TimeGrid(0.5, 50)
        v = SampledPotential.from_function(lambda t, x: 0.3 * np.cos(0.5 * x), grid, time)
        w = SampledPotential.from_function(
            lambda t, x: np.exp(-((x + 1.0) ** 2)) * (1.0 + t), grid, time
        )
        return v, w, gaussian_state(grid, 1.0, 0.5, 0.3)

    def test_contraction_matches_direct_response(self, small):
        v, w, psi0 = small
        kernels = response_kernel_series(v, psi0, 0.5)
        assert len(kernels) == 51
        via_kernel = kernel_contract(kernels, w, 0.5)
        direct = delta_density(v, w, psi0, 0.5)
        scale = float(np.max(np.abs(direct)))
        assert scale > 0.0
        assert np.max(np.abs(via_kernel - direct)) <= 1e-6 * scale

    def test_two_particle_contraction_matches_direct_response(self):
        single = Grid(1, 24, 12.0)
        time = TimeGrid(0.4, 40)
        v = SampledPotential.from_function(lambda t, x: 0.3 * np.cos(0.5 * x), single, time)
        w = SampledPotential.from_function(
            lambda t, x: np.exp(-((x - 0.5) ** 2)) * (1.0 + t), single, time
        )
        psi0 = slater_pair(gaussian_state(single, 1.0, -1.0), gaussian_state(single, 1.0, 1.5))
        pair_v = v.lifted_pair()
        kernels = response_kernel_series(pair_v, psi0, 0.4, particles=2)
        assert kernels[0].grid == single
        via_kernel = kernel_contract(kernels, w, 0.4)
        direct = delta_density(pair_v, w.lifted_pair(), psi0, 0.4, particles=2)
        scale = float(np.max(np.abs(direct)))
        assert scale > 0.0
        assert np.max(np.abs(via_kernel - direct)) <= 1e-6 * scale

    def test_single_kernel_matches_series(self, small):
        v, _, psi0 = small
        series = response_kernel_series(v, psi0, 0.5)
        kernel = response_kernel(v, psi0, 0.5, 0.2)
        assert kernel.s == pytest.approx(0.2)
        np.testing.assert_allclose(kernel.matrix, series[20].matrix, atol=1e-12)

    def test_kernel_is_causal(self, small):
        v, _, psi0 = small
        with pytest.raises(ValidationError):
            response_kernel(v, psi0, 0.2, 0.4)

    def test_size_guard(self):
        grid = Grid(1, 512, 40.0)
        time = TimeGrid(0.1, 2)
        with pytest.raises(SizeGuardError):
            response_kernel(SampledPotential.zeros(grid, time), gaussian_state(grid), 0.1, 0.0)


class TestInternalForceDensity:
    """Test q[v] = d_t^2 n - div(n grad v)."""

    def test_free_evolution_has_no_divergence(self, grid, time, psi0):
        zero = SampledPotential.zeros(grid, time)
        force = internal_force_density(zero, solve_strang(zero, psi0))
        assert not np.any(force.divergence)
        np.testing.assert_array_equal(force.values, force.second_time_derivative)
        assert force.values.shape == (time.sample_count - 2, grid.points_per_dim)

    @pytest.mark.parametrize("derivative", ["central", "spectral"])
    def test_shapes(self, psi0, v, derivative):
        force = internal_force_density(v, solve_strang(v, psi0), derivative=derivative)
        assert force.times[0] == pytest.approx(v.time.dt)
        assert np.all(np.isfinite(force.values))

    def test_stationary_state_has_no_time_variation(self, grid):
        time = TimeGrid(1.0, 400)
        v = SampledPotential.from_function(lambda t, x: x**2 + 0.0 * t, grid, time)
        psi0 = harmonic_ground_state(grid)
        force = internal_force_density(v, solve_mild(v, psi0))
        peak = float(np.max(np.abs(psi0.amplitudes) ** 2))
        assert np.max(np.abs(force.second_time_derivative)) <= 1e-4 * peak
        assert np.max(np.abs(force.divergence)) > 0.1 * peak

    @pytest.mark.parametrize("derivative", ["central", "spectral"])
    def test_spatially_constant_potential(self, grid, time, psi0, derivative):
        v = SampledPotential.from_function(lambda t, x: 0.7 * np.sin(3.0 * t) + 0.0 * x, grid, time)
        force = internal_force_density(v, solve_strang(v, psi0), derivative=derivative)
        scale = float(np.max(np.abs(force.second_time_derivative)))
        assert scale > 0.0
        np.testing.assert_allclose(
            force.values, force.second_time_derivative, rtol=0.0, atol=1e-8 * scale
        )

    def test_free_gaussian_matches_closed_form(self, grid):
        time = TimeGrid(1.0, 100)
        zero = SampledPotential.zeros(grid, time)
        force = internal_force_density(zero, free_trajectory(gaussian_state(grid), time))
        # |psi|^2 is a centred normal density with variance 1 + t^2.
        t = force.times[:, np.newaxis]
        x = grid.axis[np.newaxis, :]
        variance, rate, curvature = 1.0 + t**2, 2.0 * t, 2.0
        n = np.exp(-(x**2) / (2.0 * variance)) / np.sqrt(2.0 * np.pi * variance)
        first = -1.0 / (2.0 * variance) + x**2 / (2.0 * variance**2)
        second = first**2 + 1.0 / (2.0 * variance**2) - x**2 / variance**3
        expected = n * (second * rate**2 + first * curvature)
        scale = float(np.max(np.abs(expected)))
        np.testing.assert_allclose(
            force.second_time_derivative, expected, rtol=0.0, atol=1e-3 * scale
        )

    def test_rejects_unknown_derivative(self, psi0, v):
        with pytest.raises(ValidationError):
            internal_force_density(v, solve_strang(v, psi0), derivative="forward")

    def test_needs_three_samples(self, grid, psi0):
        time = TimeGrid(0.1, 1)
        zero = SampledPotential.zeros(grid, time)
        with pytest.raises(ValidationError):
            internal_force_density(zero, solve_strang(zero, psi0))
