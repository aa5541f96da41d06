"""Tests for empirical constants, interval partitioning and bound checks."""

import math

import numpy as np
import pytest

from tdse_response_lab.ensembles import PotentialEnsemble, StateEnsemble
from tdse_response_lab.estimates import (
    BoundConstants,
    BoundReport,
    ConstantEstimate,
    bound_suite,
    calibrate_constants,
    compute_cv,
    convergence_study,
    estimate_c0,
    estimate_cq,
    partition_interval,
    verify_density_bound,
    verify_difference_bound,
    verify_frechet_bound,
    verify_free_stability,
    verify_multiplication_bound,
    verify_strichartz_bound,
)
from tdse_response_lab.exceptions import EstimateError, ValidationError
from tdse_response_lab.norms import (
    INF,
    default_family,
    default_thresholds,
    t_star,
    v_norm_upper,
    x_norm,
)
from tdse_response_lab.potentials import SampledPotential
from tdse_response_lab.propagation import q_v_apply
from tdse_response_lab.spectral import Grid, TimeGrid, free_trajectory, gaussian_state


@pytest.fixture
def grid():
    return Grid(1, 128, 20.0)


@pytest.fixture
def time():
    return TimeGrid(0.5, 40)


@pytest.fixture
def fam():
    return default_family(1)


def run_checks(scenario, constants):
    """Every bound check of one suite scenario."""
    time = scenario.v.time
    return [
        verify_free_stability(scenario.psi0, scenario.fam, time, constants.c0),
        verify_multiplication_bound(
            scenario.v, free_trajectory(scenario.psi0, time), scenario.fam
        ),
        verify_strichartz_bound(scenario.v, scenario.psi0, scenario.fam, constants),
        verify_frechet_bound(scenario.v, scenario.w, scenario.psi0, scenario.fam, constants),
        verify_difference_bound(scenario.v, scenario.w, scenario.psi0, scenario.fam, constants),
        verify_density_bound(scenario.v, scenario.w, scenario.psi0, scenario.fam, constants),
    ]


class TestComputeCv:
    """Test C_v = 2 M^(1/theta) (1 + C0)."""

    def test_values(self):
        assert compute_cv(8, 6, 1.0) == pytest.approx(5.65685, abs=1e-5)
        assert compute_cv(1, INF, 1.0) == 4.0

    def test_monotone_in_m(self):
        values = [compute_cv(m, 6, 0.5) for m in range(1, 10)]
        assert values == sorted(values)

    @pytest.mark.parametrize("m, theta, c0", [(0, 6, 1.0), (1, 2, 1.0), (1, 6, 0.0)])
    def test_rejects_bad_arguments(self, m, theta, c0):
        with pytest.raises(ValidationError):
            compute_cv(m, theta, c0)


class TestPartitionInterval:
    """Test the smallest contracting partition."""

    def test_zero_potential_needs_one_window(self, grid, time, fam):
        partition = partition_interval(SampledPotential.zeros(grid, time), fam, 0.5, 1.0)
        assert partition.count == 1
        assert partition.subintervals == [(0.0, 0.5)]

    def test_windows_cover_the_horizon(self, grid, time, fam):
        v = SampledPotential.from_function(lambda t, x: 20.0 * np.cos(x), grid, time)
        partition = partition_interval(v, fam, 0.5, 1.0)
        assert partition.count > 1
        assert partition.subintervals[0][0] == 0.0
        assert partition.subintervals[-1][1] == pytest.approx(0.5)
        for (_, end), (start, _) in zip(partition.subintervals, partition.subintervals[1:]):
            assert end == start

    def test_larger_constant_needs_more_windows(self, grid, time, fam):
        v = SampledPotential.from_function(lambda t, x: 5.0 * np.cos(x), grid, time)
        small = partition_interval(v, fam, 0.5, 0.5).count
        large = partition_interval(v, fam, 0.5, 4.0).count
        assert large >= small

    @pytest.mark.parametrize("amplitude, c_q", [(3.0, 1.0), (12.0, 0.4), (40.0, 2.0)])
    def test_matches_exhaustive_search(self, fam, amplitude, c_q):
        small_grid, small_time = Grid(1, 32, 10.0), TimeGrid(0.5, 12)
        v = SampledPotential.from_function(
            lambda t, x: amplitude * np.cos(x + 3.0 * t) / (1.0 + x**2), small_grid, small_time
        )
        levels = default_thresholds(v, 8)

        def contracts(count):
            for start, stop in small_time.partition(count):
                norm = v_norm_upper(v.window(start, stop), fam, levels).value
                if c_q * t_star((stop - start) * small_time.dt, fam) * norm > 0.5:
                    return False
            return True

        expected = next(
            (m for m in range(1, small_time.steps + 1) if contracts(m)), small_time.steps
        )
        partition = partition_interval(v, fam, 0.5, c_q, levels)
        assert partition.count == expected
        assert partition.index_bounds == small_time.partition(expected)

    def test_halving_the_potential_never_needs_more_windows(self, grid, time, fam):
        for amplitude in (2.0, 8.0, 30.0, 120.0):
            v = SampledPotential.from_function(
                lambda t, x, a=amplitude: a * np.cos(x) * (1.0 + t), grid, time
            )
            full = partition_interval(v, fam, 0.5, 1.0).count
            half = partition_interval(v.scaled(0.5), fam, 0.5, 1.0).count
            assert half <= full

    def test_rejects_mismatched_horizon(self, grid, time, fam):
        with pytest.raises(ValidationError):
            partition_interval(SampledPotential.zeros(grid, time), fam, 1.0, 1.0)

    def test_rejects_non_positive_constant(self, grid, time, fam):
        with pytest.raises(ValidationError):
            partition_interval(SampledPotential.zeros(grid, time), fam, 0.5, 0.0)


class TestResultTypes:
    """Test estimate and report invariants."""

    def test_bound_report_flag_must_agree(self):
        with pytest.raises(ValidationError):
            BoundReport(1.0, 2.0, False, 1.0)

    def test_compare(self):
        report = BoundReport.compare(1.0, 3.0, check="demo")
        assert report.satisfied
        assert report.slack == 2.0
        assert report.as_row()["check"] == "demo"
        assert not BoundReport.compare(3.0, 1.0).satisfied

    def test_constant_estimate_validation(self):
        with pytest.raises(EstimateError):
            ConstantEstimate("C1", 1.0, 4, "x")
        with pytest.raises(EstimateError):
            ConstantEstimate("C0", 0.0, 4, "x")
        with pytest.raises(EstimateError):
            BoundConstants(c0=-1.0)

    def test_default_cq(self):
        estimate = ConstantEstimate("C0", 2.0, 3, "gaussian#0@seed0")
        assert BoundConstants.from_estimates(estimate) == BoundConstants(2.0, 1.0)


class TestEnsembles:
    """Test seeded ensembles."""

    def test_members_are_reproducible(self, grid):
        first = StateEnsemble(grid, 5).member(3)
        second = StateEnsemble(grid, 5).member(3)
        np.testing.assert_array_equal(first.amplitudes, second.amplitudes)

    def test_growing_the_ensemble_keeps_earlier_members(self, grid):
        short = StateEnsemble(grid, 2).members(2)
        long = StateEnsemble(grid, 2).members(5)
        for a, b in zip(short, long, strict=False):
            np.testing.assert_array_equal(a.amplitudes, b.amplitudes)

    def test_states_are_normalized(self, grid):
        for state in StateEnsemble(grid, 1).members(6):
            assert state.norm() == pytest.approx(1.0)

    def test_potentials_respect_the_amplitude(self, grid, time):
        ensemble = PotentialEnsemble(grid, time, seed=4, amplitude=0.7)
        for potential in ensemble.members(8):
            assert potential.sup <= 0.7 + 1e-12

    def test_rejects_negative_seed(self, grid):
        with pytest.raises(ValidationError):
            StateEnsemble(grid, -1)


class TestConstants:
    """Test the empirical C0 and CQ."""

    def test_calibration_is_deterministic(self, grid, time, fam):
        first = calibrate_constants(fam, grid, time, seed=3, state_count=4, potential_count=2)
        second = calibrate_constants(fam, grid, time, seed=3, state_count=4, potential_count=2)
        assert first == second
        assert first.c0 > 0
        assert first.c_q > 0

    def test_extra_states_raise_the_maximum(self, grid, time, fam):
        narrow = gaussian_state(grid, 0.3)
        ensemble = StateEnsemble(grid, 0)
        base = estimate_c0(fam, grid, time, ensemble, 3)
        extended = estimate_c0(fam, grid, time, ensemble, 3, extra_states=[narrow])
        assert extended.value >= base.value
        assert extended.ensemble_size == 4

    def test_c0_ignores_the_scale_of_a_state(self, grid, time, fam):
        psi = gaussian_state(grid, 0.6, 1.0, 2.0)
        ensemble = StateEnsemble(grid, 0)
        unit = estimate_c0(fam, grid, time, ensemble, 0, extra_states=[psi])
        scaled = estimate_c0(fam, grid, time, ensemble, 0, extra_states=[psi * 5.0])
        assert scaled.value == pytest.approx(unit.value, rel=1e-12)

    def test_cq_ignores_the_potential_amplitude(self, grid, time, fam):
        states = StateEnsemble(grid, 2)
        values = [
            estimate_cq(fam, grid, time, PotentialEnsemble(grid, time, 2, a), states, 2, 2).value
            for a in (1.0, 8.0, 0.05)
        ]
        assert values[1] == pytest.approx(values[0], rel=1e-10)
        assert values[2] == pytest.approx(values[0], rel=1e-10)

    def test_cq_ratio_is_jointly_homogeneous(self, grid, time, fam):
        v = PotentialEnsemble(grid, time, seed=5).member(0)
        phi = free_trajectory(gaussian_state(grid, 0.8, -1.0, 1.0), time)

        def ratio(a, b):
            scaled_phi = phi * b
            numerator = x_norm(q_v_apply(v.scaled(a), scaled_phi), fam)
            return numerator / (v_norm_upper(v.scaled(a), fam).value * x_norm(scaled_phi, fam))

        base = ratio(1.0, 1.0)
        for a, b in [(3.0, 1.0), (1.0, 0.2), (-2.5, 7.0), (1e-3, 1e3)]:
            assert ratio(a, b) == pytest.approx(base, rel=1e-10)

    def test_empty_ensemble(self, grid, time, fam):
        with pytest.raises(EstimateError):
            estimate_c0(fam, grid, time, StateEnsemble(grid, 0), 0)


class TestBoundChecks:
    """Test the inequality checks."""

    def test_free_stability_holds_for_calibrated_states(self, grid, time, fam):
        psi0 = gaussian_state(grid, 0.8, 1.0, 1.0)
        constants = calibrate_constants(
            fam, grid, time, state_count=3, potential_count=1, extra_states=[psi0]
        )
        report = verify_free_stability(psi0, fam, time, constants.c0)
        assert report.satisfied
        assert report.metadata["check"] == "free_stability"

    def test_multiplication_bound(self, grid, time, fam):
        v = SampledPotential.from_function(
            lambda t, x: np.cos(x) / (1.0 + x**2) * (1.0 + t), grid, time
        )
        phi = free_trajectory(gaussian_state(grid), time)
        assert verify_multiplication_bound(v, phi, fam).satisfied

    def test_checks_need_constants(self, grid, time, fam):
        with pytest.raises(EstimateError):
            verify_strichartz_bound(
                SampledPotential.zeros(grid, time), gaussian_state(grid), fam, None
            )

    def test_suite_subset(self):
        scenarios = bound_suite(seed=0, count=3)
        assert [s.v.time.horizon for s in scenarios] == [0.25, 0.5, 1.0]
        for scenario in scenarios:
            constants = calibrate_constants(
                scenario.fam,
                scenario.v.grid,
                scenario.v.time,
                state_count=4,
                potential_count=2,
                extra_states=[scenario.psi0],
            )
            for report in run_checks(scenario, constants):
                assert report.satisfied, report.metadata

    @pytest.mark.slow
    def test_full_suite(self):
        scenarios = bound_suite(seed=0, count=20)
        assert len({s.name for s in scenarios}) == 20
        cache = {}
        for scenario in scenarios:
            time = scenario.v.time
            if time not in cache:
                cache[time] = calibrate_constants(
                    scenario.fam,
                    scenario.v.grid,
                    time,
                    extra_states=[s.psi0 for s in scenarios if s.v.time == time],
                )
            for report in run_checks(scenario, cache[time]):
                assert report.satisfied, (scenario.name, report.metadata)

    def test_suite_rejects_empty(self):
        with pytest.raises(EstimateError):
            bound_suite(count=0)


class TestConvergenceStudy:
    """Test the first-order convergence of the Gateaux difference quotient."""

    @pytest.fixture
    def problem(self, grid):
        time = TimeGrid(0.5, 50)
        v = SampledPotential.from_function(lambda t, x: 0.5 * np.cos(0.5 * x), grid, time)
        w = SampledPotential.from_function(lambda t, x: 0.5 * np.exp(-(x**2)), grid, time)
        return v, w, gaussian_state(grid, 1.0, 0.0, 0.5)

    def test_first_order_slope(self, problem):
        report = convergence_study(*problem)
        assert not report.saturated
        assert 0.9 <= report.slope <= 1.1
        assert list(report.table.columns) == [
            "lambda",
            "residual",
            "relative_residual",
            "saturated",
        ]
        assert len(report.table) == 4

    def test_slope_is_invariant_under_scaling_w(self, problem):
        v, w, psi0 = problem
        single = convergence_study(v, w, psi0)
        double = convergence_study(v, w.scaled(2.0), psi0)
        assert double.slope == pytest.approx(single.slope, abs=0.05)

    def test_needs_three_decades(self, problem):
        with pytest.raises(ValidationError):
            convergence_study(*problem, lambdas=(1e-1, 1e-2))

    def test_rejects_zero_lambda(self, problem):
        with pytest.raises(ValidationError):
            convergence_study(*problem, lambdas=(1e-1, 0.0, 1e-4))

    def test_saturation_is_reported(self, grid):
        time = TimeGrid(0.5, 20)
        zero = SampledPotential.zeros(grid, time)
        report = convergence_study(zero, zero, gaussian_state(grid))
        assert report.saturated
        assert math.isnan(report.slope)
