"""Experiment implementations behind the batch front end.

Each experiment turns a Scenario into an ExperimentResult: a main table, a
one-row summary, the constants it used and optional plot data.
"""

import logging
from collections.abc import Callable

import numpy as np
import pandas as pd

from .artifacts import ExperimentResult
from .config import LabConfig
from .ensembles import PotentialEnsemble, StateEnsemble
from .estimates import (
    BoundConstants,
    BoundScenario,
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
from .exceptions import ConfigurationError
from .norms import INF, mixed_norm, t_star
from .propagation import solve_mild, solve_strang
from .response import (
    delta_density_series,
    delta_psi,
    density_grid,
    density_series,
    expectation,
    gateaux_fd,
    internal_force_density,
    kernel_contract,
    kubo_response_series,
    response_kernel,
    response_kernel_series,
)
from .scenario import Scenario
from .spectral import Grid, Trajectory, free_trajectory, position_variance

logger = logging.getLogger(__name__)

DEFAULT_SCHEMES = {"kubo": "strang", "density": "strang", "kernel": "strang", "qfield": "strang"}


def _coordinate_columns(grid: Grid) -> dict[str, np.ndarray]:
    names = ("x", "y")
    return {names[i]: c.reshape(-1) for i, c in enumerate(grid.coordinates)}


class ExperimentSuite:
    """Runs the named experiment of a scenario."""

    def __init__(self, config: LabConfig):
        """Initialize with process configuration."""
        self.config = config
        self._handlers: dict[str, Callable[[Scenario], ExperimentResult]] = {
            "solve": self.solve,
            "delta": self.delta,
            "kubo": self.kubo,
            "density": self.density,
            "kernel": self.kernel,
            "qfield": self.qfield,
            "verify-bounds": self.verify_bounds,
            "convergence": self.convergence,
            "estimate-constants": self.estimate_constants,
        }

    def run(self, scenario: Scenario) -> ExperimentResult:
        """Dispatch on scenario.experiment."""
        handler = self._handlers.get(scenario.experiment)
        if handler is None:
            raise ConfigurationError(
                f"unknown experiment {scenario.experiment!r}", field="scenario.experiment"
            )
        logger.info(f"Running experiment '{scenario.experiment}' for scenario '{scenario.name}'")
        result = handler(scenario)
        result.summary = {**self._common_summary(scenario), **result.summary}
        return result

    # -- helpers ------------------------------------------------------------

    def _scheme(self, scenario: Scenario) -> str:
        return scenario.scheme or DEFAULT_SCHEMES.get(scenario.experiment, "mild")

    def _solve(self, scenario: Scenario, v, psi0) -> Trajectory:
        if self._scheme(scenario) == "strang":
            return solve_strang(v, psi0)
        return solve_mild(v, psi0, self.config.picard(), scenario.build_family())

    def _common_summary(self, scenario: Scenario) -> dict:
        fam = scenario.build_family()
        return {
            "scenario": scenario.name,
            "seed": scenario.seed,
            "scheme": self._scheme(scenario),
            "horizon": scenario.time.horizon,
            "steps": scenario.time.steps,
            "t_star": t_star(scenario.time.horizon, fam),
        }

    # -- experiments --------------------------------------------------------

    def solve(self, scenario: Scenario) -> ExperimentResult:
        """psi(t): norm, norm defect and position variance per sample."""
        v = scenario.build_potential()
        psi0 = scenario.build_state()
        traj = self._solve(scenario, v, psi0)
        norms = traj.norms()
        variances = np.array([position_variance(traj.state(j)) for j in range(len(traj))])
        defect = norms - psi0.norm()
        table = pd.DataFrame(
            {"t": traj.time.samples, "norm": norms, "norm_defect": defect, "variance": variances}
        )
        diagnostics = traj.diagnostics
        return ExperimentResult(
            "solve",
            table,
            summary={
                "max_norm_defect": float(np.max(np.abs(defect))),
                "final_variance": float(variances[-1]),
                "subintervals": diagnostics.get("subintervals", 0),
                "iterations": diagnostics.get("iterations", 0),
            },
            lines={
                "norm": (traj.time.samples, {"norm": norms}),
                "variance": (traj.time.samples, {"variance": variances}),
            },
        )

    def delta(self, scenario: Scenario) -> ExperimentResult:
        """delta psi[v; w] and, with scenario.lambda, the difference-quotient residual."""
        v = scenario.build_potential()
        w = scenario.build_perturbation()
        psi0 = scenario.build_state()
        scheme = self._scheme(scenario)
        method = scenario.method or ("linearized" if scenario.lam is not None else "duhamel")
        picard = self.config.picard()
        variation = delta_psi(v, w, psi0, picard, method=method, scheme=scheme)
        columns = {"t": v.time.samples, "delta_norm": variation.norms()}
        summary = {
            "method": method,
            "scale": scenario.perturbation.scale,
            "delta_norm_2inf": mixed_norm(variation, 2, INF),
        }
        if scenario.lam is not None:
            quotient = gateaux_fd(v, w, psi0, scenario.lam, picard, scheme)
            difference = quotient - variation
            residual = mixed_norm(difference, 2, INF)
            columns["fd_residual"] = difference.norms()
            scale = summary["delta_norm_2inf"]
            summary.update(
                {
                    "lambda": scenario.lam,
                    "residual": residual,
                    "relative_residual": residual / scale if scale > 0 else float("nan"),
                }
            )
        table = pd.DataFrame(columns)
        return ExperimentResult(
            "delta",
            table,
            summary=summary,
            lines={"delta_norm": (v.time.samples, {"delta_norm": columns["delta_norm"]})},
        )

    def kubo(self, scenario: Scenario) -> ExperimentResult:
        """delta <A>(t) by the Kubo formula, with a finite-difference column when lambda is set."""
        v = scenario.build_potential()
        w = scenario.build_perturbation()
        psi0 = scenario.build_state()
        scheme = self._scheme(scenario)
        A = scenario.build_observable()
        picard = self.config.picard()
        series = kubo_response_series(A, v, w, psi0, picard, scheme)
        base = expectation(A, self._solve(scenario, v, psi0))
        columns = {"t": v.time.samples, "expectation": base, "kubo_delta": series}
        index = v.time.index_of(scenario.evaluation_time())
        summary = {"t": scenario.evaluation_time(), "kubo_delta": float(series[index])}
        if scenario.lam is not None:
            perturbed = expectation(A, self._solve(scenario, v + w.scaled(scenario.lam), psi0))
            fd = (perturbed - base) / scenario.lam
            columns["fd_delta"] = fd
            reference = abs(fd[index])
            summary.update(
                {
                    "lambda": scenario.lam,
                    "fd_delta": float(fd[index]),
                    "relative_error": abs(series[index] - fd[index]) / reference
                    if reference > 0
                    else float("nan"),
                }
            )
        return ExperimentResult(
            "kubo",
            pd.DataFrame(columns),
            summary=summary,
            lines={"kubo": (v.time.samples, {k: c for k, c in columns.items() if k != "t"})},
        )

    def density(self, scenario: Scenario) -> ExperimentResult:
        """n and delta n at scenario.t, plus their integrals at every sample."""
        v = scenario.build_potential()
        w = scenario.build_perturbation()
        psi0 = scenario.build_state()
        particles = scenario.particles
        scheme = self._scheme(scenario)
        single = density_grid(v.grid, particles)
        traj = self._solve(scenario, v, psi0)
        n = density_series(traj, particles)
        dn = delta_density_series(
            v, w, psi0, particles, self.config.picard(), scenario.method or "duhamel", scheme
        )
        axes = tuple(range(1, n.ndim))
        totals = pd.DataFrame(
            {
                "t": v.time.samples,
                "total_density": np.sum(n, axis=axes) * single.cell_volume,
                "total_delta_density": np.sum(dn, axis=axes) * single.cell_volume,
            }
        )
        index = v.time.index_of(scenario.evaluation_time())
        table = pd.DataFrame(
            {
                **_coordinate_columns(single),
                "density": n[index].reshape(-1),
                "delta_density": dn[index].reshape(-1),
            }
        )
        result = ExperimentResult(
            "density",
            table,
            summary={
                "t": scenario.evaluation_time(),
                "particles": particles,
                "total_density": float(totals["total_density"].iloc[index]),
                "max_abs_total_delta_density": float(
                    np.max(np.abs(totals["total_delta_density"]))
                ),
            },
            extra_tables={"density_totals": totals},
        )
        if single.n_dim == 1:
            result.lines["density"] = (
                single.axis,
                {"density": n[index], "delta_density": dn[index]},
            )
        else:
            result.heatmaps["density"] = n[index]
        return result

    def kernel(self, scenario: Scenario) -> ExperimentResult:
        """chi(t, x, s, y) and the kernel-route versus direct-route delta n check."""
        v = scenario.build_potential()
        psi0 = scenario.build_state()
        particles = scenario.particles
        scheme = self._scheme(scenario)
        picard = self.config.picard()
        t = scenario.evaluation_time()
        s = scenario.s if scenario.s is not None else 0.0
        single = density_grid(v.grid, particles)
        chi = response_kernel(v, psi0, t, s, particles, picard, scheme)
        sites = np.arange(single.size)
        table = pd.DataFrame(
            {
                "x_site": np.repeat(sites, single.size),
                "y_site": np.tile(sites, single.size),
                "chi": chi.matrix.reshape(-1),
            }
        )
        summary: dict = {"t": t, "s": s, "particles": particles}
        result = ExperimentResult("kernel", table, summary=summary, heatmaps={"kernel": chi.matrix})

        w_single = scenario.one_body(scenario.perturbation, "perturbation")
        if not w_single.is_zero():
            kernels = response_kernel_series(v, psi0, t, particles, picard, scheme)
            via_kernel = kernel_contract(kernels, w_single, t)
            w = scenario.build_perturbation()
            index = v.time.index_of(t)
            direct = delta_density_series(v, w, psi0, particles, picard, "duhamel", scheme)[index]
            scale = float(np.max(np.abs(direct)))
            difference = float(np.max(np.abs(via_kernel - direct)))
            summary["kernel_direct_difference"] = difference
            summary["kernel_direct_relative"] = difference / scale if scale > 0 else 0.0
            result.extra_tables["kernel_check"] = pd.DataFrame(
                {
                    **_coordinate_columns(single),
                    "delta_density_kernel": via_kernel.reshape(-1),
                    "delta_density_direct": direct.reshape(-1),
                }
            )
        return result

    def qfield(self, scenario: Scenario) -> ExperimentResult:
        """Internal force density on interior samples."""
        v = scenario.build_potential()
        psi0 = scenario.build_state()
        traj = self._solve(scenario, v, psi0)
        one_body = scenario.one_body(scenario.potential, "potential")
        force = internal_force_density(one_body, traj, scenario.particles, scenario.derivative)
        single = force.grid
        count = single.size
        coordinates = {
            k: np.tile(c, len(force.times)) for k, c in _coordinate_columns(single).items()
        }
        table = pd.DataFrame(
            {
                "t": np.repeat(force.times, count),
                **coordinates,
                "q": force.values.reshape(-1),
                "second_time_derivative": force.second_time_derivative.reshape(-1),
                "divergence": force.divergence.reshape(-1),
            }
        )
        result = ExperimentResult(
            "qfield",
            table,
            summary={
                "derivative": scenario.derivative,
                "max_abs_q": float(np.max(np.abs(force.values))),
                "max_abs_second_time_derivative": float(
                    np.max(np.abs(force.second_time_derivative))
                ),
                "max_abs_divergence": float(np.max(np.abs(force.divergence))),
            },
        )
        if single.n_dim == 1:
            result.heatmaps["qfield"] = force.values
        return result

    def verify_bounds(self, scenario: Scenario) -> ExperimentResult:
        """Bound checks on the shipped suite or on the scenario's own (v, w, psi0)."""
        if scenario.suite:
            cases = bound_suite(scenario.seed, scenario.suite_count)
        else:
            cases = [
                BoundScenario(
                    scenario.name,
                    scenario.build_potential(),
                    scenario.build_perturbation(),
                    scenario.build_state(),
                    scenario.build_family(),
                )
            ]
        picard = self.config.picard()
        calibrations: dict[tuple[float, int], BoundConstants] = {}
        held_out: dict[tuple[float, int], float] = {}
        rows = []
        for case in cases:
            key = (case.v.time.horizon, case.v.time.steps)
            if key not in calibrations:
                extras = [c.psi0 for c in cases if (c.v.time.horizon, c.v.time.steps) == key]
                calibrations[key] = calibrate_constants(
                    case.fam,
                    case.v.grid,
                    case.v.time,
                    scenario.seed,
                    self.config.ensemble_size,
                    extra_states=extras,
                )
                held_out[key] = estimate_c0(
                    case.fam,
                    case.v.grid,
                    case.v.time,
                    StateEnsemble(case.v.grid, scenario.seed),
                    self.config.ensemble_size,
                ).value
            constants = calibrations[key]
            checks = {
                "free_stability": verify_free_stability(
                    case.psi0, case.fam, case.v.time, constants.c0, case.name
                ),
                "multiplication": verify_multiplication_bound(
                    case.v, free_trajectory(case.psi0, case.v.time), case.fam, scenario=case.name
                ),
                "strichartz": verify_strichartz_bound(
                    case.v, case.psi0, case.fam, constants, picard, case.name
                ),
                "frechet": verify_frechet_bound(
                    case.v, case.w, case.psi0, case.fam, constants, picard, scenario=case.name
                ),
                "difference": verify_difference_bound(
                    case.v, case.w, case.psi0, case.fam, constants, picard, case.name
                ),
            }
            if scenario.particles == 1 or scenario.suite:
                checks["density"] = verify_density_bound(
                    case.v, case.w, case.psi0, case.fam, constants, 1, picard, case.name
                )
            row = {
                "scenario": case.name,
                "horizon": case.v.time.horizon,
                "t_star": t_star(case.v.time.horizon, case.fam),
                "c0": constants.c0,
                "c_q": constants.c_q,
                "M": checks["frechet"].metadata.get("M"),
            }
            # c0 is calibrated with the cases' own psi0, so free_stability holds by
            # construction; c0_held_out comes from the seeded ensemble alone.
            row["c0_held_out"] = held_out[key]
            row["free_stability_held_out_satisfied"] = verify_free_stability(
                case.psi0, case.fam, case.v.time, held_out[key], case.name
            ).satisfied
            for name, report in checks.items():
                row[f"{name}_lhs"] = report.lhs
                row[f"{name}_rhs"] = report.rhs
                row[f"{name}_slack"] = report.slack
                row[f"{name}_satisfied"] = report.satisfied
            row["satisfied"] = all(report.satisfied for report in checks.values())
            rows.append(row)

        table = pd.DataFrame(rows)
        violations = int((~table["satisfied"]).sum())
        slack_columns = [c for c in table.columns if c.endswith("_slack")]
        held_out_failures = int((~table["free_stability_held_out_satisfied"]).sum())
        if held_out_failures:
            logger.warning(
                f"free_stability is self-calibrated; {held_out_failures} case(s) exceed the "
                "ensemble-only C0"
            )
        return ExperimentResult(
            "verify-bounds",
            table,
            summary={
                "cases": len(rows),
                "violations": violations,
                "min_slack": float(table[slack_columns].min().min()),
                "free_stability_self_calibrated": True,
                "free_stability_held_out_failures": held_out_failures,
            },
            constants={
                f"T={h:g},steps={n}": {"c0": c.c0, "c_q": c.c_q}
                for (h, n), c in sorted(calibrations.items())
            },
            violations=violations,
        )

    def convergence(self, scenario: Scenario) -> ExperimentResult:
        """Slope of the Gateaux residual against lambda."""
        v = scenario.build_potential()
        w = scenario.build_perturbation()
        psi0 = scenario.build_state()
        report = convergence_study(
            v,
            w,
            psi0,
            scenario.lambdas,
            self.config.picard(),
            method=scenario.method or "linearized",
            scheme=self._scheme(scenario),
        )
        table = report.table
        return ExperimentResult(
            "convergence",
            table,
            summary={
                "slope": report.slope,
                "intercept": report.intercept,
                "saturated": report.saturated,
                "points": len(table),
            },
            lines={
                "convergence": (
                    np.log10(np.abs(table["lambda"].to_numpy())),
                    {"log10_residual": np.log10(np.maximum(table["residual"].to_numpy(), 1e-300))},
                )
            },
        )

    def estimate_constants(self, scenario: Scenario) -> ExperimentResult:
        """C0 and CQ from seeded ensembles, and C_v for the scenario's potential."""
        grid = scenario.build_grid()
        time = scenario.build_time()
        fam = scenario.build_family()
        psi0 = scenario.build_state()
        count = self.config.ensemble_size
        states = StateEnsemble(grid, scenario.seed)
        c0 = estimate_c0(fam, grid, time, states, count, extra_states=[psi0])
        pairs = max(1, min(count, 4))
        cq = estimate_cq(
            fam, grid, time, PotentialEnsemble(grid, time, scenario.seed), states, pairs, pairs
        )
        estimates = [c0, cq]
        v = scenario.build_potential()
        summary = {"C0": c0.value, "CQ": cq.value}
        if not v.is_zero():
            partition = partition_interval(v, fam, time.horizon, cq.value)
            cv = compute_cv(partition.count, fam.theta, c0.value)
            estimates.append(
                ConstantEstimate("Cv", cv, c0.ensemble_size, f"partition M={partition.count}")
            )
            summary.update({"Cv": cv, "M": partition.count})
        table = pd.DataFrame(
            [
                {
                    "name": e.name,
                    "value": e.value,
                    "ensemble_size": e.ensemble_size,
                    "maximizing_witness": e.maximizing_witness,
                }
                for e in estimates
            ]
        )
        return ExperimentResult(
            "estimate-constants",
            table,
            summary=summary,
            constants={e.name: e.value for e in estimates},
        )
