"""Empirical constants, interval partitioning and bound verification.

Constants are ensemble maxima, so they are lower bounds on the analytic
constants and serve as calibration values. Bound checks compare a measured
left-hand side against a right-hand side built from upper bounds on every
norm; a violation means a genuine inconsistency.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np
import pandas as pd
from scipy.stats import linregress

from .config import PicardConfig, get_config
from .ensembles import PotentialEnsemble, StateEnsemble
from .exceptions import EstimateError, ValidationError
from .norms import (
    INF,
    ExponentFamily,
    ThresholdProfile,
    default_family,
    mixed_norm,
    multiplication_split,
    t_star,
    v_norm_upper,
    x_norm,
    xprime_norm_upper,
)
from .potentials import SampledPotential
from .propagation import q_v_apply, solve_mild, solve_strang
from .response import delta_density_series, delta_psi, gateaux_fd
from .spectral import Grid, StateVector, TimeGrid, Trajectory, free_trajectory
from .util import ValidationUtils, ordered_map

logger = logging.getLogger(__name__)

CONSTANT_NAMES = ("C0", "CQ", "Cv")
DIFFERENCE_LAMBDAS = (0.0, 0.5, 1.0)
DEFAULT_LAMBDAS = (1e-1, 1e-2, 1e-3, 1e-4)
# Relative allowance on right-hand sides that an ensemble witness attains exactly.
ROUNDOFF_ALLOWANCE = 1e-12


# ---------------------------------------------------------------------------
# Result types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantEstimate:
    """An empirical constant with the ensemble member that realised it."""

    name: str
    value: float
    ensemble_size: int
    maximizing_witness: str

    def __post_init__(self):
        """Constants are named, positive and finite."""
        if self.name not in CONSTANT_NAMES:
            raise EstimateError(f"unknown constant {self.name!r}")
        if not (math.isfinite(self.value) and self.value > 0):
            raise EstimateError(f"{self.name} estimate must be positive, got {self.value}")


@dataclass(frozen=True)
class BoundConstants:
    """Calibration constants used by the bound checks."""

    c0: float
    c_q: float = 1.0

    def __post_init__(self):
        """Both constants are positive."""
        for name, value in (("c0", self.c0), ("c_q", self.c_q)):
            if not (math.isfinite(value) and value > 0):
                raise EstimateError(f"{name} must be positive, got {value}")

    @classmethod
    def from_estimates(
        cls, c0: ConstantEstimate, c_q: ConstantEstimate | None = None
    ) -> "BoundConstants":
        """Build from ensemble estimates; C_Q defaults to 1 when not estimated."""
        return cls(c0.value, c_q.value if c_q is not None else 1.0)


@dataclass(frozen=True)
class BoundReport:
    """One inequality check lhs <= rhs."""

    lhs: float
    rhs: float
    satisfied: bool
    slack: float
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        """satisfied must agree with the comparison."""
        if self.satisfied != (self.lhs <= self.rhs):
            raise ValidationError("satisfied flag disagrees with lhs <= rhs", "satisfied")

    @classmethod
    def compare(cls, lhs: float, rhs: float, **metadata: Any) -> "BoundReport":
        """Evaluate lhs <= rhs and log the outcome."""
        report = cls(float(lhs), float(rhs), bool(lhs <= rhs), float(rhs - lhs), metadata)
        check = metadata.get("check", "bound")
        logger.info(f"{check}: lhs={lhs:.6e} rhs={rhs:.6e} slack={report.slack:.6e}")
        if not report.satisfied:
            logger.warning(f"{check} violated for {metadata.get('scenario', 'scenario')}")
        return report

    def as_row(self) -> dict[str, Any]:
        """Flat mapping for tabular output."""
        return {
            **self.metadata,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "satisfied": self.satisfied,
        }


class IntervalPartition(NamedTuple):
    """Equal partition of [0, T] found by partition_interval."""

    count: int
    subintervals: list[tuple[float, float]]
    index_bounds: list[tuple[int, int]]


@dataclass(frozen=True)
class ConvergenceReport:
    """Log-log fit of the Gateaux residual against lambda."""

    slope: float
    intercept: float
    table: pd.DataFrame
    saturated: bool


# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------


def _witness_max(values: Sequence[float], labels: Sequence[str]) -> tuple[float, str]:
    index = int(np.argmax(values))
    return float(values[index]), labels[index]


def estimate_c0(
    fam: ExponentFamily,
    grid: Grid,
    time: TimeGrid,
    ensemble: StateEnsemble,
    count: int,
    extra_states: Sequence[StateVector] = (),
    max_workers: int | None = None,
) -> ConstantEstimate:
    """max ||U0 psi0||_{q,theta} / ||psi0||_2 over the ensemble and any extra states."""
    if fam.n != grid.n_dim:
        raise EstimateError(f"family dimension {fam.n} does not match a {grid.n_dim}D grid")
    ValidationUtils.require_same_grid(ensemble.grid, grid, "ensemble")
    states = ensemble.members(max(count, 0)) + list(extra_states)
    labels = [ensemble.label(i) for i in range(max(count, 0))]
    labels += [f"extra#{i}" for i in range(len(extra_states))]
    if not states:
        raise EstimateError("cannot estimate C0 from an empty ensemble")

    def ratio(state: StateVector) -> float:
        norm = state.norm()
        if norm == 0:
            raise EstimateError("zero state in C0 ensemble")
        return mixed_norm(free_trajectory(state, time), fam.q, fam.theta) / norm

    workers = max_workers if max_workers is not None else get_config().max_workers
    ratios = list(ordered_map(ratio, states, workers))
    value, witness = _witness_max(ratios, labels)
    logger.info(f"C0 estimate {value:.6e} over {len(states)} states, witness {witness}")
    return ConstantEstimate("C0", value, len(states), witness)


def estimate_cq(
    fam: ExponentFamily,
    grid: Grid,
    time: TimeGrid,
    potentials: PotentialEnsemble,
    states: StateEnsemble,
    potential_count: int,
    state_count: int,
    max_workers: int | None = None,
) -> ConstantEstimate:
    """max ||Q_v phi||_X / (T* ||v||_V ||phi||_X) over potential/state pairs."""
    if potential_count < 1 or state_count < 1:
        raise EstimateError("cannot estimate CQ from an empty ensemble")
    ValidationUtils.require_same_grid(potentials.grid, grid, "potential ensemble")
    ValidationUtils.require_same_grid(states.grid, grid, "state ensemble")
    if potentials.time != time:
        raise EstimateError("potential ensemble uses a different time lattice")
    prefactor = t_star(time.horizon, fam)
    fields = potentials.members(potential_count)
    trajectories = [free_trajectory(state, time) for state in states.members(state_count)]
    pairs = [(i, k) for i in range(potential_count) for k in range(state_count)]

    def ratio(pair: tuple[int, int]) -> float:
        v = fields[pair[0]]
        phi = trajectories[pair[1]]
        v_norm = v_norm_upper(v, fam).value
        phi_norm = x_norm(phi, fam)
        if v_norm == 0 or phi_norm == 0:
            raise EstimateError(f"zero-norm input in CQ pair {pair}")
        return x_norm(q_v_apply(v, phi), fam) / (prefactor * v_norm * phi_norm)

    workers = max_workers if max_workers is not None else get_config().max_workers
    ratios = list(ordered_map(ratio, pairs, workers))
    labels = [f"{potentials.label(i)}|{states.label(k)}" for i, k in pairs]
    value, witness = _witness_max(ratios, labels)
    logger.info(f"CQ estimate {value:.6e} over {len(pairs)} pairs, witness {witness}")
    return ConstantEstimate("CQ", value, len(pairs), witness)


def calibrate_constants(
    fam: ExponentFamily,
    grid: Grid,
    time: TimeGrid,
    seed: int = 0,
    state_count: int | None = None,
    potential_count: int = 4,
    extra_states: Sequence[StateVector] = (),
) -> BoundConstants:
    """C0 and CQ from the default seeded ensembles on one lattice."""
    count = get_config().ensemble_size if state_count is None else state_count
    states = StateEnsemble(grid, seed)
    c0 = estimate_c0(fam, grid, time, states, count, extra_states)
    cq = estimate_cq(
        fam,
        grid,
        time,
        PotentialEnsemble(grid, time, seed),
        states,
        potential_count,
        min(count, potential_count),
    )
    return BoundConstants.from_estimates(c0, cq)


# ---------------------------------------------------------------------------
# Interval partition
# ---------------------------------------------------------------------------


def partition_interval(
    v: SampledPotential,
    fam: ExponentFamily,
    T: float,
    c_q: float,
    thresholds: Any = None,
) -> IntervalPartition:
    """Smallest M such that c_q |I_m|* ||v||_{V|I_m} <= 1/2 on every window of the M-partition.

    Windows follow TimeGrid.partition, so they are equal up to one sample.
    """
    constant = ValidationUtils.require_finite_scalar(c_q, "c_q")
    if constant <= 0:
        raise ValidationError(f"c_q must be positive, got {c_q}", "c_q", c_q)
    horizon = ValidationUtils.require_finite_scalar(T, "T")
    if abs(horizon - v.time.horizon) > 1e-9 * max(1.0, v.time.horizon):
        raise ValidationError(
            f"T={T} differs from the potential's horizon {v.time.horizon}", "T", T
        )
    time = v.time
    profile = ThresholdProfile.build(v, fam, thresholds)

    def window_ok(start: int, stop: int) -> bool:
        length = (stop - start) * time.dt
        norm = profile.restricted_norm(start, stop).value
        return constant * t_star(length, fam) * norm <= 0.5

    for count in range(1, time.steps + 1):
        bounds = time.partition(count)
        if all(window_ok(start, stop) for start, stop in bounds):
            break
    else:
        logger.warning(f"Contraction condition fails even on single steps; using {time.steps}")
        bounds = time.partition(time.steps)
        count = time.steps

    samples = time.samples
    logger.debug(f"Interval partition: M={count} for T={horizon}, c_q={constant}")
    return IntervalPartition(
        count,
        [(float(samples[a]), float(samples[b])) for a, b in bounds],
        list(bounds),
    )


def compute_cv(M: int, theta: float, c0: float) -> float:
    """C_v = 2 M^(1/theta) (1 + C0)."""
    if M < 1:
        raise ValidationError(f"M must be at least 1, got {M}", "M", M)
    if not theta > 2:
        raise ValidationError(f"theta must exceed 2, got {theta}", "theta", theta)
    if not c0 > 0:
        raise ValidationError(f"c0 must be positive, got {c0}", "c0", c0)
    exponent = 0.0 if math.isinf(theta) else 1.0 / theta
    return 2.0 * M**exponent * (1.0 + c0)


def _cv(v: SampledPotential, fam: ExponentFamily, constants: BoundConstants) -> tuple[int, float]:
    count = partition_interval(v, fam, v.time.horizon, constants.c_q).count
    return count, compute_cv(count, fam.theta, constants.c0)


def _require_constants(constants: BoundConstants | None) -> BoundConstants:
    if constants is None:
        raise EstimateError("bound check needs calibration constants")
    return constants


# ---------------------------------------------------------------------------
# Bound checks
# ---------------------------------------------------------------------------


def verify_free_stability(
    psi0: StateVector, fam: ExponentFamily, time: TimeGrid, c0: float, scenario: str = ""
) -> BoundReport:
    """||U0 psi0||_X <= (1 + C0) ||psi0||_2 up to ROUNDOFF_ALLOWANCE."""
    lhs = x_norm(free_trajectory(psi0, time), fam)
    rhs = (1.0 + c0) * psi0.norm() * (1.0 + ROUNDOFF_ALLOWANCE)
    return BoundReport.compare(lhs, rhs, check="free_stability", scenario=scenario, c0=c0)


def verify_multiplication_bound(
    v: SampledPotential,
    phi: Trajectory,
    fam: ExponentFamily,
    thresholds: Any = None,
    scenario: str = "",
) -> BoundReport:
    """||v phi||_X' <= T* ||v||_V ||phi||_X using one shared threshold splitting."""
    bounded, large, report = multiplication_split(v, phi, fam, thresholds)
    product = bounded + large
    lhs = xprime_norm_upper(product, fam, first=bounded).value
    rhs = t_star(v.time.horizon, fam) * report.value * x_norm(phi, fam)
    return BoundReport.compare(
        lhs,
        rhs,
        check="multiplication",
        scenario=scenario,
        threshold=report.decomposition_meta.get("threshold"),
    )


def verify_strichartz_bound(
    v: SampledPotential,
    psi0: StateVector,
    fam: ExponentFamily,
    constants: BoundConstants | None,
    cfg: PicardConfig | None = None,
    scenario: str = "",
) -> BoundReport:
    """||psi[v]||_{q,theta} <= C_v ||psi0||_2."""
    constants = _require_constants(constants)
    solution = solve_mild(v, psi0, cfg, fam, constants.c_q)
    count, cv = _cv(v, fam, constants)
    lhs = mixed_norm(solution, fam.q, fam.theta)
    return BoundReport.compare(
        lhs, cv * psi0.norm(), check="strichartz", scenario=scenario, M=count, Cv=cv
    )


def verify_frechet_bound(
    v: SampledPotential,
    w: SampledPotential,
    psi0: StateVector,
    fam: ExponentFamily,
    constants: BoundConstants | None,
    cfg: PicardConfig | None = None,
    method: str = "duhamel",
    scenario: str = "",
) -> BoundReport:
    """||delta psi[v; w]||_{2,inf} <= (1 + C_v)^2 T* ||w||_V ||psi0||_2."""
    constants = _require_constants(constants)
    variation = delta_psi(v, w, psi0, cfg, method=method)
    count, cv = _cv(v, fam, constants)
    w_norm = v_norm_upper(w, fam).value
    lhs = mixed_norm(variation, 2, INF)
    rhs = (1.0 + cv) ** 2 * t_star(v.time.horizon, fam) * w_norm * psi0.norm()
    return BoundReport.compare(
        lhs, rhs, check="frechet", scenario=scenario, M=count, Cv=cv, w_norm=w_norm
    )


def verify_difference_bound(
    v: SampledPotential,
    w: SampledPotential,
    psi0: StateVector,
    fam: ExponentFamily,
    constants: BoundConstants | None,
    cfg: PicardConfig | None = None,
    scenario: str = "",
) -> BoundReport:
    """||psi[v + w] - psi[v]||_{2,inf} <= C T* ||w||_V ||psi0||_2, C = max (1 + C_{v + lam w})^2.

    The supremum over lam in [0, 1] is sampled at DIFFERENCE_LAMBDAS.
    """
    constants = _require_constants(constants)
    difference = solve_mild(v + w, psi0, cfg) - solve_mild(v, psi0, cfg)
    counts = []
    factor = 0.0
    for lam in DIFFERENCE_LAMBDAS:
        count, cv = _cv(v + w.scaled(lam), fam, constants)
        counts.append(count)
        factor = max(factor, (1.0 + cv) ** 2)
    logger.info(f"Difference bound samples lambda at {DIFFERENCE_LAMBDAS}: M={counts}")
    w_norm = v_norm_upper(w, fam).value
    lhs = mixed_norm(difference, 2, INF)
    rhs = factor * t_star(v.time.horizon, fam) * w_norm * psi0.norm()
    return BoundReport.compare(
        lhs, rhs, check="difference", scenario=scenario, M=max(counts), C=factor
    )


def verify_density_bound(
    v: SampledPotential,
    w: SampledPotential,
    psi0: StateVector,
    fam: ExponentFamily,
    constants: BoundConstants | None,
    particles: int = 1,
    cfg: PicardConfig | None = None,
    scenario: str = "",
) -> BoundReport:
    """sup_t ||delta n(t)||_1 <= 2N (1 + C_v)^2 T* ||w||_V ||psi0||_2^2.

    For two particles w is the lifted perturbation on the configuration grid.
    """
    constants = _require_constants(constants)
    variation = delta_density_series(v, w, psi0, particles, cfg)
    cell = v.grid.cell_volume if particles == 1 else v.grid.spacing
    lhs = float(np.max(np.sum(np.abs(variation), axis=tuple(range(1, variation.ndim))) * cell))
    count, cv = _cv(v, fam, constants)
    w_norm = v_norm_upper(w, fam).value
    rhs = (
        2.0 * particles * (1.0 + cv) ** 2 * t_star(v.time.horizon, fam) * w_norm
        * psi0.norm() ** 2
    )
    return BoundReport.compare(
        lhs, rhs, check="density", scenario=scenario, M=count, Cv=cv, particles=particles
    )


# ---------------------------------------------------------------------------
# Convergence of the difference quotient
# ---------------------------------------------------------------------------


def convergence_study(
    v: SampledPotential,
    w: SampledPotential,
    psi0: StateVector,
    lambdas: Sequence[float] = DEFAULT_LAMBDAS,
    cfg: PicardConfig | None = None,
    method: str = "linearized",
    scheme: str = "mild",
) -> ConvergenceReport:
    """Fit log ||gateaux_fd(lam) - delta_psi||_{2,inf} against log lam.

    Points whose residual sits within ten solver tolerances (scaled by
    ||psi0|| / lam) of zero are marked saturated and left out of the fit;
    with fewer than two usable points the whole study is saturated.
    """
    steps = np.array([ValidationUtils.require_finite_scalar(lam, "lambda") for lam in lambdas])
    if steps.size < 2 or np.any(steps == 0):
        raise ValidationError("convergence study needs at least two nonzero lambdas", "lambdas")
    magnitudes = np.abs(steps)
    if math.log10(magnitudes.max() / magnitudes.min()) < 3 - 1e-9:
        raise ValidationError("lambdas must span at least three decades", "lambdas")

    picard = cfg or get_config().picard()
    delta = delta_psi(v, w, psi0, picard, method=method, scheme=scheme)
    base = solve_mild(v, psi0, picard) if scheme == "mild" else solve_strang(v, psi0)
    scale = mixed_norm(delta, 2, INF)
    floor_tolerance = picard.tolerance if scheme == "mild" else 1e-14

    residuals = []
    for lam in steps:
        quotient = gateaux_fd(v, w, psi0, float(lam), picard, scheme, base)
        residuals.append(mixed_norm(quotient - delta, 2, INF))
    residual = np.array(residuals)
    floor = 10.0 * floor_tolerance * psi0.norm() / magnitudes
    saturated_rows = residual <= floor

    table = pd.DataFrame(
        {
            "lambda": steps,
            "residual": residual,
            "relative_residual": residual / scale if scale > 0 else np.full_like(residual, np.nan),
            "saturated": saturated_rows,
        }
    )
    usable = ~saturated_rows
    if usable.sum() < 2:
        logger.info("Convergence study saturated: residuals at the floating-point floor")
        return ConvergenceReport(math.nan, math.nan, table, True)
    fit = linregress(np.log10(magnitudes[usable]), np.log10(residual[usable]))
    logger.info(f"Convergence slope {fit.slope:.4f} over {int(usable.sum())} points")
    return ConvergenceReport(float(fit.slope), float(fit.intercept), table, False)


# ---------------------------------------------------------------------------
# Shipped suite
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundScenario:
    """One (v, w, psi0) case of the bound suite."""

    name: str
    v: SampledPotential
    w: SampledPotential
    psi0: StateVector
    fam: ExponentFamily


SUITE_HORIZONS = (0.25, 0.5, 1.0)


def bound_suite(seed: int = 0, count: int = 20, grid: Grid | None = None) -> list[BoundScenario]:
    """Bounded smooth (v, w) pairs on a 1D grid with horizons cycling through 0.25, 0.5, 1."""
    if count < 1:
        raise EstimateError("bound suite needs at least one scenario")
    lattice = grid or Grid(1, 128, 20.0)
    fam = default_family(lattice.n_dim)
    states = StateEnsemble(lattice, seed, kinds=("gaussian",))
    scenarios = []
    for index in range(count):
        horizon = SUITE_HORIZONS[index % len(SUITE_HORIZONS)]
        time = TimeGrid(horizon, int(round(80 * horizon)))
        potentials = PotentialEnsemble(lattice, time, seed, amplitude=1.0)
        perturbations = PotentialEnsemble(lattice, time, seed + 1, amplitude=0.5)
        scenarios.append(
            BoundScenario(
                f"suite-{index:02d}-T{horizon:g}",
                potentials.member(index),
                perturbations.member(index),
                states.member(index),
                fam,
            )
        )
    return scenarios
