"""Linear response of the mild solution: delta psi, Kubo formula, densities and kernels.

Every interaction-picture object acts through evolutions applied to states;
the only matrix ever formed is the response kernel itself. Time integrals
over s in [0, t] use the composite trapezoid rule on the sample lattice.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy import fft as sp_fft

from .config import PicardConfig, get_config
from .exceptions import GridMismatchError, SizeGuardError, ValidationError
from .potentials import SampledPotential
from .propagation import (
    EvolutionSystem,
    solve_linearized,
    solve_mild,
    solve_strang,
    solve_strang_linearized,
)
from .spectral import Grid, StateVector, Trajectory
from .util import ValidationUtils, ordered_map

logger = logging.getLogger(__name__)

DELTA_METHODS = ("duhamel", "linearized")
OBSERVABLE_KINDS = ("multiplication", "projector", "matrix")
DERIVATIVES = ("central", "spectral")


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ObservableOperator:
    """Bounded self-adjoint operator on grid functions.

    ``payload`` is a real field for multiplication, a normalized state for a
    projector and a (size x size) Hermitian matrix for an explicit operator.
    """

    kind: str
    payload: np.ndarray
    grid: Grid

    def __post_init__(self):
        """Validate self-adjointness and boundedness."""
        if self.kind not in OBSERVABLE_KINDS:
            raise ValidationError(
                f"observable kind must be one of {OBSERVABLE_KINDS}, got {self.kind!r}", "kind"
            )
        payload = np.asarray(self.payload)
        if self.kind == "multiplication":
            payload = ValidationUtils.require_real_array(payload, "observable field")
            if payload.shape != self.grid.shape:
                raise GridMismatchError(
                    f"observable field of shape {payload.shape} does not match {self.grid.shape}",
                    "observable",
                )
        elif self.kind == "projector":
            payload = np.asarray(payload, dtype=np.complex128)
            if payload.shape != self.grid.shape:
                raise GridMismatchError("projector state does not match the grid", "observable")
            norm = float(np.sqrt(np.sum(np.abs(payload) ** 2) * self.grid.cell_volume))
            if abs(norm - 1.0) > 1e-10:
                raise ValidationError(
                    f"projector needs a normalized state, got norm {norm:.12g}", "observable"
                )
        else:
            payload = np.asarray(payload, dtype=np.complex128)
            size = self.grid.size
            if payload.shape != (size, size):
                raise GridMismatchError(
                    f"observable matrix must be {size}x{size}, got {payload.shape}", "observable"
                )
            scale = max(1.0, float(np.max(np.abs(payload)))) if payload.size else 1.0
            defect = float(np.max(np.abs(payload - payload.conj().T)))
            if defect > 1e-12 * scale:
                raise ValidationError(
                    f"observable matrix is not Hermitian (defect {defect:.3e})", "observable"
                )
        ValidationUtils.require_finite_array(payload, "observable")
        payload = np.array(payload)
        payload.setflags(write=False)
        object.__setattr__(self, "payload", payload)

    @classmethod
    def multiplication(cls, field: np.ndarray, grid: Grid) -> "ObservableOperator":
        """Multiplication by a bounded real field."""
        return cls("multiplication", np.asarray(field), grid)

    @classmethod
    def identity(cls, grid: Grid) -> "ObservableOperator":
        """The identity, as multiplication by one."""
        return cls("multiplication", np.ones(grid.shape), grid)

    @classmethod
    def projector(cls, state: StateVector) -> "ObservableOperator":
        """Rank-one projector |phi><phi| onto a normalized state."""
        return cls("projector", state.amplitudes, state.grid)

    @classmethod
    def matrix(cls, matrix: np.ndarray, grid: Grid) -> "ObservableOperator":
        """Explicit Hermitian matrix acting on the flattened grid."""
        return cls("matrix", np.asarray(matrix), grid)

    def apply_array(self, values: np.ndarray) -> np.ndarray:
        """Apply A to every state held in the trailing grid axes of values."""
        if self.kind == "multiplication":
            return self.payload * values
        if self.kind == "projector":
            overlap = np.sum(np.conj(self.payload) * values, axis=self.grid.axes)
            overlap = overlap * self.grid.cell_volume
            return overlap.reshape(overlap.shape + (1,) * self.grid.n_dim) * self.payload
        batch = values.shape[: values.ndim - self.grid.n_dim]
        flat = values.reshape(-1, self.grid.size)
        return (flat @ self.payload.T).reshape(batch + self.grid.shape)

    def apply(self, state: StateVector) -> StateVector:
        """A psi."""
        ValidationUtils.require_same_grid(self.grid, state.grid, "observable and state")
        return StateVector(self.apply_array(state.amplitudes), state.grid)

    def expectation(self, state: StateVector) -> float:
        """<psi, A psi>, real for self-adjoint A."""
        return float(expectation_values(self, state.amplitudes[np.newaxis])[0])


def expectation_values(A: ObservableOperator, states: np.ndarray) -> np.ndarray:
    """Re <psi_j, A psi_j> for a stack of states."""
    products = np.sum(np.conj(states) * A.apply_array(states), axis=A.grid.axes)
    return np.real(products) * A.grid.cell_volume


def expectation(A: ObservableOperator, traj: Trajectory) -> np.ndarray:
    """<A>(t_j) along a trajectory."""
    ValidationUtils.require_same_grid(A.grid, traj.grid, "observable and trajectory")
    return expectation_values(A, traj.states)


# ---------------------------------------------------------------------------
# Frechet derivative of the solution map
# ---------------------------------------------------------------------------


def _check_pair(v: SampledPotential, w: SampledPotential, psi0: StateVector) -> None:
    ValidationUtils.require_same_grid(v.grid, w.grid, "potential and perturbation")
    ValidationUtils.require_same_grid(v.grid, psi0.grid, "potential and initial state")
    if v.time != w.time:
        raise GridMismatchError("potential and perturbation use different time lattices", "time")


def duhamel_weights(steps: int, start: int, dt: float) -> np.ndarray:
    """Trapezoid weights of the sample s_start in int_0^{t_j} ds, for j = start..steps."""
    weights = np.full(steps - start + 1, dt if start > 0 else 0.5 * dt)
    weights[0] = 0.0 if start == 0 else 0.5 * dt
    return weights


def _solve(
    v: SampledPotential, psi0: StateVector, scheme: str, cfg: PicardConfig | None
) -> Trajectory:
    if scheme == "mild":
        return solve_mild(v, psi0, cfg)
    if scheme == "strang":
        return solve_strang(v, psi0)
    raise ValidationError(f"unknown scheme {scheme!r}", "scheme")


def _duhamel_sum(
    system: EvolutionSystem,
    sources: np.ndarray,
    consume: Callable[[int, np.ndarray, np.ndarray], None],
    max_workers: int,
) -> None:
    """Evolve every source s_l forward from t_l and hand (l, weights, evolved) to consume."""
    time = system.time
    active = [index for index in range(time.sample_count) if np.any(sources[index])]

    def evolve(index: int) -> np.ndarray:
        return system.trajectory_from(index, sources[index])

    for index, evolved in zip(active, ordered_map(evolve, active, max_workers), strict=True):
        consume(index, duhamel_weights(time.steps, index, time.dt), evolved)


def _variation(
    v: SampledPotential,
    w: SampledPotential,
    psi0: StateVector,
    cfg: PicardConfig | None,
    method: str,
    scheme: str,
    max_workers: int | None,
) -> tuple[Trajectory, Trajectory]:
    """(psi[v], delta psi[v; w]) by the requested route."""
    _check_pair(v, w, psi0)
    if method not in DELTA_METHODS:
        raise ValidationError(f"method must be one of {DELTA_METHODS}, got {method!r}", "method")
    picard = cfg or get_config().picard()

    if method == "linearized":
        if scheme == "mild":
            base = solve_mild(v, psi0, picard)
            return base, solve_linearized(v, w, base, picard)
        if scheme == "strang":
            return solve_strang_linearized(v, w, psi0)
        raise ValidationError(f"unknown scheme {scheme!r}", "scheme")

    system = EvolutionSystem(v, scheme, picard)
    base = system.base_trajectory(psi0)
    delta = np.zeros_like(base.states)

    def accumulate(index: int, weights: np.ndarray, evolved: np.ndarray) -> None:
        delta[index:] += weights.reshape((-1,) + (1,) * v.grid.n_dim) * evolved

    workers = max_workers if max_workers is not None else get_config().max_workers
    _duhamel_sum(system, w.values * base.states, accumulate, workers)
    delta *= -1j
    return base, Trajectory(delta, v.grid, v.time, {"method": method, "scheme": scheme})


def delta_psi(
    v: SampledPotential,
    w: SampledPotential,
    psi0: StateVector,
    cfg: PicardConfig | None = None,
    method: str = "duhamel",
    scheme: str = "mild",
    max_workers: int | None = None,
) -> Trajectory:
    """delta psi(t) = -i int_0^t U([v], t, s) w(s) psi([v], s) ds.

    ``method="duhamel"`` evaluates the integral literally with one restarted
    evolution per sample s. ``method="linearized"`` solves the derivative of
    the discrete scheme directly, which is the exact Gateaux limit of the
    chosen solver.
    """
    return _variation(v, w, psi0, cfg, method, scheme, max_workers)[1]


def delta_evolution(
    v: SampledPotential,
    w: SampledPotential,
    t: float,
    s: float,
    psi: StateVector,
    cfg: PicardConfig | None = None,
    scheme: str = "mild",
) -> StateVector:
    """delta U(t, s) psi = -i int_s^t U(t, r) w(r) U(r, s) psi dr."""
    start = v.time.index_of(s)
    stop = v.time.index_of(t)
    if start > stop:
        raise ValidationError(f"variation needs s <= t, got s={s}, t={t}", "s", s)
    _check_pair(v, w, psi)
    if start == stop:
        return StateVector(np.zeros(psi.grid.shape, dtype=np.complex128), psi.grid)
    variation = delta_psi(
        v.window(start, stop), w.window(start, stop), psi, cfg, scheme=scheme
    )
    return variation.final()


def gateaux_fd(
    v: SampledPotential,
    w: SampledPotential,
    psi0: StateVector,
    lam: float,
    cfg: PicardConfig | None = None,
    scheme: str = "mild",
    base: Trajectory | None = None,
) -> Trajectory:
    """(psi[v + lam w] - psi[v]) / lam from two full solves."""
    step = ValidationUtils.require_finite_scalar(lam, "lambda")
    if step == 0.0:
        raise ValidationError("lambda must be nonzero", "lambda", lam)
    _check_pair(v, w, psi0)
    reference = base if base is not None else _solve(v, psi0, scheme, cfg)
    perturbed = _solve(v + w.scaled(step), psi0, scheme, cfg)
    return (perturbed - reference) * (1.0 / step)


# ---------------------------------------------------------------------------
# Kubo formula
# ---------------------------------------------------------------------------


def kubo_response_series(
    A: ObservableOperator,
    v: SampledPotential,
    w: SampledPotential,
    psi0: StateVector,
    cfg: PicardConfig | None = None,
    scheme: str = "strang",
    max_workers: int | None = None,
) -> np.ndarray:
    """delta <A>(t_j) = i int_0^{t_j} <[w^(s), A^(t_j)]>_0 ds for every sample.

    The commutator expectation is evaluated as <U(t,s) w psi(s), A psi(t)>
    minus <psi(t), A U(t,s) w psi(s)>.
    """
    _check_pair(v, w, psi0)
    ValidationUtils.require_same_grid(A.grid, v.grid, "observable and potential")
    system = EvolutionSystem(v, scheme, cfg)
    base = system.base_trajectory(psi0).states
    observed = A.apply_array(base)
    accumulated = np.zeros(v.time.sample_count, dtype=np.complex128)
    axes = v.grid.axes
    volume = v.grid.cell_volume

    def accumulate(index: int, weights: np.ndarray, evolved: np.ndarray) -> None:
        first = np.sum(np.conj(evolved) * observed[index:], axis=axes) * volume
        second = np.sum(np.conj(base[index:]) * A.apply_array(evolved), axis=axes) * volume
        accumulated[index:] += weights * 1j * (first - second)

    workers = max_workers if max_workers is not None else get_config().max_workers
    _duhamel_sum(system, w.values * base, accumulate, workers)

    residue = float(np.max(np.abs(accumulated.imag)))
    scale = max(1.0, float(np.max(np.abs(accumulated.real))))
    if residue > 1e-10 * scale:
        raise ValidationError(
            f"Kubo response has imaginary residue {residue:.3e}; observable not self-adjoint?",
            "observable",
        )
    return accumulated.real.copy()


def kubo_delta_expectation(
    A: ObservableOperator,
    v: SampledPotential,
    w: SampledPotential,
    psi0: StateVector,
    t: float,
    cfg: PicardConfig | None = None,
    scheme: str = "strang",
) -> float:
    """First-order change of <A>(t) under v -> v + w."""
    index = v.time.index_of(t)
    if index == 0:
        return 0.0
    series = kubo_response_series(
        A, v.window(0, index), w.window(0, index), psi0, cfg, scheme
    )
    return float(series[-1])


def expectation_fd(
    A: ObservableOperator,
    v: SampledPotential,
    w: SampledPotential,
    psi0: StateVector,
    lam: float,
    t: float,
    cfg: PicardConfig | None = None,
    scheme: str = "strang",
) -> float:
    """(<A>_{v + lam w}(t) - <A>_v(t)) / lam from two full solves."""
    step = ValidationUtils.require_finite_scalar(lam, "lambda")
    if step == 0.0:
        raise ValidationError("lambda must be nonzero", "lambda", lam)
    index = v.time.index_of(t)
    _check_pair(v, w, psi0)
    if index == 0:
        return 0.0
    v_cut = v.window(0, index)
    reference = _solve(v_cut, psi0, scheme, cfg).final()
    perturbed = _solve(v_cut + w.window(0, index).scaled(step), psi0, scheme, cfg).final()
    return (A.expectation(perturbed) - A.expectation(reference)) / step


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityField:
    """One-particle density n(x) on the single-particle grid."""

    values: np.ndarray
    particle_count: int
    grid: Grid

    def __post_init__(self):
        """Densities are finite and nonnegative up to roundoff."""
        values = ValidationUtils.require_real_array(self.values, "density")
        ValidationUtils.require_finite_array(values, "density")
        if values.shape != self.grid.shape:
            raise GridMismatchError("density does not match its grid", "density")
        minimum = float(values.min())
        if minimum < -1e-12:
            raise ValidationError(f"density is negative ({minimum:.3e})", "density", minimum)
        values = np.array(values)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def total(self) -> float:
        """Integral of n over the grid."""
        return float(np.sum(self.values) * self.grid.cell_volume)


def density_grid(grid: Grid, particles: int) -> Grid:
    """Grid of the one-particle density for a configuration grid."""
    if particles == 1:
        return grid
    if particles == 2 and grid.n_dim == 2:
        return grid.single_particle()
    raise ValidationError(
        f"{particles} particles are not supported on a {grid.n_dim}D configuration grid",
        "particles",
        particles,
    )


def _marginal(values: np.ndarray, grid: Grid, particles: int) -> np.ndarray:
    """N * int |.|^2 over all but one coordinate, values already squared or bilinear."""
    if particles == 1:
        return values
    return particles * np.sum(values, axis=-1) * grid.spacing


def _check_exchange(state: StateVector) -> None:
    amplitudes = state.amplitudes
    scale = max(float(np.max(np.abs(amplitudes))), 1e-300)
    for sign in (1, -1):
        if np.max(np.abs(amplitudes - sign * amplitudes.T)) <= 1e-8 * scale:
            return
    raise ValidationError("two-particle state is neither symmetric nor antisymmetric", "psi")


def density(psi: StateVector, particles: int = 1) -> DensityField:
    """n(x) = N int |psi(x, x2, ...)|^2 dx2 ..."""
    single = density_grid(psi.grid, particles)
    if particles == 2:
        _check_exchange(psi)
    values = _marginal(np.abs(psi.amplitudes) ** 2, psi.grid, particles)
    return DensityField(values, particles, single)


def density_series(traj: Trajectory, particles: int = 1) -> np.ndarray:
    """n(t_j, x) for every sample, shaped (samples, *single-particle grid)."""
    density_grid(traj.grid, particles)
    return _marginal(np.abs(traj.states) ** 2, traj.grid, particles)


def _delta_density_values(
    base: np.ndarray, delta: np.ndarray, grid: Grid, particles: int
) -> np.ndarray:
    return 2.0 * _marginal(np.real(np.conj(base) * delta), grid, particles)


def delta_density_series(
    v: SampledPotential,
    w: SampledPotential,
    psi0: StateVector,
    particles: int = 1,
    cfg: PicardConfig | None = None,
    method: str = "duhamel",
    scheme: str = "strang",
) -> np.ndarray:
    """delta n(t_j, x) = N int conj(psi) delta psi dx2 + c.c. for every sample."""
    density_grid(v.grid, particles)
    base, delta = _variation(v, w, psi0, cfg, method, scheme, None)
    return _delta_density_values(base.states, delta.states, v.grid, particles)


def delta_density(
    v: SampledPotential,
    w: SampledPotential,
    psi0: StateVector,
    t: float,
    particles: int = 1,
    cfg: PicardConfig | None = None,
    method: str = "duhamel",
    scheme: str = "strang",
) -> np.ndarray:
    """delta n(t, x) on the single-particle grid."""
    single = density_grid(v.grid, particles)
    index = v.time.index_of(t)
    if index == 0:
        return np.zeros(single.shape)
    series = delta_density_series(
        v.window(0, index), w.window(0, index), psi0, particles, cfg, method, scheme
    )
    return series[-1]


# ---------------------------------------------------------------------------
# Response kernel
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ResponseKernel:
    """chi(t, x, s, y) on the single-particle grid, flattened to matrix[x, y]."""

    t: float
    s: float
    matrix: np.ndarray
    grid: Grid

    def __post_init__(self):
        """Kernels are finite, square and causal."""
        if self.s > self.t:
            raise ValidationError(f"kernel needs s <= t, got s={self.s}, t={self.t}", "s")
        size = self.grid.size
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if matrix.shape != (size, size):
            raise GridMismatchError(f"kernel must be {size}x{size}, got {matrix.shape}", "kernel")
        ValidationUtils.require_finite_array(matrix, "kernel")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    def contract(self, field: np.ndarray) -> np.ndarray:
        """sum_y chi(x, y) f(y) dy on the single-particle grid."""
        flat = np.asarray(field, dtype=np.float64).reshape(-1)
        return (self.matrix @ flat * self.grid.cell_volume).reshape(self.grid.shape)


def _guard_kernel_size(grid: Grid, particles: int) -> None:
    config = get_config()
    limit = config.kernel_max_points if particles == 1 else config.kernel_max_pair_points
    if grid.size > limit:
        raise SizeGuardError(
            f"response kernel on {grid.size} grid points exceeds the limit of {limit}",
            grid.size,
            limit,
        )


def _site_kicks(state: np.ndarray, grid: Grid, particles: int) -> np.ndarray:
    """For every site y, the state multiplied by the indicator of y (lifted for pairs)."""
    if particles == 1:
        size = grid.size
        kicks = np.zeros((size, size), dtype=np.complex128)
        kicks[np.arange(size), np.arange(size)] = state.reshape(-1)
        return kicks.reshape((size,) + grid.shape)
    points = grid.points_per_dim
    kicks = np.zeros((points, points, points), dtype=np.complex128)
    sites = np.arange(points)
    kicks[sites, sites, :] += state
    kicks[sites, :, sites] += state.T
    return kicks


def _kernel_matrix(
    final: np.ndarray,
    evolved: np.ndarray,
    grid: Grid,
    single: Grid,
    particles: int,
) -> np.ndarray:
    """chi[x, y] from psi(t) and the evolved kicks U(t, s)(e_y psi(s))."""
    bilinear = np.real(-1j * np.conj(final)[np.newaxis] * evolved)
    columns = 2.0 * _marginal(bilinear, grid, particles) / single.cell_volume
    return columns.reshape(single.size, single.size).T


def response_kernel_series(
    v: SampledPotential,
    psi0: StateVector,
    t: float,
    particles: int = 1,
    cfg: PicardConfig | None = None,
    scheme: str = "strang",
) -> list[ResponseKernel]:
    """chi(t, ., s_l, .) for every sample s_l <= t."""
    single = density_grid(v.grid, particles)
    _guard_kernel_size(v.grid, particles)
    ValidationUtils.require_same_grid(v.grid, psi0.grid, "potential and initial state")
    index = v.time.index_of(t)
    if index == 0:
        return [ResponseKernel(0.0, 0.0, np.zeros((single.size, single.size)), single)]
    system = EvolutionSystem(v.window(0, index), scheme, cfg)
    base = system.base_trajectory(psi0).states
    times = v.time.samples

    def column_block(start: int) -> np.ndarray:
        kicks = _site_kicks(base[start], v.grid, particles)
        return system.trajectory_from(start, kicks)[-1]

    kernels = []
    workers = get_config().max_workers
    for start, evolved in enumerate(ordered_map(column_block, range(index + 1), workers)):
        matrix = _kernel_matrix(base[-1], evolved, v.grid, single, particles)
        kernels.append(ResponseKernel(float(times[index]), float(times[start]), matrix, single))
    logger.debug(f"Built {len(kernels)} response kernels of size {single.size} at t={t}")
    return kernels


def response_kernel(
    v: SampledPotential,
    psi0: StateVector,
    t: float,
    s: float,
    particles: int = 1,
    cfg: PicardConfig | None = None,
    scheme: str = "strang",
) -> ResponseKernel:
    """chi([v], t, x, s, y): density response at (t, x) to a one-body kick at (s, y)."""
    index = v.time.index_of(t)
    start = v.time.index_of(s)
    if start > index:
        raise ValidationError(f"kernel needs s <= t, got s={s}, t={t}", "s", s)
    single = density_grid(v.grid, particles)
    _guard_kernel_size(v.grid, particles)
    if index == 0:
        return ResponseKernel(0.0, 0.0, np.zeros((single.size, single.size)), single)
    system = EvolutionSystem(v.window(0, index), scheme, cfg)
    base = system.base_trajectory(psi0).states
    kicks = _site_kicks(base[start], v.grid, particles)
    evolved = system.trajectory_from(start, kicks)[-1]
    matrix = _kernel_matrix(base[-1], evolved, v.grid, single, particles)
    times = v.time.samples
    return ResponseKernel(float(times[index]), float(times[start]), matrix, single)


def kernel_contract(
    kernels: list[ResponseKernel], w: SampledPotential, t: float
) -> np.ndarray:
    """delta n(t, x) = sum_s sum_y chi(t, x, s, y) w(s, y) dy ds over s <= t.

    ``kernels`` must hold chi(t, ., s_l, .) for l = 0..j, as returned by
    response_kernel_series; w lives on the single-particle grid.
    """
    index = w.time.index_of(t)
    if len(kernels) != index + 1:
        raise ValidationError(
            f"need {index + 1} kernels for t={t}, got {len(kernels)}", "kernels", len(kernels)
        )
    single = kernels[0].grid
    ValidationUtils.require_same_grid(single, w.grid, "kernel and perturbation")
    result = np.zeros(single.shape)
    if index == 0:
        return result
    for start, kernel in enumerate(kernels):
        if abs(kernel.s - w.time.samples[start]) > 1e-9 * max(1.0, w.time.horizon):
            raise ValidationError(f"kernel {start} is not at s={w.time.samples[start]}", "kernels")
        weight = duhamel_weights(w.time.steps, start, w.time.dt)[index - start]
        result += weight * kernel.contract(w.values[start])
    return result


# ---------------------------------------------------------------------------
# Internal force density
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ForceDensity:
    """q[v] = d_t^2 n - div(n grad v) on interior time samples."""

    times: np.ndarray
    values: np.ndarray
    second_time_derivative: np.ndarray
    divergence: np.ndarray
    grid: Grid


def _derivative(values: np.ndarray, grid: Grid, axis: int, method: str) -> np.ndarray:
    if method == "central":
        forward = np.roll(values, -1, axis=axis)
        backward = np.roll(values, 1, axis=axis)
        return (forward - backward) / (2.0 * grid.spacing)
    spectrum = sp_fft.fft(values, axis=axis)
    shape = [1] * values.ndim
    shape[axis] = grid.points_per_dim
    factor = (1j * grid.wavenumbers).reshape(shape)
    return np.real(sp_fft.ifft(factor * spectrum, axis=axis))


def internal_force_density(
    v: SampledPotential,
    traj: Trajectory,
    particles: int = 1,
    derivative: str = "central",
) -> ForceDensity:
    """Internal local-force density from a trajectory and the one-body potential.

    ``v`` lives on the single-particle grid. Time derivatives are second
    central differences; spatial ones are central differences or spectral.
    """
    if derivative not in DERIVATIVES:
        raise ValidationError(
            f"derivative must be one of {DERIVATIVES}, got {derivative!r}", "derivative"
        )
    if traj.time.sample_count < 3:
        raise ValidationError("q[v] needs at least three time samples", "time")
    single = density_grid(traj.grid, particles)
    ValidationUtils.require_same_grid(single, v.grid, "density and potential")
    if v.time != traj.time:
        raise GridMismatchError("potential and trajectory use different time lattices", "time")

    n = density_series(traj, particles)
    dt = traj.time.dt
    second = (n[2:] - 2.0 * n[1:-1] + n[:-2]) / dt**2
    interior_n = n[1:-1]
    interior_v = v.values[1:-1]
    divergence = np.zeros_like(second)
    for axis in single.axes:
        flux = interior_n * _derivative(interior_v, single, axis, derivative)
        divergence += _derivative(flux, single, axis, derivative)
    return ForceDensity(
        times=traj.time.samples[1:-1].copy(),
        values=second - divergence,
        second_time_derivative=second,
        divergence=divergence,
        grid=single,
    )
