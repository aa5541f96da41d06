"""Mild Schroedinger dynamics, a split-step reference and the evolution system.

The mild equation psi = U0 psi0 + Q_v psi is solved by Picard iteration of the
trajectory map

    (Q_v phi)(t) = -i int_0^t U0(t - s) v(s) phi(s) ds,

evaluated in the interaction picture: the integrand exp(+i s k^2) FFT[v phi](s)
is integrated with the composite trapezoid rule and mapped back with
-i exp(-i t k^2). Starting from the zero trajectory the iterates are the partial
sums of the Neumann series, so the iteration count is the effective series
truncation. The horizon is split into subintervals on which Q_v contracts and
the solution is continued from the end value of each one.
"""

import logging
import math
from collections.abc import Sequence

import numpy as np
from scipy import fft as sp_fft
from scipy.integrate import cumulative_trapezoid

from .config import PicardConfig, get_config
from .exceptions import ContractionError, ConvergenceError, ValidationError
from .norms import ExponentFamily, default_family
from .potentials import SampledPotential
from .spectral import (
    Grid,
    StateVector,
    TimeGrid,
    Trajectory,
    free_series,
    norms_array,
)
from .util import ValidationUtils

logger = logging.getLogger(__name__)

SCHEMES = ("mild", "strang")

__all__ = [
    "EvolutionSystem",
    "PicardConfig",
    "SampledPotential",
    "Trajectory",
    "evolution",
    "q_v_apply",
    "resolve_subintervals",
    "solve_linearized",
    "solve_mild",
    "solve_strang",
    "solve_strang_linearized",
]


# ---------------------------------------------------------------------------
# Trajectory map
# ---------------------------------------------------------------------------


def _batch_shape(values: np.ndarray, grid: Grid) -> tuple[int, ...]:
    """Shape that broadcasts a (samples, *grid) field against values."""
    batch_dims = values.ndim - 1 - grid.n_dim
    return (values.shape[0],) + (1,) * batch_dims + grid.shape


def _interaction_phase(sample_count: int, dt: float, grid: Grid) -> np.ndarray:
    """exp(+i tau_j |k|^2) for tau_j = j dt."""
    return np.exp(1j * np.multiply.outer(dt * np.arange(sample_count), grid.k_squared))


def _volterra(
    v_values: np.ndarray,
    values: np.ndarray,
    dt: float,
    grid: Grid,
    phase: np.ndarray | None = None,
) -> np.ndarray:
    """Q_v applied to values on a window whose local time starts at zero."""
    if phase is None:
        phase = _interaction_phase(v_values.shape[0], dt, grid)
    shape = _batch_shape(values, grid)
    phase = phase.reshape(shape)
    spectrum = sp_fft.fftn(v_values.reshape(shape) * values, axes=grid.axes) * phase
    integral = cumulative_trapezoid(spectrum, dx=dt, axis=0, initial=0)
    return -1j * sp_fft.ifftn(np.conj(phase) * integral, axes=grid.axes)


def q_v_apply(v: SampledPotential, phi: Trajectory) -> Trajectory:
    """Apply the trajectory map Q_v on the full time lattice."""
    ValidationUtils.require_same_grid(v.grid, phi.grid, "potential and trajectory")
    if v.time != phi.time:
        raise ValidationError("potential and trajectory use different time lattices", "time")
    return Trajectory(_volterra(v.values, phi.states, v.time.dt, v.grid), v.grid, v.time)


# ---------------------------------------------------------------------------
# Subintervals
# ---------------------------------------------------------------------------


def resolve_subintervals(
    v: SampledPotential,
    cfg: PicardConfig,
    fam: ExponentFamily | None = None,
    c_q: float | None = None,
) -> list[tuple[int, int]]:
    """Sample windows on which the Picard iteration runs.

    An explicit count is honoured (capped at the step count). Otherwise the
    count is the larger of the partition from the V-norm condition and the
    count for which h * max|v| <= 1/2 on every window.
    """
    steps = v.time.steps
    if cfg.subinterval_count is not None:
        return v.time.partition(min(cfg.subinterval_count, steps))
    if v.is_zero():
        return v.time.partition(1)

    from .estimates import partition_interval

    family = fam if fam is not None else default_family(v.grid.n_dim)
    partition = partition_interval(v, family, v.time.horizon, 1.0 if c_q is None else c_q)
    sup_count = max(1, math.ceil(2.0 * v.time.horizon * v.sup))
    count = max(partition.count, sup_count)
    if count > steps:
        logger.warning(
            f"Requested {count} subintervals but only {steps} steps exist; "
            f"dt * max|v| = {v.time.dt * v.sup:.3g}"
        )
        count = steps
    return v.time.partition(count)


def _clip_bounds(bounds: Sequence[tuple[int, int]], start: int) -> list[tuple[int, int]]:
    """Windows restricted to samples >= start, re-indexed from start."""
    return [(max(a, start) - start, b - start) for a, b in bounds if b > start]


# ---------------------------------------------------------------------------
# Picard iteration
# ---------------------------------------------------------------------------


def _picard_window(
    v_values: np.ndarray,
    initial: np.ndarray,
    dt: float,
    grid: Grid,
    cfg: PicardConfig,
    forcing: np.ndarray | None = None,
) -> tuple[np.ndarray, int, float]:
    """Fixed point of phi = U0 phi(0) + forcing + Q_v phi on one window.

    Returns (window samples, iterations, largest measured contraction ratio).
    """
    sample_count = v_values.shape[0]
    base = free_series(initial, grid, dt * np.arange(sample_count))
    if forcing is not None:
        base = base + forcing
    scale = float(np.max(norms_array(base, grid)))
    if scale == 0.0 or not np.any(v_values):
        return base, 1, 0.0

    phase = _interaction_phase(sample_count, dt, grid)
    tolerance = cfg.tolerance * scale
    current = base
    previous: float | None = None
    worst_ratio = 0.0
    stalled = 0
    residual = math.inf
    for iteration in range(1, cfg.max_iterations + 1):
        update = base + _volterra(v_values, current, dt, grid, phase)
        residual = float(np.max(norms_array(update - current, grid)))
        current = update
        logger.debug(f"Picard iteration {iteration}: residual {residual:.3e}")
        if residual <= tolerance:
            return current, iteration, worst_ratio
        if previous is not None and previous > 0.0:
            ratio = residual / previous
            worst_ratio = max(worst_ratio, ratio)
            stalled = stalled + 1 if ratio >= 1.0 else 0
            if stalled >= cfg.patience:
                if residual <= 1e3 * tolerance:
                    logger.warning(
                        f"Picard residual stagnated at {residual / scale:.3e} (relative) "
                        f"after {iteration} iterations; accepting roundoff floor"
                    )
                    return current, iteration, worst_ratio
                raise ContractionError(
                    f"Picard iteration is not contracting: ratio {ratio:.3f} "
                    f"at iteration {iteration} (residual {residual:.3e})",
                    factor=ratio,
                    iteration=iteration,
                )
        previous = residual
    raise ConvergenceError(
        f"Picard iteration did not reach tolerance {cfg.tolerance:.1e} in "
        f"{cfg.max_iterations} iterations (relative residual {residual / scale:.3e})",
        residual=residual,
        iteration=cfg.max_iterations,
    )


def _march_mild(
    v_values: np.ndarray,
    initial: np.ndarray,
    dt: float,
    grid: Grid,
    bounds: Sequence[tuple[int, int]],
    cfg: PicardConfig,
    source: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[np.ndarray, dict]:
    """Continue the window fixed points across all subintervals.

    With ``source = (w_values, psi_values)`` every window also carries the
    inhomogeneity Q_w psi of the linearized equation.
    """
    states = np.empty((v_values.shape[0],) + initial.shape, dtype=np.complex128)
    states[0] = initial
    iterations = []
    worst_ratio = 0.0
    for start, stop in bounds:
        forcing = None
        if source is not None:
            w_values, psi_values = source
            forcing = _volterra(w_values[start : stop + 1], psi_values[start : stop + 1], dt, grid)
        window, count, ratio = _picard_window(
            v_values[start : stop + 1], states[start], dt, grid, cfg, forcing
        )
        states[start + 1 : stop + 1] = window[1:]
        iterations.append(count)
        worst_ratio = max(worst_ratio, ratio)
    diagnostics = {
        "scheme": "mild",
        "subintervals": len(bounds),
        "iterations": max(iterations, default=0),
        "contraction_ratio": worst_ratio,
    }
    return states, diagnostics


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------


def _check_initial(v: SampledPotential, psi0: StateVector) -> float:
    ValidationUtils.require_same_grid(v.grid, psi0.grid, "potential and initial state")
    norm = psi0.norm()
    if norm <= 0.0:
        raise ValidationError("initial state must have positive norm", "psi0")
    return norm


def solve_mild(
    v: SampledPotential,
    psi0: StateVector,
    cfg: PicardConfig | None = None,
    fam: ExponentFamily | None = None,
    c_q: float | None = None,
) -> Trajectory:
    """Solve psi = U0 psi0 + Q_v psi by Picard iteration with continuation."""
    cfg = cfg or get_config().picard()
    _check_initial(v, psi0)
    bounds = resolve_subintervals(v, cfg, fam, c_q)
    states, diagnostics = _march_mild(
        v.values, psi0.amplitudes, v.time.dt, v.grid, bounds, cfg
    )
    logger.info(
        f"Mild solve: {diagnostics['subintervals']} subintervals, Neumann truncation "
        f"k={diagnostics['iterations']}, contraction ratio {diagnostics['contraction_ratio']:.3f}"
    )
    return Trajectory(states, v.grid, v.time, diagnostics)


def solve_linearized(
    v: SampledPotential,
    w: SampledPotential,
    base: Trajectory,
    cfg: PicardConfig | None = None,
    fam: ExponentFamily | None = None,
) -> Trajectory:
    """Solve delta = Q_w psi + Q_v delta, the derivative of the mild solution map.

    ``base`` is the mild solution psi[v]. The same continuation windows are
    used, each carrying its own inhomogeneity.
    """
    cfg = cfg or get_config().picard()
    for other, name in ((w, "perturbation"), (base, "base trajectory")):
        ValidationUtils.require_same_grid(v.grid, other.grid, f"potential and {name}")
        if other.time != v.time:
            raise ValidationError(f"{name} uses a different time lattice", "time")
    bounds = resolve_subintervals(v, cfg, fam)
    states, diagnostics = _march_mild(
        v.values,
        np.zeros(v.grid.shape, dtype=np.complex128),
        v.time.dt,
        v.grid,
        bounds,
        cfg,
        source=(w.values, base.states),
    )
    diagnostics["scheme"] = "mild-linearized"
    return Trajectory(states, v.grid, v.time, diagnostics)


def _strang_substeps(time: TimeGrid, dt: float | None) -> int:
    if dt is None:
        return 1
    step = ValidationUtils.require_finite_scalar(dt, "dt")
    if step <= 0:
        raise ValidationError(f"dt must be positive, got {dt}", "dt", dt)
    substeps = round(time.dt / step)
    if substeps < 1 or abs(substeps * step - time.dt) > 1e-9 * time.dt:
        raise ValidationError(
            f"dt={dt} does not divide the sample spacing {time.dt}", "dt", dt
        )
    return substeps


def _strang_march(
    v_values: np.ndarray,
    initial: np.ndarray,
    sample_dt: float,
    substeps: int,
    grid: Grid,
    w_values: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Symmetric splitting exp(-i h v/2) U0(h) exp(-i h v/2) with midpoint v.

    With ``w_values`` the tangent map (exact derivative in direction w) is
    marched alongside.
    """
    h = sample_dt / substeps
    kinetic = np.exp(-1j * h * grid.k_squared)
    states = np.empty((v_values.shape[0],) + initial.shape, dtype=np.complex128)
    states[0] = initial
    state = initial
    deltas = None
    delta = None
    if w_values is not None:
        deltas = np.zeros_like(states)
        delta = np.zeros_like(initial)

    def kinetic_step(values: np.ndarray) -> np.ndarray:
        return sp_fft.ifftn(kinetic * sp_fft.fftn(values, axes=grid.axes), axes=grid.axes)

    for j in range(v_values.shape[0] - 1):
        for m in range(substeps):
            fraction = (m + 0.5) / substeps
            v_mid = (1.0 - fraction) * v_values[j] + fraction * v_values[j + 1]
            half = np.exp(-0.5j * h * v_mid)
            first = half * state
            second = kinetic_step(first)
            if w_values is not None:
                kick = -0.5j * h * ((1.0 - fraction) * w_values[j] + fraction * w_values[j + 1])
                delta = half * (kinetic_step(half * (delta + kick * state)) + kick * second)
            state = half * second
        states[j + 1] = state
        if deltas is not None:
            deltas[j + 1] = delta
    return states, deltas


def solve_strang(v: SampledPotential, psi0: StateVector, dt: float | None = None) -> Trajectory:
    """Second-order split-step reference; dt must divide the sample spacing."""
    _check_initial(v, psi0)
    substeps = _strang_substeps(v.time, dt)
    states, _ = _strang_march(v.values, psi0.amplitudes, v.time.dt, substeps, v.grid)
    return Trajectory(states, v.grid, v.time, {"scheme": "strang", "substeps": substeps})


def solve_strang_linearized(
    v: SampledPotential, w: SampledPotential, psi0: StateVector, dt: float | None = None
) -> tuple[Trajectory, Trajectory]:
    """Split-step solution and its exact derivative in direction w."""
    _check_initial(v, psi0)
    ValidationUtils.require_same_grid(v.grid, w.grid, "potential and perturbation")
    substeps = _strang_substeps(v.time, dt)
    states, deltas = _strang_march(
        v.values, psi0.amplitudes, v.time.dt, substeps, v.grid, w_values=w.values
    )
    assert deltas is not None
    diagnostics = {"scheme": "strang", "substeps": substeps}
    return (
        Trajectory(states, v.grid, v.time, diagnostics),
        Trajectory(deltas, v.grid, v.time, {**diagnostics, "scheme": "strang-linearized"}),
    )


def evolution(
    v: SampledPotential,
    t: float,
    s: float,
    psi: StateVector,
    cfg: PicardConfig | None = None,
) -> StateVector:
    """U([v], t, s) psi by restarting the mild solve at time s."""
    start = v.time.index_of(s)
    stop = v.time.index_of(t)
    if start > stop:
        raise ValidationError(f"evolution needs s <= t, got s={s}, t={t}", "s", s)
    ValidationUtils.require_same_grid(v.grid, psi.grid, "potential and state")
    if start == stop:
        return StateVector(psi.amplitudes, psi.grid)
    return solve_mild(v.window(start, stop), psi, cfg).final()


class EvolutionSystem:
    """U([v], t, s) on the sample lattice for single states or batches.

    The mild scheme reuses one subinterval layout for every restart; windows
    clipped to a later start time still satisfy the contraction condition.
    """

    def __init__(
        self,
        v: SampledPotential,
        scheme: str = "mild",
        cfg: PicardConfig | None = None,
        fam: ExponentFamily | None = None,
        c_q: float | None = None,
        substeps: int = 1,
    ):
        """Prepare the evolution system for potential v."""
        if scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}, got {scheme!r}", "scheme")
        if substeps < 1:
            raise ValidationError(f"substeps must be positive, got {substeps}", "substeps")
        self.v = v
        self.scheme = scheme
        self.cfg = cfg or get_config().picard()
        self.substeps = substeps
        self._bounds = resolve_subintervals(v, self.cfg, fam, c_q) if scheme == "mild" else []

    @property
    def grid(self) -> Grid:
        """Spatial grid of the potential."""
        return self.v.grid

    @property
    def time(self) -> TimeGrid:
        """Time lattice of the potential."""
        return self.v.time

    def trajectory_from(self, start: int, states: np.ndarray) -> np.ndarray:
        """U(t_j, t_start) states for j = start..steps, stacked on a leading axis."""
        if not 0 <= start <= self.time.steps:
            raise ValidationError(f"start index {start} outside the lattice", "start", start)
        initial = np.asarray(states, dtype=np.complex128)
        if start == self.time.steps:
            return initial[np.newaxis].copy()
        values = self.v.values[start:]
        if self.scheme == "mild":
            evolved, _ = _march_mild(
                values,
                initial,
                self.time.dt,
                self.grid,
                _clip_bounds(self._bounds, start),
                self.cfg,
            )
        else:
            evolved, _ = _strang_march(values, initial, self.time.dt, self.substeps, self.grid)
        return evolved

    def base_trajectory(self, psi0: StateVector) -> Trajectory:
        """psi[v] from psi0 at time zero."""
        _check_initial(self.v, psi0)
        states = self.trajectory_from(0, psi0.amplitudes)
        return Trajectory(states, self.grid, self.time, {"scheme": self.scheme})

    def apply(self, t: float, s: float, psi: StateVector) -> StateVector:
        """U([v], t, s) psi."""
        start = self.time.index_of(s)
        stop = self.time.index_of(t)
        if start > stop:
            raise ValidationError(f"evolution needs s <= t, got s={s}, t={t}", "s", s)
        return StateVector(self.trajectory_from(start, psi.amplitudes)[stop - start], self.grid)
