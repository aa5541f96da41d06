"""Periodic grids, wavefunctions and the exact free evolution.

States live on a periodic box of side L with N points per axis. The free
propagator U0(t) = exp(-i t H0), H0 = -Laplacian (units hbar = 1, 2m = 1), is
diagonal on the discrete Fourier lattice and is applied exactly by a forward
transform, a phase multiplication and an inverse transform.

Array helpers in this module accept leading batch axes: spatial axes are always
the trailing ``grid.n_dim`` axes.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np
from scipy import fft as sp_fft

from .exceptions import GridMismatchError, ValidationError
from .util import ValidationUtils

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Grid:
    """Periodic position lattice with its discrete-Fourier dual."""

    n_dim: int
    points_per_dim: int
    box_length: float

    def __post_init__(self):
        """Validate the lattice parameters."""
        if self.n_dim not in (1, 2):
            raise ValidationError(
                f"n_dim must be 1 or 2, got {self.n_dim}", field="n_dim", value=self.n_dim
            )
        if self.points_per_dim < 8 or self.points_per_dim % 2:
            raise ValidationError(
                f"points_per_dim must be even and at least 8, got {self.points_per_dim}",
                field="points_per_dim",
                value=self.points_per_dim,
            )
        length = ValidationUtils.require_finite_scalar(self.box_length, "box_length")
        if length <= 0:
            raise ValidationError(
                f"box_length must be positive, got {self.box_length}",
                field="box_length",
                value=self.box_length,
            )
        object.__setattr__(self, "box_length", length)

    @property
    def spacing(self) -> float:
        """Lattice spacing dx = L / N."""
        return self.box_length / self.points_per_dim

    @property
    def cell_volume(self) -> float:
        """Quadrature weight dx^n."""
        return self.spacing**self.n_dim

    @property
    def shape(self) -> tuple[int, ...]:
        """Array shape of one state."""
        return (self.points_per_dim,) * self.n_dim

    @property
    def size(self) -> int:
        """Number of lattice points."""
        return self.points_per_dim**self.n_dim

    @property
    def axes(self) -> tuple[int, ...]:
        """Trailing spatial axes of an array shaped (..., *shape)."""
        return tuple(range(-self.n_dim, 0))

    @cached_property
    def axis(self) -> np.ndarray:
        """One-dimensional coordinates x_j = -L/2 + j dx."""
        return -0.5 * self.box_length + self.spacing * np.arange(self.points_per_dim)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """One-dimensional momentum lattice 2 pi j / L in FFT order."""
        return 2.0 * np.pi * sp_fft.fftfreq(self.points_per_dim, d=self.spacing)

    @cached_property
    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays, one per axis, in ij indexing."""
        return tuple(np.meshgrid(*([self.axis] * self.n_dim), indexing="ij"))

    @cached_property
    def k_squared(self) -> np.ndarray:
        """|k|^2 on the full momentum lattice, the symbol of H0."""
        momenta = np.meshgrid(*([self.wavenumbers] * self.n_dim), indexing="ij")
        return sum(k**2 for k in momenta)

    def single_particle(self) -> "Grid":
        """The one-dimensional grid of each coordinate."""
        return Grid(1, self.points_per_dim, self.box_length)

    def pair(self) -> "Grid":
        """The configuration grid of two particles on this one-dimensional grid."""
        if self.n_dim != 1:
            raise ValidationError("pair grids are built from one-dimensional grids", "n_dim")
        return Grid(2, self.points_per_dim, self.box_length)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform samples t_j = j dt, j = 0..steps, on [0, T]."""

    horizon: float
    steps: int

    def __post_init__(self):
        """Validate the horizon and step count."""
        horizon = ValidationUtils.require_finite_scalar(self.horizon, "horizon")
        if horizon <= 0:
            raise ValidationError(f"horizon must be positive, got {horizon}", "horizon", horizon)
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValidationError(f"steps must be a positive integer, got {self.steps}", "steps")
        object.__setattr__(self, "horizon", horizon)
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def dt(self) -> float:
        """Sample spacing T / steps."""
        return self.horizon / self.steps

    @property
    def sample_count(self) -> int:
        """Number of samples, steps + 1."""
        return self.steps + 1

    @cached_property
    def samples(self) -> np.ndarray:
        """Sample times."""
        return self.dt * np.arange(self.steps + 1)

    def index_of(self, t: float) -> int:
        """Return j with t = t_j, rejecting times off the sample lattice."""
        value = ValidationUtils.require_finite_scalar(t, "t")
        position = value / self.dt
        index = round(position)
        if abs(position - index) > 1e-9 * max(1.0, abs(position)) or not 0 <= index <= self.steps:
            raise ValidationError(
                f"time {value} is not a sample of the lattice (dt={self.dt}, T={self.horizon})",
                field="t",
                value=value,
            )
        return int(index)

    def window(self, start: int, stop: int) -> "TimeGrid":
        """Time lattice of the samples start..stop, shifted to begin at zero."""
        if not 0 <= start < stop <= self.steps:
            raise ValidationError(f"invalid sample window [{start}, {stop}]", "window")
        return TimeGrid((stop - start) * self.dt, stop - start)

    def partition(self, count: int) -> list[tuple[int, int]]:
        """Split the samples into count near-equal windows with boundaries round(m*steps/count)."""
        if not 1 <= count <= self.steps:
            raise ValidationError(
                f"subinterval count must lie in [1, {self.steps}], got {count}", "count", count
            )
        edges = [(2 * m * self.steps + count) // (2 * count) for m in range(count + 1)]
        return list(zip(edges[:-1], edges[1:], strict=True))


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitudes of a wavefunction on a grid at one instant."""

    amplitudes: np.ndarray
    grid: Grid

    def __post_init__(self):
        """Coerce to complex128 and validate shape and finiteness."""
        values = np.array(self.amplitudes, dtype=np.complex128)
        if values.shape != self.grid.shape:
            raise GridMismatchError(
                f"amplitudes of shape {values.shape} do not match grid shape {self.grid.shape}",
                "amplitudes",
            )
        ValidationUtils.require_finite_array(values, "amplitudes")
        values.setflags(write=False)
        object.__setattr__(self, "amplitudes", values)

    def norm(self) -> float:
        """L2 norm with weight dx^n."""
        return l2_norm(self)

    def normalized(self) -> "StateVector":
        """Return the state scaled to unit norm."""
        norm = self.norm()
        if norm == 0:
            raise ValidationError("cannot normalize the zero state", "amplitudes")
        return StateVector(self.amplitudes / norm, self.grid)

    def __mul__(self, scale: complex) -> "StateVector":
        """Scale the amplitudes."""
        return StateVector(scale * self.amplitudes, self.grid)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-sampled sequence of states, one per sample of a TimeGrid."""

    states: np.ndarray
    grid: Grid
    time: TimeGrid
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        """Coerce to complex128 and validate the sample layout."""
        values = np.array(self.states, dtype=np.complex128)
        expected = (self.time.sample_count, *self.grid.shape)
        if values.shape != expected:
            raise GridMismatchError(
                f"trajectory of shape {values.shape} does not match {expected}", "states"
            )
        ValidationUtils.require_finite_array(values, "states")
        values.setflags(write=False)
        object.__setattr__(self, "states", values)

    def __len__(self) -> int:
        """Number of samples."""
        return self.time.sample_count

    def state(self, index: int) -> StateVector:
        """State at sample index."""
        return StateVector(self.states[index], self.grid)

    def at(self, t: float) -> StateVector:
        """State at a lattice time."""
        return self.state(self.time.index_of(t))

    def final(self) -> StateVector:
        """State at the horizon."""
        return self.state(-1)

    def norms(self) -> np.ndarray:
        """L2 norm of every sample."""
        return np.sqrt(
            np.sum(np.abs(self.states) ** 2, axis=self.grid.axes) * self.grid.cell_volume
        )

    def window(self, start: int, stop: int) -> "Trajectory":
        """Samples start..stop on a time lattice shifted to zero."""
        return Trajectory(self.states[start : stop + 1], self.grid, self.time.window(start, stop))

    def _check_compatible(self, other: "Trajectory") -> None:
        ValidationUtils.require_same_grid(self.grid, other.grid, "trajectories")
        if self.time != other.time:
            raise GridMismatchError(
                f"trajectories use different time lattices: {self.time} vs {other.time}", "time"
            )

    def __add__(self, other: "Trajectory") -> "Trajectory":
        """Samplewise sum."""
        self._check_compatible(other)
        return Trajectory(self.states + other.states, self.grid, self.time)

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        """Samplewise difference."""
        self._check_compatible(other)
        return Trajectory(self.states - other.states, self.grid, self.time)

    def __mul__(self, scale: complex) -> "Trajectory":
        """Scale every sample."""
        return Trajectory(scale * self.states, self.grid, self.time)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, grid: Grid, time: TimeGrid) -> "Trajectory":
        """The zero trajectory."""
        return cls(np.zeros((time.sample_count, *grid.shape), dtype=np.complex128), grid, time)


# ---------------------------------------------------------------------------
# Array-level kernels (batch axes first, spatial axes last)
# ---------------------------------------------------------------------------


def propagate_array(values: np.ndarray, grid: Grid, t: float) -> np.ndarray:
    """Apply U0(t) to every state held in the trailing axes of values."""
    phase = np.exp(-1j * t * grid.k_squared)
    return sp_fft.ifftn(phase * sp_fft.fftn(values, axes=grid.axes), axes=grid.axes)


def free_series(values: np.ndarray, grid: Grid, times: np.ndarray) -> np.ndarray:
    """Return U0(t_j) applied to values for every t_j, stacked on a new leading axis."""
    spectrum = sp_fft.fftn(values, axes=grid.axes)
    phases = np.exp(-1j * np.multiply.outer(times, grid.k_squared))
    phases = phases.reshape((len(times),) + (1,) * (values.ndim - grid.n_dim) + grid.shape)
    return sp_fft.ifftn(phases * spectrum[np.newaxis], axes=grid.axes)


def norms_array(values: np.ndarray, grid: Grid) -> np.ndarray:
    """L2 norms over the trailing spatial axes."""
    return np.sqrt(np.sum(np.abs(values) ** 2, axis=grid.axes) * grid.cell_volume)


# ---------------------------------------------------------------------------
# Operations on states
# ---------------------------------------------------------------------------


def free_propagate(state: StateVector, t: float) -> StateVector:
    """Exact free evolution U0(t) = exp(i t Laplacian); t may be negative."""
    value = ValidationUtils.require_finite_scalar(t, "t")
    return StateVector(propagate_array(state.amplitudes, state.grid, value), state.grid)


def apply_potential(v_slice: np.ndarray, state: StateVector) -> StateVector:
    """Pointwise multiplication by a real field on the state's grid."""
    field_values = ValidationUtils.require_real_array(v_slice, "v_slice")
    if field_values.shape != state.grid.shape:
        raise GridMismatchError(
            f"field of shape {field_values.shape} does not match grid shape {state.grid.shape}",
            "v_slice",
        )
    return StateVector(field_values * state.amplitudes, state.grid)


def inner_product(a: StateVector, b: StateVector) -> complex:
    """Scalar product, antilinear in the first slot, with weight dx^n."""
    ValidationUtils.require_same_grid(a.grid, b.grid, "inner product operands")
    return complex(np.vdot(a.amplitudes, b.amplitudes) * a.grid.cell_volume)


def l2_norm(state: StateVector) -> float:
    """L2 norm of a state."""
    return float(norms_array(state.amplitudes, state.grid))


def position_variance(state: StateVector) -> float:
    """Total variance of the position distribution |psi|^2 (summed over axes)."""
    weights = np.abs(state.amplitudes) ** 2
    mass = weights.sum()
    if mass == 0:
        raise ValidationError("position variance of the zero state is undefined", "amplitudes")
    variance = 0.0
    for coordinate in state.grid.coordinates:
        mean = np.sum(coordinate * weights) / mass
        variance += float(np.sum((coordinate - mean) ** 2 * weights) / mass)
    return variance


def free_trajectory(state: StateVector, time: TimeGrid) -> Trajectory:
    """Sample t -> U0(t) psi0 on a time lattice."""
    return Trajectory(free_series(state.amplitudes, state.grid, time.samples), state.grid, time)


# ---------------------------------------------------------------------------
# Initial states
# ---------------------------------------------------------------------------


def _as_vector(value: float | tuple[float, ...] | list[float], n_dim: int, name: str):
    if isinstance(value, (int, float)):
        return (float(value),) * n_dim
    values = tuple(float(item) for item in value)
    if len(values) != n_dim:
        raise ValidationError(f"{name} needs {n_dim} components, got {len(values)}", name)
    return values


def gaussian_state(
    grid: Grid,
    sigma: float = 1.0,
    center: float | tuple[float, ...] = 0.0,
    momentum: float | tuple[float, ...] = 0.0,
) -> StateVector:
    """Normalized Gaussian (2 pi sigma^2)^(-1/4) exp(-(x-c)^2 / 4 sigma^2 + i k x) per axis."""
    width = ValidationUtils.require_finite_scalar(sigma, "sigma")
    if width <= 0:
        raise ValidationError(f"sigma must be positive, got {sigma}", "sigma", sigma)
    centers = _as_vector(center, grid.n_dim, "center")
    momenta = _as_vector(momentum, grid.n_dim, "momentum")
    amplitude = np.ones(grid.shape, dtype=np.complex128)
    for coordinate, c, k in zip(grid.coordinates, centers, momenta, strict=True):
        amplitude = amplitude * (2.0 * np.pi * width**2) ** -0.25
        envelope = -((coordinate - c) ** 2) / (4.0 * width**2)
        amplitude = amplitude * np.exp(envelope + 1j * k * coordinate)
    return StateVector(amplitude, grid).normalized()


def harmonic_ground_state(grid: Grid, center: float | tuple[float, ...] = 0.0) -> StateVector:
    """Ground state pi^(-n/4) exp(-|x-c|^2 / 2) of -Laplacian + |x-c|^2 (energy n)."""
    centers = _as_vector(center, grid.n_dim, "center")
    amplitude = np.ones(grid.shape, dtype=np.complex128)
    for coordinate, c in zip(grid.coordinates, centers, strict=True):
        amplitude = amplitude * math.pi**-0.25 * np.exp(-0.5 * (coordinate - c) ** 2)
    return StateVector(amplitude, grid)


def plane_wave(grid: Grid, mode: int | tuple[int, ...]) -> StateVector:
    """Normalized plane wave exp(i k.x) with integer lattice mode."""
    modes = (mode,) * grid.n_dim if isinstance(mode, int) else tuple(mode)
    phase = sum(
        2.0 * np.pi * m * coordinate / grid.box_length
        for m, coordinate in zip(modes, grid.coordinates, strict=True)
    )
    return StateVector(np.exp(1j * phase) / math.sqrt(grid.box_length**grid.n_dim), grid)


def symmetrize_pair(state: StateVector, sign: int = 1) -> StateVector:
    """(Anti)symmetrize a two-particle state under exchange x1 <-> x2, then normalize."""
    if state.grid.n_dim != 2:
        raise ValidationError("exchange symmetry needs a two-particle (2D) grid", "grid")
    if sign not in (1, -1):
        raise ValidationError(f"sign must be +1 or -1, got {sign}", "sign", sign)
    values = state.amplitudes + sign * state.amplitudes.T
    return StateVector(values, state.grid).normalized()


def product_pair(first: StateVector, second: StateVector) -> StateVector:
    """Tensor product phi1(x1) phi2(x2) of two one-dimensional orbitals."""
    ValidationUtils.require_same_grid(first.grid, second.grid, "orbitals")
    if first.grid.n_dim != 1:
        raise ValidationError("orbitals must be one-dimensional", "grid")
    return StateVector(np.outer(first.amplitudes, second.amplitudes), first.grid.pair())


def slater_pair(first: StateVector, second: StateVector) -> StateVector:
    """Normalized antisymmetric determinant of two one-dimensional orbitals."""
    return symmetrize_pair(product_pair(first, second), sign=-1)
