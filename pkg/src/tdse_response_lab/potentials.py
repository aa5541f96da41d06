"""Time-sampled real potentials v(t_j, x)."""

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .exceptions import GridMismatchError, ValidationError
from .spectral import Grid, TimeGrid
from .util import ValidationUtils

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SampledPotential:
    """Real field sampled on TimeGrid x Grid, stored with time as the leading axis."""

    values: np.ndarray
    grid: Grid
    time: TimeGrid

    def __post_init__(self):
        """Validate shape, realness and finiteness."""
        array = ValidationUtils.require_real_array(self.values, "potential")
        expected = (self.time.sample_count, *self.grid.shape)
        if array.shape == self.grid.shape:
            array = np.broadcast_to(array, expected)
        if array.shape != expected:
            raise GridMismatchError(
                f"potential of shape {array.shape} does not match {expected}", "potential"
            )
        ValidationUtils.require_finite_array(array, "potential")
        array = np.array(array, dtype=np.float64)
        array.setflags(write=False)
        object.__setattr__(self, "values", array)

    @classmethod
    def zeros(cls, grid: Grid, time: TimeGrid) -> "SampledPotential":
        """The zero potential."""
        return cls(np.zeros((time.sample_count, *grid.shape)), grid, time)

    @classmethod
    def static(cls, field: np.ndarray, grid: Grid, time: TimeGrid) -> "SampledPotential":
        """A time-independent potential."""
        return cls(np.asarray(field, dtype=np.float64), grid, time)

    @classmethod
    def from_function(
        cls, function: Callable[..., np.ndarray], grid: Grid, time: TimeGrid
    ) -> "SampledPotential":
        """Sample function(t, x[, y]) with broadcasting over the full lattice.

        The function receives the time samples shaped (S, 1, ...) and the
        coordinate arrays shaped (1, *grid.shape).
        """
        times = time.samples.reshape((-1,) + (1,) * grid.n_dim)
        coordinates = [c[np.newaxis] for c in grid.coordinates]
        with np.errstate(all="ignore"):
            values = np.asarray(function(times, *coordinates))
        values = np.broadcast_to(values, (time.sample_count, *grid.shape))
        return cls(values, grid, time)

    @property
    def sup(self) -> float:
        """max |v| over all samples."""
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def is_zero(self) -> bool:
        """True when every sample vanishes."""
        return not np.any(self.values)

    def scaled(self, factor: float) -> "SampledPotential":
        """Return factor * v."""
        return SampledPotential(factor * self.values, self.grid, self.time)

    def shifted(self, offsets: np.ndarray | float) -> "SampledPotential":
        """Add a spatially constant c(t_j) to every sample."""
        shift = np.broadcast_to(np.asarray(offsets, dtype=np.float64), (self.time.sample_count,))
        return SampledPotential(
            self.values + shift.reshape((-1,) + (1,) * self.grid.n_dim), self.grid, self.time
        )

    def window(self, start: int, stop: int) -> "SampledPotential":
        """The potential on samples start..stop, re-based to time zero."""
        return SampledPotential(
            self.values[start : stop + 1], self.grid, self.time.window(start, stop)
        )

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation in time between neighbouring samples."""
        value = ValidationUtils.require_finite_scalar(t, "t")
        if not 0.0 <= value <= self.time.horizon * (1 + 1e-12):
            raise ValidationError(f"time {value} outside [0, {self.time.horizon}]", "t", value)
        position = min(value / self.time.dt, float(self.time.steps))
        lower = min(int(np.floor(position)), self.time.steps - 1)
        fraction = position - lower
        return (1.0 - fraction) * self.values[lower] + fraction * self.values[lower + 1]

    def lifted_pair(self) -> "SampledPotential":
        """Lift a one-body potential w(x) to w(x1) + w(x2) on the two-particle grid."""
        if self.grid.n_dim != 1:
            raise ValidationError("only one-dimensional potentials can be lifted", "grid")
        lifted = self.values[:, :, np.newaxis] + self.values[:, np.newaxis, :]
        return SampledPotential(lifted, self.grid.pair(), self.time)

    def __add__(self, other: "SampledPotential") -> "SampledPotential":
        """Samplewise sum."""
        ValidationUtils.require_same_grid(self.grid, other.grid, "potentials")
        if self.time != other.time:
            raise GridMismatchError("potentials use different time lattices", "time")
        return SampledPotential(self.values + other.values, self.grid, self.time)
