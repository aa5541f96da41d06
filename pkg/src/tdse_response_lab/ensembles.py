"""Seeded ensembles of initial states and bounded potentials.

Member i is drawn from numpy.random.default_rng([seed, i, stream]), so any
member can be regenerated on its own and growing an ensemble never changes
the members already drawn.
"""

import math

import numpy as np
from scipy import fft as sp_fft

from .exceptions import ValidationError
from .potentials import SampledPotential
from .spectral import Grid, StateVector, TimeGrid, gaussian_state, plane_wave

STATE_KINDS = ("gaussian", "plane_waves", "random_phase")

_STATE_STREAM = 0
_POTENTIAL_STREAM = 1


def _check_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ValidationError(f"seed must be a nonnegative integer, got {seed!r}", "seed", seed)
    return int(seed)


class StateEnsemble:
    """Normalized random states cycling through Gaussians, plane-wave sums and random phases."""

    def __init__(self, grid: Grid, seed: int = 0, kinds: tuple[str, ...] = STATE_KINDS):
        """Create the ensemble on a grid."""
        unknown = [kind for kind in kinds if kind not in STATE_KINDS]
        if unknown or not kinds:
            raise ValidationError(f"unknown state kinds {unknown or kinds}", "kinds")
        self.grid = grid
        self.seed = _check_seed(seed)
        self.kinds = tuple(kinds)

    def kind(self, index: int) -> str:
        """Kind of member index."""
        return self.kinds[index % len(self.kinds)]

    def label(self, index: int) -> str:
        """Identifier of member index, usable as a witness."""
        return f"{self.kind(index)}#{index}@seed{self.seed}"

    def member(self, index: int) -> StateVector:
        """Member index, regenerated from its own seed."""
        if index < 0:
            raise ValidationError(f"member index must be nonnegative, got {index}", "index")
        rng = np.random.default_rng([self.seed, index, _STATE_STREAM])
        kind = self.kind(index)
        if kind == "gaussian":
            return self._gaussian(rng)
        if kind == "plane_waves":
            return self._plane_waves(rng)
        return self._random_phase(rng)

    def members(self, count: int) -> list[StateVector]:
        """The first count members."""
        return [self.member(index) for index in range(count)]

    def _gaussian(self, rng: np.random.Generator) -> StateVector:
        length = self.grid.box_length
        k_max = math.pi / self.grid.spacing
        n_dim = self.grid.n_dim
        sigma = float(rng.uniform(0.05, 0.1) * length)
        center = tuple(rng.uniform(-0.15, 0.15, n_dim) * length)
        momentum = tuple(rng.uniform(-1.0, 1.0, n_dim) * min(3.0, k_max / 8.0))
        return gaussian_state(self.grid, sigma, center, momentum)

    def _plane_waves(self, rng: np.random.Generator) -> StateVector:
        highest = max(1, self.grid.points_per_dim // 8)
        total = np.zeros(self.grid.shape, dtype=np.complex128)
        for _ in range(int(rng.integers(2, 6))):
            mode = tuple(int(m) for m in rng.integers(-highest, highest + 1, self.grid.n_dim))
            weight = complex(rng.normal(), rng.normal())
            total += weight * plane_wave(self.grid, mode).amplitudes
        if not np.any(total):
            total = plane_wave(self.grid, 0).amplitudes.copy()
        return StateVector(total, self.grid).normalized()

    def _random_phase(self, rng: np.random.Generator) -> StateVector:
        cutoff = float(rng.uniform(0.5, 2.0))
        envelope = np.exp(-self.grid.k_squared / (2.0 * cutoff**2))
        phases = np.exp(2j * math.pi * rng.random(self.grid.shape))
        values = sp_fft.ifftn(envelope * phases, axes=self.grid.axes)
        return StateVector(values, self.grid).normalized()


class PotentialEnsemble:
    """Smooth bounded potentials a * f(x) * cos(omega t + phi) with |v| <= amplitude."""

    def __init__(self, grid: Grid, time: TimeGrid, seed: int = 0, amplitude: float = 1.0):
        """Create the ensemble on a space-time lattice."""
        if not amplitude > 0:
            raise ValidationError(f"amplitude must be positive, got {amplitude}", "amplitude")
        self.grid = grid
        self.time = time
        self.seed = _check_seed(seed)
        self.amplitude = float(amplitude)

    def label(self, index: int) -> str:
        """Identifier of member index."""
        return f"potential#{index}@seed{self.seed}"

    def member(self, index: int) -> SampledPotential:
        """Member index, regenerated from its own seed."""
        if index < 0:
            raise ValidationError(f"member index must be nonnegative, got {index}", "index")
        rng = np.random.default_rng([self.seed, index, _POTENTIAL_STREAM])
        length = self.grid.box_length
        spatial = np.zeros(self.grid.shape)
        weights = rng.normal(size=3)
        for weight in weights:
            modes = rng.integers(1, 5, self.grid.n_dim)
            phase = sum(
                2.0 * math.pi * int(m) * coordinate / length
                for m, coordinate in zip(modes, self.grid.coordinates, strict=True)
            )
            spatial += weight * np.cos(phase + rng.uniform(0.0, 2.0 * math.pi))
        spatial /= max(float(np.sum(np.abs(weights))), 1e-12)
        scale = self.amplitude * float(rng.uniform(0.2, 1.0))
        omega = float(rng.uniform(0.0, 2.0 * math.pi))
        offset = float(rng.uniform(0.0, 2.0 * math.pi))
        temporal = np.cos(omega * self.time.samples + offset)
        values = scale * temporal.reshape((-1,) + (1,) * self.grid.n_dim) * spatial
        return SampledPotential(values, self.grid, self.time)

    def members(self, count: int) -> list[SampledPotential]:
        """The first count members."""
        return [self.member(index) for index in range(count)]
