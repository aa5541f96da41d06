"""Mixed space-time Lebesgue norms and exponent bookkeeping.

The solution space X carries ||phi||_X = ||phi||_{2,inf} + ||phi||_{q,theta}.
Potentials live in the sum space V = L^{p,alpha} + L^{inf,beta}; its
infimum norm is bounded from above by scanning the one-parameter family of
splittings v = v1 + v2 with v2 = clamp(v, -c, c). The dual-side norm of X'
is treated the same way for a supplied splitting.

Exponents are stored as exact reciprocals (Fractions) so that the Hoelder
and admissibility relations hold exactly; a reciprocal of zero encodes an
infinite exponent.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from .config import get_config
from .exceptions import ExponentError, ValidationError
from .potentials import SampledPotential
from .spectral import Grid, TimeGrid, Trajectory
from .util import ValidationUtils

logger = logging.getLogger(__name__)

INF = math.inf

# ---------------------------------------------------------------------------
# Exponent algebra
# ---------------------------------------------------------------------------


def reciprocal(value: Any) -> Fraction:
    """Exact reciprocal of an exponent in [1, inf]; inf maps to 0."""
    if isinstance(value, Fraction):
        exponent = value
    else:
        try:
            number = float(value)
        except (TypeError, ValueError):
            raise ExponentError(f"exponent must be a number, got {value!r}", "exponent", value)
        if math.isnan(number):
            raise ExponentError("exponent must not be NaN", "exponent", value)
        if math.isinf(number):
            if number > 0:
                return Fraction(0)
            raise ExponentError(f"exponent must be at least 1, got {value!r}", "exponent", value)
        exponent = Fraction(number).limit_denominator(10**6)
    if exponent < 1:
        raise ExponentError(f"exponent must be at least 1, got {value!r}", "exponent", value)
    return 1 / exponent


def exponent_from(inverse: Fraction) -> float:
    """Float exponent from its reciprocal."""
    return INF if inverse == 0 else float(1 / inverse)


def _format_exponent(inverse: Fraction) -> str:
    return "inf" if inverse == 0 else str(1 / inverse)


@dataclass(frozen=True)
class ExponentFamily:
    """Index tuple (n, q, theta, q', theta', p, alpha, beta) with exact reciprocals."""

    n: int
    inv_q: Fraction
    inv_theta: Fraction
    inv_alpha: Fraction
    inv_beta: Fraction

    def __post_init__(self):
        """Check every range, duality and admissibility invariant."""
        errors = []
        half = Fraction(1, 2)
        if self.n < 1:
            errors.append(f"n must be positive, got {self.n}")
        if not 0 <= self.inv_q <= half:
            errors.append(f"q must lie in [2, inf], got {_format_exponent(self.inv_q)}")
        if not 0 <= self.inv_theta < half:
            errors.append(f"theta must lie in (2, inf], got {_format_exponent(self.inv_theta)}")
        if 2 * self.inv_theta != self.n * (half - self.inv_q):
            errors.append("(q, theta) violates 2/theta = n (1/2 - 1/q)")
        if self.n >= 3 and self.inv_q <= Fraction(self.n - 2, 2 * self.n):
            errors.append(f"q must be below 2n/(n-2) = {Fraction(2 * self.n, self.n - 2)}")
        if not 0 <= self.inv_alpha <= 1:
            errors.append(f"alpha must be at least 1, got {_format_exponent(self.inv_alpha)}")
        if not 0 <= self.inv_beta < 1:
            errors.append(f"beta must exceed 1, got {_format_exponent(self.inv_beta)}")
        if not self.inv_alpha < 1 - 2 * self.inv_theta:
            errors.append("1/alpha must be below 1 - 2/theta")
        if errors:
            raise ExponentError(
                "Exponent family validation failed:\n" + "\n".join(f"- {e}" for e in errors),
                "exponents",
            )

    @property
    def inv_q_prime(self) -> Fraction:
        """1/q' = 1 - 1/q."""
        return 1 - self.inv_q

    @property
    def inv_theta_prime(self) -> Fraction:
        """1/theta' = 1 - 1/theta."""
        return 1 - self.inv_theta

    @property
    def inv_p(self) -> Fraction:
        """1/p = 1 - 2/q."""
        return 1 - 2 * self.inv_q

    @property
    def q(self) -> float:
        """Spatial index of the Strichartz component."""
        return exponent_from(self.inv_q)

    @property
    def theta(self) -> float:
        """Temporal index of the Strichartz component."""
        return exponent_from(self.inv_theta)

    @property
    def q_prime(self) -> float:
        """Dual spatial index."""
        return exponent_from(self.inv_q_prime)

    @property
    def theta_prime(self) -> float:
        """Dual temporal index."""
        return exponent_from(self.inv_theta_prime)

    @property
    def p(self) -> float:
        """Spatial index of the unbounded potential part."""
        return exponent_from(self.inv_p)

    @property
    def alpha(self) -> float:
        """Temporal index of the unbounded potential part."""
        return exponent_from(self.inv_alpha)

    @property
    def beta(self) -> float:
        """Temporal index of the bounded potential part."""
        return exponent_from(self.inv_beta)

    def admissibility_residual(self) -> float:
        """|2/theta - n (1/2 - 1/q)|."""
        return float(abs(2 * self.inv_theta - self.n * (Fraction(1, 2) - self.inv_q)))

    def holder_residuals(self) -> tuple[float, float]:
        """Residuals of 1/q + 1/q' = 1 and 1/theta + 1/theta' = 1."""
        return (
            float(abs(self.inv_q + self.inv_q_prime - 1)),
            float(abs(self.inv_theta + self.inv_theta_prime - 1)),
        )

    def to_dict(self) -> dict[str, Any]:
        """Exponents rendered as exact strings."""
        return {
            "n": self.n,
            "q": _format_exponent(self.inv_q),
            "theta": _format_exponent(self.inv_theta),
            "q_prime": _format_exponent(self.inv_q_prime),
            "theta_prime": _format_exponent(self.inv_theta_prime),
            "p": _format_exponent(self.inv_p),
            "alpha": _format_exponent(self.inv_alpha),
            "beta": _format_exponent(self.inv_beta),
        }


def check_admissible(n: int, q: Any, theta: Any) -> bool:
    """Whether (q, theta) is Schroedinger-admissible in dimension n.

    Out-of-range but meaningful exponents (theta <= 2, q < 2) give False;
    values below 1 raise ExponentError.
    """
    if n < 1:
        raise ExponentError(f"dimension must be positive, got {n}", "n", n)
    inv_q = reciprocal(q)
    inv_theta = reciprocal(theta)
    if inv_q > Fraction(1, 2) or inv_theta >= Fraction(1, 2):
        return False
    residual = abs(2 * inv_theta - n * (Fraction(1, 2) - inv_q))
    if float(residual) > 1e-12:
        return False
    return n < 3 or inv_q > Fraction(n - 2, 2 * n)


def derive_family(n: int, q: Any, alpha: Any, beta: Any) -> ExponentFamily:
    """Complete (n, q, alpha, beta) to a full family via admissibility and duality."""
    if n < 1:
        raise ExponentError(f"dimension must be positive, got {n}", "n", n)
    inv_q = reciprocal(q)
    if inv_q > Fraction(1, 2):
        raise ExponentError(f"q must be at least 2, got {q}", "q", q)
    inv_theta = n * (Fraction(1, 2) - inv_q) / 2
    if inv_theta >= Fraction(1, 2):
        raise ExponentError(f"no admissible theta > 2 exists for n={n}, q={q}", "q", q)
    if n >= 3 and inv_q <= Fraction(n - 2, 2 * n):
        raise ExponentError(f"q={q} is not below 2n/(n-2) for n={n}", "q", q)
    inv_alpha = reciprocal(alpha)
    inv_beta = reciprocal(beta)
    if inv_beta >= 1:
        raise ExponentError(f"beta must exceed 1, got {beta}", "beta", beta)
    if inv_alpha >= 1 - 2 * inv_theta:
        raise ExponentError(
            f"1/alpha = {inv_alpha} must be below 1 - 2/theta = {1 - 2 * inv_theta}",
            "alpha",
            alpha,
        )
    family = ExponentFamily(n, inv_q, inv_theta, inv_alpha, inv_beta)
    logger.debug(f"Derived exponent family {family.to_dict()}")
    return family


def default_family(n_dim: int) -> ExponentFamily:
    """Family used when a caller supplies none: q=6 in 1D, q=4 in 2D, alpha=inf, beta=2."""
    return derive_family(n_dim, 6 if n_dim == 1 else 4, INF, 2)


def t_star(horizon: float, fam: ExponentFamily) -> float:
    """T* = max(T^(1-1/beta), T^(1-2/theta-1/alpha))."""
    value = ValidationUtils.require_finite_scalar(horizon, "T")
    if value <= 0:
        raise ValidationError(f"T must be positive, got {horizon}", "T", horizon)
    first = float(1 - fam.inv_beta)
    second = float(1 - 2 * fam.inv_theta - fam.inv_alpha)
    return max(value**first, value**second)


# ---------------------------------------------------------------------------
# Mixed norms
# ---------------------------------------------------------------------------


def _as_exponent(value: Any, name: str) -> float:
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ExponentError(f"{name} must be a number, got {value!r}", name, value)
    if math.isnan(number) or number < 1:
        raise ExponentError(f"{name} must be at least 1, got {value!r}", name, value)
    return number


def spatial_norms(values: np.ndarray, grid: Grid, q: float) -> np.ndarray:
    """||f(t_j)||_q for each leading index, with weight dx^n."""
    magnitude = np.abs(values)
    if math.isinf(q):
        return magnitude.max(axis=grid.axes)
    return (np.sum(magnitude**q, axis=grid.axes) * grid.cell_volume) ** (1.0 / q)


def temporal_norm(series: np.ndarray, dt: float, theta: float) -> float:
    """Left-endpoint Riemann L^theta norm; theta = inf takes the max over all samples."""
    if math.isinf(theta):
        return float(series.max())
    return float((np.sum(series[:-1] ** theta) * dt) ** (1.0 / theta))


def lebesgue_norm(
    values: np.ndarray, grid: Grid, time: TimeGrid, q: float, theta: float
) -> float:
    """Mixed L^{q,theta} norm of an array shaped (samples, *grid.shape)."""
    return temporal_norm(spatial_norms(values, grid, q), time.dt, theta)


def mixed_norm(traj: Trajectory, q: Any, theta: Any) -> float:
    """( sum_t ( sum_x |phi|^q dx^n )^(theta/q) dt )^(1/theta)."""
    return lebesgue_norm(
        traj.states, traj.grid, traj.time, _as_exponent(q, "q"), _as_exponent(theta, "theta")
    )


def x_norm(traj: Trajectory, fam: ExponentFamily) -> float:
    """||phi||_X = ||phi||_{2,inf} + ||phi||_{q,theta}."""
    return mixed_norm(traj, 2, INF) + mixed_norm(traj, fam.q, fam.theta)


@dataclass(frozen=True)
class NormReport:
    """Upper bound on a sum-space norm with the splitting that realised it."""

    value: float
    decomposition_meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        """Norm values are nonnegative."""
        if not self.value >= 0:
            raise ValidationError(f"norm value must be nonnegative, got {self.value}", "value")


# ---------------------------------------------------------------------------
# Sum-space norms via threshold splittings
# ---------------------------------------------------------------------------


def default_thresholds(pot: SampledPotential, count: int | None = None) -> list[float]:
    """Zero followed by a geometric ladder that ends at max|v|.

    count defaults to the configured threshold_count.
    """
    count = get_config().threshold_count if count is None else count
    ceiling = pot.sup
    if ceiling == 0:
        return [0.0]
    ladder = np.geomspace(ceiling * 1e-4, ceiling, max(count - 1, 1))
    ladder[-1] = ceiling
    return [0.0, *(float(c) for c in ladder)]


def _checked_thresholds(thresholds: Any) -> np.ndarray:
    array = np.asarray(list(thresholds) if thresholds is not None else [], dtype=np.float64)
    if array.size == 0:
        raise ValidationError("threshold list must not be empty", "thresholds")
    if not np.all(np.isfinite(array)) or np.any(array < 0):
        raise ValidationError("thresholds must be finite and nonnegative", "thresholds")
    return array


def _window_norm(
    series: np.ndarray,
    cumulative: np.ndarray | None,
    exponent: float,
    start: int,
    stop: int,
    dt: float,
) -> np.ndarray:
    """Temporal norm of every row of series restricted to samples start..stop."""
    if math.isinf(exponent):
        return series[:, start : stop + 1].max(axis=1)
    assert cumulative is not None
    total = np.clip(cumulative[:, stop] - cumulative[:, start], 0.0, None)
    return (total * dt) ** (1.0 / exponent)


def _cumulative(series: np.ndarray, exponent: float) -> np.ndarray | None:
    """Running sums of series**exponent over samples before each index."""
    if math.isinf(exponent):
        return None
    powered = series**exponent
    cumulative = np.zeros_like(powered)
    cumulative[:, 1:] = np.cumsum(powered[:, :-1], axis=1)
    return cumulative


@dataclass(frozen=True, eq=False)
class ThresholdProfile:
    """Per-sample part norms of v = v1 + v2 for every scanned threshold.

    Row c holds ||v1(t_j)||_p and ||v2(t_j)||_inf for v2 = clamp(v, -c, c), so the
    V-norm bound of any sample window follows from partial sums.
    """

    thresholds: np.ndarray
    large_part: np.ndarray
    bounded_part: np.ndarray
    fam: ExponentFamily
    dt: float

    def __post_init__(self):
        """Precompute partial sums for finite temporal exponents."""
        object.__setattr__(
            self, "_large_cumulative", _cumulative(self.large_part, self.fam.alpha)
        )
        object.__setattr__(
            self, "_bounded_cumulative", _cumulative(self.bounded_part, self.fam.beta)
        )

    @classmethod
    def build(
        cls,
        pot: SampledPotential,
        fam: ExponentFamily,
        thresholds: Any = None,
        count: int | None = None,
    ) -> "ThresholdProfile":
        """Evaluate part norms for each threshold (defaults to default_thresholds)."""
        levels = _checked_thresholds(
            default_thresholds(pot, count) if thresholds is None else thresholds
        )
        large = np.empty((levels.size, pot.time.sample_count))
        bounded = np.empty_like(large)
        for row, level in enumerate(levels):
            clipped = np.clip(pot.values, -level, level)
            large[row] = spatial_norms(pot.values - clipped, pot.grid, fam.p)
            bounded[row] = np.abs(clipped).max(axis=pot.grid.axes)
        return cls(levels, large, bounded, fam, pot.time.dt)

    @property
    def steps(self) -> int:
        """Number of time steps covered by the profile."""
        return self.large_part.shape[1] - 1

    def part_norms(self, start: int = 0, stop: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """(||v1||_{p,alpha}, ||v2||_{inf,beta}) per threshold on samples start..stop."""
        stop = self.steps if stop is None else stop
        if not 0 <= start < stop <= self.steps:
            raise ValidationError(f"invalid sample window [{start}, {stop}]", "window")
        large = _window_norm(
            self.large_part,
            self._large_cumulative,
            self.fam.alpha,
            start,
            stop,
            self.dt,
        )
        bounded = _window_norm(
            self.bounded_part,
            self._bounded_cumulative,
            self.fam.beta,
            start,
            stop,
            self.dt,
        )
        return large, bounded

    def restricted_norm(self, start: int = 0, stop: int | None = None) -> NormReport:
        """Minimum over thresholds of the V-norm bound on a sample window."""
        large, bounded = self.part_norms(start, stop)
        totals = large + bounded
        best = int(np.argmin(totals))
        return NormReport(
            float(totals[best]),
            {
                "threshold": float(self.thresholds[best]),
                "large_part_norm": float(large[best]),
                "bounded_part_norm": float(bounded[best]),
                "thresholds_scanned": int(self.thresholds.size),
            },
        )


def v_norm_upper(
    pot: SampledPotential, fam: ExponentFamily, thresholds: Any = None
) -> NormReport:
    """Upper bound min_c ||v - clamp(v,-c,c)||_{p,alpha} + ||clamp(v,-c,c)||_{inf,beta}."""
    levels = default_thresholds(pot) if thresholds is None else _checked_thresholds(thresholds)
    report = ThresholdProfile.build(pot, fam, levels).restricted_norm()
    logger.debug(f"V-norm bound {report.value:.6e} at threshold {report.decomposition_meta}")
    return report


def multiplication_split(
    pot: SampledPotential, traj: Trajectory, fam: ExponentFamily, thresholds: Any = None
) -> tuple[Trajectory, Trajectory, NormReport]:
    """Split v phi = v2 phi + v1 phi with the threshold minimising the V-norm bound.

    Returns (v2 phi, v1 phi, report on v).
    """
    ValidationUtils.require_same_grid(pot.grid, traj.grid, "potential and trajectory")
    report = v_norm_upper(pot, fam, thresholds)
    level = report.decomposition_meta["threshold"]
    bounded = np.clip(pot.values, -level, level)
    large = pot.values - bounded
    return (
        Trajectory(bounded * traj.states, traj.grid, traj.time),
        Trajectory(large * traj.states, traj.grid, traj.time),
        report,
    )


def xprime_norm_upper(
    traj: Trajectory, fam: ExponentFamily, first: Trajectory | None = None
) -> NormReport:
    """Upper bound ||phi1||_{2,1} + ||phi2||_{q',theta'} for phi = phi1 + phi2.

    Without an explicit phi1 the two trivial splittings are compared.
    """
    candidates = [first] if first is not None else [traj, Trajectory.zeros(traj.grid, traj.time)]
    best: NormReport | None = None
    for candidate in candidates:
        remainder = traj - candidate
        l21 = mixed_norm(candidate, 2, 1)
        dual = mixed_norm(remainder, fam.q_prime, fam.theta_prime)
        report = NormReport(l21 + dual, {"l2_1_part": l21, "dual_part": dual})
        if best is None or report.value < best.value:
            best = report
    assert best is not None
    return best


# ---------------------------------------------------------------------------
# Coulomb singularities
# ---------------------------------------------------------------------------


def radial_integrable(n: int, s: Any, p: Any) -> bool:
    """Local L^p integrability of r^(-s) in n dimensions: s < n/p."""
    exponent = Fraction(s)
    power = Fraction(p)
    if exponent <= 0:
        raise ValidationError(f"s must be positive, got {s}", "s", s)
    if power < 1:
        raise ValidationError(f"p must be at least 1, got {p}", "p", p)
    return exponent * power < n


def coulomb_membership(n: int, s: Any, p: Any) -> bool:
    """Whether r^(-s) near the origin fits the L^p part of V in dimension n.

    Needs local integrability (s < n/p) and a valid potential index, which
    for n >= 3 means p > n/2.
    """
    if not radial_integrable(n, s, p):
        return False
    return n < 3 or Fraction(p) > Fraction(n, 2)


def coulomb_feasible_window(n: int) -> tuple[Fraction, Fraction] | None:
    """The interval n/2 < p < 3 for a centred Coulomb term, or None when empty."""
    if n < 1:
        raise ValidationError(f"dimension must be positive, got {n}", "n", n)
    lower = Fraction(n, 2)
    upper = Fraction(3)
    return (lower, upper) if lower < upper else None


def coulomb_particle_window(particles: int) -> tuple[Fraction, Fraction] | None:
    """Feasible window for a Coulomb term of several particles in three dimensions."""
    if particles < 1:
        raise ValidationError(f"particle count must be positive, got {particles}", "particles")
    return coulomb_feasible_window(3 * particles)
