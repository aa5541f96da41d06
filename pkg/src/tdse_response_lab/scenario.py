"""Scenario files: one TOML document describing a single experiment.

Sections are [scenario], [grid], [time], [exponents], [state], [potential],
[perturbation], [observable] and [params]; see README.md for the schema.
Parsing collects every problem before raising a single ConfigurationError.
"""

import copy
import logging
import math
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .exceptions import ConfigurationError, TDSELabError
from .expressions import FUNCTIONS, VARIABLES, sample_expression
from .norms import INF, ExponentFamily, default_family, derive_family
from .potentials import SampledPotential
from .response import ObservableOperator
from .spectral import (
    Grid,
    StateVector,
    TimeGrid,
    gaussian_state,
    harmonic_ground_state,
    plane_wave,
    product_pair,
    slater_pair,
    symmetrize_pair,
)

logger = logging.getLogger(__name__)

EXPERIMENTS = (
    "solve",
    "delta",
    "kubo",
    "density",
    "kernel",
    "qfield",
    "verify-bounds",
    "convergence",
    "estimate-constants",
)
STATE_KINDS = ("gaussian", "harmonic", "plane_wave", "file", "product", "slater")
OBSERVABLE_KINDS = ("identity", "multiplication", "projector")

# Short names accepted by sweeps.
PARAMETER_ALIASES = {
    "T": "time.horizon",
    "horizon": "time.horizon",
    "steps": "time.steps",
    "lambda": "scenario.lambda",
    "scale": "perturbation.scale",
    "seed": "scenario.seed",
    "points": "grid.points",
}

_LINE_PATTERN = re.compile(r"line (\d+)")


def _as_float(value: Any) -> float:
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
        return math.inf
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers")
    return float(value)


class _Reader:
    """Typed access to one TOML table, recording problems instead of raising."""

    def __init__(self, data: dict[str, Any], section: str, errors: list[str]):
        self.data = data
        self.section = section
        self.errors = errors

    def _path(self, key: str) -> str:
        return f"{self.section}.{key}"

    def get(self, key: str, kind: type, default: Any = None, required: bool = False) -> Any:
        if key not in self.data:
            if required:
                self.errors.append(f"{self._path(key)}: missing")
            return default
        value = self.data[key]
        try:
            if kind is float:
                return _as_float(value)
            if kind is int:
                if isinstance(value, bool) or int(value) != value:
                    raise TypeError
                return int(value)
            if kind is bool:
                if not isinstance(value, bool):
                    raise TypeError
                return value
            if kind is str:
                if not isinstance(value, str):
                    raise TypeError
                return value
        except (TypeError, ValueError):
            self.errors.append(f"{self._path(key)}: expected {kind.__name__}, got {value!r}")
            return default
        return value

    def floats(self, key: str, default: Any = None) -> Any:
        if key not in self.data:
            return default
        value = self.data[key]
        items = value if isinstance(value, list) else [value]
        try:
            return tuple(_as_float(item) for item in items)
        except (TypeError, ValueError):
            self.errors.append(f"{self._path(key)}: expected numbers, got {value!r}")
            return default


# ---------------------------------------------------------------------------
# Section specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """[grid]: n_dim, points, box_length."""

    n_dim: int
    points: int
    box_length: float

    def build(self) -> Grid:
        """The configuration-space grid."""
        return Grid(self.n_dim, self.points, self.box_length)


@dataclass(frozen=True)
class TimeSpec:
    """[time]: horizon, steps."""

    horizon: float
    steps: int

    def build(self) -> TimeGrid:
        """The time lattice."""
        return TimeGrid(self.horizon, self.steps)


@dataclass(frozen=True)
class ExponentSpec:
    """[exponents]: q, alpha, beta; all absent selects the default family."""

    q: float | None = None
    alpha: float = INF
    beta: float = 2.0

    def build(self, n_dim: int) -> ExponentFamily:
        """The exponent family for the configuration dimension."""
        if self.q is None:
            return default_family(n_dim)
        return derive_family(n_dim, self.q, self.alpha, self.beta)


@dataclass(frozen=True)
class StateSpec:
    """[state]: the initial wave function."""

    kind: str = "gaussian"
    sigma: float = 1.0
    center: tuple[float, ...] = (0.0,)
    momentum: tuple[float, ...] = (0.0,)
    mode: int = 0
    path: str | None = None
    orbitals: tuple[dict[str, Any], ...] = ()


@dataclass(frozen=True)
class FieldSpec:
    """[potential] or [perturbation]: an expression or an .npy sample file, times scale."""

    expression: str | None = "0"
    path: str | None = None
    scale: float = 1.0


@dataclass(frozen=True)
class ObservableSpec:
    """[observable]: the operator A of a Kubo experiment."""

    kind: str = "identity"
    expression: str | None = None


@dataclass
class Scenario:
    """A fully parsed scenario file."""

    name: str
    experiment: str
    seed: int
    grid: GridSpec
    time: TimeSpec
    exponents: ExponentSpec = field(default_factory=ExponentSpec)
    state: StateSpec = field(default_factory=StateSpec)
    potential: FieldSpec = field(default_factory=FieldSpec)
    perturbation: FieldSpec = field(default_factory=FieldSpec)
    observable: ObservableSpec = field(default_factory=ObservableSpec)
    params: dict[str, float] = field(default_factory=dict)
    particles: int = 1
    scheme: str | None = None
    method: str | None = None
    lam: float | None = None
    lambdas: tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4)
    t: float | None = None
    s: float | None = None
    suite: bool = False
    suite_count: int = 20
    derivative: str = "central"
    output_dir: Path | None = None
    raw: dict[str, Any] = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path)

    # -- construction -------------------------------------------------------

    @classmethod
    def from_mapping(cls, raw: dict[str, Any], base_dir: Path | None = None) -> "Scenario":
        """Validate a decoded TOML document."""
        errors: list[str] = []
        known = (
            "scenario",
            "grid",
            "time",
            "exponents",
            "state",
            "potential",
            "perturbation",
            "observable",
            "params",
        )
        for section in raw:
            if section not in known:
                errors.append(f"{section}: unknown section")
        tables = {}
        for section in known:
            value = raw.get(section, {})
            if not isinstance(value, dict):
                errors.append(f"{section}: must be a table")
                value = {}
            tables[section] = value

        head = _Reader(tables["scenario"], "scenario", errors)
        name = head.get("name", str, "scenario")
        experiment = head.get("experiment", str, required=True)
        if experiment is not None and experiment not in EXPERIMENTS:
            errors.append(f"scenario.experiment: must be one of {EXPERIMENTS}, got {experiment!r}")
        seed = head.get("seed", int, 0)
        if seed is not None and seed < 0:
            errors.append("scenario.seed: must be nonnegative")
        particles = head.get("particles", int, 1)
        scheme = head.get("scheme", str, None)
        if scheme is not None and scheme not in ("mild", "strang"):
            errors.append(f"scenario.scheme: must be 'mild' or 'strang', got {scheme!r}")
        method = head.get("method", str, None)
        if method is not None and method not in ("duhamel", "linearized"):
            errors.append(f"scenario.method: must be 'duhamel' or 'linearized', got {method!r}")
        lam = head.get("lambda", float, None)
        if lam is not None and lam == 0:
            errors.append("scenario.lambda: must be nonzero")
        lambdas = head.floats("lambdas", (1e-1, 1e-2, 1e-3, 1e-4))
        t = head.get("t", float, None)
        s = head.get("s", float, None)
        suite = head.get("suite", bool, False)
        suite_count = head.get("suite_count", int, 20)
        derivative = head.get("derivative", str, "central")
        if derivative not in ("central", "spectral"):
            errors.append("scenario.derivative: must be 'central' or 'spectral'")
        output = head.get("output_dir", str, None)

        grid_reader = _Reader(tables["grid"], "grid", errors)
        grid = GridSpec(
            grid_reader.get("n_dim", int, 1),
            grid_reader.get("points", int, required=True) or 0,
            grid_reader.get("box_length", float, required=True) or 0.0,
        )
        time_reader = _Reader(tables["time"], "time", errors)
        time = TimeSpec(
            time_reader.get("horizon", float, required=True) or 0.0,
            time_reader.get("steps", int, required=True) or 0,
        )
        exp_reader = _Reader(tables["exponents"], "exponents", errors)
        exponents = ExponentSpec(
            exp_reader.get("q", float, None),
            exp_reader.get("alpha", float, INF),
            exp_reader.get("beta", float, 2.0),
        )

        state = cls._parse_state(tables["state"], errors)
        potential = cls._parse_field(tables["potential"], "potential", errors)
        perturbation = cls._parse_field(tables["perturbation"], "perturbation", errors)
        obs_reader = _Reader(tables["observable"], "observable", errors)
        observable = ObservableSpec(
            obs_reader.get("kind", str, "identity"), obs_reader.get("expression", str, None)
        )
        if observable.kind not in OBSERVABLE_KINDS:
            errors.append(f"observable.kind: must be one of {OBSERVABLE_KINDS}")
        if observable.kind == "multiplication" and not observable.expression:
            errors.append("observable.expression: required for a multiplication observable")

        params: dict[str, float] = {}
        reserved = set(VARIABLES) | set(FUNCTIONS) | {"pi"}
        for key, value in tables["params"].items():
            if key in reserved:
                errors.append(f"params.{key}: name is reserved")
                continue
            try:
                params[key] = _as_float(value)
            except (TypeError, ValueError):
                errors.append(f"params.{key}: expected a number, got {value!r}")

        scenario = cls(
            name=name or "scenario",
            experiment=experiment or "solve",
            seed=seed or 0,
            grid=grid,
            time=time,
            exponents=exponents,
            state=state,
            potential=potential,
            perturbation=perturbation,
            observable=observable,
            params=params,
            particles=particles or 1,
            scheme=scheme,
            method=method,
            lam=lam,
            lambdas=lambdas,
            t=t,
            s=s,
            suite=bool(suite),
            suite_count=suite_count or 20,
            derivative=derivative or "central",
            output_dir=Path(output) if output else None,
            raw=copy.deepcopy(raw),
            base_dir=base_dir or Path.cwd(),
        )
        if not errors:
            errors.extend(scenario._semantic_errors())
        if errors:
            raise ConfigurationError(
                "Scenario validation failed:\n- " + "\n- ".join(errors),
                field=errors[0].split(":")[0],
            )
        return scenario

    @staticmethod
    def _parse_state(data: dict[str, Any], errors: list[str]) -> StateSpec:
        reader = _Reader(data, "state", errors)
        kind = reader.get("kind", str, "gaussian")
        if kind not in STATE_KINDS:
            errors.append(f"state.kind: must be one of {STATE_KINDS}, got {kind!r}")
        orbitals = data.get("orbitals", [])
        if not isinstance(orbitals, list) or not all(isinstance(o, dict) for o in orbitals):
            errors.append("state.orbitals: must be an array of tables")
            orbitals = []
        return StateSpec(
            kind=kind or "gaussian",
            sigma=reader.get("sigma", float, 1.0),
            center=reader.floats("center", (0.0,)),
            momentum=reader.floats("momentum", (0.0,)),
            mode=reader.get("mode", int, 0),
            path=reader.get("path", str, None),
            orbitals=tuple(orbitals),
        )

    @staticmethod
    def _parse_field(data: dict[str, Any], section: str, errors: list[str]) -> FieldSpec:
        reader = _Reader(data, section, errors)
        expression = reader.get("expression", str, None)
        path = reader.get("path", str, None)
        if expression and path:
            errors.append(f"{section}: give either expression or path, not both")
        return FieldSpec(
            expression if expression or path else "0", path, reader.get("scale", float, 1.0)
        )

    def _semantic_errors(self) -> list[str]:
        errors = []
        try:
            grid = self.grid.build()
            time = self.time.build()
            self.exponents.build(grid.n_dim)
        except TDSELabError as e:
            return [f"{getattr(e, 'field', None) or 'lattice'}: {e}"]
        if self.particles not in (1, 2):
            errors.append("scenario.particles: must be 1 or 2")
        elif self.particles == 2 and grid.n_dim != 2:
            errors.append("scenario.particles: two particles need grid.n_dim = 2")
        for label, value in (("scenario.t", self.t), ("scenario.s", self.s)):
            if value is not None:
                try:
                    time.index_of(value)
                except TDSELabError as e:
                    errors.append(f"{label}: {e}")
        if self.t is not None and self.s is not None and self.s > self.t:
            errors.append("scenario.s: must not exceed scenario.t")
        if self.experiment == "convergence":
            magnitudes = np.abs(np.asarray(self.lambdas))
            if magnitudes.size < 2 or np.any(magnitudes == 0):
                errors.append("scenario.lambdas: need at least two nonzero values")
            elif math.log10(magnitudes.max() / magnitudes.min()) < 3 - 1e-9:
                errors.append("scenario.lambdas: must span at least three decades")
        if self.suite_count < 1:
            errors.append("scenario.suite_count: must be positive")
        if not errors:
            errors.extend(self._field_errors())
        return errors

    def _field_errors(self) -> list[str]:
        errors = []
        builders = (
            ("state", self.build_state),
            ("potential", self.build_potential),
            ("perturbation", self.build_perturbation),
            ("observable", self.build_observable),
        )
        for section, build in builders:
            try:
                build()
            except (TDSELabError, OSError, ValueError) as e:
                errors.append(f"{section}: {e}")
        return errors

    # -- overrides ----------------------------------------------------------

    def with_override(self, parameter: str, value: Any) -> "Scenario":
        """A copy with one scalar field replaced, re-validated from the raw document."""
        path = PARAMETER_ALIASES.get(parameter, parameter)
        if "." not in path:
            path = f"params.{path}" if parameter in self.params else f"scenario.{path}"
        section, key = path.split(".", 1)
        raw = copy.deepcopy(self.raw)
        table = raw.setdefault(section, {})
        if not isinstance(table, dict) or "." in key:
            raise ConfigurationError(f"cannot override {parameter!r}", field=parameter)
        current = table.get(key)
        if isinstance(current, (list, dict)):
            raise ConfigurationError(f"{path} is not a scalar field", field=path)
        table[key] = value
        return Scenario.from_mapping(raw, self.base_dir)

    def with_seed(self, seed: int) -> "Scenario":
        """A copy with a different seed."""
        return self.with_override("scenario.seed", seed)

    # -- materialisation ----------------------------------------------------

    def build_grid(self) -> Grid:
        """Configuration-space grid."""
        return self.grid.build()

    def build_time(self) -> TimeGrid:
        """Time lattice."""
        return self.time.build()

    def build_family(self) -> ExponentFamily:
        """Exponent family for the configuration dimension."""
        return self.exponents.build(self.grid.n_dim)

    def single_grid(self) -> Grid:
        """Grid on which one-body fields live."""
        grid = self.build_grid()
        return grid.single_particle() if self.particles == 2 else grid

    def one_body(self, spec: FieldSpec, section: str) -> SampledPotential:
        """A one-body field on the single-particle grid."""
        grid = self.single_grid()
        time = self.build_time()
        if spec.path is not None:
            values = np.load(self._resolve(spec.path))
            pot = SampledPotential(np.asarray(values, dtype=np.float64), grid, time)
        else:
            pot = sample_expression(spec.expression or "0", grid, time, self.params, section)
        return pot.scaled(spec.scale) if spec.scale != 1.0 else pot

    def configuration_field(self, spec: FieldSpec, section: str) -> SampledPotential:
        """A one-body field lifted to the configuration grid."""
        pot = self.one_body(spec, section)
        return pot.lifted_pair() if self.particles == 2 else pot

    def build_potential(self) -> SampledPotential:
        """v on the configuration grid."""
        return self.configuration_field(self.potential, "potential")

    def build_perturbation(self) -> SampledPotential:
        """w on the configuration grid."""
        return self.configuration_field(self.perturbation, "perturbation")

    def build_state(self) -> StateVector:
        """The initial state on the configuration grid."""
        grid = self.build_grid()
        spec = self.state
        if spec.kind == "file":
            if spec.path is None:
                raise ConfigurationError("state.path: required for kind 'file'", "state.path")
            return StateVector(np.load(self._resolve(spec.path)), grid)
        if spec.kind in ("product", "slater"):
            if self.particles != 2 or len(spec.orbitals) != 2:
                raise ConfigurationError(
                    f"state.kind {spec.kind!r} needs two particles and two orbitals", "state.kind"
                )
            single = grid.single_particle()
            first, second = (self._orbital(single, o) for o in spec.orbitals)
            if spec.kind == "slater":
                return slater_pair(first, second)
            return symmetrize_pair(product_pair(first, second), sign=1)
        center = _broadcast(spec.center, grid.n_dim, "state.center")
        if spec.kind == "harmonic":
            return harmonic_ground_state(grid, center)
        if spec.kind == "plane_wave":
            return plane_wave(grid, spec.mode)
        momentum = _broadcast(spec.momentum, grid.n_dim, "state.momentum")
        return gaussian_state(grid, spec.sigma, center, momentum)

    def _orbital(self, grid: Grid, data: dict[str, Any]) -> StateVector:
        kind = data.get("kind", "gaussian")
        center = float(data.get("center", 0.0))
        if kind == "harmonic":
            return harmonic_ground_state(grid, center)
        if kind == "plane_wave":
            return plane_wave(grid, int(data.get("mode", 0)))
        return gaussian_state(
            grid, float(data.get("sigma", 1.0)), center, float(data.get("momentum", 0.0))
        )

    def build_observable(self) -> ObservableOperator:
        """The Kubo observable on the configuration grid."""
        grid = self.build_grid()
        if self.observable.kind == "identity":
            return ObservableOperator.identity(grid)
        if self.observable.kind == "projector":
            return ObservableOperator.projector(self.build_state().normalized())
        text = self.observable.expression or "1"
        static = sample_expression(text, grid, TimeGrid(1.0, 1), self.params, "observable")
        return ObservableOperator.multiplication(static.values[0], grid)

    def evaluation_time(self) -> float:
        """scenario.t, defaulting to the horizon."""
        return self.t if self.t is not None else self.time.horizon

    def _resolve(self, path: str) -> Path:
        candidate = Path(path)
        return candidate if candidate.is_absolute() else self.base_dir / candidate

    def to_dict(self) -> dict[str, Any]:
        """Echo of the scenario document, for manifests."""
        return copy.deepcopy(self.raw)


def _broadcast(values: tuple[float, ...], n_dim: int, name: str) -> tuple[float, ...]:
    if len(values) == 1:
        return values * n_dim
    if len(values) != n_dim:
        raise ConfigurationError(f"{name}: expected 1 or {n_dim} components", name)
    return values


def load_scenario(path: str | Path) -> Scenario:
    """Read and validate a scenario file."""
    source = Path(path)
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read scenario file {source}: {e}")
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        match = _LINE_PATTERN.search(str(e))
        line = int(match.group(1)) if match else None
        raise ConfigurationError(f"{source}: {e}", line=line)
    scenario = Scenario.from_mapping(raw, source.parent)
    logger.info(f"Loaded scenario '{scenario.name}' ({scenario.experiment}) from {source}")
    return scenario
