"""Closed-form field expressions over (t, x[, y]).

The language is arithmetic (+ - * / and ^ or ** for powers) with exp, sin,
cos, abs, min, max, clamp and pi, plus named scalar parameters. Expressions
are parsed with sympy and compiled to numpy with lambdify.
"""

import logging
import re
from collections.abc import Callable, Mapping

import numpy as np
import sympy as sp
from sympy.core.function import AppliedUndef
from sympy.parsing.sympy_parser import (
    convert_xor,
    parse_expr,
    standard_transformations,
)

from .exceptions import ExpressionError
from .potentials import SampledPotential
from .spectral import Grid, TimeGrid

logger = logging.getLogger(__name__)

VARIABLES = ("t", "x", "y")
FUNCTIONS = ("exp", "sin", "cos", "abs", "min", "max", "clamp")
CONSTANTS = ("pi",)

_ALLOWED_CHARACTERS = re.compile(r"^[0-9A-Za-z_+\-*/^().,\s]*$")
_IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_TRANSFORMATIONS = standard_transformations + (convert_xor,)


class Minimum(sp.Function):
    """Pointwise minimum of two real fields, lowered to numpy.minimum."""

    nargs = 2
    is_real = True

    @classmethod
    def eval(cls, a: sp.Expr, b: sp.Expr) -> sp.Expr | None:
        if a.is_number and b.is_number:
            return sp.Min(a, b)
        return None


class Maximum(sp.Function):
    """Pointwise maximum of two real fields, lowered to numpy.maximum."""

    nargs = 2
    is_real = True

    @classmethod
    def eval(cls, a: sp.Expr, b: sp.Expr) -> sp.Expr | None:
        if a.is_number and b.is_number:
            return sp.Max(a, b)
        return None


# numpy.minimum and numpy.maximum keep infinite operands, so min(1/|x|, c) stays finite at x = 0.
_NUMPY_FUNCTIONS = {"Minimum": np.minimum, "Maximum": np.maximum}


def _reduce(name: str, pair: type[sp.Function]) -> Callable[..., sp.Expr]:
    def reduce(*args: sp.Expr) -> sp.Expr:
        if len(args) < 2:
            raise ExpressionError(f"{name} needs at least two arguments, got {len(args)}")
        result = args[0]
        for item in args[1:]:
            result = pair(result, item)
        return result

    return reduce


def _clamp(*args: sp.Expr) -> sp.Expr:
    if len(args) != 3:
        raise ExpressionError(f"clamp takes (value, low, high), got {len(args)} arguments")
    value, low, high = args
    return Minimum(Maximum(value, low), high)


def _unary(name: str, function: Callable[[sp.Expr], sp.Expr]) -> Callable[..., sp.Expr]:
    def apply(*args: sp.Expr) -> sp.Expr:
        if len(args) != 1:
            raise ExpressionError(f"{name} takes one argument, got {len(args)}")
        return function(args[0])

    return apply


_FUNCTION_TABLE: dict[str, Callable[..., sp.Expr]] = {
    "exp": _unary("exp", sp.exp),
    "sin": _unary("sin", sp.sin),
    "cos": _unary("cos", sp.cos),
    "abs": _unary("abs", sp.Abs),
    "min": _reduce("min", Minimum),
    "max": _reduce("max", Maximum),
    "clamp": _clamp,
}


class CompiledField:
    """A parsed expression and its numpy evaluator f(t, x, y)."""

    def __init__(self, text: str, expression: sp.Expr, n_dim: int):
        """Compile expression for an n_dim-dimensional grid."""
        self.text = text
        self.expression = expression
        self.n_dim = n_dim
        symbols = sp.symbols(VARIABLES[: 1 + n_dim])
        self._function = sp.lambdify(symbols, expression, modules=[_NUMPY_FUNCTIONS, "numpy"])

    def __call__(self, t: np.ndarray, *coordinates: np.ndarray) -> np.ndarray:
        """Evaluate with numpy broadcasting."""
        return np.asarray(self._function(t, *coordinates), dtype=np.float64)

    def sample(self, grid: Grid, time: TimeGrid) -> SampledPotential:
        """Sample on the lattice, rejecting non-finite values."""
        if grid.n_dim != self.n_dim:
            raise ExpressionError(
                f"expression compiled for {self.n_dim}D cannot be sampled on a {grid.n_dim}D grid",
                self.text,
            )
        times = time.samples.reshape((-1,) + (1,) * grid.n_dim)
        coordinates = [c[np.newaxis] for c in grid.coordinates]
        with np.errstate(all="ignore"):
            values = self(times, *coordinates)
        values = np.broadcast_to(values, (time.sample_count, *grid.shape))
        if not np.all(np.isfinite(values)):
            raise ExpressionError(
                f"expression {self.text!r} is not finite on the lattice", self.text
            )
        return SampledPotential(values, grid, time)


def compile_expression(
    text: str,
    n_dim: int,
    parameters: Mapping[str, float] | None = None,
    field: str | None = None,
) -> CompiledField:
    """Parse text into a field over t and the first n_dim of (x, y)."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("expression must be a non-empty string", text, field)
    if n_dim not in (1, 2):
        raise ExpressionError(f"expressions support 1 or 2 dimensions, got {n_dim}", text, field)
    if not _ALLOWED_CHARACTERS.match(text):
        raise ExpressionError(f"expression {text!r} contains forbidden characters", text, field)

    values = dict(parameters or {})
    variables = VARIABLES[: 1 + n_dim]
    allowed = set(variables) | set(FUNCTIONS) | set(CONSTANTS) | set(values)
    for name in _IDENTIFIER.findall(text):
        if name not in allowed:
            raise ExpressionError(f"unknown identifier {name!r} in {text!r}", text, field)

    local_dict: dict[str, object] = {name: sp.Symbol(name, real=True) for name in variables}
    local_dict.update(_FUNCTION_TABLE)
    local_dict["pi"] = sp.pi
    for name, value in values.items():
        local_dict[name] = sp.Float(float(value))
    global_dict = {
        "Integer": sp.Integer,
        "Float": sp.Float,
        "Rational": sp.Rational,
        "Symbol": sp.Symbol,
    }

    try:
        expression = parse_expr(
            text,
            local_dict=local_dict,
            global_dict=global_dict,
            transformations=_TRANSFORMATIONS,
        )
    except ExpressionError as e:
        raise ExpressionError(f"{e} in {text!r}", text, field)
    except Exception as e:
        raise ExpressionError(f"cannot parse expression {text!r}: {e}", text, field)

    expression = sp.sympify(expression)
    if expression.atoms(AppliedUndef):
        raise ExpressionError(f"expression {text!r} calls an unknown function", text, field)
    unknown = {str(symbol) for symbol in expression.free_symbols} - set(variables)
    if unknown:
        raise ExpressionError(f"unbound symbols {sorted(unknown)} in {text!r}", text, field)
    if expression.has(sp.I) or expression.has(sp.zoo, sp.nan):
        raise ExpressionError(f"expression {text!r} is not a real field", text, field)

    logger.debug(f"Compiled {text!r} -> {expression}")
    return CompiledField(text, expression, n_dim)


def sample_expression(
    text: str,
    grid: Grid,
    time: TimeGrid,
    parameters: Mapping[str, float] | None = None,
    field: str | None = None,
) -> SampledPotential:
    """Compile and sample an expression on a space-time lattice."""
    return compile_expression(text, grid.n_dim, parameters, field).sample(grid, time)
