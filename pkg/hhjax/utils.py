from __future__ import annotations
from typing import Union, Sequence
import math
import logging

from jax import numpy as jnp

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], jnp.ndarray]

MASS_TOL = 1e-9
PHI_TOL = 1e-9
CONV_TOL = 1e-12
CONV_TOL_SMOOTHED = 1e-8
FD_STEP = 1e-5
WEIGHT_TOL = 1e-9


class HHError(Exception):
    """Base class for errors raised by hhjax."""


class ValidationError(HHError, ValueError):
    """A precondition of an operation is violated."""


class NotConvexError(ValidationError):
    """A function expected to be convex fails the convexity checks."""


class KinkError(ValidationError):
    """A twice differentiable function is required but the function has kinks."""


class NumericFailure(HHError, ArithmeticError):
    """
    A numerical procedure did not reach its tolerance.

    Attributes:
        value: Best available value when the failure happened (may be nan).
        error_estimate: Error estimate attached to ``value``.
    """

    def __init__(self, message: str, value: float = math.nan, error_estimate: float = math.inf):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


class AssumptionWarning(UserWarning):
    """A measure or pivot violates an assumption needed for strict statements (e.g. TH strictness)."""


def check_interval(a: float, b: float):
    """
    Checks that [a, b] is a finite, non-degenerate interval.

    Args:
        a: Left endpoint.
        b: Right endpoint.

    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValidationError(f'Interval endpoints must be finite, received [{a}, {b}]')
    if not a < b:
        raise ValidationError(f'Interval requires a < b, received [{a}, {b}]')


def check_pivot(t: float, a: float, b: float):
    """
    Checks that the pivot t lies in the open interval (a, b).

    Args:
        t: Pivot.
        a: Left endpoint.
        b: Right endpoint.

    """
    if not (math.isfinite(t) and a < t < b):
        raise ValidationError(f'Pivot t must satisfy a < t < b, received t={t} on [{a}, {b}]')


def check_in_interval(x: ArrayLike, a: float, b: float, name: str = 'x'):
    """
    Checks that every element of x lies in the closed interval [a, b].

    Args:
        x: Scalar or array of points.
        a: Left endpoint.
        b: Right endpoint.
        name: Name of the argument, used in the error message.

    """
    x = jnp.asarray(x)
    if x.size and (bool(jnp.any(x < a)) or bool(jnp.any(x > b)) or not bool(jnp.all(jnp.isfinite(x)))):
        raise ValidationError(f'{name} must lie in [{a}, {b}], received {x}')


def grid(a: float, b: float, n: int) -> jnp.ndarray:
    """
    Uniform grid of n points including both endpoints.

    Args:
        a: Left endpoint.
        b: Right endpoint.
        n: Number of points (at least 2).

    Returns:
        Array of shape (n,).
    """
    if n < 2:
        raise ValidationError(f'Grid needs at least 2 points, received {n}')
    return jnp.linspace(a, b, n)


def format_float(x: float, digits: int = 17) -> str:
    """
    Deterministic decimal representation with the given number of significant digits.

    Args:
        x: Value.
        digits: Significant digits (17 round-trips a double).

    Returns:
        String representation.
    """
    x = float(x)
    if x == 0.0:
        return '0'
    return f'{x:.{digits}g}'


def round_half_away(x: float) -> int:
    """
    Rounds to the nearest integer with ties away from zero.

    Args:
        x: Value.

    Returns:
        Rounded integer.
    """
    return int(math.copysign(math.floor(abs(x) + 0.5), x))
