from __future__ import annotations
from typing import Callable, NamedTuple, Optional, Sequence, Tuple
from functools import lru_cache
import logging
import math

import jax
from jax import numpy as jnp

from hhjax.quad import QuadConfig, integrate, integrate_batch
from hhjax.utils import (ValidationError, NotConvexError, NumericFailure, ArrayLike,
                         CONV_TOL, FD_STEP, check_interval, grid)

logger = logging.getLogger(__name__)

RealFunction = Callable[[jnp.ndarray], jnp.ndarray]

_MIN_KERNEL_WIDTH = 1e-9


class ConvexFn(NamedTuple):
    """
    Convex function with optional derivatives.

    Attributes:
        eval: Vectorised function.
        d1: First derivative (right derivative at kinks) or None.
        d2: Second derivative or None.
        kinks: Sorted points of non-differentiability.
        label: Name used in reports.
    """
    eval: RealFunction
    d1: Optional[RealFunction]
    d2: Optional[RealFunction]
    kinks: Tuple[float, ...]
    label: str


class VeeParams(NamedTuple):
    alpha: float
    tau: float
    beta: float
    t: float


def make_affine(alpha: float, beta: float) -> ConvexFn:
    """
    Affine function x -> alpha x + beta, the equality case of every inequality considered here.

    Args:
        alpha: Slope.
        beta: Intercept.

    Returns:
        ConvexFn.

    """
    alpha, beta = float(alpha), float(beta)
    return ConvexFn(lambda x: alpha * jnp.asarray(x) + beta,
                    lambda x: jnp.full(jnp.shape(x), alpha),
                    lambda x: jnp.zeros(jnp.shape(x)),
                    (),
                    f'affine:{alpha:g},{beta:g}')


def make_vee(p: VeeParams, interval: Sequence[float]) -> ConvexFn:
    r"""
    Piecewise-linear function through (a, alpha), (t, tau) and (b, beta).

    .. math::

        f(x) = \frac{t-x}{t-a}\alpha + \frac{x-a}{t-a}\tau \quad (x \leq t), \qquad
        f(x) = \frac{b-x}{b-t}\tau + \frac{x-t}{b-t}\beta \quad (x > t)

    Args:
        p: VeeParams.
        interval: Pair (a, b) with a < t < b.

    Returns:
        ConvexFn with a single kink at t.

    """
    a, b = float(interval[0]), float(interval[1])
    check_interval(a, b)
    alpha, tau, beta, t = (float(v) for v in p)
    if not a < t < b:
        raise ValidationError(f'Vee pivot must satisfy a < t < b, received t={t} on [{a}, {b}]')
    if tau > min(alpha, beta):
        raise NotConvexError(f'Vee curve is convex iff tau <= min(alpha, beta), received '
                             f'alpha={alpha}, tau={tau}, beta={beta}')

    def f(x):
        x = jnp.asarray(x)
        left = (t - x) / (t - a) * alpha + (x - a) / (t - a) * tau
        right = (b - x) / (b - t) * tau + (x - t) / (b - t) * beta
        return jnp.where(x <= t, left, right)

    def d1(x):
        return jnp.where(jnp.asarray(x) < t, (tau - alpha) / (t - a), (beta - tau) / (b - t))

    return ConvexFn(f, d1, None, (t,), f'vee:{alpha:g},{tau:g},{beta:g},{t:g}')


def make_pivot_abs(u: float, interval: Optional[Sequence[float]] = None) -> ConvexFn:
    """
    The function x -> |x - u|.

    Args:
        u: Pivot.
        interval: Optional pair (a, b); when given, u must lie in [a, b].

    Returns:
        ConvexFn with kink at u and no second derivative.

    """
    u = float(u)
    if interval is not None and not interval[0] <= u <= interval[1]:
        raise ValidationError(f'Pivot u must lie in [{interval[0]}, {interval[1]}], received {u}')
    return ConvexFn(lambda x: jnp.abs(jnp.asarray(x) - u),
                    lambda x: jnp.where(jnp.asarray(x) < u, -1., 1.),
                    None,
                    (u,),
                    f'abs:{u:g}')


def make_kink_combination(alpha: float,
                          beta: float,
                          terms: Sequence[Tuple[float, float]],
                          interval: Optional[Sequence[float]] = None) -> ConvexFn:
    """
    The function x -> alpha x + beta + sum_i c_i |x - u_i| with c_i > 0.

    Args:
        alpha: Slope of the affine part.
        beta: Intercept of the affine part.
        terms: Sequence of (c_i, u_i).
        interval: Optional pair (a, b); when given, every u_i must lie in (a, b).

    Returns:
        ConvexFn with kinks at the u_i.

    """
    alpha, beta = float(alpha), float(beta)
    terms = sorted(((float(c), float(u)) for c, u in terms), key=lambda cu: cu[1])
    for c, u in terms:
        if not c > 0:
            raise NotConvexError(f'Kink coefficients must be positive, received c={c} at u={u}')
        if interval is not None and not interval[0] < u < interval[1]:
            raise ValidationError(f'Kink u must lie in ({interval[0]}, {interval[1]}), received {u}')
    if not terms:
        return make_affine(alpha, beta)._replace(label=f'kinks:{alpha:g},{beta:g}')

    cs = jnp.array([c for c, _ in terms])
    us = jnp.array([u for _, u in terms])

    def f(x):
        x = jnp.asarray(x)
        return alpha * x + beta + jnp.sum(cs * jnp.abs(x[..., None] - us), axis=-1)

    def d1(x):
        x = jnp.asarray(x)
        return alpha + jnp.sum(cs * jnp.where(x[..., None] < us, -1., 1.), axis=-1)

    return ConvexFn(f, d1, None, tuple(u for _, u in terms), f'kinks:{alpha:g},{beta:g},n={len(terms)}')


def d1_or_fd(f: ConvexFn, x: ArrayLike, h: float = FD_STEP) -> jnp.ndarray:
    """
    First derivative, analytic when available, otherwise a central difference.

    Args:
        f: ConvexFn.
        x: Points.
        h: Step of the central difference.

    Returns:
        Array of derivatives.

    """
    x = jnp.asarray(x, dtype=jnp.float64)
    if f.d1 is not None:
        return jnp.asarray(f.d1(x), dtype=jnp.float64)
    return (f.eval(x + h) - f.eval(x - h)) / (2 * h)


def d2_or_fd(f: ConvexFn, x: ArrayLike, h: float = FD_STEP) -> jnp.ndarray:
    """
    Second derivative, analytic when available, otherwise
    (f(x+h) - 2f(x) + f(x-h)) / h^2.

    Args:
        f: ConvexFn.
        x: Points at distance more than h from every kink.
        h: Step of the central difference.

    Returns:
        Array of second derivatives.

    """
    x = jnp.asarray(x, dtype=jnp.float64)
    if f.d2 is not None:
        return jnp.broadcast_to(jnp.asarray(f.d2(x), dtype=jnp.float64), x.shape)
    if f.kinks and bool(jnp.any(jnp.abs(x[..., None] - jnp.asarray(f.kinks)) < h)):
        raise ValidationError(f'Finite difference of {f.label} within h={h} of a kink {f.kinks}')
    return (f.eval(x + h) - 2. * f.eval(x) + f.eval(x - h)) / h ** 2


def check_convex(f: ConvexFn, interval: Sequence[float], n: int = 201, tol: float = CONV_TOL):
    """
    Midpoint-convexity check on all pairs of an n-point grid, plus d2 >= -tol where d2 is supplied.

    Args:
        f: ConvexFn.
        interval: Pair (a, b).
        n: Grid size.
        tol: Tolerance.

    """
    xs = grid(interval[0], interval[1], n)
    fx = f.eval(xs)
    mid = f.eval(0.5 * (xs[:, None] + xs[None, :]))
    gap = mid - 0.5 * (fx[:, None] + fx[None, :])
    worst = float(jnp.max(gap))
    if worst > tol:
        raise NotConvexError(f'{f.label} violates midpoint convexity by {worst:.3e} on {interval}')
    if f.d2 is not None:
        d2 = jnp.asarray(f.d2(xs[1:-1]))
        if float(jnp.min(d2)) < -tol:
            raise NotConvexError(f'{f.label} has negative second derivative {float(jnp.min(d2)):.3e}')


def chord_deviation(f: ConvexFn, interval: Sequence[float], n: int = 1001) -> float:
    """
    Maximum gap between the chord through (a, f(a)), (b, f(b)) and f on a grid.
    Zero (up to rounding) iff f is affine on the grid.

    Args:
        f: ConvexFn.
        interval: Pair (a, b).
        n: Grid size.

    Returns:
        Maximum of chord(x) - f(x).

    """
    a, b = float(interval[0]), float(interval[1])
    xs = grid(a, b, n)
    fa, fb = f.eval(jnp.asarray(a)), f.eval(jnp.asarray(b))
    chord = (b - xs) / (b - a) * fa + (xs - a) / (b - a) * fb
    return float(jnp.max(chord - f.eval(xs)))


def fit_kink_combination(f: ConvexFn,
                         interval: Sequence[float],
                         n_terms: int = 20,
                         n_grid: int = 2001) -> ConvexFn:
    """
    Least-squares fit of alpha x + beta + sum_i c_i |x - u_i| to f with equispaced knots
    u_i = a + i (b - a) / (n_terms + 1).

    Args:
        f: ConvexFn to approximate.
        interval: Pair (a, b).
        n_terms: Number of kink terms.
        n_grid: Number of least-squares sample points.

    Returns:
        Fitted ConvexFn (raises NotConvexError if a fitted coefficient is not positive).

    """
    a, b = float(interval[0]), float(interval[1])
    check_interval(a, b)
    xs = grid(a, b, n_grid)
    knots = a + (b - a) * jnp.arange(1, n_terms + 1) / (n_terms + 1)
    design = jnp.concatenate([xs[:, None], jnp.ones((n_grid, 1)), jnp.abs(xs[:, None] - knots[None, :])], axis=1)
    coeffs, _, _, _ = jnp.linalg.lstsq(design, f.eval(xs))
    terms = [(float(c), float(u)) for c, u in zip(coeffs[2:], knots)]
    fitted = make_kink_combination(float(coeffs[0]), float(coeffs[1]), terms, (a, b))
    logger.debug('kink fit of %s with %d terms: sup error %.3e', f.label, n_terms,
                 float(jnp.max(jnp.abs(fitted.eval(xs) - f.eval(xs)))))
    return fitted


def _bump(r: jnp.ndarray) -> jnp.ndarray:
    inside = jnp.abs(r) < 1.
    r2 = jnp.where(inside, r * r, 0.)
    return jnp.where(inside, jnp.exp(-1. / (1. - r2)), 0.)


_bump_grad = jax.vmap(jax.grad(_bump))


def _bump_derivative(r: jnp.ndarray) -> jnp.ndarray:
    r = jnp.asarray(r, dtype=jnp.float64)
    return _bump_grad(r.reshape(-1)).reshape(r.shape)


@lru_cache(maxsize=1)
def _bump_normalizer() -> float:
    return 1. / integrate(_bump, -1., 1.).value


def mollify(f: ConvexFn,
            eps: float,
            interval: Sequence[float],
            cfg: Optional[QuadConfig] = None) -> ConvexFn:
    """
    Smooth convex approximation with sup-norm distance at most eps on [a, b].
    f is continued linearly beyond [a, b] with its one-sided end slopes and convolved with a
    compactly supported bump of half-width eps / L, L the largest end slope in absolute value.

    Args:
        f: ConvexFn.
        eps: Target sup-norm distance, positive.
        interval: Pair (a, b).
        cfg: Quadrature configuration of the convolution integrals.

    Returns:
        ConvexFn with analytic-by-quadrature d1 and d2 and no kinks.

    """
    a, b = float(interval[0]), float(interval[1])
    check_interval(a, b)
    if not (math.isfinite(eps) and eps > 0):
        raise ValidationError(f'mollify requires eps > 0, received {eps}')

    h = FD_STEP * (b - a)
    if f.d1 is not None:
        slope_a, slope_b = float(f.d1(jnp.asarray(a))), float(f.d1(jnp.asarray(b)))
    else:
        slope_a = float((f.eval(jnp.asarray(a + h)) - f.eval(jnp.asarray(a))) / h)
        slope_b = float((f.eval(jnp.asarray(b)) - f.eval(jnp.asarray(b - h))) / h)
    if not (math.isfinite(slope_a) and math.isfinite(slope_b)):
        raise ValidationError(f'{f.label} has an infinite end slope on [{a}, {b}], cannot be continued')
    fa, fb = float(f.eval(jnp.asarray(a))), float(f.eval(jnp.asarray(b)))

    lipschitz = max(abs(slope_a), abs(slope_b))
    width = min(eps / lipschitz, b - a) if lipschitz > 0 else b - a
    if width < _MIN_KERNEL_WIDTH * (b - a):
        raise NumericFailure(f'Kernel half-width {width:.3e} for eps={eps} underflows the grid of [{a}, {b}]')
    norm = _bump_normalizer()
    kinks = tuple(sorted(set(f.kinks) | {a, b}))

    def extended(y):
        inner = f.eval(jnp.clip(y, a, b))
        return jnp.where(y < a, fa + slope_a * (y - a), jnp.where(y > b, fb + slope_b * (y - b), inner))

    def extended_d1(y):
        inner_y = jnp.clip(y, a, b) if f.d1 is not None else jnp.clip(y, a + h, b - h)
        inner = d1_or_fd(f, inner_y, h)
        return jnp.where(y < a, slope_a, jnp.where(y > b, slope_b, inner))

    def convolve(g, kernel, x):
        x = jnp.asarray(x, dtype=jnp.float64)
        flat = x.reshape(-1)
        res = integrate_batch(lambda y, p: g(y) * kernel((p - y) / width),
                              flat - width, flat + width, cfg, kinks=kinks, params=flat)
        return res.values.reshape(x.shape)

    def f_hat(x):
        return convolve(extended, _bump, x) * norm / width

    def d1_hat(x):
        return convolve(extended, _bump_derivative, x) * norm / width ** 2

    def d2_hat(x):
        return convolve(extended_d1, _bump_derivative, x) * norm / width ** 2

    logger.debug('mollify %s: eps=%g, kernel half-width %.3e', f.label, eps, width)
    return ConvexFn(f_hat, d1_hat, d2_hat, (), f'mollify({f.label},{eps:g})')
