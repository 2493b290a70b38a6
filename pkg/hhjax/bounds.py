from __future__ import annotations
from typing import NamedTuple, Optional, Sequence, Tuple
import logging
import math
import warnings

from jax import numpy as jnp

from hhjax.convex import ConvexFn, chord_deviation, d1_or_fd
from hhjax.measure import Measure, CLOSED, cdf, mean, partial_deficit, partial_excess, is_three_point_admissible
from hhjax.quad import QuadConfig, integrate_stieltjes
from hhjax.utils import (ValidationError, NumericFailure, AssumptionWarning, ArrayLike,
                         WEIGHT_TOL, check_pivot, check_interval)

logger = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2

ORDER_TOL = 1e-9


class ThreePointWeights(NamedTuple):
    p_a: float
    p_t: float
    p_b: float
    t: float


class BoundsResult(NamedTuple):
    jensen_lower: float
    integral: float
    h_upper: float
    th_upper: float
    t: float


class OptimalPivot(NamedTuple):
    t_star: float
    d_star: float


def _fval(f: ConvexFn, x: float) -> float:
    return float(f.eval(jnp.asarray(x, dtype=jnp.float64)))


def expectation(measure: Measure, f: ConvexFn, cfg: Optional[QuadConfig] = None) -> float:
    """
    Computes ∫ f dG over [a, b].

    Args:
        measure: Measure.
        f: ConvexFn (its kinks are used as quadrature breakpoints).
        cfg: Quadrature configuration.

    Returns:
        Integral.

    """
    a, b = measure.interval
    return integrate_stieltjes(f.eval, measure, a, b, CLOSED, cfg, kinks=f.kinks).value


def jensen_lower(measure: Measure, f: ConvexFn, cfg: Optional[QuadConfig] = None) -> float:
    """
    Jensen lower bound f(∫ x dG(x)).

    Args:
        measure: Measure.
        f: Convex function.
        cfg: Quadrature configuration.

    Returns:
        f evaluated at the mean.

    """
    return _fval(f, mean(measure, cfg))


def h_upper(measure: Measure, f: ConvexFn, cfg: Optional[QuadConfig] = None) -> float:
    """
    Classical Hermite-Hadamard upper bound
    (b - c)/(b - a) f(a) + (c - a)/(b - a) f(b) with c the mean.

    Args:
        measure: Measure.
        f: Convex function.
        cfg: Quadrature configuration.

    Returns:
        Upper bound.

    """
    a, b = measure.interval
    c = mean(measure, cfg)
    return (b - c) / (b - a) * _fval(f, a) + (c - a) / (b - a) * _fval(f, b)


def _weights_arrays(measure: Measure, t: jnp.ndarray, cfg: Optional[QuadConfig]):
    a, b = measure.interval
    deficit = partial_deficit(measure, t, cfg)
    excess = partial_excess(measure, t, cfg)
    g_t = cdf(measure, t, cfg)
    p_a = deficit / (t - a)
    p_b = excess / (b - t)
    left = ((t - a) * g_t - deficit) / (t - a)
    right = ((b - t) * (1. - g_t) - excess) / (b - t)
    return p_a, left + right, p_b


def th_weights(measure: Measure, t: float, cfg: Optional[QuadConfig] = None) -> ThreePointWeights:
    """
    Weights of the three-point bound at a, t and b:
    p_a = ∫_[a,t] (t-x) dG / (t-a), p_b = ∫_(t,b] (x-t) dG / (b-t),
    p_t = ∫_[a,t] (x-a) dG / (t-a) + ∫_(t,b] (b-x) dG / (b-t).

    Args:
        measure: Measure.
        t: Pivot in (a, b).
        cfg: Quadrature configuration.

    Returns:
        ThreePointWeights.

    """
    a, b = measure.interval
    t = float(t)
    check_pivot(t, a, b)
    p_a, p_t, p_b = (float(v) for v in _weights_arrays(measure, jnp.asarray(t), cfg))
    total = p_a + p_t + p_b
    if abs(total - 1.) > WEIGHT_TOL:
        raise NumericFailure(f'Three-point weights sum to {total}, not 1', total, abs(total - 1.))
    return ThreePointWeights(p_a, p_t, p_b, t)


def _warn_if_concentrated(measure: Measure):
    if not is_three_point_admissible(measure):
        msg = (f'Measure {measure.label!r} is concentrated on at most two points; '
               f'the tight bound is valid but strict improvement statements do not apply')
        logger.warning(msg)
        warnings.warn(msg, AssumptionWarning, stacklevel=3)


def th_upper(measure: Measure, f: ConvexFn, t: float, cfg: Optional[QuadConfig] = None) -> float:
    """
    Tight Hermite-Hadamard upper bound p_a f(a) + p_t f(t) + p_b f(b).

    Args:
        measure: Measure (warns if concentrated on at most two points).
        f: Convex function.
        t: Pivot in (a, b).
        cfg: Quadrature configuration.

    Returns:
        Upper bound.

    """
    _warn_if_concentrated(measure)
    a, b = measure.interval
    w = th_weights(measure, t, cfg)
    return w.p_a * _fval(f, a) + w.p_t * _fval(f, w.t) + w.p_b * _fval(f, b)


def th_upper_form2(measure: Measure, f: ConvexFn, t: float, cfg: Optional[QuadConfig] = None) -> float:
    """
    Tight bound written as the classical bound plus a correction,
    H + (f(t) - lambda f(a) - (1 - lambda) f(b)) p_t with lambda = (b - t)/(b - a).

    Args:
        measure: Measure.
        f: Convex function.
        t: Pivot in (a, b).
        cfg: Quadrature configuration.

    Returns:
        Upper bound, equal to ``th_upper``.

    """
    a, b = measure.interval
    w = th_weights(measure, t, cfg)
    lam = (b - w.t) / (b - a)
    fa, fb, ft = _fval(f, a), _fval(f, b), _fval(f, w.t)
    return h_upper(measure, f, cfg) + (ft - lam * fa - (1. - lam) * fb) * w.p_t


def th_upper_discrete(points: Sequence[Tuple[float, float]], f: ConvexFn, t: float) -> float:
    """
    Tight bound for a purely discrete measure on [x_0, x_n] as an explicit finite sum.

    Args:
        points: Sequence of (x_i, p_i) with positive weights summing to one.
        f: Convex function.
        t: Pivot in (x_0, x_n).

    Returns:
        Upper bound.

    """
    points = sorted((float(x), float(p)) for x, p in points)
    x0, xn = points[0][0], points[-1][0]
    check_pivot(t, x0, xn)
    f0, fn, ft = _fval(f, x0), _fval(f, xn), _fval(f, t)
    s = math.fsum(p * x for x, p in points)
    correction = (math.fsum(p * (x - x0) for x, p in points if x <= t) / (t - x0)
                  + math.fsum(p * (xn - x) for x, p in points if x > t) / (xn - t))
    return ((xn - s) / (xn - x0) * f0 + (s - x0) / (xn - x0) * fn
            + (ft - (xn - t) / (xn - x0) * f0 - (t - x0) / (xn - x0) * fn) * correction)


def triangle_weight(x: ArrayLike, t: float, interval: Sequence[float]) -> jnp.ndarray:
    """
    Triangular curve through (a, 0), (t, 1), (b, 0), vanishing outside [a, b].

    Args:
        x: Points.
        t: Pivot in (a, b).
        interval: Pair (a, b).

    Returns:
        Array of weights.

    """
    a, b = float(interval[0]), float(interval[1])
    check_pivot(t, a, b)
    x = jnp.asarray(x, dtype=jnp.float64)
    lam = (b - t) / (b - a)
    num = jnp.where((x >= a) & (x <= t), lam * (x - a), 0.) + jnp.where((x > t) & (x <= b), (1. - lam) * (b - x), 0.)
    return num / (lam * (1. - lam) * (b - a))


def expected_triangle(measure: Measure, t: float, cfg: Optional[QuadConfig] = None) -> float:
    """
    E g(X) for the triangular curve g with peak at t. Equals the middle weight p_t.

    Args:
        measure: Measure.
        t: Pivot in (a, b).
        cfg: Quadrature configuration.

    Returns:
        Expectation.

    """
    a, b = measure.interval
    return integrate_stieltjes(lambda x: triangle_weight(x, t, (a, b)), measure, a, b, CLOSED, cfg, kinks=(t,)).value


def pivot_gap(measure: Measure, f: ConvexFn, t: float, cfg: Optional[QuadConfig] = None) -> float:
    """
    D(lambda(t)) = R_TH - R_H = (f(t) - lambda f(a) - (1 - lambda) f(b)) E g(X).

    Args:
        measure: Measure.
        f: Convex function.
        t: Pivot in (a, b).
        cfg: Quadrature configuration.

    Returns:
        Non-positive difference of the tight and the classical residual.

    """
    a, b = measure.interval
    lam = (b - t) / (b - a)
    return (_fval(f, t) - lam * _fval(f, a) - (1. - lam) * _fval(f, b)) * expected_triangle(measure, t, cfg)


def _gaps(measure: Measure, f: ConvexFn, ts: jnp.ndarray, h_value: float, cfg: Optional[QuadConfig]) -> jnp.ndarray:
    a, b = measure.interval
    p_a, p_t, p_b = _weights_arrays(measure, ts, cfg)
    return p_a * _fval(f, a) + p_t * f.eval(ts) + p_b * _fval(f, b) - h_value


def optimal_pivot(measure: Measure,
                  f: ConvexFn,
                  method: str = 'golden',
                  cfg: Optional[QuadConfig] = None,
                  grid_n: int = 64,
                  tol: float = 1e-8) -> OptimalPivot:
    """
    Pivot minimising D(lambda(t)) = th_upper - h_upper over (a, b): a coarse grid search
    followed (for ``method='golden'``) by golden-section refinement around the best grid point.

    Args:
        measure: Measure.
        f: Convex function.
        method: ``'golden'`` or ``'grid'``.
        cfg: Quadrature configuration.
        grid_n: Number of interior grid points.
        tol: Target bracket width of the refinement.

    Returns:
        OptimalPivot(t_star, d_star). For affine f, D vanishes and t_star = (a + b)/2.

    """
    if method not in ('golden', 'grid'):
        raise ValidationError(f'Unknown optimal pivot method {method!r}, expected \'golden\' or \'grid\'')
    a, b = measure.interval
    scale = max(1., abs(_fval(f, a)), abs(_fval(f, b)))
    if chord_deviation(f, (a, b)) <= 1e-12 * scale:
        logger.info('optimal pivot: %s is affine, D vanishes identically', f.label)
        return OptimalPivot(0.5 * (a + b), 0.)

    h_value = h_upper(measure, f, cfg)
    ts = jnp.linspace(a, b, grid_n + 2)[1:-1]
    gaps = _gaps(measure, f, ts, h_value, cfg)
    best = int(jnp.argmin(gaps))
    if method == 'grid':
        return OptimalPivot(float(ts[best]), float(gaps[best]))

    lo = float(ts[best - 1]) if best > 0 else a + 0.5 * (float(ts[0]) - a)
    hi = float(ts[best + 1]) if best < grid_n - 1 else b - 0.5 * (b - float(ts[-1]))
    logger.info('optimal pivot: grid minimum at t=%.6g, refining in [%.6g, %.6g]', float(ts[best]), lo, hi)

    def gap(t):
        return float(_gaps(measure, f, jnp.asarray([t]), h_value, cfg)[0])

    width = hi - lo
    c = lo + INV_PHI_SQUARE * width
    d = lo + INV_PHI * width
    gc, gd = gap(c), gap(d)
    while width > tol:
        if gc < gd:
            hi, d, gd = d, c, gc
            width = INV_PHI * width
            c = lo + INV_PHI_SQUARE * width
            gc = gap(c)
        else:
            lo, c, gc = c, d, gd
            width = INV_PHI * width
            d = lo + INV_PHI * width
            gd = gap(d)

    t_star = 0.5 * (lo + hi)
    result = OptimalPivot(t_star, gap(t_star))
    if result.d_star > float(gaps[best]):
        result = OptimalPivot(float(ts[best]), float(gaps[best]))
    logger.info('optimal pivot: t*=%.10g, D=%.6e', result.t_star, result.d_star)
    return result


def stationary_pivot(f: ConvexFn, interval: Sequence[float], tol: float = 1e-14) -> float:
    """
    Solves f'(t) = (f(b) - f(a))/(b - a) by bisection, the optimal pivot for the uniform measure.

    Args:
        f: Convex function with (or without, then finite differences) first derivative.
        interval: Pair (a, b).
        tol: Bracket width at which bisection stops.

    Returns:
        Stationary point (the midpoint when f is affine).

    """
    a, b = float(interval[0]), float(interval[1])
    check_interval(a, b)
    slope = (_fval(f, b) - _fval(f, a)) / (b - a)

    def excess_slope(t):
        return float(d1_or_fd(f, jnp.asarray(t))) - slope

    lo, hi = a, b
    if not (excess_slope(lo) < 0 < excess_slope(hi)):
        return 0.5 * (a + b)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if excess_slope(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def all_bounds(measure: Measure,
               f: ConvexFn,
               t: Optional[float] = None,
               cfg: Optional[QuadConfig] = None) -> BoundsResult:
    """
    Jensen lower bound, the integral, the classical and the tight upper bound,
    with the ordering jensen <= integral <= tight <= classical checked.

    Args:
        measure: Measure.
        f: Convex function.
        t: Pivot, defaults to (a + b)/2.
        cfg: Quadrature configuration.

    Returns:
        BoundsResult.

    """
    a, b = measure.interval
    t = 0.5 * (a + b) if t is None else float(t)
    check_pivot(t, a, b)
    result = BoundsResult(jensen_lower(measure, f, cfg),
                          expectation(measure, f, cfg),
                          h_upper(measure, f, cfg),
                          th_upper(measure, f, t, cfg),
                          t)
    tol = ORDER_TOL * max(1., *(abs(v) for v in result[:4]))
    chain = (result.jensen_lower, result.integral, result.th_upper, result.h_upper)
    if any(lower > upper + tol for lower, upper in zip(chain, chain[1:])):
        logger.warning('bound ordering violated for %s under %s: %s', f.label, measure.label, result)
        raise NumericFailure(f'Bound ordering jensen <= integral <= tight <= classical violated: {result}')
    return result
