from __future__ import annotations
from typing import IO, Callable, NamedTuple, Optional, Tuple, Union
import csv
import logging
import warnings

from jax import numpy as jnp

from hhjax.bounds import th_weights
from hhjax.measure import Measure, CLOSED, cdf, mean, partial_deficit, partial_moments, make_discrete, parse_measure
from hhjax.quad import QuadConfig, integrate_batch, integrate_stieltjes
from hhjax.utils import (ValidationError, NumericFailure, AssumptionWarning, ArrayLike,
                         MASS_TOL, PHI_TOL, WEIGHT_TOL, check_pivot, check_in_interval, grid, format_float)

logger = logging.getLogger(__name__)

KINDS = ('J', 'H', 'TH')
DIRECTIONS = ('lower', 'upper')

CROSS_CHECK_TOL = 1e-8
MIN_DOMINANCE_GRID = 16


class InequalitySpec(NamedTuple):
    """
    Pair of measures (G, H) with ∫ f dG >= ∫ f dH (direction ``'lower'``) or
    ∫ f dG <= ∫ f dH (direction ``'upper'``) for every convex f.

    Attributes:
        kind: ``'J'``, ``'H'``, ``'TH'`` or ``'custom'``.
        g: Primary measure.
        h: Second measure.
        direction: ``'lower'`` or ``'upper'``.
        t: Pivot of the tight bound, None for other kinds.
    """
    kind: str
    g: Measure
    h: Measure
    direction: str
    t: Optional[float]


class MomentDiagnostic(NamedTuple):
    mass_gap: float
    mean_gap: float
    passed: bool


class KaramataCurve(NamedTuple):
    spec: InequalitySpec
    grid: jnp.ndarray
    phi: jnp.ndarray
    grid_n: int


def _check_kind(kind: str):
    if kind not in KINDS:
        raise ValidationError(f'Unknown inequality kind {kind!r}, expected one of {KINDS}')


def second_measure(kind: str, measure: Measure, t: Optional[float] = None,
                   cfg: Optional[QuadConfig] = None) -> Measure:
    """
    Discrete measure H for which the inequality of the given kind reads ∫ f dG vs ∫ f dH:
    a unit mass at the mean (J), masses at a and b (H), masses at a, t and b (TH).

    Args:
        kind: ``'J'``, ``'H'`` or ``'TH'``.
        measure: Primary measure G.
        t: Pivot, required for TH.
        cfg: Quadrature configuration.

    Returns:
        Purely atomic Measure on the interval of G.

    """
    _check_kind(kind)
    a, b = measure.interval
    if kind == 'J':
        atoms = [(mean(measure, cfg), 1.)]
    elif kind == 'H':
        c = mean(measure, cfg)
        atoms = [(a, (b - c) / (b - a)), (b, (c - a) / (b - a))]
    else:
        if t is None:
            raise ValidationError('The tight inequality needs a pivot t')
        w = th_weights(measure, t, cfg)
        if w.p_a <= WEIGHT_TOL or w.p_b <= WEIGHT_TOL:
            msg = f'Degenerate end weights p_a={w.p_a:.3e}, p_b={w.p_b:.3e} for pivot t={t}'
            logger.warning(msg)
            warnings.warn(msg, AssumptionWarning, stacklevel=2)
        atoms = [(a, w.p_a), (w.t, w.p_t), (b, w.p_b)]
    atoms = [(x, p) for x, p in atoms if p > WEIGHT_TOL]
    h = make_discrete(atoms, interval=(a, b))
    return h._replace(label=f'{kind}-second({measure.label})')


def check_moment_conditions(g: Measure, h: Measure, tol: float = MASS_TOL,
                            cfg: Optional[QuadConfig] = None) -> MomentDiagnostic:
    """
    Compares total masses and means of two measures.

    Args:
        g: First measure.
        h: Second measure.
        tol: Tolerance on both gaps.
        cfg: Quadrature configuration.

    Returns:
        MomentDiagnostic, passed iff both gaps are at most tol.

    """
    mass_g, first_g = (float(v[0]) for v in partial_moments(g, g.interval.a, g.interval.b, CLOSED, cfg))
    mass_h, first_h = (float(v[0]) for v in partial_moments(h, h.interval.a, h.interval.b, CLOSED, cfg))
    mass_gap, mean_gap = abs(mass_g - mass_h), abs(first_g - first_h)
    return MomentDiagnostic(mass_gap, mean_gap, mass_gap <= tol and mean_gap <= tol)


def make_inequality(kind: str, measure: Measure, t: Optional[float] = None, tol: float = MASS_TOL,
                    cfg: Optional[QuadConfig] = None) -> InequalitySpec:
    """
    Builds the J, H or TH inequality of a measure.

    Args:
        kind: ``'J'``, ``'H'`` or ``'TH'``.
        measure: Primary measure.
        t: Pivot in (a, b), required for TH and ignored otherwise.
        tol: Tolerance of the moment conditions.
        cfg: Quadrature configuration.

    Returns:
        InequalitySpec.

    """
    _check_kind(kind)
    if kind == 'TH':
        if t is None:
            raise ValidationError('The tight inequality needs a pivot t')
        t = float(t)
        check_pivot(t, *measure.interval)
    else:
        t = None
    h = second_measure(kind, measure, t, cfg)
    moments = check_moment_conditions(measure, h, tol, cfg)
    if not moments.passed:
        raise NumericFailure(f'Second measure of {kind} breaks the moment conditions: {moments}')
    return InequalitySpec(kind, measure, h, 'lower' if kind == 'J' else 'upper', t)


def make_custom_inequality(g: Measure, h: Measure, direction: str, tol: float = MASS_TOL,
                           strict: bool = True, cfg: Optional[QuadConfig] = None) -> InequalitySpec:
    """
    Builds an inequality from an arbitrary pair of measures on the same interval.

    Args:
        g: Primary measure.
        h: Second measure.
        direction: ``'lower'`` or ``'upper'``.
        tol: Tolerance of the moment conditions.
        strict: Raise on failed moment conditions, otherwise warn.
        cfg: Quadrature configuration.

    Returns:
        InequalitySpec of kind ``'custom'``.

    """
    if direction not in DIRECTIONS:
        raise ValidationError(f'Unknown direction {direction!r}, expected one of {DIRECTIONS}')
    if g.interval != h.interval:
        raise ValidationError(f'Measures must share an interval, received {g.interval} and {h.interval}')
    moments = check_moment_conditions(g, h, tol, cfg)
    if not moments.passed:
        msg = (f'Measures {g.label!r} and {h.label!r} differ in mass by {moments.mass_gap:.3e} '
               f'and in mean by {moments.mean_gap:.3e}')
        if strict:
            raise ValidationError(msg)
        logger.warning(msg)
        warnings.warn(msg, AssumptionWarning, stacklevel=2)
    return InequalitySpec('custom', g, h, direction, None)


def parse_inequality(text: str, default_t: Optional[float] = None) -> InequalitySpec:
    """
    Parses ``KIND:measure[:t]``, e.g. ``'H:beta22'`` or ``'TH:uniform:0.5'``.
    A TH pivot defaults to ``default_t`` or the midpoint of the interval.

    Args:
        text: Inequality string.
        default_t: Pivot used when a TH string gives none.

    Returns:
        InequalitySpec.

    """
    kind, sep, rest = text.strip().partition(':')
    if not sep:
        raise ValidationError(f'Cannot parse inequality {text!r}, expected KIND:measure[:t]')
    _check_kind(kind)
    t = None
    try:
        measure = parse_measure(rest)
    except ValidationError:
        # a trailing pivot is only split off when the whole remainder is not a measure
        head, sep, tail = rest.rpartition(':')
        if kind != 'TH' or not sep:
            raise
        try:
            t = float(tail)
        except ValueError:
            raise ValidationError(f'Cannot parse inequality {text!r}, expected KIND:measure[:t]')
        measure = parse_measure(head)
    if kind == 'TH' and t is None:
        t = default_t if default_t is not None else 0.5 * sum(measure.interval)
    return make_inequality(kind, measure, t)


def _sign(spec: InequalitySpec) -> float:
    return 1. if spec.direction == 'lower' else -1.


def phi_kinks(spec: InequalitySpec) -> Tuple[float, ...]:
    """
    Sorted points where φ may fail to be smooth: atoms of both measures and the pivot.
    """
    points = {at.x for at in spec.g.atoms} | {at.x for at in spec.h.atoms}
    if spec.t is not None:
        points.add(spec.t)
    return tuple(sorted(points))


def karamata_phi_generic(spec: InequalitySpec, u: ArrayLike, cfg: Optional[QuadConfig] = None) -> jnp.ndarray:
    """
    Computes φ(u) = ±∫_a^u (G(x) - H(x)) dx by quadrature of the difference of distribution functions,
    oriented so that the inequality holds for every convex f iff φ >= 0.

    Args:
        spec: InequalitySpec.
        u: Scalar or array of points in [a, b].
        cfg: Quadrature configuration.

    Returns:
        Array with the shape of ``u``.

    """
    a, b = spec.g.interval
    check_in_interval(u, a, b, 'u')
    flat = jnp.asarray(u, dtype=jnp.float64).reshape(-1)
    sign = _sign(spec)
    res = integrate_batch(lambda x: sign * (cdf(spec.g, x, cfg) - cdf(spec.h, x, cfg)),
                          jnp.full(flat.shape, a), flat, cfg, kinks=phi_kinks(spec))
    return res.values.reshape(jnp.shape(u))


def _closed_evaluator(kind: str, measure: Measure, t: Optional[float], cfg: Optional[QuadConfig]) -> Callable:
    _check_kind(kind)
    a, b = measure.interval
    if kind == 'J':
        c = mean(measure, cfg)
        return lambda u: partial_deficit(measure, u, cfg) - jnp.where(u >= c, u - c, 0.)
    if kind == 'H':
        c = mean(measure, cfg)
        return lambda u: (u - a) * (b - c) / (b - a) - partial_deficit(measure, u, cfg)
    if t is None:
        raise ValidationError('The tight inequality needs a pivot t')
    w = th_weights(measure, t, cfg)
    return lambda u: w.p_a * (u - a) + jnp.where(u <= w.t, 0., w.p_t * (u - w.t)) - partial_deficit(measure, u, cfg)


def karamata_phi_closed(kind: str,
                        measure: Measure,
                        u: ArrayLike,
                        t: Optional[float] = None,
                        cfg: Optional[QuadConfig] = None) -> jnp.ndarray:
    """
    φ(u) of the J, H and TH inequalities from partial moments of the primary measure,
    with D(u) = ∫_[a,u] (u - x) dG(x):

    J: D(u) - (u - c) 1[u >= c];
    H: (u - a)(b - c)/(b - a) - D(u);
    TH: p_a (u - a) + p_t (u - t) 1[u > t] - D(u).

    Args:
        kind: ``'J'``, ``'H'`` or ``'TH'``.
        measure: Primary measure.
        u: Scalar or array of points in [a, b].
        t: Pivot, required for TH.
        cfg: Quadrature configuration.

    Returns:
        Array with the shape of ``u``.

    """
    evaluator = _closed_evaluator(kind, measure, t, cfg)
    check_in_interval(u, *measure.interval, 'u')
    return evaluator(jnp.asarray(u, dtype=jnp.float64))


def phi_evaluator(spec: InequalitySpec, cfg: Optional[QuadConfig] = None) -> Callable[[ArrayLike], jnp.ndarray]:
    """
    Vectorised u -> φ(u), from the closed form when the kind has one and by quadrature otherwise.
    Constants of the closed forms (mean, weights) are computed once.
    """
    if spec.kind in KINDS:
        closed = _closed_evaluator(spec.kind, spec.g, spec.t, cfg)
        return lambda u: closed(jnp.asarray(u, dtype=jnp.float64))
    return lambda u: karamata_phi_generic(spec, u, cfg)


def karamata_phi(spec: InequalitySpec, u: ArrayLike, cfg: Optional[QuadConfig] = None) -> jnp.ndarray:
    """φ(u) of an inequality, in closed form for J, H and TH and by quadrature otherwise."""
    check_in_interval(u, *spec.g.interval, 'u')
    return phi_evaluator(spec, cfg)(u)


def abs_probe_residual(spec: InequalitySpec, u: float, cfg: Optional[QuadConfig] = None) -> float:
    """
    Computes ±(∫ |x - u| dG(x) - ∫ |x - u| dH(x)), oriented as φ. Equals 2 φ(u).

    Args:
        spec: InequalitySpec.
        u: Point in [a, b].
        cfg: Quadrature configuration.

    Returns:
        Residual of the probe |x - u|.

    """
    a, b = spec.g.interval
    u = float(u)
    check_in_interval(u, a, b, 'u')

    def probe(x):
        return jnp.abs(x - u)

    on_g = integrate_stieltjes(probe, spec.g, a, b, CLOSED, cfg, kinks=(u,)).value
    on_h = integrate_stieltjes(probe, spec.h, a, b, CLOSED, cfg, kinks=(u,)).value
    return _sign(spec) * (on_g - on_h)


def dominance_test(spec: InequalitySpec, grid_n: int = 1001, tol: float = PHI_TOL,
                   cfg: Optional[QuadConfig] = None) -> bool:
    """
    Checks φ >= -tol on a uniform grid and |φ(b)| <= tol, i.e. that the inequality holds for every
    convex function (the endpoint condition carries the equal-means requirement).

    Args:
        spec: InequalitySpec.
        grid_n: Number of grid points, at least 16.
        tol: Tolerance.
        cfg: Quadrature configuration.

    Returns:
        True iff the minimum of φ over the grid is at least -tol and φ vanishes at b.

    """
    if grid_n < MIN_DOMINANCE_GRID:
        raise ValidationError(f'dominance_test needs grid_n >= {MIN_DOMINANCE_GRID}, received {grid_n}')
    us = grid(*spec.g.interval, grid_n)
    phi = karamata_phi(spec, us, cfg)
    low = float(jnp.min(phi))
    logger.info('dominance of %s/%s: min phi = %.3e at u = %.6g',
                spec.kind, spec.g.label, low, float(us[int(jnp.argmin(phi))]))
    return low >= -tol and abs(float(phi[-1])) <= tol


def sample_curve(spec: InequalitySpec, grid_n: int, cfg: Optional[QuadConfig] = None,
                 cross_check: bool = True) -> KaramataCurve:
    """
    Samples φ on a uniform grid including a and b. Closed-form values are cross-checked
    against the generic quadrature.

    Args:
        spec: InequalitySpec.
        grid_n: Number of grid points, at least 2.
        cfg: Quadrature configuration.
        cross_check: Compare closed and generic values.

    Returns:
        KaramataCurve.

    """
    us = grid(*spec.g.interval, grid_n)
    phi = karamata_phi(spec, us, cfg)
    if cross_check and spec.kind in KINDS:
        deviation = float(jnp.max(jnp.abs(phi - karamata_phi_generic(spec, us, cfg))))
        logger.debug('curve %s/%s: closed vs generic deviation %.3e', spec.kind, spec.g.label, deviation)
        if deviation > CROSS_CHECK_TOL:
            raise NumericFailure(f'Closed-form and generic φ disagree by {deviation:.3e}',
                                 error_estimate=deviation)
    return KaramataCurve(spec, us, phi, grid_n)


def curve_filename(curve: KaramataCurve) -> str:
    return f'{curve.spec.kind}_{curve.spec.g.label}_{curve.grid_n}.csv'


def write_curve_csv(curve: KaramataCurve, target: Union[str, IO[str]]):
    """
    Writes a curve as CSV with header ``u,phi`` and 17 significant digits.

    Args:
        curve: KaramataCurve.
        target: Path or open text stream.

    """
    if isinstance(target, str):
        with open(target, 'w', newline='') as stream:
            write_curve_csv(curve, stream)
        return
    writer = csv.writer(target, lineterminator='\n')
    writer.writerow(['u', 'phi'])
    for u, phi in zip(curve.grid.tolist(), curve.phi.tolist()):
        writer.writerow([format_float(u), format_float(phi)])


def curve_area(curve: KaramataCurve) -> float:
    """
    Trapezoidal area under a sampled curve.
    """
    du = jnp.diff(curve.grid)
    return float(jnp.sum(0.5 * du * (curve.phi[1:] + curve.phi[:-1])))
