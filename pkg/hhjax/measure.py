from __future__ import annotations
from typing import Callable, NamedTuple, Optional, Sequence, Tuple, Mapping, Any
import logging
import math
import re

from jax import numpy as jnp

from hhjax.quad import QuadConfig, integrate_batch, integrate_stieltjes_batch
from hhjax.utils import ValidationError, ArrayLike, MASS_TOL, check_interval, check_in_interval, grid

logger = logging.getLogger(__name__)

RealFunction = Callable[[jnp.ndarray], jnp.ndarray]


class Interval(NamedTuple):
    a: float
    b: float


class Atom(NamedTuple):
    x: float
    p: float


class HalfOpenSpec(NamedTuple):
    lower_closed: bool
    upper_closed: bool


CLOSED = HalfOpenSpec(True, True)
OPEN_CLOSED = HalfOpenSpec(False, True)


class Measure(NamedTuple):
    """
    Probability measure on a compact interval: a continuous part with density
    plus finitely many atoms.

    Attributes:
        interval: Support interval [a, b].
        density: Density of the continuous part (integrates to 1 - total atom mass), or None.
        cdf: Closed-form cumulative mass of the continuous part, ``cdf(x) = ∫_a^x density``, or None.
        atoms: Atoms sorted by location.
        label: Name used in reports and file names.
    """
    interval: Interval
    density: Optional[RealFunction]
    cdf: Optional[RealFunction]
    atoms: Tuple[Atom, ...]
    label: str


def _continuous_mass(interval: Interval,
                     density: Optional[RealFunction],
                     cdf: Optional[RealFunction],
                     cfg: Optional[QuadConfig]) -> float:
    a, b = interval
    if cdf is not None:
        return float(cdf(jnp.asarray(b)) - cdf(jnp.asarray(a)))
    if density is not None:
        return float(integrate_batch(density, a, b, cfg).values[0])
    return 0.


_CDF_GRID = 1001


def _check_cdf(interval: Interval, cdf: RealFunction, mass_tol: float):
    a, b = interval
    values = jnp.broadcast_to(jnp.asarray(cdf(grid(a, b, _CDF_GRID)), dtype=jnp.float64), (_CDF_GRID,))
    if not bool(jnp.all(jnp.isfinite(values))):
        raise ValidationError('cdf of the continuous part must be finite on [a, b]')
    start = float(values[0])
    if abs(start) > mass_tol:
        raise ValidationError(f'cdf of the continuous part must vanish at a={a}, received {start}')
    drop = float(jnp.min(jnp.diff(values)))
    if drop < -mass_tol:
        raise ValidationError(f'cdf of the continuous part must be nondecreasing, found a decrease of {-drop:.3e}')


def make_measure(interval: Sequence[float],
                 density: Optional[RealFunction] = None,
                 cdf: Optional[RealFunction] = None,
                 atoms: Sequence[Sequence[float]] = (),
                 label: str = '',
                 mass_tol: float = MASS_TOL,
                 cfg: Optional[QuadConfig] = None) -> Measure:
    """
    Builds and validates a mixed measure.

    Args:
        interval: Pair (a, b).
        density: Vectorised density of the continuous part.
        cdf: Optional closed-form cumulative mass of the continuous part (requires ``density``).
        atoms: Sequence of (x, p) pairs.
        label: Name of the measure.
        mass_tol: Tolerance on the total mass.
        cfg: Quadrature configuration used when the continuous mass has to be integrated.

    Returns:
        Measure.

    """
    a, b = float(interval[0]), float(interval[1])
    check_interval(a, b)
    interval = Interval(a, b)

    if cdf is not None and density is None:
        raise ValidationError('A closed-form cdf requires the density of the continuous part')

    atoms = sorted((Atom(float(x), float(p)) for x, p in atoms), key=lambda at: at.x)
    for at in atoms:
        if not (math.isfinite(at.x) and a <= at.x <= b):
            raise ValidationError(f'Atom location {at.x} outside [{a}, {b}]')
        if not (0. < at.p <= 1. + mass_tol):
            raise ValidationError(f'Atom weight must lie in (0, 1], received {at.p} at x={at.x}')
    for left, right in zip(atoms, atoms[1:]):
        if left.x == right.x:
            raise ValidationError(f'Duplicate atom location {left.x}')

    if cdf is not None:
        _check_cdf(interval, cdf, mass_tol)

    total = _continuous_mass(interval, density, cdf, cfg) + math.fsum(at.p for at in atoms)
    if abs(total - 1.) > mass_tol:
        raise ValidationError(f'Total mass must be 1 within {mass_tol}, received {total}')

    return Measure(interval, density, cdf, tuple(atoms), label)


def make_uniform(interval: Sequence[float] = (0., 1.)) -> Measure:
    """
    Uniform distribution on [a, b].

    Args:
        interval: Pair (a, b).

    Returns:
        Measure with density 1/(b-a) and exact cdf.

    """
    a, b = float(interval[0]), float(interval[1])
    check_interval(a, b)
    return make_measure((a, b),
                        density=lambda x: jnp.full(jnp.shape(x), 1. / (b - a)),
                        cdf=lambda x: (jnp.clip(x, a, b) - a) / (b - a),
                        label='uniform')


def make_beta22(interval: Sequence[float] = (0., 1.)) -> Measure:
    """
    Beta(2, 2) distribution, G(x) = x^2 (3 - 2x) on [0, 1], affinely rescaled to ``interval``.

    Args:
        interval: Pair (a, b), defaults to [0, 1].

    Returns:
        Measure.

    """
    a, b = float(interval[0]), float(interval[1])
    check_interval(a, b)
    w = b - a

    def density(x):
        z = (x - a) / w
        return 6. * z * (1. - z) / w

    def cdf(x):
        z = (jnp.clip(x, a, b) - a) / w
        return z ** 2 * (3. - 2. * z)

    return make_measure((a, b), density=density, cdf=cdf, label='beta22')


def make_trunc_exp(lam: float, interval: Sequence[float] = (0., 1.)) -> Measure:
    """
    Exponential distribution with rate ``lam`` reduced to [0, 1] (affinely rescaled to ``interval``),
    G(x) = (1 - exp(-lam x)) / (1 - exp(-lam)).

    Args:
        lam: Rate, must be positive.
        interval: Pair (a, b), defaults to [0, 1].

    Returns:
        Measure.

    """
    lam = float(lam)
    if not (math.isfinite(lam) and lam > 0):
        raise ValidationError(f'Truncated exponential requires lambda > 0, received {lam}')
    a, b = float(interval[0]), float(interval[1])
    check_interval(a, b)
    w = b - a
    norm = -math.expm1(-lam)

    def density(x):
        z = (x - a) / w
        return lam * jnp.exp(-lam * z) / (norm * w)

    def cdf(x):
        z = (jnp.clip(x, a, b) - a) / w
        return -jnp.expm1(-lam * z) / norm

    return make_measure((a, b), density=density, cdf=cdf, label=f'truncexp{lam:g}')


def make_discrete(points: Sequence[Sequence[float]],
                  interval: Optional[Sequence[float]] = None,
                  mass_tol: float = MASS_TOL) -> Measure:
    """
    Purely atomic measure.

    Args:
        points: Sequence of (x, p) pairs with positive weights summing to one.
        interval: Pair (a, b). Defaults to [min x, max x].
        mass_tol: Tolerance on the weight sum.

    Returns:
        Measure.

    """
    points = [(float(x), float(p)) for x, p in points]
    if not points:
        raise ValidationError('Discrete measure needs at least one atom')
    if interval is None:
        xs = [x for x, _ in points]
        interval = (min(xs), max(xs))
    return make_measure(interval, atoms=points, label='discrete', mass_tol=mass_tol)


def make_mixture(components: Sequence[Measure], weights: Sequence[float], label: str = 'mixture') -> Measure:
    """
    Convex combination of measures on a common interval.

    Args:
        components: Measures sharing the same interval.
        weights: Non-negative weights summing to one.
        label: Name of the mixture.

    Returns:
        Measure.

    """
    if len(components) != len(weights) or not components:
        raise ValidationError('Mixture needs matching, non-empty components and weights')
    interval = components[0].interval
    if any(c.interval != interval for c in components):
        raise ValidationError('Mixture components must share the same interval')
    if any(w < 0 for w in weights):
        raise ValidationError(f'Mixture weights must be non-negative, received {weights}')

    continuous = [(w, c) for w, c in zip(weights, components) if c.density is not None and w > 0]
    density = None
    cdf = None
    if continuous:
        density = lambda x: sum(w * c.density(x) for w, c in continuous)
        if all(c.cdf is not None for _, c in continuous):
            cdf = lambda x: sum(w * c.cdf(x) for w, c in continuous)

    atom_mass = {}
    for w, c in zip(weights, components):
        for at in c.atoms:
            atom_mass[at.x] = atom_mass.get(at.x, 0.) + w * at.p
    atoms = [(x, p) for x, p in atom_mass.items() if p > 0]
    return make_measure(interval, density=density, cdf=cdf, atoms=atoms, label=label)


def is_three_point_admissible(measure: Measure) -> bool:
    """
    Checks that the measure is not concentrated on at most two points,
    as required for strict statements about the tight bound.

    Args:
        measure: Measure.

    Returns:
        False iff the measure has no continuous mass and at most two atoms.

    """
    if measure.density is not None and math.fsum(at.p for at in measure.atoms) < 1. - MASS_TOL:
        return True
    return len(measure.atoms) > 2


def _atom_arrays(measure: Measure) -> Tuple[jnp.ndarray, jnp.ndarray]:
    return (jnp.array([at.x for at in measure.atoms], dtype=jnp.float64),
            jnp.array([at.p for at in measure.atoms], dtype=jnp.float64))


def cdf(measure: Measure, x: ArrayLike, cfg: Optional[QuadConfig] = None) -> jnp.ndarray:
    """
    Distribution function G(x) = mu(-inf, x], right-continuous.

    Args:
        measure: Measure.
        x: Scalar or array of points, may lie outside [a, b].
        cfg: Quadrature configuration used when no closed-form cdf is available.

    Returns:
        Array of probabilities with the shape of ``x``.

    """
    a, b = measure.interval
    x = jnp.asarray(x, dtype=jnp.float64)
    xc = jnp.clip(x, a, b)

    if measure.cdf is not None:
        cont = measure.cdf(xc)
    elif measure.density is not None:
        flat = xc.reshape(-1)
        cont = integrate_batch(measure.density, jnp.full(flat.shape, a), flat, cfg).values.reshape(x.shape)
    else:
        cont = jnp.zeros(x.shape)

    if measure.atoms:
        atom_x, atom_p = _atom_arrays(measure)
        cont = cont + jnp.sum(jnp.where(atom_x <= x[..., None], atom_p, 0.), axis=-1)

    return jnp.where(x < a, 0., jnp.where(x >= b, 1., cont))


def partial_moments(measure: Measure,
                    lo: ArrayLike,
                    hi: ArrayLike,
                    spec: HalfOpenSpec = CLOSED,
                    cfg: Optional[QuadConfig] = None) -> Tuple[jnp.ndarray, jnp.ndarray]:
    """
    Zeroth and first moments of the measure over domains between lo and hi.

    Args:
        measure: Measure.
        lo: Lower limits.
        hi: Upper limits.
        spec: Endpoint closure.
        cfg: Quadrature configuration.

    Returns:
        Tuple (mass, first moment) of arrays.

    """
    mass = integrate_stieltjes_batch(lambda x: jnp.ones_like(x), measure, lo, hi, spec, cfg).values
    first = integrate_stieltjes_batch(lambda x: x, measure, lo, hi, spec, cfg).values
    return mass, first


def mean(measure: Measure, cfg: Optional[QuadConfig] = None) -> float:
    """
    Mean c = ∫ x dG(x).

    Args:
        measure: Measure.
        cfg: Quadrature configuration.

    Returns:
        Mean.

    """
    a, b = measure.interval
    return float(integrate_stieltjes_batch(lambda x: x, measure, a, b, CLOSED, cfg).values[0])


def _reshape_like(values: jnp.ndarray, u) -> jnp.ndarray:
    return values.reshape(jnp.shape(u))


def partial_deficit(measure: Measure, u: ArrayLike, cfg: Optional[QuadConfig] = None) -> jnp.ndarray:
    """
    Computes ∫_[a,u] (u - x) dG(x) (equivalently ∫_a^u G(x) dx).

    Args:
        measure: Measure.
        u: Scalar or array of points in [a, b].
        cfg: Quadrature configuration.

    Returns:
        Array with the shape of ``u``.

    """
    a, b = measure.interval
    check_in_interval(u, a, b, 'u')
    flat = jnp.asarray(u, dtype=jnp.float64).reshape(-1)
    res = integrate_stieltjes_batch(lambda x, p: p - x, measure, a, flat, CLOSED, cfg, params=flat)
    return _reshape_like(res.values, u)


def partial_excess(measure: Measure, t: ArrayLike, cfg: Optional[QuadConfig] = None) -> jnp.ndarray:
    """
    Computes ∫_(t,b] (x - t) dG(x). An atom located exactly at t is excluded.

    Args:
        measure: Measure.
        t: Scalar or array of points in [a, b].
        cfg: Quadrature configuration.

    Returns:
        Array with the shape of ``t``.

    """
    a, b = measure.interval
    check_in_interval(t, a, b, 't')
    flat = jnp.asarray(t, dtype=jnp.float64).reshape(-1)
    res = integrate_stieltjes_batch(lambda x, p: x - p, measure, flat, b, OPEN_CLOSED, cfg, params=flat)
    return _reshape_like(res.values, t)


def partial_cdf_integral(measure: Measure,
                         lo: ArrayLike,
                         hi: ArrayLike,
                         cfg: Optional[QuadConfig] = None) -> jnp.ndarray:
    """
    Computes ∫_lo^hi G(x) dx.

    Args:
        measure: Measure.
        lo: Lower limits in [a, b].
        hi: Upper limits in [a, b], hi >= lo.
        cfg: Quadrature configuration.

    Returns:
        Array with the broadcast shape of ``lo`` and ``hi``.

    """
    a, b = measure.interval
    lo, hi = jnp.broadcast_arrays(jnp.asarray(lo, dtype=jnp.float64), jnp.asarray(hi, dtype=jnp.float64))
    check_in_interval(lo, a, b, 'lo')
    check_in_interval(hi, a, b, 'hi')
    if bool(jnp.any(hi < lo)):
        raise ValidationError(f'partial_cdf_integral requires lo <= hi, received lo={lo}, hi={hi}')
    return partial_deficit(measure, hi, cfg) - partial_deficit(measure, lo, cfg)


def check_cdf_density_consistency(measure: Measure, n: int = 101, cfg: Optional[QuadConfig] = None) -> float:
    """
    Diagnostic comparing the closed-form cdf with the integrated density.

    Args:
        measure: Measure with both ``cdf`` and ``density``.
        n: Number of grid points.
        cfg: Quadrature configuration.

    Returns:
        Maximum absolute deviation on the grid.

    """
    if measure.cdf is None or measure.density is None:
        raise ValidationError('Consistency check needs both a closed-form cdf and a density')
    a, b = measure.interval
    xs = grid(a, b, n)
    integrated = integrate_batch(measure.density, jnp.full(xs.shape, a), xs, cfg).values
    deviation = float(jnp.max(jnp.abs(integrated - (measure.cdf(xs) - measure.cdf(jnp.asarray(a))))))
    logger.info('cdf/density consistency of %s: max deviation %.3e', measure.label, deviation)
    return deviation


_FAMILIES = ('uniform', 'beta22', 'truncexp', 'discrete')


def measure_from_config(record: Mapping[str, Any]) -> Measure:
    """
    Builds a measure from a JSON-compatible record
    ``{"family": ..., "a": ..., "b": ..., "lambda": ..., "atoms": [[x, p], ...]}``.

    Args:
        record: Mapping describing the measure.

    Returns:
        Measure.

    """
    family = record.get('family')
    if family not in _FAMILIES:
        raise ValidationError(f'Unknown measure family {family!r}, expected one of {_FAMILIES}')
    interval = (float(record.get('a', 0.)), float(record.get('b', 1.)))
    if family == 'uniform':
        return make_uniform(interval)
    if family == 'beta22':
        return make_beta22(interval)
    if family == 'truncexp':
        if 'lambda' not in record:
            raise ValidationError('truncexp measure requires "lambda"')
        return make_trunc_exp(record['lambda'], interval)
    atoms = record.get('atoms')
    if not atoms:
        raise ValidationError('discrete measure requires non-empty "atoms"')
    explicit = 'a' in record or 'b' in record
    return make_discrete(atoms, interval if explicit else None)


_MEASURE_RE = re.compile(r'^(?P<body>[^@]+)(@(?P<a>[^,]+),(?P<b>.+))?$')


def parse_measure(text: str) -> Measure:
    """
    Parses ``uniform | beta22 | truncexp<lambda> | discrete:<x:p,...>`` with an optional ``@a,b`` suffix
    (default [0, 1]).

    Args:
        text: Measure string.

    Returns:
        Measure.

    """
    match = _MEASURE_RE.match(text.strip())
    if match is None:
        raise ValidationError(f'Cannot parse measure {text!r}')
    body = match.group('body')
    try:
        interval = (float(match.group('a')), float(match.group('b'))) if match.group('a') else (0., 1.)
    except ValueError:
        raise ValidationError(f'Cannot parse interval suffix of measure {text!r}')

    record = {'a': interval[0], 'b': interval[1]}
    if body in ('uniform', 'beta22'):
        record['family'] = body
    elif body.startswith('truncexp'):
        try:
            record.update(family='truncexp', **{'lambda': float(body[len('truncexp'):])})
        except ValueError:
            raise ValidationError(f'Cannot parse rate of measure {text!r}, expected e.g. truncexp1')
    elif body.startswith('discrete:'):
        try:
            atoms = [tuple(float(v) for v in item.split(':')) for item in body[len('discrete:'):].split(',')]
        except ValueError:
            raise ValidationError(f'Cannot parse atoms of measure {text!r}, expected discrete:x:p,x:p')
        if any(len(at) != 2 for at in atoms):
            raise ValidationError(f'Atoms must be written as x:p, received {text!r}')
        record.update(family='discrete', atoms=atoms)
    else:
        raise ValidationError(f'Unknown measure {text!r}, expected uniform, beta22, truncexp<lambda> '
                              f'or discrete:<x:p,...>')
    return measure_from_config(record)
