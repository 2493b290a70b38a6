from __future__ import annotations
from typing import Callable, NamedTuple, Optional, Sequence, TYPE_CHECKING
import logging

import jax
from jax import numpy as jnp

from hhjax.utils import ValidationError, NumericFailure, ArrayLike

if TYPE_CHECKING:
    from hhjax.measure import Measure, HalfOpenSpec

logger = logging.getLogger(__name__)

# Gauss-Kronrod 7/15 abscissae (non-negative half) and weights
_XGK = jnp.array([0.991455371120812639206854697526329,
                  0.949107912342758524526189684047851,
                  0.864864423359769072789712788640926,
                  0.741531185599394439863864773280788,
                  0.586087235467691130294144845693013,
                  0.405845151377397166906606412076961,
                  0.207784955007898467600689403773245,
                  0.000000000000000000000000000000000])
_WGK = jnp.array([0.022935322010529224963732008058970,
                  0.063092092629978553290700663189204,
                  0.104790010322250183839876322541518,
                  0.140653259715525918745189590510238,
                  0.169004726639267902826583426598550,
                  0.190350578064785409913256402421014,
                  0.204432940075298892414161999234649,
                  0.209482141084727828012999174891714])
_WG = jnp.array([0.129484966168869693270611432679082,
                 0.279705391489276667901467771423780,
                 0.381830050505118944950369775488975,
                 0.417959183673469387755102040816327])

_NODES = jnp.concatenate([-_XGK[:7], _XGK[7:], _XGK[6::-1]])
_WEIGHTS_K = jnp.concatenate([_WGK[:7], _WGK[7:], _WGK[6::-1]])
_WEIGHTS_G = jnp.zeros(15).at[jnp.array([1, 13])].set(_WG[0]) \
    .at[jnp.array([3, 11])].set(_WG[1]) \
    .at[jnp.array([5, 9])].set(_WG[2]) \
    .at[7].set(_WG[3])

_ROUNDOFF_FACTOR = 50 * jnp.finfo(jnp.float64).eps
_MAX_ACTIVE_PANELS = 1 << 21
_MIN_BUCKET = 16


class QuadConfig(NamedTuple):
    """
    Tolerances of the adaptive quadrature.

    Attributes:
        abs_tol: Absolute tolerance per integral.
        rel_tol: Relative tolerance per integral.
        max_depth: Maximum number of bisections of a panel.
        initial_panels: Number of equal panels each (kink-free) piece starts with.
    """
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_depth: int = 40
    initial_panels: int = 1


class QuadResult(NamedTuple):
    value: float
    error_estimate: float
    panels_used: int


class QuadBatchResult(NamedTuple):
    values: jnp.ndarray
    error_estimates: jnp.ndarray
    panels_used: int


def check_quad_config(cfg: QuadConfig):
    """
    Checks that a QuadConfig is usable.

    Args:
        cfg: Quadrature configuration.

    """
    if not cfg.abs_tol > 0:
        raise ValidationError(f'abs_tol must be positive, received {cfg.abs_tol}')
    if not cfg.rel_tol >= 0:
        raise ValidationError(f'rel_tol must be non-negative, received {cfg.rel_tol}')
    if cfg.max_depth < 1:
        raise ValidationError(f'max_depth must be at least 1, received {cfg.max_depth}')
    if cfg.initial_panels < 1:
        raise ValidationError(f'initial_panels must be at least 1, received {cfg.initial_panels}')


def _gauss_kronrod(f: Callable,
                   lo: jnp.ndarray,
                   hi: jnp.ndarray,
                   params: Optional[jnp.ndarray]):
    """
    Applies the 7-point Gauss and 15-point Kronrod rules to every panel [lo_i, hi_i].

    Returns:
        Tuple of (Kronrod estimates, Gauss estimates, Kronrod estimates of the integral of |f|).
    """
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = center[:, None] + half[:, None] * _NODES[None, :]
    fx = f(x) if params is None else f(x, params[:, None])
    fx = jnp.broadcast_to(jnp.asarray(fx, dtype=jnp.float64), x.shape)
    kronrod = half * (fx @ _WEIGHTS_K)
    gauss = half * (fx @ _WEIGHTS_G)
    resabs = jnp.abs(half) * (jnp.abs(fx) @ _WEIGHTS_K)
    return kronrod, gauss, resabs


def _initial_panels(lo: jnp.ndarray, hi: jnp.ndarray, kinks: jnp.ndarray, n_split: int):
    """
    Splits each interval at the kinks strictly inside it and then into n_split equal panels.
    Kinks outside an interval produce zero-width panels, which integrate to zero.
    """
    n = lo.size
    clipped = jnp.clip(kinks[None, :], lo[:, None], hi[:, None])
    edges = jnp.concatenate([lo[:, None], clipped, hi[:, None]], axis=1)
    if n_split > 1:
        frac = jnp.linspace(0., 1., n_split + 1)
        edges = edges[:, :-1, None] + (edges[:, 1:, None] - edges[:, :-1, None]) * frac[None, None, :-1]
        edges = jnp.concatenate([edges.reshape(n, -1), hi[:, None]], axis=1)
    p_lo = edges[:, :-1].ravel()
    p_hi = edges[:, 1:].ravel()
    owner = jnp.repeat(jnp.arange(n), edges.shape[1] - 1)
    return p_lo, p_hi, owner


def _bucket(n: int) -> int:
    return max(_MIN_BUCKET, 1 << (n - 1).bit_length())


def _pad(x: jnp.ndarray, size: int, fill) -> jnp.ndarray:
    if size == x.size:
        return x
    return jnp.concatenate([x, jnp.full(size - x.size, fill, dtype=x.dtype)])


def integrate_batch(f: Callable,
                    lo: ArrayLike,
                    hi: ArrayLike,
                    cfg: Optional[QuadConfig] = None,
                    kinks: Sequence[float] = (),
                    params: Optional[ArrayLike] = None) -> QuadBatchResult:
    """
    Adaptive Gauss-Kronrod quadrature of a batch of integrals.
    Panels of all integrals are refined together and accumulated per integral.
    Integrals and panels are padded with zero-width entries to power-of-two sizes, so repeated
    calls reuse the operations JAX compiled for earlier calls of similar size.

    Args:
        f: Vectorised integrand. Called as ``f(x)`` or, when ``params`` is given, as ``f(x, p)``
            where ``p`` broadcasts against ``x`` and holds the parameter of the owning integral.
        lo: Lower limits, scalar or array of shape (n,).
        hi: Upper limits, broadcastable against ``lo``.
        cfg: Quadrature configuration. Defaults to ``QuadConfig()``.
        kinks: Points where the integrand may be non-smooth. Every integral is split at the
            kinks strictly inside its limits.
        params: Optional per-integral parameter, array of shape (n,).

    Returns:
        QuadBatchResult with arrays of values and error estimates and the total number of accepted panels.

    """
    cfg = QuadConfig() if cfg is None else cfg
    check_quad_config(cfg)
    lo, hi = jnp.broadcast_arrays(jnp.atleast_1d(jnp.asarray(lo, dtype=jnp.float64)),
                                  jnp.atleast_1d(jnp.asarray(hi, dtype=jnp.float64)))
    lo, hi = lo.reshape(-1), hi.reshape(-1)
    if bool(jnp.any(hi < lo)):
        raise ValidationError(f'Integration limits must satisfy lo <= hi, received lo={lo}, hi={hi}')
    n_true = lo.size
    if n_true == 0:
        return QuadBatchResult(jnp.zeros(0), jnp.zeros(0), 0)
    n = _bucket(n_true)
    anchor = 0.5 * (lo[0] + hi[0])
    lo, hi = _pad(lo, n, anchor), _pad(hi, n, anchor)
    if params is not None:
        params = jnp.broadcast_to(jnp.asarray(params, dtype=jnp.float64), (n_true,))
        params = _pad(params, n, params[0])

    p_lo, p_hi, owner = _initial_panels(lo, hi, jnp.sort(jnp.asarray(kinks, dtype=jnp.float64).reshape(-1)),
                                        cfg.initial_panels)
    n_real = p_lo.size
    size = _bucket(n_real)
    p_lo, p_hi, owner = _pad(p_lo, size, anchor), _pad(p_hi, size, anchor), _pad(owner, size, 0)
    width = hi - lo
    safe_width = jnp.where(width > 0, width, 1.)

    values = jnp.zeros(n)
    errors = jnp.zeros(n)
    panels_used = 0

    for depth in range(cfg.max_depth + 1):
        kronrod, gauss, resabs = _gauss_kronrod(f, p_lo, p_hi, None if params is None else params[owner])
        real = jnp.arange(p_lo.size) < n_real
        kronrod, gauss, resabs = (jnp.where(real, v, 0.) for v in (kronrod, gauss, resabs))
        if not bool(jnp.all(jnp.isfinite(kronrod))):
            raise NumericFailure('Integrand is not finite on the integration domain',
                                 float('nan'), float('inf'))
        err = jnp.abs(kronrod - gauss)
        estimate = values + jax.ops.segment_sum(kronrod, owner, num_segments=n)
        share = (p_hi - p_lo) / safe_width[owner]
        tol = jnp.maximum(cfg.abs_tol, cfg.rel_tol * jnp.abs(estimate[owner])) * share
        done = (err <= tol) | (err <= _ROUNDOFF_FACTOR * resabs)

        values = values + jax.ops.segment_sum(jnp.where(done, kronrod, 0.), owner, num_segments=n)
        errors = errors + jax.ops.segment_sum(jnp.where(done, err, 0.), owner, num_segments=n)
        panels_used += int(jnp.sum(done & real & (owner < n_true)))

        if bool(jnp.all(done)):
            logger.debug('quadrature of %d integral(s) converged with %d panels at depth %d',
                         n_true, panels_used, depth)
            return QuadBatchResult(values[:n_true], errors[:n_true], panels_used)

        keep = ~done
        n_active = int(jnp.sum(keep))
        if depth == cfg.max_depth or 2 * n_active > _MAX_ACTIVE_PANELS:
            best = values + jax.ops.segment_sum(jnp.where(keep, kronrod, 0.), owner, num_segments=n)
            best_err = errors + jax.ops.segment_sum(jnp.where(keep, err, 0.), owner, num_segments=n)
            worst = int(jnp.argmax(best_err[:n_true]))
            raise NumericFailure(f'Quadrature did not converge within max_depth={cfg.max_depth} '
                                 f'({n_active} unresolved panels)',
                                 float(best[worst]), float(best_err[worst]))

        # padding panels have zero width and are always done, so they never survive here
        k_lo, k_hi, k_owner = p_lo[keep], p_hi[keep], owner[keep]
        mid = 0.5 * (k_lo + k_hi)
        n_real = 2 * n_active
        size = _bucket(n_real)
        p_lo = _pad(jnp.concatenate([k_lo, mid]), size, anchor)
        p_hi = _pad(jnp.concatenate([mid, k_hi]), size, anchor)
        owner = _pad(jnp.concatenate([k_owner, k_owner]), size, 0)


def integrate(f: Callable[[jnp.ndarray], jnp.ndarray],
              lo: float,
              hi: float,
              cfg: Optional[QuadConfig] = None) -> QuadResult:
    """
    Adaptive quadrature of a (piecewise smooth) vectorised function on [lo, hi].

    Args:
        f: Integrand, maps an array of points to an array of values.
        lo: Lower limit.
        hi: Upper limit, hi >= lo.
        cfg: Quadrature configuration.

    Returns:
        QuadResult.

    """
    res = integrate_batch(f, lo, hi, cfg)
    return QuadResult(float(res.values[0]), float(res.error_estimates[0]), res.panels_used)


def integrate_with_kinks(f: Callable[[jnp.ndarray], jnp.ndarray],
                         lo: float,
                         hi: float,
                         kinks: Sequence[float],
                         cfg: Optional[QuadConfig] = None) -> QuadResult:
    """
    Quadrature of a function with known points of non-differentiability,
    integrating panel-by-panel between consecutive kinks.

    Args:
        f: Integrand.
        lo: Lower limit.
        hi: Upper limit.
        kinks: Sorted kink locations inside [lo, hi].
        cfg: Quadrature configuration.

    Returns:
        QuadResult.

    """
    kinks = [float(k) for k in kinks]
    if any(k2 < k1 for k1, k2 in zip(kinks, kinks[1:])):
        raise ValidationError(f'kinks must be sorted, received {kinks}')
    if any(k < lo or k > hi for k in kinks):
        raise ValidationError(f'kinks must lie in [{lo}, {hi}], received {kinks}')
    res = integrate_batch(f, lo, hi, cfg, kinks=kinks)
    return QuadResult(float(res.values[0]), float(res.error_estimates[0]), res.panels_used)


def _admitted_atoms(atom_x: jnp.ndarray,
                    lo: jnp.ndarray,
                    hi: jnp.ndarray,
                    lower_closed: bool,
                    upper_closed: bool) -> jnp.ndarray:
    """
    Boolean matrix (n_integrals, n_atoms) of atoms inside the (half-)open domains.
    """
    x = atom_x[None, :]
    above = (x > lo[:, None]) | (lower_closed & (x == lo[:, None]))
    below = (x < hi[:, None]) | (upper_closed & (x == hi[:, None]))
    return above & below


def integrate_stieltjes_batch(f: Callable,
                              measure: Measure,
                              lo: ArrayLike,
                              hi: ArrayLike,
                              spec: Optional[HalfOpenSpec] = None,
                              cfg: Optional[QuadConfig] = None,
                              kinks: Sequence[float] = (),
                              params: Optional[ArrayLike] = None) -> QuadBatchResult:
    """
    Lebesgue-Stieltjes integrals of f against a mixed measure over a batch of domains.

    Args:
        f: Vectorised integrand, ``f(x)`` or ``f(x, p)`` as in ``integrate_batch``.
        measure: Measure with optional density and finitely many atoms.
        lo: Lower limits.
        hi: Upper limits.
        spec: Endpoint closure of every domain. Defaults to closed-closed.
        cfg: Quadrature configuration.
        kinks: Sorted kink locations of f.
        params: Optional per-integral parameter.

    Returns:
        QuadBatchResult. The atomic part is an exact finite sum and contributes no error.

    """
    lower_closed = True if spec is None else spec.lower_closed
    upper_closed = True if spec is None else spec.upper_closed
    lo, hi = jnp.broadcast_arrays(jnp.atleast_1d(jnp.asarray(lo, dtype=jnp.float64)),
                                  jnp.atleast_1d(jnp.asarray(hi, dtype=jnp.float64)))
    a, b = measure.interval
    if bool(jnp.any(lo < a)) or bool(jnp.any(hi > b)):
        raise ValidationError(f'Stieltjes domain must lie inside [{a}, {b}], received lo={lo}, hi={hi}')
    n = lo.size
    if params is not None:
        params = jnp.broadcast_to(jnp.asarray(params, dtype=jnp.float64), (n,))

    if measure.density is not None:
        density = measure.density
        if params is None:
            integrand = lambda x: f(x) * density(x)
        else:
            integrand = lambda x, p: f(x, p) * density(x)
        cont = integrate_batch(integrand, lo, hi, cfg, kinks=kinks, params=params)
        values, errors, panels = cont
    else:
        values, errors, panels = jnp.zeros(n), jnp.zeros(n), 0

    if measure.atoms:
        atom_x = jnp.array([at.x for at in measure.atoms])
        atom_p = jnp.array([at.p for at in measure.atoms])
        admitted = _admitted_atoms(atom_x, lo, hi, lower_closed, upper_closed)
        if params is None:
            fx = jnp.broadcast_to(jnp.asarray(f(atom_x), dtype=jnp.float64), atom_x.shape)[None, :]
        else:
            fx = jnp.broadcast_to(jnp.asarray(f(atom_x[None, :], params[:, None]), dtype=jnp.float64),
                                  (n, atom_x.size))
        values = values + jnp.sum(jnp.where(admitted, fx * atom_p[None, :], 0.), axis=1)

    return QuadBatchResult(values, errors, panels)


def integrate_stieltjes(f: Callable[[jnp.ndarray], jnp.ndarray],
                        measure: Measure,
                        lo: float,
                        hi: float,
                        spec: Optional[HalfOpenSpec] = None,
                        cfg: Optional[QuadConfig] = None,
                        kinks: Sequence[float] = ()) -> QuadResult:
    """
    Lebesgue-Stieltjes integral of f against ``measure`` over a domain between lo and hi.
    Atoms strictly inside are always admitted, atoms at lo (hi) only when the lower (upper)
    end is closed.

    Args:
        f: Vectorised integrand.
        measure: Measure.
        lo: Lower limit.
        hi: Upper limit.
        spec: Endpoint closure. Defaults to the closed interval [lo, hi].
        cfg: Quadrature configuration.
        kinks: Sorted kink locations of f.

    Returns:
        QuadResult.

    """
    res = integrate_stieltjes_batch(f, measure, lo, hi, spec, cfg, kinks)
    return QuadResult(float(res.values[0]), float(res.error_estimates[0]), res.panels_used)
