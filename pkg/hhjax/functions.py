from typing import Sequence

from jax import numpy as jnp

from hhjax.convex import ConvexFn, VeeParams, make_affine, make_pivot_abs, make_vee
from hhjax.utils import ValidationError


def square() -> ConvexFn:
    return ConvexFn(lambda x: jnp.asarray(x) ** 2,
                    lambda x: 2. * jnp.asarray(x),
                    lambda x: jnp.full(jnp.shape(x), 2.),
                    (),
                    'square')


def exp() -> ConvexFn:
    return ConvexFn(jnp.exp, jnp.exp, jnp.exp, (), 'exp')


def negentropy() -> ConvexFn:
    # x log x with 0 log 0 = 0, convex on [0, inf)
    def f(x):
        x = jnp.asarray(x)
        positive = x > 0
        safe = jnp.where(positive, x, 1.)
        return jnp.where(positive, x * jnp.log(safe), 0.)

    return ConvexFn(f,
                    lambda x: jnp.log(jnp.asarray(x)) + 1.,
                    lambda x: 1. / jnp.asarray(x),
                    (),
                    'negentropy')


def powp(p: float) -> ConvexFn:
    p = float(p)
    if not p > 1:
        raise ValidationError(f'powp requires p > 1, received {p}')
    return ConvexFn(lambda x: jnp.abs(jnp.asarray(x)) ** p,
                    lambda x: p * jnp.sign(x) * jnp.abs(jnp.asarray(x)) ** (p - 1),
                    lambda x: p * (p - 1) * jnp.abs(jnp.asarray(x)) ** (p - 2),
                    (),
                    f'powp:{p:g}')


def abs(u: float) -> ConvexFn:
    return make_pivot_abs(u)


def vee(alpha: float, tau: float, beta: float, t: float, interval: Sequence[float] = (0., 1.)) -> ConvexFn:
    return make_vee(VeeParams(alpha, tau, beta, t), interval)


def affine(alpha: float, beta: float) -> ConvexFn:
    return make_affine(alpha, beta)


_NAMED = ('square', 'exp', 'negentropy', 'powp', 'abs', 'vee', 'affine')


def get_function(name: str, interval: Sequence[float] = (0., 1.)) -> ConvexFn:
    """
    Builds a registry function from its string form, e.g. ``'square'``, ``'powp:4'``,
    ``'abs:0.5'`` or ``'vee:1,0,1,0.5'``.

    Args:
        name: Registry string ``name[:arg1,arg2,...]``.
        interval: Interval passed to constructors that need one (``vee``).

    Returns:
        ConvexFn.

    """
    key, _, arg_str = name.strip().partition(':')
    if key not in _NAMED:
        raise KeyError(f'Function string \'{key}\' not found in hhjax.functions, expected one of {_NAMED}')
    try:
        args = [float(v) for v in arg_str.split(',')] if arg_str else []
    except ValueError:
        raise ValidationError(f'Cannot parse arguments of function string \'{name}\'')
    constructor = globals()[key]
    if key == 'vee':
        if len(args) != 4:
            raise ValidationError(f'vee needs four arguments alpha,tau,beta,t, received \'{name}\'')
        return constructor(*args, interval=interval)
    return constructor(*args)
