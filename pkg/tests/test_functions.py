import pytest
from jax import numpy as jnp

import hhjax
from hhjax import functions

REGISTRY = ('square', 'exp', 'negentropy', 'powp:4', 'powp:1.5', 'abs:0.3', 'vee:1,0,2,0.5', 'affine:2,1')


def test_registry_convex():
    for name in REGISTRY:
        hhjax.check_convex(hhjax.get_function(name), (0., 1.))


def test_registry_values():
    assert abs(float(hhjax.get_function('square').eval(0.5)) - 0.25) < 1e-15
    assert float(hhjax.get_function('negentropy').eval(0.)) == 0.
    assert abs(float(hhjax.get_function('negentropy').eval(jnp.e)) - jnp.e) < 1e-14
    assert abs(float(hhjax.get_function('powp:3').eval(0.5)) - 0.125) < 1e-15
    assert abs(float(hhjax.get_function('abs:0.3').eval(1.)) - 0.7) < 1e-15
    assert abs(float(hhjax.get_function('affine:2,1').eval(0.5)) - 2.) < 1e-15


def test_vee_uses_interval():
    f = hhjax.get_function('vee:1,0,1,3', interval=(2., 4.))
    assert float(f.eval(3.)) == 0.
    assert f.kinks == (3.,)


def test_labels():
    assert functions.powp(4.).label == 'powp:4'
    assert hhjax.get_function('vee:1,0,1,0.5').label == 'vee:1,0,1,0.5'


def test_registry_errors():
    with pytest.raises(KeyError):
        hhjax.get_function('cosh')
    with pytest.raises(hhjax.ValidationError):
        hhjax.get_function('powp:1')
    with pytest.raises(hhjax.ValidationError):
        hhjax.get_function('abs:x')
    with pytest.raises(hhjax.ValidationError):
        hhjax.get_function('vee:1,0,1')
    with pytest.raises(hhjax.NotConvexError):
        hhjax.get_function('vee:1,2,1,0.5')
