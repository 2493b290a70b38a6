import math

import pytest
from jax import numpy as jnp

import hhjax
from hhjax.measure import is_three_point_admissible, check_cdf_density_consistency, partial_moments
from hhjax.utils import MASS_TOL


def test_uniform():
    m = hhjax.make_uniform()
    assert abs(hhjax.mean(m) - 0.5) < 1e-14
    g = hhjax.cdf(m, jnp.array([-1., 0., 0.25, 1., 2.]))
    assert jnp.allclose(g, jnp.array([0., 0., 0.25, 1., 1.]), atol=1e-15)


def test_rescaled_uniform():
    m = hhjax.make_uniform((2., 4.))
    assert abs(hhjax.mean(m) - 3.) < 1e-13
    assert abs(float(hhjax.cdf(m, 2.5)) - 0.25) < 1e-15


def test_beta22():
    m = hhjax.make_beta22()
    assert abs(hhjax.mean(m) - 0.5) < 1e-13
    second = hhjax.integrate_stieltjes(lambda x: x ** 2, m, 0., 1.).value
    assert abs(second - 0.3) < 1e-13


def test_trunc_exp():
    m = hhjax.make_trunc_exp(1.)
    assert m.label == 'truncexp1'
    assert abs(hhjax.mean(m) - (math.e - 2.) / (math.e - 1.)) < 1e-13
    with pytest.raises(hhjax.ValidationError):
        hhjax.make_trunc_exp(0.)


def test_partial_deficit_and_excess():
    m = hhjax.make_uniform()
    u = jnp.array([0., 0.25, 0.5, 1.])
    assert jnp.allclose(hhjax.partial_deficit(m, u), u ** 2 / 2, atol=1e-14)
    assert jnp.allclose(hhjax.partial_excess(m, u), (1. - u) ** 2 / 2, atol=1e-14)
    assert abs(float(hhjax.partial_cdf_integral(m, 0.25, 0.5)) - (0.125 - 0.03125)) < 1e-14
    with pytest.raises(hhjax.ValidationError):
        hhjax.partial_deficit(m, 1.5)


def test_partial_deficit_discrete():
    m = hhjax.make_discrete([(0.2, 0.3), (0.7, 0.7)], interval=(0., 1.))
    assert abs(float(hhjax.partial_deficit(m, 0.5)) - 0.3 * 0.3) < 1e-15
    # atom at t is excluded from the excess
    assert abs(float(hhjax.partial_excess(m, 0.7)) - 0.) < 1e-15


def test_discrete_cdf_right_continuous():
    m = hhjax.make_discrete([(0.2, 0.3), (0.7, 0.7)])
    assert m.interval == (0.2, 0.7)
    assert float(hhjax.cdf(m, 0.19999)) == 0.
    assert abs(float(hhjax.cdf(m, 0.2)) - 0.3) < 1e-15
    assert abs(float(hhjax.cdf(m, 0.7)) - 1.) < 1e-15


def test_invalid_measures():
    with pytest.raises(hhjax.ValidationError):
        hhjax.make_discrete([(0.2, 0.3), (0.7, 0.6)])
    with pytest.raises(hhjax.ValidationError):
        hhjax.make_discrete([(0.2, 0.5), (1.7, 0.5)], interval=(0., 1.))
    with pytest.raises(hhjax.ValidationError):
        hhjax.make_discrete([(0.2, 0.5), (0.2, 0.5)], interval=(0., 1.))
    with pytest.raises(hhjax.ValidationError):
        hhjax.make_discrete([(0.5, 1.)])
    with pytest.raises(hhjax.ValidationError):
        hhjax.make_measure((1., 0.), density=lambda x: jnp.ones_like(x))


def test_mixture():
    m = hhjax.make_mixture([hhjax.make_uniform(), hhjax.make_discrete([(0.9, 1.)], interval=(0., 1.))], [0.6, 0.4])
    assert abs(hhjax.mean(m) - (0.6 * 0.5 + 0.4 * 0.9)) < 1e-13
    assert abs(float(hhjax.cdf(m, 0.9)) - 0.94) < 1e-13
    assert abs(float(hhjax.cdf(m, 0.8999)) - 0.6 * 0.8999) < 1e-13
    assert abs(float(hhjax.cdf(m, 0.5)) - 0.3) < 1e-13


def test_partial_moments():
    mass, first = partial_moments(hhjax.make_uniform(), 0., 0.5)
    assert abs(float(mass[0]) - 0.5) < 1e-14
    assert abs(float(first[0]) - 0.125) < 1e-14


def test_three_point_admissible():
    assert is_three_point_admissible(hhjax.make_uniform())
    assert not is_three_point_admissible(hhjax.make_discrete([(0., 0.5), (1., 0.5)]))
    assert is_three_point_admissible(hhjax.make_discrete([(0., 0.3), (0.5, 0.4), (1., 0.3)]))


def test_cdf_density_consistency():
    for m in (hhjax.make_uniform(), hhjax.make_beta22(), hhjax.make_trunc_exp(1.)):
        assert check_cdf_density_consistency(m) < 1e-12


def test_parse_measure():
    assert hhjax.parse_measure('uniform').interval == (0., 1.)
    assert hhjax.parse_measure('uniform@2,4').interval == (2., 4.)
    assert hhjax.parse_measure('truncexp2').label == 'truncexp2'
    m = hhjax.parse_measure('discrete:0:0.25,0.5:0.5,1:0.25')
    assert [at.x for at in m.atoms] == [0., 0.5, 1.]
    for bad in ('gauss', 'truncexpx', 'discrete:0:0.5:1', 'uniform@0,x'):
        with pytest.raises(hhjax.ValidationError):
            hhjax.parse_measure(bad)


def test_measure_from_config():
    m = hhjax.measure_from_config({'family': 'truncexp', 'lambda': 1., 'a': 0., 'b': 2.})
    assert m.interval == (0., 2.)
    m = hhjax.measure_from_config({'family': 'discrete', 'atoms': [[0.1, 0.5], [0.3, 0.5]]})
    assert m.interval == (0.1, 0.3)
    with pytest.raises(hhjax.ValidationError):
        hhjax.measure_from_config({'family': 'truncexp'})


BUNDLED = (hhjax.make_uniform(), hhjax.make_beta22(), hhjax.make_trunc_exp(1.), hhjax.make_trunc_exp(2.5, (1., 3.)))


def test_bundled_cdf_monotone_and_normalised():
    for m in BUNDLED:
        a, b = m.interval
        values = m.cdf(jnp.linspace(a, b, 1001))
        assert float(jnp.min(jnp.diff(values))) >= -1e-15
        assert abs(float(values[0])) <= MASS_TOL
        assert abs(float(values[-1]) - 1.) <= MASS_TOL


def test_user_cdf_validated():
    ones = lambda x: jnp.ones_like(x)
    with pytest.raises(hhjax.ValidationError):
        hhjax.make_measure((0., 1.), density=ones, cdf=lambda x: x + 5.)
    with pytest.raises(hhjax.ValidationError):
        hhjax.make_measure((0., 1.), density=ones, cdf=lambda x: x + 0.3 * jnp.sin(2. * jnp.pi * x))
    with pytest.raises(hhjax.ValidationError):
        hhjax.make_measure((0., 1.), density=ones, cdf=lambda x: jnp.where(x > 0.5, jnp.nan, x))
    m = hhjax.make_measure((0., 1.), density=lambda x: 0.5 * jnp.ones_like(x), cdf=lambda x: 0.5 * x,
                           atoms=[(0.5, 0.5)])
    assert abs(float(hhjax.cdf(m, 0.5)) - 0.75) < 1e-15


def test_trunc_exp_mean_value():
    assert abs(hhjax.mean(hhjax.make_trunc_exp(1.)) - 0.418023) < 1e-6


def test_deficit_and_excess_at_endpoints():
    for m in BUNDLED + (hhjax.make_discrete([(0.1, 0.2), (0.4, 0.3), (0.9, 0.5)], interval=(0., 1.)),):
        a, b = m.interval
        c = hhjax.mean(m)
        assert abs(float(hhjax.partial_deficit(m, b)) - (b - c)) < 1e-12
        assert abs(float(hhjax.partial_excess(m, a)) - (c - a)) < 1e-12


def test_abs_moment_is_deficit_plus_excess():
    for m in BUNDLED:
        a, b = m.interval
        for u in (a + 0.3 * (b - a), a + 0.5 * (b - a), a + 0.85 * (b - a)):
            direct = hhjax.integrate_stieltjes(lambda x: jnp.abs(x - u), m, a, b, kinks=[u]).value
            split = float(hhjax.partial_deficit(m, u)) + float(hhjax.partial_excess(m, u))
            assert abs(direct - split) <= 1e-9


def test_partial_cdf_integral_additive():
    for m in BUNDLED:
        a, b = m.interval
        cuts = [a + s * (b - a) for s in (0., 0.2, 0.55, 1.)]
        pieces = sum(float(hhjax.partial_cdf_integral(m, lo, hi)) for lo, hi in zip(cuts, cuts[1:]))
        assert abs(pieces - float(hhjax.partial_cdf_integral(m, a, b))) < 1e-12
    assert abs(float(hhjax.partial_cdf_integral(hhjax.make_beta22(), 0., 1.)) - 0.5) < 1e-12


def test_mixture_atom_boundary():
    m = hhjax.make_mixture([hhjax.make_uniform(), hhjax.make_discrete([(0.5, 1.)], interval=(0., 1.))], [0.5, 0.5])
    assert abs(float(hhjax.cdf(m, 0.5)) - 0.75) < 1e-15
    assert abs(float(hhjax.cdf(m, 0.5 - 1e-9)) - 0.25) < 1e-9
