import io
import logging

import pytest
from jax import numpy as jnp

import hhjax
from hhjax.karamata import (KINDS, karamata_phi, curve_filename, curve_area, phi_kinks)
from hhjax.residual import ABS_PROBE_RATIO
from hhjax.utils import PHI_TOL

MEASURES = (hhjax.make_uniform(), hhjax.make_trunc_exp(1.), hhjax.make_beta22())


def all_specs(t=0.5):
    return [hhjax.make_inequality(kind, m, t if kind == 'TH' else None) for m in MEASURES for kind in KINDS]


def atoms(measure):
    return [(at.x, at.p) for at in measure.atoms]


def test_second_measure():
    m = hhjax.make_uniform()
    assert jnp.allclose(jnp.array(atoms(hhjax.second_measure('J', m))), jnp.array([(0.5, 1.)]))
    assert jnp.allclose(jnp.array(atoms(hhjax.second_measure('H', m))), jnp.array([(0., 0.5), (1., 0.5)]))
    assert jnp.allclose(jnp.array(atoms(hhjax.second_measure('TH', m, 0.5))),
                        jnp.array([(0., 0.25), (0.5, 0.5), (1., 0.25)]))
    with pytest.raises(hhjax.ValidationError):
        hhjax.second_measure('TH', m)
    with pytest.raises(hhjax.ValidationError):
        hhjax.second_measure('K', m)


def test_second_measure_degenerate_weights():
    with pytest.warns(hhjax.AssumptionWarning):
        h = hhjax.second_measure('TH', hhjax.make_uniform(), 1. - 1e-10)
    assert len(h.atoms) == 2


def test_moment_conditions():
    m = hhjax.make_uniform()
    assert hhjax.check_moment_conditions(m, hhjax.second_measure('J', m)).passed
    assert hhjax.check_moment_conditions(m, hhjax.second_measure('TH', m, 0.3)).passed
    diag = hhjax.check_moment_conditions(m, hhjax.make_discrete([(0.4, 1.)], interval=(0., 1.)))
    assert not diag.passed
    assert abs(diag.mean_gap - 0.1) < 1e-14
    assert diag.mass_gap < 1e-14


def test_make_inequality():
    spec = hhjax.make_inequality('J', hhjax.make_uniform(), t=0.3)
    assert spec.direction == 'lower' and spec.t is None
    spec = hhjax.make_inequality('TH', hhjax.make_beta22(), 0.3)
    assert spec.direction == 'upper' and spec.t == 0.3
    with pytest.raises(hhjax.ValidationError):
        hhjax.make_inequality('TH', hhjax.make_uniform())
    with pytest.raises(hhjax.ValidationError):
        hhjax.make_inequality('TH', hhjax.make_uniform(), 1.)


def test_custom_inequality():
    g = hhjax.make_uniform()
    h = hhjax.make_discrete([(0.6, 1.)], interval=(0., 1.))
    with pytest.raises(hhjax.ValidationError):
        hhjax.make_custom_inequality(g, h, 'upper')
    with pytest.raises(hhjax.ValidationError):
        hhjax.make_custom_inequality(g, hhjax.make_discrete([(0.5, 1.)], interval=(0., 2.)), 'upper')
    with pytest.raises(hhjax.ValidationError):
        hhjax.make_custom_inequality(g, hhjax.second_measure('H', g), 'sideways')
    spec = hhjax.make_custom_inequality(g, hhjax.second_measure('H', g), 'upper')
    assert spec.kind == 'custom'
    assert hhjax.dominance_test(spec)


def test_parse_inequality():
    spec = hhjax.parse_inequality('TH:uniform:0.3')
    assert spec.kind == 'TH' and spec.t == 0.3
    assert hhjax.parse_inequality('TH:uniform').t == 0.5
    assert hhjax.parse_inequality('TH:uniform@0,2', default_t=0.4).t == 0.4
    spec = hhjax.parse_inequality('H:truncexp1')
    assert spec.g.label == 'truncexp1' and spec.t is None
    assert hhjax.parse_inequality('TH:discrete:0:0.25,0.5:0.5,1:0.25:0.25').t == 0.25
    for bad in ('uniform', 'X:uniform', 'TH:uniform:1.5', 'H:gauss'):
        with pytest.raises(hhjax.ValidationError):
            hhjax.parse_inequality(bad)


def test_parse_inequality_discrete_without_pivot():
    spec = hhjax.parse_inequality('TH:discrete:0:0.25,0.5:0.5,1:0.25')
    assert spec.t == 0.5
    assert [at.p for at in spec.g.atoms] == [0.25, 0.5, 0.25]
    assert hhjax.parse_inequality('TH:discrete:0:0.25,0.5:0.5,1:0.25', default_t=0.3).t == 0.3
    spec = hhjax.parse_inequality('TH:discrete:0:0.25,0.5:0.5,1:0.25@0,2:0.75')
    assert spec.t == 0.75 and spec.g.interval == (0., 2.)
    with pytest.raises(hhjax.ValidationError):
        hhjax.parse_inequality('H:discrete:0:0.25,0.5:0.5,1:0.25:0.25')
    with pytest.raises(hhjax.ValidationError):
        hhjax.parse_inequality('TH:discrete:0:0.25,0.5:0.5,1:0.25:half')


def test_phi_generic_examples():
    m = hhjax.make_uniform()
    j = hhjax.make_inequality('J', m)
    h = hhjax.make_inequality('H', m)
    assert abs(float(hhjax.karamata_phi_generic(j, 0.5)) - 0.125) < 1e-12
    assert abs(float(hhjax.karamata_phi_generic(h, 0.5)) - 0.125) < 1e-12
    for spec in (j, h):
        assert float(hhjax.karamata_phi_generic(spec, 0.)) == 0.
    with pytest.raises(hhjax.ValidationError):
        hhjax.karamata_phi_generic(h, 1.5)


def test_phi_closed_examples():
    assert abs(float(hhjax.karamata_phi_closed('J', hhjax.make_uniform(), 0.25)) - 0.03125) < 1e-14
    assert abs(float(hhjax.karamata_phi_closed('H', hhjax.make_beta22(), 1.))) < 1e-12
    assert abs(float(hhjax.karamata_phi_closed('TH', hhjax.make_uniform(), 0.25, t=0.5)) - 0.03125) < 1e-14


def test_phi_closed_seam_continuity():
    for m in MEASURES:
        t = 0.4
        left = float(hhjax.karamata_phi_closed('TH', m, t, t=t))
        right = float(hhjax.karamata_phi_closed('TH', m, t + 1e-12, t=t))
        assert abs(left - right) < 1e-10


def test_phi_generic_matches_closed():
    us = jnp.linspace(0., 1., 101)
    for spec in all_specs():
        closed = hhjax.karamata_phi_closed(spec.kind, spec.g, us, spec.t)
        generic = hhjax.karamata_phi_generic(spec, us)
        assert float(jnp.max(jnp.abs(closed - generic))) <= 1e-8


def test_phi_endpoints():
    for spec in all_specs() + all_specs(0.2):
        ends = karamata_phi(spec, jnp.array([0., 1.]))
        assert float(ends[0]) == 0.
        assert abs(float(ends[1])) <= PHI_TOL


def test_abs_probe_examples():
    m = hhjax.make_uniform()
    assert abs(hhjax.abs_probe_residual(hhjax.make_inequality('H', m), 0.5) - 0.25) < 1e-12
    assert abs(hhjax.abs_probe_residual(hhjax.make_inequality('J', m), 0.5) - 0.25) < 1e-12
    assert abs(hhjax.abs_probe_residual(hhjax.make_inequality('TH', m, 0.5), 0.)) < 1e-12


def test_abs_probe_ratio(caplog):
    caplog.set_level(logging.INFO)
    us = jnp.linspace(0., 1., 21)
    ratios = []
    for spec in all_specs():
        phi = karamata_phi(spec, us)
        for u, p in zip(us.tolist(), phi.tolist()):
            if p > 1e-6:
                ratios.append(hhjax.abs_probe_residual(spec, u) / p)
    logging.getLogger(__name__).info('abs probe / phi: measured %.10f..%.10f',
                                     min(ratios), max(ratios))
    assert ratios
    assert all(abs(r - ABS_PROBE_RATIO) <= 1e-6 for r in ratios)


def test_dominance():
    for spec in all_specs():
        assert hhjax.dominance_test(spec, 1001)
    g = hhjax.make_uniform()
    with pytest.warns(hhjax.AssumptionWarning):
        invalid = hhjax.make_custom_inequality(g, hhjax.make_discrete([(0.6, 1.)], interval=(0., 1.)),
                                               'upper', strict=False)
    assert not hhjax.dominance_test(invalid, 101)
    with pytest.raises(hhjax.ValidationError):
        hhjax.dominance_test(all_specs()[0], 8)


def test_phi_nonnegative_on_fine_grid():
    us = jnp.linspace(0., 1., 1001)
    for spec in all_specs():
        assert float(jnp.min(karamata_phi(spec, us))) >= -1e-9


def test_sample_curve_shapes():
    m = hhjax.make_uniform()
    j = hhjax.sample_curve(hhjax.make_inequality('J', m), 101)
    peak = int(jnp.argmax(j.phi))
    assert abs(float(j.grid[peak]) - 0.5) < 1e-12
    left_slope = float(j.phi[peak] - j.phi[peak - 1]) / 0.01
    right_slope = float(j.phi[peak + 1] - j.phi[peak]) / 0.01
    assert left_slope > 0.4 and right_slope < -0.4

    h = hhjax.sample_curve(hhjax.make_inequality('H', m), 101)
    assert int(jnp.argmax(h.phi)) == 50
    assert abs(float(jnp.max(h.phi)) - 0.125) < 1e-12
    for curve in (j, h):
        assert abs(float(curve.phi[0])) <= 1e-9 and abs(float(curve.phi[-1])) <= 1e-9


def test_th_curve_below_h_curve():
    for m in MEASURES:
        for t in (0.3, 0.5):
            h = hhjax.sample_curve(hhjax.make_inequality('H', m), 201, cross_check=False)
            th = hhjax.sample_curve(hhjax.make_inequality('TH', m, t), 201, cross_check=False)
            assert bool(jnp.all(th.phi <= h.phi + 1e-9))


def test_curve_csv():
    curve = hhjax.sample_curve(hhjax.make_inequality('H', hhjax.make_uniform()), 11)
    assert curve_filename(curve) == 'H_uniform_11.csv'
    stream = io.StringIO()
    hhjax.write_curve_csv(curve, stream)
    lines = stream.getvalue().splitlines()
    assert lines[0] == 'u,phi'
    assert lines[1] == '0,0'
    assert len(lines) == 12
    assert float(lines[6].split(',')[1]) == float(curve.phi[5])


def test_curve_csv_file(tmp_path):
    curve = hhjax.sample_curve(hhjax.make_inequality('TH', hhjax.make_beta22(), 0.5), 5)
    path = str(tmp_path / curve_filename(curve))
    hhjax.write_curve_csv(curve, path)
    again = io.StringIO()
    hhjax.write_curve_csv(curve, again)
    with open(path) as f:
        assert f.read() == again.getvalue()
    assert curve_filename(curve) == 'TH_beta22_5.csv'


def test_curve_area():
    curve = hhjax.sample_curve(hhjax.make_inequality('H', hhjax.make_uniform()), 1001)
    assert abs(curve_area(curve) - 1 / 12) < 1e-6


def test_phi_kinks():
    spec = hhjax.make_inequality('TH', hhjax.make_uniform(), 0.3)
    assert phi_kinks(spec) == (0., 0.3, 1.)
