import json
import logging

import pytest

import hhjax
from hhjax import functions
from hhjax.karamata import make_custom_inequality, phi_evaluator
from hhjax.residual import (check_table_one, mean_value_theta, report_to_json, rr_perturbation_bound,
                            GOLDEN_TABLE, NOMINAL_KAPPA, RRPerturbation)
from hhjax.convex import d1_or_fd

UNIFORM = hhjax.make_uniform()
MEASURES = (UNIFORM, hhjax.make_trunc_exp(1.), hhjax.make_beta22())


def test_direct_residual():
    h = hhjax.make_inequality('H', UNIFORM)
    th = hhjax.make_inequality('TH', UNIFORM, 0.5)
    j = hhjax.make_inequality('J', UNIFORM)
    assert abs(hhjax.direct_residual(h, functions.square()) - 1 / 6) < 1e-13
    assert abs(hhjax.direct_residual(th, functions.square()) - 1 / 24) < 1e-13
    assert abs(hhjax.direct_residual(j, functions.square()) - 1 / 12) < 1e-13
    for spec in (h, th, j):
        assert abs(hhjax.direct_residual(spec, functions.affine(2., 3.))) < 1e-12


def test_curvature_residual():
    h = hhjax.make_inequality('H', UNIFORM)
    th = hhjax.make_inequality('TH', UNIFORM, 0.5)
    assert abs(hhjax.curvature_residual(h, functions.square()) - 1 / 6) < 1e-10
    assert abs(hhjax.curvature_residual(th, functions.square()) - 1 / 24) < 1e-10
    assert abs(hhjax.curvature_residual(h, functions.affine(1., 0.))) < 1e-14
    with pytest.raises(hhjax.KinkError):
        hhjax.curvature_residual(h, functions.abs(0.5))


def test_curvature_matches_direct():
    for m in MEASURES:
        for kind in ('J', 'H', 'TH'):
            spec = hhjax.make_inequality(kind, m, 0.5 if kind == 'TH' else None)
            for f in (functions.square(), functions.exp(), functions.powp(4.)):
                assert abs(hhjax.direct_residual(spec, f) - hhjax.curvature_residual(spec, f)) <= 1e-6


def test_calibrate_kappa(caplog):
    caplog.set_level(logging.INFO)
    fit = hhjax.calibrate_kappa()
    logging.getLogger(__name__).info('kappa nominal %g, measured %.12f', NOMINAL_KAPPA, fit.kappa)
    assert abs(fit.kappa - 1.) <= 1e-6
    assert fit.n_pairs == 27
    assert fit.max_misfit <= 1e-6
    assert hhjax.calibrate_kappa() is fit


def test_calibrate_kappa_single_and_degenerate():
    h = hhjax.make_inequality('H', UNIFORM)
    assert abs(hhjax.calibrate_kappa([(h, functions.square())]).kappa - 1.) <= 1e-9
    with pytest.raises(hhjax.ValidationError):
        hhjax.calibrate_kappa([(h, functions.affine(1., 0.)), (h, functions.affine(-2., 1.))])


def test_average_residual_exact():
    assert abs(hhjax.average_residual(hhjax.make_inequality('J', UNIFORM)) - 1 / 24) <= 1e-9
    assert abs(hhjax.average_residual(hhjax.make_inequality('H', UNIFORM)) - 1 / 12) <= 1e-9
    assert abs(hhjax.average_residual(hhjax.make_inequality('TH', UNIFORM, 0.5)) - 1 / 48) <= 1e-9


def test_average_residual_moments_match_quadrature():
    for m in MEASURES:
        for kind in ('J', 'H', 'TH'):
            spec = hhjax.make_inequality(kind, m, 0.5 if kind == 'TH' else None)
            moments = hhjax.average_residual(spec, method='moments')
            assert abs(moments - hhjax.average_residual(spec)) <= 1e-10
    with pytest.raises(hhjax.ValidationError):
        hhjax.average_residual(hhjax.make_inequality('H', UNIFORM), method='simpson')


def test_table_one():
    cells = hhjax.table_one()
    assert len(cells) == 9
    for cell in cells:
        assert cell.rounded == GOLDEN_TABLE[(cell.kind, cell.measure)]
    assert check_table_one(cells) == []


def test_table_one_other_pivot():
    default = {(c.kind, c.measure): c for c in hhjax.table_one()}
    moved = {(c.kind, c.measure): c for c in hhjax.table_one(0.25)}
    for key, cell in moved.items():
        if key[0] == 'TH':
            assert abs(cell.ar - default[key].ar) > 1e-4
        else:
            assert cell.ar == default[key].ar
    assert check_table_one(tuple(moved.values())) == []


def test_check_table_one_reports_mismatch():
    cells = hhjax.table_one()
    broken = (cells[0]._replace(rounded=cells[0].rounded + 1),) + cells[1:]
    mismatches = check_table_one(broken)
    assert len(mismatches) == 1
    assert mismatches[0][1] == cells[0].rounded


def test_tight_average_residual_about_four_times_smaller():
    for m in MEASURES:
        ar_j = hhjax.average_residual(hhjax.make_inequality('J', m))
        ar_h = hhjax.average_residual(hhjax.make_inequality('H', m))
        ar_th = hhjax.average_residual(hhjax.make_inequality('TH', m, 0.5))
        assert 3.7 <= ar_h / ar_th <= 4.8
        assert ar_th < ar_j


def test_relative_average_residual():
    th = hhjax.make_inequality('TH', UNIFORM, 0.5)
    h = hhjax.make_inequality('H', UNIFORM)
    assert abs(hhjax.relative_average_residual(th, h) - 0.25) < 1e-9
    assert abs(hhjax.relative_average_residual(th, th) - 1.) < 1e-15
    beta = hhjax.make_inequality('H', hhjax.make_beta22())
    assert abs(hhjax.relative_average_residual(th, beta) - 0.21) <= 0.005
    expo = hhjax.make_inequality('H', hhjax.make_trunc_exp(1.))
    assert abs(hhjax.relative_average_residual(th, expo) - 0.254) <= 0.001
    zero = make_custom_inequality(UNIFORM, UNIFORM, 'upper')
    with pytest.raises(hhjax.ValidationError):
        hhjax.relative_average_residual(th, zero)


def test_relative_residual():
    th = hhjax.make_inequality('TH', UNIFORM, 0.5)
    h = hhjax.make_inequality('H', UNIFORM)
    assert abs(hhjax.relative_residual(functions.square(), th, h) - 0.25) < 1e-10
    rr = hhjax.relative_residual(functions.exp(), th, h)
    assert 0. < rr < 1.
    with pytest.raises(hhjax.ValidationError):
        hhjax.relative_residual(functions.affine(1., 1.), th, h)


def test_tight_residual_strictly_smaller():
    for m in MEASURES:
        h = hhjax.make_inequality('H', m)
        th = hhjax.make_inequality('TH', m, 0.5)
        for name in ('square', 'exp', 'negentropy', 'powp:4', 'abs:0.3', 'vee:1,0,2,0.5'):
            f = hhjax.get_function(name)
            margin = hhjax.direct_residual(h, f) - hhjax.direct_residual(th, f)
            assert margin > 1e-6, (m.label, name, margin)


def test_smoothing_error_bounds():
    h = hhjax.make_inequality('H', UNIFORM)
    f = functions.abs(0.5)
    for eps in (1e-2, 1e-3, 1e-4):
        diag = hhjax.smoothing_error_bounds(f, eps, h)
        assert diag.passed
        assert diag.sup_deviation <= eps
        assert diag.residual_gap <= 2 * eps
    smooth = hhjax.smoothing_error_bounds(functions.square(), 1e-3, h)
    assert smooth.residual_gap < 1e-5
    assert diag.rr is None


def test_smoothing_error_bounds_with_reference():
    th = hhjax.make_inequality('TH', UNIFORM, 0.3)
    h = hhjax.make_inequality('H', UNIFORM)
    diag = hhjax.smoothing_error_bounds(functions.abs(0.5), 1e-3, th, spec0=h)
    assert isinstance(diag.rr, RRPerturbation)
    assert diag.rr == rr_perturbation_bound(functions.abs(0.5), 1e-3, th, h)
    assert 0. <= diag.rr.deviation <= diag.rr.bound


def test_rr_perturbation_bound():
    th = hhjax.make_inequality('TH', UNIFORM, 0.3)
    h = hhjax.make_inequality('H', UNIFORM)
    diag = rr_perturbation_bound(functions.abs(0.5), 1e-3, th, h)
    assert 0. <= diag.deviation <= diag.bound


def test_mean_value_theta():
    spec = hhjax.make_inequality('H', UNIFORM)
    f = functions.exp()
    theta = mean_value_theta(spec, f)
    assert theta is not None and 0. < theta < 1.
    value = float(phi_evaluator(spec)(theta)) * float(d1_or_fd(f, 1.) - d1_or_fd(f, 0.))
    assert abs(value - hhjax.direct_residual(spec, f)) < 1e-3


def test_residual_report_json():
    h = hhjax.make_inequality('H', UNIFORM)
    report = hhjax.residual_report(h, functions.square())
    record = json.loads(report_to_json(report))
    assert set(record) == {'direct', 'curvature', 'kappa', 'ar', 'notes'}
    assert abs(record['direct'] - 1 / 6) < 1e-12
    assert abs(record['curvature'] - 1 / 6) < 1e-10
    assert record['kappa'] == 1.
    assert abs(record['ar'] - 1 / 12) < 1e-9
    kinked = hhjax.residual_report(h, functions.abs(0.5))
    assert kinked.curvature is None
    assert 'kinks' in kinked.notes
