from __future__ import annotations
from typing import List, NamedTuple, Optional, Sequence
import argparse
import csv
import io
import json
import logging
import os
import sys

from hhjax.bounds import all_bounds, optimal_pivot
from hhjax.functions import get_function
from hhjax.karamata import KINDS, KaramataCurve, make_inequality, parse_inequality, sample_curve, \
    curve_filename, write_curve_csv
from hhjax.measure import parse_measure
from hhjax.quad import QuadConfig, check_quad_config
from hhjax.residual import (TABLE_NOTE, calibrate_kappa, check_table_one, relative_average_residual,
                            relative_residual, residual_report, table_one)
from hhjax.utils import ValidationError, NumericFailure, format_float, check_pivot
from hhjax.version import __version__

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3

FORMATS = ('csv', 'json', 'svg')
TABLE_METHODS = {'moments': 'adaptive Gauss-Kronrod moments of G',
                 'quadrature': 'adaptive Gauss-Kronrod of closed-form phi'}


class RunConfig(NamedTuple):
    measure: str
    fn: Optional[str]
    t: Optional[float]
    grid_n: int
    out: Optional[str]
    format: Optional[str]
    quad: QuadConfig
    assume_kappa: Optional[float]
    check: bool


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--abs-tol', type=float, default=QuadConfig().abs_tol, help='Absolute quadrature tolerance')
    common.add_argument('--rel-tol', type=float, default=QuadConfig().rel_tol, help='Relative quadrature tolerance')
    common.add_argument('--max-depth', type=int, default=QuadConfig().max_depth, help='Maximal bisection depth')
    common.add_argument('--grid', type=int, default=101, help='Number of grid points of sampled curves')
    common.add_argument('--format', choices=FORMATS, default=None, help='Output format')
    common.add_argument('--out', type=str, default=None, help='Output file (directory for curve)')
    common.add_argument('--assume-kappa', type=float, default=None,
                        help='Curvature constant used instead of the calibrated one')
    common.add_argument('--check', action='store_true', help='Compare the table with the golden values')
    common.add_argument('--measure', type=str, default='uniform',
                        help='uniform | beta22 | truncexp<lambda> | discrete:<x:p,...> with optional @a,b')
    common.add_argument('--fn', type=str, default=None, help='Registry function, e.g. square, powp:4, vee:1,0,1,0.5')
    common.add_argument('--t', type=float, default=None, help='Pivot of the tight bound (default midpoint)')
    common.add_argument('--optimal-t', action='store_true', help='Report the optimal pivot (needs --fn)')
    common.add_argument('-v', '--verbose', action='count', default=0, help='-v for info, -vv for debug logs')
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(prog='hhjax', description='Jensen, Hermite-Hadamard and tight '
                                                               'Hermite-Hadamard bounds and their residuals')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    commands = parser.add_subparsers(dest='command', required=True)
    commands.add_parser('bounds', parents=[common], help='Bounds of ∫ f dG for one measure and function')
    commands.add_parser('curve', parents=[common], help='Karamata functions of J, H and TH as CSV (and SVG)')
    commands.add_parser('table', parents=[common], help='Average residuals of the three inequalities')
    compare = commands.add_parser('compare', parents=[common], help='Relative (average) residuals')
    compare.add_argument('--i', dest='inequality', required=True, help='Inequality KIND:measure[:t]')
    compare.add_argument('--i0', dest='reference', required=True, help='Reference inequality KIND:measure[:t]')
    return parser


def run_config(args: argparse.Namespace) -> RunConfig:
    quad = QuadConfig(abs_tol=args.abs_tol, rel_tol=args.rel_tol, max_depth=args.max_depth)
    check_quad_config(quad)
    if args.grid < 2:
        raise ValidationError(f'--grid must be at least 2, received {args.grid}')
    return RunConfig(args.measure, args.fn, args.t, args.grid, args.out, args.format, quad,
                     args.assume_kappa, args.check)


def _emit(text: str, out: Optional[str]):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, 'w', newline='') as stream:
            stream.write(text)


def _dumps(record) -> str:
    return json.dumps(record, indent=2) + '\n'


def _kappa(cfg: RunConfig) -> float:
    if cfg.assume_kappa is not None:
        logger.info('using assumed kappa = %g', cfg.assume_kappa)
        return cfg.assume_kappa
    return calibrate_kappa(cfg=cfg.quad).kappa


def cmd_bounds(cfg: RunConfig, optimal_t: bool = False) -> int:
    measure = parse_measure(cfg.measure)
    if cfg.fn is None:
        raise ValidationError('bounds needs --fn')
    f = get_function(cfg.fn, measure.interval)
    result = all_bounds(measure, f, cfg.t, cfg.quad)
    record = dict(result._asdict(), measure=measure.label, fn=f.label,
                  residual_h=result.h_upper - result.integral,
                  residual_th=result.th_upper - result.integral,
                  residual_jensen=result.integral - result.jensen_lower)
    if optimal_t:
        pivot = optimal_pivot(measure, f, cfg=cfg.quad)
        record.update(optimal_t=pivot.t_star, optimal_gap=pivot.d_star)
    _emit(_dumps(record), cfg.out)
    return EXIT_OK


def _svg_polyline(curve: KaramataCurve, x_of, y_of) -> str:
    return ' '.join(f'{x_of(u):.3f},{y_of(p):.3f}' for u, p in zip(curve.grid.tolist(), curve.phi.tolist()))


def render_svg(curves: Sequence[KaramataCurve], width: int = 640, height: int = 400, margin: int = 50) -> str:
    """
    Minimal SVG plot of sampled curves with axes and a legend.

    Args:
        curves: Curves sharing an interval.
        width: Width in pixels.
        height: Height in pixels.
        margin: Margin around the plotting area in pixels.

    Returns:
        SVG document.

    """
    a, b = curves[0].spec.g.interval
    top = max(max(c.phi.tolist()) for c in curves)
    top = top if top > 0 else 1.
    colors = ('#1f77b4', '#d62728', '#2ca02c', '#9467bd')

    def x_of(u):
        return margin + (u - a) / (b - a) * (width - 2 * margin)

    def y_of(p):
        return height - margin - p / top * (height - 2 * margin)

    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>',
             f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
             f'<text x="{margin}" y="{height - margin + 20}" font-size="12">{format_float(a, 6)}</text>',
             f'<text x="{width - margin}" y="{height - margin + 20}" font-size="12" text-anchor="end">'
             f'{format_float(b, 6)}</text>',
             f'<text x="{margin - 5}" y="{margin}" font-size="12" text-anchor="end">{format_float(top, 6)}</text>',
             f'<text x="{width / 2:.1f}" y="{height - 10}" font-size="12" text-anchor="middle">u</text>']
    for i, curve in enumerate(curves):
        color = colors[i % len(colors)]
        lines.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'points="{_svg_polyline(curve, x_of, y_of)}"/>')
        lines.append(f'<text x="{width - margin - 80}" y="{margin + 16 * (i + 1)}" font-size="12" '
                     f'fill="{color}">{curve.spec.kind}</text>')
    lines.append('</svg>')
    return '\n'.join(lines) + '\n'


def cmd_curve(cfg: RunConfig) -> int:
    measure = parse_measure(cfg.measure)
    a, b = measure.interval
    t = 0.5 * (a + b) if cfg.t is None else cfg.t
    check_pivot(t, a, b)
    out_dir = '.' if cfg.out is None else cfg.out
    os.makedirs(out_dir, exist_ok=True)

    curves = [sample_curve(make_inequality(kind, measure, t if kind == 'TH' else None, cfg=cfg.quad),
                           cfg.grid_n, cfg.quad)
              for kind in KINDS]
    written = []
    for curve in curves:
        path = os.path.join(out_dir, curve_filename(curve))
        write_curve_csv(curve, path)
        written.append(path)
    if cfg.format == 'svg':
        path = os.path.join(out_dir, f'curves_{measure.label}_{cfg.grid_n}.svg')
        _emit(render_svg(curves), path)
        written.append(path)
    for path in written:
        logger.info('wrote %s', path)
        print(path)
    return EXIT_OK


def _table_text(cells) -> str:
    columns = list(dict.fromkeys(c.measure for c in cells))
    lines = ['AR x 10^3'.ljust(8) + ''.join(name.rjust(22) for name in columns)]
    for kind in KINDS:
        row = {c.measure: c for c in cells if c.kind == kind}
        lines.append(kind.ljust(8) + ''.join(f'{format_float(row[m].scaled, 6):>14} ({row[m].rounded:>4})'
                                             for m in columns))
    lines.append(f'note: {TABLE_NOTE}')
    return '\n'.join(lines) + '\n'


def cmd_table(cfg: RunConfig) -> int:
    method = 'moments'
    cells = table_one(0.5 if cfg.t is None else cfg.t, cfg.quad, method)
    if cfg.format == 'json':
        provenance = {'version': __version__, 'method': TABLE_METHODS[method],
                      'abs_tol': cfg.quad.abs_tol, 'rel_tol': cfg.quad.rel_tol}
        text = _dumps({'cells': [dict(c._asdict(), **provenance) for c in cells], 'note': TABLE_NOTE})
    elif cfg.format == 'csv':
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(['kind', 'measure', 't', 'ar', 'ar_x1000', 'rounded', 'note'])
        for c in cells:
            writer.writerow([c.kind, c.measure, '' if c.t is None else format_float(c.t),
                             format_float(c.ar), format_float(c.scaled), c.rounded, TABLE_NOTE])
        text = buffer.getvalue()
    else:
        text = _table_text(cells)
    _emit(text, cfg.out)
    if cfg.check:
        mismatches = check_table_one(cells)
        for cell, expected in mismatches:
            print(f'mismatch {cell.kind}/{cell.measure}: {cell.rounded} != {expected}', file=sys.stderr)
        return EXIT_MISMATCH if mismatches else EXIT_OK
    return EXIT_OK


def cmd_compare(cfg: RunConfig, inequality: str, reference: str, optimal_t: bool) -> int:
    spec = parse_inequality(inequality, cfg.t)
    spec0 = parse_inequality(reference, cfg.t)
    record = {'inequality': inequality, 'reference': reference,
              'rar': relative_average_residual(spec, spec0, cfg.quad)}
    if cfg.fn is not None:
        f = get_function(cfg.fn, spec.g.interval)
        kappa = _kappa(cfg)
        record['fn'] = f.label
        record['rr'] = relative_residual(f, spec, spec0, cfg.quad)
        record['reports'] = [residual_report(s, f, kappa, cfg.quad)._asdict() for s in (spec, spec0)]
        if optimal_t:
            pivot = optimal_pivot(spec.g, f, cfg=cfg.quad)
            record['optimal_t'] = pivot.t_star
            record['optimal_gap'] = pivot.d_star
    elif optimal_t:
        raise ValidationError('--optimal-t needs --fn')
    _emit(_dumps(record), cfg.out)
    return EXIT_OK


def _configure_logging(verbose: int):
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(stream=sys.stderr, level=level, format='%(levelname)s %(name)s: %(message)s')
    logging.getLogger('hhjax').setLevel(level)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Command line entry point.

    Args:
        argv: Arguments without the program name, defaults to ``sys.argv[1:]``.

    Returns:
        Exit status: 0 success, 1 table mismatch, 2 invalid input, 3 numerical failure.

    """
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        cfg = run_config(args)
        if args.command == 'bounds':
            return cmd_bounds(cfg, args.optimal_t)
        if args.command == 'curve':
            return cmd_curve(cfg)
        if args.command == 'table':
            return cmd_table(cfg)
        return cmd_compare(cfg, args.inequality, args.reference, args.optimal_t)
    except NumericFailure as e:
        print(f'numerical failure: {e} (value={e.value}, error estimate={e.error_estimate})', file=sys.stderr)
        return EXIT_NUMERIC
    except (ValidationError, KeyError, ValueError) as e:
        print(f'invalid input: {e}', file=sys.stderr)
        return EXIT_VALIDATION
