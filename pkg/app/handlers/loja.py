from pathlib import Path

import numpy as np
import pandas as pd

from app.config import OUTPUT_ROOT
from app.handlers.common import exit_code, print_checks, save_checks
from app.services.runner import register_checks
from errors import InputError
from flow import FlowSeries, FlowState, f_functional, mean_value_report, read_snapshot
from geometry import GraphField
from loja import (FAMILY_MODES, cylindrical_scale, discrete_flow_inequality, fit_cylinder,
                  gradient_lojasiewicz_report, mode_family, uniqueness_report)
from report import CheckRow, plot_loglog


def register(subparsers) -> None:
    parser = subparsers.add_parser('loja', help='проверки Лоясевича / Lojasiewicz checks')
    parser.add_argument('source', help="снимок JSON, diagnostics.csv или 'families' / snapshot, series or 'families'")
    parser.add_argument('--R', type=float, default=4.0)
    parser.add_argument('--tau', type=float, default=0.5)
    parser.add_argument('--t-min', type=float, default=5.0)
    parser.add_argument('--out', default=None, help='каталог вывода / output directory')
    parser.set_defaults(handler=handle)


def _snapshot_checks(path: Path, R: float) -> list:
    state = read_snapshot(path)
    F_C = f_functional(GraphField.zeros(state.grid))
    fit = fit_cylinder(state.sample, R)
    scale = cylindrical_scale(state.sample, cylinder=fit.cylinder)
    phi_l1, phi_l2 = state.phi_norm('L1', R), state.phi_norm('L2', R)
    first_rhs = phi_l1 + np.exp(-R ** 2 / 4.0)
    gradient_lhs = abs(state.F - F_C)
    gradient_rhs = phi_l2 ** 1.5 + np.exp(-1.5 * R ** 2 / 4.0) + np.exp(-3.5 * (R - 1.0) ** 2 / 16.0)
    params = f'R={R};s={state.s};r_l={scale.radius:.6f}'
    return [
        CheckRow('first_lojasiewicz', params, fit.distance ** 2, first_rhs, fit.distance ** 2 / first_rhs,
                 bool(fit.converged and R <= scale.radius - 1.0)),
        CheckRow('gradient_lojasiewicz', params, gradient_lhs, gradient_rhs, gradient_lhs / gradient_rhs,
                 bool(np.isfinite(gradient_lhs / gradient_rhs))),
    ]


def _series_checks(path: Path, args) -> list:
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as e:
        raise InputError(f"Не удалось прочитать ряд {path}: {e}") from e
    series = FlowSeries.from_frame(frame)
    F = series.column('F')
    F_C = float(np.nanmin(F)) if np.isfinite(F).any() else None
    rows = []
    flow = discrete_flow_inequality(series, args.tau, args.t_min, F_C=F_C)
    rows.append(CheckRow('flow_inequality', f'tau={args.tau};t_min={args.t_min};F_C=min(F)', float(flow.K_fit),
                         flow.K, flow.K_fit, flow.passed))
    mean_value = mean_value_report(series)
    rows.append(CheckRow('mean_value', f'beta={mean_value.beta}', mean_value.constant, np.inf,
                         mean_value.constant, mean_value.passed))
    if 'axis_a' in frame and frame['axis_a'].notna().any():
        unique = uniqueness_report(series)
        rows.append(CheckRow('uniqueness', f'diagnosis={unique.diagnosis}', unique.axis_tail, 1e-3,
                             unique.axis_variation, unique.passed))
    return rows


def _family_checks(R: float, out: Path) -> list:
    rows, families = [], {}
    for kind in FAMILY_MODES:
        fields = mode_family(kind)
        report = gradient_lojasiewicz_report(fields, R)
        families[kind] = (np.array([FlowState(0.0, u).phi_norm('L2', R) for u in fields]), report.lhs)
        slope = report.exponent.slope if report.exponent else np.nan
        rows.append(CheckRow(f'gradient_lojasiewicz_{kind}', f'R={R};slope={slope:.4f}', float(np.max(report.lhs)),
                             float(np.max(sum(report.rhs_terms.values()))), report.constant, report.passed))
    if families:
        plot_loglog(families, out / 'families.svg')
    return rows


def handle(args) -> int:
    out = Path(args.out) if args.out else OUTPUT_ROOT / 'loja'
    source = Path(args.source)
    if args.source == 'families':
        checks = _family_checks(args.R, out)
    elif source.suffix == '.json':
        checks = _snapshot_checks(source, args.R)
    elif source.suffix == '.csv':
        checks = _series_checks(source, args)
    else:
        raise InputError(f"Ожидался снимок .json, ряд .csv или 'families', получено {args.source}")
    print_checks(checks)
    save_checks(checks, out / 'checks.csv')
    register_checks(f'loja-{source.stem}', 'loja', checks, {'source': args.source, 'R': args.R})
    return exit_code(checks)
