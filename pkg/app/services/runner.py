import json
import logging
from datetime import datetime, timezone
from typing import Callable, List, Optional

import numpy as np
from sqlalchemy.exc import SQLAlchemyError

from app.config import VERSION
from app.database.base import Session
from app.database.models import CheckResult, Run
from app.experiment import ExperimentConfig
from errors import LabError
from flow import (FlowSeries, energy_identity_residual, f_functional, mean_value_report, run_flow)
from geometry import GraphField
from loja import (SeriesAnnotator, discrete_flow_inequality, fill_shrinker_scales, scale_compatibility_report,
                  uniqueness_report)
from report import CheckRow, ReportBundle, emit_report

logger = logging.getLogger(__name__)


def _check_row(name: str, params: dict, lhs: float, rhs: float, constant: float, passed: bool) -> CheckRow:
    text = ';'.join(f'{key}={value}' for key, value in params.items())
    return CheckRow(name, text, float(lhs), float(rhs), float(constant), bool(passed))


def _stationarity(config: ExperimentConfig, series: FlowSeries) -> CheckRow:
    worst = float(max(np.nanmax(series.column('phi_L2')), np.nanmax(series.column('u_L2'))))
    tol = config.stationarity_tol
    return _check_row('stationarity', {'tol': tol}, worst, tol, worst / tol, worst < tol)


def _monotone(config: ExperimentConfig, series: FlowSeries) -> CheckRow:
    F = series.column('F')
    rise = float(np.max(np.diff(F))) if F.size > 1 else 0.0
    return _check_row('monotone', {'slack': 1e-9}, rise, 1e-9, 0.0, series.is_monotone())


def _energy(config: ExperimentConfig, series: FlowSeries) -> CheckRow:
    residual = energy_identity_residual(series, relative=True)
    tol = config.energy_tol
    return _check_row('energy', {'relative': True, 'power': 'discrete'}, residual, tol, residual / tol, residual < tol)


def _flow_inequality(config: ExperimentConfig, series: FlowSeries) -> CheckRow:
    report = discrete_flow_inequality(series, config.tau, config.t_min)
    lhs = float(np.max(report.ratios)) if report.ratios.size else 0.0
    params = {'tau': config.tau, 't_min': config.t_min, 'stable': report.stable, 'reference': report.reference}
    return _check_row('flow_inequality', params, lhs, report.K, report.K_fit, report.passed)


def _uniqueness(config: ExperimentConfig, series: FlowSeries) -> CheckRow:
    report = uniqueness_report(series, config.axis_tol, config.sum_tol, phi_tol=config.phi_tol)
    params = {'axis_tol': config.axis_tol, 'sum_tol': config.sum_tol, 'phi_tol': config.phi_tol,
              'final_phi': report.final_phi, 'sqrt_tail': report.sqrt_tail,
              'diagnosis': report.diagnosis, 'decay_rate': report.decay_rate}
    return _check_row('uniqueness', params, report.axis_tail, config.axis_tol, report.axis_variation, report.passed)


def _scale(config: ExperimentConfig, series: FlowSeries) -> CheckRow:
    report = scale_compatibility_report(series)
    return _check_row('scale', {'tail_start': report.tail_start}, report.mu_fit, 0.0, report.mu_fit, report.passed)


def _mean_value(config: ExperimentConfig, series: FlowSeries) -> CheckRow:
    report = mean_value_report(series)
    return _check_row('mean_value', {'beta': report.beta, 'pairs': report.pairs}, report.constant, np.inf,
                      report.constant, report.passed)


CHECK_SOURCES = {
    'stationarity': 'flow.run_flow',
    'monotone': 'flow.FlowSeries.is_monotone',
    'energy': 'flow.energy_identity_residual',
    'flow_inequality': 'loja.discrete_flow_inequality',
    'uniqueness': 'loja.uniqueness_report',
    'scale': 'loja.scale_compatibility_report',
    'mean_value': 'flow.mean_value_report',
}

CHECK_RUNNERS = {
    'stationarity': _stationarity,
    'monotone': _monotone,
    'energy': _energy,
    'flow_inequality': _flow_inequality,
    'uniqueness': _uniqueness,
    'scale': _scale,
    'mean_value': _mean_value,
}


def run_checks(config: ExperimentConfig, series: FlowSeries) -> List[CheckRow]:
    """
    Выполняет включённые проверки; ошибка проверки даёт непройденную строку.
    Runs the enabled checks; a failing check yields a failed row.
    """
    rows = []
    for name in config.checks:
        try:
            rows.append(CHECK_RUNNERS[name](config, series))
        except LabError as e:
            logger.warning(f"Проверка {name} не выполнена: {e}")
            rows.append(_check_row(name, {'error': str(e)}, np.nan, np.nan, np.nan, False))
    return rows


def _register_run(config: ExperimentConfig, command: str) -> Optional[int]:
    session = Session()
    try:
        run = Run(name=config.name, command=command, config=json.dumps(config.echo(), sort_keys=True),
                  seed=config.seed, out_dir=str(config.output_dir))
        session.add(run)
        session.commit()
        return run.id
    except SQLAlchemyError as e:
        session.rollback()
        logger.error(f"Ошибка записи прогона {config.name} в реестр: {e}", exc_info=True)
        return None
    finally:
        session.close()


def finish_run(run_id: Optional[int], status: str, halt_reason: Optional[str], checks: List[CheckRow]) -> None:
    """Обновляет статус прогона и сохраняет результаты проверок / Updates the run and stores check results."""
    if run_id is None:
        return
    session = Session()
    try:
        run = session.get(Run, run_id)
        run.status = status
        run.halt_reason = halt_reason
        run.finished_at = datetime.now(timezone.utc)
        for check in checks:
            run.checks.append(CheckResult(check=check.check, params=check.params, lhs=check.lhs, rhs=check.rhs,
                                          constant=check.constant, passed=check.passed))
        session.commit()
    except SQLAlchemyError as e:
        session.rollback()
        logger.error(f"Ошибка обновления прогона {run_id}: {e}", exc_info=True)
    finally:
        session.close()


def register_checks(name: str, command: str, checks: List[CheckRow], params: Optional[dict] = None) -> None:
    """Записывает прогон verify/scalar-demo целиком / Records a verify or scalar-demo invocation."""
    session = Session()
    try:
        run = Run(name=name, command=command, config=json.dumps(params or {}, sort_keys=True), seed=0,
                  status='passed' if all(c.passed for c in checks) else 'failed',
                  finished_at=datetime.now(timezone.utc))
        run.checks = [CheckResult(check=c.check, params=c.params, lhs=c.lhs, rhs=c.rhs, constant=c.constant,
                                  passed=c.passed) for c in checks]
        session.add(run)
        session.commit()
    except SQLAlchemyError as e:
        session.rollback()
        logger.error(f"Ошибка записи {command} в реестр: {e}", exc_info=True)
    finally:
        session.close()


def _final_axis(bundle: Optional[ReportBundle]) -> np.ndarray:
    if bundle is None or bundle.series is None or bundle.partial:
        return np.full(2, np.nan)
    axis = np.column_stack([bundle.series.column('axis_a'), bundle.series.column('axis_b')])
    finite = np.all(np.isfinite(axis), axis=1)
    return axis[finite][-1] if finite.any() else np.full(2, np.nan)


def tilt_group_checks(configs: List[ExperimentConfig], bundles: List[Optional[ReportBundle]],
                      tol: float = 1e-3) -> List[CheckRow]:
    """
    Прогоны одной группы наклона (разные возмущения с общим наклоном в ядре) должны сойтись
    к осям, отличающимся меньше чем на tol. Одна строка на группу из двух и более прогонов.
    Runs of one tilt group (different perturbations sharing the kernel tilt) must converge
    to axes within tol of each other. One row per group with two or more runs.
    """
    groups = {}
    for config, bundle in zip(configs, bundles):
        if config.tilt_group:
            groups.setdefault(config.tilt_group, []).append((config.name, _final_axis(bundle)))
    rows = []
    for group, members in sorted(groups.items()):
        if len(members) < 2:
            logger.warning(f"Группа наклона {group} содержит один прогон, сравнивать не с чем")
            continue
        axes = np.array([axis for _, axis in members])
        spread = np.linalg.norm(axes[:, None, :] - axes[None, :, :], axis=-1)
        worst = float(np.max(spread)) if np.all(np.isfinite(axes)) else np.inf
        params = {'group': group, 'runs': '+'.join(name for name, _ in members)}
        logger.info(f"Группа наклона {group}: расхождение осей {worst:.3g}")
        rows.append(_check_row('tilt_group', params, worst, tol, worst / tol, worst < tol))
    return rows


def run_experiment(config: ExperimentConfig, plots: bool = True,
                   on_row: Optional[Callable] = None) -> ReportBundle:
    """
    Запуск потока по конфигурации, проверки и выгрузка отчёта.
    Runs the flow for a configuration, the checks, and writes the report.

    Срыв графа даёт частичный набор с причиной остановки. / A graph breakdown yields a
    partial bundle carrying the halt reason.
    """
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    run_id = _register_run(config, 'simulate')
    logger.info(f"Эксперимент {config.name}: steps={config.steps}, dt={config.dt}, out={out}")

    state = config.initial_state()
    annotator = None
    if config.annotate:
        annotator = SeriesAnnotator(config.fit_radius, config.eps0, config.ell, config.C_ell,
                                    config.n_starts, config.seed)

    def callback(current, row):
        if annotator is not None:
            annotator(current, row)
        if on_row is not None:
            on_row(current, row)

    series = run_flow(state, config.steps, config.cadence, config.checkpoint_every, out / 'snapshots',
                      on_row=callback)
    if config.annotate:
        fill_shrinker_scales(series)
    checks = run_checks(config, series)

    F_C = f_functional(GraphField.zeros(config.grid()))
    gap = np.abs(series.column('F') - F_C)
    bundle = ReportBundle(
        out_dir=out,
        series=series,
        checks=checks,
        families={config.name: (series.column('phi_L2_BR'), gap)},
        snapshots=[str(p) for p in series.checkpoints],
        manifest={
            'name': config.name,
            'version': VERSION,
            'seed': config.seed,
            'config': config.echo(),
            'F_C': F_C,
            'steps_completed': series.final_state.step_index if series.final_state is not None else 0,
            'provenance': {
                'diagnostics.csv': 'flow.run_flow + loja.SeriesAnnotator + loja.fill_shrinker_scales',
                'kernel.csv': 'spectral.kernel_amplitudes',
                'checks.csv': {name: CHECK_SOURCES[name] for name in config.checks},
            },
        },
    )
    emit_report(bundle, plots=plots)
    status = 'halted' if bundle.partial else ('passed' if bundle.passed else 'failed')
    finish_run(run_id, status, bundle.halt_reason, checks)
    logger.info(f"Эксперимент {config.name} завершён: {status}")
    return bundle
