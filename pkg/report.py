"""
Модуль выгрузки отчётов прогона: CSV, SVG и manifest.json.
Module for emitting run reports: CSV, SVG and manifest.json.

Основные возможности / Main features:
- Диагностика с фиксированным порядком столбцов и 17 значащими цифрами / Diagnostics with a
  fixed column order and 17 significant digits
- Таблица проверок {check, params, lhs, rhs, constant, pass} / Check table
- Log-log графики (F - F_C) от ||phi|| с подписью наклона / Log-log plots with slope labels
- Манифест: конфигурация, версия, причина остановки / Manifest: config, version, halt reason
"""
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from errors import FitError, InputError
from flow import FlowSeries
from loja import exponent_fit

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'
CHECK_COLUMNS = ['check', 'params', 'lhs', 'rhs', 'constant', 'pass']

# stable SVG element ids and editable <text> labels
plt.rcParams['svg.hashsalt'] = 'shrinkerlab'
plt.rcParams['svg.fonttype'] = 'none'


@dataclass
class CheckRow:
    """
    Строка таблицы проверок.
    One row of the check table.
    """
    check: str
    params: str
    lhs: float
    rhs: float
    constant: float
    passed: bool

    def as_dict(self) -> Dict[str, Any]:
        return {'check': self.check, 'params': self.params, 'lhs': self.lhs, 'rhs': self.rhs,
                'constant': self.constant, 'pass': self.passed}


@dataclass
class ReportBundle:
    """
    Результаты прогона, готовые к выгрузке.
    Run results ready to be written out.

    Attributes:
        out_dir (Path): каталог прогона / run directory
        series (FlowSeries | None): диагностика потока / flow diagnostics
        checks (list[CheckRow]): результаты проверок / check results
        families (dict): log-log данные для графиков: имя -> (x, y) / plot data
        manifest (dict): эхо конфигурации и происхождение чисел / config echo and provenance
        snapshots (list[str]): пути снимков / snapshot paths
        paths (dict): записанные файлы / written files
    """
    out_dir: Path
    series: Optional[FlowSeries] = None
    checks: List[CheckRow] = field(default_factory=list)
    families: Dict[str, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    manifest: Dict[str, Any] = field(default_factory=dict)
    snapshots: List[str] = field(default_factory=list)
    paths: Dict[str, Path] = field(default_factory=dict)

    @property
    def halt_reason(self) -> Optional[str]:
        return self.series.halt_reason if self.series is not None else None

    @property
    def partial(self) -> bool:
        return self.halt_reason is not None

    @property
    def passed(self) -> bool:
        return not self.partial and all(check.passed for check in self.checks)


def _prepare(path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise InputError(f"Каталог {path.parent} недоступен для записи: {e}") from e
    return path


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    """CSV без индекса с 17 значащими цифрами / CSV without index, 17 significant digits."""
    path = _prepare(Path(path))
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    except OSError as e:
        raise InputError(f"Не удалось записать {path}: {e}") from e
    return path


def write_diagnostics(series: FlowSeries, path: Path) -> Path:
    return write_frame(series.to_frame(), path)


def checks_frame(checks: Sequence[CheckRow]) -> pd.DataFrame:
    return pd.DataFrame([check.as_dict() for check in checks], columns=CHECK_COLUMNS)


def plot_loglog(families: Dict[str, Tuple[np.ndarray, np.ndarray]], path: Path,
                xlabel: str = '||phi||_{L^2(B_R)}', ylabel: str = '|F - F_C|') -> Path:
    """
    Log-log график: одна линия на семейство и подпись с подогнанным наклоном.
    Log-log plot: one line per family and a label with the fitted slope.
    """
    path = _prepare(Path(path))
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for name, (x, y) in families.items():
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        try:
            fit = exponent_fit(x, y)
            label = f"{name}: slope {fit.slope:.3f}"
        except FitError as e:
            logger.warning(f"Наклон семейства {name} не подогнан: {e}")
            label = f"{name}: slope n/a"
        keep = (x > 0) & (y > 0)
        line, = ax.loglog(x[keep], y[keep], marker='o', label=label)
        line.set_gid(f'family-{name}')
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, which='both', alpha=0.3)
    ax.legend()
    try:
        fig.savefig(path, format='svg', metadata={'Date': None})
    except OSError as e:
        raise InputError(f"Не удалось записать {path}: {e}") from e
    finally:
        plt.close(fig)
    return path


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Не сериализуется: {type(value).__name__}")


def write_manifest(manifest: Dict[str, Any], path: Path) -> Path:
    path = _prepare(Path(path))
    try:
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(manifest, f, indent=2, sort_keys=True, default=_json_default)
    except OSError as e:
        raise InputError(f"Не удалось записать {path}: {e}") from e
    return path


def emit_report(bundle: ReportBundle, plots: bool = True) -> Dict[str, Path]:
    """
    Записывает диагностику, ядро, проверки, графики и манифест в bundle.out_dir.
    Writes diagnostics, kernel amplitudes, checks, plots and the manifest to bundle.out_dir.

    Raises:
        InputError: каталог недоступен для записи / the output path is not writable
    """
    out = Path(bundle.out_dir)
    if bundle.series is not None:
        bundle.paths['diagnostics'] = write_diagnostics(bundle.series, out / 'diagnostics.csv')
        bundle.paths['kernel'] = write_frame(bundle.series.kernel_frame(), out / 'kernel.csv')
    if bundle.checks:
        bundle.paths['checks'] = write_frame(checks_frame(bundle.checks), out / 'checks.csv')
    if plots and bundle.families:
        bundle.paths['plot'] = plot_loglog(bundle.families, out / 'loglog.svg')
    manifest = dict(bundle.manifest)
    manifest.update({
        'halt_reason': bundle.halt_reason,
        'passed': bundle.passed,
        'checks': [check.as_dict() for check in bundle.checks],
        'snapshots': list(bundle.snapshots),
        'files': {name: p.name for name, p in sorted(bundle.paths.items())},
    })
    bundle.paths['manifest'] = write_manifest(manifest, out / 'manifest.json')
    logger.info(f"Отчёт записан в {out}: {sorted(bundle.paths)}")
    return bundle.paths
