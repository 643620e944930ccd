import asyncio
import logging
from typing import List, Optional, Sequence

from icecream import ic

from app.experiment import ExperimentConfig
from app.services.runner import run_experiment, tilt_group_checks
from errors import ConfigError, LabError
from report import CheckRow, ReportBundle


class BatchService:
    """
    Сервис для параллельного запуска нескольких конфигураций
    / Service for running several configurations in parallel

    Каждая конфигурация пишет в собственный каталог; один писатель на каталог.
    / Every configuration writes to its own directory; one writer per directory.
    """
    def __init__(self, configs: Sequence[ExperimentConfig], max_workers: int = 2, plots: bool = True):
        """
        Инициализация сервиса
        / Initialize the service

        Args:
            configs: конфигурации прогонов / run configurations
            max_workers: число одновременных прогонов / number of concurrent runs
            plots: выгружать SVG / emit SVG plots

        Raises:
            ConfigError: если два прогона пишут в один каталог / if two runs share an output directory
        """
        directories = [c.output_dir.resolve() for c in configs]
        shared = sorted({str(d) for d in directories if directories.count(d) > 1})
        if shared:
            raise ConfigError(f"Несколько прогонов пишут в один каталог: {shared}", ['out_dir'])
        self.configs = list(configs)
        self.max_workers = max(1, max_workers)
        self.plots = plots
        self.bundles: List[Optional[ReportBundle]] = []
        self.group_checks: List[CheckRow] = []

    async def _run_one(self, semaphore: asyncio.Semaphore, config: ExperimentConfig) -> Optional[ReportBundle]:
        async with semaphore:
            try:
                return await asyncio.to_thread(run_experiment, config, self.plots)
            except LabError as e:
                logging.error(f"Ошибка прогона {config.name}: {e}", exc_info=True)
                return None

    async def run(self) -> List[Optional[ReportBundle]]:
        """
        Запуск всех конфигураций; порядок результатов совпадает с порядком конфигураций.
        / Runs all configurations; results keep the configuration order.

        Прогоны с общим tilt_group затем сравниваются по итоговой оси (group_checks).
        / Runs sharing a tilt_group are then compared by their final axis (group_checks).
        """
        semaphore = asyncio.Semaphore(self.max_workers)
        ic([c.name for c in self.configs])
        logging.info(f"Пакетный запуск: {len(self.configs)} конфигураций, workers={self.max_workers}")
        self.bundles = list(await asyncio.gather(*(self._run_one(semaphore, c) for c in self.configs)))
        self.group_checks = tilt_group_checks(self.configs, self.bundles)
        return self.bundles

    @property
    def passed(self) -> bool:
        runs_passed = bool(self.bundles) and all(b is not None and b.passed for b in self.bundles)
        return runs_passed and all(check.passed for check in self.group_checks)
