import asyncio
import logging

from app.experiment import load_preset, validate_config
from app.handlers.common import print_checks
from app.services.batch import BatchService
from app.services.runner import run_experiment


def register(subparsers) -> None:
    parser = subparsers.add_parser('simulate', help='прогон потока по конфигурации / run the flow from a config')
    parser.add_argument('config', nargs='+', help='имя пресета из config/ или путь к JSON / preset name or JSON path')
    parser.add_argument('--batch', action='store_true', help='параллельный запуск нескольких конфигураций')
    parser.add_argument('--workers', type=int, default=2)
    parser.add_argument('--steps', type=int, default=None, help='переопределить число шагов / override steps')
    parser.add_argument('--out', default=None, help='каталог вывода / output directory')
    parser.add_argument('--no-plots', action='store_true')
    parser.set_defaults(handler=handle)


def _configs(args):
    configs = []
    for name in args.config:
        config = load_preset(name)
        overrides = {}
        if args.steps is not None:
            overrides['steps'] = args.steps
        if args.out is not None:
            overrides['out_dir'] = args.out if len(args.config) == 1 else f'{args.out}/{config.name}'
        if overrides:
            config = validate_config({**config.echo(), **overrides}, name)
        configs.append(config)
    return configs


def handle(args) -> int:
    configs = _configs(args)
    plots = not args.no_plots
    if args.batch or len(configs) > 1:
        service = BatchService(configs, args.workers, plots)
        bundles = asyncio.run(service.run())
        for config, bundle in zip(configs, bundles):
            status = 'error' if bundle is None else ('halted' if bundle.partial else
                                                    ('passed' if bundle.passed else 'failed'))
            print(f'{config.name}: {status}')
        if service.group_checks:
            print_checks(service.group_checks)
        return 0 if service.passed else 1
    bundle = run_experiment(configs[0], plots)
    print_checks(bundle.checks)
    if bundle.partial:
        logging.warning(f"Прогон {configs[0].name} остановлен: {bundle.halt_reason}")
        print(f'halt_reason: {bundle.halt_reason}')
    return 0 if bundle.passed else 1
