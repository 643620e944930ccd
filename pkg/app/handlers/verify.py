from app.config import OUTPUT_ROOT
from app.handlers.common import exit_code, print_checks, save_checks
from app.services.checks import SUITES, run_suite
from app.services.runner import register_checks


def register(subparsers) -> None:
    parser = subparsers.add_parser('verify', help='наборы проверок / check suites')
    parser.add_argument('--suite', choices=('all',) + SUITES, default='all')
    parser.set_defaults(handler=handle)


def handle(args) -> int:
    checks = run_suite(args.suite)
    print_checks(checks)
    save_checks(checks, OUTPUT_ROOT / f'verify-{args.suite}' / 'checks.csv')
    register_checks(f'verify-{args.suite}', 'verify', checks, {'suite': args.suite})
    return exit_code(checks)
