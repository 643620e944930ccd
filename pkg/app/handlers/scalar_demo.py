import numpy as np

from app.config import OUTPUT_ROOT
from app.handlers.common import exit_code, print_checks, save_checks
from app.services.checks import run_suite
from app.services.runner import register_checks
from report import CheckRow
from scalar_models import ModelFunction, ode_gradient_flow, second_lojasiewicz_fit, taylor_region_check


def register(subparsers) -> None:
    parser = subparsers.add_parser('scalar-demo', help='конечномерные модели / finite-dimensional models')
    parser.add_argument('--T', type=float, default=2000.0, help='время градиентного потока / gradient-flow time')
    parser.set_defaults(handler=handle)


def _demo_rows(T: float) -> list:
    rows = []
    # x^2 + y^4: the |grad f| >= c|x|^2 hypothesis must be reported as broken
    degenerate = taylor_region_check(ModelFunction.parse('x**2 + y**4'))
    rows.append(CheckRow('taylor_region_hypothesis', f'f=x^2+y^4;region={degenerate.broken_region}',
                         degenerate.hypothesis_constant, degenerate.hypothesis_slope, np.nan,
                         not degenerate.hypothesis_holds and degenerate.broken_region is not None))
    beta, constant = second_lojasiewicz_fit(ModelFunction.parse('x**2 + y**3'))
    rows.append(CheckRow('second_lojasiewicz_beta', 'f=x^2+y^3', beta, 2.0 / 3.0, constant,
                         abs(beta - 2.0 / 3.0) < 0.02))
    cubic = ode_gradient_flow(ModelFunction.parse('x**3 / 27', 'x'), [1.0], T, beta=2.0 / 3.0)
    rows.append(CheckRow('gradient_flow_decay', f'f=x^3/27;T={T}', cubic.decay_slope, -3.0, cubic.decay_constant,
                         abs(cubic.decay_slope + 3.0) < 0.1 and cubic.decay_constant <= 27.0))
    return rows


def handle(args) -> int:
    checks = run_suite('scalar') + _demo_rows(args.T)
    print_checks(checks)
    save_checks(checks, OUTPUT_ROOT / 'scalar-demo' / 'checks.csv')
    register_checks('scalar-demo', 'scalar-demo', checks, {'T': args.T})
    return exit_code(checks)
