"""
Наборы проверок для команды verify.
Check suites for the verify command.

Каждый набор возвращает строки {check, params, lhs, rhs, constant, pass}; исключение
внутри проверки превращается в непройденную строку. / Every suite returns check rows;
an exception inside a check becomes a failed row.
"""
import logging
from typing import Callable, Dict, List

import numpy as np

from errors import LabError
from flow import (FlowConfig, FlowState, cylinder_f_value, energy_identity_residual, f_functional, perturbation,
                  radial_f_maximizer, run_flow)
from geometry import (CylinderSpec, GraphField, gradient_M, graph_mean_curvature, simons_trace_residual,
                      sphere_sample, taylor_coefficients, taylor_coefficients_fd)
from grids import CylinderGrid
from loja import FAMILY_MODES, linearization_order
from report import CheckRow
from scalar_models import (DecaySequence, ModelFunction, admissible_sequence, discrete_decay_bound,
                           interpolation_sweep, ode_gradient_flow, sqrt_increment_sum, taylor_region_check)
from spectral import (SpectralBasis, discrete_spectrum, fit_invertibility_constant, numeric_kernel_dimension,
                      poincare_check, random_field)

logger = logging.getLogger(__name__)

SUITES = ('geometry', 'spectral', 'flow', 'scalar')


def _row(check: str, params: str, lhs: float, rhs: float, passed: bool, constant: float = np.nan) -> CheckRow:
    return CheckRow(check, params, float(lhs), float(rhs), float(constant), bool(passed))


# --- geometry -------------------------------------------------------------------------


def _taylor_agreement() -> CheckRow:
    cyl = CylinderSpec.standard()
    p = np.array([np.sqrt(2.0), 0.0, 0.7])
    exact = taylor_coefficients(cyl, p).as_dict()
    approx = taylor_coefficients_fd(cyl, p, h=1e-4).as_dict()
    error = max(float(np.max(np.abs(exact[key] - approx[key]))) for key in exact)
    return _row('taylor_coefficients', 'h=1e-4', error, 1e-5, error < 1e-5)


def _cylinder_curvature() -> CheckRow:
    grid = CylinderGrid(n_theta=16, n_y=121, L=6.0, M=16)
    cyl = CylinderSpec.standard()
    H = graph_mean_curvature(cyl, GraphField.zeros(grid, cyl))
    error = float(np.max(np.abs(H - 1.0 / np.sqrt(2.0))))
    return _row('cylinder_mean_curvature', 'form=chain', error, 1e-12, error < 1e-12)


def _cylinder_gradient() -> CheckRow:
    grid = CylinderGrid(n_theta=16, n_y=121, L=6.0, M=16)
    cyl = CylinderSpec.standard()
    value = float(np.max(np.abs(gradient_M(cyl, GraphField.zeros(grid, cyl)))))
    return _row('cylinder_gradient_M', 'u=0', value, 1e-12, value < 1e-12)


def _linearization() -> CheckRow:
    orders = {kind: linearization_order(mode)[0] for kind, mode in FAMILY_MODES.items()}
    worst = min(orders.values())
    params = ';'.join(f'{kind}={order:.3f}' for kind, order in orders.items())
    return _row('linearization_order', params, worst, 1.9, worst >= 1.9)


def _simons_sphere() -> CheckRow:
    residual = float(np.max(np.abs(simons_trace_residual(sphere_sample()))))
    return _row('simons_trace_sphere', 'n_psi=161', residual, 1e-3, residual < 1e-3)


# --- spectral -------------------------------------------------------------------------


def _spectrum(method: str, tol: float) -> Callable[[], CheckRow]:
    def check() -> CheckRow:
        grid = CylinderGrid()
        error = float(discrete_spectrum(grid, method, count=20)['error'].max())
        return _row(f'spectrum_{method}', 'count=20', error, tol, error < tol)
    return check


def _kernel_dimension() -> CheckRow:
    dimension = numeric_kernel_dimension(CylinderGrid())
    return _row('kernel_dimension', 'k=1;n=2', dimension, 3, dimension == 3)


def _poincare() -> CheckRow:
    basis = SpectralBasis(1, 2, j_max=4, m_max=8)
    rng = np.random.default_rng(0)
    worst = max(poincare_check(random_field(basis, rng)).ratio for _ in range(1000))
    return _row('poincare', 'samples=1000', worst, 1.0, worst <= 1.0, worst)


def _invertibility() -> CheckRow:
    constants = fit_invertibility_constant(1, 2, samples=200)
    passed = constants['W22'] > 0 and constants['L2'] >= constants['gap'] * (1 - 1e-12)
    return _row('invertibility', f"gap={constants['gap']}", constants['L2'], constants['gap'], passed,
                constants['W22'])


# --- flow -----------------------------------------------------------------------------


def _cylinder_f() -> CheckRow:
    value = f_functional(GraphField.zeros(CylinderGrid()))
    exact = cylinder_f_value()
    return _row('cylinder_F', 'grid=default', value, exact, abs(value - exact) < 1e-10)


def _radial_maximizer() -> CheckRow:
    r = radial_f_maximizer()
    return _row('radial_F_maximizer', 'bounded', r, np.sqrt(2.0), abs(r - np.sqrt(2.0)) < 1e-6)


def _stationary_run() -> CheckRow:
    grid = CylinderGrid(n_theta=16, n_y=121, L=8.0, M=16)
    series = run_flow(FlowState(0.0, GraphField.zeros(grid), FlowConfig(dt=0.01)), 100, cadence=10)
    worst = float(max(np.max(series.column('phi_L2')), np.max(series.column('u_L2'))))
    return _row('stationarity', 'steps=100', worst, 1e-10, worst < 1e-10 and series.halt_reason is None)


def _energy_identity() -> CheckRow:
    grid = CylinderGrid(n_theta=16, n_y=161, L=8.0, M=16)
    u = perturbation(grid, [[2, 0, 1e-3], [0, 2, 1e-3]])
    residuals = []
    for dt, steps in ((0.004, 200), (0.002, 400)):
        config = FlowConfig(dt=dt, scheme='explicit-rk4', stabilize=False)
        series = run_flow(FlowState(0.0, u, config), steps, cadence=5)
        residuals.append(energy_identity_residual(series, relative=True))
    coarse, fine = residuals
    ratio = coarse / fine if fine > 0 else np.inf
    # rows 5 dt apart keep the O(h^2) term of the central difference above the roundoff in F
    return _row('energy_identity', 'eps=1e-3;dt=0.004,0.002;cadence=5;scheme=explicit-rk4', coarse, 1e-3,
                coarse < 1e-3 and ratio >= 3.5, ratio)


# --- scalar ---------------------------------------------------------------------------


def _decay_lemma() -> CheckRow:
    rng = np.random.default_rng(0)
    failures = 0
    worst = 0.0
    for _ in range(1000):
        eps = float(rng.uniform(0.2, 0.9))
        seq = admissible_sequence(rng, eps, length=400, tail=1e-4)
        C, verified = discrete_decay_bound(seq)
        t = np.arange(1, seq.values.size)
        worst = max(worst, float(np.max(seq.values[1:] * t ** (1.0 / eps))) / C if C > 0 else 0.0)
        failures += not verified
    return _row('discrete_decay', 'sequences=1000', failures, 0, failures == 0, worst)


def _sqrt_sum() -> CheckRow:
    seq = DecaySequence.from_function(lambda t: (1.0 + t) ** -4, 20000, 0.25, 1.0)
    report = sqrt_increment_sum(seq)
    return _row('sqrt_increment_sum', 'f=(1+t)^-4;eps=0.25', report.tail, 1e-6, report.passed, report.certificate)


def _gradient_flow_length() -> CheckRow:
    result = ode_gradient_flow(ModelFunction.parse('x**2', 'x'), [1.0], 10.0)
    distance = 1.0
    return _row('gradient_flow_length', 'f=x^2;x0=1', result.length, distance,
                abs(result.length - distance) < 1e-6)


def _taylor_split() -> CheckRow:
    report = taylor_region_check(ModelFunction.parse('x**2 + y**3'))
    constant = max(report.constants.values())
    return _row('taylor_region', f'eps={report.eps}', constant, np.inf, report.passed, constant)


def _interpolation() -> CheckRow:
    plain, _ = interpolation_sweep()
    shifted, _ = interpolation_sweep(shift=0.05)
    spread = float(plain.max() / plain.min())
    growth = float(shifted[-1] / plain[-1])
    return _row('interpolation', 'n=1;k=2', spread, growth, spread < 2.5 and growth > 1.5, float(plain.max()))


CHECKS: Dict[str, List[Callable[[], CheckRow]]] = {
    'geometry': [_taylor_agreement, _cylinder_curvature, _cylinder_gradient, _linearization, _simons_sphere],
    'spectral': [_spectrum('fd', 1e-3), _spectrum('spectral', 1e-12), _kernel_dimension, _poincare,
                 _invertibility],
    'flow': [_cylinder_f, _radial_maximizer, _stationary_run, _energy_identity],
    'scalar': [_decay_lemma, _sqrt_sum, _gradient_flow_length, _taylor_split, _interpolation],
}


def run_suite(suite: str) -> List[CheckRow]:
    """
    Запускает набор проверок ('all' - все наборы).
    Runs a check suite ('all' runs every suite).
    """
    names = SUITES if suite == 'all' else (suite,)
    rows = []
    for name in names:
        if name not in CHECKS:
            raise LabError(f"Неизвестный набор {name}; допустимо {('all',) + SUITES}")
        for check in CHECKS[name]:
            try:
                row = check()
            except LabError as e:
                logger.error(f"Проверка {name}/{check.__name__} упала: {e}", exc_info=True)
                row = _row(check.__name__.lstrip('_'), f'error={e}', np.nan, np.nan, False)
            logger.info(f"{name}/{row.check}: lhs={row.lhs:.6g} rhs={row.rhs:.6g} pass={row.passed}")
            rows.append(row)
    return rows
