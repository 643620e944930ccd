"""
Проверки неравенств Лоясевича: подгонка цилиндра, три масштаба, дискретное неравенство потока.
Lojasiewicz harness: cylinder fitting, the three scales, the discrete flow inequality.

Основные возможности / Main features:
- d_C(R): гауссово L^2 расстояние до ближайшего цилиндра / Gaussian L^2 distance
  to the nearest cylinder
- Цилиндрический масштаб r_l и масштаб шринкера R(Sigma_t) / Cylindrical scale r_l
  and the shrinker scale R(Sigma_t)
- Эмпирические показатели первого и градиентного неравенств / Empirical exponents of
  the first and the gradient inequality
- Суммируемость и единственность оси / Summability and axis uniqueness

Константы неравенств нигде не задаются: каждая проверка подгоняет свою константу
и проверяет её устойчивость. / Inequality constants are never hard-coded: every check
fits its constant and tests its stability.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats
from scipy.optimize import minimize
from scipy.stats import qmc

from errors import DataError, FitError, InputError, UnsupportedError
from flow import (FlowConfig, FlowSeries, FlowState, f_functional, mode_profile)
from geometry import (LINEARIZATION_SIGN, CylinderSpec, GraphField, SurfaceSample, covariant_hessian,
                      gradient_M, surface_gradient)
from grids import SQRT2, CylinderGrid
from spectral import apply_L, gaussian_norm

logger = logging.getLogger(__name__)

FAMILY_EPS = (0.0005, 0.001, 0.002, 0.004, 0.008)
LINEARIZATION_EPS = (1e-2, 5e-3, 2.5e-3)


class CylinderFit(NamedTuple):
    """Подогнанный цилиндр, d_C(R) и флаг сходимости / Fitted cylinder, d_C(R) and a convergence flag."""
    cylinder: CylinderSpec
    distance: float
    converged: bool


class ExponentFit(NamedTuple):
    """Наклон log y от log x с доверительной полосой / Slope of log y vs log x with a band."""
    slope: float
    intercept: float
    band: float
    count: int


@dataclass
class LojasiewiczReport:
    """
    Результат проверки неравенства на семействе образцов.
    Result of an inequality check over a family of samples.

    Attributes:
        lhs: левая часть по образцам / left-hand side per sample
        rhs_terms: слагаемые правой части по образцам / right-hand side terms per sample
        exponent (ExponentFit | None): log-log наклон / log-log slope
        constant (float): подогнанная константа / fitted constant
        passed (bool): lhs <= constant * rhs с конечной константой / with a finite constant
        meta (dict): параметры выборки / sample metadata
        skipped (str | None): причина пропуска / skip reason
    """
    lhs: np.ndarray
    rhs_terms: Dict[str, np.ndarray]
    exponent: Optional[ExponentFit]
    constant: float
    passed: bool
    meta: Dict[str, float] = field(default_factory=dict)
    skipped: Optional[str] = None


@dataclass(frozen=True)
class ScaleReport:
    """
    min r_l на [t - 1/2, t + 1] против R(Sigma_t).
    min r_l over [t - 1/2, t + 1] against R(Sigma_t).
    """
    times: np.ndarray
    r_cyl: np.ndarray
    R_shrink: np.ndarray
    ratio: np.ndarray
    mu_fit: float
    passed: bool
    tail_start: float


@dataclass(frozen=True)
class CylindricalScale:
    radius: float
    flagged: bool
    cap: float


# --- cylinder fitting -----------------------------------------------------------------


def _ball_data(sample: SurfaceSample, R: float) -> Tuple[np.ndarray, np.ndarray]:
    ball = sample.ball(R)
    if not np.any(ball):
        raise InputError(f"Шар B_{R} не содержит узлов образца")
    weights = (sample.gaussian * sample.area_weights)[ball]
    return sample.x[:, ball], weights


def _objective(x: np.ndarray, weights: np.ndarray, axis: np.ndarray) -> float:
    a = axis / np.linalg.norm(axis)
    along = a @ x
    radial = np.sqrt(np.maximum(np.sum(x ** 2, axis=0) - along ** 2, 0.0))
    return float(np.sum(weights * (radial - SQRT2) ** 2))


def distance_to_cylinders(sample: SurfaceSample, R: float, axis: np.ndarray) -> float:
    """||dist_axis - sqrt 2||_{L^2(B_R)} для цилиндра с заданной осью / for the cylinder with this axis."""
    x, weights = _ball_data(sample, R)
    return float(np.sqrt(_objective(x, weights, np.asarray(axis, dtype=float))))


def _sign_fixed(axis: np.ndarray) -> np.ndarray:
    a = axis / np.linalg.norm(axis)
    pivot = int(np.argmax(np.abs(a))) if abs(a[2]) < 1e-12 else 2
    return -a if a[pivot] < 0 else a


def _starts(x: np.ndarray, weights: np.ndarray, n_starts: int, seed: int) -> List[np.ndarray]:
    moment = (x * weights) @ x.T
    _, vectors = np.linalg.eigh(moment)
    starts = [vectors[:, -1]]
    if n_starts > 1:
        points = qmc.Halton(d=2, seed=seed).random(n_starts - 1)
        for u, v in points:
            z = v
            rho = np.sqrt(max(1.0 - z * z, 0.0))
            starts.append(np.array([rho * np.cos(2 * np.pi * u), rho * np.sin(2 * np.pi * u), z]))
    return starts


def _descend(x: np.ndarray, weights: np.ndarray, start: np.ndarray):
    frame = CylinderSpec.from_axis(start).frame
    tangent = frame[:, :2]
    a0 = frame[:, 2]

    def objective(xi):
        return _objective(x, weights, a0 + tangent @ xi)

    result = minimize(objective, np.zeros(2), method='Nelder-Mead',
                      options={'xatol': 1e-10, 'fatol': 1e-10, 'maxiter': 2000,
                               'initial_simplex': [[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]]})
    axis = a0 + tangent @ result.x
    return axis / np.linalg.norm(axis), float(result.fun), bool(result.success)


def fit_cylinder(sample: SurfaceSample, R: float, n_starts: int = 16, seed: int = 0,
                 initial_axis: Optional[np.ndarray] = None) -> CylinderFit:
    """
    Минимизирует ||dist_axis - sqrt 2||_{L^2(B_R)} по направлениям оси (k = 1, n = 2).
    Minimizes ||dist_axis - sqrt 2||_{L^2(B_R)} over axis directions (k = 1, n = 2).

    Args:
        sample (SurfaceSample): геометрия поверхности / surface geometry
        R (float): радиус шара / ball radius
        n_starts (int): число стартов (главная ось + квази-случайные) / number of starts
            (principal axis + quasi-random)
        seed (int): зерно последовательности Холтона / Halton seed
        initial_axis: тёплый старт; заменяет мультистарт / warm start replacing the multistart

    Returns:
        CylinderFit: цилиндр, d = d_C(R), флаг сходимости / cylinder, d = d_C(R), convergence flag
    """
    x, weights = _ball_data(sample, R)
    if initial_axis is not None:
        starts = [np.asarray(initial_axis, dtype=float)]
    else:
        starts = _starts(x, weights, n_starts, seed)
    best_axis, best_value, converged = None, np.inf, False
    for start in starts:
        axis, value, success = _descend(x, weights, start)
        if value < best_value:
            best_axis, best_value, converged = axis, value, success
    # polish from the best point with a fresh local chart
    axis, value, success = _descend(x, weights, best_axis)
    if value <= best_value:
        best_axis, best_value, converged = axis, value, success
    if not converged:
        logger.warning(f"Подгонка цилиндра не сошлась: d^2 = {best_value:.3e}")
    return CylinderFit(CylinderSpec.from_axis(_sign_fixed(best_axis)), float(np.sqrt(best_value)), converged)


# --- scales ---------------------------------------------------------------------------


def _covered_radius(sample: SurfaceSample) -> float:
    edges = np.concatenate([sample.radius_sq[:, 0], sample.radius_sq[:, -1]])
    return float(np.sqrt(np.min(edges)))


def _curvature_derivative(sample: SurfaceSample, ell: int) -> np.ndarray:
    A = sample.A
    if ell == 0:
        return np.sqrt(sample.A_norm_sq)
    total = np.zeros(sample.chart.shape)
    for i in range(2):
        for j in range(2):
            if ell == 1:
                components, _ = surface_gradient(sample, A[i, j])
                total += np.sum(components ** 2, axis=0)
            elif ell == 2:
                hess = covariant_hessian(sample, A[i, j])
                total += np.einsum('abuv,abuv->uv', hess, hess)
            else:
                raise UnsupportedError(f"Поддерживается l <= 2, получено l={ell}")
    return np.sqrt(total)


def cylindrical_scale(sample: SurfaceSample, eps0: float = 0.05, ell: int = 2, C_ell: float = 10.0,
                      cylinder: Optional[CylinderSpec] = None, R_fit: Optional[float] = None) -> CylindricalScale:
    """
    Наибольший R, при котором B_R ∩ Sigma - граф над подогнанным цилиндром с ||u||_{C^2} <= eps0
    и |nabla^l A| <= C_l. Вычисляется бисекцией; ограничен радиусом покрытия образца.
    Largest R such that B_R ∩ Sigma is a graph over the fitted cylinder with ||u||_{C^2} <= eps0
    and |nabla^l A| <= C_l. Found by bisection; capped at the sample's covered radius.
    """
    if eps0 <= 0:
        raise InputError(f"eps0 должно быть положительным, получено {eps0}")
    cap = _covered_radius(sample)
    if cylinder is None:
        cylinder = fit_cylinder(sample, min(R_fit or cap, cap)).cylinder
    axis = cylinder.axis_basis[:, 0]
    along = np.tensordot(axis, sample.x, axes=1)
    radial = sample.x - axis.reshape(3, 1, 1) * along
    distance = np.linalg.norm(radial, axis=0)
    graphical = np.sum(sample.normal * radial, axis=0) > 0
    height = distance - cylinder.radius
    components, _ = surface_gradient(sample, height)
    hess = covariant_hessian(sample, height)
    c2 = np.maximum.reduce([np.abs(height), np.sqrt(np.sum(components ** 2, axis=0)),
                            np.sqrt(np.einsum('abuv,abuv->uv', hess, hess))])
    good = graphical & (c2 <= eps0) & (_curvature_derivative(sample, ell) <= C_ell)
    radius = np.sqrt(sample.radius_sq)

    def holds(R: float) -> bool:
        return bool(np.all(good[radius < R]))

    if not holds(1.0):
        logger.warning("Поверхность не является малым графом даже в B_1")
        return CylindricalScale(0.0, True, cap)
    if holds(cap):
        return CylindricalScale(cap, False, cap)
    lo, hi = 1.0, cap
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
    return CylindricalScale(lo, False, cap)


def shrinker_radius(drop: float, slack: float = 1e-12) -> float:
    """R из e^{-R^2/2} = drop; inf, если падение нулевое или исчезает / inf when the drop vanishes."""
    if drop < -slack:
        raise DataError(f"F возрастает: F(t-1) - F(t+1) = {drop:.3e}")
    if drop <= 0:
        return np.inf
    exponent = -2.0 * np.log(drop)
    if not np.isfinite(exponent):
        return np.inf
    return float(np.sqrt(max(exponent, 0.0)))


def shrinker_scale(series: FlowSeries, t: float, slack: float = 1e-12) -> float:
    """
    Масштаб шринкера: e^{-R^2/2} = F(Sigma_{t-1}) - F(Sigma_{t+1}).
    Shrinker scale: e^{-R^2/2} = F(Sigma_{t-1}) - F(Sigma_{t+1}).

    Raises:
        InputError: ряд не покрывает [t - 1, t + 1] / series does not cover the window
        DataError: F не монотонна в окне / F not monotone in the window
    """
    s, F = series.column('s'), series.column('F')
    if len(s) == 0 or t - 1 < s[0] - 1e-12 or t + 1 > s[-1] + 1e-12:
        raise InputError(f"Ряд не покрывает окно [{t - 1}, {t + 1}]")
    window = (s >= t - 1 - 1e-12) & (s <= t + 1 + 1e-12)
    if np.any(np.diff(F[window]) > slack):
        raise DataError(f"F не монотонна в окне [{t - 1}, {t + 1}]")
    drop = float(np.interp(t - 1, s, F) - np.interp(t + 1, s, F))
    return shrinker_radius(drop, slack)


# --- exponent fits --------------------------------------------------------------------


def exponent_fit(x: Sequence[float], y: Sequence[float], confidence: float = 0.95) -> ExponentFit:
    """
    Наклон МНК log y от log x с полосой по остаткам.
    Least-squares slope of log y vs log x with a residual-based band.

    Raises:
        FitError: меньше 4 точек, разброс меньше декады или неположительные значения /
            fewer than 4 points, spread below a decade or non-positive values
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.size < 4 or x.size != y.size:
        raise FitError(f"Нужно не меньше 4 пар, получено {x.size}")
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(x * y)):
        raise FitError("Значения должны быть положительными и конечными")
    if np.log10(x.max() / x.min()) < 1.0 - 1e-9:
        raise FitError(f"Разброс x меньше декады: {x.min():.3e} .. {x.max():.3e}")
    fit = stats.linregress(np.log(x), np.log(y))
    band = float(fit.stderr * stats.t.ppf(0.5 + confidence / 2.0, x.size - 2))
    return ExponentFit(float(fit.slope), float(fit.intercept), band, int(x.size))


def _family_states(fields: Sequence[Union[GraphField, FlowState]], R: float) -> List[FlowState]:
    states = []
    for item in fields:
        if isinstance(item, FlowState):
            states.append(item)
        else:
            states.append(FlowState(0.0, item, FlowConfig(norm_radius=R)))
    return states


def _fitted_constant(lhs: np.ndarray, rhs: np.ndarray) -> float:
    ratios = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.where(lhs > 0, np.inf, 0.0))
    return float(np.max(ratios)) if ratios.size else 0.0


def first_lojasiewicz_report(fields: Sequence[Union[GraphField, FlowState]], R: float,
                             eps0: float = 0.05, ell: int = 2, C_ell: float = 10.0,
                             check_scale: bool = True) -> LojasiewiczReport:
    """
    d_C(R)^2 <= C (||phi||_{L^1(B_R)}^b + e^{-b R^2/4}) на семействе образцов.
    On a family of samples.

    Показатель b подгоняется наклоном log d^2 от log ||phi||_{L^1}; константа - при
    b = min(1, наклон). / The exponent is the log-log slope; the constant is fitted at
    b = min(1, slope).
    """
    states = _family_states(fields, R)
    meta = {'R': R, 'eps0': eps0, 'ell': ell, 'C_ell': C_ell, 'samples': len(states)}
    lhs, phi = [], []
    for state in states:
        fit = fit_cylinder(state.sample, R)
        if check_scale:
            scale = cylindrical_scale(state.sample, eps0, ell, C_ell, cylinder=fit.cylinder)
            if R > scale.radius - 1.0:
                reason = f"R = {R} > r_l - 1 = {scale.radius - 1.0:.3f}"
                logger.warning(f"Первое неравенство пропущено: {reason}")
                empty = np.array([])
                return LojasiewiczReport(empty, {}, None, np.nan, False, meta, skipped=reason)
        lhs.append(fit.distance ** 2)
        phi.append(state.phi_norm('L1', R))
    lhs, phi = np.array(lhs), np.array(phi)
    if np.all(lhs == 0):
        terms = {'phi_L1': phi, 'tail': np.full(lhs.shape, np.exp(-R ** 2 / 4.0))}
        return LojasiewiczReport(lhs, terms, None, 0.0, True, meta)
    exponent = exponent_fit(phi, lhs)
    b = min(1.0, exponent.slope)
    terms = {'phi_L1': phi ** b, 'tail': np.full(lhs.shape, np.exp(-b * R ** 2 / 4.0))}
    constant = _fitted_constant(lhs, terms['phi_L1'] + terms['tail'])
    meta['b'] = b
    passed = bool(np.isfinite(constant) and exponent.slope + exponent.band >= 0.9)
    return LojasiewiczReport(lhs, terms, exponent, constant, passed, meta)


def gradient_lojasiewicz_report(fields: Sequence[Union[GraphField, FlowState]], R: float,
                                F_C: Optional[float] = None, beta: float = 0.5) -> LojasiewiczReport:
    """
    |F(Sigma) - F(C)| <= C (||phi||_{L^2(B_R)}^e + e^{-e R^2/4} + e^{-(3+beta)(R-1)^2/16}).

    F(C) по умолчанию - квадратура F нулевого поля на той же сетке. / F(C) defaults to the
    quadrature F of the zero field on the same grid.
    """
    states = _family_states(fields, R)
    if F_C is None:
        F_C = f_functional(GraphField.zeros(states[0].grid))
    lhs = np.array([abs(state.F - F_C) for state in states])
    phi = np.array([state.phi_norm('L2', R) for state in states])
    meta = {'R': R, 'F_C': F_C, 'beta': beta, 'samples': len(states)}
    if np.all(lhs == 0):
        return LojasiewiczReport(lhs, {'phi_L2': phi}, None, 0.0, True, meta)
    exponent = exponent_fit(phi, lhs)
    e = exponent.slope
    terms = {
        'phi_L2': phi ** e,
        'tail_inner': np.full(lhs.shape, np.exp(-e * R ** 2 / 4.0)),
        'tail_outer': np.full(lhs.shape, np.exp(-(3.0 + beta) * (R - 1.0) ** 2 / 16.0)),
    }
    constant = _fitted_constant(lhs, sum(terms.values()))
    # the 2/3-power form needs e >= 3/2
    passed = bool(np.isfinite(constant) and e + exponent.band >= 1.5 - 0.1)
    return LojasiewiczReport(lhs, terms, exponent, constant, passed, meta)


@dataclass(frozen=True)
class FlowInequalityReport:
    """(F(t) - F(C))^{1+tau} <= K (F(t-1) - F(t+1)) по выборке t / over sampled t."""
    times: np.ndarray
    ratios: np.ndarray
    K_fit: float
    K: float
    passed_per_t: np.ndarray
    stable: bool
    passed: bool
    reference: str


def discrete_flow_inequality(series: FlowSeries, tau: float = 0.5, t_min: float = 5.0,
                             F_C: Optional[float] = None, K: Optional[float] = None,
                             stability: float = 1.2) -> FlowInequalityReport:
    """
    Дискретное неравенство потока с подгонкой K по хвосту прогона.
    The discrete flow inequality with K fitted over the run's tail.

    K_fit - максимум отношений при t >= t_min; устойчивость: максимум по второй половине
    не больше stability * максимум по первой. / K_fit is the max ratio over t >= t_min;
    stable when the second-half max is within `stability` times the first-half max.
    """
    if not 1.0 / 3.0 < tau < 1.0:
        raise InputError(f"tau должно лежать в (1/3, 1), получено {tau}")
    s, F = series.column('s'), series.column('F')
    reference = 'given'
    if F_C is None:
        if series.final_state is None:
            raise InputError("Нужна опорная F(C) или конечное состояние ряда")
        F_C = f_functional(GraphField.zeros(series.final_state.grid))
        reference = 'final-cylinder'
        logger.info(f"F(C) взята по конечному цилиндру: {F_C:.15f}")
    times = s[(s >= t_min) & (s - 1 >= s[0] - 1e-12) & (s + 1 <= s[-1] + 1e-12)] if len(s) else s
    ratios = []
    for t in times:
        gap = max(float(np.interp(t, s, F)) - F_C, 0.0)
        drop = float(np.interp(t - 1, s, F) - np.interp(t + 1, s, F))
        lhs = gap ** (1.0 + tau)
        if lhs == 0:
            ratios.append(0.0)
        elif drop > 0:
            ratios.append(lhs / drop)
        else:
            ratios.append(np.inf)
    ratios = np.array(ratios)
    K_fit = float(np.max(ratios)) if ratios.size else 0.0
    half = ratios.size // 2
    if half and np.isfinite(K_fit):
        first, second = np.max(ratios[:half]), np.max(ratios[half:])
        stable = bool(second <= stability * first) if first > 0 else bool(second == 0)
    else:
        stable = bool(np.isfinite(K_fit))
    K_used = K_fit if K is None else K
    per_t = ratios <= K_used * (1 + 1e-12)
    passed = bool(np.isfinite(K_fit) and stable and np.all(per_t))
    return FlowInequalityReport(times, ratios, K_fit, float(K_used), per_t, stable, passed, reference)


# --- run-level reports ----------------------------------------------------------------


class SeriesAnnotator:
    """
    Обратный вызов run_flow: подгоняет цилиндр и пишет dC_R, r_cyl, axis_a, axis_b в строку.
    run_flow callback: fits the cylinder and writes dC_R, r_cyl, axis_a, axis_b into the row.
    """

    def __init__(self, R: float, eps0: float = 0.05, ell: int = 2, C_ell: float = 10.0,
                 n_starts: int = 16, seed: int = 0):
        self.R = R
        self.eps0 = eps0
        self.ell = ell
        self.C_ell = C_ell
        self.n_starts = n_starts
        self.seed = seed
        self.axis: Optional[np.ndarray] = None

    def __call__(self, state: FlowState, row: Dict[str, float]) -> None:
        sample = state.sample
        fit = fit_cylinder(sample, self.R, self.n_starts, self.seed, initial_axis=self.axis)
        self.axis = fit.cylinder.axis_basis[:, 0]
        scale = cylindrical_scale(sample, self.eps0, self.ell, self.C_ell, cylinder=fit.cylinder)
        row.update({'dC_R': fit.distance, 'r_cyl': scale.radius,
                    'axis_a': float(self.axis[0]), 'axis_b': float(self.axis[1])})


def fill_shrinker_scales(series: FlowSeries) -> None:
    """Заполняет R_shrink там, где окно [t-1, t+1] покрыто / Fills R_shrink where the window is covered."""
    for row in series.rows:
        try:
            row['R_shrink'] = shrinker_scale(series, row['s'])
        except InputError:
            row['R_shrink'] = np.nan
        except DataError as e:
            logger.warning(f"R_shrink при s={row['s']:.3f} не определён: {e}")
            row['R_shrink'] = np.nan


@dataclass(frozen=True)
class UniquenessReport:
    axis_variation: float
    axis_tail: float
    sqrt_sum: float
    sqrt_tail: float
    final_distance: float
    final_phi: float
    decay_rate: float
    passed: bool
    diagnosis: str


def uniqueness_report(series: FlowSeries, axis_tol: float = 1e-3, sum_tol: float = 1e-3,
                      tail_fraction: float = 0.5, phi_tol: float = 1e-6) -> UniquenessReport:
    """
    Полная вариация оси, частичные суммы (F_j - F_{j+1})^{1/2} и скорость убывания ||u||.
    Axis total variation, partial sums of (F_j - F_{j+1})^{1/2} and the decay rate of ||u||.

    Проходит, только если поток сходится к шринкеру: итоговая ||phi||_{L^2} < phi_tol.
    Иначе диагноз 'stalled'. / Passes only when the flow reaches a shrinker: the final
    ||phi||_{L^2} below phi_tol, otherwise the diagnosis is 'stalled'.
    """
    if len(series) < 2:
        raise InputError("Нужно не меньше двух строк диагностики")
    axis = np.column_stack([series.column('axis_a'), series.column('axis_b')])
    steps = np.linalg.norm(np.diff(axis, axis=0), axis=1)
    F = series.column('F')
    increments = np.sqrt(np.maximum(-np.diff(F), 0.0))
    start = int(len(steps) * (1.0 - tail_fraction))
    axis_variation = float(np.nansum(steps))
    axis_tail = float(np.nansum(steps[start:]))
    sqrt_sum, sqrt_tail = float(np.sum(increments)), float(np.sum(increments[start:]))
    s, u_norm = series.column('s'), series.column('u_L2')
    tail = slice(start, None)
    positive = np.isfinite(u_norm[tail]) & (u_norm[tail] > 1e-300)
    decay_rate = np.nan
    if np.count_nonzero(positive) >= 2:
        slope = np.polyfit(s[tail][positive], np.log(u_norm[tail][positive]), 1)[0]
        decay_rate = float(-slope)
    phi = series.column('phi_L2')
    final_phi = float(phi[-1])
    diagnosis = 'converging'
    if series.halt_reason:
        diagnosis = f"halted: {series.halt_reason}"
    elif not np.isfinite(final_phi):
        diagnosis = 'stalled: final ||phi|| is not finite'
    elif len(phi) >= 4 and final_phi > phi[len(phi) // 2] and final_phi >= phi_tol:
        diagnosis = 'diverging: ||phi|| grows over the tail'
    elif final_phi >= phi_tol:
        diagnosis = f"stalled: final ||phi|| = {final_phi:.3g} >= {phi_tol:g}"
    passed = bool(diagnosis == 'converging' and axis_tail < axis_tol and sqrt_tail < sum_tol)
    final_distance = series.column('dC_R')[-1]
    return UniquenessReport(axis_variation, axis_tail, sqrt_sum, sqrt_tail, float(final_distance),
                            final_phi, decay_rate, passed, diagnosis)


def scale_compatibility_report(series: FlowSeries, before: float = 0.5, after: float = 1.0,
                               tail_fraction: float = 0.5) -> ScaleReport:
    """
    Отношение min_{[t - 1/2, t + 1]} r_l к R(Sigma_t); проходит при mu_fit > 0 на хвосте.
    Ratio of min r_l over [t - 1/2, t + 1] to R(Sigma_t); passes when mu_fit > 0 on the tail.
    """
    s, r_cyl, R = series.column('s'), series.column('r_cyl'), series.column('R_shrink')
    times, r_min, R_t, ratio = [], [], [], []
    for t, radius in zip(s, R):
        if np.isnan(radius) or t - before < s[0] - 1e-12 or t + after > s[-1] + 1e-12:
            continue
        window = (s >= t - before - 1e-12) & (s <= t + after + 1e-12)
        smallest = float(np.min(r_cyl[window]))
        times.append(t)
        r_min.append(smallest)
        R_t.append(radius)
        ratio.append(np.inf if np.isinf(radius) else (smallest / radius if radius > 0 else np.inf))
    times, r_min, R_t, ratio = map(np.array, (times, r_min, R_t, ratio))
    start = int(len(ratio) * (1.0 - tail_fraction))
    tail = ratio[start:]
    if tail.size == 0:
        return ScaleReport(times, r_min, R_t, ratio, np.nan, False, np.nan)
    mu_fit = float(np.min(tail) - 1.0)
    passed = bool(np.isinf(mu_fit) or mu_fit > 0)
    return ScaleReport(times, r_min, R_t, ratio, mu_fit, passed, float(times[start]))


# --- static families ------------------------------------------------------------------


FAMILY_MODES = {
    'kernel': [(0, 2, 1.0)],
    'rotation': [(1, 1, 1.0)],
    'kernel-mixed': [(0, 2, 1.0), (1, 1, 0.5)],
    'orthogonal': [(2, 0, 1.0)],
    'orthogonal-axis': [(0, 3, 1.0)],
}


def family_grid() -> CylinderGrid:
    """Сетка статических семейств: L = 9 без срезки / Static-family grid: L = 9, no taper."""
    return CylinderGrid(n_theta=32, n_y=241, L=9.0, M=24)


def mode_values(grid: CylinderGrid, terms: Sequence[Sequence[float]]) -> np.ndarray:
    values = np.zeros(grid.shape)
    for entry in terms:
        label = int(entry[3]) if len(entry) == 4 else 0
        values += float(entry[2]) * mode_profile(grid, int(entry[0]), int(entry[1]), label)
    return values


def mode_family(kind: str, eps: Sequence[float] = FAMILY_EPS, grid: Optional[CylinderGrid] = None) -> List[GraphField]:
    """
    Статическое семейство u = eps v для v из ядра, вращения или ортогонального дополнения.
    Static family u = eps v for v in the kernel, a rotation or the orthogonal complement.
    """
    if kind not in FAMILY_MODES:
        raise InputError(f"Неизвестное семейство {kind}; допустимо {sorted(FAMILY_MODES)}")
    grid = grid or family_grid()
    profile = mode_values(grid, FAMILY_MODES[kind])
    return [GraphField(grid, e * profile) for e in eps]


def linearization_order(mode: Sequence[Sequence[float]], eps_values: Sequence[float] = LINEARIZATION_EPS,
                        grid: Optional[CylinderGrid] = None) -> Tuple[float, np.ndarray]:
    """
    Порядок остатка ||M(eps v) - sigma eps L v|| по eps (наклон log-log).
    Order of the remainder ||M(eps v) - sigma eps L v|| in eps (log-log slope).

    Returns:
        (order, residuals)
    """
    grid = grid or CylinderGrid(n_theta=32, n_y=201, L=5.0, M=24)
    v = GraphField(grid, mode_values(grid, mode))
    Lv = apply_L(v).values
    residuals = []
    for eps in eps_values:
        u = GraphField(grid, eps * v.values)
        remainder = gradient_M(u.cylinder, u) - LINEARIZATION_SIGN * eps * Lv
        residuals.append(gaussian_norm(u.with_values(remainder)))
    residuals = np.array(residuals)
    if np.any(residuals <= 0):
        return np.inf, residuals
    order = np.polyfit(np.log(eps_values), np.log(residuals), 1)[0]
    return float(order), residuals
