"""
Конечномерные и последовательностные модели неравенств Лоясевича.
Finite-dimensional and sequence-level models of the Lojasiewicz inequalities.

Основные возможности / Main features:
- Лемма о дискретном убывании с константой из доказательства / Discrete decay lemma with
  the constant from its proof
- Суммы (f(j) - f(j+1))^{1/2} и сертификат Коши-Шварца / Square-root increment sums and
  the Cauchy-Schwarz certificate
- Градиентный поток модельной функции и длина траектории / Gradient flow of a model
  function and the trajectory length
- Разбиение окрестности |z|^2 <= eps |y| и показатель 2/3 / Neighborhood split and the 2/3 exponent
- Интерполяционное неравенство с показателями k/(k+n), (k-1)/(k+n), (k-2)/(k+n)
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp

from errors import InputError, PreconditionError, UnsupportedError
from grids import fd_matrix

logger = logging.getLogger(__name__)


# --- discrete decay -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DecaySequence:
    """
    Невозрастающая последовательность f(0..N) >= 0 с параметрами eps, K.
    Non-increasing sequence f(0..N) >= 0 with parameters eps, K.

    Допустимость: K f(t)^{1+eps} <= f(t-1) - f(t+1) при 1 <= t <= N-1.
    / Admissible: K f(t)^{1+eps} <= f(t-1) - f(t+1) for 1 <= t <= N-1.
    """
    values: np.ndarray
    eps: float
    K: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 3:
            raise InputError("Нужна одномерная последовательность длины >= 3")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InputError("Значения должны быть конечными и неотрицательными")
        if self.eps <= 0 or self.K <= 0:
            raise InputError(f"Требуется eps > 0 и K > 0, получено eps={self.eps}, K={self.K}")
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_function(cls, func: Callable[[np.ndarray], np.ndarray], length: int, eps: float, K: float) -> 'DecaySequence':
        return cls(func(np.arange(length + 1, dtype=float)), eps, K)

    def first_violation(self, tol: float = 1e-14) -> Optional[int]:
        """Первое t, нарушающее допустимость или монотонность / First t breaking admissibility."""
        f = self.values
        drops = f[:-2] - f[2:]
        lhs = self.K * f[1:-1] ** (1.0 + self.eps)
        bad = lhs > drops + tol * np.maximum(1.0, f[:-2])
        bad |= np.diff(f)[1:] > tol * np.maximum(1.0, f[1:-1])
        if f[1] > f[0] + tol * max(1.0, f[0]):
            return 1
        hits = np.nonzero(bad)[0]
        return int(hits[0]) + 1 if hits.size else None

    @property
    def admissible(self) -> bool:
        return self.first_violation() is None


def _require_admissible(seq: DecaySequence) -> None:
    t = seq.first_violation()
    if t is not None:
        raise PreconditionError(f"Последовательность недопустима при t = {t}", location=t)


def discrete_decay_bound(seq: DecaySequence) -> Tuple[float, bool]:
    """
    Константа C из доказательства леммы: f(t) <= C t^{-1/eps} при t >= 1.
    The lemma's proof constant C: f(t) <= C t^{-1/eps} for t >= 1.

    Нормировка g = f/C0 с C0 = max(f(0), K^{-1/eps}) даёт g(0) <= 1 и K = 1; затем
    t0 = 4 2^eps g(0)^{-eps}/eps + 2 и C = C0 g(0) t0^{1/eps}.
    / Normalizing by C0 = max(f(0), K^{-1/eps}) gives g(0) <= 1 and K = 1.

    Returns:
        (C, verified)

    Raises:
        PreconditionError: последовательность недопустима; location - первое t /
            inadmissible sequence; location is the first violating t
    """
    _require_admissible(seq)
    f, eps = seq.values, seq.eps
    if f[0] == 0:
        return 0.0, True
    C0 = max(f[0], seq.K ** (-1.0 / eps))
    g0 = f[0] / C0
    t0 = 4.0 * 2.0 ** eps * g0 ** (-eps) / eps + 2.0
    C = C0 * g0 * t0 ** (1.0 / eps)
    t = np.arange(1, f.size, dtype=float)
    verified = bool(np.all(f[1:] <= C * t ** (-1.0 / eps) * (1.0 + 1e-12)))
    return float(C), verified


@dataclass(frozen=True)
class SqrtSumReport:
    """Частичные суммы (f(j) - f(j+1))^{1/2}, хвост и сертификат / Partial sums, tail, certificate."""
    partial_sums: np.ndarray
    tail: float
    certificate: float
    tail_start: int
    passed: bool


def cauchy_schwarz_certificate(C: float, eps: float, N: int) -> float:
    """
    Оценка sum_{j >= N} (f(j) - f(j+1))^{1/2} через f(t) <= C t^{-1/eps} с p = (1 + 1/eps)/2.
    Bound on the tail from f(t) <= C t^{-1/eps} with p = (1 + 1/eps)/2 in (1, 1/eps).
    """
    if N < 2:
        raise InputError("Сертификат требует N >= 2")
    p = 0.5 * (1.0 + 1.0 / eps)
    weighted = C * N ** (p - 1.0 / eps) * (1.0 + p / (1.0 / eps - p))
    harmonic = (N - 1.0) ** (1.0 - p) / (p - 1.0)
    return float(np.sqrt(weighted * harmonic))


def sqrt_increment_sum(seq: DecaySequence, tail_fraction: float = 0.5, tol: float = 1e-6) -> SqrtSumReport:
    """
    Частичные суммы sum (f(j) - f(j+1))^{1/2}; хвост - сумма по последней доле tail_fraction.
    Partial sums; the tail is the sum over the last `tail_fraction` of the sequence.

    Raises:
        UnsupportedError: eps >= 1
        PreconditionError: последовательность недопустима / inadmissible sequence
    """
    if seq.eps >= 1:
        raise UnsupportedError(f"Суммируемость требует eps < 1, получено {seq.eps}")
    _require_admissible(seq)
    increments = np.sqrt(np.maximum(seq.values[:-1] - seq.values[1:], 0.0))
    partial = np.cumsum(increments)
    start = max(2, int(np.floor(seq.values.size * (1.0 - tail_fraction))))
    tail = float(np.sum(increments[start:]))
    C, _ = discrete_decay_bound(seq)
    certificate = cauchy_schwarz_certificate(C, seq.eps, start) if C > 0 else 0.0
    passed = bool(tail < tol and tail <= certificate * (1.0 + 1e-9) + 1e-300)
    return SqrtSumReport(partial, tail, certificate, start, passed)


def admissible_sequence(rng: np.random.Generator, eps: float, K: float = 1.0, length: int = 2000,
                        tail: float = 1e-6, slack: float = 0.5) -> DecaySequence:
    """
    Допустимая последовательность обратной рекурсией f(t-1) = f(t+1) + K f(t)^{1+eps} + запас.
    Admissible sequence by reverse recursion f(t-1) = f(t+1) + K f(t)^{1+eps} + slack.

    Старт f(N) = f(N+1) = tail; рекурсия идёт, пока значение не превысит 1 или не
    наберётся length членов. / Starts from f(N) = f(N+1) = tail and stops once a value
    exceeds 1 or `length` terms are built.
    """
    backward = [tail, tail]
    while len(backward) < length + 1:
        current, after = backward[-1], backward[-2]
        bump = K * current ** (1.0 + eps)
        value = max(after + bump * (1.0 + slack * rng.random()), current)
        backward.append(value)
        if value > 1.0:
            break
    return DecaySequence(np.array(backward[::-1]), eps, K)


# --- model functions ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ModelFunction:
    """
    Многочлен R^d -> R с точным символьным градиентом.
    Polynomial R^d -> R with an exact symbolic gradient.
    """
    expression: sp.Expr
    variables: Tuple[sp.Symbol, ...]

    @classmethod
    def parse(cls, text: str, variables: str = 'x y') -> 'ModelFunction':
        symbols = sp.symbols(variables)
        symbols = symbols if isinstance(symbols, tuple) else (symbols,)
        return cls(sp.sympify(text, locals={str(s): s for s in symbols}), tuple(symbols))

    @property
    def dim(self) -> int:
        return len(self.variables)

    @cached_property
    def _value(self) -> Callable:
        return sp.lambdify(self.variables, self.expression, 'numpy')

    @cached_property
    def _gradient(self) -> List[Callable]:
        return [sp.lambdify(self.variables, sp.diff(self.expression, v), 'numpy') for v in self.variables]

    def value(self, x: np.ndarray) -> np.ndarray:
        """x формы (d, ...) / x of shape (d, ...)."""
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self._value(*x), dtype=float), x.shape[1:])

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([np.broadcast_to(np.asarray(g(*x), dtype=float), x.shape[1:]) for g in self._gradient])

    @cached_property
    def hessian_at_origin(self) -> np.ndarray:
        hess = sp.hessian(self.expression, self.variables).subs({v: 0 for v in self.variables})
        return np.array(hess.tolist(), dtype=float)

    @cached_property
    def split(self) -> Tuple[List[int], List[int]]:
        """Индексы невырожденных (y) и вырожденных (z) координат / Nondegenerate (y) and degenerate (z) indices."""
        diagonal = np.abs(np.diag(self.hessian_at_origin))
        y = [i for i in range(self.dim) if diagonal[i] > 1e-12]
        z = [i for i in range(self.dim) if diagonal[i] <= 1e-12]
        return y, z


@dataclass(frozen=True)
class GradientFlowResult:
    """
    Траектория x' = -grad f с длиной l(t) = int |grad f|.
    Trajectory of x' = -grad f with length l(t) = int |grad f|.
    """
    t: np.ndarray
    x: np.ndarray
    f: np.ndarray
    length: float
    left_neighborhood: bool
    blew_up: bool
    decay_constant: Optional[float] = None
    decay_slope: Optional[float] = None


def ode_gradient_flow(f: ModelFunction, x0: Sequence[float], T: float, neighborhood: Optional[float] = None,
                      beta: Optional[float] = None, blowup: float = 1e6) -> GradientFlowResult:
    """
    Интегрирует x' = -grad f адаптивным RK45 (rtol 1e-10) вместе с длиной траектории.
    Integrates x' = -grad f with adaptive RK45 (rtol 1e-10) together with the curve length.

    Args:
        f (ModelFunction): модельная функция / model function
        x0: начальная точка / initial point
        T (float): конечное время / final time
        neighborhood (float | None): радиус проверенной окрестности; выход - флаг /
            radius of the verified neighborhood; leaving it is flagged
        beta (float | None): показатель второго неравенства в (1/2, 1) для проверки
            f(t) <= C t^{-1/(2 beta - 1)} / second-inequality exponent for the decay check
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (f.dim,):
        raise InputError(f"x0 должен иметь размер {f.dim}")

    def rhs(_, state):
        grad = f.gradient(state[:-1])
        return np.concatenate([-grad, [np.linalg.norm(grad)]])

    events = []

    def escape(_, state):
        return blowup - np.linalg.norm(state[:-1])
    escape.terminal = True
    events.append(escape)
    if neighborhood is not None:
        def leave(_, state):
            return neighborhood - np.linalg.norm(state[:-1])
        leave.terminal = True
        events.append(leave)

    solution = solve_ivp(rhs, (0.0, T), np.concatenate([x0, [0.0]]), method='RK45',
                         rtol=1e-10, atol=1e-12, events=events, dense_output=False)
    x = solution.y[:-1]
    values = f.value(x)
    blew_up = bool(solution.t_events[0].size)
    left = bool(neighborhood is not None and solution.t_events[1].size)
    if left or blew_up:
        logger.warning(f"Траектория прервана: left={left}, blew_up={blew_up}, t={solution.t[-1]:.3f}")
    decay_constant = decay_slope = None
    if beta is not None:
        if not 0.5 < beta < 1.0:
            raise InputError(f"beta должно лежать в (1/2, 1), получено {beta}")
        exponent = 1.0 / (2.0 * beta - 1.0)
        late = (solution.t >= 1.0) & (values > 0)
        if np.count_nonzero(late) >= 2:
            decay_constant = float(np.max(values[late] * solution.t[late] ** exponent))
            tail = solution.t >= max(1.0, 0.5 * solution.t[-1])
            tail &= values > 0
            decay_slope = float(np.polyfit(np.log(solution.t[tail]), np.log(values[tail]), 1)[0])
    return GradientFlowResult(solution.t, x.T, values, float(solution.y[-1, -1]), left, blew_up,
                              decay_constant, decay_slope)


# --- Taylor region split --------------------------------------------------------------


@dataclass
class TaylorRegionReport:
    """
    Проверка |f|^{2/3} <= C |grad f| по областям |z|^2 <= eps |y| и |z|^2 >= eps |y|.
    Check of |f|^{2/3} <= C |grad f| on the regions |z|^2 <= eps |y| and its complement.
    """
    eps: float
    hypothesis_constant: float
    hypothesis_slope: float
    hypothesis_holds: bool
    constants: Dict[str, float] = field(default_factory=dict)
    slopes: Dict[str, float] = field(default_factory=dict)
    passed: bool = False
    broken_region: Optional[str] = None


def _shell_points(dim: int, radius: float, count: int) -> np.ndarray:
    axis = np.linspace(-radius, radius, count)
    mesh = np.stack(np.meshgrid(*([axis] * dim), indexing='ij')).reshape(dim, -1)
    return mesh[:, np.linalg.norm(mesh, axis=0) > 0]


def _shells(points: np.ndarray, radius: float, levels: int) -> List[np.ndarray]:
    norm = np.linalg.norm(points, axis=0)
    return [(norm <= radius * 2.0 ** -i) & (norm > radius * 2.0 ** -(i + 1)) for i in range(levels)]


def _shell_slope(points: np.ndarray, ratio: np.ndarray, shells: List[np.ndarray], radius: float,
                 reducer=np.max) -> Tuple[float, float]:
    """Наклон log(reducer(ratio)) по log радиуса оболочки / Slope over shell radii."""
    radii, values = [], []
    for i, shell in enumerate(shells):
        if np.any(shell):
            value = reducer(ratio[shell])
            if value > 0 and np.isfinite(value):
                radii.append(radius * 2.0 ** -i)
                values.append(value)
    if len(radii) < 2:
        return (float(values[0]) if values else 0.0), 0.0
    slope = np.polyfit(np.log(radii), np.log(values), 1)[0]
    return float(reducer(np.array(values))), float(slope)


def taylor_region_check(f: ModelFunction, radius: float = 0.1, eps: float = 0.1, count: int = 201,
                        levels: int = 6, slope_tol: float = 0.1) -> TaylorRegionReport:
    """
    Двухслучайный аргумент: гипотеза |grad f| >= c |x|^2 и |f|^{2/3} <= C |grad f| в обеих областях.
    The two-case argument: hypothesis |grad f| >= c |x|^2 and |f|^{2/3} <= C |grad f| on both regions.

    Константа считается ограниченной, если её максимум по дисковым оболочкам не растёт при
    сжатии к нулю (наклон log-log не меньше -slope_tol). / A constant is bounded when its
    shell maximum does not grow as the shells shrink (log-log slope >= -slope_tol).
    """
    if f.dim > 3:
        raise UnsupportedError("Сеточная проверка поддерживает d <= 3")
    points = _shell_points(f.dim, radius, count if f.dim < 3 else min(count, 61))
    grad = np.linalg.norm(f.gradient(points), axis=0)
    values = np.abs(f.value(points))
    norm = np.linalg.norm(points, axis=0)
    shells = _shells(points, radius, levels)

    lower = grad / norm ** 2
    c, c_slope = _shell_slope(points, lower, shells, radius, reducer=np.min)
    hypothesis = bool(c > 0 and c_slope < 1.0 - slope_tol)

    y_index, z_index = f.split
    y_norm = np.linalg.norm(points[y_index], axis=0) if y_index else np.zeros(points.shape[1])
    z_norm_sq = np.sum(points[z_index] ** 2, axis=0) if z_index else np.zeros(points.shape[1])
    regions = {'near_y': z_norm_sq <= eps * y_norm, 'near_z': z_norm_sq > eps * y_norm}
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(grad > 0, values ** (2.0 / 3.0) / grad, np.where(values > 0, np.inf, 0.0))
    report = TaylorRegionReport(eps, float(c), float(c_slope), hypothesis)
    if not hypothesis:
        region = 'near_z' if np.any(regions['near_z']) else 'near_y'
        report.broken_region = region
        logger.info(f"Гипотеза |grad f| >= c|x|^2 нарушена (наклон {c_slope:.3f}) в области {region}")
    passed = hypothesis
    for name, mask in regions.items():
        if not np.any(mask):
            report.constants[name] = 0.0
            report.slopes[name] = 0.0
            continue
        masked = [shell & mask for shell in shells]
        constant, slope = _shell_slope(points, ratio, masked, radius)
        report.constants[name] = constant
        report.slopes[name] = slope
        passed &= bool(np.isfinite(constant) and slope >= -slope_tol)
    report.passed = bool(passed)
    return report


def second_lojasiewicz_fit(f: ModelFunction, radius: float = 0.1, count: int = 201, levels: int = 6,
                           slope_tol: float = 0.02) -> Tuple[float, float]:
    """
    Наименьший beta на сетке [1/2, 1] с ограниченным |f|^beta / |grad f| у нуля и его константа.
    Smallest beta on a [1/2, 1] grid with |f|^beta / |grad f| bounded near zero, and its constant.
    """
    points = _shell_points(f.dim, radius, count)
    grad = np.linalg.norm(f.gradient(points), axis=0)
    values = np.abs(f.value(points))
    shells = _shells(points, radius, levels)
    for beta in np.round(np.arange(0.5, 1.0 + 1e-9, 0.01), 2):
        with np.errstate(divide='ignore', invalid='ignore'):
            ratio = np.where(grad > 0, values ** beta / grad, np.where(values > 0, np.inf, 0.0))
        constant, slope = _shell_slope(points, ratio, shells, radius)
        if np.isfinite(constant) and slope >= -slope_tol:
            return float(beta), constant
    return np.inf, np.inf


# --- interpolation --------------------------------------------------------------------


def interpolation_exponents(k: int, n: int) -> Tuple[float, float, float]:
    """a = k/(k+n), b = (k-1)/(k+n), c = (k-2)/(k+n)."""
    return k / (k + n), (k - 1) / (k + n), (k - 2) / (k + n)


@dataclass(frozen=True)
class InterpolationReport:
    """
    Левые части, базовые правые части и подогнанные константы трёх оценок.
    Left-hand sides, base right-hand sides and fitted constants of the three bounds.
    """
    k: int
    n: int
    r: float
    exponents: Tuple[float, float, float]
    lhs: Dict[str, float]
    rhs: Dict[str, float]
    constants: Dict[str, float]


def sample_on_ball(func: Callable[..., np.ndarray], n: int, r: float, h: float) -> Tuple[np.ndarray, float]:
    """Значения func на равномерной сетке куба [-2r, 2r]^n / Values on a uniform grid of the cube."""
    count = int(np.ceil(4.0 * r / h)) + 1
    axis = np.linspace(-2.0 * r, 2.0 * r, count)
    mesh = np.meshgrid(*([axis] * n), indexing='ij')
    return np.asarray(func(*mesh), dtype=float), float(axis[1] - axis[0])


def _partial(values: np.ndarray, h: float, axis: int, order: int) -> np.ndarray:
    if order == 0:
        return values
    matrix = fd_matrix(values.shape[axis], h, order, width=5 if order <= 2 else 7, edge_width=order + 5)
    moved = np.moveaxis(values, axis, -1)
    flat = moved.reshape(-1, moved.shape[-1])
    return np.moveaxis(np.asarray(matrix @ flat.T).T.reshape(moved.shape), -1, axis)


def _derivative_norm(values: np.ndarray, h: float, order: int) -> np.ndarray:
    n = values.ndim
    if n == 1:
        return np.abs(_partial(values, h, 0, order))
    if n != 2:
        raise UnsupportedError("Интерполяция поддерживается для n = 1, 2")
    total = np.zeros_like(values)
    for a in range(order + 1):
        mixed = _partial(_partial(values, h, 0, a), h, 1, order - a)
        total += float(sp.binomial(order, a)) * mixed ** 2
    return np.sqrt(total)


def interpolation_check(values: np.ndarray, h: float, r: float, k: int, shift: float = 0.0) -> InterpolationReport:
    """
    Три интерполяционные оценки на B_r с нормами по B_{2r} (L^1 без веса).
    The three interpolation bounds on B_r with norms over B_{2r} (unweighted L^1).

    Args:
        values: значения на равномерной сетке куба [-2r, 2r]^n / values on the cube grid
        h (float): шаг сетки / grid spacing
        r (float): радиус / radius
        k (int): порядок производной в правой части (k >= 2) / derivative order (k >= 2)
        shift (float): сдвиг показателей для проверки точности / exponent shift for the sharpness test

    Raises:
        InputError: мало узлов для оценки nabla^k / too few nodes to estimate nabla^k
    """
    values = np.asarray(values, dtype=float)
    n = values.ndim
    if k < 2:
        raise InputError(f"Требуется k >= 2, получено {k}")
    if min(values.shape) < max(4 * k + 8, 16) or h > r / 8.0:
        raise InputError(f"Недостаточная выборка для nabla^{k}: {values.shape}, h = {h}")
    axis = np.linspace(-2.0 * r, 2.0 * r, values.shape[0])
    mesh = np.meshgrid(*([axis] * n), indexing='ij')
    radius = np.sqrt(sum(c ** 2 for c in mesh))
    inner, outer = radius <= r, radius <= 2.0 * r
    l1 = float(np.sum(np.abs(values[outer])) * h ** n)
    m = float(np.max(_derivative_norm(values, h, k)[outer]))
    a, b, c = interpolation_exponents(k, n)
    a, b, c = a + shift, b + shift, c + shift
    lhs = {
        'sup': float(np.max(np.abs(values[inner]))),
        'gradient': r * float(np.max(_derivative_norm(values, h, 1)[inner])),
        'hessian': r ** 2 * float(np.max(_derivative_norm(values, h, 2)[inner])),
    }
    kellogg = r ** -n * l1
    rhs = {
        'sup': kellogg + l1 ** a * m ** (1.0 - a),
        'gradient': kellogg + r * l1 ** b * m ** (1.0 - b),
        'hessian': kellogg + r ** 2 * l1 ** c * m ** (1.0 - c),
    }
    constants = {key: (lhs[key] / rhs[key] if rhs[key] > 0 else (0.0 if lhs[key] == 0 else np.inf)) for key in lhs}
    return InterpolationReport(k, n, r, (a, b, c), lhs, rhs, constants)


def bump(x: np.ndarray) -> np.ndarray:
    """Гладкая шапочка с максимумом 1 на [-1, 1] / Smooth bump with maximum 1 on [-1, 1]."""
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1.0
    safe = np.where(inside, 1.0 - x ** 2, 1.0)
    return np.where(inside, np.exp(1.0 - 1.0 / safe), 0.0)


def interpolation_sweep(deltas: Sequence[float] = tuple(2.0 ** -np.arange(7)), k: int = 2, shift: float = 0.0,
                        nodes_per_delta: int = 64) -> Tuple[np.ndarray, float]:
    """
    Константа оценки sup на семействе u = bump(x/delta), n = 1, и наклон её роста по delta.
    The sup-bound constant on the family u = bump(x/delta), n = 1, and its log-log slope in delta.
    """
    constants = []
    for delta in deltas:
        values, h = sample_on_ball(lambda x: bump(x / delta), 1, 1.0, delta / nodes_per_delta)
        constants.append(interpolation_check(values, h, 1.0, k, shift).constants['sup'])
    constants = np.array(constants)
    slope = float(np.polyfit(np.log(deltas), np.log(constants), 1)[0])
    return constants, slope
