"""
Перемасштабированный поток средней кривизны графов над цилиндром.
Rescaled mean curvature flow of graphs over the cylinder.

Основные возможности / Main features:
- Шаги IMEX (неявная линейная часть L, явный остаток) и явный RK4 /
  IMEX steps (implicit linear L part, explicit remainder) and explicit RK4
- Стабилизация неустойчивых мод (растяжение, сдвиги) / Stabilization of the
  unstable modes (dilation, translations)
- Функционал F, энтропия, локальные гауссовы плотности / F functional, entropy,
  local Gaussian densities
- Тождество энергии dF/ds = -||phi||^2 и эволюция (d_t - L) phi = 0 /
  Energy identity and the phi evolution residual
- Снимки состояния в JSON / JSON state snapshots
"""
import json
import logging
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.optimize import minimize, minimize_scalar
from scipy.sparse.linalg import splu

from errors import DomainError, GraphBreakdown, InputError, LabError, SingularOffsetError
from geometry import (CylinderSpec, GraphField, GraphTerms, SurfaceSample, drift_operator, embed_graph,
                      graph_terms, surface_gradient)
from grids import CylinderGrid, smooth_cutoff
from spectral import (SpectralBasis, SpectralField, apply_L, basis_eigenvalue, evaluate, gaussian_norm,
                      gaussian_volume, kernel_amplitudes, orthonormal_modes, to_spectral)

logger = logging.getLogger(__name__)

SCHEMES = ('imex-spectral', 'explicit-rk4')

SERIES_COLUMNS = ['step', 's', 'F', 'phi_L1_BR', 'phi_L2_BR', 'phi_L2', 'phi_power', 'dFds',
                  'dC_R', 'r_cyl', 'R_shrink', 'axis_a', 'axis_b']

# RK4 stability interval on the negative real axis
RK4_REAL_LIMIT = 2.78

# largest dt * lambda_max admitted by the IMEX implicit solve
IMEX_GROWTH_LIMIT = 0.5

# step of the directional difference of F along the stepping velocity
POWER_STEP = 0.02


@dataclass(frozen=True)
class FlowConfig:
    """
    Параметры схемы интегрирования.
    Time-integration scheme parameters.

    Attributes:
        dt (float): шаг по времени / time step
        scheme (str): 'imex-spectral' или 'explicit-rk4'
        stabilize (bool): проецировать неустойчивые моды после шага / project out unstable modes
        method (str): производные по оси 'fd' или 'hermite' / axis derivatives
        margin (float | None): запас до радиуса sqrt(2k); None - 0.1 sqrt(2k)
        norm_radius (float | None): радиус шара для норм phi; None - L - 2
    """
    dt: float = 0.01
    scheme: str = 'imex-spectral'
    stabilize: bool = True
    method: str = 'fd'
    margin: Optional[float] = None
    norm_radius: Optional[float] = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InputError(f"Неизвестная схема {self.scheme}; допустимо {SCHEMES}")
        if not self.dt > 0:
            raise InputError(f"dt должен быть положительным, получено {self.dt}")


@dataclass(frozen=True, eq=False)
class FlowState:
    """
    Состояние потока: время s, поле высот u и параметры схемы.
    Flow state: time s, height field u and the scheme parameters.
    """
    s: float
    u: GraphField
    config: FlowConfig = field(default_factory=FlowConfig)
    step_index: int = 0

    @property
    def grid(self) -> CylinderGrid:
        return self.u.grid

    @property
    def margin(self) -> float:
        cyl = self.u.cylinder
        return 0.1 * cyl.radius if self.config.margin is None else self.config.margin

    @property
    def norm_radius(self) -> float:
        return self.grid.L - 2.0 if self.config.norm_radius is None else self.config.norm_radius

    @cached_property
    def terms(self) -> GraphTerms:
        return graph_terms(self.u, 'chain', self.config.method, self.margin)

    @cached_property
    def sample(self) -> SurfaceSample:
        return embed_graph(self.u.cylinder, self.u)

    @cached_property
    def surface_weights(self) -> np.ndarray:
        """(4 pi)^{-n/2} e^{-|x|^2/4} dA на Sigma_u / on Sigma_u."""
        n = self.u.cylinder.n
        return self.grid.weights * self.terms.area_density / (4.0 * np.pi) ** (n / 2.0)

    @cached_property
    def F(self) -> float:
        return f_functional(self)

    @cached_property
    def stepping_velocity(self) -> np.ndarray:
        """d_t u, которой пользуется шаг (после стабилизации) / d_t u as the step applies it."""
        V = self.terms.velocity
        if self.config.stabilize:
            V = stabilize(self.u.with_values(V)).values
        return V

    @cached_property
    def phi_power(self) -> float:
        """
        -dF/ds вдоль скорости шага: производная дискретного F по направлению d_t u
        (центральная разность 4-го порядка с шагом POWER_STEP).
        -dF/ds along the stepping velocity: the derivative of the discrete F in the
        direction d_t u (4th-order central difference with step POWER_STEP).

        Дискретный аналог ||phi||^2_{L^2}: совпадает с ним до ошибки пространственной
        дискретизации, а с разностями F по времени - до ошибки шага.
        / Discrete counterpart of ||phi||^2_{L^2}: equal to it up to the spatial error, and
        to time differences of F up to the time-step error.
        """
        V = self.stepping_velocity
        if not np.any(V):
            return 0.0
        shifted = [FlowState(self.s, self.u.with_values(self.u.values + t * POWER_STEP * V), self.config).F
                   for t in (-2.0, -1.0, 1.0, 2.0)]
        return -float((shifted[0] - 8.0 * shifted[1] + 8.0 * shifted[2] - shifted[3]) / (12.0 * POWER_STEP))

    def phi_norm(self, which: str = 'L2', R: Optional[float] = None) -> float:
        """Норма phi на Sigma_u (в шаре B_R, если задан) / Norm of phi on Sigma_u."""
        weights = self.surface_weights
        if R is not None:
            weights = np.where(self.terms.radius_sq < R ** 2, weights, 0.0)
        phi = self.terms.phi
        if which == 'L1':
            return float(np.sum(np.abs(phi) * weights))
        if which == 'L2':
            return float(np.sqrt(np.sum(phi ** 2 * weights)))
        raise InputError(f"Неизвестная норма phi: {which}")


@dataclass
class FlowSeries:
    """
    Диагностика прогона: одна строка на шаг выборки.
    Run diagnostics: one row per sampled step.
    """
    rows: List[Dict[str, float]] = field(default_factory=list)
    kernel: List[np.ndarray] = field(default_factory=list)
    states: List[FlowState] = field(default_factory=list)
    checkpoints: List[str] = field(default_factory=list)
    halt_reason: Optional[str] = None
    final_state: Optional[FlowState] = None

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([row.get(name, np.nan) for row in self.rows], dtype=float)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.rows)
        for column in SERIES_COLUMNS:
            if column not in frame:
                frame[column] = np.nan
        frame = frame[SERIES_COLUMNS]
        return frame.astype({'step': int}) if len(frame) else frame

    def kernel_frame(self) -> pd.DataFrame:
        data = np.array(self.kernel) if self.kernel else np.zeros((0, 3))
        frame = pd.DataFrame(data, columns=['K_quadratic', 'K_cos', 'K_sin'])
        frame.insert(0, 's', self.column('s')[:len(frame)])
        return frame

    def is_monotone(self, slack: float = 1e-9) -> bool:
        F = self.column('F')
        return bool(np.all(np.diff(F) <= slack))

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> 'FlowSeries':
        missing = [c for c in ('step', 's', 'F') if c not in frame]
        if missing:
            raise InputError(f"В таблице нет столбцов {missing}")
        return cls(rows=frame.to_dict('records'))


# --- initial data ---------------------------------------------------------------------


def axis_polynomial(m: int, y: np.ndarray) -> np.ndarray:
    """Приведённый многочлен Эрмита: 1, y, y^2 - 2, y^3 - 6y, ... / Monic Hermite polynomial."""
    previous, current = np.zeros_like(y), np.ones_like(y)
    for degree in range(m):
        previous, current = current, y * current - 2.0 * degree * previous
    return current


def mode_profile(grid: CylinderGrid, j: int, m: int, label: int = 0) -> np.ndarray:
    """cos(j theta) или sin(j theta), умноженный на приведённый многочлен по оси."""
    theta, y = grid.mesh
    if j == 0:
        circle = np.ones_like(theta)
    else:
        circle = np.cos(j * theta) if label == 0 else np.sin(j * theta)
    return circle * axis_polynomial(m, y)


def taper_radius(grid: CylinderGrid, values: np.ndarray, level: float) -> float:
    """Наибольший радиус r, на котором |u| <= level при |y| <= r / Largest r with |u| <= level on |y| <= r."""
    profile = np.max(np.abs(values), axis=0)
    exceeded = np.abs(grid.y)[profile > level]
    return float(np.min(exceeded)) if exceeded.size else float(grid.L)


def perturbation(grid: CylinderGrid, spec: Sequence[Sequence[float]], taper: bool = True,
                 cylinder: Optional[CylinderSpec] = None) -> GraphField:
    """
    Начальные данные из троек (j, m, amplitude[, label]) со сглаживающей срезкой.
    Initial data from (j, m, amplitude[, label]) triples with a smooth taper.

    Срезка равна 1 при |y| <= 0.8 r и 0 при |y| >= r, где r = min(L, r*), r* - наибольший
    радиус с |u| <= sqrt(2k)/2. / The taper is 1 for |y| <= 0.8 r and 0 beyond r = min(L, r*).
    """
    cylinder = cylinder or CylinderSpec.standard()
    values = np.zeros(grid.shape)
    for entry in spec:
        if len(entry) not in (3, 4):
            raise InputError(f"Ожидалась тройка (j, m, amplitude[, label]), получено {entry}")
        j, m, amplitude = int(entry[0]), int(entry[1]), float(entry[2])
        label = int(entry[3]) if len(entry) == 4 else 0
        values += amplitude * mode_profile(grid, j, m, label)
    if taper and np.any(values):
        outer = min(grid.L, taper_radius(grid, values, 0.5 * cylinder.radius))
        _, y = grid.mesh
        values = values * smooth_cutoff(y, 0.8 * outer, outer)
    return GraphField(grid, values, cylinder)


# --- stabilization --------------------------------------------------------------------


@lru_cache(maxsize=16)
def _unstable_modes(grid: CylinderGrid) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    theta, y = grid.mesh
    plain = [np.ones_like(theta), np.cos(theta), np.sin(theta), y]
    cutoff = smooth_cutoff(y, 0.8 * grid.L, grid.L)
    tapered = np.array([cutoff * mode for mode in plain])
    plain = np.array(plain)
    gram = np.array([[grid.inner(a, b) for b in tapered] for a in plain])
    return plain, tapered, gram


def unstable_amplitudes(u: GraphField) -> np.ndarray:
    """Амплитуды u по модам 1, cos theta, sin theta, y (ортонормированным) / Unstable-mode amplitudes."""
    theta, y = u.grid.mesh
    modes = orthonormal_modes(u.grid, [np.ones_like(theta), np.cos(theta), np.sin(theta), y])
    return np.array([u.grid.inner(u.values, mode) for mode in modes])


def stabilize(u: GraphField) -> GraphField:
    """
    Удаляет моды с положительным собственным значением: вычитает срезанные моды так,
    чтобы скалярные произведения с несрезанными модами обнулились.
    Removes the positive-eigenvalue modes: subtracts tapered modes so that the inner
    products with the untapered modes vanish.
    """
    plain, tapered, gram = _unstable_modes(u.grid)
    rhs = np.array([u.grid.inner(mode, u.values) for mode in plain])
    coefficients = np.linalg.solve(gram, rhs)
    return u.with_values(u.values - np.tensordot(coefficients, tapered, axes=1))


# --- time stepping --------------------------------------------------------------------


def velocity(u: GraphField, method: str = 'fd', margin: Optional[float] = None) -> np.ndarray:
    """d_t u = w (eta/2 - H_u)."""
    return graph_terms(u, 'chain', method, margin).velocity


def stability_bound(grid: CylinderGrid, scheme: str) -> float:
    """
    Наибольший допустимый dt для схемы на данной сетке.
    Largest admissible dt for the scheme on this grid.

    Для RK4 - оценка спектрального радиуса дискретного L; для IMEX - растущие моды L.
    / For RK4 a spectral-radius estimate of the discrete L; for IMEX the growing modes of L.

    Неявная часть IMEX - не диагональная матрица в базисе Эрмита, а (I - dt L_j) по модам
    Фурье с конечными разностями по y (splu, см. _implicit_factors). Устойчивые моды она гасит
    при любом dt; растущая мода с lambda_max = 1 требует dt * lambda_max <= 1/2, тогда
    1 - dt lambda_max >= 1/2 и множитель шага не больше 2.
    / The IMEX implicit part is not diagonal in the Hermite basis: it is (I - dt L_j) per
    Fourier mode with finite differences in y, factored by splu. It damps stable modes for any
    dt; the growing mode with lambda_max = 1 needs dt * lambda_max <= 1/2, which keeps
    1 - dt lambda_max >= 1/2 and the per-step factor at most 2.
    """
    if scheme == 'explicit-rk4':
        j = grid.n_theta / 2.0
        rho = j * j / 2.0 + 16.0 / (3.0 * grid.h ** 2) + 0.5 * grid.L * 1.372 / grid.h + 1.0
        return RK4_REAL_LIMIT / rho
    if scheme == 'imex-spectral':
        return IMEX_GROWTH_LIMIT / basis_eigenvalue(0, 0, 1)
    raise InputError(f"Неизвестная схема {scheme}")


@lru_cache(maxsize=8)
def _implicit_factors(grid: CylinderGrid, dt: float) -> tuple:
    """LU-разложения (I - dt L_j) по модам Фурье; граничные строки - тождественные."""
    n = grid.n_y
    chart = grid.chart
    eye = sparse.identity(n, format='csr')
    interior = np.ones(n)
    interior[[0, -1]] = 0.0
    keep = sparse.diags(interior)
    boundary = sparse.diags(1.0 - interior)
    drift = chart.d2 - 0.5 * sparse.diags(grid.y) @ chart.d1
    factors = []
    for j in chart.wavenumbers:
        operator = eye - dt * (drift + (1.0 - j * j / 2.0) * eye)
        factors.append(splu(sparse.csc_matrix(keep @ operator + boundary)))
    logger.debug(f"implicit factors built: grid={grid}, dt={dt}")
    return tuple(factors)


def _implicit_solve(grid: CylinderGrid, dt: float, rhs: np.ndarray) -> np.ndarray:
    coeffs = np.fft.rfft(rhs, axis=0)
    solved = np.empty_like(coeffs)
    for j, lu in enumerate(_implicit_factors(grid, dt)):
        pair = lu.solve(np.column_stack([coeffs[j].real, coeffs[j].imag]))
        solved[j] = pair[:, 0] + 1j * pair[:, 1]
    return np.fft.irfft(solved, n=grid.n_theta, axis=0)


def _advance(state: FlowState) -> np.ndarray:
    u = state.u
    dt = state.config.dt
    method = state.config.method
    margin = state.margin
    if state.config.scheme == 'imex-spectral':
        V = state.terms.velocity
        rhs = u.values + dt * (V - apply_L(u).values)
        rhs[:, [0, -1]] = u.values[:, [0, -1]] + dt * V[:, [0, -1]]
        return _implicit_solve(u.grid, dt, rhs)
    k1 = state.terms.velocity
    k2 = velocity(u.with_values(u.values + 0.5 * dt * k1), method, margin)
    k3 = velocity(u.with_values(u.values + 0.5 * dt * k2), method, margin)
    k4 = velocity(u.with_values(u.values + dt * k3), method, margin)
    return u.values + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(state: FlowState) -> FlowState:
    """
    Один шаг d_t u = w (eta/2 - H_u).
    One step of d_t u = w (eta/2 - H_u).

    Raises:
        InputError: dt больше границы устойчивости / dt above the stability bound
        GraphBreakdown: sup|u| достиг sqrt(2k) - margin или значения не конечны /
            sup|u| reached sqrt(2k) - margin or values are not finite
    """
    config = state.config
    bound = stability_bound(state.grid, config.scheme)
    if config.dt > bound:
        raise InputError(f"dt = {config.dt} превышает границу устойчивости {bound:.4g} для {config.scheme}")
    try:
        values = _advance(state)
    except (SingularOffsetError, InputError) as e:
        raise GraphBreakdown(f"шаг {state.step_index}: {e}", state) from e
    if not np.all(np.isfinite(values)):
        raise GraphBreakdown(f"шаг {state.step_index}: не конечные значения", state)
    u = state.u.with_values(values)
    if config.stabilize:
        u = stabilize(u)
    limit = u.cylinder.radius - state.margin
    if u.sup() >= limit:
        raise GraphBreakdown(f"шаг {state.step_index}: sup|u| = {u.sup():.6f} >= {limit:.6f}", state)
    return FlowState(state.s + config.dt, u, config, state.step_index + 1)


def _diagnostic_row(state: FlowState) -> Dict[str, float]:
    R = state.norm_radius
    try:
        power = state.phi_power
    except LabError as e:
        logger.debug(f"phi_power на шаге {state.step_index} не определена: {e}")
        power = np.nan
    return {
        'step': state.step_index,
        's': state.s,
        'F': state.F,
        'phi_L1_BR': state.phi_norm('L1', R),
        'phi_L2_BR': state.phi_norm('L2', R),
        'phi_L2': state.phi_norm('L2'),
        'phi_power': power,
        'u_L2': gaussian_norm(state.u),
    }


def central_difference(s: np.ndarray, F: np.ndarray) -> np.ndarray:
    """dF/ds центральными разностями во внутренних строках, NaN на концах / NaN at the ends."""
    derivative = np.full(F.shape, np.nan)
    if F.size >= 3:
        derivative[1:-1] = (F[2:] - F[:-2]) / (s[2:] - s[:-2])
    return derivative


def run_flow(state: FlowState, steps: int, cadence: int = 1, checkpoint_every: int = 0,
             checkpoint_dir: Optional[Path] = None, keep_states: bool = False,
             on_row: Optional[Callable[[FlowState, Dict[str, float]], None]] = None) -> FlowSeries:
    """
    Прогон потока с записью диагностики каждые cadence шагов.
    Runs the flow and records diagnostics every `cadence` steps.

    Args:
        state (FlowState): начальное состояние / initial state
        steps (int): число шагов / number of steps
        cadence (int): период записи строк / row cadence
        checkpoint_every (int): период снимков (0 - без снимков) / snapshot period (0 - none)
        checkpoint_dir (Path | None): каталог снимков / snapshot directory
        keep_states (bool): хранить состояния строк для невязки phi / keep row states
        on_row: обратный вызов для каждой строки / per-row callback

    Returns:
        FlowSeries: диагностика; halt_reason заполнен при срыве графа / diagnostics;
            halt_reason set on graph breakdown
    """
    if cadence < 1:
        raise InputError(f"cadence должен быть >= 1, получено {cadence}")
    series = FlowSeries()
    logger.info(f"Старт потока: scheme={state.config.scheme}, dt={state.config.dt}, steps={steps}")

    def record(current: FlowState) -> None:
        row = _diagnostic_row(current)
        series.rows.append(row)
        series.kernel.append(kernel_amplitudes(current.u))
        if keep_states:
            series.states.append(current)
        if on_row is not None:
            on_row(current, row)
        logger.debug(f"step={row['step']} s={row['s']:.4f} F={row['F']:.15f} phi={row['phi_L2']:.3e}")

    current = state
    try:
        record(current)
        for _ in range(steps):
            current = step(current)
            if current.step_index % cadence == 0:
                record(current)
            if checkpoint_every and checkpoint_dir is not None and current.step_index % checkpoint_every == 0:
                path = Path(checkpoint_dir) / f'snapshot_{current.step_index:06d}.json'
                write_snapshot(current, path)
                series.checkpoints.append(str(path))
    except GraphBreakdown as e:
        logger.warning(f"Поток остановлен: {e.reason}")
        series.halt_reason = e.reason
    except LabError as e:
        logger.warning(f"Поток остановлен на s={current.s:.4f}: {e}")
        series.halt_reason = str(e)
    series.final_state = current
    F = series.column('F')
    for row, value in zip(series.rows, central_difference(series.column('s'), F)):
        row['dFds'] = value
    logger.info(f"Поток завершён: s={current.s:.4f}, строк {len(series)}")
    return series


# --- functionals ----------------------------------------------------------------------


def f_functional(state: Union[FlowState, GraphField]) -> float:
    """
    F(Sigma_u) = (4 pi)^{-n/2} int_C nu e^{-(|p|^2 + u^2 + 2 sqrt(2k) u)/4}.
    Gaussian surface area of the graph.
    """
    if isinstance(state, GraphField):
        state = FlowState(0.0, state)
    return float(np.sum(state.surface_weights))


def radial_f(r: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """F круглого цилиндра S^1_r x R: sqrt(pi) r e^{-r^2/4}."""
    return np.sqrt(np.pi) * r * np.exp(-np.asarray(r) ** 2 / 4.0)


def radial_f_maximizer() -> float:
    result = minimize_scalar(lambda r: -radial_f(r), bounds=(0.5, 3.0), method='bounded',
                             options={'xatol': 1e-10})
    return float(result.x)


def cylinder_f_value(k: int = 1, n: int = 2) -> float:
    """F(S^k_{sqrt(2k)} x R^{n-k}) в замкнутой форме / in closed form."""
    return gaussian_volume(k, n) / (4.0 * np.pi) ** (n / 2.0)


def _recentred_f(x: np.ndarray, weights: np.ndarray, center: np.ndarray, scale: float, n: int) -> float:
    distance_sq = np.sum((x - center.reshape(3, 1, 1)) ** 2, axis=0)
    return float(np.sum(weights * np.exp(-distance_sq / (4.0 * scale))) / (4.0 * np.pi * scale) ** (n / 2.0))


@dataclass(frozen=True)
class EntropyEstimate:
    value: float
    center: np.ndarray
    scale: float


def entropy_estimate(state: Union[FlowState, SurfaceSample], n: int = 2,
                     centers: Sequence[float] = tuple(np.linspace(-3.0, 3.0, 7)),
                     scales: Sequence[float] = (0.25, 0.5, 1.0, 2.0, 4.0)) -> EntropyEstimate:
    """
    lambda(Sigma) = sup F_{x0, t0}: перебор по сетке центров и масштабов, затем Нелдер-Мид.
    lambda(Sigma) = sup F_{x0, t0}: grid search over centers and scales, then Nelder-Mead.
    """
    sample = state.sample if isinstance(state, FlowState) else state
    x, weights = sample.x, sample.area_weights
    best = (-np.inf, np.zeros(3), 1.0)
    for cx in centers:
        for cy in centers:
            for cz in centers:
                center = np.array([cx, cy, cz])
                for scale in scales:
                    value = _recentred_f(x, weights, center, scale, n)
                    if value > best[0]:
                        best = (value, center, scale)

    def objective(p):
        return -_recentred_f(x, weights, p[:3], float(np.exp(p[3])), n)

    start = np.concatenate([best[1], [np.log(best[2])]])
    result = minimize(objective, start, method='Nelder-Mead',
                      options={'xatol': 1e-8, 'fatol': 1e-13, 'maxiter': 4000})
    if -result.fun > best[0]:
        best = (-result.fun, result.x[:3], float(np.exp(result.x[3])))
    return EntropyEstimate(float(best[0]), np.asarray(best[1], dtype=float), float(best[2]))


def local_gaussian_density(state: Union[FlowState, SurfaceSample], x0: np.ndarray, tau: float, n: int = 2) -> float:
    """(4 pi tau)^{-n/2} int_Sigma e^{-|x - x0|^2/(4 tau)}."""
    if not 0 < tau <= 0.5:
        raise DomainError(f"Требуется tau в (0, 1/2], получено {tau}")
    sample = state.sample if isinstance(state, FlowState) else state
    return _recentred_f(sample.x, sample.area_weights, np.asarray(x0, dtype=float), tau, n)


# --- identities -----------------------------------------------------------------------


def energy_identity_residual(series: FlowSeries, relative: bool = False, discrete: bool = True) -> float:
    """
    max |dF/ds + ||phi||^2| по внутренним строкам (центральные разности).
    max |dF/ds + ||phi||^2| over interior rows (central differences).

    При discrete=True ||phi||^2 берётся из столбца phi_power (согласован со схемой, остаток
    O(dt^2) при cadence = 1); иначе из квадратуры phi_L2, и остаток содержит ошибку сетки.
    / With discrete=True ||phi||^2 comes from phi_power (consistent with the scheme, residual
    O(dt^2) at cadence 1); otherwise from the phi_L2 quadrature, which adds the grid error.
    """
    if len(series) < 3:
        raise InputError("Нужно не меньше трёх строк диагностики")
    s, F = series.column('s'), series.column('F')
    derivative = central_difference(s, F)[1:-1]
    power = series.column('phi_power')[1:-1]
    if discrete and np.all(np.isfinite(power)):
        energy = power
    else:
        energy = series.column('phi_L2')[1:-1] ** 2
    residual = float(np.max(np.abs(derivative + energy)))
    if relative:
        scale = float(np.max(energy))
        return residual / scale if scale > 0 else residual
    return residual


def phi_evolution_residual(series: FlowSeries, R: Optional[float] = None) -> float:
    """
    max ||d_t phi - L phi||_{L^2(B_R)} по сохранённым состояниям; d_t - производная
    вдоль нормали (касательная часть скорости параметризации вычитается).
    Max over stored states; d_t is the normal time derivative (the tangential part of
    the parametrization velocity is removed).
    """
    states = series.states
    if len(states) < 3:
        raise InputError("Нужно не меньше трёх сохранённых состояний (keep_states=True)")
    worst = 0.0
    for before, current, after in zip(states, states[1:], states[2:]):
        span = after.s - before.s
        sample = current.sample
        radius = current.norm_radius if R is None else R
        phi_dot = (after.sample.phi - before.sample.phi) / span
        x_dot = (after.sample.x - before.sample.x) / span
        tangential = x_dot - np.sum(x_dot * sample.normal, axis=0) * sample.normal
        _, grad_phi = surface_gradient(sample, sample.phi)
        normal_dot = phi_dot - np.sum(grad_phi * tangential, axis=0)
        residual = normal_dot - drift_operator(sample, sample.phi)
        ball = sample.ball(radius)
        weights = sample.gaussian * sample.area_weights / (4.0 * np.pi)
        worst = max(worst, float(np.sqrt(np.sum((residual ** 2 * weights)[ball]))))
    return worst


def mcf_rescaled_convert(t: float) -> Tuple[float, float]:
    """s = -log(-t) и масштаб 1/sqrt(-t) для Sigma_s = M_t/sqrt(-t) / and the scale factor."""
    if t >= 0:
        raise DomainError(f"Время MCF должно быть отрицательным, получено t={t}")
    return float(-np.log(-t)), float(1.0 / np.sqrt(-t))


def rescaled_mcf_convert(s: float) -> float:
    """t = -e^{-s}."""
    return float(-np.exp(-s))


# --- snapshots ------------------------------------------------------------------------


def write_snapshot(state: FlowState, path: Union[str, Path], j_max: int = 8, m_max: Optional[int] = None) -> Path:
    """
    Снимок JSON: заголовок {k, n, N_theta, M, L, s}, коэффициенты в порядке мод и узловые значения.
    JSON snapshot: header, coefficients in mode order, nodal values.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = state.grid
    basis = SpectralBasis(1, 2, j_max=min(j_max, grid.n_theta // 2), m_max=grid.M if m_max is None else m_max)
    coefficients = to_spectral(state.u, basis)
    payload = {
        'k': state.u.cylinder.k,
        'n': state.u.cylinder.n,
        'N_theta': grid.n_theta,
        'M': grid.M,
        'L': grid.L,
        'n_y': grid.n_y,
        's': state.s,
        'step': state.step_index,
        'j_max': basis.j_max,
        'm_max': basis.m_max,
        'modes': [[mode.j, mode.label, mode.m[0]] for mode in basis.modes],
        'coefficients': coefficients.amplitudes.tolist(),
        'frame': state.u.cylinder.frame.tolist(),
        'values': state.u.values.tolist(),
    }
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f)
    logger.debug(f"Снимок записан: {path}")
    return path


def read_snapshot(path: Union[str, Path], config: Optional[FlowConfig] = None) -> FlowState:
    """Восстанавливает состояние; без узловых значений - по коэффициентам / Restores a state."""
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            payload = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"Не удалось прочитать снимок {path}: {e}") from e
    missing = [key for key in ('k', 'n', 'N_theta', 'M', 'L', 's') if key not in payload]
    if missing:
        raise InputError(f"В снимке {path} нет полей {missing}")
    if (payload['k'], payload['n']) != (1, 2):
        raise InputError("Снимки поддерживаются только для k = 1, n = 2")
    grid = CylinderGrid(payload['N_theta'], payload.get('n_y', 481), payload['L'], payload['M'])
    cylinder = CylinderSpec(1, 2, np.array(payload['frame'])) if 'frame' in payload else CylinderSpec.standard()
    if 'values' in payload:
        u = GraphField(grid, np.array(payload['values']), cylinder)
    else:
        basis = SpectralBasis(1, 2, payload['j_max'], payload['m_max'])
        u = GraphField(grid, evaluate(SpectralField(basis, np.array(payload['coefficients'])), grid).values, cylinder)
    return FlowState(float(payload['s']), u, config or FlowConfig(), int(payload.get('step', 0)))


# --- mean value monitoring ------------------------------------------------------------


@dataclass(frozen=True)
class MeanValueReport:
    """max_{[t+beta, t']} ||phi||^2_{L^2(B_r)} <= (C + 1/beta)(F(t) - F(t'))."""
    beta: float
    constant: float
    pairs: int
    passed: bool


def mean_value_report(series: FlowSeries, beta: float = 0.5, column: str = 'phi_L2_BR') -> MeanValueReport:
    """Подгонка константы C по всем парам t < t' ряда / Fitted constant over all pairs t < t'."""
    if beta <= 0:
        raise InputError(f"beta должно быть положительным, получено {beta}")
    s, F, phi = series.column('s'), series.column('F'), series.column(column) ** 2
    constant, pairs = -np.inf, 0
    for i in range(len(s)):
        running = -np.inf
        for j in range(i + 1, len(s)):
            if s[j] >= s[i] + beta:
                running = max(running, phi[j])
            if not np.isfinite(running):
                continue
            lhs = float(running)
            drop = F[i] - F[j]
            pairs += 1
            if drop > 0:
                constant = max(constant, lhs / drop - 1.0 / beta)
            elif lhs > 1e-24:
                constant = np.inf
    constant = max(constant, 0.0) if pairs else 0.0
    return MeanValueReport(beta, float(constant), pairs, bool(np.isfinite(constant)))
