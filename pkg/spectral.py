"""
Гауссовы функциональные пространства и спектр операторов drift-Лапласа и L на цилиндре.
Gaussian function spaces and the spectrum of the drift Laplacian and L on the cylinder.

Основные возможности / Main features:
- Нормы L^1, L^2, W^{1,2}, W^{2,2} с весом e^{-|x|^2/4} / Weighted norms
- Собственный базис: сферические гармоники x многочлены Эрмита / Eigenbasis:
  sphere harmonics x Hermite polynomials
- Ядро K = ker L, проекции, спектральная щель / Kernel K = ker L, projections, spectral gap
- Неравенство Пуанкаре и квадратичная норма / Poincare inequality and the quadratic norm

Соглашение о знаке / Sign convention: L u = lambda u, то есть lambda = 1 - cluster(j, k) - |m|/2.
Запись "собственные значения -1, -1/2, 1/k" соответствует противоположному знаку L u = -mu u.
/ L u = lambda u; the statement "eigenvalues at -1, -1/2, 1/k" uses the opposite convention L u = -mu u.
"""
import itertools
import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from math import comb, gamma
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg
from scipy.optimize import minimize

from errors import InputError, UnsupportedError
from geometry import GraphField, c2_norm, flat_derivatives
from grids import (CylinderGrid, gauss_hermite_rule, hermite_derivative_matrix,
                   hermite_multiplication_matrix, hermite_table)

logger = logging.getLogger(__name__)

NORMS = ('L1', 'L2', 'W12', 'W22')


def cluster(j: int, k: int) -> float:
    """Собственное значение -Delta на S^k_{sqrt(2k)}: (j^2 + (k-1) j)/(2k)."""
    return (j * j + (k - 1) * j) / (2.0 * k)


def basis_eigenvalue(j: int, m: Union[int, Sequence[int]], k: int) -> float:
    """
    Собственное значение L на моде (j, m): 1 - (j^2 + (k-1) j)/(2k) - |m|/2.
    L-eigenvalue of mode (j, m).

    Единственное место перевода знака: здесь L u = lambda u; в соглашении L u = -mu u
    те же моды дают mu = -lambda. / The single place of the sign conversion: here L u = lambda u;
    in the convention L u = -mu u the same modes give mu = -lambda.
    """
    degree = m if isinstance(m, (int, np.integer)) else sum(m)
    if j < 0 or degree < 0:
        raise InputError("Требуется j, m >= 0")
    return 1.0 - cluster(j, k) - degree / 2.0


def sphere_harmonic_dim(j: int, k: int) -> int:
    """Размерность сферических гармоник степени j на S^k / Dimension of degree-j harmonics on S^k."""
    if j == 0:
        return 1
    if j == 1:
        return k + 1
    return comb(j + k, k) - comb(j + k - 2, k)


def gaussian_volume(k: int, n: int) -> float:
    """int_C e^{-|x|^2/4} dA для C = S^k_{sqrt(2k)} x R^{n-k}."""
    r = np.sqrt(2.0 * k)
    sphere_area = 2.0 * np.pi ** ((k + 1) / 2.0) / gamma((k + 1) / 2.0) * r ** k
    return float(sphere_area * np.exp(-k / 2.0) * (4.0 * np.pi) ** ((n - k) / 2.0))


@dataclass(frozen=True, order=True)
class ModeIndex:
    """
    Мода (j, label, m) и её собственное значение.
    Mode (j, label, m) and its eigenvalue.

    Attributes:
        j (int): номер кластера на сфере / sphere cluster index
        label (int): номер гармоники внутри кластера (k=1: 0 - cos, 1 - sin) / harmonic label
        m (tuple): мультииндекс Эрмита по n-k осевым переменным / Hermite multi-index
        eigenvalue (float): lambda = 1 - cluster(j,k) - |m|/2
    """
    j: int
    label: int
    m: Tuple[int, ...]
    eigenvalue: float

    @property
    def degree(self) -> int:
        return sum(self.m)

    @property
    def key(self) -> Tuple[int, int, Tuple[int, ...]]:
        return self.j, self.label, self.m


@dataclass(frozen=True)
class SpectralBasis:
    """
    Перечисление мод с j <= j_max и |m| <= m_max.
    Enumeration of the modes with j <= j_max and |m| <= m_max.
    """
    k: int
    n: int
    j_max: int
    m_max: int

    @cached_property
    def modes(self) -> Tuple[ModeIndex, ...]:
        axis = self.n - self.k
        multi = [m for m in itertools.product(range(self.m_max + 1), repeat=axis) if sum(m) <= self.m_max]
        multi.sort(key=lambda m: (sum(m), tuple(-v for v in m)))
        modes = []
        for j in range(self.j_max + 1):
            for label in range(sphere_harmonic_dim(j, self.k)):
                for m in multi:
                    modes.append(ModeIndex(j, label, m, basis_eigenvalue(j, m, self.k)))
        return tuple(modes)

    @cached_property
    def index(self) -> Dict[Tuple[int, int, Tuple[int, ...]], int]:
        return {mode.key: i for i, mode in enumerate(self.modes)}

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.array([mode.eigenvalue for mode in self.modes])

    @cached_property
    def gradient_weights(self) -> Tuple[np.ndarray, np.ndarray]:
        """(cluster, |m|/2) по модам: int |grad_S u|^2 и int |grad_y u|^2 диагональны."""
        sphere = np.array([cluster(mode.j, self.k) for mode in self.modes])
        axis = np.array([mode.degree / 2.0 for mode in self.modes])
        return sphere, axis

    def __len__(self) -> int:
        return len(self.modes)

    def zeros(self) -> 'SpectralField':
        return SpectralField(self, np.zeros(len(self)))

    def unit(self, j: int, label: int, m: Union[int, Sequence[int]]) -> 'SpectralField':
        m = (m,) if isinstance(m, (int, np.integer)) else tuple(m)
        amplitudes = np.zeros(len(self))
        amplitudes[self.index[(j, label, m)]] = 1.0
        return SpectralField(self, amplitudes)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """
    Поле в нормированном собственном базисе: каждая базисная функция имеет
    единичную гауссову L^2 норму, поэтому ||u||^2 = sum a^2.
    Field in the normalized eigenbasis: every basis function has unit Gaussian L^2 norm,
    hence ||u||^2 = sum a^2.
    """
    basis: SpectralBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.asarray(self.amplitudes, dtype=float)
        if amplitudes.shape != (len(self.basis),):
            raise InputError(f"Ожидалось {len(self.basis)} амплитуд, получено {amplitudes.shape}")
        object.__setattr__(self, 'amplitudes', amplitudes)

    def __add__(self, other: 'SpectralField') -> 'SpectralField':
        return SpectralField(self.basis, self.amplitudes + other.amplitudes)

    def __sub__(self, other: 'SpectralField') -> 'SpectralField':
        return SpectralField(self.basis, self.amplitudes - other.amplitudes)

    def __rmul__(self, scalar: float) -> 'SpectralField':
        return SpectralField(self.basis, scalar * self.amplitudes)

    def coefficient(self, j: int, label: int, m: Union[int, Sequence[int]]) -> float:
        m = (m,) if isinstance(m, (int, np.integer)) else tuple(m)
        return float(self.amplitudes[self.basis.index[(j, label, m)]])

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class KernelBasis:
    """
    Ортонормированный базис ядра K = ker L.
    Orthonormal basis of the kernel K = ker L.

    Attributes:
        kind (str): 'cylinder' или 'sphere' (k = n, пустая осевая часть) / 'cylinder' or
            'sphere' (k = n, empty axis part)
        elements: поля базиса / basis fields
        labels: 'rotation' (y_i f_i) или 'quadratic' (y_i y_j - 2 delta_ij)
    """
    k: int
    n: int
    kind: str
    elements: Tuple[SpectralField, ...]
    labels: Tuple[str, ...]

    @property
    def dimension(self) -> int:
        return len(self.elements)


def kernel_dimension(k: int, n: int) -> int:
    """(n-k)(n-k+1)/2 + (n-k)(k+1)."""
    return (n - k) * (n - k + 1) // 2 + (n - k) * (k + 1)


# --- nodal evaluation (k = 1, n = 2) ---------------------------------------------------


def _require_planar(k: int, n: int) -> None:
    if (k, n) != (1, 2):
        raise UnsupportedError("Узловые представления поддерживаются только для k = 1, n = 2")


def _circle_factor(j: int, label: int, theta: np.ndarray) -> np.ndarray:
    if j == 0:
        return np.ones_like(theta)
    trig = np.cos if label == 0 else np.sin
    return np.sqrt(2.0) * trig(j * theta)


def mode_function(mode: ModeIndex, theta: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Нормированная базисная функция k=1, n=2 / Normalized k=1, n=2 basis function."""
    hermite = hermite_table(y, mode.m[0])[mode.m[0]]
    return _circle_factor(mode.j, mode.label, theta) * hermite / np.sqrt(gaussian_volume(1, 2))


def evaluate(field: SpectralField, grid: CylinderGrid) -> GraphField:
    """Значения спектрального поля в узлах сетки / Nodal values of a spectral field."""
    basis = field.basis
    _require_planar(basis.k, basis.n)
    theta, y = grid.mesh
    table = hermite_table(grid.y, basis.m_max)
    values = np.zeros(grid.shape)
    scale = 1.0 / np.sqrt(gaussian_volume(1, 2))
    for amplitude, mode in zip(field.amplitudes, basis.modes):
        if amplitude == 0.0:
            continue
        values += amplitude * scale * _circle_factor(mode.j, mode.label, theta) * table[mode.m[0]][None, :]
    return GraphField(grid, values, coeffs=field.amplitudes.copy())


def to_spectral(u: GraphField, basis: SpectralBasis) -> SpectralField:
    """Проекция узлового поля на базис квадратурой сетки / Quadrature projection onto the basis."""
    _require_planar(basis.k, basis.n)
    grid = u.grid
    theta, _ = grid.mesh
    table = hermite_table(grid.y, basis.m_max)
    scale = 1.0 / np.sqrt(gaussian_volume(1, 2))
    amplitudes = np.array([
        grid.inner(u.values, scale * _circle_factor(mode.j, mode.label, theta) * table[mode.m[0]][None, :])
        for mode in basis.modes
    ])
    return SpectralField(basis, amplitudes)


def _quadrature_field(field: SpectralField) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Гаусс-Эрмит по оси x трапеции по окружности: значения, веса, |x|^2."""
    basis = field.basis
    _require_planar(basis.k, basis.n)
    y, wy = gauss_hermite_rule(max(2 * basis.m_max + 1, 64))
    n_theta = max(2 * basis.j_max + 2, 16)
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    table = hermite_table(y, basis.m_max)
    scale = 1.0 / np.sqrt(gaussian_volume(1, 2))
    values = np.zeros((n_theta, y.size))
    for amplitude, mode in zip(field.amplitudes, basis.modes):
        if amplitude:
            values += amplitude * scale * _circle_factor(mode.j, mode.label, theta)[:, None] * table[mode.m[0]][None, :]
    weights = gaussian_volume(1, 2) * np.outer(np.full(n_theta, 1.0 / n_theta), wy)
    radius_sq = 2.0 + np.broadcast_to(y[None, :] ** 2, values.shape)
    return values, weights, radius_sq


# --- norms ----------------------------------------------------------------------------


def gaussian_norm(u: Union[GraphField, SpectralField], which: str = 'L2', R: Optional[float] = None) -> float:
    """
    Гауссова норма поля на всём цилиндре или в шаре B_R.
    Gaussian norm of a field over the whole cylinder or in the ball B_R.

    Args:
        u: GraphField (квадратура сетки) или SpectralField (Парсеваль / Гаусс-Эрмит)
        which (str): 'L1', 'L2', 'W12' или 'W22'
        R (float | None): радиус шара; None - вся область / ball radius; None - full domain

    Returns:
        float: значение нормы (без нормировки на объём) / norm value (unnormalized)
    """
    if which not in NORMS:
        raise InputError(f"Неизвестная норма {which}; допустимо {NORMS}")
    if isinstance(u, SpectralField):
        return _spectral_norm(u, which, R)
    grid = u.grid
    weights = grid.weights
    if R is not None:
        outer = np.sqrt(2.0 + grid.L ** 2)
        if R > outer:
            logger.warning(f"Радиус {R} превышает обрезку {outer:.3f}; хвост <= {grid.tail_bound():.3e}")
        weights = np.where(grid.p_sq < R ** 2, weights, 0.0)
    values = u.values
    if which == 'L1':
        return float(np.sum(np.abs(values) * weights))
    total = np.sum(values ** 2 * weights)
    if which in ('W12', 'W22'):
        grad, hess = flat_derivatives(u)
        total += np.sum(np.sum(grad ** 2, axis=0) * weights)
        if which == 'W22':
            total += np.sum(np.einsum('ijuv,ijuv->uv', hess, hess) * weights)
    return float(np.sqrt(total))


def _spectral_norm(u: SpectralField, which: str, R: Optional[float]) -> float:
    if which == 'L1' or R is not None:
        if which != 'L1' and which != 'L2':
            raise UnsupportedError("Нормы Соболева в шаре считаются на узловой сетке")
        values, weights, radius_sq = _quadrature_field(u)
        if R is not None:
            weights = np.where(radius_sq < R ** 2, weights, 0.0)
        if which == 'L1':
            return float(np.sum(np.abs(values) * weights))
        return float(np.sqrt(np.sum(values ** 2 * weights)))
    a2 = u.amplitudes ** 2
    sphere, axis = u.basis.gradient_weights
    total = np.sum(a2)
    if which in ('W12', 'W22'):
        total += np.sum((sphere + axis) * a2)
    if which == 'W22':
        # Bochner: int |Hess u|^2 = int (Lu_drift)^2 - int Ric_f(grad u, grad u)
        k = u.basis.k
        total += np.sum(((sphere + axis) ** 2 - (k - 1) / (2.0 * k) * sphere - 0.5 * axis) * a2)
    return float(np.sqrt(total))


# --- operators ------------------------------------------------------------------------


def apply_drift(u: GraphField) -> GraphField:
    """Drift-Лапласиан cal L = Delta - (1/2) <x^T, grad> на цилиндре / on the cylinder."""
    grid = u.grid
    jet = u.jet
    _, y = grid.mesh
    r = u.cylinder.radius
    return u.with_values(jet.u_tt / r ** 2 + jet.u_yy - 0.5 * y * jet.u_y)


def apply_L(u: Union[GraphField, SpectralField]) -> Union[GraphField, SpectralField]:
    """
    L = cal L + 1 на цилиндре: диагонально в спектральном базисе, конечными разностями на сетке.
    L = cal L + 1 on the cylinder: diagonal in the eigenbasis, finite differences on the grid.
    """
    if isinstance(u, SpectralField):
        return SpectralField(u.basis, u.basis.eigenvalues * u.amplitudes)
    return u.with_values(apply_drift(u).values + u.values)


def kernel_basis(k: int, n: int) -> KernelBasis:
    """
    Базис ядра L: вращательные моды (j = 1, |m| = 1) и квадратичные моды (j = 0, |m| = 2).
    Kernel basis of L: rotation modes (j = 1, |m| = 1) and quadratic modes (j = 0, |m| = 2).
    """
    if not 1 <= k <= n:
        raise InputError(f"Требуется 1 <= k <= n, получено k={k}, n={n}")
    basis = SpectralBasis(k, n, j_max=2, m_max=2)
    if k == n:
        elements = tuple(basis.unit(mode.j, mode.label, mode.m) for mode in basis.modes
                         if abs(mode.eigenvalue) < 1e-12)
        return KernelBasis(k, n, 'sphere', elements, ('sphere',) * len(elements))
    elements, labels = [], []
    for mode in basis.modes:
        if abs(mode.eigenvalue) > 1e-12:
            continue
        elements.append(basis.unit(mode.j, mode.label, mode.m))
        labels.append('rotation' if mode.j == 1 else 'quadratic')
    kernel = KernelBasis(k, n, 'cylinder', tuple(elements), tuple(labels))
    if kernel.dimension != kernel_dimension(k, n):
        raise UnsupportedError(f"Размерность ядра {kernel.dimension} != {kernel_dimension(k, n)}")
    return kernel


def orthonormal_modes(grid: CylinderGrid, functions: Iterable[np.ndarray]) -> np.ndarray:
    """Ортонормирование узловых функций в дискретном гауссовом скалярном произведении."""
    stack = np.array([np.broadcast_to(f, grid.shape) for f in functions], dtype=float)
    sqrt_w = np.sqrt(grid.weights).ravel()
    q, r = np.linalg.qr((stack.reshape(len(stack), -1) * sqrt_w).T)
    q = q * np.sign(np.diag(r))
    return (q.T / sqrt_w).reshape(stack.shape)


def project_onto(grid: CylinderGrid, modes: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Ортогональная проекция на span(modes) / Orthogonal projection onto span(modes)."""
    amplitudes = np.array([grid.inner(values, mode) for mode in modes])
    return np.tensordot(amplitudes, modes, axes=1)


@lru_cache(maxsize=16)
def kernel_modes(grid: CylinderGrid) -> np.ndarray:
    """Узловой ортонормированный базис K: y^2 - 2, y cos theta, y sin theta."""
    theta, y = grid.mesh
    return orthonormal_modes(grid, [y ** 2 - 2.0, y * np.cos(theta), y * np.sin(theta)])


def project_kernel(u: Union[GraphField, SpectralField]):
    """
    u = u_K + u_perp, L^2-ортогональное разложение.
    u = u_K + u_perp, the L^2-orthogonal splitting.
    """
    if isinstance(u, SpectralField):
        mask = np.abs(u.basis.eigenvalues) < 1e-12
        kernel = SpectralField(u.basis, np.where(mask, u.amplitudes, 0.0))
        return kernel, u - kernel
    _require_planar(u.cylinder.k, u.cylinder.n)
    kernel = project_onto(u.grid, kernel_modes(u.grid), u.values)
    return u.with_values(kernel), u.with_values(u.values - kernel)


def kernel_amplitudes(u: GraphField) -> np.ndarray:
    """Амплитуды u по узловому базису K / Amplitudes of u on the nodal basis of K."""
    return np.array([u.grid.inner(u.values, mode) for mode in kernel_modes(u.grid)])


def spectral_gap(k: int, n: int, j_max: int = 8, m_max: int = 8) -> float:
    """mu = min |lambda| по ненулевым собственным значениям / over nonzero eigenvalues."""
    values = [basis_eigenvalue(j, m, k) for j in range(j_max + 1) for m in range(m_max + 1)]
    return float(min(abs(v) for v in values if abs(v) > 1e-12))


def random_field(basis: SpectralBasis, rng: np.random.Generator, decay: float = 0.5,
                 without_kernel: bool = False) -> SpectralField:
    """Случайное поле с амплитудами, убывающими по |lambda| / Random field with amplitudes decaying in |lambda|."""
    scale = np.exp(-decay * np.abs(basis.eigenvalues))
    amplitudes = rng.standard_normal(len(basis)) * scale
    if without_kernel:
        amplitudes[np.abs(basis.eigenvalues) < 1e-12] = 0.0
    return SpectralField(basis, amplitudes)


def fit_invertibility_constant(k: int, n: int, samples: int = 1000, seed: int = 0,
                               j_max: int = 4, m_max: int = 6) -> Dict[str, float]:
    """
    Подгонка констант ||Lu|| >= c ||u||_{W^{2,2}} и ||Lu|| >= mu ||u|| на K^perp.
    Fitted constants of ||Lu|| >= c ||u||_{W^{2,2}} and ||Lu|| >= mu ||u|| on K^perp.
    """
    basis = SpectralBasis(k, n, j_max, m_max)
    rng = np.random.default_rng(seed)
    w22, l2 = np.inf, np.inf
    for _ in range(samples):
        u = random_field(basis, rng, without_kernel=True)
        Lu = apply_L(u).norm()
        w22 = min(w22, Lu / gaussian_norm(u, 'W22'))
        l2 = min(l2, Lu / u.norm())
    return {'W22': float(w22), 'L2': float(l2), 'gap': spectral_gap(k, n)}


@dataclass(frozen=True)
class PoincareReport:
    """||x| u||^2 <= (4(n-k) + 2k)||u||^2 + 16 ||grad_y u||^2."""
    lhs: float
    rhs: float
    ratio: float
    passed: bool


def _multiply_axis(amplitudes: Dict[tuple, float], axis: int) -> Dict[tuple, float]:
    product: Dict[tuple, float] = {}
    for (j, label, m), a in amplitudes.items():
        up = list(m)
        up[axis] += 1
        key = (j, label, tuple(up))
        product[key] = product.get(key, 0.0) + a * np.sqrt(2.0 * (m[axis] + 1))
        if m[axis] > 0:
            down = list(m)
            down[axis] -= 1
            key = (j, label, tuple(down))
            product[key] = product.get(key, 0.0) + a * np.sqrt(2.0 * m[axis])
    return product


def poincare_check(u: Union[GraphField, SpectralField]) -> PoincareReport:
    """
    Гауссово неравенство Пуанкаре на цилиндре с прослеженными константами.
    Gaussian Poincare inequality on the cylinder with traced constants.
    """
    if isinstance(u, SpectralField):
        k, n = u.basis.k, u.basis.n
        l2 = u.norm() ** 2
        coefficients = {mode.key: a for mode, a in zip(u.basis.modes, u.amplitudes)}
        axis_moment = sum(sum(v ** 2 for v in _multiply_axis(coefficients, i).values()) for i in range(n - k))
        lhs = 2.0 * k * l2 + axis_moment
        _, axis = u.basis.gradient_weights
        grad_y = float(np.sum(axis * u.amplitudes ** 2))
    else:
        k, n = u.cylinder.k, u.cylinder.n
        grid = u.grid
        l2 = grid.integrate(u.values ** 2)
        lhs = grid.integrate(grid.p_sq * u.values ** 2)
        grad_y = grid.integrate(u.jet.u_y ** 2)
    rhs = (4.0 * (n - k) + 2.0 * k) * l2 + 16.0 * grad_y
    ratio = lhs / rhs if rhs > 0 else 0.0
    return PoincareReport(float(lhs), float(rhs), float(ratio), bool(lhs <= rhs * (1 + 1e-12) + 1e-300))


def quadratic_norm(u: GraphField) -> float:
    """
    ||u^2 + |grad u|^2 + |Hess_u(., R^{n-k})|^2 + (1 + |x|)^{-1} |Hess_u|^2||_{L^2}.
    """
    grad, hess = flat_derivatives(u)
    axis_hess = hess[0, 1] ** 2 + hess[1, 1] ** 2
    full_hess = np.einsum('ijuv,ijuv->uv', hess, hess)
    radius = np.sqrt(u.grid.p_sq)
    density = u.values ** 2 + np.sum(grad ** 2, axis=0) + axis_hess + full_hess / (1.0 + radius)
    return float(np.sqrt(u.grid.integrate(density ** 2)))


def kernel_norm_constants(grid: CylinderGrid, samples: int = 64, seed: int = 0) -> Dict[str, float]:
    """
    C_K = max ||v||_2 / ||v||^2 и max ||v||_{C^2} / ||v|| по единичной сфере K (k=1, n=2).
    C_K = max ||v||_2 / ||v||^2 and max ||v||_{C^2} / ||v|| over the unit sphere of K.
    """
    modes = kernel_modes(grid)
    rng = np.random.default_rng(seed)

    def field(c: np.ndarray) -> GraphField:
        c = np.asarray(c, dtype=float)
        return GraphField(grid, np.tensordot(c / np.linalg.norm(c), modes, axes=1))

    def neg_quadratic(c):
        return -quadratic_norm(field(c))

    starts = rng.standard_normal((samples, len(modes)))
    best = max(starts, key=lambda c: -neg_quadratic(c))
    result = minimize(neg_quadratic, best, method='Nelder-Mead', options={'xatol': 1e-8, 'fatol': 1e-12})
    c_k = max(-result.fun, -neg_quadratic(best))
    c2 = max(c2_norm(field(c)) for c in starts)
    return {'C_K': float(c_k), 'C2_over_L2': float(c2)}


# --- discrete spectra -----------------------------------------------------------------


def _fd_axis_spectrum(grid: CylinderGrid) -> np.ndarray:
    """
    Спектр d^2 - y^2/16 + 1/4 (сопряжение v = u e^{-y^2/8}) с симметричным шаблоном 4-го порядка.
    Spectrum of d^2 - y^2/16 + 1/4 (conjugation v = u e^{-y^2/8}), symmetric 4th-order stencil.
    """
    h = grid.h
    y = grid.y[1:-1]
    diag = -30.0 / (12.0 * h * h) - y ** 2 / 16.0 + 0.25
    off1 = np.full(y.size, 16.0 / (12.0 * h * h))
    off2 = np.full(y.size, -1.0 / (12.0 * h * h))
    banded = np.vstack([off2, off1, diag])
    values = linalg.eig_banded(banded, lower=False, eigvals_only=True)
    return np.sort(values)[::-1]


def _hermite_axis_spectrum(degree: int) -> np.ndarray:
    d = hermite_derivative_matrix(degree)
    y = hermite_multiplication_matrix(degree)[:degree + 1]
    operator = d @ d - 0.5 * y @ d
    values = np.real(linalg.eigvals(operator))
    return np.sort(values)[::-1]


def discrete_spectrum(grid: CylinderGrid, method: str = 'fd', count: int = 20) -> pd.DataFrame:
    """
    Таблица собственных значений дискретного L, упорядоченная по |lambda|.
    Eigenvalue table of the discretized L ordered by |lambda|.

    Columns: j, label, m, exact, numeric, error.
    """
    if method == 'fd':
        axis = _fd_axis_spectrum(grid)
    elif method == 'spectral':
        axis = _hermite_axis_spectrum(grid.M)
    else:
        raise InputError(f"Неизвестный метод спектра: {method}")
    depth = min(axis.size, 4 * count)
    rows = []
    for j in range(grid.n_theta // 2 + 1):
        labels = (0,) if j in (0, grid.n_theta // 2) else (0, 1)
        for label in labels:
            for m in range(depth):
                exact = basis_eigenvalue(j, m, 1)
                rows.append({'j': j, 'label': label, 'm': m, 'exact': exact,
                             'numeric': 1.0 - j * j / 2.0 + axis[m]})
    table = pd.DataFrame(rows)
    table['error'] = (table['numeric'] - table['exact']).abs()
    table['order'] = table['exact'].abs()
    table = table.sort_values(['order', 'j', 'label', 'm'], kind='mergesort').head(count)
    return table.drop(columns='order').reset_index(drop=True)


def numeric_kernel_dimension(grid: CylinderGrid, threshold: float = 1e-6) -> int:
    """
    Число |lambda| < threshold в конечно-разностном спектре L.
    Count of |lambda| < threshold in the finite-difference spectrum of L.

    Ошибка ядра на сетке по умолчанию порядка 1e-8, ближайшие ненулевые |lambda| = 1/2.
    / Kernel eigenvalues are off by about 1e-8 on the default grid; the nearest nonzero |lambda| is 1/2.
    """
    table = discrete_spectrum(grid, 'fd', count=40)
    return int((table['numeric'].abs() < threshold).sum())
