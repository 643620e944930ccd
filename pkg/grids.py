"""
Сетки, операторы дифференцирования и квадратуры на цилиндре S^1_{sqrt 2} x R.
Grids, differentiation operators and quadrature on the cylinder S^1_{sqrt 2} x R.

Основные возможности / Main features:
- Карта (theta, t): Фурье по периодической переменной, конечные разности 4-го порядка
  по второй / Chart (theta, t): Fourier in the periodic variable, 4th-order finite
  differences in the second one
- Нормированные многочлены Эрмита для веса e^{-y^2/4} / Normalized Hermite
  polynomials for the weight e^{-y^2/4}
- Гауссовы квадратурные веса цилиндра / Gaussian quadrature weights of the cylinder
"""
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Tuple

import numpy as np
from scipy import sparse
from scipy.special import erfc, roots_hermitenorm

from errors import DomainError, InputError

SQRT2 = np.sqrt(2.0)


def fornberg_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """
    Веса конечных разностей для производных порядков 0..m в точке z по узлам x.
    Finite-difference weights for derivative orders 0..m at z over nodes x.

    Returns:
        np.ndarray: массив (len(x), m + 1) / array of shape (len(x), m + 1)
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def fd_matrix(n: int, h: float, deriv: int, width: int = 5, edge_width: int = 6) -> sparse.csr_matrix:
    """
    Разреженная матрица производной порядка deriv на равномерной сетке.
    Sparse matrix of the deriv-th derivative on a uniform grid.

    Центральный шаблон width во внутренних узлах, односторонний шаблон edge_width у краёв.
    / Central stencil of `width` nodes inside, one-sided `edge_width` stencil near the ends.
    """
    if n < edge_width:
        raise DomainError(f"Слишком мало узлов для шаблона: {n} < {edge_width}")
    half = width // 2
    rows, cols, vals = [], [], []
    nodes = np.arange(n, dtype=float)
    for i in range(n):
        if half <= i <= n - 1 - half:
            idx = np.arange(i - half, i + half + 1)
        elif i < half:
            idx = np.arange(0, edge_width)
        else:
            idx = np.arange(n - edge_width, n)
        weights = fornberg_weights(float(i), nodes[idx], deriv)[:, deriv] / h ** deriv
        rows.extend([i] * idx.size)
        cols.extend(idx.tolist())
        vals.extend(weights.tolist())
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def smooth_step(t: np.ndarray) -> np.ndarray:
    """C^inf ступенька: 0 при t <= 0, 1 при t >= 1 / C^inf step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide='ignore', over='ignore'):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def smooth_cutoff(y: np.ndarray, inner: float, outer: float) -> np.ndarray:
    """Равна 1 при |y| <= inner и 0 при |y| >= outer / Equals 1 for |y| <= inner, 0 for |y| >= outer."""
    if outer <= inner:
        raise InputError(f"Некорректная полоса обрезки: [{inner}, {outer}]")
    return 1.0 - smooth_step((np.abs(y) - inner) / (outer - inner))


def hermite_table(y: np.ndarray, degree: int) -> np.ndarray:
    """
    Многочлены Эрмита h_0..h_degree, ортонормированные с весом e^{-y^2/4}/sqrt(4 pi).
    Hermite polynomials h_0..h_degree, orthonormal for the weight e^{-y^2/4}/sqrt(4 pi).

    h_m(y) = He_m(y / sqrt 2) / sqrt(m!), so that L_y h_m = -(m/2) h_m and
    h_m' = sqrt(m/2) h_{m-1}.
    """
    y = np.asarray(y, dtype=float)
    x = y / SQRT2
    table = np.zeros((degree + 1,) + y.shape)
    table[0] = 1.0
    if degree >= 1:
        table[1] = x
    for m in range(1, degree):
        table[m + 1] = (x * table[m] - np.sqrt(m) * table[m - 1]) / np.sqrt(m + 1)
    return table


def hermite_derivative_matrix(degree: int) -> np.ndarray:
    """Точная матрица d/dy в коэффициентах Эрмита / Exact d/dy in Hermite coefficients."""
    d = np.zeros((degree + 1, degree + 1))
    for m in range(1, degree + 1):
        d[m - 1, m] = np.sqrt(m / 2.0)
    return d


def hermite_multiplication_matrix(degree: int) -> np.ndarray:
    """Умножение на y (матрица Якоби) в коэффициентах Эрмита / Multiplication by y (Jacobi matrix)."""
    y = np.zeros((degree + 2, degree + 1))
    for m in range(degree + 1):
        y[m + 1, m] = SQRT2 * np.sqrt(m + 1)
        if m >= 1:
            y[m - 1, m] = SQRT2 * np.sqrt(m)
    return y


def gauss_hermite_rule(count: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Узлы и веса Гаусса-Эрмита для веса e^{-y^2/4}/sqrt(4 pi) (сумма весов 1).
    Gauss-Hermite nodes and weights for e^{-y^2/4}/sqrt(4 pi) (weights sum to 1).
    """
    x, w = roots_hermitenorm(count)
    return SQRT2 * x, w / np.sqrt(2.0 * np.pi)


def gaussian_tail(L: float) -> float:
    """Доля гауссовой массы при |y| > L / Gaussian mass fraction beyond |y| > L."""
    return float(erfc(L / 2.0))


class Jet(NamedTuple):
    """Значения и частные производные поля до второго порядка / Field values and partials up to order two."""
    u: np.ndarray
    u_t: np.ndarray
    u_y: np.ndarray
    u_tt: np.ndarray
    u_ty: np.ndarray
    u_yy: np.ndarray


@dataclass(frozen=True)
class ChartGrid:
    """
    Карта (theta, t): theta периодична на [0, 2 pi), t равномерна на [t_min, t_max].
    Chart (theta, t): theta periodic on [0, 2 pi), t uniform on [t_min, t_max].

    Attributes:
        n_theta (int): число узлов по theta (чётное) / number of theta nodes (even)
        n_t (int): число узлов по t / number of t nodes
        t_min (float): левая граница t / left end of t
        t_max (float): правая граница t / right end of t
    """
    n_theta: int
    n_t: int
    t_min: float
    t_max: float

    def __post_init__(self):
        if self.n_theta < 4 or self.n_theta % 2:
            raise DomainError(f"n_theta должно быть чётным и >= 4, получено {self.n_theta}")
        if self.n_t < 7:
            raise DomainError(f"n_t должно быть >= 7, получено {self.n_t}")
        if not self.t_max > self.t_min:
            raise DomainError("t_max должно быть больше t_min")

    @cached_property
    def theta(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_theta) / self.n_theta

    @cached_property
    def t(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.n_t)

    @property
    def h(self) -> float:
        return (self.t_max - self.t_min) / (self.n_t - 1)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.n_theta, self.n_t

    @cached_property
    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.theta, self.t, indexing='ij')

    @cached_property
    def t_weights(self) -> np.ndarray:
        w = np.full(self.n_t, self.h)
        w[0] = w[-1] = self.h / 2.0
        return w

    @cached_property
    def cell_weights(self) -> np.ndarray:
        """Веса трапеций dtheta dt на узлах / Trapezoid weights dtheta dt on the nodes."""
        return np.outer(np.full(self.n_theta, 2.0 * np.pi / self.n_theta), self.t_weights)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return np.arange(self.n_theta // 2 + 1, dtype=float)

    @cached_property
    def d1(self) -> sparse.csr_matrix:
        return fd_matrix(self.n_t, self.h, 1)

    @cached_property
    def d2(self) -> sparse.csr_matrix:
        return fd_matrix(self.n_t, self.h, 2)

    def d_theta(self, u: np.ndarray, order: int = 1) -> np.ndarray:
        """Спектральная производная по theta (ось -2) / Spectral theta-derivative (axis -2)."""
        coeffs = np.fft.rfft(u, axis=-2)
        symbol = (1j * self.wavenumbers) ** order
        if order % 2:
            symbol[-1] = 0.0
        coeffs = coeffs * symbol[:, None]
        return np.fft.irfft(coeffs, n=self.n_theta, axis=-2)

    def d_t(self, u: np.ndarray, order: int = 1) -> np.ndarray:
        """Конечно-разностная производная по t (последняя ось) / Finite-difference t-derivative (last axis)."""
        if order not in (1, 2):
            raise InputError(f"Поддерживаются производные порядка 1 и 2, получено {order}")
        matrix = self.d1 if order == 1 else self.d2
        flat = u.reshape(-1, self.n_t)
        return np.asarray(matrix @ flat.T).T.reshape(u.shape)

    def jet(self, u: np.ndarray) -> Jet:
        if not np.all(np.isfinite(u)):
            raise InputError("Поле содержит не конечные значения")
        u_t = self.d_theta(u, 1)
        return Jet(
            u=u,
            u_t=u_t,
            u_y=self.d_t(u, 1),
            u_tt=self.d_theta(u, 2),
            u_ty=self.d_t(u_t, 1),
            u_yy=self.d_t(u, 2),
        )


@dataclass(frozen=True)
class CylinderGrid:
    """
    Сетка на цилиндре S^1_{sqrt 2} x [-L, L] (k = 1, n = 2).
    Grid on the cylinder S^1_{sqrt 2} x [-L, L] (k = 1, n = 2).

    Attributes:
        n_theta (int): узлы Фурье по окружности / Fourier nodes on the circle
        n_y (int): узлы равномерной сетки по оси / uniform axis nodes
        L (float): полуширина обрезки / truncation half-width
        M (int): предельная степень Эрмита / Hermite degree cap
    """
    n_theta: int = 64
    n_y: int = 481
    L: float = 12.0
    M: int = 64

    k = 1
    n = 2

    @cached_property
    def chart(self) -> ChartGrid:
        return ChartGrid(self.n_theta, self.n_y, -self.L, self.L)

    @property
    def theta(self) -> np.ndarray:
        return self.chart.theta

    @property
    def y(self) -> np.ndarray:
        return self.chart.t

    @property
    def h(self) -> float:
        return self.chart.h

    @property
    def shape(self) -> Tuple[int, int]:
        return self.chart.shape

    @property
    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.chart.mesh

    @property
    def radius(self) -> float:
        return float(np.sqrt(2.0 * self.k))

    @cached_property
    def p_sq(self) -> np.ndarray:
        """|p|^2 = 2k + y^2 в узлах / |p|^2 = 2k + y^2 at the nodes."""
        return np.broadcast_to(2.0 * self.k + self.y[None, :] ** 2, self.shape)

    @cached_property
    def weights(self) -> np.ndarray:
        """Веса интеграла int f e^{-|x|^2/4} dA по цилиндру / Weights of int f e^{-|x|^2/4} dA over the cylinder."""
        return self.radius * self.chart.cell_weights * np.exp(-self.p_sq / 4.0)

    @cached_property
    def y_gauss_weights(self) -> np.ndarray:
        """Нормированные веса e^{-y^2/4}/sqrt(4 pi) по оси / Normalized axis weights."""
        return self.chart.t_weights * np.exp(-self.y ** 2 / 4.0) / np.sqrt(4.0 * np.pi)

    @cached_property
    def hermite(self) -> np.ndarray:
        return hermite_table(self.y, self.M)

    def tail_bound(self) -> float:
        return gaussian_tail(self.L)

    def d_theta(self, u: np.ndarray, order: int = 1) -> np.ndarray:
        return self.chart.d_theta(u, order)

    def d_y(self, u: np.ndarray, order: int = 1, method: str = 'fd') -> np.ndarray:
        """
        Производная по оси: конечные разности или спектрально по Эрмиту.
        Axis derivative: finite differences or Hermite-spectral.
        """
        if method == 'fd':
            return self.chart.d_t(u, order)
        if method != 'hermite':
            raise InputError(f"Неизвестный метод дифференцирования: {method}")
        coeffs = np.einsum('...j,mj->...m', u, self.hermite * self.y_gauss_weights)
        d = hermite_derivative_matrix(self.M)
        for _ in range(order):
            coeffs = coeffs @ d.T
        return np.einsum('...m,mj->...j', coeffs, self.hermite)

    def jet(self, u: np.ndarray, method: str = 'fd') -> Jet:
        if method == 'fd':
            return self.chart.jet(u)
        if not np.all(np.isfinite(u)):
            raise InputError("Поле содержит не конечные значения")
        u_t = self.d_theta(u, 1)
        return Jet(u, u_t, self.d_y(u, 1, method), self.d_theta(u, 2),
                   self.d_y(u_t, 1, method), self.d_y(u, 2, method))

    def integrate(self, f: np.ndarray) -> float:
        """int_C f e^{-|x|^2/4} dA (без нормировки) / (unnormalized)."""
        return float(np.sum(f * self.weights))

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return self.integrate(u * v)
