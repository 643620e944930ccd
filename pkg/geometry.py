"""
Геометрия нормальных графов над цилиндром S^k_{sqrt(2k)} x R^{n-k}.
Geometry of normal graphs over the cylinder S^k_{sqrt(2k)} x R^{n-k}.

Основные возможности / Main features:
- Функции сдвига w, nu, eta и их разложение Тейлора / Offset functions w, nu, eta and
  their Taylor coefficients
- Средняя кривизна графа H_u и градиент M(u) функционала F / Graph mean curvature H_u
  and the gradient M(u) of the F functional
- Параметрическое вложение: нормаль, оператор формы A, H, phi, tau = A/H /
  Parametric embedding: normal, shape operator A, H, phi, tau = A/H
- Невязка следа тождества Саймонса и эффективная оценка для grad(A/H) /
  Simons trace residual and the effective bound for grad(A/H)

Соглашения / Conventions: нормаль направлена от оси, A_ij = <nabla_{e_i} e_j, n>, H = -tr A.
/ The normal points away from the axis, A_ij = <nabla_{e_i} e_j, n>, H = -tr A.
"""
import logging
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from errors import DomainError, InputError, PreconditionError, SingularOffsetError, UnsupportedError
from grids import ChartGrid, CylinderGrid

logger = logging.getLogger(__name__)

# M(u) ~ LINEARIZATION_SIGN * L u; fixed from the radial family M(s) ~ -s while L(1) = +1
LINEARIZATION_SIGN = -1.0

ON_CYLINDER_TOL = 1e-10
FRAME_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CylinderSpec:
    """
    Повёрнутый круглый цилиндр S^k_{sqrt(2k)} x R^{n-k} в R^{n+1}.
    A rotated round cylinder S^k_{sqrt(2k)} x R^{n-k} in R^{n+1}.

    Attributes:
        k (int): размерность сферы / sphere dimension
        n (int): размерность гиперповерхности / hypersurface dimension
        frame (np.ndarray): ортонормированная матрица (n+1)x(n+1); первые k+1 столбцов
            задают плоскость сферы, последние n-k - ось / orthonormal (n+1)x(n+1) matrix; the
            first k+1 columns span the sphere plane, the last n-k the axis
    """
    k: int
    n: int
    frame: np.ndarray

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise DomainError(f"Требуется 1 <= k <= n, получено k={self.k}, n={self.n}")
        frame = np.asarray(self.frame, dtype=float)
        if frame.shape != (self.n + 1, self.n + 1):
            raise DomainError(f"frame должен иметь размер {(self.n + 1, self.n + 1)}, получено {frame.shape}")
        if np.max(np.abs(frame.T @ frame - np.eye(self.n + 1))) > FRAME_TOL:
            raise DomainError("Столбцы frame не ортонормированы")
        object.__setattr__(self, 'frame', frame)

    @classmethod
    def standard(cls, k: int = 1, n: int = 2) -> 'CylinderSpec':
        return cls(k, n, np.eye(n + 1))

    @classmethod
    def from_axis(cls, axis: np.ndarray) -> 'CylinderSpec':
        """Цилиндр k=1, n=2 с заданным направлением оси / k=1, n=2 cylinder with a given axis."""
        a = np.asarray(axis, dtype=float)
        a = a / np.linalg.norm(a)
        helper = np.eye(3)[int(np.argmin(np.abs(a)))]
        e1 = helper - a * np.dot(helper, a)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(a, e1)
        return cls(1, 2, np.column_stack([e1, e2, a]))

    @property
    def radius(self) -> float:
        return float(np.sqrt(2.0 * self.k))

    @property
    def mean_curvature(self) -> float:
        return float(np.sqrt(self.k / 2.0))

    @property
    def sphere_basis(self) -> np.ndarray:
        return self.frame[:, :self.k + 1]

    @property
    def axis_basis(self) -> np.ndarray:
        return self.frame[:, self.k + 1:]

    def rotated(self, rotation: np.ndarray) -> 'CylinderSpec':
        return CylinderSpec(self.k, self.n, np.asarray(rotation) @ self.frame)

    def distance_to_axis(self, x: np.ndarray) -> np.ndarray:
        """Расстояние до оси для точек x формы (n+1, ...) / Distance to the axis for x of shape (n+1, ...)."""
        coords = np.tensordot(self.sphere_basis.T, x, axes=1)
        return np.sqrt(np.sum(coords ** 2, axis=0))

    def normal_at(self, p: np.ndarray) -> np.ndarray:
        q = self.sphere_basis.T @ np.asarray(p, dtype=float)
        return self.sphere_basis @ (q / np.linalg.norm(q))

    def check_point(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n + 1,):
            raise DomainError(f"Точка должна лежать в R^{self.n + 1}")
        offset = abs(float(self.distance_to_axis(p)) - self.radius)
        if offset > ON_CYLINDER_TOL:
            raise DomainError(f"Точка не лежит на цилиндре: отклонение {offset:.3e}")
        return p

    def tangent_basis(self, p: np.ndarray) -> np.ndarray:
        """
        Ортонормированный базис касательной плоскости: k сферических, затем n-k осевых векторов.
        Orthonormal tangent basis: k sphere directions followed by n-k axis directions.
        """
        q = self.sphere_basis.T @ self.check_point(p)
        q = q / np.linalg.norm(q)
        projector = np.eye(self.k + 1) - np.outer(q, q)
        left, _, _ = np.linalg.svd(projector)
        sphere_tangent = self.sphere_basis @ left[:, :self.k]
        return np.column_stack([sphere_tangent, self.axis_basis])

    def point(self, sphere_direction: np.ndarray, axis_coords: np.ndarray) -> np.ndarray:
        d = np.asarray(sphere_direction, dtype=float)
        d = d / np.linalg.norm(d)
        return self.radius * (self.sphere_basis @ d) + self.axis_basis @ np.asarray(axis_coords, dtype=float)


@dataclass(frozen=True, eq=False)
class GraphField:
    """
    Скалярное поле u на параметрической области цилиндра (k = 1, n = 2).
    Scalar field u on the cylinder's parameter domain (k = 1, n = 2).

    Attributes:
        grid (CylinderGrid): узлы theta x y / theta x y nodes
        values (np.ndarray): значения в узлах формы grid.shape / nodal values
        cylinder (CylinderSpec): базовый цилиндр / base cylinder
        coeffs (np.ndarray | None): спектральные коэффициенты, если известны / spectral
            coefficients when known
    """
    grid: CylinderGrid
    values: np.ndarray
    cylinder: CylinderSpec = field(default_factory=CylinderSpec.standard)
    coeffs: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise InputError(f"Форма значений {values.shape} не совпадает с сеткой {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise InputError("Поле содержит не конечные значения")
        object.__setattr__(self, 'values', values)

    @classmethod
    def zeros(cls, grid: CylinderGrid, cylinder: Optional[CylinderSpec] = None) -> 'GraphField':
        return cls(grid, np.zeros(grid.shape), cylinder or CylinderSpec.standard())

    @classmethod
    def from_function(cls, grid: CylinderGrid, func, cylinder: Optional[CylinderSpec] = None) -> 'GraphField':
        theta, y = grid.mesh
        values = np.broadcast_to(np.asarray(func(theta, y), dtype=float), grid.shape).copy()
        return cls(grid, values, cylinder or CylinderSpec.standard())

    def with_values(self, values: np.ndarray) -> 'GraphField':
        return GraphField(self.grid, values, self.cylinder)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    @cached_property
    def jet(self):
        return self.grid.jet(self.values)


@dataclass(frozen=True)
class OffsetJet:
    """
    Значения функций сдвига в (p, s, y).
    Offset functions at (p, s, y).

    Attributes:
        B (np.ndarray): Id - sA(p) в касательном базисе / in the tangent basis
        w (float): скорость / speed
        nu (float): относительный элемент площади / relative area element
        eta (float): опорная функция / support function
    """
    B: np.ndarray
    w: float
    nu: float
    eta: float


@dataclass(frozen=True)
class TaylorCoefficients:
    """Первые и вторые частные производные w, nu, eta в (p, 0, 0) / First and second partials at (p, 0, 0)."""
    w_s: float
    w_ss: float
    w_y: np.ndarray
    w_sy: np.ndarray
    w_yy: np.ndarray
    nu_s: float
    nu_ss: float
    nu_y: np.ndarray
    nu_sy: np.ndarray
    nu_yy: np.ndarray
    eta_s: float
    eta_ss: float
    eta_y: np.ndarray
    eta_sy: np.ndarray
    eta_yy: np.ndarray

    def as_dict(self) -> Dict[str, np.ndarray]:
        return {key: np.asarray(value, dtype=float) for key, value in asdict(self).items()}


def _diagonal_offset(k: int, n: int, s):
    """Диагональ B = Id - sA и её производная по s / Diagonal of B = Id - sA and its s-derivative."""
    kappa = 1.0 / np.sqrt(2.0 * k)
    s = np.asarray(s, dtype=float)
    b = [1.0 + kappa * s] * k + [np.ones_like(s)] * (n - k)
    db = [np.full_like(s, kappa)] * k + [np.zeros_like(s)] * (n - k)
    return b, db


def _check_offset(k: int, s) -> None:
    if np.max(np.abs(np.asarray(s, dtype=float))) >= np.sqrt(2.0 * k):
        raise SingularOffsetError(f"|s| >= sqrt(2k) = {np.sqrt(2.0 * k):.6f}: det B вырождается")


class OffsetDerivatives(NamedTuple):
    """Точные производные w и nu при диагональном B / Exact derivatives of w and nu for diagonal B."""
    w: np.ndarray
    nu: np.ndarray
    w_s: np.ndarray
    nu_s: np.ndarray
    nu_y: List[np.ndarray]
    nu_sy: List[np.ndarray]
    nu_yy: List[List[np.ndarray]]


def offset_derivatives(k: int, n: int, s, y: List[np.ndarray]) -> OffsetDerivatives:
    """
    Производные nu(s, y) = w det B, w = sqrt(1 + |B^{-1} y|^2) на массивах узлов.
    Derivatives of nu(s, y) = w det B, w = sqrt(1 + |B^{-1} y|^2) over node arrays.

    Args:
        k, n: размерности / dimensions
        s: нормальная высота (массив) / normal height (array)
        y: n массивов касательных компонент / n arrays of tangent components

    Returns:
        OffsetDerivatives: w, nu, d_s w, d_s nu, d_y nu, d_s d_y nu, d_y d_y nu
    """
    b, db = _diagonal_offset(k, n, s)
    y = [np.asarray(c, dtype=float) for c in y]
    det = np.prod(np.stack(np.broadcast_arrays(*b)), axis=0)
    log_rate = sum(db[i] / b[i] for i in range(n))
    det_s = det * log_rate
    w = np.sqrt(1.0 + sum((y[i] / b[i]) ** 2 for i in range(n)))
    w_s = -sum(y[i] ** 2 * db[i] / b[i] ** 3 for i in range(n)) / w
    nu = w * det
    nu_s = w_s * det + w * det_s
    g = [y[i] / b[i] ** 2 for i in range(n)]
    nu_y = [det * g[i] / w for i in range(n)]
    nu_sy = [det_s * g[i] / w - 2.0 * det * y[i] * db[i] / (b[i] ** 3 * w) - det * g[i] * w_s / w ** 2
             for i in range(n)]
    nu_yy = [[det * ((1.0 / (b[i] ** 2 * w) if i == j else 0.0) - g[i] * g[j] / w ** 3) for j in range(n)]
             for i in range(n)]
    return OffsetDerivatives(w, nu, w_s, nu_s, nu_y, nu_sy, nu_yy)


def cylinder_shape_operator(cyl: CylinderSpec, p: np.ndarray) -> Tuple[np.ndarray, float]:
    """
    Оператор формы цилиндра в базисе tangent_basis(p) и средняя кривизна.
    Shape operator of the cylinder in the tangent_basis(p) frame, and the mean curvature.
    """
    cyl.check_point(p)
    diagonal = np.array([-1.0 / cyl.radius] * cyl.k + [0.0] * (cyl.n - cyl.k))
    A = np.diag(diagonal)
    return A, float(-np.trace(A))


def _tangent_coordinates(cyl: CylinderSpec, p: np.ndarray, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    basis = cyl.tangent_basis(p)
    if y.shape == (cyl.n,):
        return y
    if y.shape != (cyl.n + 1,):
        raise DomainError(f"Касательный вектор должен иметь размер {cyl.n} или {cyl.n + 1}")
    normal = cyl.normal_at(p)
    if abs(float(np.dot(y, normal))) > ON_CYLINDER_TOL * max(1.0, float(np.linalg.norm(y))):
        raise DomainError("Вектор y не касается цилиндра")
    return basis.T @ y


def eval_offset_jet(cyl: CylinderSpec, p: np.ndarray, s: float, y: np.ndarray) -> OffsetJet:
    """
    Функции w, nu, eta сдвига на высоту s с касательным вектором y.
    Offset functions w, nu, eta for height s and tangent vector y.

    Args:
        cyl (CylinderSpec): цилиндр / cylinder
        p (np.ndarray): точка цилиндра / point on the cylinder
        s (float): нормальная высота / normal height
        y (np.ndarray): касательный вектор (координаты в tangent_basis или вектор R^{n+1}) /
            tangent vector (tangent_basis coordinates or an R^{n+1} vector)

    Returns:
        OffsetJet

    Raises:
        SingularOffsetError: |s| >= sqrt(2k)
        DomainError: p вне цилиндра или y не касательный / p off the cylinder or y not tangent
    """
    p = cyl.check_point(p)
    _check_offset(cyl.k, s)
    coords = _tangent_coordinates(cyl, p, y)
    b, _ = _diagonal_offset(cyl.k, cyl.n, s)
    b = np.array([float(v) for v in b])
    B = np.diag(b)
    z = coords / b
    w = float(np.sqrt(1.0 + np.dot(z, z)))
    nu = w * float(np.prod(b))
    support = float(np.dot(p, cyl.normal_at(p)))
    p_tangent = cyl.tangent_basis(p).T @ p
    eta = (support + s - float(np.dot(p_tangent, z))) / w
    return OffsetJet(B=B, w=w, nu=nu, eta=eta)


def taylor_coefficients(cyl: CylinderSpec, p: np.ndarray) -> TaylorCoefficients:
    """
    Точные коэффициенты Тейлора w, nu, eta в (p, 0, 0).
    Exact Taylor coefficients of w, nu, eta at (p, 0, 0).
    """
    p = cyl.check_point(p)
    n, k = cyl.n, cyl.k
    _, db = _diagonal_offset(k, n, 0.0)
    rates = np.array([float(v) for v in db])
    zeros = np.zeros(n)
    eye = np.eye(n)
    support = float(np.dot(p, cyl.normal_at(p)))
    p_tangent = cyl.tangent_basis(p).T @ p
    return TaylorCoefficients(
        w_s=0.0, w_ss=0.0, w_y=zeros, w_sy=zeros, w_yy=eye,
        nu_s=float(rates.sum()),
        nu_ss=float(rates.sum() ** 2 - np.sum(rates ** 2)),
        nu_y=zeros, nu_sy=zeros, nu_yy=eye,
        eta_s=1.0, eta_ss=0.0,
        eta_y=-p_tangent,
        eta_sy=p_tangent * rates,
        eta_yy=-support * eye,
    )


def taylor_coefficients_fd(cyl: CylinderSpec, p: np.ndarray, h: float = 1e-4) -> TaylorCoefficients:
    """Центральные разности eval_offset_jet; совпадают с точными до O(h^2) / Central differences, O(h^2)."""
    n = cyl.n
    eye = np.eye(n)

    def jet(s, y):
        value = eval_offset_jet(cyl, p, s, y)
        return np.array([value.w, value.nu, value.eta])

    base = jet(0.0, np.zeros(n))
    plus_s, minus_s = jet(h, np.zeros(n)), jet(-h, np.zeros(n))
    d_s = (plus_s - minus_s) / (2 * h)
    d_ss = (plus_s - 2 * base + minus_s) / h ** 2
    d_y = np.zeros((3, n))
    d_sy = np.zeros((3, n))
    d_yy = np.zeros((3, n, n))
    for i in range(n):
        plus, minus = jet(0.0, h * eye[i]), jet(0.0, -h * eye[i])
        d_y[:, i] = (plus - minus) / (2 * h)
        d_yy[:, i, i] = (plus - 2 * base + minus) / h ** 2
        d_sy[:, i] = (jet(h, h * eye[i]) - jet(h, -h * eye[i]) - jet(-h, h * eye[i]) + jet(-h, -h * eye[i])) / (4 * h ** 2)
        for j in range(i + 1, n):
            mixed = (jet(0.0, h * (eye[i] + eye[j])) - jet(0.0, h * (eye[i] - eye[j]))
                     - jet(0.0, h * (eye[j] - eye[i])) + jet(0.0, -h * (eye[i] + eye[j]))) / (4 * h ** 2)
            d_yy[:, i, j] = d_yy[:, j, i] = mixed
    return TaylorCoefficients(
        w_s=d_s[0], w_ss=d_ss[0], w_y=d_y[0], w_sy=d_sy[0], w_yy=d_yy[0],
        nu_s=d_s[1], nu_ss=d_ss[1], nu_y=d_y[1], nu_sy=d_sy[1], nu_yy=d_yy[1],
        eta_s=d_s[2], eta_ss=d_ss[2], eta_y=d_y[2], eta_sy=d_sy[2], eta_yy=d_yy[2],
    )


@dataclass(frozen=True)
class GraphTerms:
    """
    Поточечные величины графа Sigma_u на узлах сетки.
    Pointwise quantities of the graph Sigma_u on the grid nodes.

    shift = u^2 + 2 sqrt(2k) u, radius_sq = |p|^2 + shift = |x|^2 на Sigma_u.
    """
    w: np.ndarray
    nu: np.ndarray
    eta: np.ndarray
    H: np.ndarray
    shift: np.ndarray
    radius_sq: np.ndarray

    @property
    def phi(self) -> np.ndarray:
        return self.eta / 2.0 - self.H

    @property
    def velocity(self) -> np.ndarray:
        """d_t u = w (eta/2 - H_u)."""
        return self.w * self.phi

    @property
    def area_density(self) -> np.ndarray:
        """nu e^{-shift/4}: множитель к гауссовым весам цилиндра / factor on the cylinder Gaussian weights."""
        return self.nu * np.exp(-self.shift / 4.0)


def _require_planar(cyl: CylinderSpec) -> None:
    if (cyl.k, cyl.n) != (1, 2):
        raise UnsupportedError("Узловые сетки поддерживаются только для k = 1, n = 2")


def check_graph(u: GraphField, margin: float) -> None:
    limit = u.cylinder.radius - margin
    if u.sup() >= limit:
        raise SingularOffsetError(f"sup|u| = {u.sup():.6f} >= sqrt(2k) - margin = {limit:.6f}")


def graph_terms(u: GraphField, form: str = 'chain', method: str = 'fd', margin: Optional[float] = None) -> GraphTerms:
    """
    w, nu, eta, H_u графа на всех узлах.
    w, nu, eta, H_u of the graph on all nodes.

    Args:
        u (GraphField): поле высот / height field
        form (str): 'chain' - развёрнутая формула, 'divergence' - численная дивергенция потока
            d_y nu / 'chain' expanded formula, 'divergence' numerical divergence of the flux d_y nu
        method (str): 'fd' или 'hermite' для производных по оси / 'fd' or 'hermite' axis derivatives
        margin (float): запас до радиуса инъективности / margin below the injectivity radius
    """
    cyl = u.cylinder
    _require_planar(cyl)
    check_graph(u, 0.1 * cyl.radius if margin is None else margin)
    grid = u.grid
    jet = grid.jet(u.values, method)
    r = cyl.radius
    slope = [jet.u_t / r, jet.u_y]
    hess = [[jet.u_tt / r ** 2, jet.u_ty / r], [jet.u_ty / r, jet.u_yy]]
    d = offset_derivatives(cyl.k, cyl.n, jet.u, slope)
    if form == 'chain':
        bracket = d.nu_s - sum(d.nu_sy[a] * slope[a] for a in range(2))
        bracket = bracket - sum(d.nu_yy[a][b] * hess[a][b] for a in range(2) for b in range(2))
    elif form == 'divergence':
        flux_theta = np.broadcast_to(d.nu_y[0], grid.shape)
        flux_y = np.broadcast_to(d.nu_y[1], grid.shape)
        divergence = grid.d_theta(flux_theta) / r + grid.d_y(flux_y, 1, method)
        bracket = d.nu_s - divergence
    else:
        raise InputError(f"Неизвестная форма H_u: {form}")
    H = d.w / d.nu * bracket
    _, y = grid.mesh
    eta = (r + jet.u - y * jet.u_y) / d.w
    shift = jet.u ** 2 + 2.0 * r * jet.u
    return GraphTerms(w=d.w, nu=d.nu, eta=eta, H=H, shift=shift, radius_sq=grid.p_sq + shift)


def graph_mean_curvature(cyl: CylinderSpec, u: GraphField, form: str = 'chain', method: str = 'fd') -> np.ndarray:
    """Средняя кривизна H_u графа / Mean curvature H_u of the graph."""
    if u.cylinder is not cyl:
        u = GraphField(u.grid, u.values, cyl)
    return graph_terms(u, form, method).H


def gradient_M(cyl: CylinderSpec, u: GraphField, method: str = 'fd') -> np.ndarray:
    """
    Градиент F на цилиндре: M(u) = (nu/w)(H_u - eta/2) exp(-(2 sqrt(2k) u + u^2)/4).
    Gradient of F on the cylinder.
    """
    if u.cylinder is not cyl:
        u = GraphField(u.grid, u.values, cyl)
    terms = graph_terms(u, 'chain', method)
    r = cyl.radius
    return terms.nu / terms.w * (terms.H - terms.eta / 2.0) * np.exp(-(2.0 * r * u.values + u.values ** 2) / 4.0)


@dataclass(frozen=True, eq=False)
class SurfaceSample:
    """
    Поточечная геометрия вложенной поверхности на карте (theta, t).
    Pointwise geometry of an embedded surface on a (theta, t) chart.

    Массивы векторов хранятся компонентами вперёд: x.shape == (3, n_theta, n_t).
    / Vector arrays are stored components first: x.shape == (3, n_theta, n_t).

    Attributes:
        chart (ChartGrid): карта / chart
        x, normal: положение и единичная нормаль / position and unit normal
        X1, X2: координатные касательные / coordinate tangents
        coeff (np.ndarray): C, E_i = sum_a C[a, i] X_a, форма (2, 2, ...) / frame coefficients
        metric (np.ndarray): g_ab, форма (2, 2, ...)
        A (np.ndarray): оператор формы в ортонормированном репере / shape operator in the frame
        H, phi: средняя кривизна и <x,n>/2 - H / mean curvature and <x,n>/2 - H
        tau (np.ma.MaskedArray): A/H, маска там, где H <= delta / masked where H <= delta
        area_weights (np.ndarray): sqrt(g) dtheta dt
    """
    chart: ChartGrid
    x: np.ndarray
    normal: np.ndarray
    X1: np.ndarray
    X2: np.ndarray
    coeff: np.ndarray
    metric: np.ndarray
    A: np.ndarray
    H: np.ndarray
    phi: np.ndarray
    tau: np.ma.MaskedArray
    delta: float
    area_weights: np.ndarray

    @cached_property
    def frame(self) -> np.ndarray:
        """E_i формы (2, 3, ...) / E_i of shape (2, 3, ...)."""
        return np.einsum('aiuv,acuv->icuv', self.coeff, np.stack([self.X1, self.X2]))

    @cached_property
    def radius_sq(self) -> np.ndarray:
        return np.sum(self.x ** 2, axis=0)

    @cached_property
    def gaussian(self) -> np.ndarray:
        return np.exp(-self.radius_sq / 4.0)

    @cached_property
    def A_norm_sq(self) -> np.ndarray:
        return np.einsum('ijuv,ijuv->uv', self.A, self.A)

    def ball(self, R: float) -> np.ndarray:
        return self.radius_sq < R ** 2

    def d1(self, f: np.ndarray) -> np.ndarray:
        return self.chart.d_theta(f)

    def d2(self, f: np.ndarray) -> np.ndarray:
        return self.chart.d_t(f)


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.cross(a, b, axis=0)


def embed_parametric(X: np.ndarray, chart: ChartGrid, delta: float = 0.1 / np.sqrt(2.0),
                     orient_outward: bool = True) -> SurfaceSample:
    """
    Геометрия параметрической поверхности X(theta, t) в R^3.
    Geometry of a parametric surface X(theta, t) in R^3.

    Args:
        X (np.ndarray): точки формы (3, n_theta, n_t) / points of shape (3, n_theta, n_t)
        chart (ChartGrid): карта / chart
        delta (float): порог H для tau = A/H / threshold on H for tau = A/H
        orient_outward (bool): выбрать нормаль с <n, x> >= 0 в среднем / pick the normal
            with <n, x> >= 0 on average
    """
    X = np.asarray(X, dtype=float)
    if X.shape != (3,) + chart.shape:
        raise InputError(f"X должен иметь форму {(3,) + chart.shape}, получено {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InputError("Вложение содержит не конечные значения")
    X1 = chart.d_theta(X)
    X2 = chart.d_t(X)
    X11 = chart.d_theta(X, 2)
    X12 = chart.d_t(X1)
    X22 = chart.d_t(X, 2)
    normal = _cross(X1, X2)
    normal = normal / np.linalg.norm(normal, axis=0)
    if orient_outward and np.mean(np.sum(normal * X, axis=0)) < 0:
        normal = -normal

    g11 = np.sum(X1 * X1, axis=0)
    g12 = np.sum(X1 * X2, axis=0)
    g22 = np.sum(X2 * X2, axis=0)
    metric = np.array([[g11, g12], [g12, g22]])
    det_g = g11 * g22 - g12 ** 2

    # Gram-Schmidt frame: E1 = X1/|X1|, E2 orthogonal to X1
    len1 = np.sqrt(g11)
    rho = np.sqrt(det_g / g11)
    coeff = np.zeros((2, 2) + chart.shape)
    coeff[0, 0] = 1.0 / len1
    coeff[0, 1] = -g12 / (g11 * rho)
    coeff[1, 1] = 1.0 / rho

    h = np.array([[np.sum(X11 * normal, axis=0), np.sum(X12 * normal, axis=0)],
                  [np.sum(X12 * normal, axis=0), np.sum(X22 * normal, axis=0)]])
    A = np.einsum('aiuv,abuv,bjuv->ijuv', coeff, h, coeff)
    A = 0.5 * (A + np.swapaxes(A, 0, 1))
    H = -(A[0, 0] + A[1, 1])
    phi = np.sum(X * normal, axis=0) / 2.0 - H
    mask = np.broadcast_to(H <= delta, A.shape).copy()
    safe_H = np.where(H > delta, H, 1.0)
    tau = np.ma.masked_array(A / safe_H, mask=mask)
    return SurfaceSample(
        chart=chart, x=X, normal=normal, X1=X1, X2=X2, coeff=coeff, metric=metric,
        A=A, H=H, phi=phi, tau=tau, delta=delta,
        area_weights=np.sqrt(det_g) * chart.cell_weights,
    )


def graph_embedding(u: GraphField) -> np.ndarray:
    """Точки x + u n графа формы (3, n_theta, n_y) / Points x + u n of the graph."""
    cyl = u.cylinder
    _require_planar(cyl)
    theta, y = u.grid.mesh
    R = cyl.radius + u.values
    local = np.stack([R * np.cos(theta), R * np.sin(theta), y])
    return np.tensordot(cyl.frame, local, axes=1)


def embed_graph(cyl: CylinderSpec, u: GraphField, delta: Optional[float] = None) -> SurfaceSample:
    """Поточечная геометрия графа Sigma_u / Pointwise geometry of the graph Sigma_u."""
    if u.cylinder is not cyl:
        u = GraphField(u.grid, u.values, cyl)
    _require_planar(cyl)
    check_graph(u, 0.1 * cyl.radius)
    if delta is None:
        delta = 0.1 * cyl.mean_curvature
    return embed_parametric(graph_embedding(u), u.grid.chart, delta)


def sphere_sample(n_theta: int = 64, n_psi: int = 161, radius: float = 2.0, cap: float = 0.3) -> SurfaceSample:
    """Сфера радиуса 2 (самоподобная S^2_2) в карте (theta, psi) / Round sphere in a (theta, psi) chart."""
    chart = ChartGrid(n_theta, n_psi, cap, np.pi - cap)
    theta, psi = chart.mesh
    X = radius * np.stack([np.sin(psi) * np.cos(theta), np.sin(psi) * np.sin(theta), np.cos(psi)])
    return embed_parametric(X, chart, delta=0.1)


def plane_sample(n_theta: int = 128, n_r: int = 401, r_min: float = 0.5, r_max: float = 12.0) -> SurfaceSample:
    """Кольцо плоскости z = 0 в полярной карте / Annulus of the plane z = 0 in a polar chart."""
    chart = ChartGrid(n_theta, n_r, r_min, r_max)
    theta, r = chart.mesh
    X = np.stack([r * np.cos(theta), r * np.sin(theta), np.zeros_like(r)])
    return embed_parametric(X, chart, delta=0.0)


# --- surface calculus -----------------------------------------------------------------


def surface_gradient(sample: SurfaceSample, f: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Градиент на поверхности: компоненты в репере E_i и объемлющий вектор.
    Surface gradient: components in the frame E_i and the ambient vector.
    """
    partial = np.stack([sample.d1(f), sample.d2(f)])
    components = np.einsum('aiuv,auv->iuv', sample.coeff, partial)
    ambient = np.einsum('iuv,icuv->cuv', components, sample.frame)
    return components, ambient


def covariant_hessian(sample: SurfaceSample, f: np.ndarray) -> np.ndarray:
    """Hess f(E_i, E_j) = <D_{E_i} grad f, E_j>, форма (2, 2, ...)."""
    _, grad = surface_gradient(sample, f)
    partial = np.stack([sample.d1(grad), sample.d2(grad)])
    directional = np.einsum('aiuv,acuv->icuv', sample.coeff, partial)
    hess = np.einsum('icuv,jcuv->ijuv', directional, sample.frame)
    return 0.5 * (hess + np.swapaxes(hess, 0, 1))


def surface_laplacian(sample: SurfaceSample, f: np.ndarray) -> np.ndarray:
    hess = covariant_hessian(sample, f)
    return hess[0, 0] + hess[1, 1]


def drift_operator(sample: SurfaceSample, f: np.ndarray) -> np.ndarray:
    """L f = Delta f - <x^T, grad f>/2 + (|A|^2 + 1/2) f."""
    components, _ = surface_gradient(sample, f)
    x_tangent = np.einsum('cuv,icuv->iuv', sample.x, sample.frame)
    drift = np.sum(x_tangent * components, axis=0)
    return surface_laplacian(sample, f) - drift / 2.0 + (sample.A_norm_sq + 0.5) * f


def _interior(sample: SurfaceSample, margin: int) -> slice:
    if sample.chart.n_t <= 2 * margin + 1:
        raise DomainError(f"Недостаточно узлов для внутренней подсетки с отступом {margin}")
    return slice(margin, sample.chart.n_t - margin)


def simons_trace_residual(sample: SurfaceSample, margin: int = 4) -> np.ndarray:
    """
    LH - H + Delta phi + phi |A|^2 на внутренней подсетке (исчезает для гладких поверхностей).
    LH - H + Delta phi + phi |A|^2 on the interior subgrid (vanishes for smooth surfaces).
    """
    inner = _interior(sample, margin)
    residual = (drift_operator(sample, sample.H) - sample.H + surface_laplacian(sample, sample.phi)
                + sample.phi * sample.A_norm_sq)
    return residual[:, inner]


def tau_gradient_sq(sample: SurfaceSample) -> np.ndarray:
    """|grad(A/H)|^2 через объемлющую производную тензора / via the ambient tensor derivative."""
    H = np.where(np.abs(sample.H) > 1e-14, sample.H, 1e-14)
    tau = sample.A / H
    ambient = np.einsum('ijuv,icuv,jduv->cduv', tau, sample.frame, sample.frame)
    partial = np.stack([sample.d1(ambient), sample.d2(ambient)])
    directional = np.einsum('akuv,acduv->kcduv', sample.coeff, partial)
    projected = np.einsum('kcduv,icuv,jduv->kijuv', directional, sample.frame, sample.frame)
    return np.einsum('kijuv,kijuv->uv', projected, projected)


@dataclass(frozen=True)
class EffectiveBoundReport:
    """
    Сравнение int |grad(A/H)|^2 с правой частью эффективной оценки.
    Comparison of int |grad(A/H)|^2 with the effective bound's right-hand side.
    """
    R: float
    band: float
    lhs: float
    volume_term: float
    phi_term: float
    constant: float
    sup_A: float
    passed: bool


def effective_bound_report(sample: SurfaceSample, R: float, s: float) -> EffectiveBoundReport:
    """
    lhs = int_{B_{R-s}} |grad(A/H)|^2 e^{-|x|^2/4};
    rhs = Vol(B_R) e^{-(R-s)^2/4} / s^2 + int_{B_R} (|Hess phi| + |phi|) e^{-|x|^2/4}.

    Raises:
        PreconditionError: H <= delta где-то в B_R / somewhere in B_R
    """
    if not 0 < s < R:
        raise InputError(f"Требуется 0 < s < R, получено s={s}, R={R}")
    ball = sample.ball(R)
    bad = ball & (sample.H <= sample.delta)
    if np.any(bad):
        index = tuple(int(v[0]) for v in np.nonzero(bad))
        location = sample.x[(slice(None),) + index]
        raise PreconditionError(
            f"H <= delta = {sample.delta:.4f} в узле {index}, x = {np.round(location, 6).tolist()}",
            location=location)
    inner = sample.ball(R - s)
    weights = sample.gaussian * sample.area_weights
    lhs = float(np.sum(tau_gradient_sq(sample)[inner] * weights[inner]))
    volume = float(np.sum(sample.area_weights[ball]))
    volume_term = volume * np.exp(-(R - s) ** 2 / 4.0) / s ** 2
    hess = covariant_hessian(sample, sample.phi)
    hess_norm = np.sqrt(np.einsum('ijuv,ijuv->uv', hess, hess))
    phi_term = float(np.sum(((hess_norm + np.abs(sample.phi)) * weights)[ball]))
    rhs = volume_term + phi_term
    constant = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf)
    sup_A = float(np.sqrt(np.max(sample.A_norm_sq[ball])))
    logger.debug(f"effective bound: R={R}, s={s}, lhs={lhs:.3e}, rhs={rhs:.3e}")
    return EffectiveBoundReport(R, s, lhs, volume_term, phi_term, float(constant), sup_A, bool(np.isfinite(constant)))


def flat_derivatives(u: GraphField):
    """
    Градиент и гессиан u в ортонормированных координатах плоского цилиндра.
    Gradient and Hessian of u in orthonormal coordinates of the flat cylinder.

    Returns:
        (grad, hess): формы (2, ...) и (2, 2, ...)
    """
    r = u.cylinder.radius
    jet = u.jet
    grad = np.stack([jet.u_t / r, jet.u_y])
    hess = np.array([[jet.u_tt / r ** 2, jet.u_ty / r], [jet.u_ty / r, jet.u_yy]])
    return grad, hess


def c2_norm(u: GraphField, R: Optional[float] = None) -> float:
    """max(|u|, |grad u|, |Hess u|) по узлам в B_R / over nodes in B_R."""
    grad, hess = flat_derivatives(u)
    pointwise = np.maximum.reduce([
        np.abs(u.values),
        np.sqrt(np.sum(grad ** 2, axis=0)),
        np.sqrt(np.einsum('ijuv,ijuv->uv', hess, hess)),
    ])
    if R is not None:
        pointwise = pointwise[u.grid.p_sq < R ** 2]
    return float(np.max(pointwise)) if pointwise.size else 0.0
