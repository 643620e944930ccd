import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from errors import DomainError, InputError
from grids import (ChartGrid, CylinderGrid, fd_matrix, gauss_hermite_rule, gaussian_tail, hermite_table,
                   smooth_cutoff)
from spectral import gaussian_volume


class TestFiniteDifferences:

    @pytest.mark.parametrize('deriv', [1, 2])
    def test_polynomials_up_to_degree_four_are_exact(self, deriv):
        y = np.linspace(-3.0, 3.0, 61)
        h = y[1] - y[0]
        u = y ** 4 - 2.0 * y ** 3 + y - 1.0
        exact = 4 * y ** 3 - 6 * y ** 2 + 1 if deriv == 1 else 12 * y ** 2 - 12 * y
        approx = fd_matrix(y.size, h, deriv) @ u
        assert np.max(np.abs(approx - exact)) < 1e-7

    def test_fourth_order_convergence(self):
        errors = []
        for n in (41, 81, 161):
            y = np.linspace(-2.0, 2.0, n)
            approx = fd_matrix(n, y[1] - y[0], 1) @ np.sin(y)
            errors.append(np.max(np.abs(approx - np.cos(y))))
        rates = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
        assert np.all(rates > 3.5)

    def test_too_few_nodes(self):
        with pytest.raises(DomainError):
            fd_matrix(4, 0.1, 1)


class TestHermite:

    def test_orthonormal_under_gauss_rule(self):
        y, w = gauss_hermite_rule(24)
        table = hermite_table(y, 8)
        gram = (table * w) @ table.T
        assert np.allclose(gram, np.eye(9), atol=1e-12)

    def test_rule_weights_sum_to_one(self):
        _, w = gauss_hermite_rule(16)
        assert np.sum(w) == pytest.approx(1.0, abs=1e-14)

    def test_hermite_axis_derivative_of_quadratic(self):
        grid = CylinderGrid(n_theta=8, n_y=241, L=12.0, M=8)
        _, y = grid.mesh
        derivative = grid.d_y(y ** 2, 1, method='hermite')
        inner = np.abs(grid.y) <= 6.0
        assert np.max(np.abs(derivative - 2.0 * y)[:, inner]) < 1e-6

    def test_unknown_axis_method(self, coarse_grid):
        with pytest.raises(InputError):
            coarse_grid.d_y(np.zeros(coarse_grid.shape), method='chebyshev')


class TestCutoff:

    @given(st.floats(min_value=-20.0, max_value=20.0, allow_nan=False))
    @settings(max_examples=200, deadline=None)
    def test_values_in_unit_interval(self, y):
        value = float(smooth_cutoff(np.array(y), 2.0, 4.0))
        assert 0.0 <= value <= 1.0
        if abs(y) <= 2.0:
            assert value == 1.0
        if abs(y) >= 4.0:
            assert value == 0.0

    def test_empty_band(self):
        with pytest.raises(InputError):
            smooth_cutoff(np.zeros(3), 2.0, 2.0)


class TestChartGrid:

    @pytest.mark.parametrize('n_theta, n_t, t_min, t_max', [
        (7, 21, 0.0, 1.0),
        (2, 21, 0.0, 1.0),
        (8, 5, 0.0, 1.0),
        (8, 21, 1.0, 1.0),
    ])
    def test_rejects_bad_shape(self, n_theta, n_t, t_min, t_max):
        with pytest.raises(DomainError):
            ChartGrid(n_theta, n_t, t_min, t_max)

    @pytest.mark.parametrize('j', [1, 2, 3])
    def test_theta_derivative_is_spectral(self, j):
        chart = ChartGrid(16, 11, 0.0, 1.0)
        theta, _ = chart.mesh
        assert np.max(np.abs(chart.d_theta(np.cos(j * theta)) + j * np.sin(j * theta))) < 1e-12
        assert np.max(np.abs(chart.d_theta(np.cos(j * theta), 2) + j * j * np.cos(j * theta))) < 1e-11

    def test_jet_rejects_nan(self):
        chart = ChartGrid(8, 11, 0.0, 1.0)
        values = np.zeros(chart.shape)
        values[2, 3] = np.nan
        with pytest.raises(InputError):
            chart.jet(values)

    def test_third_derivative_unsupported(self):
        chart = ChartGrid(8, 11, 0.0, 1.0)
        with pytest.raises(InputError):
            chart.d_t(np.zeros(chart.shape), 3)


class TestCylinderQuadrature:

    def test_gaussian_volume(self, flow_grid):
        value = flow_grid.integrate(np.ones(flow_grid.shape))
        assert value == pytest.approx(gaussian_volume(1, 2), rel=1e-7)

    def test_tail_bound(self, default_grid):
        assert default_grid.tail_bound() == pytest.approx(gaussian_tail(12.0))
        assert default_grid.tail_bound() < 1e-12

    def test_p_sq_on_axis_origin(self, coarse_grid):
        middle = coarse_grid.n_y // 2
        assert np.allclose(coarse_grid.p_sq[:, middle], 2.0)
