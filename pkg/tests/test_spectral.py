import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from errors import InputError, UnsupportedError
from geometry import GraphField
from spectral import (SpectralBasis, apply_L, basis_eigenvalue, discrete_spectrum, evaluate,
                      fit_invertibility_constant, gaussian_norm, kernel_amplitudes, kernel_basis, kernel_dimension,
                      kernel_norm_constants, numeric_kernel_dimension, poincare_check, project_kernel, random_field,
                      spectral_gap, to_spectral)

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


class TestEigenvalues:

    @pytest.mark.parametrize('j, m, expected', [
        (0, 0, 1.0), (1, 0, 0.5), (0, 1, 0.5), (1, 1, 0.0), (0, 2, 0.0), (2, 0, -1.0), (0, 3, -0.5),
    ])
    def test_cylinder_eigenvalues(self, j, m, expected):
        assert basis_eigenvalue(j, m, 1) == pytest.approx(expected)

    def test_negative_index(self):
        with pytest.raises(InputError):
            basis_eigenvalue(-1, 0, 1)

    @pytest.mark.parametrize('k, n', [(1, 2), (1, 3), (2, 3), (1, 4), (2, 4)])
    def test_kernel_dimension_formula(self, k, n):
        kernel = kernel_basis(k, n)
        assert kernel.dimension == kernel_dimension(k, n)
        assert set(kernel.labels) <= {'rotation', 'quadratic'}

    def test_sphere_kernel(self):
        assert kernel_basis(2, 2).kind == 'sphere'

    def test_spectral_gap(self):
        assert spectral_gap(1, 2) == pytest.approx(0.5)


class TestNorms:

    @pytest.mark.parametrize('j, m', [(0, 0), (1, 1), (0, 2), (2, 0), (2, 1)])
    @pytest.mark.parametrize('which', ['L2', 'W12', 'W22'])
    def test_grid_matches_parseval(self, default_grid, j, m, which):
        unit = SpectralBasis(1, 2, j_max=3, m_max=4).unit(j, 0, m)
        nodal = evaluate(unit, default_grid)
        assert gaussian_norm(nodal, which) == pytest.approx(gaussian_norm(unit, which), rel=1e-4)

    def test_l1_ball_norm_is_monotone_in_radius(self):
        field = SpectralBasis(1, 2, j_max=2, m_max=4).unit(0, 0, 2)
        values = [gaussian_norm(field, 'L1', R) for R in (2.0, 3.0, 5.0)]
        assert values[0] <= values[1] <= values[2]

    def test_unknown_norm(self, coarse_grid):
        with pytest.raises(InputError):
            gaussian_norm(GraphField.zeros(coarse_grid), 'H3')

    def test_sobolev_ball_norm_needs_grid(self):
        field = SpectralBasis(1, 2, j_max=2, m_max=2).unit(0, 0, 1)
        with pytest.raises(UnsupportedError):
            gaussian_norm(field, 'W12', R=3.0)

    def test_round_trip_through_grid(self, default_grid, rng):
        basis = SpectralBasis(1, 2, j_max=3, m_max=6)
        field = random_field(basis, rng)
        restored = to_spectral(evaluate(field, default_grid), basis)
        assert np.max(np.abs(restored.amplitudes - field.amplitudes)) < 1e-6


class TestOperator:

    @pytest.mark.parametrize('j, m', [(0, 0), (1, 1), (0, 2), (2, 0), (1, 3)])
    def test_nodal_L_on_eigenfunctions(self, flow_grid, j, m):
        unit = SpectralBasis(1, 2, j_max=3, m_max=4).unit(j, 0, m)
        u = evaluate(unit, flow_grid)
        residual = apply_L(u).values - basis_eigenvalue(j, m, 1) * u.values
        assert gaussian_norm(u.with_values(residual)) < 1e-6

    def test_spectral_L_is_diagonal(self, rng):
        basis = SpectralBasis(1, 2, j_max=3, m_max=4)
        field = random_field(basis, rng)
        assert np.allclose(apply_L(field).amplitudes, basis.eigenvalues * field.amplitudes)

    def test_nodal_kernel_projection(self, coarse_grid):
        theta, y = coarse_grid.mesh
        kernel_part = 0.3 * (y ** 2 - 2.0) + 0.1 * y * np.sin(theta)
        u = GraphField(coarse_grid, kernel_part + 0.2 * np.cos(2 * theta))
        kernel, perp = project_kernel(u)
        assert np.max(np.abs(kernel.values - kernel_part)) < 1e-10
        assert np.max(np.abs(kernel_amplitudes(perp))) < 1e-12

    def test_spectral_kernel_projection(self, rng):
        basis = SpectralBasis(1, 2, j_max=3, m_max=4)
        field = random_field(basis, rng)
        kernel, perp = project_kernel(field)
        assert np.allclose((kernel + perp).amplitudes, field.amplitudes)
        assert np.allclose(apply_L(kernel).amplitudes, 0.0)

    def test_invertibility_on_complement(self):
        constants = fit_invertibility_constant(1, 2, samples=50)
        assert constants['W22'] > 0
        assert constants['L2'] >= constants['gap'] * (1 - 1e-12)

    def test_kernel_norm_constants(self, coarse_grid):
        constants = kernel_norm_constants(coarse_grid, samples=8)
        assert 0 < constants['C_K'] < np.inf
        assert 0 < constants['C2_over_L2'] < np.inf


class TestPoincare:

    @given(seeds)
    @settings(max_examples=50, deadline=None)
    def test_random_fields(self, seed):
        basis = SpectralBasis(1, 2, j_max=4, m_max=8)
        report = poincare_check(random_field(basis, np.random.default_rng(seed)))
        assert report.passed
        assert report.ratio <= 1.0

    def test_grid_field(self, flow_grid):
        u = evaluate(SpectralBasis(1, 2, j_max=2, m_max=4).unit(0, 0, 3), flow_grid)
        assert poincare_check(u).passed


class TestDiscreteSpectrum:

    def test_hermite_spectrum_is_exact(self, default_grid):
        table = discrete_spectrum(default_grid, 'spectral', count=20)
        assert list(table.columns) == ['j', 'label', 'm', 'exact', 'numeric', 'error']
        assert table['error'].max() < 1e-10

    def test_finite_difference_spectrum(self, default_grid):
        table = discrete_spectrum(default_grid, 'fd', count=20)
        assert table['error'].max() < 1e-3
        assert np.all(np.diff(table['exact'].abs()) >= 0)

    def test_numeric_kernel_dimension(self, default_grid):
        assert numeric_kernel_dimension(default_grid) == 3

    def test_kernel_threshold(self, default_grid):
        table = discrete_spectrum(default_grid, 'fd', count=20)
        kernel = table[table['exact'] == 0.0]
        assert len(kernel) == 3
        assert kernel['numeric'].abs().max() < 1e-6
        assert numeric_kernel_dimension(default_grid, threshold=1e-6) == 3
        assert numeric_kernel_dimension(default_grid, threshold=1e-10) == 0

    def test_unknown_method(self, coarse_grid):
        with pytest.raises(InputError):
            discrete_spectrum(coarse_grid, 'chebyshev')
