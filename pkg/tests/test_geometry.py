import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from errors import DomainError, InputError, PreconditionError, SingularOffsetError, UnsupportedError
from geometry import (CylinderSpec, GraphField, c2_norm, effective_bound_report, embed_graph, eval_offset_jet,
                      flat_derivatives, gradient_M, graph_mean_curvature, graph_terms, plane_sample,
                      simons_trace_residual, sphere_sample, taylor_coefficients, taylor_coefficients_fd)
from grids import CylinderGrid
from loja import FAMILY_MODES, linearization_order

angle = st.floats(min_value=0.0, max_value=2 * np.pi, allow_nan=False)
height = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False)


def _point(a: float, z: float) -> np.ndarray:
    return np.array([np.sqrt(2.0) * np.cos(a), np.sqrt(2.0) * np.sin(a), z])


class TestCylinderSpec:

    def test_standard_radius_and_curvature(self, cylinder):
        assert cylinder.radius == pytest.approx(np.sqrt(2.0))
        assert cylinder.mean_curvature == pytest.approx(1.0 / np.sqrt(2.0))

    def test_rejects_bad_dimensions(self):
        with pytest.raises(DomainError):
            CylinderSpec(0, 2, np.eye(3))

    def test_rejects_non_orthonormal_frame(self):
        with pytest.raises(DomainError):
            CylinderSpec(1, 2, 2.0 * np.eye(3))

    def test_point_off_cylinder(self, cylinder):
        with pytest.raises(DomainError):
            cylinder.check_point(np.array([1.0, 0.0, 0.0]))

    @given(st.floats(min_value=-1.0, max_value=1.0), st.floats(min_value=-1.0, max_value=1.0),
           st.floats(min_value=0.1, max_value=1.0))
    @settings(max_examples=50, deadline=None)
    def test_from_axis_is_orthonormal(self, a, b, c):
        spec = CylinderSpec.from_axis(np.array([a, b, c]))
        axis = np.array([a, b, c]) / np.linalg.norm([a, b, c])
        assert np.allclose(spec.axis_basis[:, 0], axis)
        assert np.allclose(spec.frame.T @ spec.frame, np.eye(3), atol=1e-12)


class TestOffsetFunctions:

    @given(angle, height)
    @settings(max_examples=50, deadline=None)
    def test_zero_offset(self, a, z):
        cyl = CylinderSpec.standard()
        jet = eval_offset_jet(cyl, _point(a, z), 0.0, np.zeros(2))
        assert jet.w == pytest.approx(1.0)
        assert jet.nu == pytest.approx(1.0)
        assert jet.eta == pytest.approx(np.sqrt(2.0))

    def test_singular_offset(self, cylinder):
        with pytest.raises(SingularOffsetError):
            eval_offset_jet(cylinder, _point(0.0, 0.0), np.sqrt(2.0), np.zeros(2))

    def test_non_tangent_vector(self, cylinder):
        with pytest.raises(DomainError):
            eval_offset_jet(cylinder, _point(0.0, 0.0), 0.1, np.array([1.0, 0.0, 0.0]))

    def test_ambient_tangent_vector_matches_coordinates(self, cylinder):
        p = _point(0.0, 0.5)
        ambient = eval_offset_jet(cylinder, p, 0.2, np.array([0.0, 0.0, 0.3]))
        coords = eval_offset_jet(cylinder, p, 0.2, np.array([0.0, 0.3]))
        assert ambient.nu == pytest.approx(coords.nu)
        assert ambient.eta == pytest.approx(coords.eta)

    @given(angle, height)
    @settings(max_examples=25, deadline=None)
    def test_taylor_coefficients_match_differences(self, a, z):
        cyl = CylinderSpec.standard()
        exact = taylor_coefficients(cyl, _point(a, z)).as_dict()
        approx = taylor_coefficients_fd(cyl, _point(a, z), h=1e-4).as_dict()
        for key in exact:
            assert np.max(np.abs(exact[key] - approx[key])) < 1e-5, key

    def test_known_coefficients(self, cylinder):
        coefficients = taylor_coefficients(cylinder, _point(0.0, 0.7))
        assert coefficients.nu_s == pytest.approx(1.0 / np.sqrt(2.0))
        assert coefficients.eta_s == 1.0
        assert np.allclose(coefficients.eta_yy, -np.sqrt(2.0) * np.eye(2))


class TestGraphCurvature:

    def test_cylinder_mean_curvature(self, coarse_grid, cylinder):
        H = graph_mean_curvature(cylinder, GraphField.zeros(coarse_grid, cylinder))
        assert np.max(np.abs(H - 1.0 / np.sqrt(2.0))) < 1e-12

    @given(st.floats(min_value=-0.5, max_value=0.5, allow_nan=False))
    @settings(max_examples=30, deadline=None)
    def test_constant_graph_is_round_cylinder(self, c):
        field = GraphField(CylinderGrid(n_theta=8, n_y=41, L=4.0, M=8), np.full((8, 41), c))
        terms = graph_terms(field)
        assert np.allclose(terms.H, 1.0 / (np.sqrt(2.0) + c), atol=1e-12)
        assert np.allclose(terms.eta, np.sqrt(2.0) + c, atol=1e-12)

    def test_forms_agree(self, coarse_grid):
        theta, y = coarse_grid.mesh
        field = GraphField(coarse_grid, 0.01 * np.cos(2 * theta) * np.exp(-y ** 2 / 8.0))
        chain = graph_terms(field, 'chain').H
        divergence = graph_terms(field, 'divergence').H
        inner = slice(10, -10)
        assert np.max(np.abs(chain - divergence)[:, inner]) < 1e-5

    def test_unknown_form(self, coarse_grid):
        with pytest.raises(InputError):
            graph_terms(GraphField.zeros(coarse_grid), 'weak')

    def test_cylinder_is_critical(self, coarse_grid, cylinder):
        assert np.max(np.abs(gradient_M(cylinder, GraphField.zeros(coarse_grid, cylinder)))) < 1e-12

    def test_constant_graph_linearization_sign(self, coarse_grid, cylinder):
        c = 1e-4
        M = gradient_M(cylinder, GraphField(coarse_grid, np.full(coarse_grid.shape, c), cylinder))
        assert np.allclose(M, -c, rtol=1e-3)

    def test_offset_beyond_margin(self, coarse_grid):
        with pytest.raises(SingularOffsetError):
            graph_terms(GraphField(coarse_grid, np.full(coarse_grid.shape, 1.3)))

    def test_higher_dimensional_cylinder_unsupported(self, coarse_grid):
        field = GraphField(coarse_grid, np.zeros(coarse_grid.shape), CylinderSpec.standard(2, 3))
        with pytest.raises(UnsupportedError):
            graph_terms(field)

    @pytest.mark.parametrize('kind', ['kernel', 'orthogonal'])
    def test_linearization_remainder_is_quadratic(self, kind):
        order, residuals = linearization_order(FAMILY_MODES[kind])
        assert order >= 1.9
        assert np.all(np.diff(residuals) < 0)


class TestGraphField:

    def test_shape_mismatch(self, coarse_grid):
        with pytest.raises(InputError):
            GraphField(coarse_grid, np.zeros((3, 3)))

    def test_non_finite(self, coarse_grid):
        values = np.zeros(coarse_grid.shape)
        values[0, 0] = np.inf
        with pytest.raises(InputError):
            GraphField(coarse_grid, values)

    def test_flat_derivatives_of_linear_field(self, coarse_grid):
        _, y = coarse_grid.mesh
        grad, hess = flat_derivatives(GraphField(coarse_grid, 0.1 * y))
        assert np.allclose(grad[0], 0.0, atol=1e-12)
        assert np.allclose(grad[1], 0.1, atol=1e-10)
        assert np.allclose(hess, 0.0, atol=1e-8)

    def test_c2_norm_of_zero(self, coarse_grid):
        assert c2_norm(GraphField.zeros(coarse_grid)) == 0.0


class TestEmbedding:

    def test_cylinder_embedding_is_a_shrinker(self, coarse_grid, cylinder):
        sample = embed_graph(cylinder, GraphField.zeros(coarse_grid, cylinder))
        assert np.max(np.abs(sample.H - 1.0 / np.sqrt(2.0))) < 1e-8
        assert np.max(np.abs(sample.phi)) < 1e-8
        assert not np.any(sample.tau.mask)

    def test_sphere_is_a_shrinker(self):
        sample = sphere_sample()
        inner = slice(4, -4)
        assert np.max(np.abs(sample.H[:, inner] - 1.0)) < 1e-5
        assert np.max(np.abs(sample.phi[:, inner])) < 1e-5

    def test_simons_trace_on_sphere(self):
        assert np.max(np.abs(simons_trace_residual(sphere_sample()))) < 1e-3

    def test_plane_is_flat(self):
        sample = plane_sample(n_theta=32, n_r=101)
        assert np.max(np.abs(sample.A)) < 1e-9
        assert np.max(np.abs(sample.phi)) < 1e-9

    def test_effective_bound_needs_positive_curvature(self):
        with pytest.raises(PreconditionError) as info:
            effective_bound_report(plane_sample(n_theta=32, n_r=101), R=4.0, s=1.0)
        assert info.value.location is not None

    def test_effective_bound_on_sphere(self):
        report = effective_bound_report(sphere_sample(), R=3.0, s=0.5)
        assert report.passed
        assert report.lhs < 1e-6
        assert report.sup_A == pytest.approx(np.sqrt(0.5), rel=1e-4)

    def test_effective_bound_band(self):
        with pytest.raises(InputError):
            effective_bound_report(sphere_sample(), R=1.0, s=2.0)
