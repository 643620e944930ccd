import numpy as np
import pytest

from errors import DataError, FitError, InputError
from flow import FlowConfig, FlowSeries, FlowState, perturbation, run_flow
from geometry import CylinderSpec, GraphField, embed_graph
from loja import (FAMILY_EPS, SeriesAnnotator, cylindrical_scale, discrete_flow_inequality, distance_to_cylinders,
                  exponent_fit, fill_shrinker_scales, first_lojasiewicz_report, fit_cylinder,
                  gradient_lojasiewicz_report, mode_family, scale_compatibility_report, shrinker_radius,
                  shrinker_scale, uniqueness_report)


def _series(s, F, **columns):
    rows = []
    for i, (a, b) in enumerate(zip(s, F)):
        row = {'step': i, 's': float(a), 'F': float(b)}
        row.update({name: float(values[i]) for name, values in columns.items()})
        rows.append(row)
    return FlowSeries(rows=rows)


class TestCylinderFit:

    def test_recovers_tilted_axis(self, coarse_grid):
        axis = np.array([0.2, -0.1, 1.0])
        axis /= np.linalg.norm(axis)
        cylinder = CylinderSpec.from_axis(axis)
        sample = embed_graph(cylinder, GraphField.zeros(coarse_grid, cylinder))
        fit = fit_cylinder(sample, R=4.0)
        assert fit.distance < 1e-5
        assert abs(fit.cylinder.axis_basis[:, 0] @ axis) == pytest.approx(1.0, abs=1e-8)

    def test_wrong_axis_has_positive_distance(self, coarse_grid, cylinder):
        sample = embed_graph(cylinder, GraphField.zeros(coarse_grid, cylinder))
        assert distance_to_cylinders(sample, 4.0, np.array([0.0, 0.0, 1.0])) < 1e-10
        assert distance_to_cylinders(sample, 4.0, np.array([0.3, 0.0, 1.0])) > 1e-2

    def test_empty_ball(self, coarse_grid, cylinder):
        sample = embed_graph(cylinder, GraphField.zeros(coarse_grid, cylinder))
        with pytest.raises(InputError):
            fit_cylinder(sample, R=1.0)

    def test_cylindrical_scale_of_exact_cylinder(self, coarse_grid, cylinder):
        sample = embed_graph(cylinder, GraphField.zeros(coarse_grid, cylinder))
        scale = cylindrical_scale(sample, cylinder=cylinder)
        assert not scale.flagged
        assert scale.radius == scale.cap
        assert scale.cap == pytest.approx(np.sqrt(2.0 + 36.0))

    def test_cylindrical_scale_threshold(self, coarse_grid, cylinder):
        sample = embed_graph(cylinder, GraphField.zeros(coarse_grid, cylinder))
        with pytest.raises(InputError):
            cylindrical_scale(sample, eps0=0.0, cylinder=cylinder)


class TestExponentFit:

    def test_power_law(self):
        x = np.logspace(-3, 0, 8)
        fit = exponent_fit(x, 2.0 * x ** 1.5)
        assert fit.slope == pytest.approx(1.5)
        assert fit.intercept == pytest.approx(np.log(2.0))
        assert fit.band < 1e-8
        assert fit.count == 8

    @pytest.mark.parametrize('x, y', [
        ([1e-3, 1e-2, 1e-1], [1.0, 2.0, 3.0]),
        ([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0]),
        ([1e-3, 1e-2, 1e-1, 1.0], [1.0, 0.0, 3.0, 4.0]),
    ])
    def test_rejected_samples(self, x, y):
        with pytest.raises(FitError):
            exponent_fit(x, y)


class TestShrinkerScale:

    def test_radius_from_drop(self):
        assert shrinker_radius(np.exp(-8.0)) == pytest.approx(4.0)
        assert shrinker_radius(0.0) == np.inf

    def test_increasing_F(self):
        with pytest.raises(DataError):
            shrinker_radius(-1e-6)

    def test_scale_from_series(self):
        s = np.linspace(0.0, 4.0, 41)
        series = _series(s, 1.0 + np.exp(-s))
        drop = np.exp(-1.0) - np.exp(-3.0)
        assert shrinker_scale(series, 2.0) == pytest.approx(np.sqrt(-2.0 * np.log(drop)), rel=1e-3)

    def test_window_not_covered(self):
        s = np.linspace(0.0, 4.0, 41)
        with pytest.raises(InputError):
            shrinker_scale(_series(s, 1.0 + np.exp(-s)), 3.5)

    def test_non_monotone_window(self):
        s = np.linspace(0.0, 4.0, 41)
        F = 1.0 + np.exp(-s)
        F[20] += 0.1
        with pytest.raises(DataError):
            shrinker_scale(_series(s, F), 2.0)

    def test_fill_marks_uncovered_rows(self):
        s = np.linspace(0.0, 4.0, 41)
        series = _series(s, 1.0 + np.exp(-s))
        fill_shrinker_scales(series)
        R = series.column('R_shrink')
        assert np.isnan(R[0]) and np.isnan(R[-1])
        assert np.all(np.isfinite(R[10:31]))


class TestFlowInequality:

    def test_tau_range(self):
        s = np.linspace(0.0, 10.0, 101)
        with pytest.raises(InputError):
            discrete_flow_inequality(_series(s, 1.0 + np.exp(-s)), tau=0.2, F_C=1.0)

    def test_polynomial_decay(self):
        s = np.linspace(0.0, 20.0, 201)
        report = discrete_flow_inequality(_series(s, 1.0 + (1.0 + s) ** -2.0), tau=0.5, F_C=1.0)
        assert report.passed
        assert report.K_fit == pytest.approx(0.25, rel=0.05)
        assert report.reference == 'given'

    def test_reference_needs_state(self):
        s = np.linspace(0.0, 10.0, 101)
        with pytest.raises(InputError):
            discrete_flow_inequality(_series(s, 1.0 + np.exp(-s)))


class TestFamilies:

    def test_unknown_family(self):
        with pytest.raises(InputError):
            mode_family('helical')

    def test_family_scaling(self):
        family = mode_family('orthogonal')
        assert len(family) == len(FAMILY_EPS)
        ratio = family[-1].sup() / family[0].sup()
        assert ratio == pytest.approx(FAMILY_EPS[-1] / FAMILY_EPS[0])

    def test_gradient_inequality_on_orthogonal_family(self):
        report = gradient_lojasiewicz_report(mode_family('orthogonal'), R=5.0)
        assert report.passed
        assert report.exponent.slope == pytest.approx(2.0, abs=0.1)

    def test_gradient_exponent_on_kernel_family(self):
        report = gradient_lojasiewicz_report(mode_family('kernel'), R=5.0)
        assert report.exponent.slope > 1.3
        assert np.isfinite(report.constant)

    def test_first_inequality_on_orthogonal_family(self):
        report = first_lojasiewicz_report(mode_family('orthogonal'), R=5.0, check_scale=False)
        assert report.skipped is None
        assert report.passed
        assert report.meta['b'] == 1.0


class TestRunReports:

    def test_annotator_tracks_axis(self, coarse_grid):
        u = perturbation(coarse_grid, [[2, 0, 0.02]])
        annotator = SeriesAnnotator(R=3.0, n_starts=4)
        series = run_flow(FlowState(0.0, u, FlowConfig(dt=0.05)), steps=20, cadence=4, on_row=annotator)
        assert np.all(np.isfinite(series.column('dC_R')))
        assert np.max(np.abs(series.column('axis_a'))) < 1e-6
        assert np.all(series.column('r_cyl') > 0)

    def test_uniqueness_on_converging_series(self):
        s = np.linspace(0.0, 10.0, 101)
        series = _series(s, 1.0 + 1e-8 * np.exp(-s), axis_a=np.zeros_like(s), axis_b=np.zeros_like(s),
                         u_L2=0.01 * np.exp(-s), phi_L2=0.01 * np.exp(-s), dC_R=0.01 * np.exp(-s))
        report = uniqueness_report(series)
        assert report.passed
        assert report.diagnosis == 'converging'
        assert report.decay_rate == pytest.approx(1.0, rel=1e-6)

    def test_uniqueness_on_halted_series(self):
        s = np.linspace(0.0, 1.0, 11)
        series = _series(s, 1.5 - 0.01 * s, axis_a=np.zeros_like(s), axis_b=np.zeros_like(s),
                         u_L2=np.exp(s), phi_L2=np.exp(s), dC_R=np.exp(s))
        series.halt_reason = 'sup|u| reached the margin'
        report = uniqueness_report(series)
        assert not report.passed
        assert report.diagnosis.startswith('halted')

    def test_uniqueness_on_stalled_series(self):
        s = np.linspace(0.0, 4.9, 50)
        flat = np.full_like(s, 0.5)
        series = _series(s, np.full_like(s, 1.3), axis_a=np.zeros_like(s), axis_b=np.zeros_like(s),
                         u_L2=flat, phi_L2=flat, dC_R=flat)
        report = uniqueness_report(series)
        assert report.axis_tail == 0.0
        assert report.sqrt_tail == 0.0
        assert report.final_phi == 0.5
        assert not report.passed
        assert report.diagnosis.startswith('stalled')

    def test_uniqueness_phi_tolerance(self):
        s = np.linspace(0.0, 10.0, 101)
        series = _series(s, 1.0 + 1e-8 * np.exp(-s), axis_a=np.zeros_like(s), axis_b=np.zeros_like(s),
                         u_L2=0.01 * np.exp(-s), phi_L2=0.01 * np.exp(-s), dC_R=0.01 * np.exp(-s))
        assert uniqueness_report(series, phi_tol=1e-6).passed
        report = uniqueness_report(series, phi_tol=1e-7)
        assert not report.passed
        assert report.diagnosis.startswith('stalled')

    def test_uniqueness_on_growing_phi(self):
        s = np.linspace(0.0, 2.0, 21)
        series = _series(s, 1.5 - 1e-6 * s, axis_a=np.zeros_like(s), axis_b=np.zeros_like(s),
                         u_L2=0.01 * np.exp(s), phi_L2=0.01 * np.exp(s), dC_R=0.01 * np.exp(s))
        report = uniqueness_report(series)
        assert not report.passed
        assert report.diagnosis.startswith('diverging')

    def test_uniqueness_needs_rows(self):
        with pytest.raises(InputError):
            uniqueness_report(_series([0.0], [1.0]))

    def test_scale_compatibility(self):
        s = np.linspace(0.0, 6.0, 61)
        series = _series(s, 1.0 + np.exp(-s), r_cyl=np.full_like(s, 6.0), R_shrink=np.full_like(s, 3.0))
        report = scale_compatibility_report(series)
        assert report.passed
        assert report.mu_fit == pytest.approx(1.0)
