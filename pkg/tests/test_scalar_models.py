import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from errors import InputError, PreconditionError, UnsupportedError
from scalar_models import (DecaySequence, ModelFunction, admissible_sequence, bump, cauchy_schwarz_certificate,
                           discrete_decay_bound, interpolation_check, interpolation_exponents, interpolation_sweep,
                           ode_gradient_flow, sample_on_ball, second_lojasiewicz_fit, sqrt_increment_sum,
                           taylor_region_check)


class TestDecaySequence:

    @given(st.integers(min_value=0, max_value=2 ** 32 - 1), st.sampled_from([0.25, 0.5, 0.75]))
    @settings(max_examples=25, deadline=None)
    def test_bound_holds_on_admissible_sequences(self, seed, eps):
        seq = admissible_sequence(np.random.default_rng(seed), eps, K=1.0, length=500)
        assert seq.admissible
        C, verified = discrete_decay_bound(seq)
        assert C > 0
        assert verified

    def test_inadmissible_location(self):
        seq = DecaySequence(np.array([1.0, 0.9, 0.9, 0.5]), eps=0.5, K=1.0)
        with pytest.raises(PreconditionError) as info:
            discrete_decay_bound(seq)
        assert info.value.location == 1

    def test_increasing_sequence(self):
        seq = DecaySequence(np.array([0.1, 0.2, 0.0, 0.0]), eps=0.5, K=1.0)
        assert seq.first_violation() == 1

    @pytest.mark.parametrize('values, eps, K', [
        ([1.0, 0.5], 0.5, 1.0),
        ([1.0, -0.5, 0.0], 0.5, 1.0),
        ([1.0, np.nan, 0.0], 0.5, 1.0),
        ([1.0, 0.5, 0.0], 0.0, 1.0),
        ([1.0, 0.5, 0.0], 0.5, -1.0),
    ])
    def test_rejected_input(self, values, eps, K):
        with pytest.raises(InputError):
            DecaySequence(np.array(values), eps, K)

    def test_zero_sequence(self):
        assert discrete_decay_bound(DecaySequence(np.zeros(5), 0.5, 1.0)) == (0.0, True)


class TestSqrtSum:

    def test_polynomial_tail(self):
        seq = DecaySequence.from_function(lambda t: (1.0 + t) ** -4.0, 20000, eps=0.25, K=1.0)
        report = sqrt_increment_sum(seq)
        assert report.passed
        assert report.tail == pytest.approx(8.6e-7, rel=0.02)
        assert report.tail <= report.certificate
        assert np.all(np.diff(report.partial_sums) >= 0)

    def test_large_eps(self):
        seq = DecaySequence.from_function(lambda t: (1.0 + t) ** -1.0, 100, eps=1.0, K=0.1)
        with pytest.raises(UnsupportedError):
            sqrt_increment_sum(seq)

    def test_certificate_needs_two_terms(self):
        with pytest.raises(InputError):
            cauchy_schwarz_certificate(1.0, 0.5, 1)

    def test_certificate_decreases(self):
        assert cauchy_schwarz_certificate(1.0, 0.5, 1000) < cauchy_schwarz_certificate(1.0, 0.5, 10)


class TestGradientFlows:

    def test_parse_single_variable(self):
        f = ModelFunction.parse('x**2', 'x')
        assert f.dim == 1
        assert f.value(np.array([[3.0]]))[0] == 9.0

    def test_quadratic_length(self):
        result = ode_gradient_flow(ModelFunction.parse('x**2', 'x'), [1.0], T=20.0)
        assert result.length == pytest.approx(1.0, abs=1e-6)
        assert not result.blew_up

    def test_cubic_decay_rate(self):
        result = ode_gradient_flow(ModelFunction.parse('x**3/27', 'x'), [1.0], T=2000.0, beta=2.0 / 3.0)
        assert result.f[-1] == pytest.approx(27.0 / 2009.0 ** 3, rel=1e-6)
        assert result.decay_slope == pytest.approx(-3.0, abs=0.05)
        assert result.decay_constant < 27.0

    def test_leaving_the_neighborhood(self):
        result = ode_gradient_flow(ModelFunction.parse('-x**2', 'x'), [0.1], T=10.0, neighborhood=1.0)
        assert result.left_neighborhood
        assert result.t[-1] < 10.0

    def test_beta_range(self):
        with pytest.raises(InputError):
            ode_gradient_flow(ModelFunction.parse('x**2', 'x'), [1.0], T=1.0, beta=0.4)

    def test_initial_point_shape(self):
        with pytest.raises(InputError):
            ode_gradient_flow(ModelFunction.parse('x**2 + y**2'), [1.0], T=1.0)


class TestTaylorRegions:

    def test_split(self):
        assert ModelFunction.parse('x**2 + y**3').split == ([0], [1])

    def test_cubic_degeneracy_passes(self):
        report = taylor_region_check(ModelFunction.parse('x**2 + y**3'))
        assert report.hypothesis_holds
        assert report.passed
        assert report.broken_region is None

    def test_quartic_degeneracy_breaks_hypothesis(self):
        report = taylor_region_check(ModelFunction.parse('x**2 + y**4'))
        assert not report.hypothesis_holds
        assert report.broken_region == 'near_z'

    def test_too_many_variables(self):
        with pytest.raises(UnsupportedError):
            taylor_region_check(ModelFunction.parse('a**2 + b**2 + c**2 + d**2', 'a b c d'))

    def test_second_exponent(self):
        beta, constant = second_lojasiewicz_fit(ModelFunction.parse('x**2 + y**3'))
        assert 0.64 <= beta <= 0.7
        assert np.isfinite(constant)


class TestInterpolation:

    def test_exponents(self):
        assert interpolation_exponents(2, 1) == pytest.approx((2 / 3, 1 / 3, 0.0))

    def test_bump(self):
        assert bump(np.array([0.0]))[0] == 1.0
        assert np.all(bump(np.array([-1.0, 1.0, 2.0])) == 0.0)

    def test_sweep_is_scale_invariant(self):
        constants, slope = interpolation_sweep()
        assert np.all(np.isfinite(constants))
        assert constants.max() / constants.min() < 2.5

    def test_shifted_exponents_grow(self):
        _, plain = interpolation_sweep()
        _, shifted = interpolation_sweep(shift=0.05)
        assert shifted < plain - 0.1

    def test_planar_sample(self):
        values, h = sample_on_ball(lambda x, y: bump(x) * bump(y), 2, 1.0, 0.05)
        report = interpolation_check(values, h, 1.0, 2)
        assert report.n == 2
        assert all(0 < value < np.inf for value in report.constants.values())

    def test_order_too_low(self):
        values, h = sample_on_ball(bump, 1, 1.0, 0.01)
        with pytest.raises(InputError):
            interpolation_check(values, h, 1.0, 1)

    def test_coarse_sampling(self):
        values, h = sample_on_ball(bump, 1, 1.0, 0.5)
        with pytest.raises(InputError):
            interpolation_check(values, h, 1.0, 2)

    def test_three_dimensions_unsupported(self):
        values, h = sample_on_ball(lambda x, y, z: bump(x) * bump(y) * bump(z), 3, 1.0, 0.1)
        with pytest.raises(UnsupportedError):
            interpolation_check(values, h, 1.0, 2)
