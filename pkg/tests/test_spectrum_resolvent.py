import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize, special

from threshold_lab.errors import EigenvalueCollisionError, SingularityError, WrongCaseError
from threshold_lab.spectral.gamma_core import Configuration, build_gamma
from threshold_lab.spectral.green_functions import EULER_GAMMA, green_log
from threshold_lab.spectral.spectrum_resolvent import (det_gamma_on_axis, negative_eigenvalues, resolvent_kernel,
                                                       resolvent_limit, resolvent_pole_order,
                                                       resolvent_zero_limit, single_centre_kappa)

X = (0.3, 0.2)
Y = (-0.4, 1.1)


class TestDeterminant:
    def test_single_centre_root(self, single_config):
        kappa = 2 * np.exp(-EULER_GAMMA)
        assert kappa == pytest.approx(1.1229189, rel=1e-7)
        assert abs(det_gamma_on_axis(single_config, kappa)) < 1e-14

    def test_single_centre_is_increasing(self, single_config):
        values = [det_gamma_on_axis(single_config, k) for k in np.geomspace(1e-3, 1e3, 50)]
        assert np.all(np.diff(values) > 0)


class TestNegativeEigenvalues:
    def test_single_centre(self, single_config):
        (state,) = negative_eigenvalues(single_config)
        assert state.kappa == pytest.approx(single_centre_kappa(0.0), rel=1e-12)
        assert state.energy == pytest.approx(-4 * np.exp(-2 * EULER_GAMMA), rel=1e-12)
        assert state.energy == pytest.approx(-1.26095, abs=1e-5)

    def test_weak_single_centre(self, single_config):
        (state,) = negative_eigenvalues(single_config.with_strengths([1.0]))
        assert state.kappa == pytest.approx(2 * np.exp(-2 * np.pi - EULER_GAMMA), rel=1e-12)

    @settings(max_examples=10)
    @given(alpha=st.floats(-2.0, 2.0))
    def test_single_centre_closed_form(self, single_config, alpha):
        (state,) = negative_eigenvalues(single_config.with_strengths([alpha]))
        assert state.kappa == pytest.approx(single_centre_kappa(alpha), rel=1e-10)

    def test_symmetric_pair_has_one_bound_state(self, pwave_config):
        def symmetric_channel(kappa):
            return np.log(kappa / 2) + EULER_GAMMA - special.k0(kappa)

        expected = optimize.brentq(symmetric_channel, 0.1, 10.0, xtol=1e-15)
        (state,) = negative_eigenvalues(pwave_config)
        assert state.kappa == pytest.approx(expected, rel=1e-10)
        np.testing.assert_allclose(state.c, np.array([1.0, 1.0]) / np.sqrt(2), atol=1e-8)

    def test_regular_pair_roots_are_kernel_vectors(self, regular_config):
        states = negative_eigenvalues(regular_config)
        assert len(states) == 2
        assert states[0].energy < states[1].energy
        for state in states:
            gamma = build_gamma(regular_config, 1j * state.kappa).entries.real
            assert np.linalg.norm(gamma @ state.c) <= 1e-10 * np.linalg.norm(gamma, 2)
            assert np.isfinite(state.eigenfunction(regular_config, X))

    @settings(max_examples=15)
    @given(seed=st.integers(0, 100_000), n=st.integers(1, 5))
    def test_at_most_n_bound_states(self, seed, n):
        rng = np.random.default_rng(seed)
        centres = np.column_stack([np.arange(n) * 1.3, rng.uniform(-0.5, 0.5, n)])
        config = Configuration(centres, rng.uniform(-1.0, 1.0, n))
        states = negative_eigenvalues(config, points_per_decade=32)
        assert sum(s.multiplicity for s in states) <= n


class TestResolventKernel:
    def test_symmetric_in_arguments(self, zero_config):
        forward = resolvent_kernel(zero_config, 0.7 + 0.1j, X, Y).value
        backward = resolvent_kernel(zero_config, 0.7 + 0.1j, Y, X).value
        assert forward == pytest.approx(backward, rel=1e-12)

    def test_real_on_imaginary_axis(self, regular_config):
        value = resolvent_kernel(regular_config, 3.0j, X, Y).value
        assert abs(value.imag) <= 1e-14 * abs(value.real)

    def test_diagonal_is_singular(self, regular_config):
        with pytest.raises(SingularityError):
            resolvent_kernel(regular_config, 1.0, X, X)

    def test_centre_is_singular(self, regular_config):
        with pytest.raises(SingularityError):
            resolvent_kernel(regular_config, 1.0, (0.0, 0.0), Y)

    def test_collision_with_eigenvalue(self, single_config):
        with pytest.raises(EigenvalueCollisionError):
            resolvent_kernel(single_config, 1j * single_centre_kappa(0.0), X, Y)

    def test_simple_pole(self, single_config):
        (state,) = negative_eigenvalues(single_config)
        assert resolvent_pole_order(single_config, state, X, Y) == pytest.approx(-1.0, abs=0.05)


class TestZeroLimit:
    def test_single_centre_formula(self, single_config):
        config = single_config.with_strengths([0.4])
        expected = (green_log(np.subtract(X, Y)) - green_log(X) - green_log(Y) - 0.4)
        assert resolvent_limit(config, X, Y) == pytest.approx(expected, abs=1e-14)

    def test_limit_is_symmetric(self, regular_config):
        assert resolvent_limit(regular_config, X, Y) == pytest.approx(resolvent_limit(regular_config, Y, X))

    def test_single_centre_error_scales_like_inverse_log(self, single_config):
        report = resolvent_zero_limit(single_config.with_strengths([0.4]), X, Y)
        errors = report.frame["abs_err"].to_numpy()
        assert errors[-1] < 0.5 * errors[0]
        assert report.summary["scaled_error_spread"] < 3.0

    @pytest.mark.parametrize("x, y", [
        (X, Y),
        ((1e-3, 0.0), (np.e + 2e-3, 1e-3)),
        ((15.0, 10.0), (-12.0, 20.0)),
        ((np.e - 0.01, 0.005), (30.0, -5.0)),
        ((1.5, 1.5), (0.8, -2.0)),
    ])
    def test_error_scales_like_inverse_log(self, regular_config, x, y):
        report = resolvent_zero_limit(regular_config, x, y)
        errors = report.frame["abs_err"].to_numpy()
        assert errors[-1] < 0.5 * errors[0]
        assert report.summary["scaled_error_spread"] < 3.0

    def test_resonant_configuration_rejected(self, pwave_config):
        with pytest.raises(WrongCaseError, match="validate-asymptotics"):
            resolvent_zero_limit(pwave_config, X, Y)
