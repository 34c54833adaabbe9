import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from threshold_lab.errors import DomainError, SingularityError
from threshold_lab.spectral.green_functions import (EULER_GAMMA, SpectralParameter, bessel_j0, calibrate_c_delta,
                                                    evaluate_green, g_scale, green_free, green_log,
                                                    green_radial, green_remainder, hankel1_0_scaled,
                                                    hankel_envelope, scaled_hankel)
from threshold_lab.spectral.load_lab_config import LAB_CFG


def reference_hankel(z):
    return 0.25j * special.hankel1(0, z)


class TestBesselJ0:
    def test_origin(self):
        assert bessel_j0(0.0) == 1.0

    def test_first_zero(self):
        assert abs(bessel_j0(2.404825557695773)) < 1e-12

    @pytest.mark.parametrize("z", [0.5, 2.0, 3.99, 7.5, 30.0])
    def test_matches_library(self, z):
        assert bessel_j0(z).real == pytest.approx(special.j0(z), abs=1e-14)

    def test_rejects_non_finite(self):
        with pytest.raises(DomainError):
            bessel_j0(float("nan"))


class TestScaledHankel:
    @pytest.mark.parametrize("z", [1e-3, 0.1, 1.0, 3.9, 4.1, 10.0, 100.0, 3.0 + 2.0j, 0.5 + 6.0j])
    def test_matches_library(self, z):
        assert hankel1_0_scaled(z) == pytest.approx(reference_hankel(z), rel=1e-9)

    def test_regimes_stitch_at_switch(self):
        switch = LAB_CFG.regime_switch
        inside = hankel1_0_scaled(switch * (1 - 1e-12))
        outside = hankel1_0_scaled(switch * (1 + 1e-12))
        assert abs(inside - outside) <= 1e-10 * abs(inside)

    def test_small_argument_reduces_to_g(self):
        assert abs(hankel1_0_scaled(1e-8) - g_scale(1e-8)) < 1e-14

    def test_large_argument_decay(self):
        z = np.geomspace(1.0, 1e4, 200)
        assert np.max(np.abs(scaled_hankel(z)) * np.sqrt(z)) < 0.3

    def test_positive_on_imaginary_axis(self):
        value = hankel1_0_scaled(1j)
        assert value.imag == 0.0
        assert value.real == pytest.approx(special.k0(1.0) / (2 * np.pi), rel=1e-12)

    def test_envelope_removes_oscillation(self):
        z = np.array([5.0, 50.0, 500.0])
        np.testing.assert_allclose(hankel_envelope(z), np.exp(-1j * z) * reference_hankel(z), rtol=1e-9)

    def test_zero_argument_is_singular(self):
        with pytest.raises(SingularityError):
            hankel1_0_scaled(0.0)

    def test_quadrature_follows_configured_nodes(self, monkeypatch):
        z = 4.5
        monkeypatch.setattr(LAB_CFG, "laguerre_nodes", 96)
        assert hankel1_0_scaled(z) == pytest.approx(reference_hankel(z), rel=1e-9)
        monkeypatch.setattr(LAB_CFG, "laguerre_nodes", 2)
        assert abs(hankel1_0_scaled(z) - reference_hankel(z)) > 1e-10 * abs(reference_hankel(z))


class TestGScale:
    def test_real_two(self):
        assert g_scale(2.0) == pytest.approx(0.25j - EULER_GAMMA / (2 * np.pi), abs=1e-15)

    def test_imaginary_two_is_real(self):
        value = g_scale(2.0j)
        assert value.imag == 0.0
        assert value.real == pytest.approx(-EULER_GAMMA / (2 * np.pi), abs=1e-15)

    def test_threshold_is_singular(self):
        with pytest.raises(SingularityError):
            g_scale(0.0)

    def test_lower_half_plane_rejected(self):
        with pytest.raises(DomainError):
            SpectralParameter(1.0 - 1.0j)

    def test_negative_real_allowed(self):
        assert SpectralParameter(-2.0).on_real_axis


class TestGreenFunctions:
    @pytest.mark.parametrize("x, expected", [((1.0, 0.0), 0.0), ((0.0, np.e), -1 / (2 * np.pi)),
                                             ((2.0, 0.0), -np.log(2.0) / (2 * np.pi))])
    def test_green_log(self, x, expected):
        assert green_log(x) == pytest.approx(expected, abs=1e-15)

    def test_symmetric_in_x(self):
        assert green_free(1.5, (0.3, -0.7)) == green_free(1.5, (-0.3, 0.7))

    def test_origin_is_singular(self):
        with pytest.raises(SingularityError):
            green_free(1.0, (0.0, 0.0))
        with pytest.raises(SingularityError):
            green_log((0.0, 0.0))
        with pytest.raises(SingularityError):
            green_radial(1.0, np.array([1.0, 0.0]))

    def test_regime_is_reported(self):
        assert evaluate_green(1.0, (1.0, 0.0)).regime == "series"
        assert evaluate_green(10.0, (1.0, 0.0)).regime == "asymptotic"

    @given(kappa=st.floats(1e-3, 100.0), r=st.floats(1e-3, 5.0))
    def test_real_positive_on_imaginary_axis(self, kappa, r):
        value = green_free(1j * kappa, (r, 0.0))
        assert value.real > 0
        assert abs(value.imag) <= 1e-12 * value.real


class TestRemainder:
    def test_small_argument_bound(self):
        rem = green_remainder(1e-6, (1.0, 0.0), delta=0.9)
        assert abs(rem.value) < 1e-5
        assert rem.within_bound is True
        assert rem.regime == "series"

    def test_leading_behaviour(self):
        lam = 1e-3
        g = g_scale(lam)
        expected = -0.25 * g * lam**2 - lam**2 / (8 * np.pi)
        assert green_remainder(lam, (1.0, 0.0)).value == pytest.approx(expected, rel=1e-5)

    def test_real_on_imaginary_axis(self):
        assert green_remainder(1e-2j, (0.0, 3.0)).value.imag == 0.0

    def test_bound_not_asserted_for_large_arguments(self):
        assert green_remainder(100.0, (1.0, 0.0)).within_bound is None

    def test_calibration_rejects_bad_delta(self):
        with pytest.raises(DomainError):
            calibrate_c_delta(1.5)

    def test_calibration_is_finite(self):
        assert 0 < calibrate_c_delta(0.9) < 10
