import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from threshold_lab.errors import ConfigurationError, NearSingularError, PreconditionError
from threshold_lab.spectral.gamma_core import (Configuration, build_gamma, build_structure, expansion_residual,
                                               invert_gamma, jn_invert, low_energy_gamma, scaled_gamma)
from threshold_lab.spectral.green_functions import EULER_GAMMA, g_scale


class TestConfiguration:
    def test_coincident_centres_rejected(self):
        with pytest.raises(ConfigurationError, match="coincide"):
            Configuration([[0.0, 0.0], [0.0, 0.0]], [0.0, 0.0])

    def test_strength_count_checked(self):
        with pytest.raises(ConfigurationError):
            Configuration([[0.0, 0.0], [1.0, 0.0]], [0.0])

    def test_non_finite_rejected(self):
        with pytest.raises(ConfigurationError):
            Configuration([[0.0, np.nan]], [0.0])

    def test_arrays_are_read_only(self, regular_config):
        with pytest.raises(ValueError):
            regular_config.strengths[0] = 1.0


class TestBuildGamma:
    def test_single_centre_on_imaginary_axis(self, single_config):
        gamma = build_gamma(single_config, 3.0j)
        expected = np.log(1.5) / (2 * np.pi) + EULER_GAMMA / (2 * np.pi)
        assert gamma.is_real
        assert gamma.entries[0, 0].real == pytest.approx(expected, abs=1e-15)

    def test_symmetric(self, zero_config):
        entries = build_gamma(zero_config, 0.7 + 0.2j).entries
        np.testing.assert_array_equal(entries, entries.T)

    def test_scaled_gamma_tends_to_p(self, regular_config):
        np.testing.assert_allclose(scaled_gamma(regular_config, 1e-12), np.full((2, 2), 0.5), atol=0.05)

    @given(kappa=st.floats(1e-3, 1e3), angle=st.floats(0.0, 6.3),
           shift=st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
    def test_invariant_under_euclidean_motions(self, zero_config, kappa, angle, shift):
        original = build_gamma(zero_config, 1j * kappa).entries
        moved = build_gamma(zero_config.moved(angle, shift), 1j * kappa).entries
        np.testing.assert_allclose(moved, original, rtol=1e-9, atol=1e-12)

    @given(kappa=st.floats(1e-3, 1e3))
    def test_real_symmetric_on_imaginary_axis(self, swave_config, kappa):
        gamma = build_gamma(swave_config, 1j * kappa)
        assert gamma.is_real
        np.testing.assert_array_equal(gamma.entries, gamma.entries.T)

    def test_diagonal_dominance_for_large_kappa(self, pwave_config):
        entries = build_gamma(pwave_config, 50.0j).entries.real
        assert abs(entries[0, 1]) / abs(entries[0, 0]) < 1e-20


class TestStructure:
    def test_unit_distance_pair(self):
        structure = build_structure(Configuration([[0.0, 0.0], [1.0, 0.0]], [0.3, -0.2]))
        np.testing.assert_allclose(structure.dtilde, np.diag([0.3, -0.2]), atol=1e-16)
        np.testing.assert_allclose(structure.g1, [[0.0, -0.125], [-0.125, 0.0]])

    def test_g2_identity(self, zero_config):
        structure = build_structure(zero_config)
        np.testing.assert_allclose(structure.g2, structure.g1 / (2 * np.pi) + structure.g2tilde, atol=1e-15)

    def test_projections(self, zero_config):
        structure = build_structure(zero_config)
        np.testing.assert_allclose(structure.proj_p + structure.proj_s, np.eye(3))
        np.testing.assert_allclose(structure.proj_s @ structure.proj_s, structure.proj_s, atol=1e-15)
        assert structure.s_basis.shape == (3, 2)


class TestLowEnergy:
    @pytest.mark.parametrize("lam", [1e-2, 0.5, 3.0, 1e-3j])
    def test_split_matches_direct_assembly(self, zero_config, lam):
        direct = build_gamma(zero_config, lam).entries
        split = low_energy_gamma(zero_config, lam).entries
        np.testing.assert_allclose(split, direct, rtol=1e-10, atol=1e-13)

    def test_residual_is_fourth_order(self, regular_config):
        coarse = np.max(np.abs(expansion_residual(regular_config, 1e-2)))
        fine = np.max(np.abs(expansion_residual(regular_config, 1e-3)))
        assert fine < 1e-3 * coarse

    def test_single_centre_has_no_residual(self, single_config):
        assert np.all(expansion_residual(single_config, 0.1) == 0)


class TestInversion:
    def test_scalar_reciprocal(self, single_config):
        gamma = build_gamma(single_config, 2.0)
        result = invert_gamma(gamma)
        assert result.inverse[0, 0] == pytest.approx(1.0 / (0.0 - g_scale(2.0)), rel=1e-14)

    def test_product_is_identity(self, zero_config):
        gamma = build_gamma(zero_config, 0.8)
        result = invert_gamma(gamma)
        np.testing.assert_allclose(gamma.entries @ result.inverse, np.eye(3), atol=1e-12 * result.condition)

    def test_near_singular_carries_sigma(self):
        with pytest.raises(NearSingularError) as info:
            invert_gamma(np.array([[1.0, 1.0], [1.0, 1.0]]))
        assert info.value.sigma_min < 1e-15

    def test_regular_limit_block(self, regular_config):
        inverse = invert_gamma(build_gamma(regular_config, 1e-6)).inverse
        f = np.array([1.0, -1.0]) / np.sqrt(2)
        predicted = -2 * np.pi * np.outer(f, f)
        assert np.max(np.abs(inverse - predicted)) < 5.0 / abs(g_scale(1e-6))


class TestJensenNenciu:
    def test_trivial_projection(self):
        result = jn_invert(np.diag([2.0, 4.0]), np.zeros((2, 2)))
        np.testing.assert_allclose(result.inverse, np.diag([0.5, 0.25]))

    def test_detects_kernel(self):
        result = jn_invert(np.diag([0.0, 1.0]), np.diag([1.0, 0.0]))
        assert result.singular
        np.testing.assert_allclose(np.abs(result.kernel), [1.0, 0.0], atol=1e-12)

    def test_singular_shift_rejected(self):
        with pytest.raises(PreconditionError):
            jn_invert(np.diag([-1.0, 1.0]), np.diag([1.0, 0.0]))

    @given(seed=st.integers(0, 10_000))
    def test_agrees_with_direct_inverse(self, seed):
        rng = np.random.default_rng(seed)
        q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        a = q @ np.diag(rng.uniform(1.0, 3.0, 5) * rng.choice([-1, 1], 5)) @ q.T
        basis, _ = np.linalg.qr(rng.standard_normal((5, 2)))
        s = basis @ basis.T
        assume(np.linalg.cond(a + s) < 1e6)
        try:
            result = jn_invert(a, s)
        except PreconditionError:
            return
        if not result.singular:
            np.testing.assert_allclose(result.inverse, np.linalg.inv(a), atol=1e-8)
