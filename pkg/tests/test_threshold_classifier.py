import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import linalg

from threshold_lab.errors import InternalInconsistencyError, SingularityError, WrongCaseError
from threshold_lab.spectral.gamma_core import Configuration, build_structure
from threshold_lab.spectral.load_lab_config import LAB_CFG
from threshold_lab.spectral.threshold_classifier import (PWaveData, RegularData, SWaveData, ThresholdCase,
                                                         ZeroEigenvalueData, classify, classify_two_centres,
                                                         projection_kernel, pwave_positivity_identity,
                                                         resonance_functions)

F = np.array([1.0, -1.0]) / np.sqrt(2)

TWO_CENTRE_DISTANCES = (0.5, 1.0, 2.0, np.e, 10.0)
GRID_OFFSETS = 0.25 * np.arange(-10, 10)


def _kernel_of_sds(structure):
    """Projection onto the kernel of S D̃ S in range(S), and the reference scale of D̃."""
    scale = max(np.linalg.norm(structure.dtilde, 2), 1 / (2 * np.pi))
    return projection_kernel(structure.dtilde, structure.proj_s, scale=scale), scale


def _planted_configuration(seed):
    """
    Random centres (N = 2..6) with strengths solving D̃t = c1̂ for a random t in range(S),
    so that t lies in the kernel of S D̃ S. Every fifth seed uses c = 0.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    centres = rng.uniform(-3.0, 3.0, (n, 2))
    while np.min(Configuration(centres, np.zeros(n)).distances + 10 * np.eye(n)) < 0.3:
        centres = rng.uniform(-3.0, 3.0, (n, 2))
    t = np.zeros(n)
    while np.min(np.abs(t)) < 0.2 * np.max(np.abs(t)) or not np.any(t):
        t = rng.standard_normal(n)
        t -= t.mean()
    c = 0.0 if seed % 5 == 0 else rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0)
    logs = build_structure(Configuration(centres, np.zeros(n))).dtilde
    return Configuration(centres, (c - logs @ t) / t), t / np.linalg.norm(t), c


class TestClassify:
    def test_single_centre_always_regular(self, single_config):
        for alpha in (-3.0, 0.0, 2.5):
            assert classify(single_config.with_strengths([alpha])).case is ThresholdCase.REGULAR

    def test_regular_pair(self, regular_config):
        result = classify(regular_config)
        assert result.case is ThresholdCase.REGULAR
        assert isinstance(result.data, RegularData)
        np.testing.assert_allclose(result.data.inverse_block, -2 * np.pi * np.outer(F, F), atol=1e-12)
        assert not result.diagnostics.ill_conditioned

    def test_swave_pair(self, swave_config):
        result = classify(swave_config)
        assert result.case is ThresholdCase.S_WAVE
        assert isinstance(result.data, SWaveData)
        np.testing.assert_allclose(result.data.f, F, atol=1e-12)
        assert result.data.b == pytest.approx(-1 / np.sqrt(2), abs=1e-12)
        assert result.data.gamma0 == pytest.approx(1.0, abs=1e-12)

    def test_pwave_pair(self, pwave_config):
        result = classify(pwave_config)
        assert result.case is ThresholdCase.P_WAVE
        assert isinstance(result.data, PWaveData)
        assert result.data.rank == 1
        np.testing.assert_allclose(result.data.vectors[:, 0], F, atol=1e-12)
        np.testing.assert_allclose(result.data.weights, [8.0], rtol=1e-12)

    def test_zero_eigenvalue_triple(self, zero_config):
        result = classify(zero_config)
        assert result.case is ThresholdCase.ZERO_EIGENVALUE
        assert isinstance(result.data, ZeroEigenvalueData)
        assert result.data.multiplicity == 1
        assert result.data.pwave_rank == 0
        np.testing.assert_allclose(result.data.basis[:, 0], np.array([1.0, -2.0, 1.0]) / np.sqrt(6), atol=1e-10)

    def test_to_dict_is_tagged(self, swave_config):
        payload = classify(swave_config).to_dict()
        assert payload["case"] == "s-wave"
        assert set(payload) >= {"diagnostics", "f", "b", "gamma0"}
        assert payload["diagnostics"]["decisions"][0]["name"].startswith("S D~ S")

    @given(angle=st.floats(0.0, 6.3), shift=st.tuples(st.floats(-10, 10), st.floats(-10, 10)))
    def test_invariant_under_euclidean_motions(self, zero_config, pwave_config, angle, shift):
        assert classify(zero_config.moved(angle, shift)).case is ThresholdCase.ZERO_EIGENVALUE
        assert classify(pwave_config.moved(angle, shift)).case is ThresholdCase.P_WAVE

    @given(seed=st.integers(0, 100_000), n=st.integers(2, 6))
    def test_random_configurations_classify(self, seed, n):
        rng = np.random.default_rng(seed)
        centres = np.column_stack([np.arange(n) * 1.5, rng.uniform(-0.5, 0.5, n)])
        config = Configuration(centres, rng.uniform(-1.0, 1.0, n))
        result = classify(config)
        assert result.case in set(ThresholdCase)
        if result.case is ThresholdCase.S_WAVE:
            assert abs(result.data.b) > result.diagnostics.tolerance


class TestTwoCentres:
    @pytest.mark.parametrize("alphas, distance, expected", [
        ((0.0, 0.0), 1.0, ThresholdCase.P_WAVE),
        ((1.0, -1.0), 1.0, ThresholdCase.S_WAVE),
        ((0.0, 0.0), np.e, ThresholdCase.REGULAR),
    ])
    def test_closed_form(self, alphas, distance, expected):
        assert classify_two_centres(*alphas, distance) is expected

    @given(a1=st.floats(-2, 2), a2=st.floats(-2, 2), distance=st.floats(0.2, 5.0))
    def test_agrees_with_general_classifier(self, a1, a2, distance):
        config = Configuration([[0.0, 0.0], [distance, 0.0]], [a1, a2])
        assert classify(config).case is classify_two_centres(a1, a2, distance)

    @pytest.mark.parametrize("distance", TWO_CENTRE_DISTANCES)
    def test_grid_with_boundary_lines(self, distance):
        c = np.log(distance) / (2 * np.pi)
        on_line = 0
        for x1 in GRID_OFFSETS:
            for x2 in GRID_OFFSETS:
                a1, a2 = c + x1, c + x2
                result = classify(Configuration([[0.0, 0.0], [distance, 0.0]], [a1, a2]))
                assert result.case is classify_two_centres(a1, a2, distance), (a1, a2)
                decision = result.diagnostics.decisions[0]
                if x1 + x2 == 0.0:
                    on_line += 1
                    assert result.case is not ThresholdCase.REGULAR
                    assert decision.largest_discarded <= decision.threshold
                else:
                    assert result.case is ThresholdCase.REGULAR
                    assert decision.margin > LAB_CFG.ill_conditioned_factor
        assert on_line == 19

    @pytest.mark.parametrize("distance", TWO_CENTRE_DISTANCES)
    @pytest.mark.parametrize("offsets, expected", [
        ((0.5, -0.5), ThresholdCase.REGULAR),
        ((0.0, 0.0), ThresholdCase.S_WAVE),
    ])
    def test_margin_flagged_near_boundary(self, distance, offsets, expected):
        c = np.log(distance) / (2 * np.pi)
        a1, a2 = c + offsets[0], c + offsets[1]
        threshold = LAB_CFG.singular_value_tol * max(np.linalg.norm([[a1, c], [c, a2]], 2), 1 / (2 * np.pi))
        if expected is ThresholdCase.REGULAR:
            # (α₁ + α₂)/2 − c at twice the threshold
            a2 += 4 * threshold
        else:
            # on the sum line, |D̃f| at twice the threshold
            a1, a2 = a1 + 2 * threshold, a2 - 2 * threshold
        with pytest.warns(RuntimeWarning, match="within a factor"):
            result = classify(Configuration([[0.0, 0.0], [distance, 0.0]], [a1, a2]))
        assert result.diagnostics.ill_conditioned
        assert result.case is expected
        assert classify_two_centres(a1, a2, distance) is expected


class TestRankLemma:
    def test_planted_kernels(self):
        for seed in range(500):
            config, t, c = _planted_configuration(seed)
            structure = build_structure(config)
            kernel, scale = _kernel_of_sds(structure)
            assert t @ kernel @ t == pytest.approx(1.0, abs=1e-8), seed
            sigma = linalg.svdvals(structure.dtilde @ kernel)
            assert np.count_nonzero(sigma > LAB_CFG.singular_value_tol * scale) <= 1, seed
            result = classify(config, structure=structure)
            if c == 0.0:
                assert result.case is ThresholdCase.P_WAVE, seed
            else:
                assert result.case is ThresholdCase.S_WAVE, seed
                assert abs(result.data.f @ t) == pytest.approx(1.0, abs=1e-8), seed
                assert abs(result.data.b) > result.diagnostics.tolerance, seed

    def test_mixed_structure_is_reported(self):
        centres = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
        logs = build_structure(Configuration(centres, np.zeros(3))).dtilde
        l01, l02, l12 = logs[0, 1], logs[0, 2], logs[1, 2]
        u = np.array([l01 + l02 - l12, l01 + l12 - l02, l02 + l12 - l01]) / 2
        config = Configuration(centres, 2 * u)
        structure = build_structure(config)
        np.testing.assert_allclose(structure.dtilde, np.add.outer(u, u), atol=1e-15)
        kernel, scale = _kernel_of_sds(structure)
        assert np.trace(kernel) == pytest.approx(2.0)
        sigma = linalg.svdvals(structure.dtilde @ kernel)
        assert np.count_nonzero(sigma > LAB_CFG.singular_value_tol * scale) == 1
        with pytest.raises(InternalInconsistencyError, match=r"u 1\^t \+ 1 u\^t"):
            classify(config, structure=structure)


class TestProjectionKernel:
    def test_identity_has_no_kernel(self):
        s = np.eye(3) - np.full((3, 3), 1 / 3)
        np.testing.assert_allclose(projection_kernel(np.eye(3), s), np.zeros((3, 3)), atol=1e-15)

    def test_planted_kernel(self):
        rng = np.random.default_rng(7)
        q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        matrix = q @ np.diag([0.0, 0.0, 1.0, -2.0, 3.0]) @ q.T
        kernel = projection_kernel(matrix, np.eye(5))
        expected = q[:, :2] @ q[:, :2].T
        np.testing.assert_allclose(kernel, expected, atol=1e-10)


class TestResonanceFunctions:
    def test_regular_is_rejected(self, regular_config):
        with pytest.raises(WrongCaseError, match="regular"):
            resonance_functions(classify(regular_config), regular_config)

    def test_swave_far_field(self, swave_config):
        (phi,) = resonance_functions(classify(swave_config), swave_config)
        offset, exponent = phi.far_field()
        assert offset == pytest.approx(-1 / np.sqrt(2))
        assert exponent == pytest.approx(-1.0, abs=0.1)

    def test_pwave_far_field(self, pwave_config):
        (phi,) = resonance_functions(classify(pwave_config), pwave_config)
        offset, exponent = phi.far_field()
        assert offset == 0.0
        assert exponent == pytest.approx(-1.0, abs=0.1)

    def test_zero_mode_far_field(self, zero_config):
        (psi,) = resonance_functions(classify(zero_config), zero_config)
        assert psi.kind == "zero-mode"
        assert psi.far_field()[1] == pytest.approx(-2.0, abs=0.1)

    def test_singular_at_centres(self, swave_config):
        (phi,) = resonance_functions(classify(swave_config), swave_config)
        with pytest.raises(SingularityError):
            phi(np.array([1.0, 0.0]))

    def test_pwave_positivity_identity(self, pwave_config):
        lhs, rhs = pwave_positivity_identity(pwave_config, F)
        assert lhs == pytest.approx(rhs, rel=1e-14)
        assert lhs == pytest.approx(0.125)
