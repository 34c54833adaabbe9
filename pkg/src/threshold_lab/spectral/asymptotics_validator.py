"""
Low-energy behaviour of Γ(λ)⁻¹ in each threshold case.

Leading terms (λ → 0, g = g(λ)):
    regular          [S D̃ S]⁻¹
    s-wave           N g T[T D̃² T]⁻¹T
    p-wave           −(N g λ²)⁻¹ T[T 𝒢₁ T]⁻¹T
    zero eigenvalue  −(N λ²)⁻¹ T₁[T₁ 𝒢̃₂ T₁]⁻¹T₁

For the p-wave and zero-eigenvalue cases the remainder is far below the
rounding level of Γ⁻¹ itself once λ < 1e−6, so these sweeps assemble Γ in the
basis (T-block, 1̂, rest) with D̃ cleaned along T, keep the T-block as
leading part plus a cancellation-free correction, and obtain the remainder
from the block (Schur complement) inverse.
"""
import logging
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from scipy import integrate, linalg

from threshold_lab.errors import ConfigurationError, WrongCaseError
from threshold_lab.reports.sweep_report import SweepReport
from threshold_lab.spectral.gamma_core import (Configuration, StructureMatrices, build_gamma, build_structure,
                                               invert_gamma, low_energy_parts)
from threshold_lab.spectral.green_functions import TWO_PI, as_parameter, g_scale
from threshold_lab.spectral.load_lab_config import LAB_CFG
from threshold_lab.spectral.numerics import (central_difference, equilibrated_inverse, fit_line, fit_rates,
                                             geometric_grid, spectral_norm)
from threshold_lab.spectral.threshold_classifier import (PWaveData, RegularData, SWaveData, ThresholdCase,
                                                         ThresholdClassification, ZeroEigenvalueData, classify)

logger = logging.getLogger(__name__)

_BOUNDED_SLOPE = 0.5


def leading_term(classification: ThresholdClassification, config: Configuration, lam) -> np.ndarray:
    """Leading term of Γ(λ)⁻¹ for the classified threshold case."""
    lam = as_parameter(lam)
    g = g_scale(lam)
    n = config.n
    data = classification.data
    if isinstance(data, RegularData):
        return np.asarray(data.inverse_block, dtype=complex)
    if isinstance(data, SWaveData):
        return n * g * data.gamma0**2 * np.outer(data.f, data.f)
    if isinstance(data, PWaveData):
        block = (data.vectors * data.weights) @ data.vectors.T
        return -block / (n * g * lam.value**2)
    if isinstance(data, ZeroEigenvalueData):
        block = data.basis @ linalg.inv(data.g2tilde_block) @ data.basis.T
        return -block / (n * lam.value**2)
    raise WrongCaseError(f"no leading term for {classification.case}")


def remainder_scale(case: ThresholdCase, lam: float, g: complex) -> float:
    """Size of the remainder after the leading term: 1/|g|, 1, λ⁻², λ⁻²/|g|."""
    if case is ThresholdCase.REGULAR:
        return 1.0 / abs(g)
    if case is ThresholdCase.S_WAVE:
        return 1.0
    if case is ThresholdCase.P_WAVE:
        return lam**-2
    return lam**-2 / abs(g)


@dataclass(frozen=True)
class _Sample:
    predicted: float
    computed: float
    error: float


def _direct_sample(config: Configuration, classification: ThresholdClassification, lam: float) -> _Sample:
    inverse = invert_gamma(build_gamma(config, lam), max_condition=np.inf).inverse
    lead = leading_term(classification, config, lam)
    return _Sample(predicted=spectral_norm(lead), computed=spectral_norm(inverse),
                   error=spectral_norm(inverse - lead))


def _compensated_sample(config: Configuration, structure: StructureMatrices,
                        classification: ThresholdClassification, lam: float) -> _Sample:
    data = classification.data
    n = config.n
    lam2 = lam**2
    if isinstance(data, PWaveData):
        block, t_basis = data.vectors, data.vectors
    else:
        block, t_basis = data.basis, data.t_basis

    e = np.ones((n, 1)) / np.sqrt(n)
    t_rest = t_basis @ linalg.null_space(block.T @ t_basis) if t_basis.shape[1] > block.shape[1] \
        else np.zeros((n, 0))
    other = linalg.null_space(np.column_stack([e, t_basis]).T)
    rest = np.column_stack([e, t_rest, other])
    rest_in_t = np.r_[False, np.ones(t_rest.shape[1], bool), np.zeros(other.shape[1], bool)]

    parts = low_energy_parts(config, lam, structure)
    g = parts.g
    e_full = parts.e

    t_proj = t_basis @ t_basis.T
    cleaned = (np.eye(n) - t_proj) @ structure.dtilde @ (np.eye(n) - t_proj)
    static = rest.T @ cleaned @ rest
    static[rest_in_t, :] = 0.0
    static[:, rest_in_t] = 0.0
    static[0, 0] += -g * n
    m_rr = static + rest.T @ e_full @ rest
    m_rr = 0.5 * (m_rr + m_rr.T)
    m_br = block.T @ e_full @ rest

    g1_b = block.T @ structure.g1 @ block
    if isinstance(data, PWaveData):
        ell = -n * g * lam2 * g1_b
        delta = block.T @ parts.e_rest @ block - n * lam2 * (block.T @ structure.g2 @ block)
    else:
        ell = -n * lam2 * (block.T @ structure.g2tilde @ block)
        delta = block.T @ parts.e_rest @ block - n * g * lam2 * g1_b - n * lam2 * g1_b / TWO_PI
    ell = 0.5 * (ell + ell.T)
    delta = 0.5 * (delta + delta.T)

    rr_inv = equilibrated_inverse(m_rr)
    coupling = m_br @ rr_inv
    schur = coupling @ m_br.T
    sigma = ell + delta - schur
    sigma_inv = linalg.inv(sigma)
    ell_inv = linalg.inv(ell)

    err_bb = sigma_inv @ (schur - delta) @ ell_inv
    inv_br = -sigma_inv @ coupling
    inv_rr = rr_inv + coupling.T @ sigma_inv @ coupling
    error = np.block([[err_bb, inv_br], [inv_br.T, inv_rr]])
    lead = np.zeros_like(error)
    k = block.shape[1]
    lead[:k, :k] = ell_inv
    return _Sample(predicted=spectral_norm(ell_inv), computed=spectral_norm(error + lead),
                   error=spectral_norm(error))


def expansion_sweep(config: Configuration, lambda_grid=None,
                    classification: Optional[ThresholdClassification] = None,
                    tol: Optional[float] = None) -> SweepReport:
    """
    Compare Γ(λ)⁻¹ with its leading term on a decreasing λ grid.

    Args:
        config (Configuration): The point interactions.
        lambda_grid (array-like, optional): Real λ values in (0, 1); configured grid otherwise.
        classification (ThresholdClassification, optional): Pre-computed classification.
        tol (float, optional): Classification tolerance.

    Returns:
        SweepReport: Rows (lambda, predicted_norm, computed_norm, abs_err, rel_err,
        scale, scaled_err) and a summary with the joint rate fit, fit quality,
        selected model and the `remainder_bounded` flag.
    """
    classification = classification or classify(config, tol)
    structure = build_structure(config)
    if lambda_grid is None:
        lambda_grid = geometric_grid(LAB_CFG.lambda_min, LAB_CFG.lambda_max,
                                     LAB_CFG.lambda_points_per_decade, decreasing=True)
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    compensated = classification.case in (ThresholdCase.P_WAVE, ThresholdCase.ZERO_EIGENVALUE)

    rows = []
    for lam in lambda_grid:
        if compensated:
            sample = _compensated_sample(config, structure, classification, lam)
        else:
            sample = _direct_sample(config, classification, lam)
        scale = remainder_scale(classification.case, lam, g_scale(lam))
        rows.append({"lambda": lam, "predicted_norm": sample.predicted, "computed_norm": sample.computed,
                     "abs_err": sample.error,
                     "rel_err": sample.error / sample.predicted if sample.predicted > 0 else np.inf,
                     "scale": scale, "scaled_err": sample.error / scale})
    frame = pd.DataFrame(rows)

    notes = []
    positive = frame["abs_err"].to_numpy() > 0
    if np.count_nonzero(positive) >= 3:
        fit = fit_rates(frame["lambda"].to_numpy()[positive], frame["abs_err"].to_numpy()[positive])
        loglog = np.log(np.abs(np.log(frame["lambda"].to_numpy()[positive])))
        scaled = np.log(frame["scaled_err"].to_numpy()[positive])
        bounded_slope = 0.0 if np.std(scaled) < 1e-3 else fit_line(loglog, scaled).slope
        summary = {"power_exponent": fit.power_exponent, "log_exponent": fit.log_exponent,
                   "fit_quality": fit.quality, "model": fit.model, "scaled_slope": bounded_slope,
                   "remainder_bounded": bool(bounded_slope <= _BOUNDED_SLOPE)}
    else:
        notes.append("remainder vanishes to rounding on the grid")
        summary = {"power_exponent": 0.0, "log_exponent": 0.0, "fit_quality": 1.0, "model": "constant",
                   "scaled_slope": 0.0, "remainder_bounded": True}
    summary.update(case=classification.case.value, points=len(frame), compensated=compensated)
    if summary["fit_quality"] < LAB_CFG.fit_quality_warning:
        notes.append(f"fit quality {summary['fit_quality']:.3f} below {LAB_CFG.fit_quality_warning}")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
    logger.info("expansion sweep (%s): bounded=%s quality=%.4f", summary["case"],
                summary["remainder_bounded"], summary["fit_quality"])
    return SweepReport(frame=frame, summary=summary, notes=notes)


def derivative_bounds_probe(config: Configuration, lambda_grid=None, ell_max: int = 2,
                            step: Optional[float] = None,
                            classification: Optional[ThresholdClassification] = None) -> SweepReport:
    """
    Sup over the grid of λ^ℓ |∂_λ^ℓ Γ(λ)⁻¹_jk| for ℓ <= ell_max (regular threshold only).

    Derivatives are central differences with step `step`·λ; a second pass with
    half the step checks the constants (Richardson consistency within 5%).

    Raises:
        ConfigurationError: If ell_max > 3.
        WrongCaseError: If the threshold is not regular.
    """
    if not 0 <= ell_max <= 3:
        raise ConfigurationError(f"ell_max must lie in 0..3, got {ell_max}")
    classification = classification or classify(config)
    if classification.case is not ThresholdCase.REGULAR:
        raise WrongCaseError(f"derivative bounds need a regular threshold, got {classification.case.value}",
                             hint="run validate-asymptotics for the resonant cases")
    step = LAB_CFG.finite_difference_step if step is None else step
    lambda_grid = geometric_grid(1e-8, 0.5, 4) if lambda_grid is None else np.asarray(lambda_grid, float)

    def inverse(lam: float) -> np.ndarray:
        return invert_gamma(build_gamma(config, lam)).inverse

    rows = []
    for lam in lambda_grid:
        for ell in range(ell_max + 1):
            full = np.abs(central_difference(inverse, lam, ell, step * lam)) * lam**ell
            half = np.abs(central_difference(inverse, lam, ell, 0.5 * step * lam)) * lam**ell
            for (j, k), value in np.ndenumerate(full):
                rows.append({"lambda": lam, "j": j, "k": k, "ell": ell,
                             "scaled_derivative": value, "scaled_derivative_half_step": half[j, k]})
    frame = pd.DataFrame(rows)
    sups = frame.groupby(["j", "k", "ell"])[["scaled_derivative", "scaled_derivative_half_step"]].max()
    constants = {f"{j},{k},{ell}": float(v) for (j, k, ell), v in sups["scaled_derivative"].items()}
    reference = np.maximum(sups["scaled_derivative"].to_numpy(), np.finfo(float).tiny)
    change = np.abs(sups["scaled_derivative_half_step"].to_numpy() - sups["scaled_derivative"].to_numpy())
    summary = {"constants": constants, "richardson_change": float(np.max(change / reference)),
               "consistent": bool(np.all(change <= 0.05 * reference + 1e-12)), "ell_max": ell_max}
    return SweepReport(frame=frame, summary=summary)


@dataclass(frozen=True, eq=False)
class PositivityReport:
    """
    Spectrum of T₁ M T₁ with M = δ̂|y_j−y_k|² log|y_j−y_k|², plus the integral
    identity F(0) = −∫₀^∞ F′(λ) dλ for sampled f in range(T₁).
    """

    eigenvalues: np.ndarray
    strictly_definite: bool
    sign: int
    f_values: np.ndarray
    integrated: np.ndarray
    derivative_negative: bool
    vacuous: bool


def positivity_check(centres, t1_basis, n_samples: int = 8, seed: int = 0) -> PositivityReport:
    """
    Check that T₁ M T₁ is definite on range(T₁) and that
    F(λ) = Σ_{j≠k} f_j f_k r² log(r² + λ) satisfies F(0) > 0, F′ < 0 and F(0) = −∫F′.
    """
    centres = np.asarray(centres, dtype=float)
    t1_basis = np.asarray(t1_basis, dtype=float).reshape(len(centres), -1)
    if t1_basis.shape[1] == 0:
        warnings.warn("T1 = 0: positivity check is vacuous", RuntimeWarning, stacklevel=2)
        empty = np.zeros(0)
        return PositivityReport(empty, True, 1, empty, empty, True, vacuous=True)

    diff = centres[:, None, :] - centres[None, :, :]
    r2 = np.sum(diff**2, axis=2)
    off = ~np.eye(len(centres), dtype=bool)
    m = np.zeros_like(r2)
    m[off] = r2[off] * np.log(r2[off])
    eigenvalues = linalg.eigvalsh(t1_basis.T @ m @ t1_basis)
    scale = max(np.max(np.abs(eigenvalues)), np.finfo(float).tiny)
    strictly = bool(np.all(eigenvalues > 1e-12 * scale) or np.all(eigenvalues < -1e-12 * scale))
    sign = int(np.sign(eigenvalues[0])) if strictly else 0

    rng = np.random.default_rng(seed)
    samples = t1_basis @ rng.standard_normal((t1_basis.shape[1], n_samples))
    samples /= np.linalg.norm(samples, axis=0)

    def f_of(lam: float, f: np.ndarray) -> float:
        weights = np.outer(f, f)
        return float(np.sum(weights[off] * r2[off] * np.log(r2[off] + lam)))

    def f_prime(lam: float, f: np.ndarray) -> float:
        # equals −Σ_{j,k} f_j f_k λ/(r²+λ) when Σf = 0
        weights = np.outer(f, f)
        return float(np.sum(weights[off] * r2[off] / (r2[off] + lam)))

    f_values, integrated, negative = [], [], True
    for f in samples.T:
        f_values.append(f_of(0.0, f))
        value, _ = integrate.quad(f_prime, 0.0, np.inf, args=(f,), limit=400, epsabs=1e-13, epsrel=1e-10)
        integrated.append(-value)
        negative &= all(f_prime(lam, f) < 0 for lam in (0.1, 1.0, 10.0))
    logger.info("positivity of T1 M T1: eigenvalues %s", np.array2string(eigenvalues, precision=6))
    return PositivityReport(eigenvalues=eigenvalues, strictly_definite=strictly, sign=sign,
                            f_values=np.asarray(f_values), integrated=np.asarray(integrated),
                            derivative_negative=bool(negative), vacuous=False)
